use clap::Parser;

fn main() {
    let cli = bootsl_cli::Cli::parse();
    if let Err(e) = bootsl_cli::execute(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
