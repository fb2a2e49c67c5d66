//! End-to-end acceptance checks. Each test prints one PASS/FAIL line and then
//! asserts on the same condition. Run with `--nocapture` to see the lines.

use std::time::Instant;

use bootsl::diagnostics::{iat, mcse_mean, mcse_sd, weighted_mean_sd};
use bootsl::likelihood::{bsl_sigma, sl_loglik, Estimator, EstimatorConfig, EstimatorKind, MuSource};
use bootsl::models::{GaussianToy, IsingModel, LotkaVolterra, Model};
use bootsl::resampling::{
    make_blb_point_counts, make_block_plan, make_block_set, make_iid_plan, make_spatial_block_set, resample_iid,
    ResamplePlan,
};
use bootsl::rng::{stream, SimRng};
use bootsl::samplers::{exchange_chain, make_schedule, mh_chain, smc_blbsl, Prior, SmcConfig};
use bootsl::simulators::{ising_gibbs, IsingInit};
use bootsl::stats::{combine_block_statistics, BlockStatistic, IidStatistic, SummaryVector};
use rand::Rng;

const SEED: u64 = 20_240_601;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("[{}] criterion {id:02} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id:02} {name}: {detail}");
}

fn variance(xs: &[f64]) -> f64 {
    let (_, sd) = weighted_mean_sd(xs, None);
    sd * sd * xs.len() as f64 / (xs.len() - 1) as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Observed toy data plus the conjugate Gamma(1 + N/2, 1 + sum y^2 / 2)
/// posterior mean and sd under an Exp(1) prior on the precision.
struct Toy {
    model: GaussianToy,
    s_obs: SummaryVector,
    post_mean: f64,
    post_sd: f64,
}

fn toy(n: usize, tau: f64, rng: &mut SimRng) -> Toy {
    let model = GaussianToy::new(n);
    let y = model.simulate(&[tau], n, rng).unwrap();
    let shape = 1.0 + n as f64 / 2.0;
    let rate = 1.0 + y.iter().map(|v| v * v).sum::<f64>() / 2.0;
    Toy { s_obs: model.summarize(&y).unwrap(), model, post_mean: shape / rate, post_sd: shape.sqrt() / rate }
}

#[test]
fn c01_toy_conjugate_accuracy() {
    let start = Instant::now();
    let t = toy(10_000, 0.25, &mut stream(SEED, "c01-data", 0));
    let est = Estimator::new(EstimatorConfig::new(EstimatorKind::Sl, 50), t.s_obs.clone(), None).unwrap();
    let prior = Prior::Exponential { rate: 1.0, dim: 1 };
    let chain = mh_chain(
        &[t.post_mean],
        &[0.002],
        20_000,
        |theta, rng| est.loglik(&t.model, theta, None, rng),
        |theta| prior.log_density(theta),
        &mut stream(SEED, "c01-chain", 0),
    )
    .unwrap();
    let xs = chain.coordinate(0);
    let (mean, sd) = weighted_mean_sd(&xs, None);
    let (se_mean, se_sd) = (mcse_mean(&xs).unwrap(), mcse_sd(&xs).unwrap());
    let secs = start.elapsed().as_secs_f64();
    let pass = (mean - t.post_mean).abs() < 3.0 * se_mean && (sd - t.post_sd).abs() < 3.0 * se_sd && secs < 300.0;
    verdict(
        1,
        "toy conjugate accuracy",
        pass,
        format!(
            "mean {mean:.6} vs {:.6} (3 mcse = {:.2e}), sd {sd:.3e} vs {:.3e} (3 mcse = {:.2e}), {secs:.0}s",
            t.post_mean,
            3.0 * se_mean,
            t.post_sd,
            3.0 * se_sd
        ),
    );
}

#[test]
fn c02_bootstrap_variance_oracle() {
    let start = Instant::now();
    let (n, tau) = (10_000, 0.25);
    let model = GaussianToy::new(n);
    let mut total = 0.0;
    for rep in 0..20 {
        let mut rng = stream(SEED, "c02", rep);
        let plan = ResamplePlan::Iid(make_iid_plan(n, 200, &mut rng, rep).unwrap());
        total += bsl_sigma(&model, &[tau], 10, &plan, &mut rng).unwrap()[(0, 0)];
    }
    let average = total / 20.0;
    let oracle = 1.0 / (2.0 * n as f64 * tau);
    let rel = (average - oracle).abs() / oracle;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "bootstrap variance oracle",
        rel < 0.2 && secs < 120.0,
        format!("mean sigma {average:.4e} vs {oracle:.4e}, relative error {rel:.3} (tol 0.2), {secs:.0}s"),
    );
}

#[test]
fn c03_variance_reduction() {
    let (n, tau, m) = (10_000, 0.25, 2);
    let t = toy(n, tau, &mut stream(SEED, "c03-data", 0));
    let plan = ResamplePlan::Iid(make_iid_plan(n, 100, &mut stream(SEED, "c03-plan", 0), 3).unwrap());
    let mut sl = Vec::new();
    let mut bsl = Vec::new();
    for seed in 0..100 {
        let mut rng = stream(SEED, "c03-sl", seed);
        sl.push(sl_loglik(&t.model, &[tau], &t.s_obs, m, MuSource::Estimated, &mut rng).unwrap());
        let mut rng = stream(SEED, "c03-bsl", seed);
        bsl.push(
            bootsl::likelihood::bsl_loglik(&t.model, &[tau], &t.s_obs, m, &plan, MuSource::Estimated, &mut rng)
                .unwrap(),
        );
    }
    let ratio = variance(&bsl) / variance(&sl);
    let mut rng = stream(SEED, "c03-boot", 0);
    let mut ratios: Vec<f64> = (0..2000)
        .map(|_| {
            let pick = |xs: &[f64], rng: &mut SimRng| -> Vec<f64> {
                (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect()
            };
            let b = pick(&bsl, &mut rng);
            let s = pick(&sl, &mut rng);
            variance(&b) / variance(&s)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let (lo, hi) = (quantile(&ratios, 0.025), quantile(&ratios, 0.975));
    verdict(
        3,
        "variance reduction",
        ratio < 1.0 && hi < 1.0,
        format!("var ratio bsl/sl {ratio:.3e}, 95% interval [{lo:.3e}, {hi:.3e}] (must exclude 1)"),
    );
}

#[test]
fn c04_blb_fidelity() {
    let n = 1000;
    let mut rng = stream(SEED, "c04-bitwise", 0);
    let data = GaussianToy::new(n).simulate(&[0.25], n, &mut rng).unwrap();
    let index = make_iid_plan(n, 100, &mut rng, 4).unwrap();
    let counts = ResamplePlan::Counts(index.to_counts());
    let mut mismatches = 0;
    for kind in [IidStatistic::Mean, IidStatistic::Variance, IidStatistic::Sd] {
        let model = GaussianToy { n, statistic: kind };
        let weighted = model.resample_statistics(&data, &counts).unwrap();
        for (r, w) in weighted.iter().enumerate() {
            let explicit = kind.evaluate(&resample_iid(&data, index.row(r)).unwrap()).unwrap();
            mismatches += usize::from(w[0].to_bits() != explicit.to_bits());
        }
    }

    let (big_n, small_n, tau) = (10_000, 100, 0.25);
    let model = GaussianToy::new(big_n);
    let mut total = 0.0;
    for rep in 0..50 {
        let mut rng = stream(SEED, "c04-blb", rep);
        let plan = ResamplePlan::Counts(make_blb_point_counts(small_n, big_n, 100, &mut rng, rep).unwrap());
        total += bootsl::likelihood::blbsl_sigma(&model, &[tau], small_n, 10, &plan, &mut rng).unwrap().sigma[(0, 0)];
    }
    let average = total / 50.0;
    let oracle = 1.0 / (2.0 * big_n as f64 * tau);
    let rel = (average - oracle).abs() / oracle;
    verdict(
        4,
        "BLB fidelity",
        mismatches == 0 && rel < 0.3,
        format!("{mismatches} bitwise mismatches over 300 resamples; n=N/100 sigma {average:.4e} vs {oracle:.4e}, relative error {rel:.3} (tol 0.3)"),
    );
}

#[test]
fn c05_blb_bias_direction() {
    let start = Instant::now();
    let big_n = 100_000;
    let t = toy(big_n, 0.25, &mut stream(SEED, "c05-data", 0));
    let prior = Prior::Exponential { rate: 1.0, dim: 1 };
    let mut medians = Vec::new();
    for (k, n) in [100usize, 1000, 10_000].into_iter().enumerate() {
        let plan = std::sync::Arc::new(ResamplePlan::Counts(
            make_blb_point_counts(n, big_n, 100, &mut stream(SEED, "c05-plan", k as u64), 5).unwrap(),
        ));
        let config = EstimatorConfig::new(EstimatorKind::BlbSl, 10).with_subsample(n);
        let est = Estimator::new(config, t.s_obs.clone(), Some(plan)).unwrap();
        let sds: Vec<f64> = (0..10)
            .map(|rep| {
                let chain = mh_chain(
                    &[t.post_mean],
                    &[0.002],
                    C05_ITERATIONS,
                    |theta, rng| est.loglik(&t.model, theta, None, rng),
                    |theta| prior.log_density(theta),
                    &mut stream(SEED, "c05-chain", (k * 10 + rep) as u64),
                )
                .unwrap();
                weighted_mean_sd(&chain.coordinate(0), None).1
            })
            .collect();
        medians.push(median(sds));
    }
    let over = medians.iter().all(|&m| m > t.post_sd);
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        5,
        "BLB bias direction",
        over && monotone,
        format!(
            "median posterior sd for n=1e2,1e3,1e4: {:.3e}, {:.3e}, {:.3e}; conjugate {:.3e}; {secs:.0}s",
            medians[0], medians[1], medians[2], t.post_sd
        ),
    );
}

const C05_ITERATIONS: usize = 1000;

#[test]
fn c06_block_combination_exactness() {
    let mut rng = stream(SEED, "c06", 0);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for case in 0..1000u64 {
        let block = rng.random_range(1..=10usize);
        let size = block * rng.random_range(1..=10usize);
        let target = block * rng.random_range(1..=10usize);
        let scale = 10f64.powi(rng.random_range(-3..=6));
        let data: Vec<f64> = (0..size).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect();
        let blocks = make_block_set(size, block).unwrap();
        let plan = make_block_plan(blocks, target, 3, &mut rng, case).unwrap();
        let stats = BlockStatistic::temporal_means(&data, block).unwrap();
        let max_abs = data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for r in 0..plan.rows() {
            let combined = combine_block_statistics(&stats, plan.counts().row(r)).unwrap()[0];
            let explicit = IidStatistic::Mean.evaluate(&plan.resample_temporal(&data, r).unwrap()).unwrap();
            let err = (combined - explicit).abs();
            worst = worst.max(err / max_abs);
            failures += usize::from(err > 4.0 * f64::EPSILON * max_abs);
        }
    }
    verdict(
        6,
        "block-combination exactness",
        failures == 0,
        format!("{failures} of 3000 resamples beyond 4 eps max|x|; worst relative error {worst:.2e}"),
    );
}

#[test]
fn c07_ising_rescale_identity() {
    let mut details = Vec::new();
    let mut pass = true;
    for (side, tile) in [(100usize, 25usize), (100, 50), (200, 25)] {
        let tiles_per_side = side / tile;
        let tile_of = |r: usize, c: usize| (r / tile) * tiles_per_side + c / tile;
        let mut total = 0u64;
        let mut intra = 0u64;
        for r in 0..side {
            for c in 0..side {
                for (r2, c2) in [(r, (c + 1) % side), ((r + 1) % side, c)] {
                    total += 1;
                    intra += u64::from(tile_of(r, c) == tile_of(r2, c2));
                }
            }
        }
        let counted = total as f64 / intra as f64;
        let factor = IsingModel::rescale(side * side, tile);
        let ok = (counted - factor).abs() <= 4.0 * f64::EPSILON * factor;
        pass &= ok;
        details.push(format!("({side},{tile}) {factor} vs {total}/{intra}"));
    }
    verdict(7, "Ising rescale identity", pass, details.join("; "));
}

#[test]
fn c08_ising_end_to_end() {
    let start = Instant::now();
    let side = 100;
    let data = ising_gibbs(0.3, side, 10, &mut stream(SEED, "c08-data", 0), IsingInit::Random).unwrap();
    let s_obs = SummaryVector::scalar(data.statistic() as f64).unwrap();
    let prior = Prior::Uniform { lo: 0.0, hi: 1.0, dim: 1 };

    let chain = exchange_chain(0.298, 0.001, 1000, &data, 10, &prior, &mut stream(SEED, "c08-exchange", 0)).unwrap();
    let xs = chain.coordinate(0);
    let (ex_mean, _) = weighted_mean_sd(&xs, None);
    let ex_se = mcse_mean(&xs).unwrap();

    let model = IsingModel::new(side);
    let blocks = make_spatial_block_set(50, 25, side).unwrap();
    let plan = ResamplePlan::Blocks(make_block_plan(blocks, side, 100, &mut stream(SEED, "c08-plan", 0), 8).unwrap());
    let config =
        SmcConfig { particles: 200, schedule: make_schedule(10).unwrap(), neighbours: 100, subsample: 2500, m: 1 };
    let run = smc_blbsl(&model, &s_obs, &prior, &config, &plan, &mut stream(SEED, "c08-smc", 0)).unwrap();
    let last = run.last();
    let (smc_mean, smc_sd) = weighted_mean_sd(&last.coordinate(0), Some(&last.weights));
    let smc_se = smc_sd / last.ess().sqrt();
    let combined = (ex_se * ex_se + smc_se * smc_se).sqrt();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "Ising end-to-end",
        (smc_mean - ex_mean).abs() < 2.0 * combined && secs < 1200.0,
        format!(
            "smc mean {smc_mean:.5} (se {smc_se:.1e}, ess {:.0}) vs exchange {ex_mean:.5} (se {ex_se:.1e}); tol {:.1e}; {secs:.0}s",
            last.ess(),
            2.0 * combined
        ),
    );
}

#[test]
fn c09_exchange_exactness() {
    let side = 3;
    let stats: Vec<f64> = (0..1u32 << 9)
        .map(|bits| {
            let spins = (0..9).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            bootsl::simulators::IsingState::new(side, spins).unwrap().statistic() as f64
        })
        .collect();
    let log_z = |theta: f64| bootsl::likelihood::log_mean_exp(&stats.iter().map(|s| theta * s).collect::<Vec<_>>());
    let data = ising_gibbs(0.3, side, 50, &mut stream(SEED, "c09-data", 0), IsingInit::Random).unwrap();
    let s_obs = data.statistic() as f64;
    let grid = 20_000;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..grid {
        let th = (k as f64 + 0.5) / grid as f64;
        let w = (th * s_obs - log_z(th)).exp();
        num += th * w;
        den += w;
    }
    let exact = num / den;
    let prior = Prior::Uniform { lo: 0.0, hi: 1.0, dim: 1 };
    let chain = exchange_chain(0.5, 0.4, 100_000, &data, 10, &prior, &mut stream(SEED, "c09-chain", 0)).unwrap();
    let xs = chain.coordinate(0);
    let (mean, _) = weighted_mean_sd(&xs, None);
    let se = mcse_mean(&xs).unwrap();
    verdict(
        9,
        "exchange exactness",
        (mean - exact).abs() < 3.0 * se,
        format!("chain mean {mean:.5} vs enumeration {exact:.5} (3 mcse = {:.1e}, S(y) = {s_obs})", 3.0 * se),
    );
}

struct LvRun {
    iat: f64,
    medians: Vec<f64>,
    covers: [bool; 3],
    acceptance: f64,
}

fn lv_chain(model: &LotkaVolterra, est: &Estimator, seed: u64) -> bootsl::Result<LvRun> {
    let truth = [1.0, 0.005, 0.6];
    let prior = Prior::LogUniform { lo: -6.0, hi: 2.0, dim: 3 };
    let chain = mh_chain(
        &truth,
        &[0.2, 0.001, 0.2],
        5000,
        |theta, rng| est.loglik(model, theta, None, rng),
        |theta| prior.log_density(theta),
        &mut stream(SEED, "c10-chain", seed),
    )?;
    let mut iats = 0.0;
    let mut medians = Vec::new();
    let mut covers = [false; 3];
    for j in 0..3 {
        let xs = chain.coordinate(j);
        iats += iat(&xs).unwrap_or(f64::INFINITY);
        let med = quantile(&xs, 0.5);
        // A chain that never moved brackets nothing.
        covers[j] = chain.accepted > 0
            && quantile(&xs, 0.025) <= truth[j]
            && truth[j] <= quantile(&xs, 0.975)
            && prior.log_density(&[med; 3]) > f64::NEG_INFINITY;
        medians.push(med);
    }
    Ok(LvRun { iat: iats / 3.0, medians, covers, acceptance: chain.acceptance_rate() })
}

#[test]
fn c10_lv_smoke_and_iat() {
    let start = Instant::now();
    let base = LotkaVolterra::new(50, 100, 2.0, 32);
    let path = base.simulate(&[1.0, 0.005, 0.6], 32, &mut stream(SEED, "c10-data", 0)).unwrap();
    let t_obs = base.summarize(&path).unwrap();
    let model = base.with_scaling(t_obs);
    let s_obs = model.summarize(&path).unwrap();
    let blocks = make_block_set(32, 8).unwrap();
    let plan = std::sync::Arc::new(ResamplePlan::Blocks(
        make_block_plan(blocks, 32, 100, &mut stream(SEED, "c10-plan", 0), 10).unwrap(),
    ));
    let sl = Estimator::new(EstimatorConfig::new(EstimatorKind::Sl, 2), s_obs.clone(), None).unwrap();
    let bsl = Estimator::new(EstimatorConfig::new(EstimatorKind::Bsl, 2).with_r(100), s_obs, Some(plan)).unwrap();

    let mut lines = Vec::new();
    let mut summarize = |name: &str, est: &Estimator| -> Option<(f64, bool)> {
        let mut iats = Vec::new();
        let mut covers = true;
        for seed in 0..5 {
            match lv_chain(&model, est, seed) {
                Ok(run) => {
                    iats.push(run.iat);
                    covers &= run.covers.iter().all(|&c| c);
                    lines.push(format!(
                        "{name} seed {seed}: iat {:.0}, acceptance {:.3}, medians ({:.3}, {:.4}, {:.3}), truth inside 95% {:?}",
                        run.iat, run.acceptance, run.medians[0], run.medians[1], run.medians[2], run.covers
                    ));
                }
                Err(e) => {
                    lines.push(format!("{name} seed {seed}: chain failed ({e})"));
                    return None;
                }
            }
        }
        Some((median(iats), covers))
    };
    let bsl_result = summarize("bsl", &bsl);
    let sl_result = summarize("sl", &sl);
    for line in &lines {
        println!("    {line}");
    }
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match (sl_result, bsl_result) {
        (Some((sl_iat, sl_cov)), Some((bsl_iat, bsl_cov))) => (
            bsl_iat <= sl_iat && sl_cov && bsl_cov,
            format!("median iat bsl {bsl_iat:.0} vs sl {sl_iat:.0}; truth covered sl {sl_cov}, bsl {bsl_cov}; {secs:.0}s"),
        ),
        (sl, bsl) => (
            false,
            format!("sl completed {}, bsl completed {}; {secs:.0}s", sl.is_some(), bsl.is_some()),
        ),
    };
    verdict(10, "LV smoke and directional IAT", pass, detail);
}

#[test]
fn c11_rerun_from_manifest_is_bitwise_identical() {
    use bootsl_cli::run::snapshot;
    use std::path::Path;
    use std::process::Command;

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let runs: [(&str, &str); 8] = [
        ("simulate", "toy_small.toml"),
        ("estimate", "toy_small.toml"),
        ("mcmc", "toy_small.toml"),
        ("replicate", "toy_small.toml"),
        ("smc", "toy_small.toml"),
        ("mcmc", "lv_small.toml"),
        ("exchange", "ising_small.toml"),
        ("experiment", "ising_small.toml"),
    ];
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bootsl");
    let mut mismatched = Vec::new();
    for (k, (cmd, file)) in runs.iter().enumerate() {
        let first = dir.path().join(format!("{k}-a"));
        let second = dir.path().join(format!("{k}-b"));
        let cfg = fixtures.join(file);
        let a = Command::new(bin)
            .args([cmd, "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap(), "--jobs", "2"])
            .status()
            .unwrap();
        let manifest = first.join("manifest.toml");
        let b = Command::new(bin)
            .args([cmd, "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()])
            .status()
            .unwrap();
        let same = a.success() && b.success() && snapshot(&first).unwrap() == snapshot(&second).unwrap();
        if !same {
            mismatched.push(format!("{cmd} {file}"));
        }
    }
    verdict(
        11,
        "determinism from manifest",
        mismatched.is_empty(),
        format!("{} runs, mismatched {:?}", runs.len(), mismatched),
    );
}
