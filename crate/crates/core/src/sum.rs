//! Order-independent, correctly rounded summation.
//!
//! [`ExactSum`] is a fixed-point superaccumulator covering the full finite
//! `f64` range. Every finite addend is added exactly, so the rounded result
//! depends only on the multiset of addends and never on their order. This is
//! what lets a statistic computed from resampling counts agree bit for bit
//! with the same statistic computed on the explicitly materialised resample,
//! and keeps reductions reproducible however they are scheduled.

const LIMB_BITS: u32 = 32;
const LIMB_MASK: i64 = (1 << LIMB_BITS) - 1;
// Positions 0..=2097 plus room for the widest product and carries.
const LIMBS: usize = 72;
// Normalise before any limb could overflow an i64.
const MAX_PENDING: u32 = 1 << 29;

/// Exact accumulator for sums of `f64` values and of `count * f64` products.
#[derive(Clone, Debug)]
pub struct ExactSum {
    limbs: [i64; LIMBS],
    pending: u32,
    special: f64,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
fn decompose(x: f64) -> (bool, u64, u32) {
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as u32;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (negative, frac, 0)
    } else {
        (negative, frac | (1u64 << 52), biased - 1)
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self {
            limbs: [0; LIMBS],
            pending: 0,
            special: 0.0,
        }
    }

    #[inline]
    fn bump(&mut self) {
        self.pending += 1;
        if self.pending >= MAX_PENDING {
            self.normalize();
        }
    }

    /// Add one value exactly.
    #[inline]
    pub fn add(&mut self, x: f64) {
        if !x.is_finite() {
            self.special += x;
            return;
        }
        if x == 0.0 {
            return;
        }
        let (negative, mantissa, position) = decompose(x);
        let sign = 1 - 2 * i64::from(negative);
        let k = (position / LIMB_BITS) as usize;
        let v = u128::from(mantissa) << (position % LIMB_BITS);
        self.limbs[k] += sign * ((v as u64) & LIMB_MASK as u64) as i64;
        self.limbs[k + 1] += sign * ((v >> 32) as u64 & LIMB_MASK as u64) as i64;
        self.limbs[k + 2] += sign * (v >> 64) as i64;
        self.bump();
    }

    /// Add `count * x` exactly, without rounding the product.
    #[inline]
    pub fn add_product(&mut self, count: u32, x: f64) {
        if count == 0 {
            return;
        }
        if !x.is_finite() {
            self.special += f64::from(count) * x;
            return;
        }
        if x == 0.0 {
            return;
        }
        let (negative, mantissa, position) = decompose(x);
        let sign = 1 - 2 * i64::from(negative);
        let k = (position / LIMB_BITS) as usize;
        let v = (u128::from(mantissa) * u128::from(count)) << (position % LIMB_BITS);
        self.limbs[k] += sign * ((v as u64) & LIMB_MASK as u64) as i64;
        self.limbs[k + 1] += sign * ((v >> 32) as u64 & LIMB_MASK as u64) as i64;
        self.limbs[k + 2] += sign * ((v >> 64) as u64 & LIMB_MASK as u64) as i64;
        self.limbs[k + 3] += sign * (v >> 96) as i64;
        self.bump();
    }

    /// Fold another accumulator into this one; still exact.
    pub fn merge(&mut self, other: &ExactSum) {
        self.normalize();
        let mut o = other.clone();
        o.normalize();
        for (a, b) in self.limbs.iter_mut().zip(o.limbs.iter()) {
            *a += *b;
        }
        self.special += o.special;
        self.pending = 1;
    }

    fn normalize(&mut self) {
        for k in 0..LIMBS - 1 {
            let carry = self.limbs[k] >> LIMB_BITS;
            self.limbs[k] -= carry << LIMB_BITS;
            self.limbs[k + 1] += carry;
        }
        self.pending = 0;
    }

    /// The exact sum rounded to the nearest `f64` (ties to even).
    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let mut acc = self.clone();
        acc.normalize();
        let negative = acc.limbs[LIMBS - 1] < 0;
        if negative {
            for l in acc.limbs.iter_mut() {
                *l = -*l;
            }
            acc.normalize();
        }
        let Some(top) = acc.limbs.iter().rposition(|&l| l != 0) else {
            return 0.0;
        };
        let limb = |i: isize| -> u128 {
            if i < 0 {
                0
            } else {
                acc.limbs[i as usize] as u128
            }
        };
        let top = top as isize;
        let mut window = (limb(top) << 64) | (limb(top - 1) << 32) | limb(top - 2);
        if top >= 3 && acc.limbs[..(top - 2) as usize].iter().any(|&l| l != 0) {
            window |= 1;
        }
        let scale = 32 * (top - 2) as i32 - 1074;
        let magnitude = scale_pow2(window as f64, scale);
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

fn scale_pow2(mut x: f64, mut e: i32) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e)
}

// Largest magnitude, in bits, an i128 accumulator may reach.
const FIXED_BITS: u32 = 126;

/// `v` as an integer multiple of `2^(lo - 1074)`; `lo` must not exceed the
/// exponent position of any nonzero `v`.
#[inline]
fn to_fixed(v: f64, lo: u32) -> i128 {
    let bits = v.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as u32;
    let m = (bits & ((1u64 << 52) - 1)) | (u64::from(biased != 0) << 52);
    let shift = (biased.max(1) - 1).wrapping_sub(lo) & 127;
    let t = i128::from(m) << shift;
    let s = -((bits >> 63) as i128);
    (t ^ s) - s
}

#[inline]
fn position(v: f64) -> u32 {
    let biased = ((v.to_bits() >> 52) & 0x7ff) as u32;
    biased.max(1) - 1
}

fn bits_for(total: u64) -> u32 {
    64 - total.max(1).leading_zeros()
}

/// Values laid out on a common fixed-point grid, for repeated exact sums
/// with different integer weights.
///
/// Each finite value `m * 2^e` is stored as the integer `m << (e - base)`.
/// When the exponent spread of the data is too wide for an `i128`
/// accumulator the raw values are kept and sums go through [`ExactSum`].
/// Both routes return the correctly rounded exact result.
#[derive(Clone, Debug)]
pub struct ExactDot {
    values: Vec<f64>,
    fixed: Option<Vec<i128>>,
    base: i32,
    width: u32,
}

impl ExactDot {
    pub fn new(values: &[f64]) -> Self {
        Self::from_terms(values.to_vec())
    }

    /// Precompute `f(x)` for every value, rounding each term once.
    pub fn from_map(values: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self::from_terms(values.iter().map(|&x| f(x)).collect())
    }

    fn from_terms(values: Vec<f64>) -> Self {
        let mut lo = u32::MAX;
        let mut hi = 0u32;
        let mut finite = true;
        for &v in &values {
            if !v.is_finite() {
                finite = false;
                break;
            }
            if v != 0.0 {
                let pos = position(v);
                lo = lo.min(pos);
                hi = hi.max(pos);
            }
        }
        if !finite {
            return Self { values, fixed: None, base: 0, width: 0 };
        }
        if lo == u32::MAX {
            return Self { fixed: Some(vec![0; values.len()]), values, base: 0, width: 0 };
        }
        let width = 53 + (hi - lo);
        if width >= FIXED_BITS {
            return Self { values, fixed: None, base: 0, width };
        }
        let fixed = values.iter().map(|&v| to_fixed(v, lo)).collect();
        Self { values, fixed: Some(fixed), base: lo as i32 - 1074, width }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The (rounded) terms this sum runs over.
    pub fn terms(&self) -> &[f64] {
        &self.values
    }

    /// Correctly rounded plain sum.
    pub fn sum(&self) -> f64 {
        match &self.fixed {
            Some(fixed) if self.width + bits_for(fixed.len() as u64) <= FIXED_BITS => {
                scale_pow2(fixed.iter().sum::<i128>() as f64, self.base)
            }
            _ => {
                let mut acc = ExactSum::new();
                for &v in &self.values {
                    acc.add(v);
                }
                acc.value()
            }
        }
    }

    /// Correctly rounded `sum counts[i] * terms[i]`.
    pub fn dot(&self, counts: &[u32]) -> f64 {
        assert_eq!(counts.len(), self.values.len(), "count vector length");
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        match &self.fixed {
            Some(fixed) if self.width + bits_for(total) <= FIXED_BITS => {
                let acc: i128 = fixed
                    .iter()
                    .zip(counts)
                    .map(|(&v, &c)| v * i128::from(c))
                    .sum();
                scale_pow2(acc as f64, self.base)
            }
            _ => {
                let mut acc = ExactSum::new();
                for (&v, &c) in self.values.iter().zip(counts) {
                    acc.add_product(c, v);
                }
                acc.value()
            }
        }
    }
}

/// Correctly rounded sum of a slice.
pub fn exact_sum(values: &[f64]) -> f64 {
    exact_sum_map(values, |v| v)
}

/// Correctly rounded `sum f(x)` over a slice, with each term `f(x)` rounded
/// once before it is added exactly.
pub fn exact_sum_map(values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    // Biased exponent range over nonzero terms; 0x7ff flags a non-finite term.
    let (lo, hi) = values.iter().fold((u32::MAX, 0u32), |(lo, hi), &x| {
        let v = f(x);
        let biased = ((v.to_bits() >> 52) & 0x7ff) as u32;
        let lo_candidate = if v == 0.0 { u32::MAX } else { biased.max(1) };
        (lo.min(lo_candidate), hi.max(biased))
    });
    if lo == u32::MAX {
        return 0.0;
    }
    let (lo, hi) = (lo - 1, hi.max(1) - 1);
    if hi < 0x7fe && 53 + (hi - lo) + bits_for(values.len() as u64) <= FIXED_BITS {
        let acc: i128 = values.iter().map(|&x| to_fixed(f(x), lo)).sum();
        scale_pow2(acc as f64, lo as i32 - 1074)
    } else {
        let mut acc = ExactSum::new();
        for &x in values {
            acc.add(f(x));
        }
        acc.value()
    }
}

/// Correctly rounded `(sum x, sum fl(x*x))` in one fused pass.
pub fn exact_power_sums(values: &[f64]) -> (f64, f64) {
    let range = |v: f64, (lo, hi): (u32, u32)| {
        let biased = ((v.to_bits() >> 52) & 0x7ff) as u32;
        let lo_candidate = if v == 0.0 { u32::MAX } else { biased.max(1) };
        (lo.min(lo_candidate), hi.max(biased))
    };
    let (r1, r2) = values.iter().fold(
        ((u32::MAX, 0u32), (u32::MAX, 0u32)),
        |(r1, r2), &x| (range(x, r1), range(x * x, r2)),
    );
    if r1.0 == u32::MAX {
        return (0.0, 0.0);
    }
    let extra = bits_for(values.len() as u64);
    let fits = |(lo, hi): (u32, u32)| hi < 0x7ff && 53 + (hi - lo) + extra <= FIXED_BITS;
    if fits(r1) && fits(r2) {
        let (lo1, lo2) = (r1.0 - 1, r2.0 - 1);
        let (a1, a2) = values.iter().fold((0i128, 0i128), |(a1, a2), &x| {
            (a1 + to_fixed(x, lo1), a2 + to_fixed(x * x, lo2))
        });
        (
            scale_pow2(a1 as f64, lo1 as i32 - 1074),
            scale_pow2(a2 as f64, lo2 as i32 - 1074),
        )
    } else {
        (exact_sum(values), exact_sum_map(values, |x| x * x))
    }
}
