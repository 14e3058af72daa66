//! Heavy-tailed sampling, empirical Orlicz norms and tail diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{bisect, log_sum_exp};
use crate::specfun::TailIndex;

/// Replicates per Monte Carlo block; each block owns one substream.
pub const MC_BLOCK: usize = 4096;

/// Seed and substream id; together they fix the generated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Child spec `i`; distinct `i` give distinct streams under the same seed.
    pub fn substream(&self, i: u64) -> RngSpec {
        RngSpec { seed: self.seed, stream: splitmix64(self.stream ^ splitmix64(i.wrapping_add(1))) }
    }
}

/// Evaluates `f` on `replicates` independent draws. Block `b` uses `spec.substream(b)`,
/// so the output order and values do not depend on the number of worker threads.
pub fn mc_replicates<F>(spec: RngSpec, replicates: usize, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = replicates.div_ceil(MC_BLOCK);
    let parts: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = spec.substream(b as u64).rng();
            let count = MC_BLOCK.min(replicates - b * MC_BLOCK);
            (0..count).map(|_| f(&mut rng)).collect()
        })
        .collect();
    parts.concat()
}

/// Uniform draw on (0, 1].
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Finite sample with its generator description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub meta: String,
}

impl Sample {
    pub fn new(values: Vec<f64>, seed: u64, meta: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("sample", "must be non-empty"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("sample", format!("non-finite value {v}")));
        }
        Ok(Sample { values, seed, meta: meta.into() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Sample {
        Sample {
            values: self.values.iter().map(|v| v * c).collect(),
            seed: self.seed,
            meta: format!("{} * {c}", self.meta),
        }
    }
}

/// Inverse survival function of Weibull(θ, b): b(−log u)^{1/θ}.
pub fn weibull_quantile(theta: TailIndex, b: f64, u: f64) -> f64 {
    b * (-u.ln()).powf(theta.inv())
}

/// One Weibull(θ, b) draw, P(X ≥ x) = exp(−(x/b)^θ).
pub fn draw_weibull<R: Rng + ?Sized>(theta: TailIndex, b: f64, rng: &mut R) -> f64 {
    weibull_quantile(theta, b, open_uniform(rng))
}

/// `n` i.i.d. Weibull(θ, b) draws by inverse CDF.
pub fn sample_weibull(theta: TailIndex, b: f64, n: usize, rng: RngSpec) -> Result<Sample> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::domain("scale", format!("must be > 0, got {b}")));
    }
    if n == 0 {
        return Err(Error::domain("n", "must be >= 1"));
    }
    let mut r = rng.rng();
    let values = (0..n).map(|_| draw_weibull(theta, b, &mut r)).collect();
    Sample::new(values, rng.seed, format!("weibull(theta={}, b={b}) stream={}", theta.theta(), rng.stream))
}

/// One draw of s·X with s a fair sign and X standard Weibull(θ).
pub fn draw_symmetric_weibull<R: Rng + ?Sized>(theta: TailIndex, rng: &mut R) -> f64 {
    let x = draw_weibull(theta, 1.0, rng);
    if rng.gen::<bool>() {
        x
    } else {
        -x
    }
}

/// `n` draws of s·X with s a fair sign and X standard Weibull(θ).
pub fn sample_symmetric_weibull(theta: TailIndex, n: usize, rng: RngSpec) -> Result<Sample> {
    if n == 0 {
        return Err(Error::domain("n", "must be >= 1"));
    }
    let mut r = rng.rng();
    let values = (0..n).map(|_| draw_symmetric_weibull(theta, &mut r)).collect();
    Sample::new(values, rng.seed, format!("symmetric-weibull(theta={}) stream={}", theta.theta(), rng.stream))
}

/// Empirical Orlicz quasi-norm of a slice; see [`orlicz_norm`].
pub fn orlicz_norm_of(values: &[f64], theta: TailIndex) -> f64 {
    let lw = -(values.len() as f64).ln();
    orlicz_norm_weighted(values.iter().map(|v| (*v, lw)), theta)
}

/// inf{K > 0 : Σ w exp((|x|/K)^θ) ≤ 2} for atoms x with log-weights ln w summing to 0.
pub fn orlicz_norm_weighted(atoms: impl IntoIterator<Item = (f64, f64)>, theta: TailIndex) -> f64 {
    let (u, lw): (Vec<f64>, Vec<f64>) =
        atoms.into_iter().filter(|(_, l)| l.is_finite()).map(|(x, l)| (x.abs().powf(theta.theta()), l)).unzip();
    let umax = u.iter().cloned().fold(0.0, f64::max);
    if umax == 0.0 {
        return 0.0;
    }
    let ln2 = 2f64.ln();
    // With s = K^{−θ}, log Σ w exp(s u) − log 2 is strictly increasing in s.
    let g = |s: f64| log_sum_exp(u.iter().zip(&lw).map(|(ui, li)| s * ui + li)) - ln2;
    let mut hi = ln2 / umax;
    let mut lo = hi;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    while g(lo) > 0.0 {
        lo *= 0.5;
    }
    let s = bisect(g, lo, hi, 1e-15 * hi).unwrap_or(0.5 * (lo + hi));
    s.powf(-theta.inv())
}

/// Empirical Orlicz quasi-norm inf{K > 0 : mean exp((|x|/K)^θ) ≤ 2}.
pub fn orlicz_norm(sample: &Sample, theta: TailIndex) -> f64 {
    orlicz_norm_of(&sample.values, theta)
}

/// Elementwise sign(x)|x|^κ.
pub fn power_transform(sample: &Sample, kappa: f64) -> Result<Sample> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::domain("kappa", format!("must be > 0, got {kappa}")));
    }
    let values = sample.values.iter().map(|x| x.signum() * x.abs().powf(kappa)).collect();
    Sample::new(values, sample.seed, format!("power({}, kappa={kappa})", sample.meta))
}

/// M(t) = mean_i e^{t x_i} per grid point; +infinity where the value overflows.
pub fn empirical_mgf(sample: &Sample, t_grid: &[f64]) -> Result<Vec<f64>> {
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::domain("t_grid", format!("non-finite grid point {t}")));
    }
    let ln_n = (sample.len() as f64).ln();
    Ok(t_grid
        .iter()
        .map(|&t| if t == 0.0 { 1.0 } else { (log_sum_exp(sample.values.iter().map(|x| t * x)) - ln_n).exp() })
        .collect())
}

/// Empirical P(|X| ≥ t).
pub fn empirical_tail(sample: &Sample, t: f64) -> f64 {
    sample.values.iter().filter(|x| x.abs() >= t).count() as f64 / sample.len() as f64
}
