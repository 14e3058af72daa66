//! Two-dimensional Weibull process on the circle: X_φ = Z₁ cos φ + Z₂ sin φ with
//! i.i.d. standard Weibull(θ) coordinates, and the perturbed-minimiser selector.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::chaining::{chained_mi_bound, dudley_bound, ChainVariant, CoveringOracle, InfoSeries, LevelWeight, TailRule};
use crate::distlib::{draw_weibull, mc_replicates, RngSpec};
use crate::error::{Error, Result};
use crate::numeric::{integrate, mean_se};
use crate::specfun::{d_theta, TailIndex};

/// How the bound constants are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Preset {
    /// C = √2·D_θ·‖Z₁‖_{ψθ} with ‖Z₁‖ = 2^{1/θ}; levels from k = 1 under 2^{−(k−2)};
    /// per-level term 2^{1/θ}(I₂ + C_{2,θ})^{1/θ} + 2.
    Appendix,
    /// The assembly that reproduces the published table: ‖Z₁‖ taken as 1, levels from
    /// k = 2 under 2^{−(k−2)}, and no additive C_{2,θ}.
    Published,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "appendix" => Ok(Preset::Appendix),
            "published" => Ok(Preset::Published),
            _ => Err(Error::domain("preset", format!("expected appendix|published, got {s}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Appendix => "appendix",
            Preset::Published => "published",
        }
    }
}

/// Benchmark configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchConfig {
    pub preset: Preset,
    /// Deepest partition level computed exactly; the tail uses the log 2 growth majorant.
    pub k_max: usize,
    pub mc_replicates: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { preset: Preset::Appendix, k_max: 20, mc_replicates: 1_000_000, seed: 2024 }
    }
}

/// θ, ε of the perturbed-minimiser selector; ε is the mass of the unperturbed atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircleSelector {
    pub theta: TailIndex,
    pub epsilon: f64,
}

impl CircleSelector {
    pub fn new(theta: TailIndex, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain("epsilon", format!("must lie in (0, 1], got {epsilon}")));
        }
        Ok(CircleSelector { theta, epsilon })
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub epsilon: f64,
    pub mi_bound: f64,
    pub mi_reason: &'static str,
    pub cm_bound: f64,
    pub cmi_bound: f64,
    pub exact_mean: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

/// Density of the polar angle θ_Z of Z on [0, π/2].
pub fn theta_z_density(theta: TailIndex, phi: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_2).contains(&phi) {
        return Err(Error::domain("phi", format!("must lie in [0, pi/2], got {phi}")));
    }
    let t = theta.theta();
    let (s, c) = phi.sin_cos();
    let c = c.max(0.0);
    Ok(t * (c * s).powf(t - 1.0) / (c.powf(t) + s.powf(t)).powi(2))
}

/// P(θ_Z ≤ φ) = tan^θ φ / (1 + tan^θ φ), clamped to [0, π/2].
pub fn theta_z_cdf(theta: TailIndex, phi: f64) -> f64 {
    if phi <= 0.0 {
        return 0.0;
    }
    if phi >= FRAC_PI_2 {
        return 1.0;
    }
    let t = theta.theta();
    let (s, c) = phi.sin_cos();
    let (a, b) = (s.powf(t), c.powf(t));
    a / (a + b)
}

/// Masses q_m of the 2^{k−1} equal arcs of [0, 2π) under the minimiser angle θ_Z + π.
pub fn cell_probabilities(theta: TailIndex, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > 40 {
        return Err(Error::domain("k", format!("must lie in 1..=40, got {k}")));
    }
    let m = 1usize << (k - 1);
    let w = 2.0 * PI / m as f64;
    let mut q = vec![0.0; m];
    // Only arcs meeting [π, 3π/2] carry mass.
    let first = ((PI / w).floor() as usize).min(m - 1);
    let last = (((1.5 * PI) / w).ceil() as usize).min(m);
    for (j, qj) in q.iter_mut().enumerate().take(last).skip(first) {
        let lo = w * j as f64 - PI;
        let hi = w * (j + 1) as f64 - PI;
        *qj = (theta_z_cdf(theta, hi) - theta_z_cdf(theta, lo)).max(0.0);
    }
    Ok(q)
}

/// I₂([W]_k; S) = log Σ_m (u² + q_m(ε² + 2εu)) / (εq_m + u), u = (1−ε)/2^{k−1}.
pub fn chained_i2(theta: TailIndex, epsilon: f64, k: usize) -> Result<f64> {
    CircleSelector::new(theta, epsilon)?;
    let q = cell_probabilities(theta, k)?;
    Ok(i2_from_masses(&q, epsilon))
}

fn i2_from_masses(q: &[f64], epsilon: f64) -> f64 {
    let u = (1.0 - epsilon) / q.len() as f64;
    let empty = q.iter().filter(|x| **x == 0.0).count() as f64;
    // Empty arcs each contribute u²/u = u.
    let occupied: f64 = q
        .iter()
        .filter(|x| **x > 0.0)
        .map(|&qm| (u * u + qm * (epsilon * epsilon + 2.0 * epsilon * u)) / (epsilon * qm + u))
        .sum();
    (empty * u + occupied).ln().max(0.0)
}

/// E[X_W] = −ε Γ(2 + 1/θ) ∫₀¹ (t^{2/θ} + (1−t)^{2/θ})^{1/2} dt.
pub fn exact_selector_mean(theta: TailIndex, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain("epsilon", format!("must lie in [0, 1], got {epsilon}")));
    }
    Ok(-epsilon * expected_norm(theta))
}

/// E‖Z‖₂ for i.i.d. standard Weibull(θ) coordinates.
pub fn expected_norm(theta: TailIndex) -> f64 {
    let p = 2.0 * theta.inv();
    gamma(2.0 + theta.inv()) * integrate(|t: f64| (t.powf(p) + (1.0 - t).powf(p)).sqrt(), 0.0, 1.0, 1e-14)
}

/// One draw of X_W.
pub fn draw_xw<R: Rng + ?Sized>(theta: TailIndex, epsilon: f64, rng: &mut R) -> f64 {
    let z1 = draw_weibull(theta, 1.0, rng);
    let z2 = draw_weibull(theta, 1.0, rng);
    if rng.gen::<f64>() < epsilon {
        -z1.hypot(z2)
    } else {
        let w = 2.0 * PI * rng.gen::<f64>();
        z1 * w.cos() + z2 * w.sin()
    }
}

/// Monte Carlo estimate of E[X_W] and its standard error.
pub fn mc_selector_mean(theta: TailIndex, epsilon: f64, replicates: usize, rng: RngSpec) -> Result<(f64, f64)> {
    if replicates < 1000 {
        return Err(Error::domain("replicates", format!("must be >= 1000, got {replicates}")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain("epsilon", format!("must lie in [0, 1], got {epsilon}")));
    }
    let xs = mc_replicates(rng, replicates, |r| draw_xw(theta, epsilon, r));
    Ok(mean_se(&xs))
}

/// ‖X_{φ₁} − X_{φ₂}‖_{ψθ} ≤ C |φ₁ − φ₂| with C = √2·D_θ·‖Z₁‖_{ψθ}.
pub fn process_constant(theta: TailIndex, z_norm: f64) -> f64 {
    2f64.sqrt() * d_theta(theta) * z_norm
}

fn preset_parts(theta: TailIndex, preset: Preset) -> (f64, usize, ChainVariant) {
    match preset {
        Preset::Appendix => (process_constant(theta, 2f64.powf(theta.inv())), 1, ChainVariant::Key1 { alpha: 2.0 }),
        Preset::Published => (process_constant(theta, 1.0), 2, ChainVariant::Key1Shift { alpha: 2.0, shift: 0.0 }),
    }
}

/// Dudley (CM) bound; independent of ε.
pub fn cm_bound(theta: TailIndex, preset: Preset) -> Result<f64> {
    let (c, _, _) = preset_parts(theta, preset);
    dudley_bound(&CoveringOracle::circle(), theta, c)
}

/// Chained Rényi information (CMI) bound.
pub fn cmi_bound(theta: TailIndex, epsilon: f64, cfg: &BenchConfig) -> Result<f64> {
    let (c, first, variant) = preset_parts(theta, cfg.preset);
    if cfg.k_max < first {
        return Err(Error::domain("k_max", format!("must be >= {first}")));
    }
    let values = (first..=cfg.k_max).map(|k| chained_i2(theta, epsilon, k)).collect::<Result<Vec<_>>>()?;
    let series = InfoSeries::new(first, values, TailRule::Growth(2f64.ln()))?;
    chained_mi_bound(&series, theta, PI, c, variant, LevelWeight::Appendix)
}

/// Assembles one table row.
pub fn cmi_bound_row(theta: TailIndex, epsilon: f64, cfg: &BenchConfig) -> Result<BenchRow> {
    if !theta.is_heavy() {
        return Err(Error::domain("theta", "the benchmark needs 0 < theta < 1"));
    }
    CircleSelector::new(theta, epsilon)?;
    let spec = RngSpec::new(cfg.seed, epsilon.to_bits());
    let (mc_mean, mc_se) = mc_selector_mean(theta, epsilon, cfg.mc_replicates, spec)?;
    Ok(BenchRow {
        epsilon,
        mi_bound: f64::INFINITY,
        mi_reason: "singular conditional, I_alpha(W;S) = infinity",
        cm_bound: cm_bound(theta, cfg.preset)?,
        cmi_bound: cmi_bound(theta, epsilon, cfg)?,
        exact_mean: exact_selector_mean(theta, epsilon)?,
        mc_mean,
        mc_se,
    })
}

/// Rows for every ε, computed in parallel and returned in input order.
pub fn bench_table(theta: TailIndex, epsilons: &[f64], cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    epsilons.par_iter().map(|&e| cmi_bound_row(theta, e, cfg)).collect()
}
