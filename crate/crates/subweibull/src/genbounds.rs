//! Generalization bounds for sub-Weibull losses (expected, high-probability and chained),
//! the clipped-mean estimation demo and the randomized maximum selector.

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::chaining::{InfoSeries, TailRule};
use crate::distlib::{draw_symmetric_weibull, draw_weibull, mc_replicates, open_uniform, RngSpec};
use crate::divergence::{key1_bound, key_bound, DiscreteDist, Variant};
use crate::error::{Error, Result};
use crate::numeric::mean_se;
use crate::specfun::{d_theta, e_theta, m_theta, TailIndex};

/// Inputs shared by the single-scale bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenBoundInput {
    pub n: u64,
    pub theta: TailIndex,
    /// sup_w ‖ℓ̄(w, Z)‖_{ψθ}.
    pub v_theta: f64,
    pub info: f64,
    /// How `info` enters: as I_{fθ} directly or as a Rényi information routed through a comparison.
    pub info_kind: Variant,
    pub delta: Option<f64>,
}

impl GenBoundInput {
    /// Input with `info` read as an f_θ information and no confidence level.
    pub fn new(n: u64, theta: TailIndex, v_theta: f64, info: f64) -> Result<Self> {
        let g = GenBoundInput { n, theta, v_theta, info, info_kind: Variant::FTheta, delta: None };
        g.validate()?;
        Ok(g)
    }

    pub fn with_kind(mut self, kind: Variant) -> Self {
        self.info_kind = kind;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("n", "must be >= 1"));
        }
        if !(self.v_theta > 0.0) || !self.v_theta.is_finite() {
            return Err(Error::domain("v_theta", format!("must be finite and > 0, got {}", self.v_theta)));
        }
        if !(self.info >= 0.0) {
            return Err(Error::domain("info", format!("must be >= 0, got {}", self.info)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::domain("delta", format!("must lie in (0, 1), got {d}")));
            }
        }
        if self.theta.theta() > 2.0 {
            return Err(Error::domain("theta", format!("must lie in (0, 2], got {}", self.theta.theta())));
        }
        Ok(())
    }

    fn prefactor(&self) -> f64 {
        m_theta(self.theta) * self.v_theta / (self.n as f64).sqrt()
    }
}

/// The f_θ information implied by `info` under `kind`.
pub fn route_info(info: f64, theta: TailIndex, kind: Variant) -> Result<f64> {
    match kind {
        Variant::FTheta => Ok(info),
        Variant::Key1 { alpha } => key1_bound(info, alpha, theta),
        Variant::Key { alpha } => key_bound(info, alpha, theta),
    }
}

/// (M_θ v_θ/√n)(2^{1/θ} I_{fθ} + 4).
pub fn expected_gen_bound(input: &GenBoundInput) -> Result<f64> {
    input.validate()?;
    let d = route_info(input.info, input.theta, input.info_kind)?;
    Ok(input.prefactor() * (2f64.powf(input.theta.inv()) * d + 4.0))
}

/// (M_θ v_θ/√n)(complexity + E_θ + log(3/δ)^{1/θ}), holding with probability ≥ 1 − δ.
pub fn pac_bayes_bound(input: &GenBoundInput, posterior_complexity: f64) -> Result<f64> {
    input.validate()?;
    let delta = input.delta.ok_or_else(|| Error::domain("delta", "required for the high-probability bound"))?;
    if !(posterior_complexity >= 0.0) {
        return Err(Error::domain("posterior_complexity", format!("must be >= 0, got {posterior_complexity}")));
    }
    let conf = (3.0 / delta).ln().powf(input.theta.inv());
    Ok(input.prefactor() * (posterior_complexity + e_theta(input.theta) + conf))
}

/// E_P[log₊(dP/dQ)^{1/θ}] for discrete P, Q; +∞ when P is not dominated by Q.
pub fn posterior_complexity(post: &DiscreteDist, prior: &DiscreteDist, theta: TailIndex) -> Result<f64> {
    if post.len() != prior.len() {
        return Err(Error::domain("posterior", "support size mismatch"));
    }
    let mut acc = 0.0;
    for (p, q) in post.probs.iter().zip(&prior.probs) {
        if *p == 0.0 {
            continue;
        }
        if *q == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += p * (p.ln() - q.ln()).max(0.0).powf(theta.inv());
    }
    Ok(acc)
}

/// √(2σ² I / n), the sub-Gaussian mutual-information bound.
pub fn xu_raginsky_bound(sigma: f64, info: f64, n: u64) -> f64 {
    (2.0 * sigma * sigma * info / n as f64).sqrt()
}

/// (e_W M_θ v/√n) Σ_{k≥1} 2^{−(k−1)} (2^{1/θ} I_{fθ}([W]_k; S) + 4), with each I_k routed
/// through `kind` and the tail past the last level summed under the series' tail rule.
pub fn chain_gen_bound(
    n: u64,
    theta: TailIndex,
    e_w: f64,
    series: &InfoSeries,
    v_norm_scale: f64,
    kind: Variant,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "must be >= 1"));
    }
    if theta.theta() > 2.0 {
        return Err(Error::domain("theta", format!("must lie in (0, 2], got {}", theta.theta())));
    }
    if !(e_w >= 0.0) || !e_w.is_finite() || !(v_norm_scale > 0.0) || !v_norm_scale.is_finite() {
        return Err(Error::domain("scale", "e_W must be >= 0 and the norm scale > 0"));
    }
    if series.first_level != 1 {
        return Err(Error::domain("series", "the chained generalization sum starts at level 1"));
    }
    let two_p = 2f64.powf(theta.inv());
    let term = |k: usize, i: f64| -> Result<f64> { Ok(2f64.powi(-(k as i32 - 1)) * (two_p * route_info(i, theta, kind)? + 4.0)) };
    let mut sum = 0.0;
    for (j, &i) in series.values.iter().enumerate() {
        sum += term(j + 1, i)?;
    }
    if let TailRule::Growth(g) = series.tail {
        let last_k = series.last_level();
        let last = *series.values.last().expect("non-empty");
        let mut k = last_k;
        loop {
            k += 1;
            let t = term(k, last + g * (k - last_k) as f64)?;
            sum += t;
            if t <= 1e-14 * sum || k > last_k + 2000 {
                break;
            }
        }
    }
    Ok(e_w * m_theta(theta) * v_norm_scale / (n as f64).sqrt() * sum)
}

/// Monte Carlo sizes for the mean-estimation demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanDemoConfig {
    /// Draws of the sample mean used for the density envelope.
    pub mc_size: usize,
    /// Fresh draws used to estimate the population risk.
    pub test_size: usize,
    /// Levels evaluated before the linear tail.
    pub k_max: usize,
    /// Rényi order used for the routed bound.
    pub alpha: f64,
}

impl Default for MeanDemoConfig {
    fn default() -> Self {
        MeanDemoConfig { mc_size: 20_000, test_size: 200_000, k_max: 30, alpha: 2.0 }
    }
}

/// Conservative lower envelope of a density on [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityEnvelope {
    /// max(min_grid(f̂ − 2·SE), 1e-6).
    pub c_lower: f64,
    /// min_grid f̂.
    pub c_point: f64,
    pub bandwidth: f64,
    /// The envelope before flooring was ≤ 0.
    pub degenerate: bool,
}

pub const DENSITY_GRID: usize = 512;
pub const DENSITY_FLOOR: f64 = 1e-6;

/// Gaussian-kernel envelope of inf_{|y|≤1} f(y); bandwidth σ̂·m^{−1/5} for m draws.
pub fn density_lower_envelope(draws: &[f64]) -> Result<DensityEnvelope> {
    if draws.len() < 100 {
        return Err(Error::domain("draws", format!("need >= 100 draws, got {}", draws.len())));
    }
    let m = draws.len() as f64;
    let (_, se) = mean_se(draws);
    let sd = se * m.sqrt();
    let h = sd * m.powf(-0.2);
    if !(h > 0.0) {
        return Err(Error::numerical("degenerate draws: zero spread"));
    }
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let mut c_lower = f64::INFINITY;
    let mut c_point = f64::INFINITY;
    for g in 0..DENSITY_GRID {
        let y = -1.0 + 2.0 * g as f64 / (DENSITY_GRID - 1) as f64;
        let k: Vec<f64> = draws.iter().map(|x| norm * (-0.5 * ((y - x) / h).powi(2)).exp()).collect();
        let (f, se) = mean_se(&k);
        c_point = c_point.min(f);
        c_lower = c_lower.min(f - 2.0 * se);
    }
    let degenerate = c_lower <= 0.0;
    Ok(DensityEnvelope { c_lower: c_lower.max(DENSITY_FLOOR), c_point, bandwidth: h, degenerate })
}

/// clip(Ȳ, [−1, 1]) for one sample of n symmetric Weibull(θ) draws.
pub fn clipped_mean<R: Rng + ?Sized>(theta: TailIndex, n: usize, rng: &mut R) -> f64 {
    let s: f64 = (0..n).map(|_| draw_symmetric_weibull(theta, rng)).sum();
    (s / n as f64).clamp(-1.0, 1.0)
}

/// Index of the level-k dyadic cell [m2^{−(k−1)}, (m+1)2^{−(k−1)}) of [−1, 1] holding w,
/// counted from the left; w = 1 joins the last cell.
pub fn dyadic_cell(w: f64, k: usize) -> usize {
    let cells = 1usize << k;
    let width = 2f64.powi(-(k as i32 - 1));
    (((w + 1.0) / width).floor() as usize).min(cells - 1)
}

/// I_α([W]_k; S) ≤ (k−1) log 2 − log C for k = 1..=k_max, with exact linear tail.
pub fn mean_estimation_series(c: f64, k_max: usize) -> Result<InfoSeries> {
    if !(c > 0.0 && c <= 0.5) {
        return Err(Error::domain("C", format!("a density infimum on [-1, 1] lies in (0, 1/2], got {c}")));
    }
    let values = (1..=k_max.max(1)).map(|k| (k - 1) as f64 * 2f64.ln() - c.ln()).collect();
    InfoSeries::new(1, values, TailRule::Growth(2f64.ln()))
}

/// Outcome of the mean-estimation demo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanEstimationReport {
    pub theta: f64,
    pub n: usize,
    /// I_α(W; S) of the continuous ERM.
    pub single_scale_info: f64,
    pub density: DensityEnvelope,
    /// C₂(θ)·D_θ·(2 + 2‖Y‖_{ψθ}) with ‖Y‖_{ψθ} = 2^{1/θ}.
    pub e_w: f64,
    /// Rényi series substituted as the per-scale information.
    pub bound_direct: f64,
    /// Rényi series routed through the power-type comparison at order `alpha`.
    pub bound_routed: f64,
    pub alpha: f64,
    pub w: f64,
    pub train_risk: f64,
    /// Population risk estimated on fresh draws.
    pub test_risk: f64,
    /// w² + Γ(1 + 2/θ).
    pub population_risk: f64,
    pub gap_mc: f64,
    pub gap_exact: f64,
    pub degenerate_warning: Option<String>,
}

/// Metric radius of [−1, 1] for the clipped-mean square loss with M = L = 1.
pub fn mean_estimation_radius(theta: TailIndex) -> f64 {
    let d = d_theta(theta);
    let c2 = d * (1.0 + 2.0 * gamma(theta.inv() + 1.0));
    c2 * d * (2.0 + 2.0 * 2f64.powf(theta.inv()))
}

/// Clipped-mean ERM on symmetric Weibull(θ) data: chained bound against the realised gap.
pub fn mean_estimation_demo(theta: TailIndex, n: usize, cfg: &MeanDemoConfig, rng: RngSpec) -> Result<MeanEstimationReport> {
    theta.require_heavy()?;
    if n < 10 {
        return Err(Error::domain("n", format!("must be >= 10, got {n}")));
    }
    if cfg.test_size < 1000 {
        return Err(Error::domain("test_size", "must be >= 1000"));
    }
    let draws = mc_replicates(rng.substream(0), cfg.mc_size, |r| {
        let s: f64 = (0..n).map(|_| draw_symmetric_weibull(theta, r)).sum();
        s / n as f64
    });
    let density = density_lower_envelope(&draws)?;
    let series = mean_estimation_series(density.c_lower.min(0.5), cfg.k_max)?;
    let e_w = mean_estimation_radius(theta);
    let bound_direct = chain_gen_bound(n as u64, theta, e_w, &series, 1.0, Variant::FTheta)?;
    let bound_routed = chain_gen_bound(n as u64, theta, e_w, &series, 1.0, Variant::Key1 { alpha: cfg.alpha })?;

    let mut r = rng.substream(1).rng();
    let train: Vec<f64> = (0..n).map(|_| draw_symmetric_weibull(theta, &mut r)).collect();
    let w = (train.iter().sum::<f64>() / n as f64).clamp(-1.0, 1.0);
    let risk = |ys: &[f64]| ys.iter().map(|y| (w - y).powi(2)).sum::<f64>() / ys.len() as f64;
    let train_risk = risk(&train);
    let test: Vec<f64> = mc_replicates(rng.substream(2), cfg.test_size, |r| draw_symmetric_weibull(theta, r));
    let test_risk = risk(&test);
    let population_risk = w * w + gamma(1.0 + 2.0 * theta.inv());
    let degenerate_warning = density.degenerate.then(|| {
        format!("density lower envelope <= 0; floored at {DENSITY_FLOOR}, increase the Monte Carlo size")
    });
    Ok(MeanEstimationReport {
        theta: theta.theta(),
        n,
        single_scale_info: f64::INFINITY,
        density,
        e_w,
        bound_direct,
        bound_routed,
        alpha: cfg.alpha,
        w,
        train_risk,
        test_risk,
        population_risk,
        gap_mc: test_risk - train_risk,
        gap_exact: population_risk - train_risk,
        degenerate_warning,
    })
}

/// Outcome of the randomized maximum selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectorReport {
    pub n: u64,
    pub epsilon: f64,
    pub kl_info: f64,
    /// ε·(mean − 2 SE) of the Monte Carlo maximum, a lower estimate of E[X_W].
    pub mean_lower: f64,
    /// mean_lower / (log n)^{1/θ−1}.
    pub ratio_diag: f64,
    pub max_mean: f64,
    pub max_se: f64,
}

/// I(W; S) = ((n−1)/n)(1−ε)log(1−ε) + (((n−1)ε+1)/n) log((n−1)ε+1).
pub fn goodhart_kl(n: u64, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain("epsilon", format!("must lie in [0, 1], got {epsilon}")));
    }
    let nf = n as f64;
    let a = if epsilon < 1.0 { (1.0 - epsilon) * (-epsilon).ln_1p() } else { 0.0 };
    let b = (nf - 1.0) * epsilon + 1.0;
    Ok(((nf - 1.0) / nf * a + b / nf * b.ln()).max(0.0))
}

/// Joint law of (W, argmax S) and the product of its marginals; atoms are indexed w·n + j.
pub fn goodhart_joint(n: usize, epsilon: f64) -> Result<(DiscreteDist, DiscreteDist)> {
    if n == 0 || !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain("selector", "need n >= 1 and epsilon in [0, 1]"));
    }
    let nf = n as f64;
    let mut joint = vec![0.0; n * n];
    for w in 0..n {
        for j in 0..n {
            joint[w * n + j] = ((1.0 - epsilon) / nf + if w == j { epsilon } else { 0.0 }) / nf;
        }
    }
    let prod = vec![1.0 / (nf * nf); n * n];
    Ok((DiscreteDist::from_weights(&joint)?, DiscreteDist::from_weights(&prod)?))
}

/// max of n i.i.d. standard Weibull(θ) by inverse CDF: (−log(1 − U^{1/n}))^{1/θ}.
pub fn draw_max_weibull<R: Rng + ?Sized>(theta: TailIndex, n: u64, rng: &mut R) -> f64 {
    let u = open_uniform(rng);
    let tail = -(u.ln() / n as f64).exp_m1();
    (-tail.ln()).max(0.0).powf(theta.inv())
}

/// One draw of X_W: the maximum with probability ε, otherwise an independent coordinate.
pub fn draw_selector<R: Rng + ?Sized>(theta: TailIndex, n: u64, epsilon: f64, rng: &mut R) -> f64 {
    if rng.gen::<f64>() < epsilon {
        draw_max_weibull(theta, n, rng)
    } else {
        draw_weibull(theta, 1.0, rng)
    }
}

/// Closed-form KL information and a Monte Carlo lower estimate of the selection bias.
pub fn goodhart_selector(theta: TailIndex, n: u64, epsilon: f64, replicates: usize, rng: RngSpec) -> Result<SelectorReport> {
    theta.require_heavy()?;
    if n < 2 {
        return Err(Error::domain("n", format!("must be >= 2, got {n}")));
    }
    if replicates < 1000 {
        return Err(Error::domain("replicates", format!("must be >= 1000, got {replicates}")));
    }
    let kl_info = goodhart_kl(n, epsilon)?;
    let maxima = mc_replicates(rng, replicates, |r| draw_max_weibull(theta, n, r));
    let (max_mean, max_se) = mean_se(&maxima);
    let mean_lower = epsilon * (max_mean - 2.0 * max_se);
    let ratio_diag = mean_lower / (n as f64).ln().powf(theta.inv() - 1.0);
    Ok(SelectorReport { n, epsilon, kl_info, mean_lower, ratio_diag, max_mean, max_se })
}
