//! Divergence-constrained reward maximisation over finite policies: KL tilting, Rényi
//! truncated power-law tilting, best-of-n, and heavy-tailed reward inflation witnesses.

use serde::Serialize;

use crate::distlib::{orlicz_norm_weighted, weibull_quantile};
use crate::divergence::{kl, renyi, DiscreteDist};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::specfun::{a_min_key1, b_alpha_theta_with, c_alpha_theta_with, TailIndex};

/// Reference policy over finitely many responses with their rewards as atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyInstance {
    pub reference: DiscreteDist,
}

impl PolicyInstance {
    pub fn new(probs: Vec<f64>, rewards: Vec<f64>) -> Result<Self> {
        Ok(PolicyInstance { reference: DiscreteDist::with_atoms(probs, rewards)? })
    }

    pub fn rewards(&self) -> &[f64] {
        self.reference.atoms.as_deref().expect("instances always carry rewards")
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    /// E_π r.
    pub fn mean_reward(&self, policy: &DiscreteDist) -> f64 {
        policy.expect(self.rewards())
    }

    pub fn reference_mean(&self) -> f64 {
        self.mean_reward(&self.reference)
    }

    /// Policy over the same responses, carrying the rewards as atoms.
    pub fn policy(&self, probs: Vec<f64>) -> Result<DiscreteDist> {
        DiscreteDist::with_atoms(probs, self.rewards().to_vec())
    }

    /// (min, max) reward over atoms with positive reference mass.
    fn reward_range(&self) -> (f64, f64) {
        self.support().map(|i| self.rewards()[i]).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)))
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.reference.probs[i] > 0.0)
    }

    /// π₀ restricted to the top-reward atoms and renormalised.
    pub fn top_concentrated(&self) -> Result<DiscreteDist> {
        let (_, rmax) = self.reward_range();
        let w: Vec<f64> =
            (0..self.len()).map(|i| if self.rewards()[i] == rmax { self.reference.probs[i] } else { 0.0 }).collect();
        self.policy(DiscreteDist::from_weights(&w)?.probs)
    }

    /// ‖r̄‖_{ψθ} of the centered reward under π₀.
    pub fn centered_reward_norm(&self, theta: TailIndex) -> f64 {
        let m = self.reference_mean();
        orlicz_norm_weighted(self.support().map(|i| (self.rewards()[i] - m, self.reference.probs[i].ln())), theta)
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustRegionResult {
    pub policy: DiscreteDist,
    /// λ for the KL tilt, t for the Rényi threshold.
    pub multiplier_or_threshold: f64,
    pub achieved_divergence: f64,
    pub mean_reward: f64,
    /// The budget is met with equality.
    pub feasible: bool,
}

/// π ∝ π₀ exp(r/λ), normalised in log space.
pub fn kl_tilt(inst: &PolicyInstance, lambda: f64) -> Result<DiscreteDist> {
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda", format!("must be > 0, got {lambda}")));
    }
    let (rmin, _) = inst.reward_range();
    let logw: Vec<f64> =
        inst.reference.probs.iter().zip(inst.rewards()).map(|(p, r)| p.ln() + (r - rmin) / lambda).collect();
    inst.policy(DiscreteDist::from_log_weights(&logw)?.probs)
}

const BUDGET_TOL: f64 = 1e-10;

/// Bisection on a continuous nondecreasing g with g(lo) < target ≤ g(hi); returns the upper end of
/// the final bracket once |g − target| ≤ BUDGET_TOL or the bracket stops shrinking.
fn bisect_level<G: Fn(f64) -> Result<f64>>(g: G, mut lo: f64, mut hi: f64, target: f64) -> Result<f64> {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid)?;
        if v >= target {
            hi = mid;
            if v - target <= BUDGET_TOL {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Maximises E_π r subject to KL(π‖π₀) ≤ ε over the tilt family; λ is found by bisection on log λ.
pub fn solve_kl_budget(inst: &PolicyInstance, epsilon: f64) -> Result<TrustRegionResult> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let top = inst.top_concentrated()?;
    let kl_max = kl(&top, &inst.reference)?.value;
    if kl_max <= epsilon {
        return Ok(TrustRegionResult {
            mean_reward: inst.mean_reward(&top),
            achieved_divergence: kl_max,
            policy: top,
            multiplier_or_threshold: 0.0,
            feasible: false,
        });
    }
    let (rmin, rmax) = inst.reward_range();
    let range = rmax - rmin;
    // KL is decreasing in λ; in u = −log λ it is increasing.
    let kl_at = |u: f64| -> Result<f64> { Ok(kl(&kl_tilt(inst, (-u).exp())?, &inst.reference)?.value) };
    let mut lo = -(range.ln()) - 10.0;
    while kl_at(lo)? >= epsilon {
        lo -= 10.0;
    }
    let mut hi = -(range.ln()) + 10.0;
    while kl_at(hi)? < epsilon {
        hi += 10.0;
    }
    let u = bisect_level(kl_at, lo, hi, epsilon)?;
    let lambda = (-u).exp();
    let policy = kl_tilt(inst, lambda)?;
    Ok(TrustRegionResult {
        achieved_divergence: kl(&policy, &inst.reference)?.value,
        mean_reward: inst.mean_reward(&policy),
        policy,
        multiplier_or_threshold: lambda,
        feasible: true,
    })
}

/// π ∝ π₀ (r − t)₊^{1/(α−1)}.
pub fn renyi_tilt(inst: &PolicyInstance, alpha: f64, t: f64) -> Result<DiscreteDist> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::domain("alpha", format!("must be finite and > 1, got {alpha}")));
    }
    let e = 1.0 / (alpha - 1.0);
    let (rmin, _) = inst.reward_range();
    // Rescaling by (rmin − t) keeps the weights O(1) for thresholds far below the rewards.
    let scale = if t < rmin { rmin - t } else { 1.0 };
    let w: Vec<f64> = inst
        .reference
        .probs
        .iter()
        .zip(inst.rewards())
        .map(|(p, r)| if *p > 0.0 && *r > t { p * ((r - t) / scale).powf(e) } else { 0.0 })
        .collect();
    if w.iter().all(|x| *x == 0.0) {
        return Err(Error::domain("t", format!("every atom is truncated at t = {t}")));
    }
    inst.policy(DiscreteDist::from_weights(&w)?.probs)
}

/// Maximises E_π r subject to D_α(π‖π₀) ≤ ε over the truncated power-law family.
pub fn solve_renyi_budget(inst: &PolicyInstance, alpha: f64, epsilon: f64) -> Result<TrustRegionResult> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let top = inst.top_concentrated()?;
    let d_max = renyi(&top, &inst.reference, alpha)?.value;
    if d_max <= epsilon {
        let (_, rmax) = inst.reward_range();
        return Ok(TrustRegionResult {
            mean_reward: inst.mean_reward(&top),
            achieved_divergence: d_max,
            policy: top,
            multiplier_or_threshold: rmax,
            feasible: false,
        });
    }
    let (rmin, rmax) = inst.reward_range();
    let range = rmax - rmin;
    let d_at = |t: f64| -> Result<f64> { Ok(renyi(&renyi_tilt(inst, alpha, t)?, &inst.reference, alpha)?.value) };
    let mut lo = rmin - range;
    let mut step = range;
    while d_at(lo)? >= epsilon {
        step *= 2.0;
        lo = rmin - step;
        if !lo.is_finite() {
            return Err(Error::numerical("threshold search diverged"));
        }
    }
    let t = bisect_level(d_at, lo, rmax, epsilon)?;
    let policy = renyi_tilt(inst, alpha, t)?;
    Ok(TrustRegionResult {
        achieved_divergence: renyi(&policy, &inst.reference, alpha)?.value,
        mean_reward: inst.mean_reward(&policy),
        policy,
        multiplier_or_threshold: t,
        feasible: true,
    })
}

/// Law of the reward-argmax of n i.i.d. reference draws; tied atoms share mass in
/// proportion to their reference probability.
pub fn best_of_n(inst: &PolicyInstance, n: u32) -> Result<DiscreteDist> {
    if n == 0 {
        return Err(Error::domain("n", "must be >= 1"));
    }
    let r = inst.rewards();
    let p = &inst.reference.probs;
    let mut order: Vec<usize> = (0..inst.len()).collect();
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]));
    let mut out = vec![0.0; inst.len()];
    let mut below = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut mass = 0.0;
        while j < order.len() && r[order[j]] == r[order[i]] {
            mass += p[order[j]];
            j += 1;
        }
        let upto = (below + mass).min(1.0);
        let level = upto.powi(n as i32) - below.powi(n as i32);
        if mass > 0.0 {
            for &k in &order[i..j] {
                out[k] = level * p[k] / mass;
            }
        }
        below = upto;
        i = j;
    }
    inst.policy(DiscreteDist::from_weights(&out)?.probs)
}

/// Which comparison lemma the reward ceiling uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GainVariant {
    /// C(2^{1/θ} D^{1/θ} + 2^{1/θ} B_{α,θ} + 2).
    Key,
    /// C(2^{1/θ}(D + C_{α,θ})^{1/θ} + 2).
    Key1,
}

impl GainVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "key" => Ok(GainVariant::Key),
            "key1" => Ok(GainVariant::Key1),
            _ => Err(Error::domain("variant", format!("expected key|key1, got {s}"))),
        }
    }
}

/// Ceiling on E_π r − E_{π₀} r for any π with D_α(π‖π₀) ≤ budget, given ‖r̄‖_{ψθ} ≤ C.
pub fn reward_gain_bound(theta: TailIndex, c_norm: f64, budget: f64, alpha: f64, variant: GainVariant) -> Result<f64> {
    if !(budget >= 0.0) {
        return Err(Error::domain("budget", format!("must be >= 0, got {budget}")));
    }
    if !(c_norm >= 0.0) || !c_norm.is_finite() {
        return Err(Error::domain("C", format!("must be finite and >= 0, got {c_norm}")));
    }
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::domain("alpha", format!("must be finite and > 1, got {alpha}")));
    }
    let p = theta.inv();
    let two_p = 2f64.powf(p);
    let a = a_min_key1(theta, alpha);
    let inner = match variant {
        GainVariant::Key => two_p * budget.powf(p) + two_p * b_alpha_theta_with(theta, alpha, a),
        GainVariant::Key1 => two_p * (budget + c_alpha_theta_with(theta, alpha, a)).powf(p),
    };
    Ok(c_norm * (inner + 2.0))
}

/// Equal-mass quantile grid of standard Weibull(θ): `depth` atoms at survival levels (i − ½)/depth.
pub fn weibull_quantile_grid(theta: TailIndex, depth: usize) -> Result<PolicyInstance> {
    if depth < 2 {
        return Err(Error::domain("depth", format!("must be >= 2, got {depth}")));
    }
    let d = depth as f64;
    let rewards: Vec<f64> = (0..depth).map(|i| weibull_quantile(theta, 1.0, (i as f64 + 0.5) / d)).collect();
    PolicyInstance::new(DiscreteDist::from_weights(&vec![1.0; depth])?.probs, rewards)
}

/// Heavy-tailed inflation witness P = (1 − δ)Q + δ·1_{top}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodhartWitness {
    pub policy: DiscreteDist,
    pub delta: f64,
    pub kl: f64,
    pub gain: f64,
    /// D₂(P‖Q) of the same witness.
    pub renyi2: f64,
}

fn mix_top(inst: &PolicyInstance, top: usize, delta: f64) -> Result<DiscreteDist> {
    let mut probs: Vec<f64> = inst.reference.probs.iter().map(|p| (1.0 - delta) * p).collect();
    probs[top] += delta;
    inst.policy(DiscreteDist::from_weights(&probs)?.probs)
}

/// The largest δ with KL(P‖Q) ≤ ε; fails if the resulting gain is below `target_gain`.
pub fn goodhart_kl_construction(inst: &PolicyInstance, epsilon: f64, target_gain: f64) -> Result<GoodhartWitness> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let r = inst.rewards();
    let top = inst.support().max_by(|&a, &b| r[a].total_cmp(&r[b])).expect("non-empty support");
    let q = inst.reference.probs[top];
    // Two blocks: ratio 1 − δ off the top atom, 1 − δ + δ/q on it.
    let kl_at = |d: f64| -> Result<f64> {
        let off = if d < 1.0 { (1.0 - d) * (1.0 - q) * (-d).ln_1p() } else { 0.0 };
        Ok(off + ((1.0 - d) * q + d) * (d * (1.0 / q - 1.0)).ln_1p())
    };
    let mut delta = if kl_at(1.0)? <= epsilon { 1.0 } else { bisect_level(kl_at, 0.0, 1.0, epsilon)? };
    // The bisection returns the upper bracket end; step down onto the feasible side.
    while delta > 0.0 && kl_at(delta)? > epsilon {
        delta *= 1.0 - 1e-12;
    }
    let policy = mix_top(inst, top, delta)?;
    let gain = inst.mean_reward(&policy) - inst.reference_mean();
    if gain < target_gain {
        return Err(Error::unattainable(format!("grid too shallow for gain {target_gain} at KL budget {epsilon}"), gain));
    }
    Ok(GoodhartWitness {
        kl: kl(&policy, &inst.reference)?.value,
        renyi2: renyi(&policy, &inst.reference, 2.0)?.value,
        policy,
        delta,
        gain,
    })
}

/// KL witness on an equal-mass Weibull(θ) quantile grid of depth N = e^L, evaluated in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogDepthWitness {
    pub log_depth: f64,
    pub delta: f64,
    pub kl: f64,
    /// δ·((L + log 2)^{1/θ} − Γ(1 + 1/θ)), a lower bound on the mean-reward gain.
    pub gain_lower: f64,
    pub top_reward: f64,
    pub renyi2: f64,
}

/// The two-block witness of [`goodhart_kl_construction`] on a grid too deep to materialise.
/// Only the top atom (mass e^{−L}, reward (L + log 2)^{1/θ}) enters the KL; the grid mean is at
/// most Γ(1 + 1/θ) because the midpoint rule underestimates the convex quantile integral for θ ≤ 1.
pub fn goodhart_log_depth_witness(theta: TailIndex, log_depth: f64, epsilon: f64) -> Result<LogDepthWitness> {
    if theta.theta() > 1.0 {
        return Err(Error::domain("theta", format!("must lie in (0, 1], got {}", theta.theta())));
    }
    if !(log_depth >= 2f64.ln()) || !log_depth.is_finite() {
        return Err(Error::domain("log_depth", format!("must be finite and >= log 2, got {log_depth}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::domain("epsilon", format!("must be finite and > 0, got {epsilon}")));
    }
    let l = log_depth;
    let q = (-l).exp();
    // log((1 − δ)q + δ), the log-mass of the top atom under P.
    let log_top = |d: f64| (d + (1.0 - d) * q).ln();
    let kl_at = |d: f64| -> Result<f64> {
        let off = if d < 1.0 { (1.0 - d) * (1.0 - q) * (-d).ln_1p() } else { 0.0 };
        let lt = log_top(d);
        Ok(off + lt.exp() * (lt + l))
    };
    let mut delta = if kl_at(1.0)? <= epsilon { 1.0 } else { bisect_level(kl_at, 0.0, 1.0, epsilon)? };
    while delta > 0.0 && kl_at(delta)? > epsilon {
        delta *= 1.0 - 1e-12;
    }
    let top_reward = (l + 2f64.ln()).powf(theta.inv());
    let mean_cap = statrs::function::gamma::gamma(1.0 + theta.inv());
    let off2 = if delta < 1.0 { (1.0 - q).ln() + 2.0 * (-delta).ln_1p() } else { f64::NEG_INFINITY };
    let renyi2 = log_sum_exp([off2, 2.0 * log_top(delta) + l]);
    Ok(LogDepthWitness {
        log_depth: l,
        delta,
        kl: kl_at(delta)?,
        gain_lower: delta * (top_reward - mean_cap),
        top_reward,
        renyi2,
    })
}
