//! SGLD on power-transformed linear regression: data generation, trajectories with
//! gradient-noise moments, generalization gaps and the pathwise bound.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::distlib::{orlicz_norm_of, RngSpec};
use crate::error::{Error, Result};
use crate::numeric::integrate;
use crate::specfun::{a_min_key1, b_alpha_theta_with, m_theta, TailIndex};

/// Y = sign(Ỹ)|Ỹ|^λ with Ỹ | X ~ N(Xᵀβ₀, 1) and X ~ Unif([0, 1]²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionTask {
    pub n: usize,
    pub lambda_power: f64,
    pub beta0: [f64; 2],
}

impl RegressionTask {
    pub fn new(n: usize, lambda_power: f64) -> Result<Self> {
        let t = RegressionTask { n, lambda_power, beta0: [1.0, -1.0] };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("n", "must be >= 1"));
        }
        if !(self.lambda_power >= 1.0) || !self.lambda_power.is_finite() {
            return Err(Error::domain("lambda", format!("must be finite and >= 1, got {}", self.lambda_power)));
        }
        Ok(())
    }

    /// θ = 1/λ.
    pub fn theta(&self) -> TailIndex {
        TailIndex::new(1.0 / self.lambda_power).expect("lambda >= 1")
    }
}

/// Covariates and responses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Mean squared loss of w.
    pub fn risk(&self, w: [f64; 2]) -> f64 {
        self.x.iter().zip(&self.y).map(|(x, y)| (dot(x, w) - y).powi(2)).sum::<f64>() / self.len() as f64
    }

    /// Mean gradient 2(Xᵀw − Y)X over the given rows.
    fn grad_rows(&self, w: [f64; 2], rows: impl Iterator<Item = usize>) -> [f64; 2] {
        let mut g = [0.0; 2];
        let mut k = 0usize;
        for i in rows {
            let r = 2.0 * (dot(&self.x[i], w) - self.y[i]);
            g[0] += r * self.x[i][0];
            g[1] += r * self.x[i][1];
            k += 1;
        }
        [g[0] / k as f64, g[1] / k as f64]
    }

    pub fn full_gradient(&self, w: [f64; 2]) -> [f64; 2] {
        self.grad_rows(w, 0..self.len())
    }
}

fn dot(x: &[f64; 2], w: [f64; 2]) -> f64 {
    x[0] * w[0] + x[1] * w[1]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// n rows drawn from `rng`.
pub fn generate_regression(task: &RegressionTask, rng: RngSpec) -> Result<Dataset> {
    task.validate()?;
    let mut r = rng.rng();
    let mut x = Vec::with_capacity(task.n);
    let mut y = Vec::with_capacity(task.n);
    for _ in 0..task.n {
        let xi = [r.gen::<f64>(), r.gen::<f64>()];
        let z: f64 = r.sample(StandardNormal);
        let latent = dot(&xi, task.beta0) + z;
        x.push(xi);
        y.push(latent.signum() * latent.abs().powf(task.lambda_power));
    }
    Ok(Dataset { x, y })
}

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Schedule {
    /// η_t = η₀·t^{−θ²/2}, so (η_t/η₀)^{2/θ} = t^{−θ}.
    Polynomial { eta0: f64, theta: f64 },
    Constant(f64),
}

impl Schedule {
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            Schedule::Polynomial { eta0, theta } => eta0 * (t as f64).powf(-0.5 * theta * theta),
            Schedule::Constant(e) => e,
        }
    }
}

/// SGLD run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgldConfig {
    pub schedule: Schedule,
    /// Noise standard deviation σ_t ≡ σ; 0 is the noiseless test mode.
    pub sigma: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Tail index used in the gradient-noise moment E‖g − ḡ‖^{2/θ}.
    pub theta: f64,
    pub w1: [f64; 2],
    /// Minibatch redraws per Ĝ_t checkpoint.
    pub moment_draws: usize,
    /// Number of Ĝ_t checkpoints over the run.
    pub checkpoints: usize,
}

impl SgldConfig {
    /// K epochs of online updates with the polynomial schedule at η₀ and tail index θ.
    pub fn online(theta: f64, eta0: f64, sigma: f64, epochs: usize) -> Self {
        SgldConfig {
            schedule: Schedule::Polynomial { eta0, theta },
            sigma,
            epochs,
            batch: 1,
            theta,
            w1: [0.0, 0.0],
            moment_draws: 64,
            checkpoints: 100,
        }
    }
}

/// A recorded run; entry t of each vector belongs to update t = 1..T.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgldTrajectory {
    /// W_1, …, W_{T+1}.
    pub iterates: Vec<[f64; 2]>,
    pub eta: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Minibatch of each update, flattened with `batch` entries per step.
    pub batches: Vec<u32>,
    pub batch: usize,
    /// Ĝ_t, held between checkpoints.
    pub g_hat: Vec<f64>,
    /// Updates at which Ĝ was re-estimated.
    pub checkpoint_steps: Vec<usize>,
}

impl SgldTrajectory {
    /// Number of updates T.
    pub fn steps(&self) -> usize {
        self.eta.len()
    }

    pub fn last(&self) -> [f64; 2] {
        *self.iterates.last().expect("at least W_1")
    }
}

const DIVERGENCE_GUARD: f64 = 1e12;

/// Runs T = K·⌈n/batch⌉ updates W_{t+1} = W_t − η_t g(W_t, B_t) + σ ξ_t with uniform minibatches
/// drawn with replacement (full batch when batch ≥ n).
pub fn sgld_run(data: &Dataset, cfg: &SgldConfig, rng: RngSpec) -> Result<SgldTrajectory> {
    if data.is_empty() {
        return Err(Error::domain("dataset", "must be non-empty"));
    }
    if !(cfg.sigma >= 0.0) || !cfg.sigma.is_finite() {
        return Err(Error::domain("sigma", format!("must be finite and >= 0, got {}", cfg.sigma)));
    }
    if cfg.epochs == 0 || cfg.batch == 0 {
        return Err(Error::domain("epochs", "epochs and batch must be >= 1"));
    }
    if !(cfg.theta > 0.0 && cfg.theta <= 2.0) {
        return Err(Error::domain("theta", format!("must lie in (0, 2], got {}", cfg.theta)));
    }
    let n = data.len();
    let full = cfg.batch >= n;
    let bsz = cfg.batch.min(n);
    let steps = cfg.epochs * n.div_ceil(bsz);
    let every = steps.div_ceil(cfg.checkpoints.max(1)).max(1);
    let p = 2.0 / cfg.theta;
    let mut r = rng.substream(0).rng();
    let mut mr = rng.substream(1).rng();

    let mut w = cfg.w1;
    let mut traj = SgldTrajectory {
        iterates: Vec::with_capacity(steps + 1),
        eta: Vec::with_capacity(steps),
        sigma: Vec::with_capacity(steps),
        batches: Vec::with_capacity(if full { 0 } else { steps * bsz }),
        batch: bsz,
        g_hat: Vec::with_capacity(steps),
        checkpoint_steps: Vec::new(),
    };
    traj.iterates.push(w);
    let mut g_hat = 0.0;
    let mut idx = vec![0usize; bsz];
    for t in 1..=steps {
        if (t - 1) % every == 0 {
            g_hat = if full {
                0.0
            } else {
                let gbar = data.full_gradient(w);
                let acc: f64 = (0..cfg.moment_draws.max(1))
                    .map(|_| {
                        let g = data.grad_rows(w, (0..bsz).map(|_| mr.gen_range(0..n)));
                        norm([g[0] - gbar[0], g[1] - gbar[1]]).powf(p)
                    })
                    .sum();
                acc / cfg.moment_draws.max(1) as f64
            };
            traj.checkpoint_steps.push(t);
        }
        let g = if full {
            data.full_gradient(w)
        } else {
            for slot in idx.iter_mut() {
                *slot = r.gen_range(0..n);
                traj.batches.push(*slot as u32);
            }
            data.grad_rows(w, idx.iter().copied())
        };
        let eta = cfg.schedule.eta(t);
        let (z0, z1): (f64, f64) = if cfg.sigma > 0.0 { (r.sample(StandardNormal), r.sample(StandardNormal)) } else { (0.0, 0.0) };
        w = [w[0] - eta * g[0] + cfg.sigma * z0, w[1] - eta * g[1] + cfg.sigma * z1];
        if !(norm(w) <= DIVERGENCE_GUARD) {
            return Err(Error::numerical(format!("SGLD diverged at step {t}: |W| = {:e}, eta = {eta}", norm(w))));
        }
        traj.iterates.push(w);
        traj.eta.push(eta);
        traj.sigma.push(cfg.sigma);
        traj.g_hat.push(g_hat);
    }
    Ok(traj)
}

/// L_test(w) − L_train(w).
pub fn gen_gap(w: [f64; 2], train: &Dataset, test: &Dataset) -> Result<f64> {
    if !(w[0].is_finite() && w[1].is_finite()) {
        return Err(Error::domain("weights", "must be finite"));
    }
    Ok(test.risk(w) - train.risk(w))
}

/// Empirical ‖ℓ(w, Z) − E ℓ(w, Z)‖_{ψθ} on a held-out set.
pub fn loss_orlicz_scale(w: [f64; 2], data: &Dataset, theta: TailIndex) -> f64 {
    let losses: Vec<f64> = data.x.iter().zip(&data.y).map(|(x, y)| (dot(x, w) - y).powi(2)).collect();
    let m = losses.iter().sum::<f64>() / losses.len() as f64;
    let centered: Vec<f64> = losses.iter().map(|l| l - m).collect();
    orlicz_norm_of(&centered, theta)
}

/// (M_θ v/√n)[4 + 2^{1/θ} T^{(1/θ−1)₊}(log^{1/θ}(1+A) + Σ_{t<T}(B_{α,θ} + (2αη_t²/σ_t²)^{1/θ} Ĝ_t))]
/// with T − 1 = number of recorded updates.
pub fn sgld_bound(traj: &SgldTrajectory, theta: TailIndex, alpha: f64, a: f64, v_theta: f64, n: usize) -> Result<f64> {
    sgld_bound_prefix(traj, traj.steps(), theta, alpha, a, v_theta, n)
}

/// The bound for the run truncated after its first `steps` updates.
pub fn sgld_bound_prefix(
    traj: &SgldTrajectory,
    steps: usize,
    theta: TailIndex,
    alpha: f64,
    a: f64,
    v_theta: f64,
    n: usize,
) -> Result<f64> {
    Ok(sgld_bound_series(traj, &[steps], theta, alpha, a, v_theta, n)?[0])
}

/// The bound at each truncation point of `steps` (sorted ascending), in one pass.
pub fn sgld_bound_series(
    traj: &SgldTrajectory,
    steps: &[usize],
    theta: TailIndex,
    alpha: f64,
    a: f64,
    v_theta: f64,
    n: usize,
) -> Result<Vec<f64>> {
    if theta.theta() > 2.0 {
        return Err(Error::domain("theta", format!("must lie in (0, 2], got {}", theta.theta())));
    }
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::domain("alpha", format!("must be finite and > 1, got {alpha}")));
    }
    let a_min = a_min_key1(theta, alpha);
    if !(a >= a_min) || !a.is_finite() {
        return Err(Error::domain("A", format!("must be >= {a_min} for (theta, alpha), got {a}")));
    }
    if !(v_theta > 0.0) || !v_theta.is_finite() || n == 0 {
        return Err(Error::domain("v_theta", "v_theta must be finite and > 0, and n >= 1"));
    }
    if steps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("steps", "truncation points must be sorted"));
    }
    let last = steps.last().copied().unwrap_or(0);
    if last > traj.steps() {
        return Err(Error::domain("steps", format!("trajectory has only {} updates", traj.steps())));
    }
    if traj.sigma[..last].iter().any(|s| !(*s > 0.0)) {
        return Err(Error::domain("sigma", "every sigma_t must be > 0"));
    }
    let p = theta.inv();
    let b = b_alpha_theta_with(theta, alpha, a);
    let head = (1.0 + a).ln().powf(p);
    let scale = m_theta(theta) * v_theta / (n as f64).sqrt();
    let mut out = Vec::with_capacity(steps.len());
    let (mut path, mut done) = (0.0, 0usize);
    for &k in steps {
        for t in done..k {
            path += b + (2.0 * alpha * traj.eta[t] * traj.eta[t] / (traj.sigma[t] * traj.sigma[t])).powf(p) * traj.g_hat[t];
        }
        done = k;
        let big_t = (k + 1) as f64;
        out.push(scale * (4.0 + 2f64.powf(p) * big_t.powf((p - 1.0).max(0.0)) * (head + path)));
    }
    Ok(out)
}

/// Checkpoint iterates probed for v_θ.
pub const V_PROBES: usize = 11;

/// Gap and bound at one checkpoint of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRecord {
    pub iter: usize,
    pub gap: f64,
    pub bound: f64,
}

/// One seed of the regression study: train set from stream 0, a test set of size 10n from
/// stream 1, SGLD from stream 2. v_θ is the held-out Orlicz norm of the centered loss,
/// maximized over W_1 and up to `V_PROBES` evenly spaced checkpoint iterates; A = A_min(θ, α).
pub fn sgld_experiment(task: &RegressionTask, cfg: &SgldConfig, alpha: f64, seed: u64) -> Result<Vec<GapRecord>> {
    let train = generate_regression(task, RngSpec::new(seed, 0))?;
    let test_task = RegressionTask { n: task.n.saturating_mul(10), ..*task };
    let test = generate_regression(&test_task, RngSpec::new(seed, 1))?;
    let traj = sgld_run(&train, cfg, RngSpec::new(seed, 2))?;
    let theta = TailIndex::new(cfg.theta)?;
    let a = a_min_key1(theta, alpha);
    let ends: Vec<usize> = traj.checkpoint_steps.iter().skip(1).copied().chain(std::iter::once(traj.steps() + 1)).collect();
    let probes = ends.len().min(V_PROBES);
    let v = (0..probes)
        .map(|i| ends[(i * (ends.len() - 1)) / (probes - 1).max(1)])
        .chain(std::iter::once(1))
        .map(|t| loss_orlicz_scale(traj.iterates[t - 1], &test, theta))
        .fold(0.0, f64::max);
    let updates: Vec<usize> = ends.iter().map(|t| t - 1).collect();
    let bounds = if cfg.sigma > 0.0 {
        sgld_bound_series(&traj, &updates, theta, alpha, a, v, task.n)?
    } else {
        vec![f64::NAN; updates.len()]
    };
    let mut out = Vec::with_capacity(ends.len());
    for (&k, bound) in updates.iter().zip(bounds) {
        out.push(GapRecord { iter: k, gap: gen_gap(traj.iterates[k], &train, &test)?, bound });
    }
    Ok(out)
}

/// D_{fθ}(P_{X+ε} ‖ P_{Y+ε}) for a discrete coupling of (X, Y) on ℝ and ε ~ N(0, σ²), by quadrature.
pub fn gaussian_mixture_f_theta_div(pairs: &[(f64, f64, f64)], sigma: f64, theta: TailIndex, a: f64) -> Result<f64> {
    if pairs.is_empty() || !(sigma > 0.0) {
        return Err(Error::domain("coupling", "need at least one atom and sigma > 0"));
    }
    let norm_c = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let dens = |z: f64, pick: fn(&(f64, f64, f64)) -> f64| -> f64 {
        pairs.iter().map(|pr| pr.2 * norm_c * (-0.5 * ((z - pick(pr)) / sigma).powi(2)).exp()).sum()
    };
    let lo = pairs.iter().map(|p| p.0.min(p.1)).fold(f64::INFINITY, f64::min) - 12.0 * sigma;
    let hi = pairs.iter().map(|p| p.0.max(p.1)).fold(f64::NEG_INFINITY, f64::max) + 12.0 * sigma;
    let f = |z: f64| {
        let pz = dens(z, |p| p.0);
        let qz = dens(z, |p| p.1);
        if pz == 0.0 {
            0.0
        } else if qz == 0.0 {
            f64::INFINITY
        } else {
            pz * (pz / qz + a).ln().powf(theta.inv())
        }
    };
    Ok(integrate(f, lo, hi, 1e-10))
}

/// (α/2σ²)^{1/θ} E|X − Y|^{2/θ} + B_{α,θ}, the perturbation ceiling.
pub fn perturbation_bound(pairs: &[(f64, f64, f64)], sigma: f64, theta: TailIndex, alpha: f64, a: f64) -> f64 {
    let p = theta.inv();
    let moment: f64 = pairs.iter().map(|(x, y, w)| w * (x - y).abs().powf(2.0 * p)).sum();
    (alpha / (2.0 * sigma * sigma)).powf(p) * moment + b_alpha_theta_with(theta, alpha, a)
}
