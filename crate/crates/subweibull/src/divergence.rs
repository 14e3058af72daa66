//! Exact divergences on finite laws, the shifted-log f_θ family, and the
//! Rényi comparison and decorrelation bounds evaluated as numbers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::specfun::{a_min_key1, b_alpha_theta_with, c_alpha_theta_with, TailIndex};

const SUM_TOL: f64 = 1e-12;

/// Finite probability vector with optional aligned atom values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDist {
    pub probs: Vec<f64>,
    pub atoms: Option<Vec<f64>>,
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("probs", "must be non-empty"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::domain("probs", format!("entries must be finite and >= 0, got {p}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::domain("probs", format!("must sum to 1, got {s}")));
        }
        Ok(DiscreteDist { probs, atoms: None })
    }

    pub fn with_atoms(probs: Vec<f64>, atoms: Vec<f64>) -> Result<Self> {
        if atoms.len() != probs.len() {
            return Err(Error::domain("atoms", format!("length {} != probs length {}", atoms.len(), probs.len())));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("atoms", "must be finite"));
        }
        let mut d = DiscreteDist::new(probs)?;
        d.atoms = Some(atoms);
        Ok(d)
    }

    /// Normalises non-negative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::domain("weights", format!("must have positive finite sum, got {s}")));
        }
        let mut probs: Vec<f64> = w.iter().map(|x| x / s).collect();
        fix_sum(&mut probs);
        DiscreteDist::new(probs)
    }

    /// Normalises `exp(logw)` in log space.
    pub fn from_log_weights(logw: &[f64]) -> Result<Self> {
        let z = log_sum_exp(logw.iter().cloned());
        if !z.is_finite() {
            return Err(Error::numerical("log-weights have no finite normaliser"));
        }
        let mut probs: Vec<f64> = logw.iter().map(|l| (l - z).exp()).collect();
        fix_sum(&mut probs);
        DiscreteDist::new(probs)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Σ p·atom; `None` without atoms.
    pub fn mean(&self) -> Option<f64> {
        self.atoms.as_ref().map(|a| self.expect(a))
    }

    /// Σ p·g.
    pub fn expect(&self, g: &[f64]) -> f64 {
        self.probs.iter().zip(g).map(|(p, x)| p * x).sum()
    }
}

/// Pushes the rounding residue of a normalised vector onto its largest entry.
fn fix_sum(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    if let Some(i) = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])) {
        p[i] = (p[i] + 1.0 - s).max(0.0);
    }
}

/// Which divergence a value reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DivergenceKind {
    Kl,
    Renyi { alpha: f64 },
    FTheta { theta: f64, a: f64 },
    Infinity,
}

/// Divergence value in [0, +∞].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceValue {
    pub value: f64,
    pub kind: DivergenceKind,
}

fn check_pair(p: &DiscreteDist, q: &DiscreteDist) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::domain("support", format!("length mismatch {} vs {}", p.len(), q.len())));
    }
    Ok(())
}

fn support_violated(p: &DiscreteDist, q: &DiscreteDist) -> bool {
    p.probs.iter().zip(&q.probs).any(|(a, b)| *a > 0.0 && *b == 0.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("alpha", format!("must be finite and > 1, got {alpha}")))
    }
}

/// KL(P‖Q) = Σ p log(p/q).
pub fn kl(p: &DiscreteDist, q: &DiscreteDist) -> Result<DivergenceValue> {
    check_pair(p, q)?;
    let value = if support_violated(p, q) {
        f64::INFINITY
    } else {
        p.probs
            .iter()
            .zip(&q.probs)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a * (a.ln() - b.ln()))
            .sum::<f64>()
            .max(0.0)
    };
    Ok(DivergenceValue { value, kind: DivergenceKind::Kl })
}

/// D_α(P‖Q) = (α−1)⁻¹ log Σ p^α q^{1−α}, evaluated in log space.
pub fn renyi(p: &DiscreteDist, q: &DiscreteDist, alpha: f64) -> Result<DivergenceValue> {
    check_pair(p, q)?;
    check_alpha(alpha)?;
    let value = if support_violated(p, q) {
        f64::INFINITY
    } else {
        let terms = p
            .probs
            .iter()
            .zip(&q.probs)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| alpha * a.ln() + (1.0 - alpha) * b.ln());
        (log_sum_exp(terms) / (alpha - 1.0)).max(0.0)
    };
    Ok(DivergenceValue { value, kind: DivergenceKind::Renyi { alpha } })
}

/// D_∞(P‖Q) = log max p/q.
pub fn renyi_infinity(p: &DiscreteDist, q: &DiscreteDist) -> Result<DivergenceValue> {
    check_pair(p, q)?;
    let value = if support_violated(p, q) {
        f64::INFINITY
    } else {
        p.probs
            .iter()
            .zip(&q.probs)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a.ln() - b.ln())
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    };
    Ok(DivergenceValue { value, kind: DivergenceKind::Infinity })
}

/// log(x + A) for x = e^{lx}, stable for very large ratios.
fn ln_ratio_plus(lx: f64, a: f64) -> f64 {
    if lx > 30.0 {
        lx + (a * (-lx).exp()).ln_1p()
    } else {
        (lx.exp() + a).ln()
    }
}

/// D_{fθ}(P‖Q) = Σ q f_θ(p/q) with f_θ(x) = x log^{1/θ}(x + A); not shifted to vanish at P = Q.
pub fn f_theta_div(p: &DiscreteDist, q: &DiscreteDist, theta: TailIndex, a: f64) -> Result<DivergenceValue> {
    check_pair(p, q)?;
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::domain("A", format!("must be finite and >= 1, got {a}")));
    }
    let kind = DivergenceKind::FTheta { theta: theta.theta(), a };
    if support_violated(p, q) {
        return Ok(DivergenceValue { value: f64::INFINITY, kind });
    }
    let value = p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| x * ln_ratio_plus(x.ln() - y.ln(), a).powf(theta.inv()))
        .sum();
    Ok(DivergenceValue { value, kind })
}

/// D_{fθ}(P‖Q) − f_θ(1), which vanishes at P = Q.
pub fn f_theta_div_normalized(p: &DiscreteDist, q: &DiscreteDist, theta: TailIndex, a: f64) -> Result<f64> {
    Ok(f_theta_div(p, q, theta, a)?.value - (1.0 + a).ln().powf(theta.inv()))
}

fn check_div(d: f64) -> Result<()> {
    if d >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain("divergence", format!("must be >= 0, got {d}")))
    }
}

/// (D_α + C_{α,θ})^{1/θ}, the power-type comparison at the smallest admissible A.
pub fn key1_bound(d_alpha: f64, alpha: f64, theta: TailIndex) -> Result<f64> {
    check_div(d_alpha)?;
    check_alpha(alpha)?;
    let c = c_alpha_theta_with(theta, alpha, a_min_key1(theta, alpha));
    Ok((d_alpha + c).powf(theta.inv()))
}

/// D_α^{1/θ} + B_{α,θ}, the additive comparison at the smallest admissible A.
pub fn key_bound(d_alpha: f64, alpha: f64, theta: TailIndex) -> Result<f64> {
    check_div(d_alpha)?;
    check_alpha(alpha)?;
    let b = b_alpha_theta_with(theta, alpha, a_min_key1(theta, alpha));
    Ok(d_alpha.powf(theta.inv()) + b)
}

/// D_α(N(μ₁, σ²I) ‖ N(μ₂, σ²I)) = α‖μ₁ − μ₂‖² / (2σ²).
pub fn renyi_gaussian_iso(mu1: &[f64], mu2: &[f64], sigma: f64, alpha: f64) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(Error::domain("mu", format!("dimension mismatch {} vs {}", mu1.len(), mu2.len())));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain("sigma", format!("must be > 0, got {sigma}")));
    }
    check_alpha(alpha)?;
    let d2: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(alpha * d2 / (2.0 * sigma * sigma))
}

/// (α−1)⁻¹ log(n^α / (α(n−1) + 1)), the Rényi divergence of the max of n i.i.d. draws from one.
pub fn renyi_max_of_n(n: u64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "must be >= 1"));
    }
    check_alpha(alpha)?;
    let nf = n as f64;
    Ok((alpha * nf.ln() - (alpha * (nf - 1.0)).ln_1p()) / (alpha - 1.0))
}

/// log n − (n−1)/n, the α → 1 limit of [`renyi_max_of_n`].
pub fn kl_max_of_n(n: u64) -> f64 {
    let nf = n as f64;
    nf.ln() - (nf - 1.0) / nf
}

/// Joint law of (W, argmax S) and the product of its marginals for the argmax selector
/// over n exchangeable continuous draws; atoms are indexed w·n + j.
pub fn argmax_selector_joint(n: usize) -> (DiscreteDist, DiscreteDist) {
    let nf = n as f64;
    let mut joint = vec![0.0; n * n];
    for j in 0..n {
        joint[j * n + j] = 1.0 / nf;
    }
    let prod = vec![1.0 / (nf * nf); n * n];
    (
        DiscreteDist::from_weights(&joint).expect("valid joint"),
        DiscreteDist::from_weights(&prod).expect("valid product"),
    )
}

/// How the divergence term enters a decorrelation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Variant {
    /// `div_term` is D_{fθ} itself.
    FTheta,
    /// `div_term` is D_α, routed through [`key1_bound`].
    Key1 { alpha: f64 },
    /// `div_term` is D_α, routed through [`key_bound`].
    Key { alpha: f64 },
}

/// 2^{1/θ}·(divergence term per variant) + moment term, where the moment term is
/// E_ν exp(r^θ) for the plain lemma or 2 E_ν h(r) for the truncated one.
pub fn decorrelation_bound(div_term: f64, moment_term: f64, theta: TailIndex, variant: Variant) -> Result<f64> {
    check_div(div_term)?;
    if !(moment_term >= 0.0) {
        return Err(Error::domain("moment_term", format!("must be >= 0, got {moment_term}")));
    }
    let d = match variant {
        Variant::FTheta => div_term,
        Variant::Key1 { alpha } => key1_bound(div_term, alpha, theta)?,
        Variant::Key { alpha } => key_bound(div_term, alpha, theta)?,
    };
    Ok(2f64.powf(theta.inv()) * d + moment_term)
}
