//! Orlicz function, its inverse, and every explicit constant that enters the bounds.

use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::numeric::grid_sup;

const SUP_GRID_POINTS: usize = 100_000;

/// Sub-Weibull tail parameter θ > 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct TailIndex(f64);

impl TailIndex {
    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() && theta > 0.0 {
            Ok(TailIndex(theta))
        } else {
            Err(Error::domain("theta", format!("must be finite and > 0, got {theta}")))
        }
    }

    pub fn theta(self) -> f64 {
        self.0
    }

    /// 1/θ.
    pub fn inv(self) -> f64 {
        1.0 / self.0
    }

    /// θ < 1; θ = 1 belongs to the light-tailed branch.
    pub fn is_heavy(self) -> bool {
        self.0 < 1.0
    }

    pub(crate) fn require_heavy(self) -> Result<()> {
        if self.is_heavy() {
            Ok(())
        } else {
            Err(Error::domain("theta", format!("requires 0 < theta < 1, got {}", self.0)))
        }
    }
}

/// ψ_θ(x) = exp(x^θ) − 1.
pub fn psi(theta: TailIndex, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("x", format!("must be >= 0, got {x}")));
    }
    Ok(x.powf(theta.0).exp_m1())
}

/// ψ_θ⁻¹(y) = log(1 + y)^{1/θ}.
pub fn psi_inv(theta: TailIndex, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::domain("y", format!("must be >= 0, got {y}")));
    }
    Ok(y.ln_1p().powf(theta.inv()))
}

/// Convexity threshold x_θ = ((1−θ)/θ)^{1/θ}, for θ < 1.
pub fn x_theta(theta: TailIndex) -> Result<f64> {
    theta.require_heavy()?;
    Ok(((1.0 - theta.0) / theta.0).powf(theta.inv()))
}

/// 1 + ψ_θ(x_θ) = e^{(1−θ)/θ}.
pub(crate) fn one_plus_psi_x_theta(theta: TailIndex) -> f64 {
    ((1.0 - theta.0) / theta.0).exp()
}

/// K_θ = sup_{x≥2} (log(1+ψ_θ(x_θ)+x) / log x)^{1/θ}.
pub fn k_theta(theta: TailIndex) -> Result<f64> {
    theta.require_heavy()?;
    let c = one_plus_psi_x_theta(theta);
    let p = theta.inv();
    let ratio = |x: f64| ((c + x).ln() / x.ln()).powf(p);
    Ok(grid_sup(ratio, 2.0, 1e8, SUP_GRID_POINTS).1)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// ⌊2/θ⌋, the truncation order of `h`.
fn trunc_order(theta: TailIndex) -> u32 {
    (2.0 / theta.0).floor() as u32
}

/// Tail of the exponential series, e^u − Σ_{k≤m} u^k/k!, accurate for small u.
fn exp_tail(u: f64, m: u32) -> f64 {
    if u > 30.0 + m as f64 {
        let partial: f64 = (0..=m).map(|k| u.powi(k as i32) / factorial(k)).sum();
        return u.exp() - partial;
    }
    if u == 0.0 {
        return 0.0;
    }
    let mut term = u.powi(m as i32 + 1) / factorial(m + 1);
    let mut sum = 0.0;
    let mut k = m + 1;
    while term > 1e-18 * sum || k < m + 4 {
        sum += term;
        k += 1;
        term *= u / k as f64;
        if k > 10_000 {
            break;
        }
    }
    sum
}

/// log(1 + h(y)) without overflow, for any θ > 0.
fn ln_one_plus_h(theta: TailIndex, y: f64) -> f64 {
    let u = y.powf(theta.0);
    let m = trunc_order(theta);
    if u > 30.0 + m as f64 {
        // log(e^u − P(u) + 1) = u + log1p(−(P(u) − 1) e^{−u})
        let p_minus_1: f64 = (1..=m).map(|k| u.powi(k as i32) / factorial(k)).sum();
        u + (-(p_minus_1 * (-u).exp())).ln_1p()
    } else {
        exp_tail(u, m).ln_1p()
    }
}

/// h(y) = e^{y^θ} − Σ_{k=0}^{⌊2/θ⌋} y^{kθ}/k!, for 0 < θ ≤ 2.
pub fn truncated_exp_h(theta: TailIndex, y: f64) -> Result<f64> {
    if theta.0 > 2.0 {
        return Err(Error::domain("theta", format!("h requires theta <= 2, got {}", theta.0)));
    }
    if !(y >= 0.0) {
        return Err(Error::domain("y", format!("must be >= 0, got {y}")));
    }
    Ok(exp_tail(y.powf(theta.0), trunc_order(theta)).max(0.0))
}

/// Weak-triangle constant D_θ.
pub fn d_theta(theta: TailIndex) -> f64 {
    if theta.is_heavy() {
        2f64.powf(theta.inv())
    } else {
        1.0
    }
}

/// Smallest admissible A for the power-type and additive Rényi comparisons.
pub fn a_min_key1(theta: TailIndex, alpha: f64) -> f64 {
    if !theta.is_heavy() {
        return 1.0;
    }
    let p = theta.inv() - 1.0;
    if alpha <= 2.0 {
        (p / (alpha - 1.0)).exp()
    } else {
        p.exp()
    }
}

/// C_{α,θ} for a given A.
pub fn c_alpha_theta_with(theta: TailIndex, alpha: f64, a: f64) -> f64 {
    if !theta.is_heavy() {
        return 2f64.ln();
    }
    let al = alpha.min(2.0);
    a.powf(al - 1.0).ln_1p() / (al - 1.0)
}

/// B_{α,θ} for a given A; α > 2 reuses the α = 2 value, and θ ≥ 1 gives (log 2)^{1/θ}.
pub fn b_alpha_theta_with(theta: TailIndex, alpha: f64, a: f64) -> f64 {
    if !theta.is_heavy() {
        return 2f64.ln().powf(theta.inv());
    }
    let al = alpha.min(2.0);
    let p = theta.inv() - 1.0;
    let d = a.powf(al - 1.0);
    let sup_log_over_x = (-p).exp() * p.powf(p);
    2f64.powf(p) * (1.0 / (al - 1.0)).powf(theta.inv()) * (d / theta.0) * (sup_log_over_x + d.powf(p))
}

/// L_θ = √8 e³ (2π)^{1/4} e^{1/24} (e^{2/e}/θ)^{1/θ}.
pub fn l_theta(theta: TailIndex) -> f64 {
    8f64.sqrt()
        * E.powi(3)
        * (2.0 * PI).powf(0.25)
        * (1.0 / 24.0f64).exp()
        * ((2.0 / E).exp() / theta.0).powf(theta.inv())
}

/// Generalization prefactor M_θ.
pub fn m_theta(theta: TailIndex) -> f64 {
    let t = theta.0;
    let p = theta.inv();
    if theta.is_heavy() {
        2f64.powf(p) * (t.sqrt() + t.powf(p)) * p.exp() * l_theta(theta)
    } else {
        ((4.0 * E + 2.0 * 2f64.ln().powf(p)) * t.sqrt() + 4.0 * E * t.powf(p)) * (2.0 * E).powf(p)
    }
}

/// E_θ with 4^{1/θ} E_θ = sup_{x≥1} x e^{x^θ/2} / (h(x)+1) + 1.
pub fn e_theta(theta: TailIndex) -> f64 {
    let log_ratio = |x: f64| x.ln() + 0.5 * x.powf(theta.0) - ln_one_plus_h(theta, x);
    let (_, lsup) = grid_sup(log_ratio, 1.0, 1e8, SUP_GRID_POINTS);
    (lsup.exp() + 1.0) / 4f64.powf(theta.inv())
}

/// A for the plain Young-type inequality: (2^{m*−2} m*!)² ∨ 1 with m* = ⌈2/θ⌉.
pub fn young_a(theta: TailIndex) -> f64 {
    let m = (2.0 / theta.0).ceil() as u32;
    let base = 2f64.powi(m as i32 - 2) * factorial(m);
    (base * base).max(1.0)
}

/// A for the truncated Young-type inequality: max(1, 2^{m*−2} m*!, 2e^{⌊2/θ⌋}).
pub fn young_truncated_a(theta: TailIndex) -> f64 {
    let m = (2.0 / theta.0).ceil() as u32;
    let base = 2f64.powi(m as i32 - 2) * factorial(m);
    let e_term = 2.0 * (trunc_order(theta) as f64).exp();
    base.max(e_term).max(1.0)
}

/// Constants bundle for a tail index and Rényi order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantSet {
    pub theta: f64,
    pub alpha: f64,
    pub x_theta: f64,
    pub k_theta: f64,
    pub d_theta: f64,
    pub c2_theta: f64,
    pub l_theta: f64,
    pub m_theta: f64,
    pub e_theta: f64,
    pub a_min_key1: f64,
    pub a_min_key: f64,
    pub b_alpha_theta: f64,
    pub c_alpha_theta: f64,
}

impl ConstantSet {
    /// The numeric fields that must all be finite and positive; x_θ and K_θ are
    /// reported as 1 in the light-tailed branch where the maximal inequality does not use them.
    pub fn fields(&self) -> [f64; 11] {
        [
            self.x_theta,
            self.k_theta,
            self.d_theta,
            self.c2_theta,
            self.l_theta,
            self.m_theta,
            self.e_theta,
            self.a_min_key1,
            self.a_min_key,
            self.b_alpha_theta,
            self.c_alpha_theta,
        ]
    }
}

/// Every constant for (θ, α), with the smallest admissible A.
pub fn constants(theta: TailIndex, alpha: f64) -> Result<ConstantSet> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::domain("alpha", format!("must be finite and > 1, got {alpha}")));
    }
    let (xt, kt) = if theta.is_heavy() { (x_theta(theta)?, k_theta(theta)?) } else { (1.0, 1.0) };
    let d = d_theta(theta);
    let a1 = a_min_key1(theta, alpha);
    let a = a_min_key1(theta, alpha);
    let set = ConstantSet {
        theta: theta.0,
        alpha,
        x_theta: xt,
        k_theta: kt,
        d_theta: d,
        c2_theta: d * (1.0 + 2.0 * gamma(theta.inv() + 1.0)),
        l_theta: l_theta(theta),
        m_theta: m_theta(theta),
        e_theta: e_theta(theta),
        a_min_key1: a1,
        a_min_key: a,
        b_alpha_theta: b_alpha_theta_with(theta, alpha, a),
        c_alpha_theta: c_alpha_theta_with(theta, alpha, a1),
    };
    if set.fields().iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(set)
    } else {
        Err(Error::numerical(format!("non-finite constant at theta={}, alpha={alpha}", theta.0)))
    }
}

/// Ratio of the Orlicz-route prefactor to the maximal-inequality prefactor.
pub fn prefactor_ratio(n: u64, theta: TailIndex) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("n", format!("must be >= 2, got {n}")));
    }
    theta.require_heavy()?;
    let n = n as f64;
    let num = 4.0 / 1.5f64.ln() * psi_inv(theta, 2.0 * n)? * gamma(theta.inv() + 1.0);
    let den = (one_plus_psi_x_theta(theta) + n).ln().powf(theta.inv());
    Ok(num / den)
}
