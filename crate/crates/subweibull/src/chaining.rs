//! Covering oracles, dyadic partitions, the maximal inequality, the heavy-tailed
//! Dudley integral and the chained information bound engine.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::integrate;
use crate::specfun::{a_min_key1, b_alpha_theta_with, c_alpha_theta_with, k_theta, one_plus_psi_x_theta, TailIndex};

/// Largest finite space for which covering numbers are computed exactly.
pub const EXACT_COVER_MAX: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SpaceKind {
    /// Points with a symmetric distance matrix.
    Finite { dist: Vec<Vec<f64>> },
    /// The circle [0, 2π) with arc-length distance.
    Circle,
    /// Tabulated covering function: N(ε) = n[i] on [eps[i], eps[i+1]).
    Table { eps: Vec<f64>, n: Vec<u64> },
}

/// Covering numbers N(T, d, ε) and the one-ball radius e(T).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringOracle {
    pub kind: SpaceKind,
    pub e_t: f64,
}

impl CoveringOracle {
    /// Finite metric space from a distance matrix.
    pub fn finite(dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = dist.len();
        if n == 0 {
            return Err(Error::domain("dist", "must have at least one point"));
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain("dist", "matrix must be square"));
            }
            for (j, d) in row.iter().enumerate() {
                if !(*d >= 0.0) || !d.is_finite() || (i == j && *d != 0.0) || (*d - dist[j][i]).abs() > 1e-12 {
                    return Err(Error::domain("dist", format!("entry ({i},{j}) is not a valid distance")));
                }
            }
        }
        let e_t = (0..n)
            .map(|c| dist[c].iter().cloned().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        Ok(CoveringOracle { kind: SpaceKind::Finite { dist }, e_t })
    }

    /// Points on the real line with |s − t|.
    pub fn line(points: &[f64]) -> Result<Self> {
        Self::finite(points.iter().map(|a| points.iter().map(|b| (a - b).abs()).collect()).collect())
    }

    pub fn circle() -> Self {
        CoveringOracle { kind: SpaceKind::Circle, e_t: PI }
    }

    /// Tabulated covering numbers; `eps` strictly increasing, `n` nonincreasing and ending at 1.
    pub fn table(eps: Vec<f64>, n: Vec<u64>) -> Result<Self> {
        if eps.is_empty() || eps.len() != n.len() {
            return Err(Error::domain("covering", "eps and N must be non-empty and of equal length"));
        }
        if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || eps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("covering", "epsilon must be positive and strictly increasing"));
        }
        if n.iter().any(|&k| k == 0) || n.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::domain("covering", "N must be >= 1 and nonincreasing in epsilon"));
        }
        let Some(i) = n.iter().position(|&k| k == 1) else {
            return Err(Error::domain("covering", "table must reach N = 1"));
        };
        let e_t = eps[i];
        Ok(CoveringOracle { kind: SpaceKind::Table { eps, n }, e_t })
    }

    pub fn radius(&self) -> f64 {
        self.e_t
    }

    /// N(T, d, ε) with closed balls centred in T.
    pub fn covering(&self, eps: f64) -> u64 {
        if eps >= self.e_t {
            return 1;
        }
        match &self.kind {
            SpaceKind::Circle => {
                if eps <= 0.0 {
                    u64::MAX
                } else {
                    (PI / eps).ceil() as u64
                }
            }
            SpaceKind::Finite { dist } => finite_cover(dist, eps) as u64,
            SpaceKind::Table { eps: e, n } => match e.iter().rposition(|x| *x <= eps) {
                Some(i) => n[i],
                None => n[0],
            },
        }
    }

    /// ∫₀^{e(T)} [log N(ε)]^{1/θ} dε, integrated exactly over the steps of N.
    pub fn entropy_integral(&self, theta: TailIndex) -> Result<f64> {
        let p = theta.inv();
        match &self.kind {
            SpaceKind::Circle => Ok(PI * circle_entropy_series(p)),
            SpaceKind::Finite { dist } => {
                let mut cuts: Vec<f64> = dist.iter().flatten().cloned().filter(|d| *d > 0.0 && *d < self.e_t).collect();
                cuts.push(0.0);
                cuts.push(self.e_t);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                Ok(cuts
                    .windows(2)
                    .map(|w| (w[1] - w[0]) * (finite_cover(dist, w[0]) as f64).ln().powf(p))
                    .sum())
            }
            SpaceKind::Table { eps, n } => {
                let mut total = eps[0] * (n[0] as f64).ln().powf(p);
                for i in 0..eps.len() - 1 {
                    total += (eps[i + 1] - eps[i]) * (n[i] as f64).ln().powf(p);
                }
                if total.is_finite() {
                    Ok(total)
                } else {
                    Err(Error::numerical("entropy integral diverges"))
                }
            }
        }
    }
}

/// Minimum number of closed ε-balls centred at points of a finite space.
fn finite_cover(dist: &[Vec<f64>], eps: f64) -> usize {
    let n = dist.len();
    let masks: Vec<u32> = (0..n)
        .map(|c| (0..n).filter(|&j| dist[c][j] <= eps).fold(0u32, |m, j| m | (1 << j)))
        .collect();
    if n <= EXACT_COVER_MAX {
        let full = (1u32 << n) - 1;
        for k in 1..=n {
            if cover_with(&masks, full, k, 0) {
                return k;
            }
        }
        n
    } else {
        greedy_cover(dist, eps)
    }
}

fn cover_with(masks: &[u32], full: u32, k: usize, acc: u32) -> bool {
    if acc == full {
        return true;
    }
    if k == 0 {
        return false;
    }
    // Some chosen ball must contain the lowest uncovered point.
    let first = (!acc & full).trailing_zeros();
    masks
        .iter()
        .filter(|m| *m & (1 << first) != 0)
        .any(|m| cover_with(masks, full, k - 1, acc | m))
}

fn greedy_cover(dist: &[Vec<f64>], eps: f64) -> usize {
    let n = dist.len();
    let mut covered = vec![false; n];
    let mut count = 0;
    while covered.iter().any(|c| !c) {
        let best = (0..n)
            .max_by_key(|&c| (0..n).filter(|&j| !covered[j] && dist[c][j] <= eps).count())
            .expect("non-empty");
        for j in 0..n {
            if dist[best][j] <= eps {
                covered[j] = true;
            }
        }
        count += 1;
    }
    count
}

/// Σ_{k≥2} (log k)^p / (k(k−1)); exact to 10⁵ terms, then a midpoint-rule integral for the tail.
pub fn circle_entropy_series(p: f64) -> f64 {
    const HEAD: u64 = 100_000;
    let head: f64 = (2..=HEAD).map(|k| (k as f64).ln().powf(p) / ((k * (k - 1)) as f64)).sum();
    // With x = e^u the tail integrand (log x)^p / (x(x−1)) becomes u^p / (e^u − 1).
    let u0 = (HEAD as f64 + 0.5).ln();
    let tail = integrate(|u| u.powf(p) / u.exp_m1(), u0, u0 + 400.0, 1e-16);
    head + tail
}

/// One cell of a partition level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// Point indices (finite spaces) or `[lo, hi)` arc endpoints (circle).
    pub members: Vec<usize>,
    pub arc: Option<(f64, f64)>,
    /// Representative t_A, which lies in the cell and hence in its parent.
    pub representative: f64,
    pub rep_index: Option<usize>,
    pub parent: Option<usize>,
}

/// Level k of a partition sequence; every cell fits in a ball of radius `radius` about its representative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub k: usize,
    pub radius: f64,
    pub cells: Vec<Cell>,
}

/// Increasing partitions with level k at radius e(T)·2^{−(k−1)}; level 1 is {T}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSequence {
    pub levels: Vec<Level>,
}

impl PartitionSequence {
    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k - 1]
    }

    /// Cell index at level k containing point `i` of a finite space.
    pub fn cell_of(&self, k: usize, i: usize) -> usize {
        self.level(k).cells.iter().position(|c| c.members.contains(&i)).expect("partition covers T")
    }
}

/// Dyadic partitions down to level `k_max`.
pub fn dyadic_partitions(space: &CoveringOracle, k_max: usize) -> Result<PartitionSequence> {
    if k_max == 0 {
        return Err(Error::domain("k_max", "must be >= 1"));
    }
    let mut levels = Vec::with_capacity(k_max);
    match &space.kind {
        SpaceKind::Circle => {
            for k in 1..=k_max {
                let m = 1usize << (k - 1);
                let w = 2.0 * PI / m as f64;
                let cells = (0..m)
                    .map(|j| Cell {
                        members: Vec::new(),
                        arc: Some((w * j as f64, w * (j + 1) as f64)),
                        representative: w * j as f64,
                        rep_index: None,
                        parent: if k == 1 { None } else { Some(j / 2) },
                    })
                    .collect();
                levels.push(Level { k, radius: space.e_t * 2f64.powi(-(k as i32 - 1)), cells });
            }
        }
        SpaceKind::Finite { dist } => {
            let n = dist.len();
            let center = (0..n)
                .min_by(|&a, &b| {
                    let ra = dist[a].iter().cloned().fold(0.0, f64::max);
                    let rb = dist[b].iter().cloned().fold(0.0, f64::max);
                    ra.total_cmp(&rb)
                })
                .expect("non-empty");
            levels.push(Level {
                k: 1,
                radius: space.e_t,
                cells: vec![Cell {
                    members: (0..n).collect(),
                    arc: None,
                    representative: center as f64,
                    rep_index: Some(center),
                    parent: None,
                }],
            });
            for k in 2..=k_max {
                let radius = space.e_t * 2f64.powi(-(k as i32 - 1));
                let mut cells = Vec::new();
                for (pi, parent) in levels[k - 2].cells.iter().enumerate() {
                    let mut left: Vec<usize> = parent.members.clone();
                    // The parent's representative seeds the first child.
                    let mut seed = parent.rep_index;
                    while !left.is_empty() {
                        let c = seed.take().filter(|s| left.contains(s)).unwrap_or_else(|| {
                            *left
                                .iter()
                                .max_by_key(|&&c| left.iter().filter(|&&j| dist[c][j] <= radius).count())
                                .expect("non-empty")
                        });
                        let (inside, rest): (Vec<usize>, Vec<usize>) = left.iter().partition(|&&j| dist[c][j] <= radius);
                        cells.push(Cell {
                            members: inside,
                            arc: None,
                            representative: c as f64,
                            rep_index: Some(c),
                            parent: Some(pi),
                        });
                        left = rest;
                    }
                }
                levels.push(Level { k, radius, cells });
            }
        }
        SpaceKind::Table { .. } => {
            return Err(Error::domain("space", "tabulated covering functions carry no point set to partition"));
        }
    }
    Ok(PartitionSequence { levels })
}

/// ψ_θ⁻¹(ψ_θ(x_θ) + n)·max_norm, the maximal inequality for θ < 1.
pub fn maximal_bound(n: u64, theta: TailIndex, max_norm: f64) -> Result<f64> {
    if !theta.is_heavy() {
        return Err(Error::domain("theta", "maximal_bound needs theta < 1; use maximal_bound_light"));
    }
    check_n_norm(n, max_norm)?;
    Ok((one_plus_psi_x_theta(theta) + n as f64).ln().powf(theta.inv()) * max_norm)
}

/// (log(1 + n))^{1/θ}·max_norm, the light-tailed maximal inequality.
pub fn maximal_bound_light(n: u64, theta: TailIndex, max_norm: f64) -> Result<f64> {
    check_n_norm(n, max_norm)?;
    Ok((n as f64).ln_1p().powf(theta.inv()) * max_norm)
}

fn check_n_norm(n: u64, max_norm: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("n", "must be >= 1"));
    }
    if !(max_norm > 0.0) || !max_norm.is_finite() {
        return Err(Error::domain("max_norm", format!("must be > 0, got {max_norm}")));
    }
    Ok(())
}

/// b·log^{1/θ}(n)·(1 − 1/e), a lower bound on E max of n i.i.d. Weibull(θ, b).
pub fn maximal_lower_bound(n: u64, theta: TailIndex, b: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("n", "must be >= 2"));
    }
    if !(b > 0.0) {
        return Err(Error::domain("b", format!("must be > 0, got {b}")));
    }
    Ok(b * (n as f64).ln().powf(theta.inv()) * (1.0 - (-1.0f64).exp()))
}

/// K_θ for θ < 1; (log 3 / log 2)^{1/θ} for the light-tailed maximal inequality.
pub fn dudley_constant(theta: TailIndex) -> Result<f64> {
    if theta.is_heavy() {
        k_theta(theta)
    } else {
        Ok((3f64.ln() / 2f64.ln()).powf(theta.inv()))
    }
}

/// 4·C·K_θ·∫₀^{e(T)} [log N(ε)]^{1/θ} dε for a process with ‖X_s − X_t‖_{ψθ} ≤ C d(s, t).
pub fn dudley_bound(space: &CoveringOracle, theta: TailIndex, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain("C", format!("must be > 0, got {c}")));
    }
    let integral = space.entropy_integral(theta)?;
    if integral == 0.0 {
        return Ok(0.0);
    }
    Ok(4.0 * c * dudley_constant(theta)? * integral)
}

/// What the series holds beyond its last recorded level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailRule {
    /// Increments vanish past the last level (finite spaces at singleton resolution).
    Zero,
    /// I_{k+1} ≤ I_k + growth; the tail is summed under this majorant.
    Growth(f64),
}

/// Per-level information values I_k for levels first_level, first_level+1, ….
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoSeries {
    pub first_level: usize,
    pub values: Vec<f64>,
    pub tail: TailRule,
}

impl InfoSeries {
    pub fn new(first_level: usize, values: Vec<f64>, tail: TailRule) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("series", "must hold at least one level"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("series", "values must be finite and >= 0"));
        }
        if let TailRule::Growth(g) = tail {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::domain("series", "growth must be finite and >= 0"));
            }
        }
        Ok(InfoSeries { first_level, values, tail })
    }

    /// Levels 1.. with per-level growth log 2, the binary-refinement majorant.
    pub fn dyadic(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values, TailRule::Growth(2f64.ln()))
    }

    pub fn last_level(&self) -> usize {
        self.first_level + self.values.len() - 1
    }
}

/// Level weight in the chained sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LevelWeight {
    /// 2^{−(k−1)}, for level k at radius e(T)·2^{−k}.
    MainText,
    /// 2^{−(k−2)}, for level k at radius e(T)·2^{−(k−1)}.
    Appendix,
}

impl LevelWeight {
    pub fn at(self, k: usize) -> f64 {
        match self {
            LevelWeight::MainText => 2f64.powi(-(k as i32 - 1)),
            LevelWeight::Appendix => 2f64.powi(-(k as i32 - 2)),
        }
    }
}

/// Per-level term of the chained bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ChainVariant {
    /// I_k is an f_θ information: 2^{1/θ} I_k + 2.
    FTheta,
    /// I_k is a Rényi information: 2^{1/θ}(I_k + C_{α,θ})^{1/θ} + 2.
    Key1 { alpha: f64 },
    /// As `Key1` with an explicit additive shift in place of C_{α,θ}.
    Key1Shift { alpha: f64, shift: f64 },
    /// I_k is a Rényi information: 2^{1/θ}(I_k^{1/θ} + B_{α,θ}) + 2.
    Key { alpha: f64 },
}

fn level_term(i: f64, theta: TailIndex, variant: ChainVariant) -> f64 {
    let p = theta.inv();
    let two_p = 2f64.powf(p);
    match variant {
        ChainVariant::FTheta => two_p * i + 2.0,
        ChainVariant::Key1 { alpha } => two_p * (i + c_alpha_theta_with(theta, alpha, a_min_key1(theta, alpha))).powf(p) + 2.0,
        ChainVariant::Key1Shift { shift, .. } => two_p * (i + shift).powf(p) + 2.0,
        ChainVariant::Key { alpha } => two_p * (i.powf(p) + b_alpha_theta_with(theta, alpha, a_min_key1(theta, alpha))) + 2.0,
    }
}

/// C·e(T)·Σ_k w_k·term(I_k), with the tail past the last level summed under the series' tail rule.
pub fn chained_mi_bound(
    series: &InfoSeries,
    theta: TailIndex,
    e_t: f64,
    c: f64,
    variant: ChainVariant,
    weight: LevelWeight,
) -> Result<f64> {
    match variant {
        ChainVariant::Key1 { alpha } | ChainVariant::Key { alpha } | ChainVariant::Key1Shift { alpha, .. } => {
            if !(alpha > 1.0) {
                return Err(Error::domain("alpha", format!("must be > 1, got {alpha}")));
            }
        }
        ChainVariant::FTheta => {}
    }
    if !(e_t >= 0.0) || !(c > 0.0) {
        return Err(Error::domain("scale", "e_T must be >= 0 and C > 0"));
    }
    let mut sum = 0.0;
    for (j, &i) in series.values.iter().enumerate() {
        let k = series.first_level + j;
        sum += weight.at(k) * level_term(i, theta, variant);
    }
    if let TailRule::Growth(g) = series.tail {
        let last = *series.values.last().expect("non-empty");
        let mut k = series.last_level();
        loop {
            k += 1;
            let t = weight.at(k) * level_term(last + g * (k - series.last_level()) as f64, theta, variant);
            sum += t;
            if t <= 1e-13 * sum || k > series.last_level() + 2000 {
                break;
            }
        }
    }
    Ok(c * e_t * sum)
}
