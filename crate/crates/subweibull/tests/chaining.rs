use rand::Rng;
use subweibull::chaining::*;
use subweibull::distlib::{orlicz_norm_of, weibull_quantile, RngSpec};
use subweibull::divergence::{renyi, DiscreteDist};
use subweibull::specfun::{constants, k_theta, TailIndex};

fn ti(t: f64) -> TailIndex {
    TailIndex::new(t).unwrap()
}

#[test]
fn maximal_bound_examples() {
    let v = maximal_bound(100, ti(0.5), 1.0).unwrap();
    assert!((v - (std::f64::consts::E + 100.0).ln().powi(2)).abs() < 1e-12);
    // 1 + ψ(x_θ) + n = e + 100.
    assert!((v - 21.456).abs() < 1e-3);
    assert!((maximal_bound(100, ti(0.5), 3.0).unwrap() - 3.0 * v).abs() < 1e-12);
    assert!(maximal_bound(10, ti(1.0), 1.0).is_err());
    assert!((maximal_bound_light(10, ti(2.0), 2.0).unwrap() - 2.0 * 11f64.ln().sqrt()).abs() < 1e-14);
    let mut prev = 0.0;
    for n in 1..200 {
        let b = maximal_bound(n, ti(0.3), 1.5).unwrap();
        assert!(b >= prev);
        prev = b;
    }
}

#[test]
fn maximal_lower_bound_examples() {
    let v = maximal_lower_bound(2, ti(1.0), 1.0).unwrap();
    assert!((v - 2f64.ln() * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    assert!((v - 0.438).abs() < 1e-3);
    assert!(maximal_lower_bound(1, ti(1.0), 1.0).is_err());
}

#[test]
fn maximal_sandwich_small_mc() {
    // Standard Weibull(1/2) has Orlicz norm 4.
    let th = ti(0.5);
    for (n, seed) in [(10u64, 1u64), (100, 2)] {
        let mut rng = RngSpec::new(seed, 0).rng();
        let reps = 20_000;
        let mut s = 0.0;
        for _ in 0..reps {
            let m = (0..n).map(|_| weibull_quantile(th, 1.0, 1.0 - rng.gen::<f64>())).fold(0.0, f64::max);
            s += m;
        }
        let mean = s / reps as f64;
        assert!(mean >= maximal_lower_bound(n, th, 1.0).unwrap());
        assert!(mean <= maximal_bound(n, th, 4.0).unwrap());
    }
}

#[test]
fn covering_circle() {
    let c = CoveringOracle::circle();
    assert_eq!(c.radius(), std::f64::consts::PI);
    assert_eq!(c.covering(4.0), 1);
    assert_eq!(c.covering(std::f64::consts::PI / 3.0), 3);
    assert_eq!(c.covering(1.0), 4);
    let mut prev = u64::MAX;
    for i in 1..200 {
        let n = c.covering(0.02 * i as f64);
        assert!(n <= prev);
        prev = n;
    }
}

#[test]
fn covering_finite_exact() {
    let line = CoveringOracle::line(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(line.radius(), 2.0);
    assert_eq!(line.covering(0.5), 5);
    assert_eq!(line.covering(1.0), 2);
    assert_eq!(line.covering(2.0), 1);
    let single = CoveringOracle::line(&[0.0]).unwrap();
    assert_eq!(single.radius(), 0.0);
    assert_eq!(dudley_bound(&single, ti(0.5), 1.0).unwrap(), 0.0);
    assert!(CoveringOracle::finite(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
}

#[test]
fn covering_table() {
    let t = CoveringOracle::table(vec![0.1, 0.5, 1.0], vec![10, 3, 1]).unwrap();
    assert_eq!(t.radius(), 1.0);
    assert_eq!(t.covering(0.05), 10);
    assert_eq!(t.covering(0.7), 3);
    let want = 0.5 * 10f64.ln().powi(2) + 0.5 * 3f64.ln().powi(2);
    assert!((t.entropy_integral(ti(0.5)).unwrap() - want).abs() < 1e-14);
    assert!(CoveringOracle::table(vec![0.1, 0.5], vec![3, 4]).is_err());
    assert!(CoveringOracle::table(vec![0.1, 0.5], vec![3, 2]).is_err());
}

#[test]
fn circle_series_and_tail() {
    // Brute force to 2·10⁶ terms plus an integral-comparison tail bracket.
    let p = 2.0;
    let f = |k: f64| k.ln().powf(p) / (k * (k - 1.0));
    let big: f64 = (2..=2_000_000u64).map(|k| f(k as f64)).sum();
    let kk = 2_000_000f64;
    // ∫_K^∞ (ln x)²/x² dx = ((ln K)² + 2 ln K + 2)/K brackets the tail up to O(1/K²).
    let tail_hi = (kk.ln().powi(2) + 2.0 * kk.ln() + 2.0) / kk * kk / (kk - 1.0);
    let tail_lo = ((kk + 1.0).ln().powi(2) + 2.0 * (kk + 1.0).ln() + 2.0) / (kk + 1.0);
    let s = circle_entropy_series(p);
    assert!(s >= big + tail_lo - 1e-10 && s <= big + tail_hi + 1e-10, "s={s}");
}

#[test]
fn dudley_circle_value() {
    let th = ti(0.5);
    let v = dudley_bound(&CoveringOracle::circle(), th, 1.0).unwrap();
    let want = 4.0 * k_theta(th).unwrap() * std::f64::consts::PI * circle_entropy_series(2.0);
    assert!((v - want).abs() < 1e-9 * want);
    // With C = √2·D_θ the value is 832.0 at θ = 1/2.
    let c = 2f64.sqrt() * 4.0;
    assert!((dudley_bound(&CoveringOracle::circle(), th, c).unwrap() - 832.01).abs() < 0.05);
}

#[test]
fn dudley_light_tailed_reduction() {
    let mut rng = RngSpec::new(3, 0).rng();
    for _ in 0..50 {
        let pts: Vec<f64> = (0..rng.gen_range(2..9)).map(|_| rng.gen::<f64>()).collect();
        let s = CoveringOracle::line(&pts).unwrap();
        let classical = s.entropy_integral(ti(2.0)).unwrap();
        let v = dudley_bound(&s, ti(2.0), 1.3).unwrap();
        let k2 = (3f64.ln() / 2f64.ln()).sqrt();
        assert!((v - 4.0 * 1.3 * k2 * classical).abs() < 1e-12 * v.max(1.0));
    }
}

#[test]
fn partitions_circle() {
    let p = dyadic_partitions(&CoveringOracle::circle(), 6).unwrap();
    assert_eq!(p.level(1).cells.len(), 1);
    assert_eq!(p.level(1).cells[0].arc, Some((0.0, 2.0 * std::f64::consts::PI)));
    assert_eq!(p.level(3).cells.len(), 4);
    for c in &p.level(3).cells {
        let (a, b) = c.arc.unwrap();
        assert!((b - a - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
    check_structure_circle(&p);
}

fn check_structure_circle(p: &PartitionSequence) {
    for k in 2..=p.levels.len() {
        let lvl = p.level(k);
        for c in &lvl.cells {
            let (a, b) = c.arc.unwrap();
            let (pa, pb) = p.level(k - 1).cells[c.parent.unwrap()].arc.unwrap();
            assert!(a >= pa && b <= pb);
            assert!(c.representative >= pa && c.representative < pb);
            assert!(0.5 * (b - a) <= lvl.radius + 1e-15);
        }
        let parents = p.level(k - 1).cells.len();
        for j in 0..parents {
            assert_eq!(lvl.cells.iter().filter(|c| c.parent == Some(j)).count(), 2);
        }
    }
}

fn check_structure_finite(p: &PartitionSequence, dist: &[Vec<f64>]) {
    let n = dist.len();
    for k in 1..=p.levels.len() {
        let lvl = p.level(k);
        let mut seen = vec![0usize; n];
        for c in &lvl.cells {
            let r = c.rep_index.unwrap();
            assert!(c.members.contains(&r));
            for &m in &c.members {
                seen[m] += 1;
                assert!(dist[r][m] <= lvl.radius + 1e-12);
            }
            if k > 1 {
                let parent = &p.level(k - 1).cells[c.parent.unwrap()];
                assert!(c.members.iter().all(|m| parent.members.contains(m)));
                assert!(parent.members.contains(&r));
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }
}

#[test]
fn partitions_finite_structure() {
    let mut rng = RngSpec::new(4, 0).rng();
    for _ in 0..200 {
        let n = rng.gen_range(1..12);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let dist: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
            .collect();
        let s = CoveringOracle::finite(dist.clone()).unwrap();
        let p = dyadic_partitions(&s, 8).unwrap();
        check_structure_finite(&p, &dist);
    }
}

#[test]
fn chained_bound_identities() {
    let th = ti(0.5);
    let zeros = InfoSeries::new(1, vec![0.0; 60], TailRule::Zero).unwrap();
    let v = chained_mi_bound(&zeros, th, 2.0, 3.0, ChainVariant::FTheta, LevelWeight::MainText).unwrap();
    assert!((v - 4.0 * 3.0 * 2.0).abs() < 1e-12);
    let cst = constants(th, 2.0).unwrap().c_alpha_theta;
    let i = 0.7;
    let flat = InfoSeries::new(1, vec![i; 80], TailRule::Zero).unwrap();
    let v = chained_mi_bound(&flat, th, 1.5, 2.0, ChainVariant::Key1 { alpha: 2.0 }, LevelWeight::MainText).unwrap();
    let want = 2.0 * 1.5 * 2.0 * (4.0 * (i + cst).powi(2) + 2.0);
    assert!((v - want).abs() < 1e-9 * want);
    // Growth tail with zero growth equals the infinite flat series.
    let short = InfoSeries::new(1, vec![i; 3], TailRule::Growth(0.0)).unwrap();
    let v2 = chained_mi_bound(&short, th, 1.5, 2.0, ChainVariant::Key1 { alpha: 2.0 }, LevelWeight::MainText).unwrap();
    assert!((v2 - want).abs() < 1e-9 * want);
    // Argmax-type constant I = log n at θ = 2: the FTheta-free key1 sum is C e_T 2 (√2 (log n + log 2)^{1/2} + 2).
    for n in [2.0f64, 10.0, 1000.0] {
        let s = InfoSeries::new(1, vec![n.ln(); 80], TailRule::Zero).unwrap();
        let v = chained_mi_bound(&s, ti(2.0), 1.0, 1.0, ChainVariant::Key1 { alpha: 1.0001 }, LevelWeight::MainText).unwrap();
        let want = 2.0 * (2f64.sqrt() * (n.ln() + 2f64.ln()).sqrt() + 2.0);
        assert!((v - want).abs() < 1e-9 * want);
    }
    let appendix = chained_mi_bound(&zeros, th, 1.0, 1.0, ChainVariant::FTheta, LevelWeight::Appendix).unwrap();
    assert!((appendix - 8.0).abs() < 1e-12);
}

/// Exact E[X_W] and per-level Rényi informations for X_t = t·Z on a finite line,
/// Z on a symmetric quantile grid and W a mixture of argmax and a fixed random kernel.
fn finite_instance(seed: u64, theta: TailIndex, alpha: f64) -> (f64, f64, InfoSeries, f64) {
    let mut rng = RngSpec::new(seed, 0).rng();
    let m = rng.gen_range(3..=6);
    let mut pts: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    pts.sort_by(f64::total_cmp);
    let space = CoveringOracle::line(&pts).unwrap();
    let half = 20;
    let mut z = Vec::new();
    for j in 0..half {
        let u = (j as f64 + 0.5) / half as f64;
        let x = weibull_quantile(theta, 1.0, u);
        z.push(x);
        z.push(-x);
    }
    let ns = z.len();
    let ps = 1.0 / ns as f64;
    let eps: f64 = rng.gen();
    let noise: Vec<Vec<f64>> = (0..ns)
        .map(|_| {
            let w: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    // kernel[s][w]
    let kernel: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            let best = (0..m).max_by(|&a, &b| (pts[a] * z[s]).total_cmp(&(pts[b] * z[s]))).unwrap();
            (0..m).map(|w| eps * f64::from(u8::from(w == best)) + (1.0 - eps) * noise[s][w]).collect()
        })
        .collect();
    let mean: f64 = (0..ns).map(|s| ps * (0..m).map(|w| kernel[s][w] * pts[w] * z[s]).sum::<f64>()).sum();
    let c = orlicz_norm_of(&z, theta);
    let parts = dyadic_partitions(&space, 12).unwrap();
    let mut values = Vec::new();
    for k in 2..=12 {
        let lvl = parts.level(k);
        let cells = lvl.cells.len();
        let mut joint = vec![0.0; cells * ns];
        let mut marg = vec![0.0; cells];
        for s in 0..ns {
            for w in 0..m {
                let cidx = parts.cell_of(k, w);
                joint[cidx * ns + s] += ps * kernel[s][w];
                marg[cidx] += ps * kernel[s][w];
            }
        }
        let prod: Vec<f64> = (0..cells * ns).map(|i| marg[i / ns] * ps).collect();
        let jd = DiscreteDist::from_weights(&joint).unwrap();
        let pd = DiscreteDist::from_weights(&prod).unwrap();
        values.push(renyi(&jd, &pd, alpha).unwrap().value);
        if lvl.cells.iter().all(|c| c.members.len() == 1) {
            break;
        }
    }
    (mean, c, InfoSeries::new(2, values, TailRule::Zero).unwrap(), space.radius())
}

#[test]
fn chained_bound_sound_on_finite_spaces() {
    for t in [0.5, 0.8, 1.0, 2.0] {
        for alpha in [1.5, 2.0, 3.0] {
            let th = ti(t);
            for seed in 0..60u64 {
                let (mean, c, series, e_t) = finite_instance(seed * 7 + 1, th, alpha);
                for variant in [ChainVariant::Key1 { alpha }, ChainVariant::Key { alpha }] {
                    let b = chained_mi_bound(&series, th, e_t, c, variant, LevelWeight::Appendix).unwrap();
                    assert!(mean <= b, "theta={t} alpha={alpha} seed={seed} mean={mean} bound={b}");
                }
            }
        }
    }
}
