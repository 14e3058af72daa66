use proptest::prelude::*;
use rayon::prelude::*;
use subweibull::distlib::RngSpec;
use subweibull::numeric::{mean_se, median, spearman};
use subweibull::sgld_lab::*;
use subweibull::specfun::{a_min_key1, b_alpha_theta_with, m_theta, TailIndex};
use subweibull::Error;

fn ti(t: f64) -> TailIndex {
    TailIndex::new(t).unwrap()
}

fn kurtosis(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

#[test]
fn regression_shape() {
    let d = generate_regression(&RegressionTask::new(4, 2.0).unwrap(), RngSpec::new(1, 0)).unwrap();
    assert_eq!(d.len(), 4);
    assert_eq!(d.x.len(), 4);
    for (x, y) in d.x.iter().zip(&d.y) {
        assert!((0.0..=1.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]));
        assert!(y.is_finite());
    }
    assert!(RegressionTask::new(0, 1.0).is_err());
    assert!(RegressionTask::new(5, 0.5).is_err());
}

#[test]
fn gaussian_residual_at_lambda_one() {
    let task = RegressionTask::new(100_000, 1.0).unwrap();
    let d = generate_regression(&task, RngSpec::new(7, 0)).unwrap();
    let res: Vec<f64> = d.x.iter().zip(&d.y).map(|(x, y)| y - (x[0] - x[1])).collect();
    let (m, se) = mean_se(&res);
    assert!(m.abs() <= 3.0 * se, "mean {m} se {se}");
    let var = res.iter().map(|r| (r - m).powi(2)).sum::<f64>() / res.len() as f64;
    assert!((var - 1.0).abs() < 0.02, "var {var}");
}

#[test]
fn power_transform_raises_kurtosis() {
    let ys = |lam: f64| generate_regression(&RegressionTask::new(50_000, lam).unwrap(), RngSpec::new(3, 0)).unwrap().y;
    let (k1, k3) = (kurtosis(&ys(1.0)), kurtosis(&ys(3.0)));
    assert!(k3 > k1 + 1.0, "k1 {k1} k3 {k3}");
}

#[test]
fn zero_step_zero_noise_is_constant() {
    let d = generate_regression(&RegressionTask::new(20, 1.0).unwrap(), RngSpec::new(2, 0)).unwrap();
    let mut cfg = SgldConfig::online(1.0, 1.0, 0.0, 3);
    cfg.schedule = Schedule::Constant(0.0);
    cfg.w1 = [0.3, -0.7];
    let tr = sgld_run(&d, &cfg, RngSpec::new(2, 1)).unwrap();
    assert_eq!(tr.steps(), 60);
    assert_eq!(tr.iterates.len(), 61);
    assert_eq!(tr.batches.len(), 60);
    assert_eq!(tr.g_hat.len(), 60);
    assert!(tr.iterates.iter().all(|w| *w == [0.3, -0.7]));
}

#[test]
fn full_batch_gradient_descent_reaches_least_squares() {
    let d = generate_regression(&RegressionTask::new(200, 1.0).unwrap(), RngSpec::new(4, 0)).unwrap();
    // Normal equations of the 2x2 least-squares problem.
    let (mut s00, mut s01, mut s11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in d.x.iter().zip(&d.y) {
        s00 += x[0] * x[0];
        s01 += x[0] * x[1];
        s11 += x[1] * x[1];
        r0 += x[0] * y;
        r1 += x[1] * y;
    }
    let det = s00 * s11 - s01 * s01;
    let ls = [(s11 * r0 - s01 * r1) / det, (s00 * r1 - s01 * r0) / det];
    let mut cfg = SgldConfig::online(1.0, 1.0, 0.0, 20_000);
    cfg.schedule = Schedule::Constant(0.5);
    cfg.batch = 200;
    let tr = sgld_run(&d, &cfg, RngSpec::new(4, 1)).unwrap();
    assert!(tr.batches.is_empty());
    let risks: Vec<f64> = tr.iterates.iter().map(|w| d.risk(*w)).collect();
    assert!(risks.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    let w = tr.last();
    assert!((w[0] - ls[0]).abs() < 1e-6 && (w[1] - ls[1]).abs() < 1e-6, "{w:?} vs {ls:?}");
}

#[test]
fn runs_are_deterministic() {
    let d = generate_regression(&RegressionTask::new(50, 2.0).unwrap(), RngSpec::new(5, 0)).unwrap();
    let cfg = SgldConfig::online(0.5, 1.0, 1.0, 10);
    let a = sgld_run(&d, &cfg, RngSpec::new(5, 1)).unwrap();
    let b = sgld_run(&d, &cfg, RngSpec::new(5, 1)).unwrap();
    assert_eq!(a, b);
    let c = sgld_run(&d, &cfg, RngSpec::new(6, 1)).unwrap();
    assert_ne!(a.iterates, c.iterates);
    let e1 = sgld_experiment(&RegressionTask::new(50, 2.0).unwrap(), &cfg, 2.0, 9).unwrap();
    let e2 = sgld_experiment(&RegressionTask::new(50, 2.0).unwrap(), &cfg, 2.0, 9).unwrap();
    assert_eq!(e1, e2);
    assert_eq!(e1.last().unwrap().gap, final_gap(&RegressionTask::new(50, 2.0).unwrap(), &cfg, 9));
}

#[test]
fn schedule_matches_relation() {
    for theta in [0.1, 0.5, 1.0, 2.0] {
        let s = Schedule::Polynomial { eta0: 1.0, theta };
        for t in [1usize, 7, 1000] {
            let lhs = s.eta(t).powf(2.0 / theta);
            assert!((lhs - (t as f64).powf(-theta)).abs() <= 1e-12 * lhs.max(1.0));
        }
    }
}

#[test]
fn divergence_guard_and_domain_errors() {
    let d = generate_regression(&RegressionTask::new(20, 1.0).unwrap(), RngSpec::new(8, 0)).unwrap();
    let mut cfg = SgldConfig::online(1.0, 1.0, 0.0, 100);
    cfg.schedule = Schedule::Constant(50.0);
    assert!(matches!(sgld_run(&d, &cfg, RngSpec::new(8, 1)), Err(Error::Numerical(_))));
    let mut bad = SgldConfig::online(1.0, 1.0, -1.0, 1);
    assert!(matches!(sgld_run(&d, &bad, RngSpec::new(8, 1)), Err(Error::Domain { .. })));
    bad.sigma = 1.0;
    bad.epochs = 0;
    assert!(matches!(sgld_run(&d, &bad, RngSpec::new(8, 1)), Err(Error::Domain { .. })));

    let noiseless = sgld_run(&d, &SgldConfig::online(1.0, 0.1, 0.0, 1), RngSpec::new(8, 1)).unwrap();
    assert!(matches!(sgld_bound(&noiseless, ti(1.0), 2.0, 1.0, 1.0, 20), Err(Error::Domain { .. })));
    let noisy = sgld_run(&d, &SgldConfig::online(0.5, 0.1, 1.0, 1), RngSpec::new(8, 1)).unwrap();
    assert!(sgld_bound(&noisy, ti(0.5), 2.0, 0.5, 1.0, 20).is_err());
    assert!(gen_gap([f64::NAN, 0.0], &d, &d).is_err());
}

#[test]
fn gap_vanishes_on_train_set() {
    let d = generate_regression(&RegressionTask::new(100, 3.0).unwrap(), RngSpec::new(9, 0)).unwrap();
    assert_eq!(gen_gap([0.4, 2.0], &d, &d).unwrap(), 0.0);
}

#[test]
fn empty_path_bound_matches_closed_form() {
    let d = generate_regression(&RegressionTask::new(10, 2.0).unwrap(), RngSpec::new(10, 0)).unwrap();
    let tr = sgld_run(&d, &SgldConfig::online(0.5, 1.0, 1.0, 1), RngSpec::new(10, 1)).unwrap();
    for (theta, alpha) in [(0.5, 2.0), (1.0, 2.0), (2.0, 3.0), (0.3, 1.5)] {
        let t = ti(theta);
        let a = a_min_key1(t, alpha);
        let (v, n) = (1.7, 10usize);
        let got = sgld_bound_prefix(&tr, 0, t, alpha, a, v, n).unwrap();
        let want = m_theta(t) * v / (n as f64).sqrt() * (4.0 + 2f64.powf(1.0 / theta) * (1.0 + a).ln().powf(1.0 / theta));
        assert!((got - want).abs() <= 1e-12 * want, "theta {theta}: {got} vs {want}");
    }
}

#[test]
fn doubling_sigma_lowers_bound() {
    let d = generate_regression(&RegressionTask::new(30, 2.0).unwrap(), RngSpec::new(11, 0)).unwrap();
    let tr = sgld_run(&d, &SgldConfig::online(0.5, 1.0, 1.0, 2), RngSpec::new(11, 1)).unwrap();
    let mut wide = tr.clone();
    wide.sigma.iter_mut().for_each(|s| *s *= 2.0);
    let t = ti(0.5);
    let a = a_min_key1(t, 2.0);
    let b1 = sgld_bound(&tr, t, 2.0, a, 1.0, 30).unwrap();
    let b2 = sgld_bound(&wide, t, 2.0, a, 1.0, 30).unwrap();
    assert!(b2 < b1, "{b2} !< {b1}");
}

#[test]
fn bound_dominates_mean_gap() {
    let task = RegressionTask::new(500, 2.0).unwrap();
    let cfg = SgldConfig::online(0.5, 1.0, 1.0, 100);
    let finals: Vec<GapRecord> =
        (0..20u64).into_par_iter().map(|s| *sgld_experiment(&task, &cfg, 2.0, s).unwrap().last().unwrap()).collect();
    let mean_gap = finals.iter().map(|r| r.gap.abs()).sum::<f64>() / 20.0;
    let min_bound = finals.iter().map(|r| r.bound).fold(f64::INFINITY, f64::min);
    assert!(min_bound.is_finite() && min_bound >= mean_gap, "bound {min_bound} gap {mean_gap}");
    for r in &finals {
        assert_eq!(r.iter, 50_000);
    }
}

/// Final-iterate gap on the same streams as `sgld_experiment`, without the bound.
fn final_gap(task: &RegressionTask, cfg: &SgldConfig, seed: u64) -> f64 {
    let train = generate_regression(task, RngSpec::new(seed, 0)).unwrap();
    let test = generate_regression(&RegressionTask { n: 10 * task.n, ..*task }, RngSpec::new(seed, 1)).unwrap();
    let tr = sgld_run(&train, cfg, RngSpec::new(seed, 2)).unwrap();
    gen_gap(tr.last(), &train, &test).unwrap()
}

#[test]
fn gap_trends_in_n_and_lambda() {
    let ns = [100usize, 1000, 10_000];
    let lams = [1.0, 2.0, 3.0];
    let mut med = vec![vec![0.0; ns.len()]; lams.len()];
    for (i, &lam) in lams.iter().enumerate() {
        for (j, &n) in ns.iter().enumerate() {
            let task = RegressionTask::new(n, lam).unwrap();
            let cfg = SgldConfig::online(1.0 / lam, 1.0, 0.1, 100);
            let gaps: Vec<f64> = (0..20u64)
                .into_par_iter()
                .map(|s| final_gap(&task, &cfg, s).abs())
                .collect();
            med[i][j] = median(&gaps);
        }
    }
    let nx: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    for (i, row) in med.iter().enumerate() {
        let rho = spearman(&nx, row);
        assert!(rho <= -0.8, "lambda {}: rho {rho}, medians {row:?}", lams[i]);
    }
    for j in 0..ns.len() {
        let col: Vec<f64> = med.iter().map(|r| r[j]).collect();
        let rho = spearman(&lams, &col);
        assert!(rho >= 0.8, "n {}: rho {rho}, medians {col:?}", ns[j]);
    }
}

#[test]
fn perturbation_lemma_in_one_dimension() {
    let couplings: Vec<Vec<(f64, f64, f64)>> = vec![
        vec![(0.0, 1.0, 1.0)],
        vec![(0.0, 0.5, 0.5), (2.0, -1.0, 0.5)],
        vec![(-1.0, 1.0, 0.2), (0.0, 0.0, 0.3), (3.0, 1.5, 0.5)],
        vec![(0.0, 4.0, 0.7), (1.0, 1.2, 0.3)],
    ];
    for pairs in &couplings {
        for theta in [0.4, 0.5, 0.8, 1.0, 2.0] {
            for alpha in [1.5, 2.0, 4.0] {
                for sigma in [0.5, 1.0, 3.0] {
                    let t = ti(theta);
                    let a = a_min_key1(t, alpha);
                    let div = gaussian_mixture_f_theta_div(pairs, sigma, t, a).unwrap();
                    let cap = perturbation_bound(pairs, sigma, t, alpha, a);
                    assert!(div.is_finite() && div <= cap, "theta {theta} alpha {alpha} sigma {sigma}: {div} > {cap}");
                }
            }
        }
    }
}

#[test]
fn identical_laws_give_the_offset_floor() {
    let pairs = [(0.0, 0.0, 0.4), (2.0, 2.0, 0.6)];
    let t = ti(0.5);
    let a = a_min_key1(t, 2.0);
    let div = gaussian_mixture_f_theta_div(&pairs, 1.0, t, a).unwrap();
    assert!((div - (1.0 + a).ln().powf(2.0)).abs() < 1e-8);
    let cap = perturbation_bound(&pairs, 1.0, t, 2.0, a);
    assert!((cap - b_alpha_theta_with(t, 2.0, a)).abs() < 1e-15);
}

fn small_traj() -> SgldTrajectory {
    let d = generate_regression(&RegressionTask::new(8, 2.0).unwrap(), RngSpec::new(12, 0)).unwrap();
    let mut cfg = SgldConfig::online(0.5, 1.0, 1.0, 2);
    cfg.checkpoints = 16;
    sgld_run(&d, &cfg, RngSpec::new(12, 1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_is_monotone(theta in 0.2f64..2.0, idx in 0usize..16, bump in 1.0f64..5.0, steps in 0usize..16) {
        let tr = small_traj();
        let t = ti(theta);
        let a = a_min_key1(t, 2.0);
        let base = sgld_bound(&tr, t, 2.0, a, 1.0, 8).unwrap();
        let mut eta_up = tr.clone();
        eta_up.eta[idx] *= bump;
        prop_assert!(sgld_bound(&eta_up, t, 2.0, a, 1.0, 8).unwrap() >= base);
        let mut g_up = tr.clone();
        g_up.g_hat[idx] = g_up.g_hat[idx] * bump + 0.1;
        prop_assert!(sgld_bound(&g_up, t, 2.0, a, 1.0, 8).unwrap() >= base);
        let short = sgld_bound_prefix(&tr, steps, t, 2.0, a, 1.0, 8).unwrap();
        let longer = sgld_bound_prefix(&tr, steps + 1, t, 2.0, a, 1.0, 8).unwrap();
        prop_assert!(longer >= short);
    }

    #[test]
    fn trajectory_lengths_consistent(n in 1usize..12, epochs in 1usize..4, batch in 1usize..5, seed in 0u64..1000) {
        let d = generate_regression(&RegressionTask::new(n, 1.5).unwrap(), RngSpec::new(seed, 0)).unwrap();
        let mut cfg = SgldConfig::online(0.8, 0.5, 1.0, epochs);
        cfg.batch = batch;
        let tr = sgld_run(&d, &cfg, RngSpec::new(seed, 1)).unwrap();
        let per_epoch = if batch >= n { 1 } else { n.div_ceil(batch) };
        prop_assert_eq!(tr.steps(), epochs * per_epoch);
        prop_assert_eq!(tr.iterates.len(), tr.steps() + 1);
        prop_assert_eq!(tr.sigma.len(), tr.steps());
        prop_assert_eq!(tr.g_hat.len(), tr.steps());
        prop_assert!(tr.eta.iter().all(|e| *e > 0.0));
        prop_assert!(tr.batches.iter().all(|&i| (i as usize) < n));
    }
}
