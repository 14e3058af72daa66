//! Fast invariant checks over every module; each yields pass/fail with a detail string.

use subweibull::align::{best_of_n, solve_kl_budget, solve_renyi_budget, weibull_quantile_grid};
use subweibull::chaining::{maximal_bound, maximal_lower_bound};
use subweibull::circle_bench::exact_selector_mean;
use subweibull::distlib::{mc_replicates, RngSpec};
use subweibull::divergence::{argmax_selector_joint, kl, renyi, renyi_max_of_n};
use subweibull::genbounds::{goodhart_joint, goodhart_kl, draw_max_weibull};
use subweibull::sgld_lab::{
    gaussian_mixture_f_theta_div, generate_regression, perturbation_bound, sgld_run, RegressionTask, Schedule, SgldConfig,
};
use subweibull::specfun::{a_min_key1, constants, TailIndex};
use subweibull::Result;

use crate::report::{fmt_num, Table};

type Check = (&'static str, fn() -> Result<(bool, String)>);

fn ti(t: f64) -> TailIndex {
    TailIndex::new(t).expect("valid literal")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn frozen_constants() -> Result<(bool, String)> {
    let m05 = constants(ti(0.5), 2.0)?;
    let m1 = constants(ti(1.0), 2.0)?;
    let m2 = constants(ti(2.0), 2.0)?;
    let ok = rel(m05.m_theta, 46217.92) < 1e-6
        && rel(m1.m_theta, 125.76) < 1e-4
        && rel(m2.m_theta, 77.20) < 1e-4
        && rel(m05.e_theta, 0.64898) < 1e-4
        && rel(m05.k_theta, 5.0098) < 1e-4;
    Ok((ok, format!("M(0.5)={} M(1)={} M(2)={}", fmt_num(m05.m_theta), fmt_num(m1.m_theta), fmt_num(m2.m_theta))))
}

fn circle_exact() -> Result<(bool, String)> {
    let e = exact_selector_mean(ti(0.5), 1.0 / 20.0)?;
    Ok(((e + 0.180).abs() <= 1e-3, format!("E[X_W](1/20)={}", fmt_num(e))))
}

fn argmax_information() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 2..=8 {
        let (joint, prod) = argmax_selector_joint(n);
        for alpha in [1.5, 2.0, 4.0] {
            worst = worst.max((renyi(&joint, &prod, alpha)?.value - (n as f64).ln()).abs());
        }
    }
    Ok((worst < 1e-12, format!("max |I_alpha - log n| = {}", fmt_num(worst))))
}

fn selector_information() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 2..=8 {
        for eps in [0.05, 0.3, 0.9] {
            let (joint, prod) = goodhart_joint(n, eps)?;
            worst = worst.max((kl(&joint, &prod)?.value - goodhart_kl(n as u64, eps)?).abs());
        }
    }
    Ok((worst < 1e-9, format!("max |closed - brute| = {}", fmt_num(worst))))
}

fn maximal_sandwich() -> Result<(bool, String)> {
    let th = ti(0.5);
    let n = 100u64;
    let draws = mc_replicates(RngSpec::new(11, 0), 20_000, |r| draw_max_weibull(th, n, r));
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let lo = maximal_lower_bound(n, th, 1.0)?;
    let hi = maximal_bound(n, th, 4.0)?;
    Ok((lo <= mean && mean <= hi, format!("{} <= {} <= {}", fmt_num(lo), fmt_num(mean), fmt_num(hi))))
}

fn trust_regions() -> Result<(bool, String)> {
    let inst = weibull_quantile_grid(ti(0.5), 200)?;
    let k = solve_kl_budget(&inst, 0.1)?;
    let r = solve_renyi_budget(&inst, 2.0, 0.1)?;
    let ok = (k.achieved_divergence - 0.1).abs() <= 1e-8 && (r.achieved_divergence - 0.1).abs() <= 1e-8;
    Ok((ok, format!("KL {} D2 {}", fmt_num(k.achieved_divergence), fmt_num(r.achieved_divergence))))
}

fn best_of_n_cap() -> Result<(bool, String)> {
    let inst = weibull_quantile_grid(ti(0.5), 100)?;
    let mut slack = f64::INFINITY;
    for n in [1u32, 2, 5, 16, 64] {
        let d = renyi(&best_of_n(&inst, n)?, &inst.reference, 2.0)?.value;
        slack = slack.min(renyi_max_of_n(n as u64, 2.0)? - d);
    }
    Ok((slack >= -1e-12, format!("min slack {}", fmt_num(slack))))
}

fn perturbation() -> Result<(bool, String)> {
    let pairs = [(0.0, 1.0, 0.5), (2.0, -1.0, 0.5)];
    let th = ti(0.5);
    let a = a_min_key1(th, 2.0);
    let d = gaussian_mixture_f_theta_div(&pairs, 1.0, th, a)?;
    let cap = perturbation_bound(&pairs, 1.0, th, 2.0, a);
    Ok((d <= cap, format!("{} <= {}", fmt_num(d), fmt_num(cap))))
}

fn sgld_zero_step() -> Result<(bool, String)> {
    let d = generate_regression(&RegressionTask::new(10, 2.0)?, RngSpec::new(1, 0))?;
    let mut cfg = SgldConfig::online(0.5, 1.0, 0.0, 2);
    cfg.schedule = Schedule::Constant(0.0);
    cfg.w1 = [0.25, -0.5];
    let tr = sgld_run(&d, &cfg, RngSpec::new(1, 1))?;
    Ok((tr.iterates.iter().all(|w| *w == [0.25, -0.5]), format!("{} updates", tr.steps())))
}

const CHECKS: [Check; 9] = [
    ("frozen_constants", frozen_constants),
    ("circle_exact_mean", circle_exact),
    ("argmax_information", argmax_information),
    ("selector_information", selector_information),
    ("maximal_sandwich", maximal_sandwich),
    ("trust_region_budgets", trust_regions),
    ("best_of_n_cap", best_of_n_cap),
    ("perturbation_lemma", perturbation),
    ("sgld_zero_step", sgld_zero_step),
];

/// Table of all checks and whether every one passed.
pub fn run() -> (Table, bool) {
    let mut t = Table::new(&["check", "status", "detail"]);
    let mut all = true;
    for (name, f) in CHECKS {
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        all &= ok;
        t.push(vec![name.into(), if ok { "pass" } else { "fail" }.into(), detail.into()]);
    }
    (t, all)
}
