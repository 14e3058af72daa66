//! One function per subcommand; each validates its parameters and returns a report.

use rayon::prelude::*;
use serde_json::json;
use subweibull::align::{
    best_of_n, goodhart_log_depth_witness, solve_kl_budget, solve_renyi_budget, weibull_quantile_grid, TrustRegionResult,
};
use subweibull::chaining::{maximal_bound, maximal_bound_light, maximal_lower_bound};
use subweibull::circle_bench::{bench_table, BenchConfig, Preset};
use subweibull::distlib::RngSpec;
use subweibull::divergence::{kl, renyi, renyi_max_of_n, Variant};
use subweibull::genbounds::{expected_gen_bound, goodhart_selector, mean_estimation_demo, GenBoundInput, MeanDemoConfig};
use subweibull::sgld_lab::{sgld_experiment, RegressionTask, SgldConfig};
use subweibull::specfun::{constants, TailIndex};

use crate::config::{parse_counts, parse_reals, Params};
use crate::report::{num, Cell, Report, Table};
use crate::CliError;

fn theta_of(p: &Params, default: f64) -> Result<TailIndex, CliError> {
    let t = TailIndex::new(p.theta.unwrap_or(default))?;
    if t.theta() > 2.0 {
        return Err(CliError::usage(format!("invalid theta: must lie in (0, 2], got {}", t.theta())));
    }
    Ok(t)
}

fn alpha_of(p: &Params, default: f64) -> Result<f64, CliError> {
    let a = p.alpha.unwrap_or(default);
    if !(a > 1.0) {
        return Err(CliError::usage(format!("invalid alpha: must be > 1, got {a}")));
    }
    Ok(a)
}

pub fn constants_cmd(p: &Params) -> Result<Report, CliError> {
    p.restrict("constants", &["theta", "alpha"])?;
    let c = constants(theta_of(p, 0.5)?, alpha_of(p, 2.0)?)?;
    let mut t = Table::new(&["name", "value"]);
    let named = [
        ("theta", c.theta),
        ("alpha", c.alpha),
        ("x_theta", c.x_theta),
        ("k_theta", c.k_theta),
        ("d_theta", c.d_theta),
        ("c2_theta", c.c2_theta),
        ("l_theta", c.l_theta),
        ("m_theta", c.m_theta),
        ("e_theta", c.e_theta),
        ("a_min_key1", c.a_min_key1),
        ("a_min_key", c.a_min_key),
        ("b_alpha_theta", c.b_alpha_theta),
        ("c_alpha_theta", c.c_alpha_theta),
    ];
    for (k, v) in named {
        t.push(vec![k.into(), v.into()]);
    }
    Ok(Report::Table(t))
}

fn variant_of(p: &Params) -> Result<Variant, CliError> {
    let alpha = alpha_of(p, 2.0)?;
    match p.variant.as_deref().unwrap_or("f-theta") {
        "f-theta" => Ok(Variant::FTheta),
        "key1" => Ok(Variant::Key1 { alpha }),
        "key" => Ok(Variant::Key { alpha }),
        other => Err(CliError::usage(format!("invalid variant: expected f-theta|key1|key, got {other}"))),
    }
}

/// Maximal-inequality sandwich for standard Weibull(θ) maxima and the single-scale generalization bound.
pub fn bounds_cmd(p: &Params) -> Result<Report, CliError> {
    p.restrict("bounds", &["theta", "alpha", "n", "info", "v_theta", "variant"])?;
    let theta = theta_of(p, 0.5)?;
    let ns = parse_counts("n", p.n.as_deref().unwrap_or("10,100,1000"))?;
    let kind = variant_of(p)?;
    let (info, v) = (p.info.unwrap_or(1.0), p.v_theta.unwrap_or(1.0));
    let norm = 2f64.powf(theta.inv());
    let mut t = Table::new(&["n", "maximal_lower", "maximal_upper", "gen_bound"]);
    for n in ns {
        let lower = if n >= 2 { maximal_lower_bound(n, theta, 1.0)? } else { f64::NAN };
        let upper = if theta.is_heavy() { maximal_bound(n, theta, norm)? } else { maximal_bound_light(n, theta, norm)? };
        let gen = expected_gen_bound(&GenBoundInput::new(n, theta, v, info)?.with_kind(kind))?;
        t.push(vec![n.into(), lower.into(), upper.into(), gen.into()]);
    }
    Ok(Report::Table(t))
}

pub fn circle_cmd(p: &Params) -> Result<Report, CliError> {
    p.restrict("circle-table", &["theta", "eps", "preset", "k_max", "replicates", "seed"])?;
    let theta = theta_of(p, 0.5)?;
    let eps = parse_reals("eps", p.eps.as_deref().unwrap_or("1/20,1/30,1/40,1/50,1/100,1/200,1/400"))?;
    let d = BenchConfig::default();
    let cfg = BenchConfig {
        preset: Preset::parse(p.preset.as_deref().unwrap_or(d.preset.name()))?,
        k_max: p.k_max.unwrap_or(d.k_max),
        mc_replicates: p.replicates.unwrap_or(d.mc_replicates),
        seed: p.seed.unwrap_or(d.seed),
    };
    if cfg.mc_replicates < 2 {
        return Err(CliError::usage("invalid replicates: must be >= 2"));
    }
    let rows = bench_table(theta, &eps, &cfg)?;
    let mut t = Table::new(&["epsilon", "mi", "cm", "cmi", "exact", "mc_mean", "mc_se"]);
    for r in rows {
        t.push(vec![
            r.epsilon.into(),
            r.mi_bound.into(),
            r.cm_bound.into(),
            r.cmi_bound.into(),
            r.exact_mean.into(),
            r.mc_mean.into(),
            r.mc_se.into(),
        ]);
    }
    Ok(Report::Table(t))
}

pub fn genbounds_cmd(p: &Params) -> Result<Report, CliError> {
    match p.demo.as_deref().unwrap_or("mean-estimation") {
        "mean-estimation" => {
            p.restrict("genbounds", &["demo", "theta", "n", "replicates", "seed"])?;
            let theta = theta_of(p, 0.5)?;
            let n = single_count("n", p.n.as_deref().unwrap_or("100"))?;
            let cfg = MeanDemoConfig { mc_size: p.replicates.unwrap_or(MeanDemoConfig::default().mc_size), ..Default::default() };
            let r = mean_estimation_demo(theta, n as usize, &cfg, RngSpec::new(p.seed.unwrap_or(2024), 0))?;
            Ok(Report::Doc(json!({
                "demo": "mean-estimation",
                "theta": num(r.theta),
                "n": r.n,
                "single_scale_info": num(r.single_scale_info),
                "density": {
                    "c_lower": num(r.density.c_lower),
                    "c_point": num(r.density.c_point),
                    "bandwidth": num(r.density.bandwidth),
                    "degenerate": r.density.degenerate,
                },
                "e_w": num(r.e_w),
                "bound_direct": num(r.bound_direct),
                "bound_routed": num(r.bound_routed),
                "alpha": num(r.alpha),
                "w": num(r.w),
                "train_risk": num(r.train_risk),
                "test_risk": num(r.test_risk),
                "population_risk": num(r.population_risk),
                "gap_mc": num(r.gap_mc),
                "gap_exact": num(r.gap_exact),
                "degenerate_warning": r.degenerate_warning,
            })))
        }
        "goodhart" => {
            p.restrict("genbounds", &["demo", "theta", "n", "eps", "replicates", "seed"])?;
            let theta = theta_of(p, 0.5)?;
            let ns = parse_counts("n", p.n.as_deref().unwrap_or("1000,10000,100000,1000000"))?;
            let eps = p.eps.as_deref().map(|s| parse_reals("eps", s)).transpose()?;
            if let Some(e) = &eps {
                if e.len() != 1 {
                    return Err(CliError::usage("invalid eps: the goodhart demo takes one value (default 1/log n)"));
                }
            }
            let reps = p.replicates.unwrap_or(10_000);
            let mut rows = Vec::new();
            for (i, &n) in ns.iter().enumerate() {
                if n < 2 {
                    return Err(CliError::usage("invalid n: must be >= 2"));
                }
                let e = eps.as_ref().map_or(1.0 / (n as f64).ln(), |v| v[0]);
                let r = goodhart_selector(theta, n, e, reps, RngSpec::new(p.seed.unwrap_or(2024), i as u64))?;
                rows.push(json!({
                    "n": r.n,
                    "epsilon": num(r.epsilon),
                    "kl_info": num(r.kl_info),
                    "mean_lower": num(r.mean_lower),
                    "ratio_diag": num(r.ratio_diag),
                    "max_mean": num(r.max_mean),
                    "max_se": num(r.max_se),
                }));
            }
            Ok(Report::Doc(json!({ "demo": "goodhart", "theta": num(theta.theta()), "rows": rows })))
        }
        other => Err(CliError::usage(format!("invalid demo: expected mean-estimation|goodhart, got {other}"))),
    }
}

fn single_count(field: &str, s: &str) -> Result<u64, CliError> {
    match parse_counts(field, s)?.as_slice() {
        [n] => Ok(*n),
        _ => Err(CliError::usage(format!("invalid {field}: expected one value"))),
    }
}

fn tr_json(r: &TrustRegionResult, eps: f64, gain: f64) -> serde_json::Value {
    json!({
        "epsilon": num(eps),
        "multiplier_or_threshold": num(r.multiplier_or_threshold),
        "achieved_divergence": num(r.achieved_divergence),
        "mean_reward": num(r.mean_reward),
        "gain": num(gain),
        "feasible": r.feasible,
        "policy": r.policy.probs.iter().map(|x| num(*x)).collect::<Vec<_>>(),
    })
}

/// Reference policies are equal-mass Weibull(θ) quantile grids of the given depth.
pub fn align_cmd(p: &Params) -> Result<Report, CliError> {
    let mode = p.mode.as_deref().unwrap_or("kl");
    let theta = theta_of(p, 0.5)?;
    match mode {
        "kl" | "renyi" => {
            p.restrict("align", &["mode", "theta", "alpha", "eps", "depth"])?;
            let alpha = alpha_of(p, 2.0)?;
            let inst = weibull_quantile_grid(theta, p.depth.unwrap_or(1000))?;
            let eps = parse_reals("eps", p.eps.as_deref().unwrap_or("0.1"))?;
            let solve =
                |e: f64| if mode == "kl" { solve_kl_budget(&inst, e) } else { solve_renyi_budget(&inst, alpha, e) };
            if eps.len() == 1 && p.format != Some(crate::config::Format::Csv) {
                let r = solve(eps[0])?;
                let gain = r.mean_reward - inst.reference_mean();
                let mut doc = tr_json(&r, eps[0], gain);
                doc["mode"] = json!(mode);
                if mode == "renyi" {
                    doc["alpha"] = num(alpha);
                }
                return Ok(Report::Doc(doc));
            }
            let mut t = Table::new(&["epsilon", "multiplier_or_threshold", "achieved_divergence", "mean_reward", "gain", "feasible"]);
            for e in eps {
                let r = solve(e)?;
                let gain = r.mean_reward - inst.reference_mean();
                t.push(vec![
                    e.into(),
                    r.multiplier_or_threshold.into(),
                    r.achieved_divergence.into(),
                    r.mean_reward.into(),
                    gain.into(),
                    r.feasible.into(),
                ]);
            }
            Ok(Report::Table(t))
        }
        "bofn" => {
            p.restrict("align", &["mode", "theta", "alpha", "n", "depth"])?;
            let alpha = alpha_of(p, 2.0)?;
            let inst = weibull_quantile_grid(theta, p.depth.unwrap_or(1000))?;
            let ns = parse_counts("n", p.n.as_deref().unwrap_or("1,2,4,8,16,32,64"))?;
            let mut t = Table::new(&["n", "renyi", "renyi_bound", "kl", "mean_reward"]);
            for n in ns {
                let n32 = u32::try_from(n).map_err(|_| CliError::usage("invalid n: too large for best-of-n"))?;
                let pol = best_of_n(&inst, n32)?;
                let d = renyi(&pol, &inst.reference, alpha)?.value;
                let k = kl(&pol, &inst.reference)?.value;
                t.push(vec![n.into(), d.into(), renyi_max_of_n(n, alpha)?.into(), k.into(), inst.mean_reward(&pol).into()]);
            }
            Ok(Report::Table(t))
        }
        "goodhart" => {
            p.restrict("align", &["mode", "theta", "eps", "log_depth"])?;
            let eps = parse_reals("eps", p.eps.as_deref().unwrap_or("0.1"))?;
            let depths = parse_reals("log_depth", p.log_depth.as_deref().unwrap_or("300,3000,30000"))?;
            let mut t = Table::new(&["epsilon", "log_depth", "delta", "kl", "gain_lower", "renyi2"]);
            for &e in &eps {
                for &l in &depths {
                    let w = goodhart_log_depth_witness(theta, l, e)?;
                    t.push(vec![e.into(), l.into(), w.delta.into(), w.kl.into(), w.gain_lower.into(), w.renyi2.into()]);
                }
            }
            Ok(Report::Table(t))
        }
        other => Err(CliError::usage(format!("invalid mode: expected kl|renyi|bofn|goodhart, got {other}"))),
    }
}

/// Seeds run in parallel; rows are ordered by (n, λ, seed, iteration).
pub fn sgld_cmd(p: &Params) -> Result<Report, CliError> {
    p.restrict(
        "sgld",
        &["n", "lambda", "epochs", "sigma", "eta0", "alpha", "batch", "seeds", "seed", "checkpoints", "theta"],
    )?;
    let ns = parse_counts("n", p.n.as_deref().unwrap_or("100"))?;
    let lams = parse_reals("lambda", p.lambda.as_deref().unwrap_or("1"))?;
    let seeds = p.seeds.unwrap_or(20);
    let base = p.seed.unwrap_or(0);
    let alpha = alpha_of(p, 2.0)?;
    let mut t = Table::new(&["seed", "n", "lambda", "iter", "gap", "bound"]);
    for &n in &ns {
        for &lam in &lams {
            let task = RegressionTask::new(n as usize, lam)?;
            let theta = p.theta.unwrap_or(1.0 / lam);
            let mut cfg = SgldConfig::online(theta, p.eta0.unwrap_or(1.0), p.sigma.unwrap_or(1.0), p.epochs.unwrap_or(100));
            cfg.batch = p.batch.unwrap_or(1);
            cfg.checkpoints = p.checkpoints.unwrap_or(100);
            if !(theta > 0.0 && theta <= 2.0) {
                return Err(CliError::usage(format!("invalid theta: must lie in (0, 2], got {theta}")));
            }
            let runs: Vec<_> =
                (base..base + seeds).into_par_iter().map(|s| (s, sgld_experiment(&task, &cfg, alpha, s))).collect();
            for (s, run) in runs {
                for r in run? {
                    t.push(vec![s.into(), n.into(), Cell::Num(lam), r.iter.into(), r.gap.into(), r.bound.into()]);
                }
            }
        }
    }
    Ok(Report::Table(t))
}
