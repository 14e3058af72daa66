//! Run parameters shared by the command line and JSON config files.

use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every key a subcommand may read. Lists are comma-separated; reals accept `a/b` fractions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Subcommand a config file is written for
    #[arg(skip)]
    #[serde(default, skip_serializing)]
    pub command: Option<String>,
    /// Tail index θ in (0, 2]
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_real", skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Rényi order α > 1
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_real", skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Budget or selector-mass list, e.g. 1/20,1/30
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_list", skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    /// Sample-size list
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_list", skip_serializing_if = "Option::is_none")]
    pub n: Option<String>,
    /// Response power list (λ ≥ 1)
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_list", skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    /// Log-depth list L for grids of depth e^L
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_list", skip_serializing_if = "Option::is_none")]
    pub log_depth: Option<String>,
    /// Quantile-grid depth of the reference policy
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Number of seeds
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    /// Base seed
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Monte Carlo replicates
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// SGLD epochs
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// SGLD injected noise standard deviation
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_real", skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// SGLD step-size scale η₀
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_real", skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    /// SGLD minibatch size
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    /// Gradient-noise checkpoints per SGLD run
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
    /// Circle-table constant preset: appendix|published
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Deepest exactly computed partition level
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// align mode: kl|renyi|bofn|goodhart
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// genbounds demo: mean-estimation|goodhart
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<String>,
    /// How `info` enters the bound: f-theta|key1|key
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Information term of the generalization bound
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_real", skip_serializing_if = "Option::is_none")]
    pub info: Option<f64>,
    /// Orlicz scale v_θ of the centered loss
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "de_real", skip_serializing_if = "Option::is_none")]
    pub v_theta: Option<f64>,
    /// Output format (default per subcommand)
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output file (default stdout)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Params { command: None, $($f: $hi.$f.clone().or_else(|| $lo.$f.clone())),* }
    };
}

impl Params {
    /// Values set here win; unset ones fall back to `lower`.
    pub fn over(&self, lower: &Params) -> Params {
        overlay!(
            self, lower, theta, alpha, eps, n, lambda, log_depth, depth, seeds, seed, replicates, epochs, sigma, eta0,
            batch, checkpoints, preset, k_max, mode, demo, variant, info, v_theta, format, output
        )
    }

    /// Names of the keys that are set.
    pub fn set_keys(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// Rejects keys the subcommand does not read.
    pub fn restrict(&self, command: &str, allowed: &[&str]) -> Result<(), CliError> {
        for k in self.set_keys() {
            if k != "format" && k != "output" && !allowed.contains(&k.as_str()) {
                return Err(CliError::usage(format!("key `{k}` is not used by `{command}`")));
            }
        }
        Ok(())
    }
}

/// Reads a config file; unknown keys and a mismatched `command` are errors.
pub fn load(path: &Path, command: &str) -> Result<Params, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    let cfg: Params =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(CliError::usage(format!("config is for `{c}`, not `{command}`")));
        }
    }
    Ok(cfg)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Num(f64),
    Text(String),
}

impl Scalar {
    fn text(self) -> String {
        match self {
            Scalar::Num(x) => format!("{x}"),
            Scalar::Text(s) => s,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ListValue {
    One(Scalar),
    Many(Vec<Scalar>),
}

fn de_list<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    Ok(Option::<ListValue>::deserialize(d)?.map(|v| match v {
        ListValue::One(s) => s.text(),
        ListValue::Many(xs) => xs.into_iter().map(Scalar::text).collect::<Vec<_>>().join(","),
    }))
}

fn de_real<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    match Option::<Scalar>::deserialize(d)? {
        None => Ok(None),
        Some(Scalar::Num(x)) => Ok(Some(x)),
        Some(Scalar::Text(s)) => parse_real(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

/// A decimal real or an exact fraction `a/b`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            if b == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            a / b
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

pub fn parse_reals(field: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let out: Result<Vec<f64>, String> = s.split(',').map(parse_real).collect();
    let out = out.map_err(|e| CliError::usage(format!("invalid {field}: {e}")))?;
    if out.is_empty() {
        return Err(CliError::usage(format!("invalid {field}: empty list")));
    }
    Ok(out)
}

/// Integer list; `1e4`-style values are accepted when exact.
pub fn parse_counts(field: &str, s: &str) -> Result<Vec<u64>, CliError> {
    parse_reals(field, s)?
        .into_iter()
        .map(|x| {
            if x >= 1.0 && x.fract() == 0.0 && x <= 9.0e15 {
                Ok(x as u64)
            } else {
                Err(CliError::usage(format!("invalid {field}: {x} is not a positive integer")))
            }
        })
        .collect()
}
