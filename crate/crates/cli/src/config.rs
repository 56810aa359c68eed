//! Experiment parameters, shared by all subcommands.
//!
//! A config file is TOML: top-level keys apply to every command, and a
//! table named after the command (`[stabilize]`, `[kernel]`, ...) overrides
//! them. Keys are the long flag names; flags given on the command line win.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Params {
    /// Dimension of the torus.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,

    /// Side length; a comma-separated list for `sweep` and `sobolev`.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,

    /// Weight law: gaussian, rademacher, uniform or truncated_gaussian:R.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,

    /// Stabilization tolerance on the maximal excess mass.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<u64>,

    /// Test function as "nu:coeff,...", components of nu separated by ';'.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,

    /// Frequency cutoff M.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,

    /// Output file; relative paths are placed under OUTPUT_DIR when it is set.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,

    /// Explicit weights σ, comma-separated in storage order.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,

    /// File of weights σ separated by commas or whitespace.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_file: Option<PathBuf>,

    /// Explicit initial configuration s, comma-separated in storage order.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<String>,

    /// Field kind for sample-field and sobolev: chi, eta or w.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,

    /// pair/moments/sweep: odometer, chi or w.
    /// kernel: lowdim, mollified, limit, singularity or difference.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,

    /// Moment orders for `moments`.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<u32>,

    /// Image shells W for the periodized singularity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shells: Option<usize>,

    /// Kernel evaluation points t, used as θ = (t, 0, ..., 0).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,

    /// Output format: csv or bin (field snapshots).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

fn one_or_many<'de, D, T>(de: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($opt:ident),*; $($list:ident),*) => {
        Params {
            $($opt: $top.$opt.or($base.$opt),)*
            $($list: if $top.$list.is_empty() { $base.$list } else { $top.$list },)*
        }
    };
}

impl Params {
    /// Values from `top` where present, otherwise from `self`.
    pub fn overlay(self, top: Params) -> Params {
        let base = self;
        overlay!(base, top;
            d, dist, seed, trials, tol, max_sweeps, u, eps, kappa, cutoff, out, workers,
            weights, weights_file, mass, kind, mode, shells, format;
            n, m, theta)
    }

    /// The parameters that determine the result, as TOML. Worker count and
    /// output location are left out: they do not change the output.
    pub fn echo(&self) -> String {
        let mut p = self.clone();
        p.workers = None;
        p.out = None;
        toml::to_string(&p).expect("parameters serialize")
    }
}

/// Parameters for `command` from a config file.
pub fn load_config(path: &Path, command: &str) -> Result<Params, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, command)
}

pub fn parse_config(text: &str, command: &str) -> Result<Params, CliError> {
    let table: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config: {e}")))?;
    let mut common = toml::Table::new();
    let mut section = None;
    for (key, value) in table {
        match value {
            toml::Value::Table(t) => {
                if key == command {
                    section = Some(t);
                }
            }
            v => {
                common.insert(key, v);
            }
        }
    }
    let parse = |t: toml::Table| -> Result<Params, CliError> {
        Params::deserialize(toml::Value::Table(t)).map_err(|e| CliError::Usage(format!("config: {e}")))
    };
    let base = parse(common)?;
    Ok(match section {
        Some(t) => base.overlay(parse(t)?),
        None => base,
    })
}
