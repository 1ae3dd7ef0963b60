//! Run configuration: defaults, then a JSON file, then command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use cmc_core::{DFunctions, GraphModel};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Obj,
    Ply,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Obj => "obj",
            Format::Ply => "ply",
        }
    }
}

/// Offsets d⁰, d̄⁰, d¹ given inline or as a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DModel {
    Inline(DFunctions),
    Path(String),
}

impl DModel {
    pub fn load(&self) -> Result<DFunctions> {
        match self {
            DModel::Inline(d) => Ok(d.clone()),
            DModel::Path(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading d-model {p}"))?;
                Ok(DFunctions::from_json(&text).with_context(|| format!("parsing d-model {p}"))?)
            }
        }
    }
}

/// Every parameter a command may take. Unset fields fall back to the
/// command's defaults; the resolved copy embedded in outputs has exactly
/// the fields the command used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_lo: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_hi: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_theta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_model: Option<DModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f),)* }
    };
}

impl RunConfig {
    /// Fields set in `top` win over those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        overlay!(
            self, top, tau, tau_lo, tau_hi, steps, periods, k, n, n_lo, n_hi, j_max, grid_s, grid_theta, tol, d_model,
            graph, format
        )
    }

    /// Reads a configuration file. Besides a bare configuration this accepts
    /// any output of a previous run, whose embedded configuration is used.
    pub fn from_file(path: &Path, command: &str) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value = match embedded_line(&text) {
            Some((cmd, json)) => {
                check_command(cmd, command)?;
                serde_json::from_str(json)?
            }
            None => {
                let mut v: serde_json::Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                if let Some(cmd) = v.get("command").and_then(|c| c.as_str()) {
                    check_command(cmd, command)?;
                    v = v.get("config").cloned().unwrap_or_default();
                }
                v
            }
        };
        serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn tolerance(&self, default: f64) -> Result<f64> {
        let tol = self.tol.unwrap_or(default);
        if !(tol > 0.0 && tol.is_finite()) {
            bail!("tol = {tol}: tolerances must be positive");
        }
        Ok(tol)
    }

    pub fn k_value(&self) -> Result<usize> {
        let k = self.k.unwrap_or(3);
        if k < 3 {
            bail!("k = {k}: at least 3 is required");
        }
        Ok(k)
    }

    pub fn d_functions(&self) -> Result<DFunctions> {
        self.d_model.as_ref().map_or_else(|| Ok(DFunctions::default()), DModel::load)
    }
}

fn check_command(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        bail!("config was produced by `{found}`, not `{expected}`");
    }
    Ok(())
}

/// The `cmc <command> <json>` line that CSV and mesh outputs start with.
fn embedded_line(text: &str) -> Option<(&str, &str)> {
    text.lines().take(8).find_map(|line| {
        let rest = line.strip_prefix("# ").or_else(|| line.strip_prefix("comment "))?;
        rest.strip_prefix("cmc ")?.split_once(' ')
    })
}

/// Header line that embeds the resolved configuration.
pub fn header(command: &str, config: &RunConfig) -> Result<String> {
    Ok(format!("cmc {command} {}", serde_json::to_string(config)?))
}

/// A τ sweep: either a single value or `steps` equally spaced values.
pub fn tau_values(cfg: &RunConfig, default: (f64, f64, usize)) -> Result<(Vec<f64>, RunConfig)> {
    let mut used = RunConfig::default();
    if cfg.tau_lo.is_none() && cfg.tau_hi.is_none() && cfg.steps.is_none() {
        if let Some(t) = cfg.tau {
            used.tau = Some(t);
            return Ok((vec![t], used));
        }
    }
    let lo = cfg.tau_lo.unwrap_or(default.0);
    let hi = cfg.tau_hi.unwrap_or(default.1);
    let steps = cfg.steps.unwrap_or(default.2);
    if steps < 2 || !(lo < hi) {
        bail!("τ range [{lo}, {hi}] with {steps} steps is empty; use --tau for a single value");
    }
    (used.tau_lo, used.tau_hi, used.steps) = (Some(lo), Some(hi), Some(steps));
    let values = (0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
        .collect();
    Ok((values, used))
}

/// An n sweep: `--n` alone, or the inclusive range `--n-lo..=--n-hi`.
pub fn n_values(cfg: &RunConfig, default: (usize, usize)) -> Result<(Vec<usize>, RunConfig)> {
    let mut used = RunConfig::default();
    if cfg.n_lo.is_none() && cfg.n_hi.is_none() {
        if let Some(n) = cfg.n {
            if n == 0 {
                bail!("n must be at least 1");
            }
            used.n = Some(n);
            return Ok((vec![n], used));
        }
    }
    let lo = cfg.n_lo.unwrap_or(default.0);
    let hi = cfg.n_hi.unwrap_or(default.1);
    if lo == 0 || lo > hi {
        bail!("n range {lo}..={hi} is empty or starts at 0");
    }
    (used.n_lo, used.n_hi) = (Some(lo), Some(hi));
    Ok(((lo..=hi).collect(), used))
}

pub fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        bail!("{name} must be positive");
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_prefers_top() {
        let base = RunConfig {
            tau: Some(0.5),
            k: Some(4),
            ..Default::default()
        };
        let top = RunConfig {
            tau: Some(0.3),
            ..Default::default()
        };
        let c = base.overlay(top);
        assert_eq!((c.tau, c.k), (Some(0.3), Some(4)));
    }

    #[test]
    fn tau_range_hits_endpoints() {
        let cfg = RunConfig {
            tau_lo: Some(0.1),
            tau_hi: Some(0.9),
            steps: Some(9),
            ..Default::default()
        };
        let (v, _) = tau_values(&cfg, (0.0, 1.0, 2)).unwrap();
        assert_eq!(v.len(), 9);
        assert_eq!((v[0], v[8]), (0.1, 0.9));
    }

    #[test]
    fn empty_ranges_rejected() {
        let cfg = RunConfig {
            tau_lo: Some(0.5),
            tau_hi: Some(0.2),
            ..Default::default()
        };
        assert!(tau_values(&cfg, (0.1, 0.9, 9)).is_err());
        let cfg = RunConfig {
            n_lo: Some(5),
            n_hi: Some(4),
            ..Default::default()
        };
        assert!(n_values(&cfg, (1, 2)).is_err());
    }

    #[test]
    fn embedded_lines_parse() {
        let csv = "# cmc periods {\"steps\":3}\ntau\n";
        assert_eq!(embedded_line(csv), Some(("periods", "{\"steps\":3}")));
        let ply = "ply\nformat ascii 1.0\ncomment cmc glue {}\n";
        assert_eq!(embedded_line(ply), Some(("glue", "{}")));
    }
}
