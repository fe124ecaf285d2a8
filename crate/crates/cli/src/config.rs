//! Experiment configuration.
//!
//! A config is one JSON document. Unknown keys are rejected by the parser and
//! every module precondition is checked by [`ExperimentConfig::validate`]
//! before any work starts.

use pinlab_core::chaos::PhiChoice;
use pinlab_core::disorder::DisorderLaw;
use pinlab_core::partition::Boundary;
use pinlab_core::renewal::{
    build_kernel_srw, build_kernel_stable, RenewalKernel, SlowlyVarying, WalkFlavor,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Kernel,
    Pure,
    Quench,
    Chaos,
    Bounds,
    Suite,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Pure => "pure",
            Command::Quench => "quench",
            Command::Chaos => "chaos",
            Command::Bounds => "bounds",
            Command::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SvSpec {
    Constant { c: f64 },
    LogPower { kappa: f64, c: f64 },
}

impl SvSpec {
    pub fn to_core(self) -> SlowlyVarying {
        match self {
            SvSpec::Constant { c } => SlowlyVarying::Constant { c },
            SvSpec::LogPower { kappa, c } => SlowlyVarying::LogPower { kappa, c },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    SrwPinning { p: f64 },
    SrwWetting { p: f64 },
    StableLike { alpha: f64, sv: SvSpec },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::SrwPinning { p: 0.5 }
    }
}

impl ModelSpec {
    pub fn build(&self, n_max: usize) -> pinlab_core::Result<RenewalKernel> {
        match *self {
            ModelSpec::SrwPinning { p } => build_kernel_srw(p, n_max, WalkFlavor::Pinning),
            ModelSpec::SrwWetting { p } => build_kernel_srw(p, n_max, WalkFlavor::Wetting),
            ModelSpec::StableLike { alpha, sv } => build_kernel_stable(alpha, sv.to_core(), n_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSpec {
    #[default]
    Gaussian,
    Rademacher,
    UniformCentered,
}

impl LawSpec {
    pub fn to_core(self) -> DisorderLaw {
        match self {
            LawSpec::Gaussian => DisorderLaw::Gaussian,
            LawSpec::Rademacher => DisorderLaw::Rademacher,
            LawSpec::UniformCentered => DisorderLaw::UniformCentered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    Constrained,
    Free,
}

impl BoundarySpec {
    pub fn to_core(self) -> Boundary {
        match self {
            BoundarySpec::Constrained => Boundary::Constrained,
            BoundarySpec::Free => Boundary::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSpec {
    #[default]
    Effective,
    Asymptotic,
}

impl PhiSpec {
    pub fn to_core(self) -> PhiChoice {
        match self {
            PhiSpec::Effective => PhiChoice::Effective,
            PhiSpec::Asymptotic => PhiChoice::Asymptotic,
        }
    }
}

/// Parameter grids; a command reads only the axes it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub beta: Vec<f64>,
    pub h: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub ell: Vec<usize>,
    pub t: Vec<usize>,
    pub q: Vec<usize>,
    /// Penalty strengths `M`.
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dir: Option<PathBuf>,
}

fn default_n_max() -> usize {
    4096
}

fn default_replicas() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub law: LawSpec,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Polymer draws per replica for the finite-volume upper bound; 0 skips it.
    #[serde(default)]
    pub draws: usize,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub phi: PhiSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A rejected config, located by line/column (parse errors) or field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(location: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { location: location.into(), message: message.into() })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError { location: path.display().to_string(), message: e.to_string() })?;
    parse_config(&text)
}

fn nonempty<T>(field: &str, v: &[T]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return err(format!("grids.{field}"), "grid must be nonempty for this command");
    }
    Ok(())
}

fn each<T: Copy>(field: &str, v: &[T], ok: impl Fn(T) -> bool, what: &str) -> Result<(), ConfigError> {
    match v.iter().position(|&x| !ok(x)) {
        Some(i) => err(format!("grids.{field}[{i}]"), what.to_string()),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return err("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if self.n_max < 2 {
            return err("n_max", "must be at least 2");
        }
        match self.model {
            ModelSpec::SrwPinning { p } | ModelSpec::SrwWetting { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return err("model.p", format!("must lie in (0, 1), got {p}"));
                }
            }
            ModelSpec::StableLike { alpha, sv } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return err("model.alpha", format!("must lie in (0, 1], got {alpha}"));
                }
                let c = match sv {
                    SvSpec::Constant { c } => c,
                    SvSpec::LogPower { kappa, c } => {
                        if !kappa.is_finite() {
                            return err("model.sv.kappa", "must be finite");
                        }
                        c
                    }
                };
                if !(c > 0.0 && c.is_finite()) {
                    return err("model.sv.c", format!("must be positive, got {c}"));
                }
            }
        }
        if self.replicas < 1 {
            return err("replicas", "must be at least 1");
        }
        if self.threads == Some(0) {
            return err("threads", "must be at least 1");
        }
        let g = &self.grids;
        match self.command {
            Command::Kernel | Command::Suite => {}
            Command::Pure => {
                nonempty("h", &g.h)?;
                each("h", &g.h, |h: f64| !h.is_nan(), "must be a number")?;
            }
            Command::Quench => {
                nonempty("beta", &g.beta)?;
                nonempty("h", &g.h)?;
                nonempty("n", &g.n)?;
                each("beta", &g.beta, |b: f64| b >= 0.0 && b.is_finite(), "must be finite and ≥ 0")?;
                each("h", &g.h, |h: f64| h.is_finite(), "must be finite")?;
                let n_max = self.n_max;
                each("n", &g.n, |n| n >= 1 && n <= n_max, "must lie in 1..=n_max")?;
            }
            Command::Chaos => {
                nonempty("n", &g.n)?;
                nonempty("t", &g.t)?;
                nonempty("q", &g.q)?;
                each("n", &g.n, |n| n >= 1, "must be at least 1")?;
                each("t", &g.t, |t| t >= 1, "must be at least 1")?;
                each("q", &g.q, |q| q >= 1, "must be at least 1")?;
                let reach = g.n.iter().max().unwrap() + g.t.iter().max().unwrap() * g.q.iter().max().unwrap();
                if reach > self.n_max {
                    return err("n_max", format!("W samples need a horizon of n + t·q = {reach}"));
                }
                let (t_max, n_max) = (*g.t.iter().max().unwrap(), self.n_max);
                each("ell", &g.ell, |l| l > t_max && l <= n_max, "must satisfy max(t) < ℓ ≤ n_max")?;
                each("m", &g.m, |m: f64| m >= 0.0 && m.is_finite(), "must be finite and ≥ 0")?;
                if !g.m.is_empty() && g.ell.is_empty() {
                    return err("grids.ell", "penalty strengths need block lengths");
                }
            }
            Command::Bounds => {
                nonempty("beta", &g.beta)?;
                nonempty("eps", &g.eps)?;
                each("beta", &g.beta, |b: f64| b > 0.0 && b.is_finite(), "must be positive")?;
                each("eps", &g.eps, |e: f64| e > 0.0 && e < 1.0, "must lie in (0, 1)")?;
                if self.draws > 0 && self.replicas < 2 {
                    return err("replicas", "the finite-volume bound needs at least 2 replicas");
                }
                // the contact event N^{(2−ε)/4} assumes α = 1/2
                if let ModelSpec::StableLike { alpha, .. } = self.model {
                    if self.draws > 0 && alpha != 0.5 {
                        return err("draws", "the finite-volume bound is defined for α = 1/2 only");
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_pure_config() {
        let c = parse_config(r#"{"schema_version": 1, "command": "pure", "grids": {"h": [-0.1, 0.0, 0.1]}}"#).unwrap();
        assert_eq!(c.model, ModelSpec::SrwPinning { p: 0.5 });
        assert_eq!(c.n_max, 4096);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_position() {
        let e = parse_config("{\n  \"schema_version\": 1,\n  \"command\": \"pure\",\n  \"hgrid\": [1]\n}").unwrap_err();
        assert!(e.location.starts_with("line 4"), "{e}");
        assert!(e.message.contains("hgrid"));
        let e = parse_config(r#"{"schema_version": 1, "command": "pure", "grids": {"hh": [1]}}"#).unwrap_err();
        assert!(e.message.contains("hh"));
        let e = parse_config(r#"{"schema_version": 1, "command": "pure", "model": {"flavor": "srw_pinning", "p": 0.5, "x": 1}}"#)
            .unwrap_err();
        assert!(e.message.contains('x'));
    }

    #[test]
    fn preconditions_name_the_field() {
        let bad = |s: &str| parse_config(s).unwrap().validate().unwrap_err().location;
        assert_eq!(bad(r#"{"schema_version": 1, "command": "pure"}"#), "grids.h");
        assert_eq!(
            bad(r#"{"schema_version": 1, "command": "kernel", "model": {"flavor": "srw_wetting", "p": 1.5}}"#),
            "model.p"
        );
        assert_eq!(
            bad(r#"{"schema_version": 1, "command": "bounds", "grids": {"beta": [0.5], "eps": [0.25, 1.0]}}"#),
            "grids.eps[1]"
        );
        assert_eq!(
            bad(r#"{"schema_version": 1, "command": "quench", "n_max": 64, "grids": {"beta": [0.5], "h": [0], "n": [65]}}"#),
            "grids.n[0]"
        );
        assert_eq!(
            bad(r#"{"schema_version": 1, "command": "chaos", "n_max": 64, "grids": {"n": [60], "t": [4], "q": [2]}}"#),
            "n_max"
        );
        assert_eq!(bad(r#"{"schema_version": 2, "command": "kernel"}"#), "schema_version");
        assert_eq!(bad(r#"{"schema_version": 1, "command": "kernel", "replicas": 0}"#), "replicas");
    }

    #[test]
    fn stable_model_round_trips() {
        let c = parse_config(
            r#"{"schema_version": 1, "command": "kernel", "model": {"flavor": "stable_like", "alpha": 0.5, "sv": {"kind": "log_power", "kappa": 1.0, "c": 2.0}}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        let again = parse_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        assert!(c.model.build(64).is_ok());
    }
}
