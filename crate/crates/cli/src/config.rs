//! TOML run configuration.

use std::path::Path;

use fracstep::cancellation::{thresholds_from_delta, MachineParams, Thresholds};
use fracstep::{CoeffMode, GkTolerance, ProblemSpec, Scheme, SoeSettings};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Ex1,
    #[default]
    Ex2,
    Custom,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SoeSection {
    pub eps: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GkSection {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub budget: Option<usize>,
}

/// Raw file contents; every key is optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub example: Option<Example>,
    pub alpha: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[serde(rename = "N")]
    pub steps: Option<OneOrMany<usize>>,
    pub r: Option<OneOrMany<f64>>,
    pub scheme: Option<String>,
    pub mode: Option<String>,
    pub theta_s1: Option<f64>,
    pub theta_s2: Option<f64>,
    pub theta_f1: Option<f64>,
    pub theta_f2: Option<f64>,
    /// Cancellation tolerance; thresholds follow from it when given.
    pub delta: Option<f64>,
    pub soe: Option<SoeSection>,
    pub space: Option<SpaceSection>,
    pub gk: Option<GkSection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Validated settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub example: Example,
    pub alpha: f64,
    pub horizon: f64,
    pub steps: Vec<usize>,
    pub gradings: Vec<f64>,
    pub scheme: Scheme,
    pub mode: CoeffMode,
    pub thresholds: Thresholds,
    pub soe: SoeSettings,
    pub space_n: usize,
    pub gk: GkTolerance,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

impl RunSettings {
    pub fn from_file(cfg: &FileConfig) -> Result<Self, CliError> {
        let example = cfg.example.unwrap_or_default();
        let alpha = cfg.alpha.unwrap_or(0.6);
        check(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0, 1), got {alpha}"))?;
        let horizon = cfg.horizon.unwrap_or(match example {
            Example::Ex1 => 1.0,
            _ => 10.0,
        });
        check(horizon > 0.0 && horizon.is_finite(), || format!("T must be positive, got {horizon}"))?;
        if example == Example::Ex1 {
            check(horizon == 1.0, || format!("ex1 is defined on [0, 1], got T = {horizon}"))?;
        }
        let steps = cfg.steps.as_ref().map(|s| s.values()).unwrap_or_else(|| vec![1000]);
        check(!steps.is_empty() && steps.iter().all(|&n| n >= 1), || "N must be >= 1".into())?;
        let gradings = cfg
            .r
            .as_ref()
            .map(|r| r.values())
            .unwrap_or_else(|| vec![(3.0 - alpha) / alpha]);
        check(!gradings.is_empty() && gradings.iter().all(|&r| r >= 1.0 && r.is_finite()), || {
            "grading r must be >= 1".into()
        })?;
        let scheme: Scheme = cfg
            .scheme
            .as_deref()
            .unwrap_or("standard")
            .parse()
            .map_err(|e: fracstep::Error| CliError::Config(e.to_string()))?;

        let mut gk = GkTolerance::default();
        if let Some(g) = &cfg.gk {
            gk.rtol = g.rtol.unwrap_or(gk.rtol);
            gk.atol = g.atol.unwrap_or(gk.atol);
            gk.budget = g.budget.unwrap_or(gk.budget);
        }
        check(gk.rtol >= 1e-14, || format!("gk.rtol must be >= 1e-14, got {}", gk.rtol))?;
        check(gk.atol >= 0.0, || "gk.atol must be non-negative".into())?;
        let mode = match cfg.mode.as_deref().unwrap_or("tcte").parse() {
            Ok(CoeffMode::GaussKronrod(_)) => CoeffMode::GaussKronrod(gk),
            Ok(m) => m,
            Err(e) => return Err(CliError::Config(format!("{e}"))),
        };

        let explicit = [cfg.theta_s1, cfg.theta_s2, cfg.theta_f1, cfg.theta_f2];
        let thresholds = match cfg.delta {
            Some(delta) => {
                check(explicit.iter().all(Option::is_none), || {
                    "give either delta or explicit thresholds, not both".into()
                })?;
                let machine = MachineParams::new(delta).map_err(|e| CliError::Config(e.to_string()))?;
                thresholds_from_delta(alpha, machine).map_err(|e| CliError::Config(e.to_string()))?
            }
            None => {
                let d = Thresholds::default();
                Thresholds::new(
                    cfg.theta_s1.unwrap_or(d.theta_s1),
                    cfg.theta_s2.unwrap_or(d.theta_s2),
                    cfg.theta_f1.unwrap_or(d.theta_f1),
                    cfg.theta_f2.unwrap_or(d.theta_f2),
                )
                .map_err(|e| CliError::Config(e.to_string()))?
            }
        };

        let soe_cfg = cfg.soe.clone().unwrap_or_default();
        let soe = SoeSettings {
            eps: soe_cfg.eps.unwrap_or(1e-12),
            t_soe: soe_cfg.t,
        };
        check((1e-14..=1e-6).contains(&soe.eps), || format!("soe.eps must lie in [1e-14, 1e-6], got {}", soe.eps))?;
        if let Some(t) = soe.t_soe {
            check(t >= horizon, || format!("soe.T = {t} must be at least T = {horizon}"))?;
        }
        let space_n = cfg.space.as_ref().and_then(|s| s.n).unwrap_or(match example {
            Example::Ex1 => 20,
            Example::Ex2 => 5,
            Example::Custom => 12,
        });
        check(space_n >= 3, || format!("space.n must be >= 3, got {space_n}"))?;
        Ok(Self {
            example,
            alpha,
            horizon,
            steps,
            gradings,
            scheme,
            mode,
            thresholds,
            soe,
            space_n,
            gk,
        })
    }

    pub fn problem(&self, steps: usize, grading: f64) -> ProblemSpec {
        let base = match self.example {
            Example::Ex1 => ProblemSpec::example1(self.alpha, steps, grading),
            Example::Ex2 => ProblemSpec::example2(self.alpha, self.horizon, steps, grading),
            Example::Custom => ProblemSpec::relaxation(self.alpha, self.horizon, steps, grading, self.space_n),
        };
        base.with_space(self.space_n)
            .with_scheme(self.scheme)
            .with_mode(self.mode)
            .with_soe(self.soe)
    }

    pub fn first_steps(&self) -> usize {
        self.steps[0]
    }

    pub fn first_grading(&self) -> f64 {
        self.gradings[0]
    }
}
