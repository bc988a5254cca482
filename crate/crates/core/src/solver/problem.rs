//! Problem definitions for `D_t^a u = Lap u + f` on `[-1, 1]^2`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::l2core::CoeffMode;
use crate::special::gamma;

pub type SourceFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type InitialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Standard,
    Fast,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Standard => "standard",
            Scheme::Fast => "fast",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "std" => Ok(Scheme::Standard),
            "fast" | "soe" => Ok(Scheme::Fast),
            other => Err(Error::Domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Exponential-sum settings. The cut-off is always `tau_2` of the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoeSettings {
    pub eps: f64,
    /// Right end of the window; `None` uses the horizon `T`.
    pub t_soe: Option<f64>,
}

impl Default for SoeSettings {
    fn default() -> Self {
        Self { eps: 1e-12, t_soe: None }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub horizon: f64,
    pub steps: usize,
    pub grading: f64,
    /// Collocation points per direction.
    pub space_n: usize,
    pub source: SourceFn,
    pub initial: InitialFn,
    pub exact: Option<SourceFn>,
    pub scheme: Scheme,
    pub mode: CoeffMode,
    pub soe: SoeSettings,
    pub label: String,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("horizon", &self.horizon)
            .field("steps", &self.steps)
            .field("grading", &self.grading)
            .field("space_n", &self.space_n)
            .field("scheme", &self.scheme)
            .field("mode", &self.mode)
            .field("soe", &self.soe)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// `u = t^a sin(pi x) sin(pi y)` on `[0, 1]`, 20 collocation points.
    pub fn example1(alpha: f64, steps: usize, grading: f64) -> Self {
        use std::f64::consts::PI;
        let ga = gamma(1.0 + alpha);
        let s = move |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        Self {
            alpha,
            horizon: 1.0,
            steps,
            grading,
            space_n: 20,
            source: Arc::new(move |t, x, y| (ga + 2.0 * PI * PI * t.powf(alpha)) * s(x, y)),
            initial: Arc::new(|_, _| 0.0),
            exact: Some(Arc::new(move |t, x, y| t.powf(alpha) * s(x, y))),
            scheme: Scheme::Standard,
            mode: CoeffMode::Tcte,
            soe: SoeSettings::default(),
            label: "ex1".into(),
        }
    }

    /// `u = t^a (x^2 - 1)(y^2 - 1)` on `[0, T]`, 5 collocation points.
    pub fn example2(alpha: f64, horizon: f64, steps: usize, grading: f64) -> Self {
        let ga = gamma(1.0 + alpha);
        let p = |x: f64, y: f64| (x * x - 1.0) * (y * y - 1.0);
        Self {
            alpha,
            horizon,
            steps,
            grading,
            space_n: 5,
            source: Arc::new(move |t, x, y| ga * p(x, y) - 2.0 * t.powf(alpha) * (x * x + y * y - 2.0)),
            initial: Arc::new(|_, _| 0.0),
            exact: Some(Arc::new(move |t, x, y| t.powf(alpha) * p(x, y))),
            scheme: Scheme::Standard,
            mode: CoeffMode::Tcte,
            soe: SoeSettings::default(),
            label: "ex2".into(),
        }
    }

    /// Homogeneous equation from `sin(pi x) sin(pi y)`, without a reference solution.
    pub fn relaxation(alpha: f64, horizon: f64, steps: usize, grading: f64, space_n: usize) -> Self {
        use std::f64::consts::PI;
        Self {
            alpha,
            horizon,
            steps,
            grading,
            space_n,
            source: Arc::new(|_, _, _| 0.0),
            initial: Arc::new(|x, y| (PI * x).sin() * (PI * y).sin()),
            exact: None,
            scheme: Scheme::Standard,
            mode: CoeffMode::Tcte,
            soe: SoeSettings::default(),
            label: "custom".into(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_mode(mut self, mode: CoeffMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_soe(mut self, soe: SoeSettings) -> Self {
        self.soe = soe;
        self
    }

    pub fn with_space(mut self, n: usize) -> Self {
        self.space_n = n;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_grading(mut self, grading: f64) -> Self {
        self.grading = grading;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Domain(format!("T must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        if !(self.grading >= 1.0 && self.grading.is_finite()) {
            return Err(Error::Domain(format!("grading r must be >= 1, got {}", self.grading)));
        }
        if self.space_n < 3 {
            return Err(Error::Domain(format!("need at least 3 collocation points, got {}", self.space_n)));
        }
        if let Some(t) = self.soe.t_soe {
            if t < self.horizon {
                return Err(Error::Domain(format!("SOE window end {t} is before T = {}", self.horizon)));
            }
        }
        Ok(())
    }
}
