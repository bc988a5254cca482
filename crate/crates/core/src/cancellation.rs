//! Machine constants, the δ-cancellation predicate and the threshold
//! ratios that decide between direct and Taylor evaluation.

use crate::error::{Error, Result};
use crate::quadrature::WideFloat;

/// Machine relative error of binary64, `2^-52`.
pub const DELTA0: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    pub delta0: f64,
    pub delta: f64,
}

impl MachineParams {
    /// Requires `delta > 12 delta0`.
    pub fn new(delta: f64) -> Result<Self> {
        Self::with_delta0(DELTA0, delta)
    }

    pub fn with_delta0(delta0: f64, delta: f64) -> Result<Self> {
        if !(delta0 > 0.0) {
            return Err(Error::Domain(format!("delta0 must be positive, got {delta0:e}")));
        }
        if !(delta > 12.0 * delta0) {
            return Err(Error::Domain(format!(
                "cancellation tolerance must exceed 12*delta0 = {:e}, got {delta:e}",
                12.0 * delta0
            )));
        }
        Ok(Self { delta0, delta })
    }
}

/// Ratios below which the Taylor path replaces the explicit formula.
///
/// `s1`, `s2` gate `I_1`, `I_2` of the standard coefficients (compared with
/// `tau_j / (t_k - t_{j-1})`); `f1`, `f2` gate `J_1`, `J_2` of the fast
/// coefficients (compared with `theta^l tau_{k-1}`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub theta_s1: f64,
    pub theta_s2: f64,
    pub theta_f1: f64,
    pub theta_f2: f64,
}

impl Default for Thresholds {
    /// `1e-4` for the first kernels and `1e-2` for the second ones.
    fn default() -> Self {
        Self {
            theta_s1: 1e-4,
            theta_s2: 1e-2,
            theta_f1: 1e-4,
            theta_f2: 1e-2,
        }
    }
}

impl Thresholds {
    /// All thresholds zero: every kernel is evaluated from its explicit formula.
    pub fn direct() -> Self {
        Self {
            theta_s1: 0.0,
            theta_s2: 0.0,
            theta_f1: 0.0,
            theta_f2: 0.0,
        }
    }

    pub fn new(theta_s1: f64, theta_s2: f64, theta_f1: f64, theta_f2: f64) -> Result<Self> {
        let t = Self {
            theta_s1,
            theta_s2,
            theta_f1,
            theta_f2,
        };
        for (name, v) in t.named() {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(t)
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("theta_s1", self.theta_s1),
            ("theta_s2", self.theta_s2),
            ("theta_f1", self.theta_f1),
            ("theta_f2", self.theta_f2),
        ]
    }
}

/// Thresholds guaranteeing no δ-cancellation in the explicit formulas.
pub fn thresholds_from_delta(alpha: f64, machine: MachineParams) -> Result<Thresholds> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let MachineParams { delta0, delta } = machine;
    if !(delta > 12.0 * delta0) {
        return Err(Error::Domain(format!(
            "cancellation tolerance must exceed 12*delta0, got {delta:e}"
        )));
    }
    let one_m = 1.0 - alpha;
    Ok(Thresholds {
        theta_s1: 2.0 * delta0 / (one_m * delta),
        theta_s2: (6.0 * delta0 / (one_m * delta)).sqrt(),
        theta_f1: 4.0 * delta0 / delta,
        theta_f2: (12.0 * delta0 / delta).sqrt(),
    })
}

fn relative_error_wide(x: WideFloat, y: WideFloat, x_approx: f64, y_approx: f64) -> Result<WideFloat> {
    let exact = &x - &y;
    if exact.is_zero() {
        return Err(Error::EqualOperands);
    }
    let approx = WideFloat::from_f64(x_approx) - WideFloat::from_f64(y_approx);
    Ok(((approx - exact.clone()) / exact).abs())
}

/// Relative error of the computed difference `x_approx - y_approx` against
/// the true difference `x - y`, evaluated in wide arithmetic.
pub fn subtraction_relative_error(
    x: impl Into<WideFloat>,
    y: impl Into<WideFloat>,
    x_approx: f64,
    y_approx: f64,
) -> Result<f64> {
    relative_error_wide(x.into(), y.into(), x_approx, y_approx).map(|r| r.to_f64())
}

/// True iff the subtraction `x_approx - y_approx` is a δ-cancellation, i.e.
/// its relative error against `x - y` is at least `delta`.
pub fn is_delta_cancellation(
    x: impl Into<WideFloat>,
    y: impl Into<WideFloat>,
    x_approx: f64,
    y_approx: f64,
    delta: f64,
) -> Result<bool> {
    let rel = relative_error_wide(x.into(), y.into(), x_approx, y_approx)?;
    Ok(rel.partial_cmp_f64(delta).is_some_and(|o| o.is_ge()))
}
