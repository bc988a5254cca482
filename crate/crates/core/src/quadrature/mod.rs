//! Adaptive Gauss–Kronrod (G7–K15) integration and the extended-precision oracle.

pub mod oracle;

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::special::CompensatedSum;

pub use oracle::{oracle_eval, Oracle, OracleExpr, WideFloat};

// Kronrod abscissae on [-1, 1]; xgk[1], xgk[3], xgk[5], xgk[7] are the Gauss points.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526,
    0.949_107_912_342_758_524_526_189_684_048,
    0.864_864_423_359_769_072_789_712_788_641,
    0.741_531_185_599_394_439_863_864_773_281,
    0.586_087_235_467_691_130_294_144_845_693,
    0.405_845_151_377_397_166_906_606_412_077,
    0.207_784_955_007_898_467_600_689_403_773,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_059,
    0.063_092_092_629_978_553_290_700_663_189,
    0.104_790_010_322_250_183_839_876_322_542,
    0.140_653_259_715_525_918_745_189_590_510,
    0.169_004_726_639_267_902_826_583_426_599,
    0.190_350_578_064_785_409_913_256_402_421,
    0.204_432_940_075_298_892_414_161_999_235,
    0.209_482_141_084_727_828_012_999_174_892,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679,
    0.279_705_391_489_276_667_901_467_771_424,
    0.381_830_050_505_118_944_950_369_775_489,
    0.417_959_183_673_469_387_755_102_040_816,
];

/// Default relative tolerance of the reference coefficient path.
pub const DEFAULT_RTOL: f64 = 1e-14;
/// Default absolute tolerance.
pub const DEFAULT_ATOL: f64 = 1e-300;
/// Default number of bisections.
pub const DEFAULT_BUDGET: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
    pub subdivisions: usize,
    pub converged: bool,
    /// Refinement stopped because the largest panel error was already at the
    /// rounding level of `int |f|`; the value is as good as double allows.
    pub roundoff_limited: bool,
}

impl QuadResult {
    /// Turns a non-converged result into [`Error::QuadratureBudget`].
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::QuadratureBudget {
                value: self.value,
                err_est: self.err_est,
                subdivisions: self.subdivisions,
            })
        }
    }
}

/// Tolerances and subdivision budget of the reference coefficient path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub budget: usize,
}

impl Default for GkTolerance {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl GkTolerance {
    pub fn new(rtol: f64, atol: f64, budget: usize) -> Self {
        Self { rtol, atol, budget }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    at_floor: bool,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One K15 panel with the QUADPACK error rescaling; returns (value, error,
/// whether the error is the rounding floor).
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, bool) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = (fc * WGK[7]).abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let mut at_floor = false;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let floor = 5.0 * f64::EPSILON * res_abs;
        if floor >= err {
            err = floor;
            at_floor = true;
        }
    }
    (value, err, at_floor)
}

/// Integrates `f` over `[a, b]` by repeated bisection of the panel with the
/// largest G7–K15 error estimate.
///
/// On budget exhaustion the best value is returned with `converged = false`.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64, atol: f64, budget: usize) -> Result<QuadResult> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("integration interval must satisfy a < b, got [{a}, {b}]")));
    }
    if !(rtol >= 1e-14 * (1.0 - 1e-9)) {
        return Err(Error::Domain(format!("rtol must be >= 1e-14, got {rtol:e}")));
    }
    let (v0, e0, f0) = kronrod15(&f, a, b);
    if !v0.is_finite() {
        return Err(Error::Domain(format!("integrand is not finite on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v0,
        err: e0,
        at_floor: f0,
    });
    let mut total = v0;
    let mut total_err = e0;
    let mut subdivisions = 0;
    let mut roundoff_limited = false;
    let target = |total: f64| atol.max(rtol * total.abs());

    while total_err > target(total) {
        if subdivisions >= budget {
            break;
        }
        let p = heap.pop().expect("heap is never empty");
        if p.at_floor {
            // every remaining panel error is at most this rounding floor
            heap.push(p);
            roundoff_limited = true;
            break;
        }
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // cannot split further
            heap.push(p);
            break;
        }
        let (vl, el, fl) = kronrod15(&f, p.a, mid);
        let (vr, er, fr) = kronrod15(&f, mid, p.b);
        if !(vl.is_finite() && vr.is_finite()) {
            return Err(Error::Domain(format!("integrand is not finite on [{}, {}]", p.a, p.b)));
        }
        heap.push(Panel {
            a: p.a,
            b: mid,
            value: vl,
            err: el,
            at_floor: fl,
        });
        heap.push(Panel {
            a: mid,
            b: p.b,
            value: vr,
            err: er,
            at_floor: fr,
        });
        subdivisions += 1;
        // Recompute from the panels to avoid drift in the running totals.
        let mut sv = CompensatedSum::new();
        let mut se = 0.0;
        for q in heap.iter() {
            sv.add(q.value);
            se += q.err;
        }
        total = sv.value();
        total_err = se;
    }
    let converged = total_err <= target(total) || roundoff_limited;
    Ok(QuadResult {
        value: total,
        err_est: total_err,
        subdivisions,
        converged,
        roundoff_limited,
    })
}

/// [`adaptive_gk`] with a [`GkTolerance`], failing on non-convergence.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &GkTolerance) -> Result<f64> {
    adaptive_gk(f, a, b, tol.rtol, tol.atol, tol.budget)?.into_result()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_integrand() {
        let r = adaptive_gk(|x| x, 0.0, 1.0, 1e-14, 1e-300, 100).unwrap();
        assert!(r.converged);
        assert!((r.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn endpoint_singularity() {
        // Plain bisection only reaches moderate accuracy next to a singularity.
        let r = adaptive_gk(|s: f64| (1.0 - s).powf(-0.5), 0.0, 1.0, 1e-6, 1e-300, 2000).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 2.0).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn smooth_after_substitution() {
        // int_0^1 e^x (1-x)^(-1/2) dx with x = 1 - y^2.
        let r = adaptive_gk(|y: f64| 2.0 * (1.0 - y * y).exp(), 0.0, 1.0, 1e-14, 1e-300, 100).unwrap();
        let exact = 4.060_156_938_557_409_951;
        assert!(r.converged);
        assert!(((r.value - exact) / exact).abs() < 1e-14, "{r:?}");
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(adaptive_gk(|x| x, 1.0, 0.0, 1e-10, 0.0, 10).is_err());
        assert!(adaptive_gk(|x| x, 0.0, 1.0, 1e-16, 0.0, 10).is_err());
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let r = adaptive_gk(|s: f64| (1.0 - s).powf(-0.9), 0.0, 1.0, 1e-14, 1e-300, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.subdivisions, 3);
        assert!(matches!(r.into_result(), Err(Error::QuadratureBudget { .. })));
    }

    #[test]
    fn cancelling_integrand_stops_at_rounding_level() {
        // int_0^1 (2x - 1)(1 + x/100) dx = 1/600 while int |f| is about 1/2.
        let r = adaptive_gk(|x: f64| (2.0 * x - 1.0) * (1.0 + x / 100.0), 0.0, 1.0, 1e-14, 1e-300, 2000).unwrap();
        assert!(r.converged && r.roundoff_limited, "{r:?}");
        assert!(r.subdivisions < 50);
        assert!((r.value - 1.0 / 600.0).abs() < 1e-15);
    }

    #[test]
    fn error_estimates_are_conservative_on_smooth_battery() {
        type Case = (Box<dyn Fn(f64) -> f64>, f64, f64, f64);
        let cases: Vec<Case> = vec![
            (Box::new(|x: f64| x.exp()), 0.0, 1.0, std::f64::consts::E - 1.0),
            (Box::new(|x: f64| x.sin()), 0.0, std::f64::consts::PI, 2.0),
            (Box::new(|x: f64| 1.0 / (1.0 + x * x)), 0.0, 1.0, std::f64::consts::FRAC_PI_4),
            (Box::new(|x: f64| x.sqrt()), 0.0, 1.0, 2.0 / 3.0),
            (Box::new(|x: f64| (-x * x).exp()), 0.0, 3.0, 0.886_207_348_259_521_4),
            (Box::new(|x: f64| x.powi(5)), -1.0, 2.0, 10.5),
            (Box::new(|x: f64| 1.0 / x), 1.0, 10.0, 10f64.ln()),
            (Box::new(|x: f64| (10.0 * x).cos()), 0.0, 1.0, (10f64).sin() / 10.0),
        ];
        let mut ok = 0;
        let mut total = 0;
        for (f, a, b, exact) in &cases {
            for rtol in [1e-6, 1e-9, 1e-12] {
                let r = adaptive_gk(f, *a, *b, rtol, 0.0, 500).unwrap();
                total += 1;
                if (r.value - exact).abs() <= r.err_est.max(4.0 * f64::EPSILON * exact.abs()) {
                    ok += 1;
                }
            }
        }
        assert!(ok as f64 >= 0.95 * total as f64, "{ok}/{total}");
    }
}
