//! Coefficients of the standard L2 formula on a nonuniform mesh.
//!
//! For `1 <= j <= k-1` the history coefficients are assembled from the two
//! kernels
//!
//! ```text
//! I1 = d^(1-a) [1 - (1-theta)^(1-a)]
//! I2 = d^(2-a) [(2-a) theta + (1-theta)^(2-a) - 1]
//! ```
//!
//! with `d = t_k - t_j + tau_j` and `theta = tau_j / d`. Both brackets lose
//! all their digits when `theta` is tiny, which is exactly what happens near
//! `t = 0` on strongly graded meshes. [`CoeffMode::Tcte`] switches to a
//! truncated binomial series (all terms of one sign) below the thresholds.

use crate::cancellation::{Thresholds, DELTA0};
use crate::error::{Error, Result};
use crate::mesh::TimeMesh;
use crate::quadrature::{integrate, GkTolerance};

/// Largest admitted Taylor truncation number.
pub const MAX_TRUNCATION: usize = 200;

/// How kernel values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CoeffMode {
    /// Explicit formulas, whatever the ratio.
    Direct,
    /// Explicit formulas above the thresholds, truncated Taylor series below.
    #[default]
    Tcte,
    /// Adaptive Gauss–Kronrod quadrature of the integral definitions.
    GaussKronrod(GkTolerance),
}

impl CoeffMode {
    pub fn gauss_kronrod() -> Self {
        CoeffMode::GaussKronrod(GkTolerance::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoeffMode::Direct => "direct",
            CoeffMode::Tcte => "tcte",
            CoeffMode::GaussKronrod(_) => "gauss-kronrod",
        }
    }
}

impl std::str::FromStr for CoeffMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(CoeffMode::Direct),
            "tcte" | "taylor" => Ok(CoeffMode::Tcte),
            "gauss-kronrod" | "gk" | "gauss" => Ok(CoeffMode::gauss_kronrod()),
            other => Err(Error::Domain(format!("unknown coefficient mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPairI {
    pub i1: f64,
    pub i2: f64,
}

/// History coefficients `(a_j^(k), c~_j^(k))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilPair {
    pub a: f64,
    pub c_tilde: f64,
}

/// Local coefficients `(a_k^(k), c_k^(k))` of the last panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LastPair {
    pub a_last: f64,
    pub c_last: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_theta_d(theta: f64, d: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(d > 0.0) {
        return Err(Error::Domain(format!("d must be positive, got {d}")));
    }
    Ok(())
}

/// `ceil(ln delta0 / ln ratio)`, at least 1, for `0 < ratio < 1`.
pub fn truncation_number(ratio: f64, delta0: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!("Taylor path needs a ratio in (0, 1), got {ratio}")));
    }
    let m = (delta0.ln() / ratio.ln()).ceil().max(1.0);
    if m > MAX_TRUNCATION as f64 {
        return Err(Error::TruncationCap {
            needed: m as usize,
            cap: MAX_TRUNCATION,
            ratio,
        });
    }
    Ok(m as usize)
}

/// `-sum_{m=1}^{M} binom(1-a, m) (-theta)^m`; every summand is positive.
fn taylor_bracket1(theta: f64, beta: f64, terms: usize) -> f64 {
    let mut buf = [0.0f64; MAX_TRUNCATION + 1];
    let mut t = beta * theta; // -binom(beta,1)(-theta)
    buf[0] = t;
    for m in 2..=terms {
        t *= (m as f64 - 1.0 - beta) / m as f64 * theta;
        buf[m - 1] = t;
    }
    buf[..terms].iter().rev().sum()
}

/// `sum_{m=2}^{M+1} binom(2-a, m) (-theta)^m`; every summand is positive.
fn taylor_bracket2(theta: f64, beta: f64, terms: usize) -> f64 {
    let mut buf = [0.0f64; MAX_TRUNCATION + 1];
    let mut t = beta * (beta - 1.0) / 2.0 * theta * theta;
    buf[0] = t;
    for (i, slot) in buf.iter_mut().enumerate().take(terms).skip(1) {
        let m = (i + 2) as f64;
        t *= (m - 1.0 - beta) / m * theta;
        *slot = t;
    }
    buf[..terms].iter().rev().sum()
}

/// Explicit formulas for `I1`, `I2` (cancellation-prone for small `theta`).
pub fn eval_i_direct(theta: f64, d: f64, alpha: f64) -> Result<KernelPairI> {
    check_alpha(alpha)?;
    check_theta_d(theta, d)?;
    kernels(theta, d, alpha, &Thresholds::direct(), DELTA0)
}

/// `I1`, `I2` with the threshold switch: Taylor series at or below the
/// thresholds, explicit formulas above.
pub fn eval_i(theta: f64, d: f64, alpha: f64, thresholds: &Thresholds) -> Result<KernelPairI> {
    check_alpha(alpha)?;
    check_theta_d(theta, d)?;
    kernels(theta, d, alpha, thresholds, DELTA0)
}

/// Truncated Taylor series for `I1`, `I2` with `M1 = M2 = ceil(ln delta0 / ln theta)`.
pub fn eval_i_taylor(theta: f64, d: f64, alpha: f64, delta0: f64) -> Result<KernelPairI> {
    check_alpha(alpha)?;
    check_theta_d(theta, d)?;
    let m = truncation_number(theta, delta0)?;
    let d1 = d.powf(1.0 - alpha);
    Ok(KernelPairI {
        i1: d1 * taylor_bracket1(theta, 1.0 - alpha, m),
        i2: d1 * d * taylor_bracket2(theta, 2.0 - alpha, m),
    })
}

/// Kernel pair with the threshold switch of the TCTE algorithm.
#[inline]
fn kernels(theta: f64, d: f64, alpha: f64, thr: &Thresholds, delta0: f64) -> Result<KernelPairI> {
    let beta1 = 1.0 - alpha;
    let beta2 = 2.0 - alpha;
    let d1 = d.powf(beta1);
    let d2 = d1 * d;
    let taylor1 = theta <= thr.theta_s1;
    let taylor2 = theta <= thr.theta_s2;
    let y1 = if taylor1 && taylor2 { 0.0 } else { (1.0 - theta).powf(beta1) };
    let m = if taylor1 || taylor2 { truncation_number(theta, delta0)? } else { 0 };
    let i1 = if taylor1 {
        d1 * taylor_bracket1(theta, beta1, m)
    } else {
        d1 * (1.0 - y1)
    };
    let i2 = if taylor2 {
        d2 * taylor_bracket2(theta, beta2, m)
    } else {
        d2 * ((beta2 * theta + y1 * (1.0 - theta)) - 1.0)
    };
    Ok(KernelPairI { i1, i2 })
}

/// Assembles `(a, c~)` from the kernels.
#[inline]
pub fn assemble_pair(k: KernelPairI, tau_j: f64, tau_next: f64, alpha: f64) -> StencilPair {
    let beta1 = 1.0 - alpha;
    let beta2 = 2.0 - alpha;
    StencilPair {
        a: -(beta2 * tau_next * k.i1 + 2.0 * k.i2) / (beta2 * beta1 * tau_j * (tau_j + tau_next)),
        c_tilde: k.i1 / (beta1 * tau_next),
    }
}

/// `(theta, d)` as computed by the coefficient algorithm: `d = t_k - t_j + tau_j`.
#[inline]
pub fn theta_and_d(mesh: &TimeMesh, j: usize, k: usize) -> (f64, f64) {
    let tau = mesh.tau(j);
    let d = mesh.t(k) - mesh.t(j) + tau;
    (tau / d, d)
}

/// History coefficients by quadrature of their integral definitions.
fn pair_gauss_kronrod(theta: f64, d: f64, tau_j: f64, tau_next: f64, alpha: f64, tol: &GkTolerance) -> Result<StencilPair> {
    let scale = d.powf(-alpha);
    let kernel = move |x: f64| (1.0 - theta * x).powf(-alpha);
    let sum = tau_j + tau_next;
    let a = integrate(|x| (tau_j * (2.0 * x - 2.0) - tau_next) / sum * kernel(x), 0.0, 1.0, tol)?;
    let c = integrate(kernel, 0.0, 1.0, tol)?;
    Ok(StencilPair {
        a: scale * a,
        c_tilde: tau_j / tau_next * scale * c,
    })
}

/// History coefficients from raw quantities, without index checks.
#[inline]
pub(crate) fn pair_raw(
    theta: f64,
    d: f64,
    tau_j: f64,
    tau_next: f64,
    alpha: f64,
    thresholds: &Thresholds,
    mode: &CoeffMode,
) -> Result<StencilPair> {
    match mode {
        CoeffMode::Direct => Ok(assemble_pair(
            kernels(theta, d, alpha, &Thresholds::direct(), DELTA0)?,
            tau_j,
            tau_next,
            alpha,
        )),
        CoeffMode::Tcte => Ok(assemble_pair(
            kernels(theta, d, alpha, thresholds, DELTA0)?,
            tau_j,
            tau_next,
            alpha,
        )),
        CoeffMode::GaussKronrod(tol) => pair_gauss_kronrod(theta, d, tau_j, tau_next, alpha, tol),
    }
}

/// `(a_j^(k), c~_j^(k))` for `1 <= j <= k-1`, `2 <= k <= N`.
pub fn coeff_pair(
    mesh: &TimeMesh,
    j: usize,
    k: usize,
    alpha: f64,
    thresholds: &Thresholds,
    mode: CoeffMode,
) -> Result<StencilPair> {
    check_alpha(alpha)?;
    if j < 1 || j + 1 > k || k > mesh.len() {
        return Err(Error::Index(format!(
            "coeff_pair needs 1 <= j <= k-1, 2 <= k <= N; got j={j}, k={k}, N={}",
            mesh.len()
        )));
    }
    let (theta, d) = theta_and_d(mesh, j, k);
    pair_raw(theta, d, mesh.tau(j), mesh.tau(j + 1), alpha, thresholds, &mode)
}

#[inline]
pub(crate) fn last_raw(tau_prev: f64, tau_k: f64, alpha: f64) -> LastPair {
    let beta1 = 1.0 - alpha;
    let beta2 = 2.0 - alpha;
    let tka = tau_k.powf(alpha);
    let sum = tau_prev + tau_k;
    LastPair {
        a_last: alpha * tau_k * tau_k / (beta2 * beta1 * tau_prev * sum * tka),
        c_last: 1.0 / (beta1 * tka) + alpha * tau_k / (beta2 * beta1 * sum * tka),
    }
}

/// `(a_k^(k), c_k^(k))` for `2 <= k <= N`. All terms are positive, so no
/// cancellation-safe variant is needed.
pub fn coeff_last(mesh: &TimeMesh, k: usize, alpha: f64) -> Result<LastPair> {
    check_alpha(alpha)?;
    if k < 2 || k > mesh.len() {
        return Err(Error::Index(format!("coeff_last needs 2 <= k <= N, got k={k}, N={}", mesh.len())));
    }
    Ok(last_raw(mesh.tau(k - 1), mesh.tau(k), alpha))
}

/// `(a_k^(k), c_k^(k))` by quadrature of the weakly singular integrals.
pub fn coeff_last_gauss_kronrod(mesh: &TimeMesh, k: usize, alpha: f64, tol: &GkTolerance) -> Result<LastPair> {
    check_alpha(alpha)?;
    if k < 2 || k > mesh.len() {
        return Err(Error::Index(format!("coeff_last needs 2 <= k <= N, got k={k}, N={}", mesh.len())));
    }
    let tp = mesh.tau(k - 1);
    let tk = mesh.tau(k);
    let scale = tk.powf(-alpha) / (tp + tk);
    // x = 1 - y^(1/(1-a)) absorbs the (1-x)^(-a) endpoint singularity.
    let beta1 = 1.0 - alpha;
    let x_of = move |y: f64| 1.0 - y.powf(1.0 / beta1);
    let a = integrate(|y| (2.0 * x_of(y) - 1.0) / beta1, 0.0, 1.0, tol)?;
    let c = integrate(|y| (2.0 * tk * x_of(y) + tp) / beta1, 0.0, 1.0, tol)?;
    Ok(LastPair {
        a_last: tk * tk / tp * scale * a,
        c_last: scale * c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_graded_mesh;
    use crate::quadrature::{oracle_eval, OracleExpr};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn direct_kernels_at_three_quarters() {
        let k = eval_i_direct(0.75, 1.0, 0.5).unwrap();
        assert!((k.i1 - 0.5).abs() < 1e-15);
        assert!((k.i2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn direct_kernels_lose_digits_for_tiny_theta() {
        let exact = oracle_eval(&OracleExpr::I2 { theta: 1e-9, d: 1.0, alpha: 0.4 }).unwrap();
        let k = eval_i_direct(1e-9, 1.0, 0.4).unwrap();
        assert!(rel(k.i2, exact) > 1e-6);
        let t = eval_i_taylor(1e-9, 1.0, 0.4, DELTA0).unwrap();
        assert!(rel(t.i2, exact) < 4.0 * DELTA0);
    }

    #[test]
    fn truncation_numbers() {
        assert_eq!(truncation_number(1e-4, DELTA0).unwrap(), 4);
        assert_eq!(truncation_number(1e-2, DELTA0).unwrap(), 8);
        assert_eq!(truncation_number(1e-20, DELTA0).unwrap(), 1);
        assert!(truncation_number(1.0, DELTA0).is_err());
        assert!(matches!(
            truncation_number(0.9, DELTA0),
            Err(Error::TruncationCap { .. })
        ));
    }

    #[test]
    fn taylor_summands_have_one_sign() {
        for &alpha in &[0.1, 0.5, 0.9] {
            let (b1, b2) = (1.0 - alpha, 2.0 - alpha);
            let mut t1 = b1 * 0.3;
            let mut t2 = b2 * (b2 - 1.0) / 2.0 * 0.09;
            assert!(t1 > 0.0 && t2 > 0.0);
            for m in 2..40 {
                t1 *= (m as f64 - 1.0 - b1) / m as f64 * 0.3;
                t2 *= ((m + 1) as f64 - 1.0 - b2) / (m + 1) as f64 * 0.3;
                assert!(t1 > 0.0 && t2 > 0.0);
            }
        }
    }

    #[test]
    fn taylor_rejects_theta_at_one() {
        assert!(eval_i_taylor(1.0, 1.0, 0.5, DELTA0).is_err());
        assert!(eval_i_taylor(0.0, 1.0, 0.5, DELTA0).is_err());
    }

    #[test]
    fn uniform_last_panel_pair() {
        let m = TimeMesh::uniform(4, 4.0).unwrap();
        for mode in [CoeffMode::Direct, CoeffMode::Tcte, CoeffMode::gauss_kronrod()] {
            let p = coeff_pair(&m, 1, 2, 0.5, &Thresholds::default(), mode).unwrap();
            // a = -(1.5*I1 + 2*I2)/(0.75*2), c~ = I1/0.5 with d=2, theta=1/2.
            assert!((p.a + 0.804_737_854_124_365_0).abs() < 1e-12, "{mode:?} {p:?}");
            assert!((p.c_tilde - 0.828_427_124_746_190_1).abs() < 1e-12, "{mode:?} {p:?}");
        }
        let l = coeff_last(&m, 2, 0.5).unwrap();
        assert!((l.a_last - 1.0 / 3.0).abs() < 1e-15);
        assert!((l.c_last - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn index_checks() {
        let m = TimeMesh::uniform(4, 1.0).unwrap();
        let t = Thresholds::default();
        assert!(coeff_pair(&m, 0, 2, 0.5, &t, CoeffMode::Tcte).is_err());
        assert!(coeff_pair(&m, 2, 2, 0.5, &t, CoeffMode::Tcte).is_err());
        assert!(coeff_pair(&m, 1, 5, 0.5, &t, CoeffMode::Tcte).is_err());
        assert!(coeff_last(&m, 1, 0.5).is_err());
        assert!(coeff_last(&m, 5, 0.5).is_err());
    }

    #[test]
    fn tcte_matches_direct_bitwise_above_thresholds() {
        let m = build_graded_mesh(60, 2.0, 1.0).unwrap();
        let t = Thresholds::default();
        for k in 2..=60 {
            for j in 1..k {
                let (theta, _) = theta_and_d(&m, j, k);
                let a = coeff_pair(&m, j, k, 0.3, &t, CoeffMode::Tcte).unwrap();
                let b = coeff_pair(&m, j, k, 0.3, &t, CoeffMode::Direct).unwrap();
                if theta > t.theta_s2 {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn tcte_agrees_with_gauss_kronrod_and_signs_hold() {
        let m = build_graded_mesh(120, 4.0, 1.0).unwrap();
        let t = Thresholds::default();
        for &alpha in &[0.2, 0.6, 0.9] {
            for k in (2..=120).step_by(7) {
                for j in 1..k {
                    let p = coeff_pair(&m, j, k, alpha, &t, CoeffMode::Tcte).unwrap();
                    let g = coeff_pair(&m, j, k, alpha, &t, CoeffMode::gauss_kronrod()).unwrap();
                    assert!(p.a < 0.0 && p.c_tilde > 0.0);
                    assert!(rel(p.a, g.a) < 1e-10, "a j={j} k={k}: {p:?} {g:?}");
                    assert!(rel(p.c_tilde, g.c_tilde) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn tcte_matches_oracle_coefficients() {
        let m = build_graded_mesh(400, 5.0, 1.0).unwrap();
        let t = Thresholds::default();
        let alpha = 0.4;
        for k in [2, 3, 50, 399, 400] {
            for j in 1..k {
                let (theta, d) = theta_and_d(&m, j, k);
                let (tj, tn) = (m.tau(j), m.tau(j + 1));
                let p = coeff_pair(&m, j, k, alpha, &t, CoeffMode::Tcte).unwrap();
                let a = oracle_eval(&OracleExpr::StdA { tau_j: tj, tau_next: tn, theta, d, alpha }).unwrap();
                let c = oracle_eval(&OracleExpr::StdCTilde { tau_next: tn, theta, d, alpha }).unwrap();
                assert!(rel(p.a, a) < 1e-11 / (1.0 - alpha), "j={j} k={k}");
                assert!(rel(p.c_tilde, c) < 1e-11 / (1.0 - alpha), "j={j} k={k}");
            }
        }
    }

    #[test]
    fn last_pair_quadrature_cross_check() {
        let m = build_graded_mesh(50, 3.0, 2.0).unwrap();
        let tol = GkTolerance::new(1e-12, 1e-300, 4000);
        for &alpha in &[0.1, 0.5, 0.9] {
            for k in [2, 10, 50] {
                let l = coeff_last(&m, k, alpha).unwrap();
                let g = coeff_last_gauss_kronrod(&m, k, alpha, &tol).unwrap();
                assert!(l.a_last > 0.0 && l.c_last > 0.0);
                assert!(l.c_last - l.a_last * m.tau(k - 1) / m.tau(k) > 0.0);
                assert!(rel(l.a_last, g.a_last) < 1e-10, "alpha={alpha} k={k} {l:?} {g:?}");
                assert!(rel(l.c_last, g.c_last) < 1e-10, "alpha={alpha} k={k} {l:?} {g:?}");
            }
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("tcte".parse::<CoeffMode>().unwrap(), CoeffMode::Tcte);
        assert_eq!("Direct".parse::<CoeffMode>().unwrap(), CoeffMode::Direct);
        assert_eq!("gk".parse::<CoeffMode>().unwrap(), CoeffMode::gauss_kronrod());
        assert!("simpson".parse::<CoeffMode>().is_err());
    }
}
