//! Sum-of-exponentials kernel approximation and the fast L2 history.
//!
//! The kernel `t^(-a)` is replaced on `[dt, T]` by `sum_l w_l exp(-theta_l t)`.
//! The history part of the L2 operator then becomes `sum_l w_l H_l(t_k)` with
//! the one-step recurrence
//!
//! ```text
//! H_l(t_k) = e^(-theta_l tau_k) H_l(t_{k-1})
//!          + a_l (tau_{k-1}/tau_k du_k - du_{k-1}) + c~_l du_k
//! ```
//!
//! whose coefficients are built from `J1 = 1 - e^-x` and
//! `J2 = 1 - x e^-x - e^-x` with `x = theta_l tau_{k-1}`.

use std::f64::consts::PI;

use crate::cancellation::{Thresholds, DELTA0};
use crate::error::{Error, Result};
use crate::l2core::{truncation_number, CoeffMode, StencilPair, MAX_TRUNCATION};
use crate::mesh::TimeMesh;
use crate::quadrature::{integrate, GkTolerance};
use crate::special::{gamma, CompensatedSum};

/// Points of the log-spaced grid used to certify an approximation.
pub const SOE_CHECK_POINTS: usize = 1000;

/// Exponential-sum approximation of `t^(-alpha)` on `[dt_cut, t_soe]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoeApproximation {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    tol: f64,
    dt_cut: f64,
    t_soe: f64,
    achieved: f64,
}

impl SoeApproximation {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of exponentials `N_q`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn window(&self) -> (f64, f64) {
        (self.dt_cut, self.t_soe)
    }

    /// Max relative error found on the certification grid.
    pub fn achieved_error(&self) -> f64 {
        self.achieved
    }

    /// `sum_l w_l exp(-theta_l t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&th, &w)| w * (-th * t).exp())
            .collect::<CompensatedSum>()
            .value()
    }

    /// Max relative error against `t^(-alpha)` on `points` log-spaced samples.
    pub fn sampled_max_rel_error(&self, points: usize) -> f64 {
        log_grid(self.dt_cut, self.t_soe, points)
            .map(|t| {
                let exact = t.powf(-self.alpha);
                ((self.eval(t) - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let n = points.max(2);
    (0..n).map(move |i| {
        if i == 0 {
            lo
        } else if i == n - 1 {
            hi
        } else {
            (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp()
        }
    })
}

/// Builds an exponential sum with relative error at most `eps` on `[dt_cut, t_soe]`.
///
/// Starts from `t^(-a) = 1/Gamma(a) * int_R exp(a x - t e^x) dx`, truncates the
/// line where both tails are below `eps/8`, applies the trapezoidal rule with
/// the step given by the strip-analyticity error bound, and drops the
/// exponentials whose combined contribution on the window stays below `eps/8`.
/// The result is certified on a log grid; the step is refined if that fails.
pub fn build_soe(alpha: f64, eps: f64, dt_cut: f64, t_soe: f64) -> Result<SoeApproximation> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(dt_cut > 0.0 && dt_cut < t_soe && t_soe.is_finite()) {
        return Err(Error::Domain(format!(
            "SOE window needs 0 < dt < T, got [{dt_cut:e}, {t_soe:e}]"
        )));
    }
    if !(1e-14 * (1.0 - 1e-9)..=1e-6 * (1.0 + 1e-9)).contains(&eps) {
        return Err(Error::Domain(format!("SOE tolerance must lie in [1e-14, 1e-6], got {eps:e}")));
    }
    let part = eps / 8.0;
    let g = gamma(alpha);
    // Lower tail: int_{-inf}^{lo} e^{a x} dx / Gamma(a) <= part * T^(-a).
    let lo = ((part * gamma(1.0 + alpha)).ln() - alpha * t_soe.ln()) / alpha;
    // Upper tail: Q(a, dt e^{hi}) <= part.
    let z = (-(part * g).ln()).max(1.0);
    let hi = (z / dt_cut).ln();

    let mut disc = part;
    let mut last_err = f64::INFINITY;
    for _ in 0..8 {
        let h = trapezoid_step(alpha, disc);
        let count = ((hi - lo) / h).ceil() as usize + 1;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for i in 0..count {
            let x = lo + i as f64 * h;
            nodes.push(x.exp());
            weights.push(h * (alpha * x).exp() / g);
        }
        prune(&mut nodes, &mut weights, alpha, dt_cut, t_soe, part);
        let mut soe = SoeApproximation {
            nodes,
            weights,
            alpha,
            tol: eps,
            dt_cut,
            t_soe,
            achieved: 0.0,
        };
        let err = soe.sampled_max_rel_error(SOE_CHECK_POINTS);
        soe.achieved = err;
        if err <= eps {
            return Ok(soe);
        }
        last_err = err;
        disc /= 10.0;
    }
    Err(Error::SoeTolerance {
        tol: eps,
        achieved: last_err,
    })
}

/// Largest step whose trapezoidal error bound `4 cos(d)^(-a) / (e^(2 pi d/h) - 1)`
/// stays below `target` for some strip half-width `d < pi/2`.
fn trapezoid_step(alpha: f64, target: f64) -> f64 {
    (1..400)
        .map(|i| {
            let d = 0.5 * PI * i as f64 / 400.0;
            2.0 * PI * d / (1.0 + 4.0 * d.cos().powf(-alpha) / target).ln()
        })
        .fold(0.0, f64::max)
}

fn prune(nodes: &mut Vec<f64>, weights: &mut Vec<f64>, alpha: f64, dt: f64, t_max: f64, budget: f64) {
    // Largest relative contribution w e^{-theta t} t^a over the window.
    let peak: Vec<f64> = nodes
        .iter()
        .zip(weights.iter())
        .map(|(&th, &w)| {
            let t = (alpha / th).clamp(dt, t_max);
            w * (-th * t).exp() * t.powf(alpha)
        })
        .collect();
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| peak[a].total_cmp(&peak[b]));
    let mut keep = vec![true; nodes.len()];
    let mut spent = 0.0;
    for &i in &order {
        if spent + peak[i] > budget {
            break;
        }
        spent += peak[i];
        keep[i] = false;
    }
    let mut idx = 0;
    nodes.retain(|_| {
        idx += 1;
        keep[idx - 1]
    });
    let mut idx = 0;
    weights.retain(|_| {
        idx += 1;
        keep[idx - 1]
    });
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPairJ {
    pub j1: f64,
    pub j2: f64,
}

/// Explicit `J1 = 1 - e^-x`, `J2 = 1 - x e^-x - e^-x` (cancellation-prone for small x).
pub fn eval_j_direct(x: f64) -> Result<KernelPairJ> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("J kernels need x > 0, got {x}")));
    }
    j_kernels(x, &Thresholds::direct(), DELTA0)
}

/// `J1`, `J2` with the threshold switch of the fast coefficients.
pub fn eval_j(x: f64, thresholds: &Thresholds) -> Result<KernelPairJ> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("J kernels need x > 0, got {x}")));
    }
    j_kernels(x, thresholds, DELTA0)
}

/// `e^-x sum_{m=1}^{N} x^m/m!` with `N` terms.
fn taylor_j1(x: f64, e: f64, terms: usize) -> f64 {
    let mut buf = [0.0f64; MAX_TRUNCATION + 1];
    let mut t = x;
    buf[0] = t;
    for m in 2..=terms {
        t *= x / m as f64;
        buf[m - 1] = t;
    }
    e * buf[..terms].iter().rev().sum::<f64>()
}

/// `e^-x sum_{m=2}^{N+1} x^m/m!` with `N` terms.
fn taylor_j2(x: f64, e: f64, terms: usize) -> f64 {
    let mut buf = [0.0f64; MAX_TRUNCATION + 1];
    let mut t = 0.5 * x * x;
    buf[0] = t;
    for (i, slot) in buf.iter_mut().enumerate().take(terms).skip(1) {
        t *= x / (i + 2) as f64;
        *slot = t;
    }
    e * buf[..terms].iter().rev().sum::<f64>()
}

/// Truncated Taylor series for `J1`, `J2`, `N1 = N2 = ceil(ln delta0 / ln x)`.
pub fn eval_j_taylor(x: f64, delta0: f64) -> Result<KernelPairJ> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("Taylor path for J needs 0 < x < 1, got {x}")));
    }
    let n = truncation_number(x, delta0)?;
    let e = (-x).exp();
    Ok(KernelPairJ {
        j1: taylor_j1(x, e, n),
        j2: taylor_j2(x, e, n),
    })
}

#[inline]
fn j_kernels(x: f64, thr: &Thresholds, delta0: f64) -> Result<KernelPairJ> {
    let e = (-x).exp();
    let taylor1 = x <= thr.theta_f1;
    let taylor2 = x <= thr.theta_f2;
    let n = if taylor1 || taylor2 { truncation_number(x, delta0)? } else { 0 };
    let j1 = if taylor1 { taylor_j1(x, e, n) } else { 1.0 - e };
    let j2 = if taylor2 { taylor_j2(x, e, n) } else { 1.0 - x * e - e };
    Ok(KernelPairJ { j1, j2 })
}

/// Fast-history coefficients `(a^{k,l}_{k-1}, c~^{k,l}_{k-1})` and the decay
/// factor `e^{-theta tau_k}`.
#[inline]
pub(crate) fn fast_terms(
    node: f64,
    tau_prev: f64,
    tau_k: f64,
    thresholds: &Thresholds,
    mode: &CoeffMode,
) -> Result<(StencilPair, f64)> {
    let decay = (-node * tau_k).exp();
    let j = match mode {
        CoeffMode::Direct => j_kernels(node * tau_prev, &Thresholds::direct(), DELTA0)?,
        CoeffMode::Tcte => j_kernels(node * tau_prev, thresholds, DELTA0)?,
        CoeffMode::GaussKronrod(tol) => {
            return Ok((fast_pair_gauss_kronrod(node, tau_prev, tau_k, decay, tol)?, decay));
        }
    };
    let ntk = node * tau_k;
    let pair = StencilPair {
        a: -decay * (ntk * j.j1 + 2.0 * j.j2) / (tau_prev * (tau_prev + tau_k) * node * node),
        c_tilde: decay * j.j1 / ntk,
    };
    Ok((pair, decay))
}

fn fast_pair_gauss_kronrod(node: f64, tau_prev: f64, tau_k: f64, decay: f64, tol: &GkTolerance) -> Result<StencilPair> {
    if decay == 0.0 {
        return Ok(StencilPair { a: 0.0, c_tilde: 0.0 });
    }
    let x = node * tau_prev;
    let kernel = move |s: f64| (-x * (1.0 - s)).exp();
    let sum = tau_prev + tau_k;
    let a = integrate(|s| (tau_prev * (2.0 * s - 2.0) - tau_k) / sum * kernel(s), 0.0, 1.0, tol)?;
    let c = integrate(kernel, 0.0, 1.0, tol)?;
    Ok(StencilPair {
        a: decay * a,
        c_tilde: tau_prev / tau_k * decay * c,
    })
}

/// Fast coefficients for SOE node `node` at step `k >= 2`.
pub fn fast_coeff_pair(
    mesh: &TimeMesh,
    k: usize,
    node: f64,
    thresholds: &Thresholds,
    mode: CoeffMode,
) -> Result<StencilPair> {
    if k < 2 || k > mesh.len() {
        return Err(Error::Index(format!("fast_coeff_pair needs 2 <= k <= N, got k={k}, N={}", mesh.len())));
    }
    if !(node > 0.0) {
        return Err(Error::Domain(format!("SOE node must be positive, got {node}")));
    }
    Ok(fast_terms(node, mesh.tau(k - 1), mesh.tau(k), thresholds, &mode)?.0)
}

/// Per-node coefficients of one step of the history recurrence.
#[derive(Debug, Clone)]
pub struct FastStepCoeffs {
    k: usize,
    ratio: f64,
    decay: Vec<f64>,
    a: Vec<f64>,
    c_tilde: Vec<f64>,
}

impl FastStepCoeffs {
    pub fn compute(
        mesh: &TimeMesh,
        k: usize,
        soe: &SoeApproximation,
        thresholds: &Thresholds,
        mode: CoeffMode,
    ) -> Result<Self> {
        if k < 2 || k > mesh.len() {
            return Err(Error::Index(format!("fast step needs 2 <= k <= N, got k={k}, N={}", mesh.len())));
        }
        let (tp, tk) = (mesh.tau(k - 1), mesh.tau(k));
        let n = soe.len();
        let mut decay = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut c_tilde = Vec::with_capacity(n);
        for &node in soe.nodes() {
            let (p, e) = fast_terms(node, tp, tk, thresholds, &mode)?;
            decay.push(e);
            a.push(p.a);
            c_tilde.push(p.c_tilde);
        }
        Ok(Self {
            k,
            ratio: tp / tk,
            decay,
            a,
            c_tilde,
        })
    }

    pub fn step(&self) -> usize {
        self.k
    }

    pub fn pair(&self, l: usize) -> StencilPair {
        StencilPair {
            a: self.a[l],
            c_tilde: self.c_tilde[l],
        }
    }

    /// `sum_l w_l (a_l tau_{k-1}/tau_k + c~_l)`: weight of `du_k` in `sum_l w_l H_l(t_k)`.
    pub fn current_gain(&self, soe: &SoeApproximation) -> f64 {
        soe.weights()
            .iter()
            .enumerate()
            .map(|(l, &w)| w * (self.a[l] * self.ratio + self.c_tilde[l]))
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Auxiliary accumulators `H_l(t_k)`, one per SOE node and channel.
///
/// Channels are independent series sharing the mesh (for example the
/// spatial unknowns of a PDE); storage is node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FastHistoryState {
    h: Vec<f64>,
    nodes: usize,
    channels: usize,
    k_current: usize,
}

impl FastHistoryState {
    /// Zero history at `t_1`.
    pub fn new(soe: &SoeApproximation, channels: usize) -> Self {
        Self {
            h: vec![0.0; soe.len() * channels],
            nodes: soe.len(),
            channels,
            k_current: 1,
        }
    }

    pub fn k_current(&self) -> usize {
        self.k_current
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `H_l` for one channel.
    pub fn node_values(&self, channel: usize) -> Vec<f64> {
        (0..self.nodes).map(|l| self.h[l * self.channels + channel]).collect()
    }

    fn check(&self, coeffs: &FastStepCoeffs, lens: &[usize]) -> Result<()> {
        if coeffs.k != self.k_current + 1 {
            return Err(Error::OutOfOrder {
                expected: self.k_current + 1,
                got: coeffs.k,
            });
        }
        if coeffs.a.len() != self.nodes {
            return Err(Error::Length(format!(
                "coefficients for {} nodes, history has {}",
                coeffs.a.len(),
                self.nodes
            )));
        }
        if lens.iter().any(|&n| n != self.channels) {
            return Err(Error::Length(format!("expected {} channels", self.channels)));
        }
        Ok(())
    }

    /// `sum_l w_l H_l` per channel.
    pub fn weighted_sum(&self, soe: &SoeApproximation, out: &mut [f64]) {
        let mut acc = vec![CompensatedSum::new(); self.channels];
        for (l, &w) in soe.weights().iter().enumerate() {
            let row = &self.h[l * self.channels..(l + 1) * self.channels];
            for (s, &v) in acc.iter_mut().zip(row) {
                s.add(w * v);
            }
        }
        for (o, s) in out.iter_mut().zip(acc) {
            *o = s.value();
        }
    }

    /// Part of `sum_l w_l H_l(t_k)` that does not involve `du_k`, i.e.
    /// `sum_l w_l (e^{-theta_l tau_k} H_l(t_{k-1}) - a_l du_{k-1})`.
    pub fn known_part(
        &self,
        coeffs: &FastStepCoeffs,
        soe: &SoeApproximation,
        delta_prev: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.check(coeffs, &[delta_prev.len(), out.len()])?;
        let mut acc = vec![CompensatedSum::new(); self.channels];
        for (l, &w) in soe.weights().iter().enumerate() {
            let (d, a) = (coeffs.decay[l], coeffs.a[l]);
            let row = &self.h[l * self.channels..(l + 1) * self.channels];
            for ((s, &v), &dp) in acc.iter_mut().zip(row).zip(delta_prev) {
                s.add(w * (d * v - a * dp));
            }
        }
        for (o, s) in out.iter_mut().zip(acc) {
            *o = s.value();
        }
        Ok(())
    }

    /// Advances every accumulator from `t_{k-1}` to `t_k`.
    pub fn advance(&mut self, coeffs: &FastStepCoeffs, delta_prev: &[f64], delta_curr: &[f64]) -> Result<()> {
        self.check(coeffs, &[delta_prev.len(), delta_curr.len()])?;
        let rho = coeffs.ratio;
        for l in 0..self.nodes {
            let (d, a, c) = (coeffs.decay[l], coeffs.a[l], coeffs.c_tilde[l]);
            let row = &mut self.h[l * self.channels..(l + 1) * self.channels];
            for ((v, &dp), &dc) in row.iter_mut().zip(delta_prev).zip(delta_curr) {
                *v = d * *v + a * (rho * dc - dp) + c * dc;
            }
        }
        self.k_current = coeffs.k;
        Ok(())
    }
}

/// Scalar history update: returns `state` advanced to step `k`.
#[allow(clippy::too_many_arguments)]
pub fn update_history(
    mut state: FastHistoryState,
    mesh: &TimeMesh,
    k: usize,
    soe: &SoeApproximation,
    delta_prev: f64,
    delta_curr: f64,
    thresholds: &Thresholds,
    mode: CoeffMode,
) -> Result<FastHistoryState> {
    if state.k_current + 1 != k {
        return Err(Error::OutOfOrder {
            expected: state.k_current + 1,
            got: k,
        });
    }
    let coeffs = FastStepCoeffs::compute(mesh, k, soe, thresholds, mode)?;
    state.advance(&coeffs, &[delta_prev], &[delta_curr])?;
    Ok(state)
}
