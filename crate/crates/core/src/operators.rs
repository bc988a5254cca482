//! Discrete Caputo operators on a scalar time series.
//!
//! Both operators are written as `L_k u = (1/Gamma(1-a)) sum_m w_m du_m` with
//! `du_m = u^m - u^{m-1}`. The row weights are also what the solver needs to
//! split the implicit `du_k` term from the known part.

use crate::cancellation::Thresholds;
use crate::error::{Error, Result};
use crate::l2core::{last_raw, pair_raw, theta_and_d, CoeffMode, LastPair};
use crate::mesh::TimeMesh;
use crate::soefast::{FastHistoryState, FastStepCoeffs, SoeApproximation};
use crate::special::{gamma, CompensatedSum};

/// Values `u^0..u^k` on a mesh.
#[derive(Debug, Clone, Copy)]
pub struct SeriesView<'a> {
    mesh: &'a TimeMesh,
    values: &'a [f64],
}

impl<'a> SeriesView<'a> {
    pub fn new(mesh: &'a TimeMesh, values: &'a [f64]) -> Result<Self> {
        if values.is_empty() || values.len() > mesh.len() + 1 {
            return Err(Error::Length(format!(
                "series of length {} does not fit a mesh with {} steps",
                values.len(),
                mesh.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn mesh(&self) -> &'a TimeMesh {
        self.mesh
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    /// `du_j = u^j - u^{j-1}`.
    pub fn delta(&self, j: usize) -> f64 {
        self.values[j] - self.values[j - 1]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Weights `w_1..w_k` of the standard operator at step `k`, before the
/// `1/Gamma(1-a)` factor. Index 0 is unused.
///
/// History pair `j` contributes `-a_j` to `w_j` and
/// `a_j tau_j/tau_{j+1} + c~_j` to `w_{j+1}`; the local pair adds
/// `-a_k` to `w_{k-1}` and `c_k` to `w_k`.
#[derive(Debug, Clone)]
pub struct CaputoRow {
    k: usize,
    weights: Vec<CompensatedSum>,
}

impl CaputoRow {
    pub fn build(mesh: &TimeMesh, k: usize, alpha: f64, thresholds: &Thresholds, mode: CoeffMode) -> Result<Self> {
        check_alpha(alpha)?;
        if k < 2 || k > mesh.len() {
            return Err(Error::Index(format!("Caputo row needs 2 <= k <= N, got k={k}, N={}", mesh.len())));
        }
        let mut weights = vec![CompensatedSum::new(); k + 1];
        for j in 1..k {
            let (theta, d) = theta_and_d(mesh, j, k);
            let (tj, tn) = (mesh.tau(j), mesh.tau(j + 1));
            let p = pair_raw(theta, d, tj, tn, alpha, thresholds, &mode)?;
            weights[j].add(-p.a);
            weights[j + 1].add(p.a * (tj / tn) + p.c_tilde);
        }
        let last = local_pair(mesh, k, alpha, &mode)?;
        weights[k - 1].add(-last.a_last);
        weights[k].add(last.c_last);
        Ok(Self { k, weights })
    }

    pub fn step(&self) -> usize {
        self.k
    }

    /// `w_m` for `1 <= m <= k`.
    pub fn weight(&self, m: usize) -> f64 {
        self.weights[m].value()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.value()).collect()
    }
}

fn local_pair(mesh: &TimeMesh, k: usize, alpha: f64, mode: &CoeffMode) -> Result<LastPair> {
    match mode {
        CoeffMode::GaussKronrod(tol) => crate::l2core::coeff_last_gauss_kronrod(mesh, k, alpha, tol),
        _ => Ok(last_raw(mesh.tau(k - 1), mesh.tau(k), alpha)),
    }
}

/// `L_1 u = du_1 / (Gamma(2-a) tau_1^a)`.
fn first_step(mesh: &TimeMesh, du1: f64, alpha: f64) -> f64 {
    du1 / (gamma(2.0 - alpha) * mesh.tau(1).powf(alpha))
}

/// Standard L2 approximation of the Caputo derivative at `t_k`.
pub fn l2_caputo(series: SeriesView<'_>, alpha: f64, k: usize, thresholds: &Thresholds, mode: CoeffMode) -> Result<f64> {
    check_alpha(alpha)?;
    let mesh = series.mesh();
    if k < 1 || k > mesh.len() {
        return Err(Error::Index(format!("need 1 <= k <= N, got k={k}, N={}", mesh.len())));
    }
    if series.values().len() < k + 1 {
        return Err(Error::Length(format!("step {k} needs {} values, got {}", k + 1, series.values().len())));
    }
    if k == 1 {
        return Ok(first_step(mesh, series.delta(1), alpha));
    }
    // Ascending j, compensated, term by term as in the defining sum.
    let mut acc = CompensatedSum::new();
    for j in 1..k {
        let (theta, d) = theta_and_d(mesh, j, k);
        let (tj, tn) = (mesh.tau(j), mesh.tau(j + 1));
        let p = pair_raw(theta, d, tj, tn, alpha, thresholds, &mode)?;
        let (dj, dn) = (series.delta(j), series.delta(j + 1));
        acc.add(p.a * (tj / tn * dn - dj));
        acc.add(p.c_tilde * dn);
    }
    let last = local_pair(mesh, k, alpha, &mode)?;
    acc.add(-last.a_last * series.delta(k - 1));
    acc.add(last.c_last * series.delta(k));
    Ok(acc.value() / gamma(1.0 - alpha))
}

/// Fast L2 approximation at `t_k` from `tail = [u^{k-2}, u^{k-1}, u^k]`
/// (`[u^0, u^1]` when `k = 1`). Returns the value and the history advanced to `k`.
#[allow(clippy::too_many_arguments)]
pub fn fast_l2_caputo(
    state: FastHistoryState,
    tail: &[f64],
    mesh: &TimeMesh,
    alpha: f64,
    k: usize,
    soe: &SoeApproximation,
    thresholds: &Thresholds,
    mode: CoeffMode,
) -> Result<(f64, FastHistoryState)> {
    check_alpha(alpha)?;
    if k < 1 || k > mesh.len() {
        return Err(Error::Index(format!("need 1 <= k <= N, got k={k}, N={}", mesh.len())));
    }
    if state.channels() != 1 {
        return Err(Error::Length("fast_l2_caputo works on a single channel".into()));
    }
    if k == 1 {
        if tail.len() != 2 {
            return Err(Error::Length(format!("step 1 needs [u0, u1], got {} values", tail.len())));
        }
        if state.k_current() != 1 {
            return Err(Error::OutOfOrder {
                expected: state.k_current() + 1,
                got: k,
            });
        }
        return Ok((first_step(mesh, tail[1] - tail[0], alpha), state));
    }
    if tail.len() != 3 {
        return Err(Error::Length(format!("step {k} needs [u^(k-2), u^(k-1), u^k], got {} values", tail.len())));
    }
    let mut state = state;
    let dp = tail[1] - tail[0];
    let dc = tail[2] - tail[1];
    let coeffs = FastStepCoeffs::compute(mesh, k, soe, thresholds, mode)?;
    state.advance(&coeffs, &[dp], &[dc])?;
    let mut hist = [0.0];
    state.weighted_sum(soe, &mut hist);
    let last = local_pair(mesh, k, alpha, &mode)?;
    let mut acc = CompensatedSum::new();
    acc.add(hist[0]);
    acc.add(-last.a_last * dp);
    acc.add(last.c_last * dc);
    Ok((acc.value() / gamma(1.0 - alpha), state))
}
