//! Implicit L2 time stepping for `D_t^a u = Lap u + f` on `[-1, 1]^2` with
//! homogeneous Dirichlet data.
//!
//! At every `t_k` the discrete Caputo operator is split into the weight of
//! `du_k = u^k - u^{k-1}` and a known part, giving
//! `(s_k I - Lap) u^k = f(t_k) + s_k u^{k-1} - known_k`.

mod grid;
mod problem;

use std::time::Instant;

pub use grid::{build_grid, cheb_diff, clenshaw_curtis, SpatialGrid};
pub use problem::{InitialFn, ProblemSpec, Scheme, SoeSettings, SourceFn};

use crate::cancellation::Thresholds;
use crate::error::{Error, Result};
use crate::mesh::{build_graded_mesh, TimeMesh};
use crate::operators::CaputoRow;
use crate::soefast::{build_soe, FastHistoryState, FastStepCoeffs, SoeApproximation};
use crate::special::{gamma, CompensatedSum};

/// Outcome of one solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub label: String,
    pub alpha: f64,
    pub horizon: f64,
    pub steps: usize,
    pub grading: f64,
    pub space_n: usize,
    pub scheme: Scheme,
    pub mode: &'static str,
    /// Number of exponentials, fast scheme only.
    pub soe_nodes: Option<usize>,
    /// Times `t_0..t_N`.
    pub times: Vec<f64>,
    /// `||u(t_k) - u^k||`, `k = 0..N`; empty without an exact solution.
    pub errors: Vec<f64>,
    /// `||u^k||`, `k = 0..N`.
    pub norms: Vec<f64>,
    pub err_max: Option<f64>,
    pub err_t: Option<f64>,
    /// Time-stepping loop only.
    pub wall_seconds: f64,
    /// Mesh, grid and SOE construction.
    pub setup_seconds: f64,
}

/// Solves `problem` on `grid`.
pub fn solve(problem: &ProblemSpec, grid: &SpatialGrid, thresholds: &Thresholds) -> Result<SolveReport> {
    solve_with_observer(problem, grid, thresholds, |_, _, _| {})
}

/// As [`solve`], calling `observer(k, t_k, u^k)` with the interior values
/// after every step (including `k = 0`).
pub fn solve_with_observer<O>(
    problem: &ProblemSpec,
    grid: &SpatialGrid,
    thresholds: &Thresholds,
    mut observer: O,
) -> Result<SolveReport>
where
    O: FnMut(usize, f64, &[f64]),
{
    problem.validate()?;
    if grid.n() != problem.space_n {
        return Err(Error::Length(format!(
            "grid has {} points per direction, problem asks for {}",
            grid.n(),
            problem.space_n
        )));
    }
    let setup = Instant::now();
    let mesh = build_graded_mesh(problem.steps, problem.grading, problem.horizon)?;
    let soe = match problem.scheme {
        Scheme::Fast if mesh.len() >= 2 => {
            let t_soe = problem.soe.t_soe.unwrap_or(problem.horizon);
            Some(build_soe(problem.alpha, problem.soe.eps, mesh.tau(2), t_soe)?)
        }
        _ => None,
    };
    let setup_seconds = setup.elapsed().as_secs_f64();

    let mut stepper = Stepper::new(problem, grid, &mesh, thresholds, soe.as_ref());
    let mut report = SolveReport {
        label: problem.label.clone(),
        alpha: problem.alpha,
        horizon: problem.horizon,
        steps: problem.steps,
        grading: problem.grading,
        space_n: problem.space_n,
        scheme: problem.scheme,
        mode: problem.mode.name(),
        soe_nodes: soe.as_ref().map(|s| s.len()),
        times: mesh.nodes().to_vec(),
        errors: Vec::new(),
        norms: Vec::with_capacity(mesh.len() + 1),
        err_max: None,
        err_t: None,
        wall_seconds: 0.0,
        setup_seconds,
    };
    let mut record = |k: usize, u: &[f64], report: &mut SolveReport| {
        let t = mesh.t(k);
        report.norms.push(grid.l2_norm(u));
        if let Some(exact) = &problem.exact {
            let ex = grid.sample(|x, y| exact(t, x, y));
            let diff: Vec<f64> = ex.iter().zip(u).map(|(a, b)| a - b).collect();
            report.errors.push(grid.l2_norm(&diff));
        }
        observer(k, t, u);
    };

    let clock = Instant::now();
    record(0, &stepper.current, &mut report);
    for k in 1..=mesh.len() {
        stepper.step(k)?;
        record(k, &stepper.current, &mut report);
    }
    report.wall_seconds = clock.elapsed().as_secs_f64();

    if !report.errors.is_empty() {
        report.err_max = Some(report.errors[1..].iter().copied().fold(0.0, f64::max));
        report.err_t = report.errors.last().copied();
    }
    Ok(report)
}

struct Stepper<'a> {
    problem: &'a ProblemSpec,
    grid: &'a SpatialGrid,
    mesh: &'a TimeMesh,
    thresholds: &'a Thresholds,
    soe: Option<&'a SoeApproximation>,
    gamma1: f64,
    current: Vec<f64>,
    /// `du_1..du_k` stacked (standard scheme); only the latest for the fast one.
    deltas: Vec<f64>,
    history: Option<FastHistoryState>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(
        problem: &'a ProblemSpec,
        grid: &'a SpatialGrid,
        mesh: &'a TimeMesh,
        thresholds: &'a Thresholds,
        soe: Option<&'a SoeApproximation>,
    ) -> Self {
        let u0 = grid.sample(|x, y| (problem.initial)(x, y));
        let size = grid.unknowns();
        let reserve = if soe.is_some() { size } else { size * mesh.len() };
        Self {
            problem,
            grid,
            mesh,
            thresholds,
            soe,
            gamma1: gamma(1.0 - problem.alpha),
            current: u0,
            deltas: Vec::with_capacity(reserve),
            history: soe.map(|s| FastHistoryState::new(s, size)),
            scratch: vec![0.0; size],
        }
    }

    fn source(&self, t: f64) -> Vec<f64> {
        let f = &self.problem.source;
        self.grid.sample(|x, y| f(t, x, y))
    }

    fn last_delta(&self) -> &[f64] {
        let size = self.grid.unknowns();
        &self.deltas[self.deltas.len() - size..]
    }

    fn step(&mut self, k: usize) -> Result<()> {
        let alpha = self.problem.alpha;
        let size = self.grid.unknowns();
        let mut rhs = self.source(self.mesh.t(k));
        let shift = if k == 1 {
            1.0 / (gamma(2.0 - alpha) * self.mesh.tau(1).powf(alpha))
        } else if let Some(soe) = self.soe {
            self.fast_known(k, soe)?
        } else {
            self.standard_known(k)?
        };
        if k >= 2 {
            for (r, s) in rhs.iter_mut().zip(&self.scratch) {
                *r -= s / self.gamma1;
            }
        }
        for (r, u) in rhs.iter_mut().zip(&self.current) {
            *r += shift * u;
        }
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(Error::Singular(format!("implicit weight {shift:e} at step {k}")));
        }
        self.grid.solve_shifted(shift, &mut rhs)?;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(format!("non-finite solution at step {k}")));
        }
        let delta: Vec<f64> = rhs.iter().zip(&self.current).map(|(a, b)| a - b).collect();
        if let (Some(soe), true) = (self.soe, k >= 2) {
            let coeffs = FastStepCoeffs::compute(self.mesh, k, soe, self.thresholds, self.problem.mode)?;
            let prev = self.last_delta().to_vec();
            self.history.as_mut().expect("fast scheme has history").advance(&coeffs, &prev, &delta)?;
        }
        if self.soe.is_some() {
            self.deltas.clear();
        }
        debug_assert_eq!(delta.len(), size);
        self.deltas.extend_from_slice(&delta);
        self.current = rhs;
        Ok(())
    }

    /// Standard scheme: fills `scratch` with `sum_{m<k} w_m du_m` and returns
    /// `w_k / Gamma(1-a)`.
    fn standard_known(&mut self, k: usize) -> Result<f64> {
        let row = CaputoRow::build(self.mesh, k, self.problem.alpha, self.thresholds, self.problem.mode)?;
        let size = self.grid.unknowns();
        let mut acc = vec![CompensatedSum::new(); size];
        for m in 1..k {
            let w = row.weight(m);
            let d = &self.deltas[(m - 1) * size..m * size];
            for (s, &v) in acc.iter_mut().zip(d) {
                s.add(w * v);
            }
        }
        for (o, s) in self.scratch.iter_mut().zip(&acc) {
            *o = s.value();
        }
        Ok(row.weight(k) / self.gamma1)
    }

    /// Fast scheme: fills `scratch` with the history and local terms that do
    /// not involve `du_k` and returns the implicit weight.
    fn fast_known(&mut self, k: usize, soe: &SoeApproximation) -> Result<f64> {
        let alpha = self.problem.alpha;
        let coeffs = FastStepCoeffs::compute(self.mesh, k, soe, self.thresholds, self.problem.mode)?;
        let last = match &self.problem.mode {
            crate::l2core::CoeffMode::GaussKronrod(tol) => {
                crate::l2core::coeff_last_gauss_kronrod(self.mesh, k, alpha, tol)?
            }
            _ => crate::l2core::coeff_last(self.mesh, k, alpha)?,
        };
        let prev = self.last_delta().to_vec();
        let state = self.history.as_ref().expect("fast scheme has history");
        state.known_part(&coeffs, soe, &prev, &mut self.scratch)?;
        for (s, &d) in self.scratch.iter_mut().zip(&prev) {
            *s -= last.a_last * d;
        }
        Ok((coeffs.current_gain(soe) + last.c_last) / self.gamma1)
    }
}

/// One line of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub grading: f64,
    pub err_max: f64,
    pub err_t: f64,
    /// Observed order against the previous row with the same grading.
    pub rate_max: Option<f64>,
    pub rate_t: Option<f64>,
    pub expected_max: f64,
    pub expected_t: f64,
    pub seconds: f64,
}

/// Observed order `log(e1/e2) / log(N2/N1)` (`log2(e1/e2)` when N doubles).
pub fn observed_rate(n1: usize, e1: f64, n2: usize, e2: f64) -> f64 {
    (e1 / e2).ln() / (n2 as f64 / n1 as f64).ln()
}

/// Builds rate rows from finished solves, grouped by grading in input order.
pub fn convergence_rows(reports: &[SolveReport]) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(reports.len());
    for rep in reports {
        let (Some(err_max), Some(err_t)) = (rep.err_max, rep.err_t) else {
            return Err(Error::Domain("convergence study needs an exact solution".into()));
        };
        let prev = rows.iter().rev().find(|r| r.grading == rep.grading);
        let (rate_max, rate_t) = match prev {
            Some(p) => (
                Some(observed_rate(p.steps, p.err_max, rep.steps, err_max)),
                Some(observed_rate(p.steps, p.err_t, rep.steps, err_t)),
            ),
            None => (None, None),
        };
        let a = rep.alpha;
        rows.push(ConvergenceRow {
            steps: rep.steps,
            grading: rep.grading,
            err_max,
            err_t,
            rate_max,
            rate_t,
            expected_max: (rep.grading * a).min(3.0 - a),
            expected_t: rep.grading.min(3.0 - a),
            seconds: rep.wall_seconds,
        });
    }
    Ok(rows)
}

/// Runs `base` for every grading and step count and tabulates observed orders.
pub fn convergence_study(
    base: &ProblemSpec,
    steps: &[usize],
    gradings: &[f64],
    thresholds: &Thresholds,
) -> Result<Vec<ConvergenceRow>> {
    if steps.len() < 2 {
        return Err(Error::Domain("convergence study needs at least two step counts".into()));
    }
    let grid = build_grid(base.space_n)?;
    let mut reports = Vec::with_capacity(steps.len() * gradings.len());
    for &r in gradings {
        for &n in steps {
            let p = base.clone().with_grading(r).with_steps(n);
            reports.push(solve(&p, &grid, thresholds)?);
        }
    }
    convergence_rows(&reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l2core::CoeffMode;
    use std::sync::Arc;

    #[test]
    fn zero_data_stays_zero() {
        let mut p = ProblemSpec::relaxation(0.5, 1.0, 40, 2.0, 8);
        p.initial = Arc::new(|_, _| 0.0);
        let g = build_grid(8).unwrap();
        for scheme in [Scheme::Standard, Scheme::Fast] {
            let rep = solve(&p.clone().with_scheme(scheme), &g, &Thresholds::default()).unwrap();
            assert!(rep.norms.iter().all(|&v| v == 0.0));
            assert!(rep.err_max.is_none());
        }
    }

    #[test]
    fn relaxation_decays() {
        let p = ProblemSpec::relaxation(0.7, 1.0, 50, 2.0, 10);
        let g = build_grid(10).unwrap();
        let rep = solve(&p, &g, &Thresholds::default()).unwrap();
        assert!(rep.norms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn example2_converges() {
        let g = build_grid(5).unwrap();
        let alpha = 0.6;
        let r = (3.0 - alpha) / alpha;
        let e: Vec<f64> = [50, 100]
            .iter()
            .map(|&n| solve(&ProblemSpec::example2(alpha, 10.0, n, r), &g, &Thresholds::default()).unwrap().err_max.unwrap())
            .collect();
        let rate = observed_rate(50, e[0], 100, e[1]);
        assert!(rate > 2.0, "{e:?} {rate}");
    }

    #[test]
    fn fast_matches_standard() {
        let g = build_grid(5).unwrap();
        let p = ProblemSpec::example2(0.6, 10.0, 200, 4.0).with_soe(SoeSettings { eps: 1e-12, t_soe: None });
        let mut std_sol = Vec::new();
        solve_with_observer(&p, &g, &Thresholds::default(), |_, _, u| std_sol.push(u.to_vec())).unwrap();
        let mut worst: f64 = 0.0;
        solve_with_observer(&p.clone().with_scheme(Scheme::Fast), &g, &Thresholds::default(), |k, _, u| {
            let d: Vec<f64> = u.iter().zip(&std_sol[k]).map(|(a, b)| a - b).collect();
            worst = worst.max(g.l2_norm(&d));
        })
        .unwrap();
        assert!(worst <= 1e-10, "{worst:e}");
    }

    #[test]
    fn gk_mode_matches_tcte() {
        let g = build_grid(5).unwrap();
        let p = ProblemSpec::example2(0.4, 1.0, 60, 5.0);
        let a = solve(&p, &g, &Thresholds::default()).unwrap();
        let b = solve(&p.clone().with_mode(CoeffMode::gauss_kronrod()), &g, &Thresholds::default()).unwrap();
        for (x, y) in a.errors.iter().zip(&b.errors) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn rates_are_tabulated_per_grading() {
        let base = ProblemSpec::example2(0.5, 1.0, 10, 1.0);
        let rows = convergence_study(&base, &[20, 40], &[1.0, 5.0], &Thresholds::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].rate_max.is_none() && rows[2].rate_max.is_none());
        assert!(rows[1].rate_max.is_some() && rows[3].rate_max.is_some());
        assert_eq!(rows[1].expected_max, 0.5);
        assert_eq!(rows[3].expected_max, 2.5);
        assert!(convergence_study(&base, &[20], &[1.0], &Thresholds::default()).is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = build_grid(6).unwrap();
        assert!(solve(&ProblemSpec::example2(0.5, 1.0, 10, 1.0), &g, &Thresholds::default()).is_err());
    }
}
