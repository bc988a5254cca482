//! Subcommand implementations.

use fracstep::l2core::{coeff_last_gauss_kronrod, theta_and_d};
use fracstep::soefast::{fast_coeff_pair, SOE_CHECK_POINTS};
use fracstep::solver::{convergence_rows, solve_with_observer};
use fracstep::{
    build_graded_mesh, build_grid, build_soe, coeff_last, coeff_pair, fast_l2_caputo, gamma, l2_caputo, CoeffMode,
    FastHistoryState, Scheme, SeriesView, SolveReport, Thresholds, TimeMesh,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Example, RunSettings};
use crate::output::{num, Outputs};
use crate::CliError;

fn flag(ok: bool) -> String {
    if ok { "1" } else { "0" }.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn mesh_of(s: &RunSettings) -> Result<TimeMesh, CliError> {
    Ok(build_graded_mesh(s.first_steps(), s.first_grading(), s.horizon)?)
}

pub fn coeffs(s: &RunSettings, k: Option<usize>, out: &mut Outputs) -> Result<(), CliError> {
    let mesh = mesh_of(s)?;
    let k = k.unwrap_or(mesh.len());
    if k < 2 || k > mesh.len() {
        return Err(CliError::Config(format!("k must satisfy 2 <= k <= N = {}, got {k}", mesh.len())));
    }
    let mut rows = Vec::with_capacity(k);
    for j in 1..k {
        let p = coeff_pair(&mesh, j, k, s.alpha, &s.thresholds, s.mode)?;
        let (theta, _) = theta_and_d(&mesh, j, k);
        rows.push(vec![
            "history".into(),
            j.to_string(),
            k.to_string(),
            num(theta),
            num(p.a),
            num(p.c_tilde),
            flag(p.a < 0.0 && p.c_tilde > 0.0),
        ]);
    }
    let last = match s.mode {
        CoeffMode::GaussKronrod(tol) => coeff_last_gauss_kronrod(&mesh, k, s.alpha, &tol)?,
        _ => coeff_last(&mesh, k, s.alpha)?,
    };
    rows.push(vec![
        "last".into(),
        k.to_string(),
        k.to_string(),
        String::new(),
        num(last.a_last),
        num(last.c_last),
        flag(last.a_last > 0.0 && last.c_last > 0.0),
    ]);
    out.csv("coeffs.csv", &["kind", "j", "k", "theta", "a", "c", "sign_ok"], &rows)?;

    if s.scheme == Scheme::Fast {
        let t_soe = s.soe.t_soe.unwrap_or(s.horizon);
        let soe = build_soe(s.alpha, s.soe.eps, mesh.tau(2), t_soe)?;
        let mut fast = Vec::with_capacity(soe.len());
        for (l, (&node, &w)) in soe.nodes().iter().zip(soe.weights()).enumerate() {
            let p = fast_coeff_pair(&mesh, k, node, &s.thresholds, s.mode)?;
            fast.push(vec![(l + 1).to_string(), num(node), num(w), num(p.a), num(p.c_tilde)]);
        }
        out.csv("fast_coeffs.csv", &["l", "node", "weight", "a", "c_tilde"], &fast)?;
    }
    Ok(())
}

pub fn derivative(s: &RunSettings, power: Option<f64>, out: &mut Outputs) -> Result<(), CliError> {
    let p = power.unwrap_or(s.alpha);
    if !(p >= 0.0 && p.is_finite()) {
        return Err(CliError::Config(format!("power must be non-negative, got {p}")));
    }
    let mesh = mesh_of(s)?;
    let u: Vec<f64> = mesh.nodes().iter().map(|&t| if p == 0.0 { 1.0 } else { t.powf(p) }).collect();
    let exact = |t: f64| {
        if p == 0.0 {
            0.0
        } else {
            gamma(1.0 + p) / gamma(1.0 + p - s.alpha) * t.powf(p - s.alpha)
        }
    };
    let mut rows = Vec::with_capacity(mesh.len());
    let mut fast = match s.scheme {
        Scheme::Fast if mesh.len() >= 2 => {
            let soe = build_soe(s.alpha, s.soe.eps, mesh.tau(2), s.soe.t_soe.unwrap_or(s.horizon))?;
            let st = FastHistoryState::new(&soe, 1);
            Some((soe, st))
        }
        _ => None,
    };
    for k in 1..=mesh.len() {
        let value = match fast.take() {
            Some((soe, st)) => {
                let tail = if k == 1 { &u[0..2] } else { &u[k - 2..=k] };
                let (v, st) = fast_l2_caputo(st, tail, &mesh, s.alpha, k, &soe, &s.thresholds, s.mode)?;
                fast = Some((soe, st));
                v
            }
            None => l2_caputo(SeriesView::new(&mesh, &u)?, s.alpha, k, &s.thresholds, s.mode)?,
        };
        let t = mesh.t(k);
        let e = exact(t);
        rows.push(vec![k.to_string(), num(t), num(value), num(e), num((value - e).abs())]);
    }
    out.csv("derivative.csv", &["k", "t_k", "value", "exact", "error"], &rows)?;
    Ok(())
}

pub fn soe_check(s: &RunSettings, dt: Option<f64>, out: &mut Outputs) -> Result<(), CliError> {
    let dt = match dt {
        Some(d) => d,
        None => {
            let mesh = mesh_of(s)?;
            if mesh.len() < 2 {
                return Err(CliError::Config("soe-check needs N >= 2 or --dt".into()));
            }
            mesh.tau(2)
        }
    };
    let t_soe = s.soe.t_soe.unwrap_or(s.horizon);
    let soe = build_soe(s.alpha, s.soe.eps, dt, t_soe)?;
    let nodes: Vec<Vec<String>> = soe
        .nodes()
        .iter()
        .zip(soe.weights())
        .enumerate()
        .map(|(l, (&n, &w))| vec![(l + 1).to_string(), num(n), num(w)])
        .collect();
    out.csv("soe_nodes.csv", &["l", "node", "weight"], &nodes)?;
    let (lo, hi) = (dt.ln(), t_soe.ln());
    let mut worst: f64 = 0.0;
    let check: Vec<Vec<String>> = (0..SOE_CHECK_POINTS)
        .map(|i| {
            let t = if i + 1 == SOE_CHECK_POINTS {
                t_soe
            } else if i == 0 {
                dt
            } else {
                (lo + (hi - lo) * i as f64 / (SOE_CHECK_POINTS - 1) as f64).exp()
            };
            let exact = t.powf(-s.alpha);
            let approx = soe.eval(t);
            let rel = ((approx - exact) / exact).abs();
            worst = worst.max(rel);
            vec![num(t), num(approx), num(exact), num(rel)]
        })
        .collect();
    out.csv("soe_check.csv", &["t", "approx", "exact", "rel_err"], &check)?;
    out.csv(
        "soe_summary.csv",
        &["alpha", "eps", "dt", "T_soe", "nodes", "max_rel_err", "pass"],
        &[vec![
            num(s.alpha),
            num(s.soe.eps),
            num(dt),
            num(t_soe),
            soe.len().to_string(),
            num(worst),
            flag(worst <= s.soe.eps),
        ]],
    )?;
    Ok(())
}

fn summary_row(r: &SolveReport, timing: bool) -> Vec<String> {
    let mut row = vec![
        r.label.clone(),
        r.scheme.name().into(),
        r.mode.into(),
        num(r.alpha),
        num(r.horizon),
        r.steps.to_string(),
        num(r.grading),
        r.space_n.to_string(),
        r.soe_nodes.map(|n| n.to_string()).unwrap_or_default(),
        opt(r.err_max),
        opt(r.err_t),
    ];
    if timing {
        row.push(num(r.wall_seconds));
        row.push(num(r.setup_seconds));
    }
    row
}

const SUMMARY_HEADER: [&str; 13] = [
    "example",
    "scheme",
    "mode",
    "alpha",
    "T",
    "N",
    "r",
    "space_n",
    "soe_nodes",
    "err_max",
    "err_T",
    "seconds",
    "setup_seconds",
];

fn summary_header(timing: bool) -> &'static [&'static str] {
    if timing {
        &SUMMARY_HEADER
    } else {
        &SUMMARY_HEADER[..11]
    }
}

pub fn solve(s: &RunSettings, timing: bool, out: &mut Outputs) -> Result<(), CliError> {
    let problem = s.problem(s.first_steps(), s.first_grading());
    let grid = build_grid(s.space_n)?;
    let rep = fracstep::solve(&problem, &grid, &s.thresholds)?;
    let rows: Vec<Vec<String>> = (0..rep.times.len())
        .map(|k| {
            vec![
                k.to_string(),
                num(rep.times[k]),
                rep.errors.get(k).copied().map(num).unwrap_or_default(),
                num(rep.norms[k]),
            ]
        })
        .collect();
    out.csv("report.csv", &["k", "t_k", "err_tk", "norm_uk"], &rows)?;
    out.csv("summary.csv", summary_header(timing), &[summary_row(&rep, timing)])?;
    Ok(())
}

/// Worker count for sweeps: `FRACSTEP_THREADS` if set, else rayon's default.
fn sweep_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("FRACSTEP_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("FRACSTEP_THREADS must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}

fn require_exact(s: &RunSettings, what: &str) -> Result<(), CliError> {
    if s.example == Example::Custom {
        return Err(CliError::Config(format!("{what} needs an exact solution; use ex1 or ex2")));
    }
    Ok(())
}

pub fn convergence(s: &RunSettings, timing: bool, out: &mut Outputs) -> Result<(), CliError> {
    require_exact(s, "convergence")?;
    if s.steps.len() < 2 {
        return Err(CliError::Config("convergence needs at least two values of N".into()));
    }
    let grid = build_grid(s.space_n)?;
    let jobs: Vec<(f64, usize)> = s.gradings.iter().flat_map(|&r| s.steps.iter().map(move |&n| (r, n))).collect();
    let pool = sweep_pool()?;
    let reports: Vec<SolveReport> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, n)| fracstep::solve(&s.problem(n, r), &grid, &s.thresholds))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let table = convergence_rows(&reports)?;
    let mut header = vec!["r", "N", "err_max", "rate_max", "expected_max", "err_T", "rate_T", "expected_T"];
    if timing {
        header.push("seconds");
    }
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|row| {
            let mut v = vec![
                num(row.grading),
                row.steps.to_string(),
                num(row.err_max),
                opt(row.rate_max),
                num(row.expected_max),
                num(row.err_t),
                opt(row.rate_t),
                num(row.expected_t),
            ];
            if timing {
                v.push(num(row.seconds));
            }
            v
        })
        .collect();
    out.csv("convergence.csv", &header, &rows)?;
    Ok(())
}

pub fn compare_modes(s: &RunSettings, timing: bool, out: &mut Outputs) -> Result<(), CliError> {
    require_exact(s, "compare-modes")?;
    let grid = build_grid(s.space_n)?;
    let base = s.problem(s.first_steps(), s.first_grading());
    let gk = CoeffMode::GaussKronrod(s.gk);
    let variants = [
        (Scheme::Standard, CoeffMode::Tcte),
        (Scheme::Standard, gk),
        (Scheme::Fast, CoeffMode::Tcte),
        (Scheme::Fast, gk),
    ];
    let mut reports = Vec::with_capacity(variants.len());
    for (scheme, mode) in variants {
        let p = base.clone().with_scheme(scheme).with_mode(mode);
        reports.push(solve_with_observer(&p, &grid, &s.thresholds, |_, _, _| {})?);
    }
    let n = reports[0].errors.len();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|k| {
            let e: Vec<f64> = reports.iter().map(|r| r.errors[k]).collect();
            vec![
                k.to_string(),
                num(reports[0].times[k]),
                num(e[0]),
                num(e[1]),
                num(e[2]),
                num(e[3]),
                num((e[1] - e[0]).abs()),
                num((e[3] - e[2]).abs()),
            ]
        })
        .collect();
    out.csv(
        "compare.csv",
        &["k", "t_k", "err_std_tcte", "err_std_gk", "err_fast_tcte", "err_fast_gk", "diff_std", "diff_fast"],
        &rows,
    )?;
    let summary: Vec<Vec<String>> = reports.iter().map(|r| summary_row(r, timing)).collect();
    out.csv("modes.csv", summary_header(timing), &summary)?;
    Ok(())
}

struct CheckOutcome {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn self_test(s: &RunSettings, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thr = Thresholds::default();
    let mut checks = Vec::new();

    // quadratics on random graded meshes
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let n = rng.gen_range(3..=200);
        let alpha = rng.gen_range(0.05..0.95);
        let r = rng.gen_range(1.0..(3.0 - alpha) / alpha);
        let mesh = build_graded_mesh(n, r, rng.gen_range(0.5..4.0))?;
        let u: Vec<f64> = mesh.nodes().iter().map(|t| t * t).collect();
        for k in 2..=n {
            let v = l2_caputo(SeriesView::new(&mesh, &u)?, alpha, k, &thr, CoeffMode::Tcte)?;
            worst = worst.max(rel(v, 2.0 * mesh.t(k).powf(2.0 - alpha) / gamma(3.0 - alpha)));
        }
    }
    checks.push(CheckOutcome {
        name: "quadratic_exactness",
        ok: worst <= 1e-11,
        detail: format!("worst relative error {worst:.3e}"),
    });

    // TCTE against quadrature on random pairs
    let alpha = rng.gen_range(0.1..0.9);
    let mesh = build_graded_mesh(400, (3.0 - alpha) / alpha, 1.0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(2..=400);
        let j = rng.gen_range(1..k);
        let p = coeff_pair(&mesh, j, k, alpha, &thr, CoeffMode::Tcte)?;
        let g = coeff_pair(&mesh, j, k, alpha, &thr, CoeffMode::GaussKronrod(s.gk))?;
        worst = worst.max(rel(p.a, g.a)).max(rel(p.c_tilde, g.c_tilde));
    }
    checks.push(CheckOutcome {
        name: "tcte_vs_quadrature",
        ok: worst <= 1e-10,
        detail: format!("alpha {alpha:.4}, worst relative difference {worst:.3e}"),
    });

    // exponential sum contract
    let alpha = rng.gen_range(0.1..0.9);
    let dt = 10f64.powf(rng.gen_range(-8.0..-2.0));
    let soe = build_soe(alpha, 1e-10, dt, 1.0)?;
    let err = soe.sampled_max_rel_error(SOE_CHECK_POINTS);
    let positive = soe.nodes().iter().chain(soe.weights()).all(|&x| x > 0.0);
    checks.push(CheckOutcome {
        name: "soe_contract",
        ok: err <= 1e-10 && positive,
        detail: format!("alpha {alpha:.4}, dt {dt:.3e}, {} terms, error {err:.3e}", soe.len()),
    });

    // fast and standard solutions agree
    let alpha = rng.gen_range(0.2..0.8);
    let grid = build_grid(5)?;
    let p = fracstep::ProblemSpec::example2(alpha, 1.0, 300, (3.0 - alpha) / alpha);
    let mut sols = Vec::new();
    solve_with_observer(&p, &grid, &thr, |_, _, u| sols.push(u.to_vec()))?;
    let mut diff: f64 = 0.0;
    solve_with_observer(&p.clone().with_scheme(Scheme::Fast), &grid, &thr, |k, _, u| {
        let d: Vec<f64> = u.iter().zip(&sols[k]).map(|(a, b)| a - b).collect();
        diff = diff.max(grid.l2_norm(&d));
    })?;
    checks.push(CheckOutcome {
        name: "fast_vs_standard",
        ok: diff <= 1e-10,
        detail: format!("alpha {alpha:.4}, max difference {diff:.3e}"),
    });

    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.into(), if c.ok { "pass" } else { "fail" }.into(), c.detail.clone()])
        .collect();
    out.csv("selftest.csv", &["check", "status", "detail"], &rows)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.ok).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(failed.join(", ")))
    }
}
