//! Nonuniform time meshes.
//!
//! A [`TimeMesh`] stores the nodes `t_0 = 0 < t_1 < ... < t_N = T` together
//! with the steps `tau_j = t_j - t_{j-1}`. Steps are computed once at
//! construction and never recomputed, so every coefficient formula sees the
//! same floating-point value of `tau_j`.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    nodes: Vec<f64>,
    // steps[0] is unused padding so that steps[j] = tau_j.
    steps: Vec<f64>,
}

impl TimeMesh {
    /// Builds a mesh from explicit nodes. The first node must be 0 and the
    /// sequence strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain("a mesh needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Domain(format!("t_0 must be 0, got {}", nodes[0])));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("mesh nodes must be finite".into()));
        }
        let mut steps = Vec::with_capacity(nodes.len());
        steps.push(0.0);
        for w in nodes.windows(2) {
            let tau = w[1] - w[0];
            if tau <= 0.0 {
                return Err(Error::Domain(format!(
                    "mesh nodes must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
            steps.push(tau);
        }
        Ok(Self { nodes, steps })
    }

    /// Uniform mesh with `n` steps on `[0, horizon]`.
    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        build_graded_mesh(n, 1.0, horizon)
    }

    /// Number of steps N.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.len()]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `t_j`.
    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// `tau_j = t_j - t_{j-1}` for `1 <= j <= N`.
    #[inline]
    pub fn tau(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        self.steps[j]
    }

    /// Steps `tau_1..tau_N`.
    pub fn steps(&self) -> &[f64] {
        &self.steps[1..]
    }

    /// `tau_j / (t_k - t_{j-1})` for `1 <= j <= k-1 <= N-1`.
    pub fn ratio_theta(&self, j: usize, k: usize) -> Result<f64> {
        if j < 1 || j + 1 > k || k > self.len() {
            return Err(Error::Index(format!(
                "ratio_theta needs 1 <= j <= k-1 <= N-1, got j={j}, k={k}, N={}",
                self.len()
            )));
        }
        Ok(self.tau(j) / (self.t(k) - self.t(j - 1)))
    }

    /// One-column CSV with header `t`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t\n");
        for t in &self.nodes {
            let _ = writeln!(out, "{t:.16e}");
        }
        out
    }

    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "t" => {}
            _ => return Err(Error::Domain("mesh CSV must start with header `t`".into())),
        }
        let mut nodes = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Domain(e.to_string()))?;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            let t: f64 = s
                .parse()
                .map_err(|_| Error::Domain(format!("line {}: bad node `{s}`", lineno + 2)))?;
            nodes.push(t);
        }
        Self::from_nodes(nodes)
    }
}

/// Graded mesh `t_j = (j/N)^r T`.
pub fn build_graded_mesh(n: usize, r: f64, horizon: f64) -> Result<TimeMesh> {
    if n == 0 {
        return Err(Error::Domain("number of steps N must be positive".into()));
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::Domain(format!("grading parameter r must be >= 1, got {r}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon T must be positive, got {horizon}")));
    }
    let nf = n as f64;
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(0.0);
    for j in 1..n {
        let x = j as f64 / nf;
        let t = if r == 1.0 { x * horizon } else { x.powf(r) * horizon };
        nodes.push(t);
    }
    nodes.push(horizon);
    TimeMesh::from_nodes(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_mesh_nodes() {
        let m = build_graded_mesh(4, 1.0, 1.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.steps(), &[0.25; 4]);
    }

    #[test]
    fn quadratic_grading() {
        let m = build_graded_mesh(2, 2.0, 1.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn tiny_first_node() {
        let m = build_graded_mesh(3200, 5.0, 1.0).unwrap();
        // (1/3200)^5 = 1 / 3.3554432e17
        let expected = 1.0 / 3.3554432e17;
        assert!((m.t(1) - expected).abs() <= 2.0 * f64::EPSILON * expected);
        assert!((m.t(1) - 2.98e-18).abs() < 0.005e-18);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(build_graded_mesh(0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(build_graded_mesh(4, 0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(build_graded_mesh(4, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(build_graded_mesh(4, 1.0, -2.0), Err(Error::Domain(_))));
        assert!(TimeMesh::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeMesh::from_nodes(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn ratio_theta_examples() {
        let m = TimeMesh::uniform(4, 4.0).unwrap();
        assert_eq!(m.ratio_theta(1, 2).unwrap(), 0.5);
        assert_eq!(m.ratio_theta(3, 4).unwrap(), 0.5);
        assert!(m.ratio_theta(0, 2).is_err());
        assert!(m.ratio_theta(2, 2).is_err());
        assert!(m.ratio_theta(1, 5).is_err());

        // (1/100)^3 / 1
        let g = build_graded_mesh(100, 3.0, 1.0).unwrap();
        let th = g.ratio_theta(1, 100).unwrap();
        assert!((th - 1.0e-6).abs() < 1e-20);
    }

    #[test]
    fn csv_round_trip() {
        let m = build_graded_mesh(7, 2.5, 3.0).unwrap();
        let back = TimeMesh::from_csv(m.to_csv().as_bytes()).unwrap();
        assert_eq!(m, back);
        assert!(TimeMesh::from_csv("x\n0\n1\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn graded_mesh_invariants(n in 1usize..2000, r in 1.0f64..8.0, horizon in 1e-3f64..1e3) {
            let m = build_graded_mesh(n, r, horizon).unwrap();
            prop_assert_eq!(m.t(0), 0.0);
            prop_assert_eq!(m.horizon(), horizon);
            prop_assert!(m.steps().iter().all(|&s| s > 0.0));
            let total: f64 = m.steps().iter().sum();
            let tol = 4.0 * n as f64 * f64::EPSILON * horizon;
            prop_assert!((total - horizon).abs() <= tol);
            for k in 2..=n.min(50) {
                for j in 1..k {
                    let th = m.ratio_theta(j, k).unwrap();
                    prop_assert!(th > 0.0 && th < 1.0);
                }
            }
        }
    }
}
