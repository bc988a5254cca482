//! Chebyshev–Gauss–Lobatto collocation on `[-1, 1]^2` with Dirichlet data.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Collocation grid and the interior Laplacian.
///
/// Interior unknowns are stored row-major: `U[i * m + j] = u(x_i, y_j)` for
/// interior indices `i, j` in `1..n-1`, `m = n - 2`. The 1D interior second
/// derivative `D2` is diagonalized once so that every shifted system
/// `(s I - Lap) U = R` costs four `m x m` products.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    n: usize,
    nodes: Vec<f64>,
    cc_weights: Vec<f64>,
    d2_interior: DMatrix<f64>,
    eigvals: Vec<f64>,
    vecs: DMatrix<f64>,
    vecs_inv: DMatrix<f64>,
}

/// First-derivative matrix on `x_i = cos(pi i / (n-1))`.
pub fn cheb_diff(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let big_n = n - 1;
    let x: Vec<f64> = (0..n).map(|i| cgl_node(i, big_n)).collect();
    let c: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            if i == 0 || i == big_n {
                2.0 * s
            } else {
                s
            }
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i != j {
                let v = c[i] / c[j] / (x[i] - x[j]);
                d[(i, j)] = v;
                row += v;
            }
        }
        // negative-sum trick for the diagonal
        d[(i, i)] = -row;
    }
    (x, d)
}

fn cgl_node(i: usize, big_n: usize) -> f64 {
    // sin form is exactly antisymmetric and gives an exact 0 at the center.
    (PI * (big_n as f64 - 2.0 * i as f64) / (2.0 * big_n as f64)).sin()
}

/// Clenshaw–Curtis weights for the CGL nodes.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let big_n = n - 1;
    let nf = big_n as f64;
    let mut w = vec![0.0; n];
    if big_n == 0 {
        return vec![2.0];
    }
    let theta = |i: usize| PI * i as f64 / nf;
    if big_n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
    } else {
        w[0] = 1.0 / (nf * nf);
    }
    w[big_n] = w[0];
    for (i, wi) in w.iter_mut().enumerate().take(big_n).skip(1) {
        let mut v = 1.0;
        for k in 1..=(big_n - 1) / 2 {
            let kf = k as f64;
            v -= 2.0 * (2.0 * kf * theta(i)).cos() / (4.0 * kf * kf - 1.0);
        }
        if big_n.is_multiple_of(2) {
            v -= (nf * theta(i)).cos() / (nf * nf - 1.0);
        }
        *wi = 2.0 * v / nf;
    }
    w
}

/// Builds the grid with `n >= 3` points per direction.
pub fn build_grid(n: usize) -> Result<SpatialGrid> {
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 collocation points, got {n}")));
    }
    let (nodes, d) = cheb_diff(n);
    let d2 = &d * &d;
    let m = n - 2;
    let d2i = d2.view((1, 1), (m, m)).into_owned();
    let (eigvals, vecs, vecs_inv) = diagonalize(&d2i)?;
    Ok(SpatialGrid {
        n,
        nodes,
        cc_weights: clenshaw_curtis(n),
        d2_interior: d2i,
        eigvals,
        vecs,
        vecs_inv,
    })
}

/// `A = V diag(l) V^{-1}` for a matrix with real distinct eigenvalues, via
/// the real Schur form and back substitution on the triangular factor.
fn diagonalize(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let m = a.nrows();
    let (q, t) = a.clone().schur().unpack();
    let scale = t.amax().max(1.0);
    for i in 1..m {
        if t[(i, i - 1)].abs() > 1e-12 * scale {
            return Err(Error::Singular("second-derivative operator has complex eigenvalues".into()));
        }
    }
    let lambda: Vec<f64> = (0..m).map(|i| t[(i, i)]).collect();
    let mut w = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        w[(k, k)] = 1.0;
        for i in (0..k).rev() {
            let mut s = 0.0;
            for j in i + 1..=k {
                s += t[(i, j)] * w[(j, k)];
            }
            let gap = t[(i, i)] - lambda[k];
            if gap.abs() <= 1e-13 * scale {
                return Err(Error::Singular("repeated eigenvalue in second-derivative operator".into()));
            }
            w[(i, k)] = -s / gap;
        }
    }
    let v = &q * &w;
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("eigenvector matrix is singular".into()))?;
    Ok((lambda, v, v_inv))
}

impl SpatialGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Interior points per direction.
    pub fn m(&self) -> usize {
        self.n - 2
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Interior node coordinates.
    pub fn interior(&self) -> &[f64] {
        &self.nodes[1..self.n - 1]
    }

    pub fn cc_weights(&self) -> &[f64] {
        &self.cc_weights
    }

    pub fn unknowns(&self) -> usize {
        self.m() * self.m()
    }

    /// Samples `g` on interior nodes in storage order.
    pub fn sample(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let xs = self.interior();
        let mut out = Vec::with_capacity(self.unknowns());
        for &x in xs {
            for &y in xs {
                out.push(g(x, y));
            }
        }
        out
    }

    /// Dense interior Laplacian `D2 (x) I + I (x) D2`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let m = self.m();
        let id = DMatrix::<f64>::identity(m, m);
        self.d2_interior.kronecker(&id) + id.kronecker(&self.d2_interior)
    }

    /// Applies the interior Laplacian to `u`.
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let m = self.m();
        let um = DMatrix::from_row_slice(m, m, u);
        let r = &self.d2_interior * &um + &um * self.d2_interior.transpose();
        row_major(&r)
    }

    /// Solves `(shift I - Lap) u = rhs` in place.
    pub fn solve_shifted(&self, shift: f64, rhs: &mut [f64]) -> Result<()> {
        let m = self.m();
        let r = DMatrix::from_row_slice(m, m, rhs);
        let mut rt = &self.vecs_inv * r * self.vecs_inv.transpose();
        for i in 0..m {
            for j in 0..m {
                let den = shift - self.eigvals[i] - self.eigvals[j];
                if !(den.abs() > 1e-14 * (shift.abs() + self.eigvals[i].abs() + self.eigvals[j].abs())) {
                    return Err(Error::Singular(format!("shifted operator is singular at shift {shift:e}")));
                }
                rt[(i, j)] /= den;
            }
        }
        let u = &self.vecs * rt * self.vecs.transpose();
        rhs.copy_from_slice(&row_major(&u));
        Ok(())
    }

    /// Clenshaw–Curtis L2 norm of an interior field (zero on the boundary).
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let m = self.m();
        let w = &self.cc_weights[1..self.n - 1];
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let v = u[i * m + j];
                s += w[i] * w[j] * v * v;
            }
        }
        s.sqrt()
    }

    /// Dense interior operator `shift I - Lap` (for checks and small problems).
    pub fn shifted_operator(&self, shift: f64) -> DMatrix<f64> {
        let n = self.unknowns();
        DMatrix::<f64>::identity(n, n) * shift - self.laplacian()
    }

    /// Eigenvalues of the interior 1D second-derivative matrix.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }
}

fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}
