//! Symmetric-operator algebra: apply, diagonal shifts, SPD solves, extremal
//! eigenvalues, matrix-sense inequalities and operator square roots.
//!
//! Operator inequalities like `A > c` are tested as bounds on the smallest
//! eigenvalue with a `1e-10` margin. Everything is dense below
//! `DENSE_THRESHOLD` unknowns; larger operators fall back to conjugate
//! gradients and Lanczos.

use nalgebra::{DMatrix, DVector};

use crate::grid::{Field, Grid};
use crate::{Error, Result};

/// Above this size, solves use CG and eigenvalues use Lanczos.
pub const DENSE_THRESHOLD: usize = 2000;

/// Margin used by [`SymOp::matrix_gt`].
pub const MATRIX_GT_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone)]
enum OpKind {
    /// `−γ∇²` on a grid, `(2d+1)`-point stencil, Dirichlet truncation.
    Stencil { grid: Grid, gamma: f64 },
    /// Explicit dense symmetric matrix (operator square roots land here).
    Dense(DMatrix<f64>),
    /// Pure diagonal operator.
    Zero,
}

/// A symmetric linear operator on fields, with an additive pointwise
/// diagonal term: `x ↦ base(x) + diag·x`.
#[derive(Debug, Clone)]
pub struct SymOp {
    n: usize,
    kind: OpKind,
    diag: DVector<f64>,
}

impl SymOp {
    pub(crate) fn neg_laplacian(grid: Grid, gamma: f64) -> Self {
        SymOp { n: grid.n, kind: OpKind::Stencil { grid, gamma }, diag: DVector::zeros(grid.n) }
    }

    /// Diagonal operator `diag(w)`.
    pub fn diagonal(w: Field) -> Self {
        SymOp { n: w.len(), kind: OpKind::Zero, diag: w }
    }

    /// Scalar multiple of the identity.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self::diagonal(DVector::from_element(n, c))
    }

    /// Wraps a dense symmetric matrix (symmetry is the caller's contract).
    pub fn from_dense(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        SymOp { n, kind: OpKind::Dense(m), diag: DVector::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn check_len(&self, x: &Field) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    /// `y = Ax`.
    pub fn apply(&self, x: &Field) -> Result<Field> {
        self.check_len(x)?;
        let mut y = match &self.kind {
            OpKind::Zero => Field::zeros(self.n),
            OpKind::Dense(m) => m * x,
            OpKind::Stencil { grid, gamma } => {
                let c = gamma / (grid.h * grid.h);
                let d = grid.spec.dimension;
                let mut y = Field::zeros(self.n);
                for i in 0..self.n {
                    let mut acc = 2.0 * d as f64 * x[i];
                    for axis in 0..d {
                        if let Some(j) = grid.neighbor(i, axis, 1) {
                            acc -= x[j];
                        }
                        if let Some(j) = grid.neighbor(i, axis, -1) {
                            acc -= x[j];
                        }
                    }
                    y[i] = c * acc;
                }
                y
            }
        };
        for i in 0..self.n {
            y[i] += self.diag[i] * x[i];
        }
        Ok(y)
    }

    /// `x ↦ Ax + w·x` pointwise.
    pub fn add_diag_field(&self, w: &Field) -> Result<SymOp> {
        self.check_len(w)?;
        let mut out = self.clone();
        out.diag += w;
        Ok(out)
    }

    /// `A + c·I`.
    pub fn add_diag(&self, c: f64) -> SymOp {
        let mut out = self.clone();
        out.diag.add_scalar_mut(c);
        out
    }

    /// Dense assembly (used by factorizations and eigensolvers).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = match &self.kind {
            OpKind::Zero => DMatrix::zeros(self.n, self.n),
            OpKind::Dense(d) => d.clone(),
            OpKind::Stencil { .. } => {
                let mut base = self.clone();
                base.diag = DVector::zeros(self.n);
                let mut m = DMatrix::zeros(self.n, self.n);
                let mut e = Field::zeros(self.n);
                for j in 0..self.n {
                    e[j] = 1.0;
                    m.set_column(j, &base.apply(&e).expect("length verified"));
                    e[j] = 0.0;
                }
                m
            }
        };
        for i in 0..self.n {
            m[(i, i)] += self.diag[i];
        }
        m
    }

    /// Solves `Ax = b` for symmetric positive definite `A` to relative
    /// residual `tol` (dense Cholesky below [`DENSE_THRESHOLD`], CG above).
    pub fn solve_spd(&self, b: &Field, tol: f64) -> Result<Field> {
        self.check_len(b)?;
        if b.norm() == 0.0 {
            return Ok(Field::zeros(self.n));
        }
        if self.n <= DENSE_THRESHOLD {
            let chol = self.to_dense().cholesky().ok_or_else(|| {
                let min_eig = self.min_eig(1e-10).unwrap_or(f64::NAN);
                Error::NotPositiveDefinite { min_eig }
            })?;
            let x = chol.solve(b);
            let r = (self.apply(&x)? - b).norm() / b.norm();
            if r > tol.max(1e-12) * 1e3 {
                return Err(Error::NoConvergence { iterations: 0, residual: r });
            }
            Ok(x)
        } else {
            self.solve_cg(b, tol)
        }
    }

    fn solve_cg(&self, b: &Field, tol: f64) -> Result<Field> {
        let mut x = Field::zeros(self.n);
        let mut r = b.clone();
        let mut p = r.clone();
        let bnorm = b.norm();
        let mut rs = r.dot(&r);
        let maxit = 20 * self.n;
        for it in 0..maxit {
            if rs.sqrt() <= tol * bnorm {
                return Ok(x);
            }
            let ap = self.apply(&p)?;
            let pap = p.dot(&ap);
            if pap <= 0.0 {
                return Err(Error::NotPositiveDefinite { min_eig: pap / p.dot(&p) });
            }
            let alpha = rs / pap;
            x += alpha * &p;
            r -= alpha * ap;
            let rs_new = r.dot(&r);
            p = &r + (rs_new / rs) * p;
            rs = rs_new;
            if it + 1 == maxit {
                return Err(Error::NoConvergence { iterations: maxit, residual: rs.sqrt() / bnorm });
            }
        }
        Ok(x)
    }

    fn dense_eigenvalues(&self) -> Vec<f64> {
        let eig = self.to_dense().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    /// Smallest eigenvalue.
    pub fn min_eig(&self, tol: f64) -> Result<f64> {
        self.extremal_eig(tol, false)
    }

    /// Largest eigenvalue.
    pub fn max_eig(&self, tol: f64) -> Result<f64> {
        self.extremal_eig(tol, true)
    }

    fn extremal_eig(&self, tol: f64, largest: bool) -> Result<f64> {
        if self.n <= DENSE_THRESHOLD {
            let vals = self.dense_eigenvalues();
            Ok(if largest { *vals.last().unwrap() } else { vals[0] })
        } else {
            lanczos_extremal(self, tol, largest)
        }
    }

    /// Matrix-sense strict inequality `A > c·I`: smallest eigenvalue must
    /// exceed `c` by [`MATRIX_GT_MARGIN`].
    pub fn matrix_gt(&self, c: f64) -> Result<bool> {
        Ok(self.min_eig(1e-10)? > c + MATRIX_GT_MARGIN)
    }

    /// Symmetric square root via dense eigendecomposition. Eigenvalues within
    /// `1e-12` of zero (relative to the spectral scale) are clamped to zero.
    pub fn sqrt_spd(&self) -> Result<SymOp> {
        let eig = self.to_dense().symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < -1e-12 * scale {
                return Err(Error::NotPositiveSemidefinite { min_eig: *v });
            }
            *v = v.max(0.0).sqrt();
        }
        let q = eig.eigenvectors;
        let root = &q * DMatrix::from_diagonal(&vals) * q.transpose();
        Ok(SymOp::from_dense(root))
    }
}

/// Lanczos with full reorthogonalization for one extremal eigenvalue.
fn lanczos_extremal(a: &SymOp, tol: f64, largest: bool) -> Result<f64> {
    let n = a.dim();
    let m = 300.min(n);
    let mut vs: Vec<Field> = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);
    // deterministic pseudo-random start
    let mut q = Field::from_fn(n, |i, _| ((i * 2654435761 + 12345) % 1000003) as f64 / 1000003.0 - 0.5);
    q /= q.norm();
    let mut prev = Field::zeros(n);
    let mut beta = 0.0;
    let mut last = f64::NAN;
    for k in 0..m {
        let mut w = a.apply(&q)?;
        let alpha = q.dot(&w);
        w -= alpha * &q;
        if k > 0 {
            w -= beta * &prev;
        }
        for v in &vs {
            let c = v.dot(&w);
            w -= c * v;
        }
        vs.push(q.clone());
        alphas.push(alpha);
        let tri = tridiag(&alphas, &betas);
        let vals = tri.symmetric_eigen().eigenvalues;
        let cur = if largest {
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let scale = vals.iter().fold(0.0f64, |s, &v| s.max(v.abs())).max(1.0);
        if k > 5 && (cur - last).abs() <= tol * scale {
            return Ok(cur);
        }
        last = cur;
        beta = w.norm();
        // breakdown or full Krylov space: tridiagonal spectrum is exact
        if beta < 1e-12 * scale || k + 1 == m {
            return Ok(cur);
        }
        betas.push(beta);
        prev = q;
        q = w / beta;
    }
    Err(Error::NoConvergence { iterations: m, residual: f64::NAN })
}

fn tridiag(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}
