//! The Ginzburg-Landau energy, its proximal augmentation, gradient and
//! Hessian on a grid.
//!
//! The gradient term `γ/2 ∫ ∇u·∇u` is evaluated through the quadratic form
//! `½⟨Lu,u⟩` of the Dirichlet stencil operator, so `grad_J` and `hess_J` are
//! exactly its derivatives with respect to the discrete L² inner product.

use crate::grid::{Field, Grid};
use crate::linalg::SymOp;
use crate::{Error, Result};

/// Model parameters. `f` is a nodal field sampled on the grid;
/// `k12` is only consulted by the tensor dual formulation.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub eps: f64,
    pub f: Field,
    pub k12: Option<f64>,
}

impl ModelParams {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("K", self.k),
            ("eps", self.eps),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        grid.check_len(&self.f)?;
        if self.f.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("f must be finite".into()));
        }
        Ok(())
    }

    /// The stencil operator `L = −γ∇²` for these parameters.
    pub fn laplacian(&self, grid: &Grid) -> SymOp {
        SymOp::neg_laplacian(*grid, self.gamma)
    }
}

/// `J(u) = ½⟨Lu,u⟩ + α/2 ∫ (u²−β)² − ⟨u,f⟩`.
pub fn energy_j(params: &ModelParams, grid: &Grid, u: &Field) -> Result<f64> {
    grid.check_len(u)?;
    let l = params.laplacian(grid);
    let lu = l.apply(u)?;
    let quad = 0.5 * grid.inner(&lu, u)?;
    let well = u.map(|v| (v * v - params.beta) * (v * v - params.beta));
    let quartic = 0.5 * params.alpha * grid.integrate(&well)?;
    let force = grid.inner(u, &params.f)?;
    Ok(quad + quartic - force)
}

/// `Ĵ(u,p) = J(u) + K/2 ∫ (u−p)²`; satisfies `Ĵ(u,u) = J(u)`.
pub fn energy_jhat(params: &ModelParams, grid: &Grid, u: &Field, p: &Field) -> Result<f64> {
    grid.check_len(p)?;
    let diff = u - p;
    let prox = 0.5 * params.k * grid.inner(&diff, &diff)?;
    Ok(energy_j(params, grid, u)? + prox)
}

/// `δJ(u) = Lu + 2α(u²−β)u − f` pointwise.
pub fn grad_j(params: &ModelParams, grid: &Grid, u: &Field) -> Result<Field> {
    grid.check_len(u)?;
    let l = params.laplacian(grid);
    let mut g = l.apply(u)?;
    for i in 0..grid.n {
        g[i] += 2.0 * params.alpha * (u[i] * u[i] - params.beta) * u[i] - params.f[i];
    }
    Ok(g)
}

/// `δ²J(u) = L + diag(6αu² − 2αβ)`.
pub fn hess_j(params: &ModelParams, grid: &Grid, u: &Field) -> Result<SymOp> {
    grid.check_len(u)?;
    let l = params.laplacian(grid);
    let w = u.map(|v| 6.0 * params.alpha * v * v - 2.0 * params.alpha * params.beta);
    l.add_diag_field(&w)
}
