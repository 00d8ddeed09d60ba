//! Critical-point finders for the energy: damped Newton and the proximal
//! fixed-point iteration, plus second-variation classification.

use crate::grid::{Field, Grid};
use crate::model::{energy_j, grad_j, hess_j, ModelParams};
use crate::{Error, Result};

const MAX_BACKTRACKS: usize = 30;

/// Degeneracy margin, scaled by the spectral scale of the Hessian.
const CLASSIFY_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    LocalMin,
    LocalMax,
    Saddle,
    Degenerate,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::LocalMin => "LocalMin",
            Classification::LocalMax => "LocalMax",
            Classification::Saddle => "Saddle",
            Classification::Degenerate => "Degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub u0: Field,
    pub residual_norm: f64,
    pub classification: Classification,
    pub min_eig_hess: f64,
    pub max_eig_hess: f64,
    pub iterations: usize,
}

/// Trace of energies along a descent run, one entry per iterate.
#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub energies: Vec<f64>,
    pub step_norms: Vec<f64>,
}

/// Classifies a point by the eigenvalue signs of `δ²J(u)`.
pub fn classify(params: &ModelParams, grid: &Grid, u: &Field) -> Result<Classification> {
    let h = hess_j(params, grid, u)?;
    let lo = h.min_eig(1e-10)?;
    let hi = h.max_eig(1e-10)?;
    Ok(classify_from_eigs(lo, hi))
}

pub fn classify_from_eigs(lo: f64, hi: f64) -> Classification {
    let margin = CLASSIFY_MARGIN * lo.abs().max(hi.abs()).max(1.0);
    if lo.abs() <= margin || hi.abs() <= margin {
        Classification::Degenerate
    } else if lo > 0.0 {
        Classification::LocalMin
    } else if hi < 0.0 {
        Classification::LocalMax
    } else {
        Classification::Saddle
    }
}

/// Smallest `K ≥ 0` making `δ²J(u) + K·I` positive semidefinite.
pub fn convexity_k(params: &ModelParams, grid: &Grid, u: &Field) -> Result<f64> {
    let lo = hess_j(params, grid, u)?.min_eig(1e-10)?;
    Ok((-lo).max(0.0))
}

fn critical_point(
    params: &ModelParams,
    grid: &Grid,
    u0: Field,
    iterations: usize,
) -> Result<CriticalPoint> {
    let residual_norm = grad_j(params, grid, &u0)?.norm();
    let h = hess_j(params, grid, &u0)?;
    let min_eig_hess = h.min_eig(1e-10)?;
    let max_eig_hess = h.max_eig(1e-10)?;
    Ok(CriticalPoint {
        u0,
        residual_norm,
        classification: classify_from_eigs(min_eig_hess, max_eig_hess),
        min_eig_hess,
        max_eig_hess,
        iterations,
    })
}

/// Damped Newton on `δJ(u) = 0` with backtracking on the gradient norm.
/// Falls back to a scaled gradient step when the Newton system is indefinite
/// or fails to reduce the residual.
pub fn newton(
    params: &ModelParams,
    grid: &Grid,
    u_init: &Field,
    tol: f64,
    maxit: usize,
) -> Result<CriticalPoint> {
    grid.check_len(u_init)?;
    let mut u = u_init.clone();
    let mut g = grad_j(params, grid, &u)?;
    if g.norm() <= tol {
        return critical_point(params, grid, u, 0);
    }
    for it in 0..maxit {
        let h = hess_j(params, grid, &u)?;
        let dense = h.to_dense();
        let step = dense
            .clone()
            .lu()
            .solve(&(-&g))
            .filter(|s| s.iter().all(|x| x.is_finite()));
        let newton_dir = step.unwrap_or_else(|| -&g);

        let gn = g.norm();
        // gradient fallback steps are scaled to the local curvature
        let grad_scale = 1.0 / h.max_eig(1e-8)?.abs().max(1.0);
        let candidates = [(newton_dir, 1.0), (-&g, grad_scale)];
        let mut accepted = false;
        for (dir, t0) in &candidates {
            let mut t = *t0;
            for _ in 0..MAX_BACKTRACKS {
                let trial = &u + t * dir;
                let gt = grad_j(params, grid, &trial)?;
                if gt.norm() < gn * (1.0 - 1e-4 * t) || gt.norm() <= tol {
                    u = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: it, residual: gn });
        }
        if g.norm() <= tol {
            return critical_point(params, grid, u, it + 1);
        }
    }
    Err(Error::NoConvergence { iterations: maxit, residual: g.norm() })
}

/// One proximal step: `argmin_u Ĵ(u, p)` via Newton on the strictly convex
/// subproblem `δJ(u) + K(u − p) = 0`.
pub fn prox_step(params: &ModelParams, grid: &Grid, p: &Field, tol: f64) -> Result<Field> {
    grid.check_len(p)?;
    let mut u = p.clone();
    let grad = |u: &Field| -> Result<Field> {
        Ok(grad_j(params, grid, u)? + params.k * (u - p))
    };
    let mut g = grad(&u)?;
    let maxit = 200;
    // the attainable residual floor scales with the gradient's magnitude
    let mut floor = 0.0f64;
    for it in 0..=maxit {
        if g.norm() <= tol.max(floor) {
            // convexity certificate at the solution
            let h = hess_j(params, grid, &u)?.add_diag(params.k);
            if h.min_eig(1e-10)? <= 0.0 {
                return Err(Error::NotConvex);
            }
            return Ok(u);
        }
        if it == maxit {
            break;
        }
        let h = hess_j(params, grid, &u)?.add_diag(params.k);
        let step = match h.solve_spd(&g, 1e-14) {
            Ok(s) => s,
            Err(Error::NotPositiveDefinite { .. }) => return Err(Error::NotConvex),
            Err(e) => return Err(e),
        };
        let gn = g.norm();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &u - t * &step;
            let gt = grad(&trial)?;
            if gt.norm() < gn || gt.norm() <= tol {
                u = trial;
                g = gt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // backtracking exhausted: the residual has hit the rounding
            // floor for this problem scale; retry the convergence test
            // once with that floor, then give up
            if floor > 0.0 || gn > tol * 1e3 {
                return Err(Error::NoConvergence { iterations: it, residual: gn });
            }
            floor = gn * (1.0 + 1e-12);
            continue;
        }
    }
    Err(Error::NoConvergence { iterations: maxit, residual: g.norm() })
}

/// Proximal fixed-point iteration `u_{k+1} = argmin_u Ĵ(u, u_k)`.
/// The energy trace is monotone: `Ĵ(u_{k+1}, u_k) ≤ Ĵ(u_k, u_k) = J(u_k)`
/// and `J(u_{k+1}) ≤ Ĵ(u_{k+1}, u_k)`.
pub fn prox_iterate(
    params: &ModelParams,
    grid: &Grid,
    p0: &Field,
    tol: f64,
    maxit: usize,
) -> Result<(CriticalPoint, DescentTrace)> {
    grid.check_len(p0)?;
    let mut p = p0.clone();
    let mut trace = DescentTrace {
        energies: vec![energy_j(params, grid, &p)?],
        step_norms: Vec::new(),
    };
    let inner_tol = (tol * 1e-3).max(1e-14);
    for it in 0..maxit {
        let u = prox_step(params, grid, &p, inner_tol)?;
        let step = (&u - &p).norm();
        trace.energies.push(energy_j(params, grid, &u)?);
        trace.step_norms.push(step);
        p = u;
        if step <= tol {
            let cp = critical_point(params, grid, p, it + 1)?;
            return Ok((cp, trace));
        }
    }
    Err(Error::NoConvergence {
        iterations: maxit,
        residual: *trace.step_norms.last().unwrap_or(&f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r1() -> (Grid, ModelParams) {
        let grid = build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: 3 }).unwrap();
        let params = ModelParams {
            gamma: 1.0,
            alpha: 1.0,
            beta: 1.0,
            k: 10.0,
            eps: 0.1,
            f: grid.zeros(),
            k12: None,
        };
        (grid, params)
    }

    fn r2() -> (Grid, ModelParams) {
        let (grid, mut params) = r1();
        params.f = grid.constant(0.5);
        (grid, params)
    }

    #[test]
    fn newton_trivial_and_r2() {
        let (grid, params) = r1();
        let cp = newton(&params, &grid, &grid.zeros(), 1e-10, 50).unwrap();
        assert_eq!(cp.iterations, 0);
        assert_eq!(cp.u0, grid.zeros());

        let (grid, params) = r2();
        let cp = newton(&params, &grid, &grid.zeros(), 1e-10, 10).unwrap();
        assert!(cp.residual_norm <= 1e-10);
        assert!(cp.iterations <= 10);
    }

    #[test]
    fn newton_iteration_cap() {
        let (grid, params) = r2();
        let far = grid.constant(50.0);
        match newton(&params, &grid, &far, 1e-10, 1) {
            Err(Error::NoConvergence { .. }) => {}
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn prox_step_examples() {
        let (grid, params) = r1();
        let u = prox_step(&params, &grid, &grid.zeros(), 1e-12).unwrap();
        assert!(u.norm() <= 1e-12);

        let (grid, params) = r2();
        let u = prox_step(&params, &grid, &grid.zeros(), 1e-10).unwrap();
        let res = crate::model::grad_j(&params, &grid, &u).unwrap() + params.k * &u;
        assert!(res.norm() <= 1e-10);

        // fixed-point property at a critical point
        let cp = newton(&params, &grid, &grid.zeros(), 1e-12, 50).unwrap();
        let back = prox_step(&params, &grid, &cp.u0, 1e-12).unwrap();
        assert!((back - &cp.u0).norm() <= 1e-10);
    }

    #[test]
    fn prox_iterate_descends() {
        let (grid, params) = r1();
        let (cp, trace) = prox_iterate(&params, &grid, &grid.zeros(), 1e-10, 100).unwrap();
        assert!(cp.residual_norm <= 1e-8);
        assert_eq!(trace.energies.len(), trace.step_norms.len() + 1);

        let (grid, params) = r2();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let p0 = Field::from_fn(grid.n, |_, _| rng.gen_range(-2.0..2.0));
            let (cp, trace) = prox_iterate(&params, &grid, &p0, 1e-9, 500).unwrap();
            for w in trace.energies.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "trace not monotone: {} -> {}", w[0], w[1]);
            }
            assert!(cp.residual_norm <= (params.k + 1.0) * 1e-9);
        }
    }

    #[test]
    fn classify_examples() {
        let (grid, params) = r1();
        assert_eq!(classify(&params, &grid, &grid.zeros()).unwrap(), Classification::LocalMin);

        let mut pmax = params.clone();
        pmax.beta = 40.0;
        assert_eq!(classify(&pmax, &grid, &grid.zeros()).unwrap(), Classification::LocalMax);

        let mut psad = params.clone();
        psad.beta = 10.0;
        assert_eq!(classify(&psad, &grid, &grid.zeros()).unwrap(), Classification::Saddle);
    }

    #[test]
    fn convexity_k_examples() {
        let (grid, params) = r1();
        assert_eq!(convexity_k(&params, &grid, &grid.zeros()).unwrap(), 0.0);

        let mut psad = params.clone();
        psad.beta = 10.0;
        let k = convexity_k(&psad, &grid, &grid.zeros()).unwrap();
        assert!((k - (20.0 - (32.0 - 16.0 * 2f64.sqrt()))).abs() < 1e-9);

        let mut pbig = params.clone();
        pbig.beta = 100.0;
        let k = convexity_k(&pbig, &grid, &grid.zeros()).unwrap();
        assert!((k - (200.0 - (32.0 - 16.0 * 2f64.sqrt()))).abs() < 1e-9);
    }

    #[test]
    fn prox_fixed_points_are_critical() {
        let (grid, params) = r2();
        let (cp, _) = prox_iterate(&params, &grid, &grid.constant(1.0), 1e-10, 500).unwrap();
        let g = grad_j(&params, &grid, &cp.u0).unwrap();
        assert!(g.norm() <= (params.k + 1.0) * 1e-10);
    }
}
