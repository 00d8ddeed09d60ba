//! The proximal dual functional `J*(v*, v₀*, p)` and its verification
//! machinery: dual triple construction, `B*` membership, the conjugates
//! `G*`/`F*`, analytic dual gradients, the nested functionals `J₃*`, `J₅*`
//! and `J₈*`, curvature-formula checks, and the naive-dual diagnostic that
//! motivates the proximal term in the first place.
//!
//! Throughout, `A = L + diag(2v₀*) + (K+ε)I` and `z = A⁻¹(v* + Kp)`; the
//! dual stationarity system is
//! `(v*−f)/ε = z`, `z² − v₀*/α − β = 0`, `p = z`.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, Grid};
use crate::linalg::SymOp;
use crate::model::{energy_j, grad_j, hess_j, ModelParams};
use crate::primal::{classify_from_eigs, Classification};
use crate::{Error, Result};

/// Theorem-1 dual variables.
#[derive(Debug, Clone)]
pub struct DualTriple {
    pub vstar: Field,
    pub v0star: Field,
    pub p: Field,
}

/// A closed ball in field space.
#[derive(Debug, Clone)]
pub struct BallSpec {
    pub center: Field,
    pub radius: f64,
}

impl BallSpec {
    /// Default local radius `0.25·(1 + ‖center‖₂)`.
    pub fn around(center: Field) -> Self {
        let radius = 0.25 * (1.0 + center.norm());
        BallSpec { center, radius }
    }

    fn project(&self, p: &Field) -> Field {
        let d = p - &self.center;
        let n = d.norm();
        if n <= self.radius {
            p.clone()
        } else {
            &self.center + (self.radius / n) * d
        }
    }
}

/// `v̂₀* = α(u₀²−β)`, `v̂* = εu₀+f`, `p̂ = u₀`.
pub fn build_dual_triple(params: &ModelParams, grid: &Grid, u0: &Field) -> Result<DualTriple> {
    grid.check_len(u0)?;
    let v0star = u0.map(|v| params.alpha * (v * v - params.beta));
    let vstar = params.eps * u0 + &params.f;
    Ok(DualTriple { vstar, v0star, p: u0.clone() })
}

/// The operator `A = L + diag(2v₀*) + (K+ε)I` behind `G*`.
pub fn bstar_operator(params: &ModelParams, grid: &Grid, v0star: &Field) -> Result<SymOp> {
    let l = params.laplacian(grid);
    Ok(l.add_diag_field(&(2.0 * v0star))?.add_diag(params.k + params.eps))
}

/// `B* = {v₀* : A > K/2}` in the matrix sense.
pub fn in_bstar(params: &ModelParams, grid: &Grid, v0star: &Field) -> Result<bool> {
    bstar_operator(params, grid, v0star)?.matrix_gt(params.k / 2.0)
}

/// `G*(v*,v₀*,p) = ½⟨A⁻¹w,w⟩ + 1/(2α)∫(v₀*)² + β∫v₀*` with `w = v*+Kp`.
pub fn eval_gstar(params: &ModelParams, grid: &Grid, t: &DualTriple) -> Result<f64> {
    if !in_bstar(params, grid, &t.v0star)? {
        return Err(Error::NotInBstar);
    }
    let a = bstar_operator(params, grid, &t.v0star)?;
    let w = &t.vstar + params.k * &t.p;
    let z = a.solve_spd(&w, 1e-13)?;
    let quad = 0.5 * grid.inner(&z, &w)?;
    let sq = t.v0star.map(|v| v * v);
    Ok(quad + grid.integrate(&sq)? / (2.0 * params.alpha) + params.beta * grid.integrate(&t.v0star)?)
}

/// `F*(v*) = 1/(2ε) ∫ (v*−f)²`.
pub fn eval_fstar(params: &ModelParams, grid: &Grid, vstar: &Field) -> Result<f64> {
    grid.check_len(vstar)?;
    let d = vstar - &params.f;
    Ok(grid.inner(&d, &d)? / (2.0 * params.eps))
}

/// `H(p) = K/2 ∫ p²`.
pub fn eval_h(params: &ModelParams, grid: &Grid, p: &Field) -> Result<f64> {
    Ok(0.5 * params.k * grid.inner(p, p)?)
}

/// `J*(v*,v₀*,p) = −G* + F* + H`.
pub fn eval_jstar(params: &ModelParams, grid: &Grid, t: &DualTriple) -> Result<f64> {
    Ok(-eval_gstar(params, grid, t)? + eval_fstar(params, grid, &t.vstar)? + eval_h(params, grid, &t.p)?)
}

/// Analytic L²-gradients of `J*` in `(v*, v₀*, p)`.
pub fn grad_jstar(params: &ModelParams, grid: &Grid, t: &DualTriple) -> Result<(Field, Field, Field)> {
    if !in_bstar(params, grid, &t.v0star)? {
        return Err(Error::NotInBstar);
    }
    let a = bstar_operator(params, grid, &t.v0star)?;
    let w = &t.vstar + params.k * &t.p;
    let z = a.solve_spd(&w, 1e-13)?;
    let gv = (&t.vstar - &params.f) / params.eps - &z;
    let g0 = Field::from_fn(grid.n, |i, _| {
        z[i] * z[i] - t.v0star[i] / params.alpha - params.beta
    });
    let gp = params.k * (&t.p - &z);
    Ok((gv, g0, gp))
}

/// Result of the inner `sup` over `B*`.
#[derive(Debug, Clone)]
pub struct SupV0 {
    pub v0star: Field,
    /// `z = A⁻¹(v*+Kp)` at the maximizer.
    pub z: Field,
    /// `J₈*(v*,p) = sup_{v₀*∈B*} J*(v*,v₀*,p)`.
    pub value: f64,
}

/// Solves the inner stationarity `z² − v₀*/α − β = 0` over `B*` by damped
/// Newton, maintaining feasibility by step-halving.
pub fn sup_v0(
    params: &ModelParams,
    grid: &Grid,
    vstar: &Field,
    p: &Field,
    init: Option<&Field>,
) -> Result<SupV0> {
    grid.check_len(vstar)?;
    grid.check_len(p)?;
    let w = vstar + params.k * p;

    let mut v0 = match init {
        Some(v) => v.clone(),
        None => {
            // crude primal estimate: z at v0* = 0
            let a0 = bstar_operator(params, grid, &grid.zeros())?;
            let z0 = a0.solve_spd(&w, 1e-13)?;
            let guess = z0.map(|v| params.alpha * (v * v - params.beta));
            if in_bstar(params, grid, &guess)? {
                guess
            } else {
                grid.zeros()
            }
        }
    };
    if !in_bstar(params, grid, &v0)? {
        return Err(Error::LeftBstar);
    }

    let residual = |v0: &Field, z: &Field| -> Field {
        Field::from_fn(grid.n, |i, _| z[i] * z[i] - v0[i] / params.alpha - params.beta)
    };

    let mut a = bstar_operator(params, grid, &v0)?;
    let mut z = a.solve_spd(&w, 1e-13)?;
    let mut r = residual(&v0, &z);
    let scale = 1.0 + params.beta + z.norm_squared();
    let tol = 1e-13 * scale;
    let maxit = 200;
    for it in 0..maxit {
        if r.norm() <= tol {
            let t = DualTriple { vstar: vstar.clone(), v0star: v0.clone(), p: p.clone() };
            let value = eval_jstar(params, grid, &t)?;
            return Ok(SupV0 { v0star: v0, z, value });
        }
        // Newton on r(v0): dr/dv0 = −(4 diag(z) A⁻¹ diag(z) + I/α)
        let ainv = a
            .to_dense()
            .cholesky()
            .ok_or(Error::LeftBstar)?
            .inverse();
        let mut b = DMatrix::zeros(grid.n, grid.n);
        for i in 0..grid.n {
            for j in 0..grid.n {
                b[(i, j)] = 4.0 * z[i] * ainv[(i, j)] * z[j];
            }
            b[(i, i)] += 1.0 / params.alpha;
        }
        let delta = b
            .cholesky()
            .ok_or_else(|| Error::NoConvergence { iterations: it, residual: r.norm() })?
            .solve(&r);

        let mut theta = 1.0;
        let mut accepted = false;
        while theta > 1e-10 {
            let trial = &v0 + theta * &delta;
            if in_bstar(params, grid, &trial)? {
                let at = bstar_operator(params, grid, &trial)?;
                let zt = at.solve_spd(&w, 1e-13)?;
                let rt = residual(&trial, &zt);
                if rt.norm() < r.norm() || rt.norm() <= tol {
                    v0 = trial;
                    a = at;
                    z = zt;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            theta *= 0.5;
        }
        if !accepted {
            return Err(Error::LeftBstar);
        }
    }
    Err(Error::NoConvergence { iterations: maxit, residual: r.norm() })
}

/// Outcome of optimizing `p ↦ J₈*(v*, p)` over a ball.
#[derive(Debug, Clone)]
pub struct BallOpt {
    pub value: f64,
    pub p_opt: Field,
    pub v0_opt: Field,
    /// Whether the optimum is strictly inside the ball.
    pub interior: bool,
}

fn optimize_p(
    params: &ModelParams,
    grid: &Grid,
    vstar: &Field,
    pball: &BallSpec,
    tol: f64,
    maximize: bool,
) -> Result<BallOpt> {
    if !(pball.radius > 0.0) {
        return Err(Error::InvalidParameter("ball radius must be > 0".into()));
    }
    let mut p = pball.project(&pball.center);
    let mut sup = sup_v0(params, grid, vstar, &p, None)?;
    let sgn = if maximize { 1.0 } else { -1.0 };

    // projected-gradient phase
    let maxit = 300;
    for _ in 0..maxit {
        let g = params.k * (&p - &sup.z);
        if g.norm() <= tol.max(1e-9) {
            break;
        }
        let mut step = 1.0 / params.k;
        let mut moved = false;
        for _ in 0..40 {
            // ascent along +g for sup, descent along −g for inf
            let pt = pball.project(&(&p + (sgn * step) * &g));
            let st = sup_v0(params, grid, vstar, &pt, Some(&sup.v0star))
                .or_else(|_| sup_v0(params, grid, vstar, &pt, None))?;
            let improved = if maximize { st.value > sup.value } else { st.value < sup.value };
            if improved {
                p = pt;
                sup = st;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }

    // Newton polish on the interior stationarity p = z(p)
    let interior_margin = 1e-7 * (1.0 + pball.radius);
    let mut interior = (&p - &pball.center).norm() < pball.radius - interior_margin;
    if interior {
        for _ in 0..60 {
            let r = &p - &sup.z;
            if r.norm() <= 1e-11 * (1.0 + p.norm()) {
                break;
            }
            // dz/dp = K M⁻¹ with M = A + 4α diag(z²); solve (M − K)Δ = −M r
            let a = bstar_operator(params, grid, &sup.v0star)?;
            let m = a.add_diag_field(&sup.z.map(|v| 4.0 * params.alpha * v * v))?;
            let md = m.to_dense();
            let mk = &md - DMatrix::from_diagonal_element(grid.n, grid.n, params.k);
            let rhs = -(&md * &r);
            let delta = mk
                .lu()
                .solve(&rhs)
                .ok_or(Error::NoConvergence { iterations: 0, residual: r.norm() })?;
            let mut theta = 1.0;
            let mut accepted = false;
            while theta > 1e-10 {
                let pt = &p + theta * &delta;
                if let Ok(st) = sup_v0(params, grid, vstar, &pt, Some(&sup.v0star)) {
                    let rt = (&pt - &st.z).norm();
                    if rt < r.norm() {
                        p = pt;
                        sup = st;
                        accepted = true;
                        break;
                    }
                }
                theta *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        interior = (&p - &pball.center).norm() < pball.radius - interior_margin;
    }

    Ok(BallOpt { value: sup.value, p_opt: p, v0_opt: sup.v0star, interior })
}

/// `J₃*(v*) = inf_{p∈ball} J₈*(v*, p)`.
pub fn eval_j3(
    params: &ModelParams,
    grid: &Grid,
    vstar: &Field,
    pball: &BallSpec,
    tol: f64,
) -> Result<BallOpt> {
    optimize_p(params, grid, vstar, pball, tol, false)
}

/// `J₅*(v*) = sup_{p∈ball} J₈*(v*, p)`.
pub fn eval_j5(
    params: &ModelParams,
    grid: &Grid,
    vstar: &Field,
    pball: &BallSpec,
    tol: f64,
) -> Result<BallOpt> {
    optimize_p(params, grid, vstar, pball, tol, true)
}

/// One directional curvature comparison.
#[derive(Debug, Clone)]
pub struct CurvatureRow {
    pub fd: f64,
    pub predicted: f64,
    pub rel_mismatch: f64,
}

fn rand_direction(n: usize, rng: &mut ChaCha8Rng) -> Field {
    let mut d = Field::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    d /= d.norm();
    d
}

/// Compares finite-difference curvature of `J₃*` at `v̂*` against the
/// predicted quadratic form `⟨(1/ε)d,d⟩ − ⟨(δ²J(u₀)+ε)⁻¹d,d⟩`.
pub fn d2_j3_check(
    params: &ModelParams,
    grid: &Grid,
    u0: &Field,
    ndirs: usize,
    seed: u64,
) -> Result<Vec<CurvatureRow>> {
    let t = build_dual_triple(params, grid, u0)?;
    if !in_bstar(params, grid, &t.v0star)? {
        return Err(Error::NotInBstar);
    }
    let hess = hess_j(params, grid, u0)?;
    let heps = hess.add_diag(params.eps);
    let use_inf = hess.min_eig(1e-10)? > 0.0;
    let pball = BallSpec::around(t.p.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-4 * (1.0 + t.vstar.norm());
    let mut rows = Vec::with_capacity(ndirs);
    for _ in 0..ndirs {
        let d = rand_direction(grid.n, &mut rng);
        let eval = |s: f64| -> Result<f64> {
            let v = &t.vstar + s * &d;
            let opt = if use_inf {
                eval_j3(params, grid, &v, &pball, 1e-11)?
            } else {
                eval_j5(params, grid, &v, &pball, 1e-11)?
            };
            Ok(opt.value)
        };
        let fp = eval(step)?;
        let f0 = eval(0.0)?;
        let fm = eval(-step)?;
        let fd = (fp - 2.0 * f0 + fm) / (step * step);
        let predicted =
            grid.inner(&d, &d)? / params.eps - grid.inner(&heps.solve_spd_signed(&d)?, &d)?;
        let rel_mismatch = (fd - predicted).abs() / predicted.abs().max(1e-30);
        rows.push(CurvatureRow { fd, predicted, rel_mismatch });
    }
    Ok(rows)
}

/// Spectrum endpoints of the naive (non-proximal) dual denominator
/// `L + 2v₀* − εI` at `v₀* = α(u²−β)`.
pub fn naive_dual_curvature(params: &ModelParams, grid: &Grid, u: &Field) -> Result<(f64, f64)> {
    grid.check_len(u)?;
    let v0 = u.map(|v| params.alpha * (v * v - params.beta));
    let l = params.laplacian(grid);
    let op = l.add_diag_field(&(2.0 * v0))?.add_diag(-params.eps);
    Ok((op.min_eig(1e-10)?, op.max_eig(1e-10)?))
}

/// Full machine check of Theorem 1 at a critical point.
#[derive(Debug, Clone)]
pub struct Thm1Report {
    pub residual_norm: f64,
    pub classification: Classification,
    pub in_bstar: bool,
    pub j_primal: f64,
    /// `J*(v̂*, v̂₀*, p̂)`; absent when the triple is outside `B*`.
    pub j_dual: Option<f64>,
    pub gap: Option<f64>,
    pub dual_grad_norm: Option<f64>,
    /// `J₃*` (LocalMin) or `J₅*` (LocalMax) curvature rows.
    pub nested_curvature: Vec<CurvatureRow>,
    /// `∂²J₈*/∂p²` rows against `K(δ²J+ε)(δ²J+K+ε)⁻¹`.
    pub j8_p_curvature: Vec<CurvatureRow>,
}

pub fn verify_thm1(
    params: &ModelParams,
    grid: &Grid,
    u0: &Field,
    ndirs: usize,
    seed: u64,
) -> Result<Thm1Report> {
    let residual_norm = grad_j(params, grid, u0)?.norm();
    if residual_norm > 1e-8 {
        return Err(Error::PreconditionViolated(format!(
            "u0 is not critical: |grad J| = {residual_norm}"
        )));
    }
    let hess = hess_j(params, grid, u0)?;
    let lo = hess.min_eig(1e-10)?;
    let hi = hess.max_eig(1e-10)?;
    let classification = classify_from_eigs(lo, hi);
    let t = build_dual_triple(params, grid, u0)?;
    let in_b = in_bstar(params, grid, &t.v0star)?;
    let j_primal = energy_j(params, grid, u0)?;

    let mut report = Thm1Report {
        residual_norm,
        classification,
        in_bstar: in_b,
        j_primal,
        j_dual: None,
        gap: None,
        dual_grad_norm: None,
        nested_curvature: Vec::new(),
        j8_p_curvature: Vec::new(),
    };
    if !in_b {
        return Ok(report);
    }

    let j_dual = eval_jstar(params, grid, &t)?;
    let (gv, g0, gp) = grad_jstar(params, grid, &t)?;
    report.j_dual = Some(j_dual);
    report.gap = Some((j_primal - j_dual).abs());
    report.dual_grad_norm =
        Some((gv.norm_squared() + g0.norm_squared() + gp.norm_squared()).sqrt());

    if matches!(classification, Classification::LocalMin | Classification::LocalMax) {
        report.nested_curvature = d2_j3_check(params, grid, u0, ndirs, seed)?;
        report.j8_p_curvature = d2_j8_p_check(params, grid, u0, ndirs, seed ^ 0x9e3779b9)?;
    }
    Ok(report)
}

/// Compares finite-difference `∂²J₈*/∂p²` at `(v̂*, p̂)` against the paper's
/// closed form `K(δ²J(u₀)+ε)(δ²J(u₀)+K+ε)⁻¹` (the two factors commute).
pub fn d2_j8_p_check(
    params: &ModelParams,
    grid: &Grid,
    u0: &Field,
    ndirs: usize,
    seed: u64,
) -> Result<Vec<CurvatureRow>> {
    let t = build_dual_triple(params, grid, u0)?;
    if !in_bstar(params, grid, &t.v0star)? {
        return Err(Error::NotInBstar);
    }
    let hess = hess_j(params, grid, u0)?;
    let heps = hess.add_diag(params.eps);
    let hkeps = hess.add_diag(params.k + params.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1e-4 * (1.0 + t.p.norm());
    let mut rows = Vec::with_capacity(ndirs);
    for _ in 0..ndirs {
        let d = rand_direction(grid.n, &mut rng);
        let eval = |s: f64| -> Result<f64> {
            let p = &t.p + s * &d;
            Ok(sup_v0(params, grid, &t.vstar, &p, Some(&t.v0star))?.value)
        };
        let fp = eval(step)?;
        let f0 = eval(0.0)?;
        let fm = eval(-step)?;
        let fd = (fp - 2.0 * f0 + fm) / (step * step);
        let y = hkeps.solve_spd(&d, 1e-13)?;
        let predicted = params.k * grid.inner(&heps.apply(&y)?, &d)?;
        let rel_mismatch = (fd - predicted).abs() / predicted.abs().max(1e-30);
        rows.push(CurvatureRow { fd, predicted, rel_mismatch });
    }
    Ok(rows)
}

impl SymOp {
    /// Solve with a possibly indefinite but invertible operator (dense LU).
    /// Used where the paper's formulas divide by `δ²J(u₀)+ε`, which is
    /// indefinite at local maxima.
    pub(crate) fn solve_spd_signed(&self, b: &Field) -> Result<Field> {
        self.to_dense()
            .lu()
            .solve(b)
            .ok_or(Error::NotPositiveDefinite { min_eig: f64::NAN })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::primal::newton;

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
    fn build_triple_examples() {
        let (grid, params) = r1();
        let t = build_dual_triple(&params, &grid, &grid.zeros()).unwrap();
        assert_eq!(t.v0star, grid.constant(-1.0));
        assert_eq!(t.vstar, grid.zeros());
        assert_eq!(t.p, grid.zeros());

        let (grid, params) = r2();
        let t = build_dual_triple(&params, &grid, &grid.zeros()).unwrap();
        assert_eq!(t.vstar, grid.constant(0.5));

        let (grid, mut p2) = r1();
        p2.alpha = 2.0;
        p2.beta = 3.0;
        let u = Field::from_vec(vec![1.0, 2.0, 0.0]);
        let t = build_dual_triple(&p2, &grid, &u).unwrap();
        assert_eq!(t.v0star.as_slice(), &[-4.0, 2.0, -6.0]);
    }

    #[test]
    fn in_bstar_examples() {
        let (grid, params) = r1();
        let t = build_dual_triple(&params, &grid, &grid.zeros()).unwrap();
        assert!(in_bstar(&params, &grid, &t.v0star).unwrap());
        assert!(in_bstar(&params, &grid, &grid.constant(-5.0)).unwrap());
        assert!(!in_bstar(&params, &grid, &grid.constant(-10.0)).unwrap());
    }

    #[test]
    fn gstar_examples() {
        let (grid, params) = r1();
        let t = build_dual_triple(&params, &grid, &grid.zeros()).unwrap();
        assert!((eval_gstar(&params, &grid, &t).unwrap() - (-0.375)).abs() < 1e-12);

        // v* = −Kp, v0* = 0 makes every term vanish
        let p = grid.constant(0.3);
        let t = DualTriple { vstar: -params.k * &p, v0star: grid.zeros(), p };
        assert!(eval_gstar(&params, &grid, &t).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fstar_examples() {
        let (grid, params) = r1();
        assert_eq!(eval_fstar(&params, &grid, &params.f.clone()).unwrap(), 0.0);
        let v = Field::from_vec(vec![0.1, 0.0, 0.0]);
        assert!((eval_fstar(&params, &grid, &v).unwrap() - 0.0125).abs() < 1e-15);
        let doubled = eval_fstar(&params, &grid, &(2.0 * &v)).unwrap();
        assert!((doubled - 4.0 * eval_fstar(&params, &grid, &v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn jstar_zero_gap_examples() {
        let (grid, params) = r1();
        let t = build_dual_triple(&params, &grid, &grid.zeros()).unwrap();
        let j = eval_jstar(&params, &grid, &t).unwrap();
        assert!((j - 0.375).abs() < 1e-12);

        let (grid, params) = r2();
        let cp = newton(&params, &grid, &grid.zeros(), 1e-12, 50).unwrap();
        let t = build_dual_triple(&params, &grid, &cp.u0).unwrap();
        let j_dual = eval_jstar(&params, &grid, &t).unwrap();
        let j_prim = energy_j(&params, &grid, &cp.u0).unwrap();
        assert!((j_dual - j_prim).abs() <= 1e-10);
    }

    #[test]
    fn grad_jstar_vanishes_at_critical_triples() {
        for (grid, params) in [r1(), r2()] {
            let cp = newton(&params, &grid, &grid.zeros(), 1e-13, 50).unwrap();
            let t = build_dual_triple(&params, &grid, &cp.u0).unwrap();
            let (gv, g0, gp) = grad_jstar(&params, &grid, &t).unwrap();
            assert!(gv.norm() <= 1e-9, "gv = {}", gv.norm());
            assert!(g0.norm() <= 1e-9);
            assert!(gp.norm() <= 1e-9);
        }
    }

    #[test]
    fn grad_jstar_pointwise_example() {
        let (grid, params) = r1();
        let t = DualTriple { vstar: grid.zeros(), v0star: grid.constant(-1.0), p: grid.zeros() };
        let (_, g0, _) = grad_jstar(&params, &grid, &t).unwrap();
        assert!(g0.norm() <= 1e-14);
    }

    #[test]
    fn grad_jstar_matches_finite_differences() {
        let (grid, params) = r2();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t0 = 1e-6;
        let mut checked = 0;
        while checked < 30 {
            let vstar = Field::from_fn(grid.n, |_, _| rng.gen_range(-1.0..1.0));
            let v0star = Field::from_fn(grid.n, |_, _| rng.gen_range(-1.5..1.5));
            let p = Field::from_fn(grid.n, |_, _| rng.gen_range(-1.0..1.0));
            if !in_bstar(&params, &grid, &v0star).unwrap() {
                continue;
            }
            checked += 1;
            let t = DualTriple { vstar, v0star, p };
            let (gv, g0, gp) = grad_jstar(&params, &grid, &t).unwrap();
            let d = rand_direction(grid.n, &mut rng);
            for (block, g) in [(0, &gv), (1, &g0), (2, &gp)] {
                let perturb = |s: f64| -> DualTriple {
                    let mut tt = t.clone();
                    match block {
                        0 => tt.vstar += s * &d,
                        1 => tt.v0star += s * &d,
                        _ => tt.p += s * &d,
                    }
                    tt
                };
                let jp = eval_jstar(&params, &grid, &perturb(t0)).unwrap();
                let jm = eval_jstar(&params, &grid, &perturb(-t0)).unwrap();
                let fd = (jp - jm) / (2.0 * t0);
                let lhs = grid.inner(g, &d).unwrap();
                assert!(
                    (lhs - fd).abs() <= 1e-6 * lhs.abs().max(1.0),
                    "block {block}: analytic {lhs} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn sup_v0_examples() {
        let (grid, params) = r1();
        let s = sup_v0(&params, &grid, &grid.zeros(), &grid.zeros(), None).unwrap();
        assert!((s.v0star - grid.constant(-1.0)).norm() <= 1e-10);
        assert!((s.value - 0.375).abs() <= 1e-12);

        let (grid, params) = r2();
        let cp = newton(&params, &grid, &grid.zeros(), 1e-13, 50).unwrap();
        let t = build_dual_triple(&params, &grid, &cp.u0).unwrap();
        let s = sup_v0(&params, &grid, &t.vstar, &t.p, None).unwrap();
        assert!((&s.v0star - &t.v0star).norm() <= 1e-8);
        let jstar = eval_jstar(&params, &grid, &t).unwrap();
        assert!((s.value - jstar).abs() <= 1e-10);
    }

    #[test]
    fn sup_v0_is_a_local_max() {
        let (grid, params) = r2();
        let cp = newton(&params, &grid, &grid.zeros(), 1e-13, 50).unwrap();
        let t = build_dual_triple(&params, &grid, &cp.u0).unwrap();
        let s = sup_v0(&params, &grid, &t.vstar, &t.p, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut probed = 0;
        while probed < 10 {
            let d = rand_direction(grid.n, &mut rng);
            let v0 = &s.v0star + 1e-3 * &d;
            if !in_bstar(&params, &grid, &v0).unwrap() {
                continue;
            }
            probed += 1;
            let tt = DualTriple { vstar: t.vstar.clone(), v0star: v0, p: t.p.clone() };
            assert!(eval_jstar(&params, &grid, &tt).unwrap() <= s.value + 1e-12);
        }
    }

    #[test]
    fn j3_j5_examples() {
        let (grid, params) = r1();
        let ball = BallSpec { center: grid.zeros(), radius: 0.5 };
        let j3 = eval_j3(&params, &grid, &grid.zeros(), &ball, 1e-10).unwrap();
        assert!((j3.value - 0.375).abs() <= 1e-9);
        assert!(j3.interior);

        // J3 <= J8(center) and J5 >= J3
        let j8 = sup_v0(&params, &grid, &grid.zeros(), &ball.center, None).unwrap();
        assert!(j3.value <= j8.value + 1e-12);
        let j5 = eval_j5(&params, &grid, &grid.zeros(), &ball, 1e-10).unwrap();
        assert!(j5.value + 1e-12 >= j3.value);
    }

    #[test]
    fn d2_j3_check_r1() {
        let (grid, params) = r1();
        let rows = d2_j3_check(&params, &grid, &grid.zeros(), 5, 123).unwrap();
        for row in &rows {
            assert!(row.predicted > 0.0);
            assert!(row.rel_mismatch <= 5e-3, "mismatch {}", row.rel_mismatch);
        }
    }

    #[test]
    fn naive_dual_curvature_examples() {
        let (grid, params) = r1();
        let (lo, hi) = naive_dual_curvature(&params, &grid, &grid.zeros()).unwrap();
        assert!((lo - (30.0 - 16.0 * 2f64.sqrt() - 0.1)).abs() < 1e-9);
        assert!((hi - (30.0 + 16.0 * 2f64.sqrt() - 0.1)).abs() < 1e-9);
        assert!(lo > 0.0, "definite here");

        let mut psad = params.clone();
        psad.beta = 10.0;
        let (lo, hi) = naive_dual_curvature(&psad, &grid, &grid.zeros()).unwrap();
        assert!(lo < 0.0 && hi > 0.0, "indefinite: [{lo}, {hi}]");
    }

    #[test]
    fn verify_thm1_r1_and_r2() {
        let (grid, params) = r1();
        let rep = verify_thm1(&params, &grid, &grid.zeros(), 3, 7).unwrap();
        assert!(rep.in_bstar);
        assert_eq!(rep.classification, Classification::LocalMin);
        assert!(rep.gap.unwrap() <= 1e-12);
        assert!(rep.dual_grad_norm.unwrap() <= 1e-12);
        for row in &rep.nested_curvature {
            assert!(row.fd > 0.0 && row.rel_mismatch <= 5e-3);
        }
        for row in &rep.j8_p_curvature {
            assert!(row.fd > 0.0 && row.rel_mismatch <= 1e-3);
        }

        let (grid, params) = r2();
        let cp = newton(&params, &grid, &grid.zeros(), 1e-12, 50).unwrap();
        let rep = verify_thm1(&params, &grid, &cp.u0, 3, 7).unwrap();
        assert!(rep.gap.unwrap() <= 1e-10);

        let bad = grid.constant(0.2);
        assert!(matches!(
            verify_thm1(&params, &grid, &bad, 3, 7),
            Err(Error::PreconditionViolated(_))
        ));
    }
}
