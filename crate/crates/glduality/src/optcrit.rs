//! Global-optimality criterion via sign alignment (sets `A⁺`/`B⁺`, the
//! operator `H(u)`, a sampled convexity probe of `A⁺∩B⁺`) and the related
//! duality principle whose conjugate `G*` has no closed form and is computed
//! by Newton on a strictly concave inner problem.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, Grid};
use crate::linalg::SymOp;
use crate::model::{energy_j, grad_j, hess_j, ModelParams};
use crate::par::map_indexed;
use crate::proxdual::{build_dual_triple, eval_fstar, eval_h};
use crate::{Error, Result};

/// Membership of a field in the criterion sets.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub in_aplus: bool,
    pub in_bplus: bool,
    pub min_eig_hess: f64,
    /// Nodes where `u·f < 0` (beyond the `−1e−12` margin).
    pub sign_violations: usize,
}

fn uniform_sign_of(f: &Field) -> Result<f64> {
    let has_pos = f.iter().any(|&v| v > 0.0);
    let has_neg = f.iter().any(|&v| v < 0.0);
    if has_pos && has_neg {
        return Err(Error::MixedSignF);
    }
    Ok(if has_neg { -1.0 } else { 1.0 })
}

/// Flips the sign of `u` wherever `u·f < 0`; never increases `J`.
pub fn sign_align(grid: &Grid, u: &Field, f: &Field) -> Result<Field> {
    grid.check_len(u)?;
    grid.check_len(f)?;
    uniform_sign_of(f)?;
    Ok(Field::from_fn(grid.n, |i, _| if u[i] * f[i] < 0.0 { -u[i] } else { u[i] }))
}

/// `A⁺ = {u : u·f ≥ 0 in Ω}` with margin `−1e−12`.
pub fn in_aplus(grid: &Grid, u: &Field, f: &Field) -> Result<bool> {
    Ok(sign_violations(grid, u, f)? == 0)
}

pub fn sign_violations(grid: &Grid, u: &Field, f: &Field) -> Result<usize> {
    grid.check_len(u)?;
    grid.check_len(f)?;
    Ok((0..grid.n).filter(|&i| u[i] * f[i] < -1e-12).count())
}

/// `B⁺ = {u : δ²J(u) ⪰ 0}` with a relative `−1e−8` margin.
pub fn in_bplus(params: &ModelParams, grid: &Grid, u: &Field) -> Result<bool> {
    let h = hess_j(params, grid, u)?;
    let lo = h.min_eig(1e-10)?;
    let hi = h.max_eig(1e-10)?;
    Ok(lo >= -1e-8 * lo.abs().max(hi.abs()).max(1.0))
}

pub fn membership(params: &ModelParams, grid: &Grid, u: &Field) -> Result<MembershipReport> {
    let violations = sign_violations(grid, u, &params.f)?;
    let min_eig_hess = hess_j(params, grid, u)?.min_eig(1e-10)?;
    Ok(MembershipReport {
        in_aplus: violations == 0,
        in_bplus: in_bplus(params, grid, u)?,
        min_eig_hess,
        sign_violations: violations,
    })
}

/// `H(u) = √(6α)·diag(|u|) − √(2αβ·I − L)`, defined when `max_eig(L) ≤ 2αβ`.
pub fn h_operator(params: &ModelParams, grid: &Grid, u: &Field) -> Result<SymOp> {
    grid.check_len(u)?;
    let l = params.laplacian(grid);
    let bound = 2.0 * params.alpha * params.beta;
    let hi = l.max_eig(1e-10)?;
    if hi > bound + 1e-10 {
        return Err(Error::HypothesisViolated(format!(
            "max_eig(L) = {hi} exceeds 2αβ = {bound}"
        )));
    }
    // 2αβ·I − L, clamped PSD by hypothesis
    let shifted = SymOp::from_dense(-l.to_dense()).add_diag(bound);
    let root = shifted.sqrt_spd()?;
    let neg_root = SymOp::from_dense(-root.to_dense());
    neg_root.add_diag_field(&u.map(|v| (6.0 * params.alpha).sqrt() * v.abs()))
}

/// Counterexample record from the convexity probe.
#[derive(Debug, Clone)]
pub struct ProbeCounterexample {
    pub u1: Field,
    pub u2: Field,
    pub lambda: f64,
    pub in_aplus: bool,
    pub in_bplus: bool,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub pairs: usize,
    pub combos_tested: usize,
    pub combos_passed: usize,
    pub counterexamples: Vec<ProbeCounterexample>,
}

/// Samples pairs in `A⁺∩B⁺` and tests convex combinations for membership.
/// Reports the tally; counterexamples are recorded verbatim, not asserted
/// away.
pub fn convexity_probe(
    params: &ModelParams,
    grid: &Grid,
    nsamples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let sign = uniform_sign_of(&params.f)?;
    let l = params.laplacian(grid);
    let bound = 2.0 * params.alpha * params.beta;
    if l.max_eig(1e-10)? > bound + 1e-10 {
        return Err(Error::HypothesisViolated("max_eig(L) > 2αβ".into()));
    }

    let lambdas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let results: Vec<Result<(usize, usize, Vec<ProbeCounterexample>)>> =
        map_indexed(nsamples, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let u1 = sample_aplus_bplus(params, grid, sign, &mut rng)?;
            let u2 = sample_aplus_bplus(params, grid, sign, &mut rng)?;
            let mut passed = 0;
            let mut counterexamples = Vec::new();
            for &lam in &lambdas {
                let mix = lam * &u1 + (1.0 - lam) * &u2;
                let a = in_aplus(grid, &mix, &params.f)?;
                let b = in_bplus(params, grid, &mix)?;
                if a && b {
                    passed += 1;
                } else {
                    counterexamples.push(ProbeCounterexample {
                        u1: u1.clone(),
                        u2: u2.clone(),
                        lambda: lam,
                        in_aplus: a,
                        in_bplus: b,
                    });
                }
            }
            Ok((lambdas.len(), passed, counterexamples))
        });

    let mut report =
        ProbeReport { pairs: nsamples, combos_tested: 0, combos_passed: 0, counterexamples: Vec::new() };
    for r in results {
        let (tested, passed, mut ces) = r?;
        report.combos_tested += tested;
        report.combos_passed += passed;
        report.counterexamples.append(&mut ces);
    }
    Ok(report)
}

/// Rejection sampling: smooth random magnitude field oriented by `sign(f)`,
/// retried until in `B⁺`.
fn sample_aplus_bplus(
    params: &ModelParams,
    grid: &Grid,
    sign: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Field> {
    for _ in 0..200 {
        let mut raw = Field::from_fn(grid.n, |_, _| rng.gen_range(0.0..1.0));
        // a couple of neighbor-averaging passes for smoothness
        for _ in 0..2 {
            let prev = raw.clone();
            for i in 0..grid.n {
                let mut acc = prev[i];
                let mut cnt = 1.0;
                for axis in 0..grid.spec.dimension {
                    for step in [-1isize, 1] {
                        if let Some(j) = grid.neighbor(i, axis, step) {
                            acc += prev[j];
                            cnt += 1.0;
                        }
                    }
                }
                raw[i] = acc / cnt;
            }
        }
        let u = raw.map(|r| sign * (params.beta * (1.0 + 0.5 * r)).sqrt());
        if in_aplus(grid, &u, &params.f)? && in_bplus(params, grid, &u)? {
            return Ok(u);
        }
    }
    Err(Error::NoConvergence { iterations: 200, residual: f64::NAN })
}

/// `G*(w) = sup_u { ⟨u,w⟩ − γ/2⟨Lu,u⟩ − α/2∫(u²−β)² − (K+ε)/2∫u² }`,
/// computed by Newton on the strictly concave inner problem
/// (requires `K+ε > 2αβ`).
pub fn numeric_gstar_thm3(params: &ModelParams, grid: &Grid, w: &Field, tol: f64) -> Result<f64> {
    grid.check_len(w)?;
    let margin = params.k + params.eps - 2.0 * params.alpha * params.beta;
    if margin <= 0.0 {
        return Err(Error::NotConcave(format!(
            "K+ε = {} must exceed 2αβ = {}",
            params.k + params.eps,
            2.0 * params.alpha * params.beta
        )));
    }
    let l = params.laplacian(grid);
    let objective = |u: &Field| -> Result<f64> {
        let lu = l.apply(u)?;
        let well = u.map(|v| (v * v - params.beta) * (v * v - params.beta));
        Ok(grid.inner(u, w)?
            - 0.5 * grid.inner(&lu, u)?
            - 0.5 * params.alpha * grid.integrate(&well)?
            - 0.5 * (params.k + params.eps) * grid.inner(u, u)?)
    };
    let gradient = |u: &Field| -> Result<Field> {
        let mut g = -l.apply(u)?;
        for i in 0..grid.n {
            g[i] += w[i]
                - 2.0 * params.alpha * (u[i] * u[i] - params.beta) * u[i]
                - (params.k + params.eps) * u[i];
        }
        Ok(g)
    };

    let mut u = grid.zeros();
    let mut g = gradient(&u)?;
    for it in 0..200 {
        if g.norm() <= tol {
            return objective(&u);
        }
        // negated Hessian L + 6αu² + (K+ε−2αβ) is SPD
        let h = l.add_diag_field(&u.map(|v| 6.0 * params.alpha * v * v))?.add_diag(margin);
        let step = h.solve_spd(&g, 1e-13)?;
        let gn = g.norm();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &u + t * &step;
            let gt = gradient(&trial)?;
            if gt.norm() < gn || gt.norm() <= tol {
                u = trial;
                g = gt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: it, residual: gn });
        }
    }
    Err(Error::NoConvergence { iterations: 200, residual: g.norm() })
}

/// `J*(v*,p) = −G*(v*+Kp) + F*(v*) + H(p)`.
pub fn eval_jstar_thm3(
    params: &ModelParams,
    grid: &Grid,
    vstar: &Field,
    p: &Field,
) -> Result<f64> {
    let w = vstar + params.k * p;
    Ok(-numeric_gstar_thm3(params, grid, &w, 1e-11)?
        + eval_fstar(params, grid, vstar)?
        + eval_h(params, grid, p)?)
}

#[derive(Debug, Clone)]
pub struct Thm3Report {
    pub j_primal: f64,
    pub j_dual: f64,
    pub gap: f64,
    pub membership: MembershipReport,
    pub nsamples: usize,
    /// Minimum of `J*(v*,p)` over the samples.
    pub weak_min: Option<f64>,
    /// Samples violating weak duality beyond `1e−8`.
    pub weak_violations: usize,
    /// Samples where sign alignment increased `J` beyond `1e−12`.
    pub align_violations: usize,
}

/// Checks Theorem 3 at a critical `u0 ∈ A⁺∩B⁺`: the gap at the constructed
/// `(v̂*, p̂)`, sampled weak duality against `J(u0)`, and the sign-alignment
/// monotonicity used in its proof.
pub fn verify_thm3(
    params: &ModelParams,
    grid: &Grid,
    u0: &Field,
    nsamples: usize,
    seed: u64,
) -> Result<Thm3Report> {
    let residual = grad_j(params, grid, u0)?.norm();
    if residual > 1e-8 {
        return Err(Error::PreconditionViolated(format!(
            "u0 is not critical: |grad J| = {residual}"
        )));
    }
    let membership = membership(params, grid, u0)?;
    if !membership.in_aplus || !membership.in_bplus {
        return Err(Error::PreconditionViolated("u0 is not in E = A⁺∩B⁺".into()));
    }
    let l = params.laplacian(grid);
    if l.max_eig(1e-10)? > 2.0 * params.alpha * params.beta + 1e-10 {
        return Err(Error::HypothesisViolated("max_eig(L) > 2αβ".into()));
    }

    let j_primal = energy_j(params, grid, u0)?;
    let t = build_dual_triple(params, grid, u0)?;
    let j_dual = eval_jstar_thm3(params, grid, &t.vstar, &t.p)?;
    let gap = (j_primal - j_dual).abs();

    let samples: Vec<Result<(f64, bool, bool)>> = map_indexed(nsamples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x51ab_0000 + i as u64));
        let vstar = Field::from_fn(grid.n, |_, _| rng.gen_range(-2.0..2.0));
        let p = Field::from_fn(grid.n, |_, _| rng.gen_range(-2.0..2.0));
        let jstar = eval_jstar_thm3(params, grid, &vstar, &p)?;
        let weak_violation = jstar < j_primal - 1e-8;

        let u = Field::from_fn(grid.n, |_, _| rng.gen_range(-2.0..2.0));
        let aligned = sign_align(grid, &u, &params.f)?;
        let align_violation = energy_j(params, grid, &aligned)?
            > energy_j(params, grid, &u)? + 1e-12;
        Ok((jstar, weak_violation, align_violation))
    });

    let mut report = Thm3Report {
        j_primal,
        j_dual,
        gap,
        membership,
        nsamples,
        weak_min: None,
        weak_violations: 0,
        align_violations: 0,
    };
    for s in samples {
        let (jstar, weak, align) = s?;
        report.weak_min = Some(report.weak_min.map_or(jstar, |m: f64| m.min(jstar)));
        report.weak_violations += weak as usize;
        report.align_violations += align as usize;
    }
    Ok(report)
}
