//! Built-in acceptance suite: eleven machine-checked criteria covering the
//! zero-gap claims, curvature formulas, oracle cross-checks and report
//! determinism. Each criterion returns a pass/fail with the numeric margin
//! that produced it; `run_all` is shared by the `check` CLI subcommand and
//! the acceptance integration test.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{build_grid, Field, Grid, GridSpec};
use crate::harness::{self, report::to_json};
use crate::model::{energy_j, grad_j, hess_j, ModelParams};
use crate::optcrit;
use crate::primal::{self, Classification};
use crate::proxdual::{self, eval_gstar};
use crate::tensordual::{self, KMat, TensorDual};
use crate::Result;

/// One acceptance criterion outcome.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    /// Worst slack against the criterion's tightest bound (negative = fail).
    pub margin: f64,
    pub detail: String,
}

impl Criterion {
    fn failed(id: usize, name: &'static str, err: impl std::fmt::Display) -> Criterion {
        Criterion { id, name, pass: false, margin: f64::NEG_INFINITY, detail: err.to_string() }
    }
}

fn grid1d(nodes: usize) -> Grid {
    build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: nodes }).unwrap()
}

fn params(grid: &Grid, gamma: f64, alpha: f64, beta: f64, k: f64, f: f64) -> ModelParams {
    ModelParams { gamma, alpha, beta, k, eps: 0.1, f: grid.constant(f), k12: None }
}

/// Tracks the minimum slack seen across a family of bounds.
struct Margin {
    worst: f64,
    pass: bool,
}

impl Margin {
    fn new() -> Margin {
        Margin { worst: f64::INFINITY, pass: true }
    }
    /// require `value <= bound`
    fn at_most(&mut self, value: f64, bound: f64) {
        let slack = bound - value;
        self.worst = self.worst.min(slack);
        self.pass &= slack >= 0.0;
    }
    fn require(&mut self, cond: bool, slack: f64) {
        self.worst = self.worst.min(slack);
        self.pass &= cond;
    }
}

/// The critical-point instances for criteria 1-3: four configs producing
/// six distinct critical points spanning local minima and a local maximum,
/// all with dual triples in B*.
fn zero_gap_instances() -> Vec<(Grid, ModelParams, Field)> {
    let mut out = Vec::new();
    let cases: [(usize, f64, f64, f64); 4] = [
        (3, 1.0, 0.0, 0.0),      // u = 0, local min
        (3, 1.0, 0.5, 0.0),      // forced instance, local min near 0
        (31, 1.0, 0.0, 0.0),     // fine grid, u = 0 local min
        (3, 0.001, 0.0, 0.0),    // nearly flat gradient term: u = 0 local max
    ];
    for (nodes, gamma, f, start) in cases {
        let grid = grid1d(nodes);
        let p = params(&grid, gamma, 1.0, 1.0, 10.0, f);
        let cp = primal::newton(&p, &grid, &grid.constant(start), 1e-13, 200).unwrap();
        out.push((grid, p, cp.u0));
    }
    // the two wells of the nearly flat instance: distinct local minima
    for start in [1.0, -1.0] {
        let grid = grid1d(3);
        let p = params(&grid, 0.001, 1.0, 1.0, 10.0, 0.0);
        let cp = primal::newton(&p, &grid, &grid.constant(start), 1e-13, 200).unwrap();
        out.push((grid, p, cp.u0));
    }
    out
}

/// Criterion 1: zero duality gap at ≥5 distinct critical points, < 10 s.
pub fn c01_zero_gap() -> Criterion {
    let t0 = Instant::now();
    let run = || -> Result<(Margin, String)> {
        let mut m = Margin::new();
        let instances = zero_gap_instances();
        let mut classes = (0, 0);
        for (grid, p, u0) in &instances {
            let rep = proxdual::verify_thm1(p, grid, u0, 0, 42)?;
            m.require(rep.in_bstar, if rep.in_bstar { 1.0 } else { -1.0 });
            m.at_most(rep.gap.unwrap_or(f64::INFINITY), 1e-9 * (1.0 + rep.j_primal.abs()));
            m.at_most(rep.dual_grad_norm.unwrap_or(f64::INFINITY), 1e-8);
            match rep.classification {
                Classification::LocalMin => classes.0 += 1,
                Classification::LocalMax => classes.1 += 1,
                _ => {}
            }
        }
        m.require(instances.len() >= 5, instances.len() as f64 - 5.0);
        m.require(classes.0 >= 1 && classes.1 >= 1, 1.0);
        let elapsed = t0.elapsed().as_secs_f64();
        m.at_most(elapsed, 10.0);
        Ok((m, format!("{} points ({} min, {} max), {:.2}s", instances.len(), classes.0, classes.1, elapsed)))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 1, name: "thm1-zero-gap", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(1, "thm1-zero-gap", e),
    }
}

/// Criterion 2: dual stationarity at 20 random-seeded critical points
/// whenever B* holds; B* violations reported, never silently passed.
pub fn c02_dual_stationarity() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let grid = grid1d(7);
        let mut p = params(&grid, 0.5, 1.0, 2.0, 12.0, 0.3);
        p.alpha = 1.0;
        let mut m = Margin::new();
        let mut outside = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(2026);
        for _ in 0..20 {
            let start = Field::from_fn(grid.n, |_, _| rng.gen_range(-2.5..2.5));
            let cp = primal::newton(&p, &grid, &start, 1e-12, 200)?;
            let rep = proxdual::verify_thm1(&p, &grid, &cp.u0, 0, 7)?;
            if rep.in_bstar {
                m.at_most(rep.dual_grad_norm.unwrap_or(f64::INFINITY), 1e-8);
            } else {
                outside += 1;
            }
        }
        Ok((m, format!("20 points, {outside} outside B* (reported)")))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 2, name: "thm1-dual-stationarity", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(2, "thm1-dual-stationarity", e),
    }
}

/// Criterion 3: nested curvature formulas at the local-minimum cases of
/// criterion 1 (5e-3 relative for J3*, 1e-3 for the p-curvature of J8*).
pub fn c03_curvature() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let mut m = Margin::new();
        let mut checked = 0;
        for (grid, p, u0) in &zero_gap_instances() {
            if primal::classify(p, grid, u0)? != Classification::LocalMin {
                continue;
            }
            checked += 1;
            for row in proxdual::d2_j3_check(p, grid, u0, 5, 11)? {
                m.at_most(row.rel_mismatch, 5e-3);
            }
            for row in proxdual::d2_j8_p_check(p, grid, u0, 5, 13)? {
                m.at_most(row.rel_mismatch, 1e-3);
            }
        }
        m.require(checked > 0, checked as f64);
        Ok((m, format!("{checked} local-min cases, 5 directions each")))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 3, name: "curvature-formulas", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(3, "curvature-formulas", e),
    }
}

/// Criterion 4: gradient and Hessian finite-difference oracles.
pub fn c04_fd_oracles() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let grid = grid1d(5);
        let p = params(&grid, 0.7, 1.2, 1.5, 9.0, 0.4);
        let mut m = Margin::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-5;
        for _ in 0..50 {
            let u = Field::from_fn(grid.n, |_, _| rng.gen_range(-2.0..2.0));
            let d = Field::from_fn(grid.n, |_, _| rng.gen_range(-1.0..1.0));
            let g = grad_j(&p, &grid, &u)?;
            // directional derivative in the weighted inner product
            let analytic = grid.inner(&g, &d)?;
            let fd = (energy_j(&p, &grid, &(&u + h * &d))?
                - energy_j(&p, &grid, &(&u - h * &d))?)
                / (2.0 * h);
            m.at_most((analytic - fd).abs() / analytic.abs().max(1.0), 1e-6);

            let hess = hess_j(&p, &grid, &u)?;
            let quad = grid.inner(&hess.apply(&d)?, &d)?;
            let h2 = 1e-4; // 1e-5 would put roundoff noise above the bound
            let fd2 = (energy_j(&p, &grid, &(&u + h2 * &d))? - 2.0 * energy_j(&p, &grid, &u)?
                + energy_j(&p, &grid, &(&u - h2 * &d))?)
                / (h2 * h2);
            m.at_most((quad - fd2).abs() / quad.abs().max(1.0), 1e-5);
        }
        Ok((m, "50 random fields and directions".into()))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 4, name: "fd-oracles", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(4, "fd-oracles", e),
    }
}

/// Criterion 5: proximal descent is monotone and reaches stationarity on
/// 100 random starts across 3 configs.
pub fn c05_prox_descent() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let configs = [
            (grid1d(5), 1.0, 1.0, 10.0, 0.0),
            (grid1d(5), 0.5, 2.0, 15.0, 0.5),
            (grid1d(3), 1.0, 10.0, 25.0, 0.0),
        ];
        let mut m = Margin::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut total = 0;
        for (i, (grid, gamma, beta, k, f)) in configs.iter().enumerate() {
            let p = params(grid, *gamma, 1.0, *beta, *k, *f);
            let n = if i == 0 { 34 } else { 33 };
            for _ in 0..n {
                total += 1;
                let scale = beta.sqrt() * 1.5;
                let start = Field::from_fn(grid.n, |_, _| rng.gen_range(-scale..scale));
                let (cp, trace) = primal::prox_iterate(&p, grid, &start, 1e-11, 500)?;
                for w in trace.energies.windows(2) {
                    m.at_most(w[1] - w[0], 1e-12);
                }
                m.at_most(cp.residual_norm, 1e-6);
            }
        }
        Ok((m, format!("{total} starts across 3 configs")))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 5, name: "prox-descent", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(5, "prox-descent", e),
    }
}

/// Criterion 6: sign alignment never increases J (1000 fields, f ≡ 0.5);
/// the convexity probe tally is reported but not asserted.
pub fn c06_sign_align() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let grid = grid1d(5);
        let p = params(&grid, 1.0, 1.0, 1.0, 10.0, 0.5);
        let mut m = Margin::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let u = Field::from_fn(grid.n, |_, _| rng.gen_range(-3.0..3.0));
            let aligned = optcrit::sign_align(&grid, &u, &p.f)?;
            let before = energy_j(&p, &grid, &u)?;
            let after = energy_j(&p, &grid, &aligned)?;
            m.at_most(after - before, 1e-12);
        }
        // hypothesis-compliant instance for the probe
        let grid = grid1d(3);
        let p = params(&grid, 0.001, 1.0, 30.0, 70.0, 0.5);
        let probe = optcrit::convexity_probe(&p, &grid, 200, 60)?;
        Ok((
            m,
            format!(
                "1000 alignments; probe {}/{} combos in A+∩B+ ({} counterexamples reported)",
                probe.combos_passed,
                probe.combos_tested,
                probe.counterexamples.len()
            ),
        ))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 6, name: "thm2-sign-align", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(6, "thm2-sign-align", e),
    }
}

/// Criterion 7: weak duality on 200 samples and zero gap at the
/// constructed dual point of the numeric-conjugate formulation.
pub fn c07_weak_duality() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let grid = grid1d(3);
        let p = params(&grid, 0.001, 1.0, 30.0, 70.0, 0.5);
        let cp = primal::newton(&p, &grid, &grid.constant(p.beta.sqrt()), 1e-12, 200)?;
        let rep = optcrit::verify_thm3(&p, &grid, &cp.u0, 200, 77)?;
        let mut m = Margin::new();
        m.at_most(rep.gap, 1e-7);
        m.require(rep.weak_violations == 0, 1.0 - rep.weak_violations as f64);
        Ok((
            m,
            format!("gap {:.2e}, weak min {:.6e} vs J(u0) {:.6e}", rep.gap, rep.weak_min.unwrap(), rep.j_primal),
        ))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 7, name: "thm3-weak-duality", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(7, "thm3-weak-duality", e),
    }
}

/// Criterion 8: tensor dual saddle on N=31 with K=100, K12=10.
pub fn c08_tensor_saddle() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let grid = grid1d(31);
        let mut p = params(&grid, 1.0, 1.0, 1.0, 100.0, 0.5);
        p.k12 = Some(10.0);
        let km = KMat { k: 100.0, k12: 10.0 };
        let rep = tensordual::verify_thm4(&p, &grid, km, None, 10, 8)?;
        let mut m = Margin::new();
        m.at_most(rep.residual, 1e-8);
        m.at_most(rep.grad_norm, 1e-6);
        m.at_most(rep.gap, 1e-6);
        for ok in [rep.in_bstar, rep.in_cstar, rep.in_dstar, rep.in_uhat] {
            m.require(ok, if ok { 1.0 } else { -1.0 });
        }
        m.at_most(rep.diag_gap, 1e-8);
        m.require(rep.vstar_curv_min >= -1e-6, rep.vstar_curv_min + 1e-6);
        m.require(rep.v0star_curv_max <= 1e-6, 1e-6 - rep.v0star_curv_max);
        Ok((m, format!("residual {:.2e}, gap {:.2e}", rep.residual, rep.gap)))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 8, name: "thm4-saddle", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(8, "thm4-saddle", e),
    }
}

/// Concave objective maximized by repeated full grid scans over a
/// shrinking box (dimension ≤ 4), independent of the production solvers.
fn grid_refine_max(dim: usize, radius0: f64, eval: impl Fn(&[f64]) -> f64) -> f64 {
    let mut center = vec![0.0f64; dim];
    let mut radius = radius0;
    let mut best = f64::NEG_INFINITY;
    let steps = 7usize; // points per axis per scan: 2*steps+1
    for _ in 0..60 {
        let mut arg = center.clone();
        let npts = (2 * steps + 1).pow(dim as u32);
        for flat in 0..npts {
            let mut u = vec![0.0f64; dim];
            let mut r = flat;
            for (ui, ci) in u.iter_mut().zip(&center) {
                let off = (r % (2 * steps + 1)) as f64 / steps as f64 - 1.0;
                r /= 2 * steps + 1;
                *ui = ci + radius * off;
            }
            let v = eval(&u);
            if v > best {
                best = v;
                arg = u;
            }
        }
        center = arg;
        radius *= 0.6;
    }
    best
}

/// Criterion 9: both conjugate evaluations match dense brute-force
/// conjugation on tiny grids within 1e-7.
pub fn c09_conjugacy_oracles() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let mut m = Margin::new();
        // proximal dual G*(v*, v0*, p) on N = 3: the inner sup over the
        // auxiliary field is an exact concave square, eliminated here by
        // hand; the remaining sup over u is brute-forced.
        let grid = grid1d(3);
        let p = params(&grid, 1.0, 1.3, 1.0, 10.0, 0.0);
        let l = p.laplacian(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let t = proxdual::DualTriple {
                vstar: Field::from_fn(grid.n, |_, _| rng.gen_range(-2.0..2.0)),
                v0star: Field::from_fn(grid.n, |_, _| rng.gen_range(-1.0..1.0)),
                p: Field::from_fn(grid.n, |_, _| rng.gen_range(-2.0..2.0)),
            };
            let got = eval_gstar(&p, &grid, &t)?;
            let phi = |u: &[f64]| -> f64 {
                let uf = Field::from_vec(u.to_vec());
                let lu = l.apply(&uf).unwrap();
                let w = &t.vstar + p.k * &t.p;
                let mut val = grid.inner(&uf, &w).unwrap()
                    - 0.5 * grid.inner(&lu, &uf).unwrap()
                    - 0.5 * (p.k + p.eps) * grid.inner(&uf, &uf).unwrap();
                // sup over the square variable: s²/(2α) − s(u²−β) per node
                let inner = Field::from_fn(grid.n, |i, _| {
                    let s = t.v0star[i];
                    s * s / (2.0 * p.alpha) - s * (u[i] * u[i] - p.beta)
                });
                val += grid.integrate(&inner).unwrap();
                val
            };
            let oracle = grid_refine_max(grid.n, 5.0, phi);
            m.at_most((got - oracle).abs(), 1e-7);
        }

        // tensor dual G*_t on a single node: inner inf over the tensor
        // variable eliminated by hand, outer sup over (u1, u2) brute-forced.
        let grid = grid1d(1);
        let mut pt = params(&grid, 1.0, 1.3, 2.0, 100.0, 0.0);
        pt.k12 = Some(10.0);
        let km = KMat { k: 100.0, k12: 10.0 };
        for _ in 0..5 {
            let t = TensorDual {
                v1: grid.constant(rng.gen_range(-3.0..3.0)),
                v2: grid.constant(rng.gen_range(-3.0..3.0)),
                s11: grid.constant(rng.gen_range(-2.0..2.0)),
                s12: grid.constant(rng.gen_range(-2.0..2.0)),
                s22: grid.constant(rng.gen_range(-2.0..2.0)),
            };
            let got = tensordual::eval_gstar_t(&pt, &grid, km, &t)?;
            let sv = [[t.s11[0], t.s12[0]], [t.s12[0], t.s22[0]]];
            let kv = [[km.k, km.k12], [km.k12, km.k]];
            let phi = |u: &[f64]| -> f64 {
                let mut val = u[0] * t.v1[0] + u[1] * t.v2[0];
                for i in 0..2 {
                    for j in 0..2 {
                        let s = sv[i][j];
                        val += -2.0 * s * s / pt.alpha + s * (u[i] * u[j] - pt.beta);
                        val -= kv[i][j] / 2.0 * u[i] * u[j];
                    }
                }
                val * grid.weight
            };
            let oracle = grid_refine_max(2, 5.0, phi);
            m.at_most((got - oracle).abs(), 1e-7);
        }
        Ok((m, "5 random triples + 5 random tensor points".into()))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 9, name: "conjugacy-oracles", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(9, "conjugacy-oracles", e),
    }
}

/// Criterion 10: on the β=10 instance the naive dual denominator is
/// indefinite, while the proximal dual (with K above the convexity
/// threshold) passes the zero-gap, stationarity and curvature checks.
pub fn c10_failure_mode() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let grid = grid1d(3);
        let p = params(&grid, 1.0, 1.0, 10.0, 25.0, 0.0);
        let mut m = Margin::new();
        let (lo, hi) = proxdual::naive_dual_curvature(&p, &grid, &grid.zeros())?;
        m.require(lo < 0.0 && hi > 0.0, (-lo).min(hi));
        let kmin = primal::convexity_k(&p, &grid, &grid.zeros())?;
        m.require(p.k >= kmin, p.k - kmin);

        // saddle at the origin: zero gap and stationarity still hold in B*
        let rep0 = proxdual::verify_thm1(&p, &grid, &grid.zeros(), 0, 10)?;
        m.require(rep0.in_bstar, if rep0.in_bstar { 1.0 } else { -1.0 });
        m.at_most(rep0.gap.unwrap_or(f64::INFINITY), 1e-9 * (1.0 + rep0.j_primal.abs()));
        m.at_most(rep0.dual_grad_norm.unwrap_or(f64::INFINITY), 1e-8);

        // well minimum: full criteria 1-3 analogue including curvature
        let cp = primal::newton(&p, &grid, &grid.constant(p.beta.sqrt()), 1e-13, 200)?;
        let rep = proxdual::verify_thm1(&p, &grid, &cp.u0, 5, 10)?;
        m.require(rep.classification == Classification::LocalMin, 1.0);
        m.require(rep.in_bstar, if rep.in_bstar { 1.0 } else { -1.0 });
        m.at_most(rep.gap.unwrap_or(f64::INFINITY), 1e-9 * (1.0 + rep.j_primal.abs()));
        m.at_most(rep.dual_grad_norm.unwrap_or(f64::INFINITY), 1e-8);
        for row in &rep.nested_curvature {
            m.at_most(row.rel_mismatch, 5e-3);
        }
        for row in &rep.j8_p_curvature {
            m.at_most(row.rel_mismatch, 1e-3);
        }
        Ok((m, format!("naive spectrum [{lo:.2}, {hi:.2}], proximal K=25 ≥ {kmin:.2}")))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 10, name: "naive-vs-proximal", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(10, "naive-vs-proximal", e),
    }
}

/// Criterion 11: fixed seed implies byte-identical JSON reports.
pub fn c11_determinism() -> Criterion {
    let run = || -> Result<(Margin, String)> {
        let text = "dim=1\nextent=1\nnodes=7\ngamma=0.5\nalpha=1\nbeta=1.5\nK=12\neps=0.1\nf=const:0.5\ntask=solve-primal\nnsamples=50\nseed=314";
        let s = harness::parse_config(text)?;
        let a = to_json(&harness::run_scenario(&s));
        let b = to_json(&harness::run_scenario(&s));
        let mut m = Margin::new();
        m.require(a == b, if a == b { 1.0 } else { -1.0 });
        Ok((m, format!("{} bytes, two runs identical: {}", a.len(), a == b)))
    };
    match run() {
        Ok((m, detail)) => Criterion { id: 11, name: "report-determinism", pass: m.pass, margin: m.worst, detail },
        Err(e) => Criterion::failed(11, "report-determinism", e),
    }
}

pub fn run_all() -> Vec<Criterion> {
    vec![
        c01_zero_gap(),
        c02_dual_stationarity(),
        c03_curvature(),
        c04_fd_oracles(),
        c05_prox_descent(),
        c06_sign_align(),
        c07_weak_duality(),
        c08_tensor_saddle(),
        c09_conjugacy_oracles(),
        c10_failure_mode(),
        c11_determinism(),
    ]
}

/// One status line per criterion, as printed by `check` and the
/// acceptance test.
pub fn format_line(c: &Criterion) -> String {
    format!(
        "{} criterion {:>2} {:<24} margin {:+.3e}  {}",
        if c.pass { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        c.margin,
        c.detail
    )
}
