//! Property-based invariants over randomly generated fields.

use glduality::grid::{build_grid, Field, GridSpec};
use glduality::model::{energy_j, ModelParams};
use glduality::optcrit::sign_align;
use proptest::prelude::*;

fn field(n: usize) -> impl Strategy<Value = Field> {
    proptest::collection::vec(-5.0f64..5.0, n).prop_map(Field::from_vec)
}

proptest! {
    #[test]
    fn integrate_is_monotone_and_homogeneous(u in field(5), c in 0.1f64..10.0) {
        let grid = build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: 5 }).unwrap();
        let abs = u.map(f64::abs);
        prop_assert!(grid.integrate(&abs).unwrap() >= grid.integrate(&u).unwrap() - 1e-12);
        let scaled = grid.integrate(&(c * &u)).unwrap();
        prop_assert!((scaled - c * grid.integrate(&u).unwrap()).abs() <= 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn w1inf_dominates_sup_norm(u in field(5)) {
        let grid = build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: 5 }).unwrap();
        prop_assert!(grid.w1inf_norm(&u).unwrap() >= u.amax());
    }

    #[test]
    fn sign_align_is_idempotent_and_never_increases_j(u in field(5)) {
        let grid = build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: 5 }).unwrap();
        let params = ModelParams {
            gamma: 1.0, alpha: 1.0, beta: 1.0, k: 10.0, eps: 0.1,
            f: grid.constant(0.5), k12: None,
        };
        let once = sign_align(&grid, &u, &params.f).unwrap();
        let twice = sign_align(&grid, &once, &params.f).unwrap();
        prop_assert_eq!(&once, &twice);
        let before = energy_j(&params, &grid, &u).unwrap();
        let after = energy_j(&params, &grid, &once).unwrap();
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn energy_is_even_without_forcing(u in field(5)) {
        let grid = build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: 5 }).unwrap();
        let params = ModelParams {
            gamma: 1.0, alpha: 1.0, beta: 1.0, k: 10.0, eps: 0.1,
            f: grid.zeros(), k12: None,
        };
        let j = energy_j(&params, &grid, &u).unwrap();
        let jn = energy_j(&params, &grid, &(-&u)).unwrap();
        prop_assert!((j - jn).abs() <= 1e-12 * (1.0 + j.abs()));
    }
}
