//! Rectangular Dirichlet grids, nodal fields and the quadrature rule that
//! defines every integral and inner product in the crate.
//!
//! Interior nodes are ordered lexicographically (x fastest). Integrals use
//! the interior-node rectangle rule `hᵈ Σᵢ gᵢ` with a fixed left-to-right
//! summation order so results are reproducible bit-for-bit.

use nalgebra::DVector;

use crate::linalg::SymOp;
use crate::{Error, Result};

/// Nodal values on the interior grid nodes, lexicographic order.
pub type Field = DVector<f64>;

/// User-facing description of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Spatial dimension, 1, 2 or 3.
    pub dimension: usize,
    /// Side length of the box (same along every axis).
    pub extent: f64,
    /// Interior nodes per axis.
    pub nodes_per_axis: usize,
}

/// A built grid: spacing, node count and quadrature weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    /// Mesh spacing `extent / (nodes_per_axis + 1)`.
    pub h: f64,
    /// Total interior node count `nodes_per_axisᵈ`.
    pub n: usize,
    /// Quadrature weight `hᵈ`.
    pub weight: f64,
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    if !(1..=3).contains(&spec.dimension) {
        return Err(Error::InvalidGrid(format!(
            "dimension must be 1, 2 or 3, got {}",
            spec.dimension
        )));
    }
    if spec.nodes_per_axis < 1 {
        return Err(Error::InvalidGrid("nodes_per_axis must be >= 1".into()));
    }
    if !(spec.extent > 0.0) {
        return Err(Error::InvalidGrid(format!("extent must be > 0, got {}", spec.extent)));
    }
    let h = spec.extent / (spec.nodes_per_axis + 1) as f64;
    let n = spec.nodes_per_axis.pow(spec.dimension as u32);
    Ok(Grid { spec, h, n, weight: h.powi(spec.dimension as i32) })
}

impl Grid {
    pub fn check_len(&self, g: &Field) -> Result<()> {
        if g.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: g.len() });
        }
        Ok(())
    }

    /// Zero field on this grid.
    pub fn zeros(&self) -> Field {
        Field::zeros(self.n)
    }

    /// Constant field on this grid.
    pub fn constant(&self, c: f64) -> Field {
        Field::from_element(self.n, c)
    }

    /// `hᵈ Σᵢ gᵢ`, summed left to right.
    pub fn integrate(&self, g: &Field) -> Result<f64> {
        self.check_len(g)?;
        let mut s = 0.0;
        for i in 0..self.n {
            s += g[i];
        }
        Ok(self.weight * s)
    }

    /// Discrete L² inner product `∫ a·b`.
    pub fn inner(&self, a: &Field, b: &Field) -> Result<f64> {
        self.check_len(a)?;
        self.check_len(b)?;
        let mut s = 0.0;
        for i in 0..self.n {
            s += a[i] * b[i];
        }
        Ok(self.weight * s)
    }

    /// Decompose a lexicographic index into per-axis coordinates.
    pub(crate) fn coords(&self, idx: usize) -> [usize; 3] {
        let m = self.spec.nodes_per_axis;
        let mut c = [0usize; 3];
        let mut r = idx;
        for a in c.iter_mut().take(self.spec.dimension) {
            *a = r % m;
            r /= m;
        }
        c
    }

    /// Neighbor of `idx` along `axis` shifted by `step` (+1/-1), if interior.
    pub(crate) fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let m = self.spec.nodes_per_axis;
        let c = self.coords(idx);
        let pos = c[axis] as isize + step;
        if pos < 0 || pos >= m as isize {
            return None;
        }
        let stride = m.pow(axis as u32);
        Some((idx as isize + step * stride as isize) as usize)
    }

    /// Discrete `W^{1,∞}` norm: max of nodal sup norm and forward-difference
    /// slopes `|Δu|/h` per axis, with Dirichlet ghost zeros at the boundary.
    pub fn w1inf_norm(&self, u: &Field) -> Result<f64> {
        self.check_len(u)?;
        let mut best: f64 = 0.0;
        for i in 0..self.n {
            best = best.max(u[i].abs());
            for axis in 0..self.spec.dimension {
                // forward difference; missing neighbor is the zero boundary
                let right = self.neighbor(i, axis, 1).map_or(0.0, |j| u[j]);
                best = best.max((right - u[i]).abs() / self.h);
                // the backward boundary face only appears as a forward
                // difference from the ghost node
                if self.neighbor(i, axis, -1).is_none() {
                    best = best.max(u[i].abs() / self.h);
                }
            }
        }
        Ok(best)
    }

    /// The standard `(2d+1)`-point stencil for `−γ∇²` with homogeneous
    /// Dirichlet truncation: `2dγ/h²` on the diagonal, `−γ/h²` per neighbor.
    pub fn assemble_neg_laplacian(&self, gamma: f64) -> Result<SymOp> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(SymOp::neg_laplacian(*self, gamma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r1() -> Grid {
        build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: 3 }).unwrap()
    }

    #[test]
    fn build_grid_basics() {
        let g = r1();
        assert_eq!(g.h, 0.25);
        assert_eq!(g.n, 3);
        assert_eq!(g.weight, 0.25);

        let g2 = build_grid(GridSpec { dimension: 2, extent: 1.0, nodes_per_axis: 3 }).unwrap();
        assert_eq!(g2.h, 0.25);
        assert_eq!(g2.n, 9);
        assert_eq!(g2.weight, 0.0625);

        assert!(build_grid(GridSpec { dimension: 1, extent: 1.0, nodes_per_axis: 0 }).is_err());
        assert!(build_grid(GridSpec { dimension: 4, extent: 1.0, nodes_per_axis: 3 }).is_err());
        assert!(build_grid(GridSpec { dimension: 1, extent: -1.0, nodes_per_axis: 3 }).is_err());
    }

    #[test]
    fn integrate_examples() {
        let g = r1();
        assert_eq!(g.integrate(&Field::from_vec(vec![1.0, 1.0, 1.0])).unwrap(), 0.75);
        assert_eq!(g.integrate(&g.zeros()).unwrap(), 0.0);
        assert_eq!(g.integrate(&Field::from_vec(vec![2.0, -1.0, 3.0])).unwrap(), 1.0);
        assert!(g.integrate(&Field::zeros(4)).is_err());
    }

    #[test]
    fn inner_examples() {
        let g = r1();
        let ones = g.constant(1.0);
        assert_eq!(g.inner(&ones, &ones).unwrap(), 0.75);
        let a = Field::from_vec(vec![1.0, 0.0, 0.0]);
        let b = Field::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(g.inner(&a, &b).unwrap(), 0.0);
        assert_eq!(g.inner(&g.constant(2.0), &ones).unwrap(), 1.5);
    }

    #[test]
    fn neg_laplacian_stencil() {
        let g = r1();
        let l = g.assemble_neg_laplacian(1.0).unwrap();
        let y = l.apply(&g.constant(1.0)).unwrap();
        assert_eq!(y.as_slice(), &[16.0, 0.0, 16.0]);
        let d = l.to_dense();
        assert_eq!(d[(0, 0)], 32.0);
        assert_eq!(d[(1, 1)], 32.0);
        assert_eq!(d[(0, 1)], -16.0);
        assert_eq!(d[(0, 2)], 0.0);
        assert!(g.assemble_neg_laplacian(0.0).is_err());
    }

    #[test]
    fn w1inf_examples() {
        let g = r1();
        assert_eq!(g.w1inf_norm(&g.zeros()).unwrap(), 0.0);
        assert_eq!(g.w1inf_norm(&g.constant(1.0)).unwrap(), 4.0);
        assert_eq!(g.w1inf_norm(&Field::from_vec(vec![0.5, 0.25, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn integrate_is_linear_exactly() {
        let g = r1();
        let a = Field::from_vec(vec![0.1, -0.7, 2.3]);
        let b = Field::from_vec(vec![1.9, 0.4, -0.2]);
        let lhs = g.integrate(&(&a + &b)).unwrap();
        let rhs = g.integrate(&a).unwrap() + g.integrate(&b).unwrap();
        assert!((lhs - rhs).abs() <= 1e-15 * (1.0 + lhs.abs()));
        assert_eq!(g.inner(&a, &b).unwrap(), g.inner(&b, &a).unwrap());
    }
}
