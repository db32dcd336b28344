//! Uniform cell-centered Cartesian grids on `[-L, L]^dim` and the discrete
//! operators shared by the solvers.
//!
//! Fields are stored row-major: in 2D the cell `(ix, iy)` lives at
//! `iy * cells + ix`, with `x` varying fastest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("need at least {MIN_CELLS} cells per axis, got {0}")]
    TooFewCells(usize),
    #[error("half width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at cell {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// A uniform grid with the same number of cells and spacing on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    cells: usize,
    half_width: f64,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, cells: usize, half_width: f64) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::BadDimension(dim));
        }
        if cells < MIN_CELLS {
            return Err(GridError::TooFewCells(cells));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::BadHalfWidth(half_width));
        }
        Ok(Self {
            dim,
            cells,
            half_width,
            h: 2.0 * half_width / cells as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells along one axis.
    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Uniform spacing `h = 2L / cells`.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of cells, `cells^dim`.
    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Measure of one cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Center of the `i`-th cell along an axis: `-L + (i + 1/2) h`.
    #[inline]
    pub fn center_1d(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h
    }

    /// Per-axis indices of a flat cell index. The second entry is 0 in 1D.
    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx % self.cells, idx / self.cells]
        }
    }

    #[inline]
    pub fn flatten(&self, ix: usize, iy: usize) -> usize {
        if self.dim == 1 {
            ix
        } else {
            iy * self.cells + ix
        }
    }

    /// Cell center as a point; the second coordinate is 0 in 1D.
    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let [ix, iy] = self.unflatten(idx);
        if self.dim == 1 {
            [self.center_1d(ix), 0.0]
        } else {
            [self.center_1d(ix), self.center_1d(iy)]
        }
    }

    /// Index of the cell whose closed extent contains `x`, if inside the box.
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let axis = |c: f64| -> Option<usize> {
            let s = (c + self.half_width) / self.h;
            if !(0.0..=self.cells as f64).contains(&s) {
                return None;
            }
            Some((s.floor() as usize).min(self.cells - 1))
        };
        let ix = axis(x[0])?;
        let iy = if self.dim == 1 { 0 } else { axis(x[1])? };
        Some(self.flatten(ix, iy))
    }

    /// Distance, counted in cells, from cell `idx` to the nearest box edge
    /// (0 for a cell touching the boundary).
    pub fn cells_from_edge(&self, idx: usize) -> usize {
        let [ix, iy] = self.unflatten(idx);
        let d = |i: usize| i.min(self.cells - 1 - i);
        if self.dim == 1 {
            d(ix)
        } else {
            d(ix).min(d(iy))
        }
    }

    /// Axis neighbours of `idx`, `None` where the neighbour would be outside
    /// the box. Order: -x, +x, -y, +y (the last two absent in 1D).
    #[inline]
    pub fn neighbors(&self, idx: usize) -> [Option<usize>; 4] {
        let [ix, iy] = self.unflatten(idx);
        let n = self.cells;
        let left = (ix > 0).then(|| idx - 1);
        let right = (ix + 1 < n).then(|| idx + 1);
        if self.dim == 1 {
            [left, right, None, None]
        } else {
            let down = (iy > 0).then(|| idx - n);
            let up = (iy + 1 < n).then(|| idx + n);
            [left, right, down, up]
        }
    }
}

/// Real values, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        assert!(value.is_finite(), "constant field value must be finite");
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Builds a field by evaluating `f` at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::from_vec(grid, values).expect("from_fn produced a non-finite value")
    }

    pub fn from_vec(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Wraps values the caller has already validated.
    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max |a - b|` over cells.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64, GridError> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `sum |a - b| h^dim`.
    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64, GridError> {
        same_grid(&self.grid, &other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(s * self.grid.cell_volume())
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// A set of cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    grid: Grid,
    member: Vec<bool>,
}

impl Eq for Grid {}

impl RegionMask {
    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            member: vec![false; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, member: Vec<bool>) -> Result<Self, GridError> {
        if member.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: member.len(),
            });
        }
        Ok(Self { grid, member })
    }

    /// Cells whose center satisfies `pred`.
    pub fn from_fn(grid: Grid, mut pred: impl FnMut([f64; 2]) -> bool) -> Self {
        let member = (0..grid.len()).map(|i| pred(grid.center(i))).collect();
        Self { grid, member }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn members(&self) -> &[bool] {
        &self.member
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.member[idx]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.member[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }

    /// Flat indices of member cells, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.member
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.grid == other.grid
            && self
                .member
                .iter()
                .zip(&other.member)
                .all(|(&a, &b)| !a || b)
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<RegionMask, GridError> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            member: self
                .member
                .iter()
                .zip(&other.member)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask, GridError> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            member: self
                .member
                .iter()
                .zip(&other.member)
                .map(|(&a, &b)| a || b)
                .collect(),
        })
    }

    pub fn complement(&self) -> RegionMask {
        Self {
            grid: self.grid,
            member: self.member.iter().map(|&m| !m).collect(),
        }
    }

    /// Members whose axis neighbours are all members too (cells touching the
    /// box edge are never interior).
    pub fn interior(&self) -> RegionMask {
        let g = self.grid;
        let member = (0..g.len())
            .map(|i| {
                self.member[i]
                    && g.neighbors(i)[..2 * g.dim()]
                        .iter()
                        .all(|nb| nb.is_some_and(|j| self.member[j]))
            })
            .collect();
        Self { grid: g, member }
    }

    /// Minimum, over members, of the distance in cells to the box edge.
    /// `None` for the empty mask.
    pub fn edge_clearance(&self) -> Option<usize> {
        self.indices()
            .into_iter()
            .map(|i| self.grid.cells_from_edge(i))
            .min()
    }
}

fn same_grid(a: &Grid, b: &Grid) -> Result<(), GridError> {
    if a == b {
        Ok(())
    } else {
        Err(GridError::GridMismatch)
    }
}

/// Conjugate gradients for `(-Δ_h + diag(shift)) x = rhs` restricted to the
/// cells `idx` of `mask` (zero outside). Stops at relative residual `rtol`;
/// on stagnation returns the relative residual reached.
pub(crate) fn masked_solve(
    mask: &RegionMask,
    idx: &[usize],
    shift: &[f64],
    rhs: &[f64],
    rtol: f64,
) -> Result<Vec<f64>, f64> {
    let g = *mask.grid();
    let inv_h2 = 1.0 / (g.h * g.h);
    let diag = 2.0 * g.dim as f64;
    let mut pos = vec![usize::MAX; g.len()];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (k, &i) in idx.iter().enumerate() {
            let mut s = diag * x[k];
            for j in g.neighbors(i).iter().take(2 * g.dim).flatten() {
                if pos[*j] != usize::MAX {
                    s -= x[pos[*j]];
                }
            }
            out[k] = s * inv_h2 + shift[k] * x[k];
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let m = idx.len();
    let mut x = vec![0.0; m];
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut d = r.clone();
    let mut q = vec![0.0; m];
    let mut rr = dot(&r, &r);
    for _ in 0..(10 * m + 100) {
        if rr.sqrt() <= rtol * bnorm {
            return Ok(x);
        }
        apply(&d, &mut q);
        let alpha = rr / dot(&d, &q);
        for k in 0..m {
            x[k] += alpha * d[k];
            r[k] -= alpha * q[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..m {
            d[k] = r[k] + beta * d[k];
        }
    }
    Err(rr.sqrt() / bnorm)
}

/// Five-point (three-point in 1D) Laplacian with a zero ghost value outside
/// the box.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let inv_h2 = 1.0 / (g.h * g.h);
    let v = f.values();
    let out = (0..g.len())
        .map(|i| {
            let nb = g.neighbors(i);
            let mut acc = -2.0 * g.dim() as f64 * v[i];
            for j in nb.iter().take(2 * g.dim()) {
                if let Some(j) = *j {
                    acc += v[j];
                }
            }
            acc * inv_h2
        })
        .collect();
    ScalarField::from_vec_unchecked(g, out)
}

/// Squared gradient magnitude from central differences, one-sided on the
/// first and last cell of each axis.
pub fn grad_sq(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let v = f.values();
    let out = (0..g.len())
        .map(|i| {
            let nb = g.neighbors(i);
            let mut s = 0.0;
            for axis in 0..g.dim() {
                let d = match (nb[2 * axis], nb[2 * axis + 1]) {
                    (Some(lo), Some(hi)) => (v[hi] - v[lo]) / (2.0 * g.h),
                    (None, Some(hi)) => (v[hi] - v[i]) / g.h,
                    (Some(lo), None) => (v[i] - v[lo]) / g.h,
                    (None, None) => 0.0,
                };
                s += d * d;
            }
            s
        })
        .collect();
    ScalarField::from_vec_unchecked(g, out)
}

/// Face coefficient of the conservative flux `m (p_j - p_i) / h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mobility {
    /// `m = (n_i + n_j) / 2`; second order where `n` is smooth.
    Mean,
    /// `m` = the density on the higher-pressure side. With `p` increasing in
    /// `n` the explicit step is then monotone in every neighbour, so it
    /// preserves order; first order.
    Upwind,
}

/// Conservative discretization of `div(n grad p)`.
///
/// Interior faces carry `mean(n) * (p_j - p_i) / h`; faces on the box edge
/// carry no flux, so `integrate` of the result vanishes to roundoff.
pub fn flux_divergence(n: &ScalarField, p: &ScalarField) -> Result<ScalarField, GridError> {
    flux_divergence_with(n, p, Mobility::Mean)
}

pub fn flux_divergence_with(n: &ScalarField, p: &ScalarField, mobility: Mobility) -> Result<ScalarField, GridError> {
    same_grid(n.grid(), p.grid())?;
    let g = *n.grid();
    let mut out = vec![0.0; g.len()];
    flux_divergence_into(&g, n.values(), p.values(), mobility, &mut out);
    Ok(ScalarField::from_vec_unchecked(g, out))
}

/// Face-by-face accumulation used by [`flux_divergence`] and the PME stepper.
pub(crate) fn flux_divergence_into(g: &Grid, n: &[f64], p: &[f64], mobility: Mobility, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let inv_h2 = 1.0 / (g.h * g.h);
    let cells = g.cells;
    let mut face = |a: usize, b: usize| {
        let m = match mobility {
            Mobility::Mean => 0.5 * (n[a] + n[b]),
            Mobility::Upwind if p[b] > p[a] => n[b],
            Mobility::Upwind => n[a],
        };
        let flux = m * (p[b] - p[a]) * inv_h2;
        out[a] += flux;
        out[b] -= flux;
    };
    if g.dim == 1 {
        for i in 0..cells - 1 {
            face(i, i + 1);
        }
    } else {
        for iy in 0..cells {
            let row = iy * cells;
            for ix in 0..cells - 1 {
                face(row + ix, row + ix + 1);
            }
        }
        for iy in 0..cells - 1 {
            let row = iy * cells;
            for ix in 0..cells {
                face(row + ix, row + cells + ix);
            }
        }
    }
}

/// `sum f h^dim`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g1(n: usize) -> Grid {
        Grid::new(1, n, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(Grid::new(3, 16, 1.0), Err(GridError::BadDimension(3)));
        assert_eq!(Grid::new(1, 4, 1.0), Err(GridError::TooFewCells(4)));
        assert!(Grid::new(2, 16, 0.0).is_err());
        assert!(Grid::new(2, 16, f64::NAN).is_err());
    }

    #[test]
    fn centers_are_reproducible_from_indices() {
        let g = Grid::new(2, 10, 2.5).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.center(0), [-2.25, -2.25]);
        assert_eq!(g.center(g.flatten(9, 3)), [-2.5 + 9.5 * 0.5, -2.5 + 3.5 * 0.5]);
        for i in 0..g.len() {
            assert_eq!(g.locate(g.center(i)), Some(i));
        }
    }

    #[test]
    fn from_vec_rejects_nan_and_wrong_length() {
        let g = g1(8);
        assert!(matches!(
            ScalarField::from_vec(g, vec![0.0; 7]),
            Err(GridError::LengthMismatch { .. })
        ));
        let mut v = vec![0.0; 8];
        v[3] = f64::INFINITY;
        assert!(matches!(
            ScalarField::from_vec(g, v),
            Err(GridError::NonFinite { index: 3, .. })
        ));
    }

    #[test]
    fn laplacian_of_constant_vanishes_away_from_edge() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let lap = laplacian(&ScalarField::constant(g, 3.7));
        let scale = 3.7 / (g.spacing() * g.spacing());
        for i in 0..g.len() {
            if g.cells_from_edge(i) >= 2 {
                assert!(lap[i].abs() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn laplacian_of_quadratic_is_two() {
        let g = g1(64);
        let lap = laplacian(&ScalarField::from_fn(g, |x| x[0] * x[0]));
        for i in 1..63 {
            assert_relative_eq!(lap[i], 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn grad_sq_exact_for_affine() {
        let g = g1(32);
        let gs = grad_sq(&ScalarField::from_fn(g, |x| 3.0 * x[0]));
        for i in 0..32 {
            assert_relative_eq!(gs[i], 9.0, epsilon = 1e-10);
        }
        let g = Grid::new(2, 16, 1.0).unwrap();
        let gs = grad_sq(&ScalarField::from_fn(g, |x| x[0] + 2.0 * x[1]));
        for i in 0..g.len() {
            assert_relative_eq!(gs[i], 5.0, epsilon = 1e-10);
        }
        assert!(grad_sq(&ScalarField::constant(g, 2.0)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flux_divergence_reduces_to_laplacian_for_unit_density() {
        let g = Grid::new(2, 24, 1.0).unwrap();
        let p = ScalarField::from_fn(g, |x| (x[0] * 2.0).sin() * x[1]);
        let div = flux_divergence(&ScalarField::constant(g, 1.0), &p).unwrap();
        let lap = laplacian(&p);
        for i in 0..g.len() {
            if g.cells_from_edge(i) >= 1 {
                assert_relative_eq!(div[i], lap[i], epsilon = 1e-9, max_relative = 1e-12);
            }
        }
        let flat = flux_divergence(&p, &ScalarField::constant(g, 0.4)).unwrap();
        assert!(flat.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flux_divergence_rejects_mismatched_grids() {
        let a = ScalarField::zeros(g1(16));
        let b = ScalarField::zeros(g1(32));
        assert_eq!(flux_divergence(&a, &b), Err(GridError::GridMismatch));
    }

    #[test]
    fn integrate_counts_cell_measure() {
        assert_eq!(integrate(&ScalarField::zeros(g1(16))), 0.0);
        assert_relative_eq!(integrate(&ScalarField::constant(g1(16), 1.0)), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mask_interior_and_set_ops() {
        let g = g1(16);
        let a = RegionMask::from_fn(g, |x| x[0].abs() < 0.5);
        let b = RegionMask::from_fn(g, |x| x[0] > 0.0);
        assert_eq!(a.count(), 8);
        assert_eq!(a.interior().count(), 6);
        assert!(a.intersection(&b).unwrap().is_subset_of(&a));
        assert!(a.is_subset_of(&a.union(&b).unwrap()));
        assert_eq!(a.complement().count(), 8);
        assert_eq!(a.edge_clearance(), Some(4));
    }
}
