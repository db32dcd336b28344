//! Set-valued measurements on [`RegionMask`]s. Sets are unions of cells and
//! every distance is measured between cell centers.

use thiserror::Error;

use crate::grid::{Grid, GridError, RegionMask, ScalarField};

/// Directions swept by [`minimal_diameter`] in 2D.
pub const DEFAULT_ANGLES: usize = 360;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("the set is empty")]
    EmptySet,
    #[error("radius {r} is below three cells ({min})")]
    RadiusTooSmall { r: f64, min: f64 },
    #[error("ball of radius {r} around cell {cell} leaves the grid")]
    BallOutsideGrid { cell: usize, r: f64 },
    #[error("cell index {0} out of range")]
    BadCell(usize),
    #[error("threshold must be >= 0, got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `{f > threshold}`.
pub fn positivity_set(f: &ScalarField, threshold: f64) -> RegionMask {
    let member = f.values().iter().map(|&v| v > threshold).collect();
    RegionMask::from_vec(*f.grid(), member).expect("length matches by construction")
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn centers(a: &RegionMask) -> Vec<[f64; 2]> {
    let g = a.grid();
    a.indices().into_iter().map(|i| g.center(i)).collect()
}

fn directed(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in a {
        let mut best = f64::INFINITY;
        for &y in b {
            let d = dist2(x, y);
            if d < best {
                best = d;
                // x cannot raise the maximum any more
                if best <= worst {
                    break;
                }
            }
        }
        worst = worst.max(best);
    }
    worst.sqrt()
}

/// Hausdorff distance between the cell-center sets of `a` and `b`. Two
/// empty sets are at distance 0; an empty and a nonempty set at `+inf`.
pub fn hausdorff_distance(a: &RegionMask, b: &RegionMask) -> Result<f64, GeometryError> {
    if a.grid() != b.grid() {
        return Err(GridError::GridMismatch.into());
    }
    Ok(match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => {
            let ca = centers(a);
            let cb = centers(b);
            directed(&ca, &cb).max(directed(&cb, &ca))
        }
    })
}

/// Cells whose center lies within `delta` of a center of `a`.
pub fn neighborhood(a: &RegionMask, delta: f64) -> RegionMask {
    let g = *a.grid();
    let mut out = a.clone();
    if delta <= 0.0 {
        return out;
    }
    let n = g.cells_per_axis() as isize;
    let reach = (delta / g.spacing()).floor() as isize;
    let d2 = delta * delta * (1.0 + 1e-12);
    let ny = if g.dim() == 2 { reach } else { 0 };
    for i in a.indices() {
        let [ix, iy] = g.unflatten(i);
        let c = g.center(i);
        for dy in -ny..=ny {
            let jy = iy as isize + dy;
            if jy < 0 || jy >= n {
                continue;
            }
            for dx in -reach..=reach {
                let jx = ix as isize + dx;
                if jx < 0 || jx >= n {
                    continue;
                }
                let j = g.flatten(jx as usize, jy as usize);
                if !out.contains(j) && dist2(c, g.center(j)) <= d2 {
                    out.set(j, true);
                }
            }
        }
    }
    out
}

/// Width of the thinnest slab containing the cell centers, plus one cell.
/// Directions are `angles` equally spaced angles in `[0, π)` (ignored in 1D).
pub fn minimal_diameter_with(a: &RegionMask, angles: usize) -> Result<f64, GeometryError> {
    if a.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    let h = a.grid().spacing();
    let pts = centers(a);
    if a.grid().dim() == 1 {
        let (lo, hi) = extent(pts.iter().map(|p| p[0]));
        return Ok(hi - lo + h);
    }
    let mut best = f64::INFINITY;
    for k in 0..angles.max(1) {
        let th = std::f64::consts::PI * k as f64 / angles.max(1) as f64;
        let (s, c) = th.sin_cos();
        let (lo, hi) = extent(pts.iter().map(|p| c * p[0] + s * p[1]));
        best = best.min(hi - lo);
    }
    Ok(best + h)
}

pub fn minimal_diameter(a: &RegionMask) -> Result<f64, GeometryError> {
    minimal_diameter_with(a, DEFAULT_ANGLES)
}

/// Largest center-to-center distance, plus one cell.
pub fn diameter(a: &RegionMask) -> Result<f64, GeometryError> {
    if a.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    let pts = centers(a);
    let mut d2: f64 = 0.0;
    for (k, &x) in pts.iter().enumerate() {
        for &y in &pts[k + 1..] {
            d2 = d2.max(dist2(x, y));
        }
    }
    Ok(d2.sqrt() + a.grid().spacing())
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Cells with center within `r` of the center of cell `x`.
pub fn ball(grid: &Grid, x: usize, r: f64) -> Result<RegionMask, GeometryError> {
    if x >= grid.len() {
        return Err(GeometryError::BadCell(x));
    }
    let c = grid.center(x);
    let l = grid.half_width();
    let axes = grid.dim();
    if (0..axes).any(|k| c[k] - r < -l || c[k] + r > l) {
        return Err(GeometryError::BallOutsideGrid { cell: x, r });
    }
    let mut only = RegionMask::empty(*grid);
    only.set(x, true);
    Ok(neighborhood(&only, r))
}

fn zero_set_in_ball(
    p: &ScalarField,
    x: usize,
    r: f64,
    threshold: f64,
) -> Result<(RegionMask, RegionMask), GeometryError> {
    let g = p.grid();
    if r < 3.0 * g.spacing() {
        return Err(GeometryError::RadiusTooSmall {
            r,
            min: 3.0 * g.spacing(),
        });
    }
    if threshold < 0.0 || threshold.is_nan() {
        return Err(GeometryError::BadThreshold(threshold));
    }
    let b = ball(g, x, r)?;
    let zero = positivity_set(p, threshold).complement();
    Ok((zero.intersection(&b)?, b))
}

/// `MD({p ≤ threshold} ∩ B_r(x)) / r`, with `MD(∅) = 0`.
pub fn flatness_ratio(p: &ScalarField, x: usize, r: f64, threshold: f64) -> Result<f64, GeometryError> {
    let (set, _) = zero_set_in_ball(p, x, r, threshold)?;
    if set.is_empty() {
        return Ok(0.0);
    }
    Ok(minimal_diameter(&set)? / r)
}

/// Fraction of the cells of `B_r(x)` where `p ≤ threshold`.
pub fn lebesgue_density(p: &ScalarField, x: usize, r: f64, threshold: f64) -> Result<f64, GeometryError> {
    let (set, b) = zero_set_in_ball(p, x, r, threshold)?;
    Ok(set.count() as f64 / b.count() as f64)
}

/// `(R₋, R₊)` of `a` around `center`. `R₊` is the farthest member center plus
/// half a cell. `R₋` is the distance from `center` to the closest point of
/// the nearest cell (or of the box exterior) that is not a member.
pub fn radial_bounds(a: &RegionMask, center: [f64; 2]) -> Result<(f64, f64), GeometryError> {
    if a.is_empty() {
        return Err(GeometryError::EmptySet);
    }
    let g = a.grid();
    let h = g.spacing();
    let half = 0.5 * h;
    let axes = g.dim();
    let mut r_plus: f64 = 0.0;
    let mut r_minus = (0..axes)
        .map(|k| g.half_width() - center[k].abs())
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    for i in 0..g.len() {
        let c = g.center(i);
        if a.contains(i) {
            r_plus = r_plus.max(dist2(c, center).sqrt());
        } else {
            let mut d2 = 0.0;
            for k in 0..axes {
                let gap = ((c[k] - center[k]).abs() - half).max(0.0);
                d2 += gap * gap;
            }
            r_minus = r_minus.min(d2.sqrt());
        }
    }
    Ok((r_minus, r_plus + half))
}

/// Members with at least one axis neighbour outside the set (or touching the
/// box edge).
pub fn boundary_cells(a: &RegionMask) -> RegionMask {
    let interior = a.interior();
    let member = a
        .members()
        .iter()
        .zip(interior.members())
        .map(|(&m, &int)| m && !int)
        .collect();
    RegionMask::from_vec(*a.grid(), member).expect("same grid")
}

/// Boundary cell count times `h^(dim-1)`: a crude perimeter.
pub fn perimeter_proxy(a: &RegionMask) -> f64 {
    let g = a.grid();
    boundary_cells(a).count() as f64 * g.spacing().powi(g.dim() as i32 - 1)
}

/// Left and right ends of the positive set of a 1D field that vanishes
/// quadratically at its free boundary, located to sub-cell accuracy by
/// extrapolating `sqrt(f)` linearly from the two outermost positive cells.
/// `None` if `f` has no positive cell.
pub fn quadratic_front_1d(f: &ScalarField) -> Option<(f64, f64)> {
    let g = f.grid();
    let v = f.values();
    let h = g.spacing();
    let first = v.iter().position(|&x| x > 0.0)?;
    let last = v.iter().rposition(|&x| x > 0.0)?;
    let edge = |m: usize, inner: Option<usize>, dir: f64| {
        let sm = v[m].sqrt();
        match inner.map(|j| v[j].max(0.0).sqrt()) {
            Some(si) if si > sm => g.center_1d(m) + dir * sm * h / (si - sm),
            _ => g.center_1d(m) + dir * 0.5 * h,
        }
    };
    let right = edge(last, last.checked_sub(1), 1.0);
    let left = edge(first, (first + 1 < v.len()).then_some(first + 1), -1.0);
    Some((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hausdorff_basic() {
        let g = Grid::new(1, 200, 2.0).unwrap();
        let a = RegionMask::from_fn(g, |x| (0.0..1.0).contains(&x[0]));
        let b = RegionMask::from_fn(g, |x| (0.0..2.0).contains(&x[0]));
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0, epsilon = g.spacing());
        let e = RegionMask::empty(g);
        assert_eq!(hausdorff_distance(&e, &e).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&e, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn neighborhood_of_point() {
        let g = Grid::new(2, 101, 1.01).unwrap(); // h = 0.02, cell at origin
        let mut a = RegionMask::empty(g);
        let o = g.locate([0.0, 0.0]).unwrap();
        a.set(o, true);
        assert_eq!(neighborhood(&a, 0.0), a);
        let v = neighborhood(&a, 0.1);
        let area = v.count() as f64 * g.cell_volume();
        assert_abs_diff_eq!(area, std::f64::consts::PI * 0.01, epsilon = 2.0 * std::f64::consts::PI * 0.1 * g.spacing());
    }

    #[test]
    fn minimal_diameter_examples() {
        let g = Grid::new(2, 64, 1.0).unwrap();
        let sq = RegionMask::from_fn(g, |x| x[0].abs() < 0.5 && x[1].abs() < 0.5);
        assert_abs_diff_eq!(minimal_diameter(&sq).unwrap(), 1.0, epsilon = 1e-12);
        let row = RegionMask::from_fn(g, |x| x[1] > 0.0 && x[1] < g.spacing());
        assert!(minimal_diameter(&row).unwrap() <= g.spacing() + 1e-12);
        let disc = RegionMask::from_fn(g, |x| x[0].hypot(x[1]) < 0.6);
        assert_abs_diff_eq!(minimal_diameter(&disc).unwrap(), 1.2, epsilon = g.spacing());
        assert!(minimal_diameter(&RegionMask::empty(g)).is_err());
    }

    #[test]
    fn flatness_and_density() {
        let g = Grid::new(2, 128, 1.0).unwrap();
        let x = g.locate([0.0 + 1e-9, 0.0 + 1e-9]).unwrap();
        let r = 0.25;
        let zero = ScalarField::zeros(g);
        assert_abs_diff_eq!(flatness_ratio(&zero, x, r, 1e-7).unwrap(), 2.0, epsilon = 2.0 * g.spacing() / r);
        assert_eq!(lebesgue_density(&zero, x, r, 1e-7).unwrap(), 1.0);
        let full = ScalarField::constant(g, 1.0);
        assert_eq!(flatness_ratio(&full, x, r, 1e-7).unwrap(), 0.0);
        assert_eq!(lebesgue_density(&full, x, r, 1e-7).unwrap(), 0.0);
        let c = g.center(x);
        let half = ScalarField::from_fn(g, |y| if y[0] > c[0] { 1.0 } else { 0.0 });
        assert_abs_diff_eq!(lebesgue_density(&half, x, r, 1e-7).unwrap(), 0.5, epsilon = 2.0 * g.spacing() / r);
        assert_abs_diff_eq!(flatness_ratio(&half, x, r, 1e-7).unwrap(), 1.0, epsilon = 2.0 * g.spacing() / r);
        assert!(matches!(flatness_ratio(&zero, x, 2.0 * g.spacing(), 0.0), Err(GeometryError::RadiusTooSmall { .. })));
        assert!(matches!(flatness_ratio(&zero, 0, r, 0.0), Err(GeometryError::BallOutsideGrid { .. })));
    }

    #[test]
    fn radial_bounds_examples() {
        let g = Grid::new(2, 101, 1.01).unwrap();
        let h = g.spacing();
        let disc = RegionMask::from_fn(g, |x| x[0].hypot(x[1]) < 0.5);
        let (rm, rp) = radial_bounds(&disc, [0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(rm, 0.5, epsilon = h);
        assert_abs_diff_eq!(rp, 0.5, epsilon = h);
        let ann = RegionMask::from_fn(g, |x| (0.2..0.5).contains(&x[0].hypot(x[1])));
        assert!(radial_bounds(&ann, [0.0, 0.0]).unwrap().0 < 1e-12);
        let mut two = RegionMask::from_fn(g, |x| x[0].hypot(x[1]) < 0.4);
        two.set(g.locate([0.9, 0.0]).unwrap(), true);
        let (rm, rp) = radial_bounds(&two, [0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(rm, 0.4, epsilon = h);
        assert_abs_diff_eq!(rp, 0.9, epsilon = h);
    }

    #[test]
    fn quadratic_front_is_exact_for_parabola() {
        let g = Grid::new(1, 100, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (0.37 - x[0].abs()).max(0.0).powi(2));
        let (l, r) = quadratic_front_1d(&f).unwrap();
        assert_abs_diff_eq!(r, 0.37, epsilon = 1e-12);
        assert_abs_diff_eq!(l, -0.37, epsilon = 1e-12);
    }
}
