//! Projected SOR for the discrete obstacle problem
//!
//! ```text
//! w >= 0,   -Δ_h w + F >= 0,   w (-Δ_h w + F) = 0
//! ```
//!
//! i.e. the minimizer of `J(v) = Σ h^dim (½|∇_h v|² + v F)` over `v >= 0`,
//! with `w = 0` imposed outside the box. Sweeps run in fixed lexicographic
//! order, so a solve is a deterministic function of its inputs.

use thiserror::Error;

use crate::grid::{masked_solve, Grid, GridError, RegionMask, ScalarField};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_OMEGA: f64 = 1.7;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
/// Window over which a tenfold residual growth counts as divergence.
pub const DIVERGENCE_WINDOW: usize = 1000;
/// Sweeps between residual evaluations.
pub const RESIDUAL_STRIDE: usize = 4;

#[derive(Debug, Error)]
pub enum ObstacleError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("relaxation parameter must lie in (0, 2), got {0}")]
    BadOmega(f64),
    #[error("max_iters must be positive")]
    NoIterations,
    #[error("forcing is not finite at cell {0}")]
    NonFiniteForcing(usize),
    #[error("projected SOR diverged: residual {now:e} after sweep {sweep}, was {before:e} {DIVERGENCE_WINDOW} sweeps earlier")]
    Diverged { sweep: usize, before: f64, now: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Input of one obstacle solve.
#[derive(Debug, Clone)]
pub struct ObstacleSpec {
    pub forcing: ScalarField,
    pub tol: f64,
    pub omega: f64,
    pub max_iters: usize,
    pub warm_start: Option<ScalarField>,
    /// After PSOR, re-solve the equation on the detected active set exactly
    /// and keep the result if its residual is no worse.
    pub polish: bool,
}

impl ObstacleSpec {
    pub fn new(forcing: ScalarField) -> Self {
        Self {
            forcing,
            tol: DEFAULT_TOL,
            omega: DEFAULT_OMEGA,
            max_iters: DEFAULT_MAX_ITERS,
            warm_start: None,
            polish: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_warm_start(mut self, w: ScalarField) -> Self {
        self.warm_start = Some(w);
        self
    }

    pub fn with_polish(mut self, polish: bool) -> Self {
        self.polish = polish;
        self
    }

    fn validate(&self) -> Result<(), ObstacleError> {
        if !(self.tol > 0.0) {
            return Err(ObstacleError::BadTolerance(self.tol));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(ObstacleError::BadOmega(self.omega));
        }
        if self.max_iters == 0 {
            return Err(ObstacleError::NoIterations);
        }
        if let Some(i) = self.forcing.values().iter().position(|v| !v.is_finite()) {
            return Err(ObstacleError::NonFiniteForcing(i));
        }
        if let Some(w) = &self.warm_start {
            if w.grid() != self.forcing.grid() {
                return Err(GridError::GridMismatch.into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ObstacleSolution {
    pub w: ScalarField,
    pub iters: usize,
    pub residual: f64,
    pub active_set: RegionMask,
    /// False when `max_iters` was reached before the tolerance.
    pub converged: bool,
}

/// SOR parameter that is optimal for the Dirichlet Laplacian on the whole
/// box; a good choice when the active set fills a sizeable part of it.
pub fn optimal_omega(grid: &Grid) -> f64 {
    let rho = (std::f64::consts::PI / grid.cells_per_axis() as f64).cos();
    2.0 / (1.0 + (1.0 - rho * rho).sqrt())
}

/// One projected SOR sweep in lexicographic order.
pub fn psor_sweep(w: &mut [f64], forcing: &ScalarField, omega: f64) {
    let g = *forcing.grid();
    let f = forcing.values();
    let h2 = g.spacing() * g.spacing();
    let diag = 2.0 * g.dim() as f64;
    let n = g.cells_per_axis();
    if g.dim() == 1 {
        for i in 0..n {
            let left = if i > 0 { w[i - 1] } else { 0.0 };
            let right = if i + 1 < n { w[i + 1] } else { 0.0 };
            let gs = (left + right - h2 * f[i]) / diag;
            w[i] = (w[i] + omega * (gs - w[i])).max(0.0);
        }
    } else {
        for iy in 0..n {
            for ix in 0..n {
                let i = iy * n + ix;
                let mut s = 0.0;
                if ix > 0 {
                    s += w[i - 1];
                }
                if ix + 1 < n {
                    s += w[i + 1];
                }
                if iy > 0 {
                    s += w[i - n];
                }
                if iy + 1 < n {
                    s += w[i + n];
                }
                let gs = (s - h2 * f[i]) / diag;
                w[i] = (w[i] + omega * (gs - w[i])).max(0.0);
            }
        }
    }
}

/// Solves the obstacle problem by projected SOR.
pub fn psor_solve(spec: &ObstacleSpec) -> Result<ObstacleSolution, ObstacleError> {
    spec.validate()?;
    let grid = *spec.forcing.grid();
    let mut w: Vec<f64> = match &spec.warm_start {
        Some(ws) => ws.values().iter().map(|&v| v.max(0.0)).collect(),
        None => vec![0.0; grid.len()],
    };
    // residual checked every RESIDUAL_STRIDE sweeps; history holds one entry per check
    let window = DIVERGENCE_WINDOW / RESIDUAL_STRIDE;
    let mut history: Vec<f64> = Vec::new();
    let mut residual = residual_of(&grid, &w, &spec.forcing);
    let mut iters = 0;
    while residual > spec.tol && iters < spec.max_iters {
        let batch = RESIDUAL_STRIDE.min(spec.max_iters - iters);
        for _ in 0..batch {
            psor_sweep(&mut w, &spec.forcing, spec.omega);
        }
        iters += batch;
        residual = residual_of(&grid, &w, &spec.forcing);
        history.push(residual);
        let k = history.len();
        if !residual.is_finite() || (k > window && residual > 10.0 * history[k - 1 - window]) {
            return Err(ObstacleError::Diverged {
                sweep: iters,
                before: if k > window { history[k - 1 - window] } else { history[0] },
                now: residual,
            });
        }
    }
    if spec.polish {
        if let Some(exact) = polish(&grid, &w, &spec.forcing) {
            let r = residual_of(&grid, &exact, &spec.forcing);
            if r <= residual {
                w = exact;
                residual = r;
            }
        }
    }
    let converged = residual <= spec.tol;
    if !converged {
        log::warn!(
            "projected SOR stopped after {iters} sweeps with residual {residual:e} > {:e}",
            spec.tol
        );
    }
    let active: Vec<bool> = w.iter().map(|&v| v > 0.0).collect();
    Ok(ObstacleSolution {
        w: ScalarField::from_vec_unchecked(grid, w),
        iters,
        residual,
        active_set: RegionMask::from_vec(grid, active)?,
        converged,
    })
}

const POLISH_ROUNDS: usize = 8;
const POLISH_RTOL: f64 = 1e-14;

/// Solves `Δ_h w = F` on the active set of `w` with `w = 0` elsewhere,
/// dropping cells that come out nonpositive and adding cells whose slack is
/// negative, for a few rounds.
fn polish(grid: &Grid, w: &[f64], forcing: &ScalarField) -> Option<Vec<f64>> {
    let f = forcing.values();
    let mut active: Vec<bool> = w.iter().map(|&v| v > 0.0).collect();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    for _ in 0..POLISH_ROUNDS {
        let mask = RegionMask::from_vec(*grid, active.clone()).ok()?;
        let idx = mask.indices();
        let rhs: Vec<f64> = idx.iter().map(|&i| -f[i]).collect();
        let x = masked_solve(&mask, &idx, &vec![0.0; idx.len()], &rhs, POLISH_RTOL).ok()?;
        let mut out = vec![0.0; grid.len()];
        for (&i, &v) in idx.iter().zip(&x) {
            out[i] = v;
        }
        let mut changed = false;
        for i in 0..grid.len() {
            if active[i] && out[i] <= 0.0 {
                active[i] = false;
                out[i] = 0.0;
                changed = true;
            } else if !active[i] {
                let s: f64 = grid.neighbors(i).iter().take(2 * grid.dim()).flatten().map(|&j| out[j]).sum();
                if -s * inv_h2 + f[i] < 0.0 {
                    active[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return Some(out);
        }
    }
    None
}

fn residual_of(grid: &Grid, w: &[f64], forcing: &ScalarField) -> f64 {
    let f = forcing.values();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let diag = 2.0 * grid.dim() as f64;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        let nb = grid.neighbors(i);
        let mut s = -diag * w[i];
        for j in nb.iter().take(2 * grid.dim()).flatten() {
            s += w[*j];
        }
        let slack = -s * inv_h2 + f[i];
        worst = worst.max((-w[i]).max(-slack).max((w[i] * slack).abs()));
    }
    worst
}

/// `max over cells of max(-w, -(-Δ_h w + F), |w (-Δ_h w + F)|)`.
pub fn complementarity_residual(w: &ScalarField, forcing: &ScalarField) -> Result<f64, ObstacleError> {
    if w.grid() != forcing.grid() {
        return Err(GridError::GridMismatch.into());
    }
    Ok(residual_of(w.grid(), w.values(), forcing))
}

/// `J(w) = Σ h^dim (½ Σ_faces |∇_h w|² + w F)`, faces to the zero exterior
/// included, so that `J` is exactly the quadratic form minimized by
/// [`psor_solve`].
pub fn discrete_energy(w: &ScalarField, forcing: &ScalarField) -> Result<f64, ObstacleError> {
    if w.grid() != forcing.grid() {
        return Err(GridError::GridMismatch.into());
    }
    let g = *w.grid();
    let v = w.values();
    let h = g.spacing();
    let mut dirichlet = 0.0;
    for i in 0..g.len() {
        let nb = g.neighbors(i);
        for axis in 0..g.dim() {
            // each interior face once (from its lower cell); exterior faces
            // on both ends of the axis
            match nb[2 * axis + 1] {
                Some(j) => dirichlet += ((v[j] - v[i]) / h).powi(2),
                None => dirichlet += (v[i] / h).powi(2),
            }
            if nb[2 * axis].is_none() {
                dirichlet += (v[i] / h).powi(2);
            }
        }
    }
    let linear: f64 = v.iter().zip(forcing.values()).map(|(a, b)| a * b).sum();
    Ok(g.cell_volume() * (0.5 * dirichlet + linear))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n, 1.0).unwrap()
    }

    #[test]
    fn nonnegative_forcing_gives_zero() {
        let g = grid1(32);
        let f = ScalarField::from_fn(g, |x| 0.5 + x[0].abs());
        let sol = psor_solve(&ObstacleSpec::new(f)).unwrap();
        assert!(sol.converged);
        assert!(sol.w.values().iter().all(|&v| v == 0.0));
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        let f = ScalarField::zeros(grid1(16));
        assert!(matches!(
            psor_solve(&ObstacleSpec::new(f.clone()).with_omega(2.0)),
            Err(ObstacleError::BadOmega(_))
        ));
        assert!(matches!(
            psor_solve(&ObstacleSpec::new(f.clone()).with_tol(0.0)),
            Err(ObstacleError::BadTolerance(_))
        ));
        assert!(matches!(
            psor_solve(&ObstacleSpec::new(f).with_warm_start(ScalarField::zeros(grid1(32)))),
            Err(ObstacleError::Grid(_))
        ));
    }

    #[test]
    fn residual_of_zero_with_negative_forcing_is_one() {
        let g = grid1(16);
        let r = complementarity_residual(&ScalarField::zeros(g), &ScalarField::constant(g, -1.0)).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn energy_of_zero_is_zero() {
        let g = grid1(16);
        assert_eq!(
            discrete_energy(&ScalarField::zeros(g), &ScalarField::constant(g, -1.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn energy_gradient_matches_system() {
        // J(w + s e_i) - J(w) ≈ s h (-Δ_h w + F)_i for small s
        let g = grid1(16);
        let w = ScalarField::from_fn(g, |x| (1.0 - x[0] * x[0]).max(0.0));
        let f = ScalarField::from_fn(g, |x| x[0]);
        let lap = laplacian(&w);
        let j0 = discrete_energy(&w, &f).unwrap();
        for i in [0, 5, 15] {
            let s = 1e-6;
            let mut v = w.clone();
            v.values_mut()[i] += s;
            let dj = (discrete_energy(&v, &f).unwrap() - j0) / s;
            let expected = g.spacing() * (-lap[i] + f[i]);
            assert!((dj - expected).abs() < 1e-4 * expected.abs().max(1.0), "{dj} {expected}");
        }
    }

    #[test]
    fn hits_iteration_cap_without_error() {
        let g = grid1(64);
        let f = ScalarField::constant(g, -1.0);
        let sol = psor_solve(&ObstacleSpec::new(f).with_max_iters(3)).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iters, 3);
    }
}
