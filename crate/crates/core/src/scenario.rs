//! Rasterized initial data and complete run setups.

use thiserror::Error;

use crate::grid::{Grid, GridError, ScalarField};
use crate::growth::GrowthLaw;
use crate::heleshaw::{hs_run, HsError, HsRunConfig, HsState, DEFAULT_P_THRESHOLD};
use crate::obstacle::{optimal_omega, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::pme::{pme_run, scale_initial_data, PmeError, PmeRunConfig, PmeState, DEFAULT_CFL_SAFETY};
use crate::snapshot::SnapshotSeries;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("initial density must lie in [0, 1], got amplitude {0}")]
    Amplitude(f64),
    #[error("radii must be positive and ordered: {0}")]
    Radius(String),
    #[error("initial field lives on a different grid")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Hs(#[from] HsError),
    #[error(transparent)]
    Pme(#[from] PmeError),
}

/// Piecewise-constant initial densities. A cell belongs to a set when its
/// center does (open balls).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Ball {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
    Annulus {
        center: [f64; 2],
        inner_radius: f64,
        outer_radius: f64,
        amplitude: f64,
    },
    /// Two balls; where they overlap the larger amplitude wins.
    TwoBalls {
        centers: [[f64; 2]; 2],
        radii: [f64; 2],
        amplitudes: [f64; 2],
    },
    /// `amplitude` inside `radius`, `outer_amplitude` out to `outer_radius`.
    Plateau {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
        outer_radius: f64,
        outer_amplitude: f64,
    },
    /// A given field, e.g. the density column of a snapshot file.
    Field(ScalarField),
}

fn amp(a: f64) -> Result<f64, ScenarioError> {
    if (0.0..=1.0).contains(&a) {
        Ok(a)
    } else {
        Err(ScenarioError::Amplitude(a))
    }
}

fn radius(r: f64) -> Result<f64, ScenarioError> {
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(ScenarioError::Radius(format!("{r}")))
    }
}

fn dist(grid: &Grid, x: [f64; 2], c: [f64; 2]) -> f64 {
    if grid.dim() == 1 {
        (x[0] - c[0]).abs()
    } else {
        (x[0] - c[0]).hypot(x[1] - c[1])
    }
}

impl InitialData {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            Self::Ball { radius: r, amplitude, .. } => {
                radius(*r)?;
                amp(*amplitude)?;
            }
            Self::Annulus {
                inner_radius,
                outer_radius,
                amplitude,
                ..
            } => {
                radius(*outer_radius)?;
                if !(*inner_radius >= 0.0 && inner_radius < outer_radius) {
                    return Err(ScenarioError::Radius(format!("annulus {inner_radius} .. {outer_radius}")));
                }
                amp(*amplitude)?;
            }
            Self::TwoBalls { radii, amplitudes, .. } => {
                for (&r, &a) in radii.iter().zip(amplitudes) {
                    radius(r)?;
                    amp(a)?;
                }
            }
            Self::Plateau {
                radius: r,
                amplitude,
                outer_radius,
                outer_amplitude,
                ..
            } => {
                radius(*r)?;
                if !(outer_radius >= r) {
                    return Err(ScenarioError::Radius(format!("plateau {r} .. {outer_radius}")));
                }
                amp(*amplitude)?;
                amp(*outer_amplitude)?;
            }
            Self::Field(f) => {
                if let Some(&v) = f.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(ScenarioError::Amplitude(v));
                }
            }
        }
        Ok(())
    }

    pub fn rasterize(&self, grid: Grid) -> Result<ScalarField, ScenarioError> {
        self.validate()?;
        if let Self::Field(f) = self {
            if *f.grid() != grid {
                return Err(ScenarioError::GridMismatch);
            }
            return Ok(f.clone());
        }
        Ok(ScalarField::from_fn(grid, |x| match self {
            Self::Ball {
                center,
                radius,
                amplitude,
            } => {
                if dist(&grid, x, *center) < *radius {
                    *amplitude
                } else {
                    0.0
                }
            }
            Self::Annulus {
                center,
                inner_radius,
                outer_radius,
                amplitude,
            } => {
                let d = dist(&grid, x, *center);
                if d >= *inner_radius && d < *outer_radius {
                    *amplitude
                } else {
                    0.0
                }
            }
            Self::TwoBalls {
                centers,
                radii,
                amplitudes,
            } => (0..2)
                .filter(|&k| dist(&grid, x, centers[k]) < radii[k])
                .map(|k| amplitudes[k])
                .fold(0.0, f64::max),
            Self::Plateau {
                center,
                radius,
                amplitude,
                outer_radius,
                outer_amplitude,
            } => {
                let d = dist(&grid, x, *center);
                if d < *radius {
                    *amplitude
                } else if d < *outer_radius {
                    *outer_amplitude
                } else {
                    0.0
                }
            }
            Self::Field(_) => unreachable!(),
        }))
    }

    /// Radius of the smallest origin-centred ball holding the support, from
    /// the geometric description (not the raster).
    pub fn support_radius(&self) -> Option<f64> {
        let norm = |c: [f64; 2]| c[0].hypot(c[1]);
        match self {
            Self::Ball { center, radius, .. } => Some(norm(*center) + radius),
            Self::Annulus {
                center, outer_radius, ..
            } => Some(norm(*center) + outer_radius),
            Self::TwoBalls { centers, radii, .. } => Some((norm(centers[0]) + radii[0]).max(norm(centers[1]) + radii[1])),
            Self::Plateau {
                center,
                outer_radius,
                radius,
                outer_amplitude,
                ..
            } => Some(norm(*center) + if *outer_amplitude > 0.0 { *outer_radius } else { *radius }),
            Self::Field(_) => None,
        }
    }
}

/// Solver parameters shared by both models.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub gamma: f64,
    pub gamma_ladder: Vec<f64>,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_every: f64,
    pub cfl_safety: f64,
    pub psor_tol: f64,
    /// `None` picks the optimal relaxation for the grid.
    pub psor_omega: Option<f64>,
    pub psor_max_iters: usize,
    pub picard_iters: usize,
    pub p_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gamma: 40.0,
            gamma_ladder: vec![5.0, 10.0, 20.0, 40.0, 80.0],
            dt: 1e-3,
            t_final: 0.5,
            snapshot_every: 0.01,
            cfl_safety: DEFAULT_CFL_SAFETY,
            psor_tol: DEFAULT_TOL,
            psor_omega: None,
            psor_max_iters: DEFAULT_MAX_ITERS,
            picard_iters: crate::heleshaw::DEFAULT_PICARD_ITERS,
            p_threshold: DEFAULT_P_THRESHOLD,
        }
    }
}

/// Grid, law, initial data and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub law: GrowthLaw,
    pub init: InitialData,
    pub solver: SolverSettings,
}

impl Scenario {
    /// The reference setup: 1D, 512 cells on `[-1.5, 1.5]`,
    /// `G(p) = 1 - p`, `n⁰ = χ(|x| < 0.3)`, `T = 0.5`.
    pub fn reference() -> Self {
        Self {
            grid: Grid::new(1, 512, 1.5).expect("valid grid"),
            law: GrowthLaw::linear(1.0, 1.0).expect("valid law"),
            init: InitialData::Ball {
                center: [0.0, 0.0],
                radius: 0.3,
                amplitude: 1.0,
            },
            solver: SolverSettings::default(),
        }
    }

    pub fn initial_density(&self) -> Result<ScalarField, ScenarioError> {
        self.init.rasterize(self.grid)
    }

    pub fn hs_config(&self) -> HsRunConfig {
        let s = &self.solver;
        let mut cfg = HsRunConfig::new(s.dt, s.t_final, s.snapshot_every);
        cfg.picard_iters = s.picard_iters;
        cfg.p_threshold = s.p_threshold;
        cfg.tol = s.psor_tol;
        cfg.omega = s.psor_omega.unwrap_or_else(|| optimal_omega(&self.grid));
        cfg.max_iters = s.psor_max_iters;
        cfg
    }

    pub fn pme_config(&self) -> PmeRunConfig {
        let mut cfg = PmeRunConfig::new(self.solver.t_final, self.solver.snapshot_every);
        cfg.cfl_safety = self.solver.cfl_safety;
        cfg
    }

    pub fn run_hs(&self) -> Result<(SnapshotSeries, Vec<String>), ScenarioError> {
        let state = HsState::initial(self.initial_density()?, self.law.clone())?;
        let run = hs_run(&state, &self.hs_config())?;
        let series = SnapshotSeries::from_hs(&run).expect("runs keep the initial state");
        Ok((series, run.warnings))
    }

    /// Porous-medium run from `pM^{1/γ} n⁰`.
    pub fn run_pme(&self, gamma: f64) -> Result<(SnapshotSeries, Vec<String>), ScenarioError> {
        let n0 = scale_initial_data(&self.initial_density()?, gamma, self.law.p_max())?;
        let state = PmeState::new(n0, gamma, self.law.clone())?;
        let run = pme_run(&state, &self.pme_config())?;
        let series = SnapshotSeries::from_pme(&run).expect("runs keep the initial state");
        Ok((series, run.warnings))
    }

    /// The γ ladder, one thread per member, results in ladder order.
    pub fn run_ladder(&self) -> Result<Vec<(SnapshotSeries, Vec<String>)>, ScenarioError> {
        std::thread::scope(|s| {
            let handles: Vec<_> = self
                .solver
                .gamma_ladder
                .iter()
                .map(|&g| s.spawn(move || self.run_pme(g)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("ladder member panicked"))
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_rasterize() {
        let g = Grid::new(2, 40, 1.0).unwrap();
        let ball = InitialData::Ball {
            center: [0.0, 0.0],
            radius: 0.5,
            amplitude: 0.8,
        }
        .rasterize(g)
        .unwrap();
        assert_eq!(ball.max(), 0.8);
        let annulus = InitialData::Annulus {
            center: [0.0, 0.0],
            inner_radius: 0.3,
            outer_radius: 0.6,
            amplitude: 1.0,
        }
        .rasterize(g)
        .unwrap();
        assert_eq!(annulus[g.locate([0.0, 0.0]).unwrap()], 0.0);
        assert_eq!(annulus[g.locate([0.45, 0.0]).unwrap()], 1.0);
        let plateau = InitialData::Plateau {
            center: [0.0, 0.0],
            radius: 0.2,
            amplitude: 1.0,
            outer_radius: 0.5,
            outer_amplitude: 0.5,
        }
        .rasterize(g)
        .unwrap();
        assert_eq!(plateau[g.locate([0.01, 0.01]).unwrap()], 1.0);
        assert_eq!(plateau[g.locate([0.3, 0.01]).unwrap()], 0.5);
        assert_eq!(plateau[g.locate([0.9, 0.01]).unwrap()], 0.0);
    }

    #[test]
    fn rejects_bad_amplitude() {
        let bad = InitialData::Ball {
            center: [0.0, 0.0],
            radius: 0.5,
            amplitude: 1.3,
        };
        assert!(matches!(bad.validate(), Err(ScenarioError::Amplitude(_))));
    }
}
