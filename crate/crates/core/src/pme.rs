//! Explicit finite-volume solver for the porous-medium family
//! `∂t n = div(n ∇p) + n G(p)`, `p = n^γ`.

use thiserror::Error;

use crate::grid::{flux_divergence_into, Grid, GridError, Mobility, ScalarField};
use crate::growth::GrowthLaw;
use crate::RunOutput;

/// Largest negative undershoot tolerated (and clipped) in one step.
pub const CLIP_LIMIT: f64 = 1e-12;
pub const DEFAULT_CFL_SAFETY: f64 = 0.45;
const VACUUM_GUARD: f64 = 1e-30;
/// Minimum clearance, in cells, between the support and the box edge.
pub const EDGE_CLEARANCE: usize = 10;

#[derive(Debug, Error)]
pub enum PmeError {
    #[error("gamma must exceed 1, got {0}")]
    BadGamma(f64),
    #[error("density must be nonnegative, found {value} at cell {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("initial data must lie in [0, 1], found {value} at cell {index}")]
    InitialDataOutOfRange { index: usize, value: f64 },
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("instability at t = {t}: cell {index} holds {value}")]
    Unstable { t: f64, index: usize, value: f64 },
    #[error("negative undershoot {0:e} exceeds the clipping allowance")]
    ExcessiveClip(f64),
    #[error("invalid run configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone)]
pub struct PmeState {
    pub gamma: f64,
    pub t: f64,
    pub n: ScalarField,
    pub law: GrowthLaw,
    /// Largest clipped undershoot so far.
    pub max_clip: f64,
}

impl PmeState {
    pub fn new(n: ScalarField, gamma: f64, law: GrowthLaw) -> Result<Self, PmeError> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(PmeError::BadGamma(gamma));
        }
        if let Some((index, &value)) = n.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(PmeError::NegativeDensity { index, value });
        }
        Ok(Self {
            gamma,
            t: 0.0,
            n,
            law,
            max_clip: 0.0,
        })
    }

    /// State built from `n0` in `[0, 1]` through [`scale_initial_data`].
    pub fn from_initial_data(n0: &ScalarField, gamma: f64, law: GrowthLaw) -> Result<Self, PmeError> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(PmeError::BadGamma(gamma));
        }
        let n = scale_initial_data(n0, gamma, law.p_max())?;
        Self::new(n, gamma, law)
    }

    pub fn pressure(&self) -> ScalarField {
        self.n.map(|v| v.powf(self.gamma))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmeRunConfig {
    pub t_final: f64,
    pub cfl_safety: f64,
    pub snapshot_every: f64,
}

impl PmeRunConfig {
    pub fn new(t_final: f64, snapshot_every: f64) -> Self {
        Self {
            t_final,
            cfl_safety: DEFAULT_CFL_SAFETY,
            snapshot_every,
        }
    }

    fn validate(&self) -> Result<(), PmeError> {
        let bad = |m: &str| Err(PmeError::BadConfig(m.to_string()));
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad("t_final must be >= 0");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("cfl_safety must lie in (0, 1]");
        }
        if !(self.snapshot_every > 0.0 && self.snapshot_every.is_finite()) {
            return bad("snapshot_every must be positive");
        }
        Ok(())
    }
}

/// Law of state `p = n^γ`, cellwise.
pub fn pressure_of(n: &ScalarField, gamma: f64) -> Result<ScalarField, PmeError> {
    if let Some((index, &value)) = n.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(PmeError::NegativeDensity { index, value });
    }
    Ok(n.map(|v| v.powf(gamma)))
}

/// `pM^{1/γ} n0`, whose pressure never exceeds `pM`.
pub fn scale_initial_data(n0: &ScalarField, gamma: f64, p_max: f64) -> Result<ScalarField, PmeError> {
    if let Some((index, &value)) = n0
        .values()
        .iter()
        .enumerate()
        .find(|(_, &v)| !(0.0..=1.0).contains(&v))
    {
        return Err(PmeError::InitialDataOutOfRange { index, value });
    }
    let s = p_max.powf(1.0 / gamma);
    Ok(n0.map(|v| s * v))
}

/// Explicit stability limit
/// `safety · h² / (2 dim (γ max p + max|∇p| h + ε))`.
pub fn stable_dt(state: &PmeState, cfl_safety: f64) -> f64 {
    let mut p = vec![0.0; state.n.values().len()];
    fill_pressure(state.n.values(), state.gamma, &mut p);
    dt_from_pressure(state.n.grid(), &p, state.gamma, cfl_safety)
}

fn fill_pressure(n: &[f64], gamma: f64, p: &mut [f64]) {
    for (p, &n) in p.iter_mut().zip(n) {
        *p = if n > 0.0 { n.powf(gamma) } else { 0.0 };
    }
}

fn dt_from_pressure(g: &Grid, p: &[f64], gamma: f64, cfl_safety: f64) -> f64 {
    let h = g.spacing();
    let mut max_p: f64 = 0.0;
    let mut max_jump: f64 = 0.0;
    let n = g.cells_per_axis();
    for (i, &v) in p.iter().enumerate() {
        max_p = max_p.max(v);
        if g.dim() == 1 {
            if i + 1 < n {
                max_jump = max_jump.max((p[i + 1] - v).abs());
            }
        } else {
            let [ix, iy] = g.unflatten(i);
            if ix + 1 < n {
                max_jump = max_jump.max((p[i + 1] - v).abs());
            }
            if iy + 1 < n {
                max_jump = max_jump.max((p[i + n] - v).abs());
            }
        }
    }
    // max|∇p| h is the largest jump between neighbours
    cfl_safety * h * h / (2.0 * g.dim() as f64 * (gamma * max_p + max_jump + VACUUM_GUARD))
}

/// One forward-Euler step of the conservative scheme.
pub fn pme_step(state: &PmeState, dt: f64) -> Result<PmeState, PmeError> {
    let limit = stable_dt(state, 1.0);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(PmeError::StepTooLarge { dt, limit });
    }
    let mut next = state.clone();
    let mut scratch = Scratch::new(state.n.values().len());
    fill_pressure(state.n.values(), state.gamma, &mut scratch.p);
    advance(&mut next, dt, &mut scratch)?;
    Ok(next)
}

struct Scratch {
    p: Vec<f64>,
    div: Vec<f64>,
}

impl Scratch {
    fn new(len: usize) -> Self {
        Self {
            p: vec![0.0; len],
            div: vec![0.0; len],
        }
    }
}

/// Forward Euler step using the pressure already in `s.p`.
fn advance(state: &mut PmeState, dt: f64, s: &mut Scratch) -> Result<(), PmeError> {
    let g = *state.n.grid();
    flux_divergence_into(&g, state.n.values(), &s.p, Mobility::Upwind, &mut s.div);
    let cap = 2.0 * state.law.p_max().powf(1.0 / state.gamma);
    let t_new = state.t + dt;
    let mut clip: f64 = 0.0;
    for (i, n) in state.n.values_mut().iter_mut().enumerate() {
        let mut v = *n + dt * (s.div[i] + *n * state.law.value(s.p[i]));
        if v.is_nan() || v > cap {
            return Err(PmeError::Unstable {
                t: t_new,
                index: i,
                value: v,
            });
        }
        if v < 0.0 {
            clip = clip.max(-v);
            v = 0.0;
        }
        *n = v;
    }
    if clip > CLIP_LIMIT {
        return Err(PmeError::ExcessiveClip(clip));
    }
    state.max_clip = state.max_clip.max(clip);
    state.t = t_new;
    Ok(())
}

/// Integrates to `cfg.t_final`, recording a snapshot at `t = 0`, at every
/// multiple of `snapshot_every` and at the final time.
pub fn pme_run(state0: &PmeState, cfg: &PmeRunConfig) -> Result<RunOutput<PmeState>, PmeError> {
    cfg.validate()?;
    let mut out = RunOutput::new(vec![state0.clone()]);
    let mut state = state0.clone();
    state.t = 0.0;
    check_clearance(&state, &mut out.warnings);
    let mut scratch = Scratch::new(state.n.values().len());
    let g = *state.n.grid();
    let mut k = 1usize;
    while state.t < cfg.t_final {
        let target = (k as f64 * cfg.snapshot_every).min(cfg.t_final);
        loop {
            let remaining = target - state.t;
            fill_pressure(state.n.values(), state.gamma, &mut scratch.p);
            let dt = dt_from_pressure(&g, &scratch.p, state.gamma, cfg.cfl_safety);
            if dt >= remaining {
                advance(&mut state, remaining, &mut scratch)?;
                state.t = target;
                out.steps += 1;
                break;
            }
            advance(&mut state, dt, &mut scratch)?;
            out.steps += 1;
        }
        check_clearance(&state, &mut out.warnings);
        out.snapshots.push(state.clone());
        k += 1;
    }
    Ok(out)
}

fn check_clearance(state: &PmeState, warnings: &mut Vec<String>) {
    let support = crate::geometry::positivity_set(&state.n, 0.0);
    if let Some(c) = support.edge_clearance() {
        if c < EDGE_CLEARANCE {
            let msg = format!(
                "t = {}: support of n is {c} cells from the box edge (< {EDGE_CLEARANCE})",
                state.t
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
}
