//! The incompressible limit, advanced through the time-integrated pressure
//! `w(t) = ∫₀ᵗ e^{-G(0)s} p(s) ds`. Each step solves one obstacle problem
//! (a few times, to update the forcing) and recovers `p`, `n` and `Ω(t)`.

use thiserror::Error;

use crate::geometry::{positivity_set, quadratic_front_1d};
use crate::grid::{masked_solve, Grid, GridError, RegionMask, ScalarField};
use crate::growth::GrowthLaw;
use crate::obstacle::{psor_solve, ObstacleError, ObstacleSpec, DEFAULT_MAX_ITERS, DEFAULT_OMEGA, DEFAULT_TOL};
use crate::RunOutput;

pub const DEFAULT_PICARD_ITERS: usize = 3;
pub const DEFAULT_P_THRESHOLD: f64 = 1e-7;
/// Recovered pressures further than this outside `[0, pM]` count as clamp
/// events.
pub const CLAMP_REPORT: f64 = 1e-8;
/// Active set clearance from the box edge, in cells, below which a run warns.
pub const EDGE_CLEARANCE: usize = 10;

const CG_RTOL: f64 = 1e-12;
const NEWTON_MAX: usize = 50;

#[derive(Debug, Error)]
pub enum HsError {
    #[error("invalid run configuration: {0}")]
    BadConfig(String),
    #[error("initial density must lie in [0, 1], found {value} at cell {index}")]
    BadInitialData { index: usize, value: f64 },
    #[error("the stiff-limit stepper needs G(0) > 0, got {0}")]
    NonPositiveRate(f64),
    #[error(transparent)]
    Obstacle(#[from] ObstacleError),
    #[error("obstacle solve at t = {t} stopped with residual {residual:e} after {iters} sweeps")]
    NotConverged { t: f64, residual: f64, iters: usize },
    #[error("w decreased by {drop:e} at cell {index}, t = {t}")]
    NonMonotone { t: f64, index: usize, drop: f64 },
    #[error("pressure solve did not converge: {0}")]
    PressureSolve(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsRunConfig {
    pub dt: f64,
    pub t_final: f64,
    pub picard_iters: usize,
    pub p_threshold: f64,
    pub snapshot_every: f64,
    pub tol: f64,
    pub omega: f64,
    pub max_iters: usize,
}

impl HsRunConfig {
    pub fn new(dt: f64, t_final: f64, snapshot_every: f64) -> Self {
        Self {
            dt,
            t_final,
            picard_iters: DEFAULT_PICARD_ITERS,
            p_threshold: DEFAULT_P_THRESHOLD,
            snapshot_every,
            tol: DEFAULT_TOL,
            omega: DEFAULT_OMEGA,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// Number of steps to `t_final` and the snapshot stride, both in steps.
    pub fn schedule(&self) -> Result<(usize, usize), HsError> {
        let bad = |m: String| Err(HsError::BadConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if self.picard_iters == 0 {
            return bad("picard_iters must be >= 1".into());
        }
        if !(self.p_threshold >= 0.0) {
            return bad(format!("p_threshold must be >= 0, got {}", self.p_threshold));
        }
        if !(self.tol > 0.0) || !(self.omega > 0.0 && self.omega < 2.0) || self.max_iters == 0 {
            return bad("obstacle parameters need tol > 0, 0 < omega < 2, max_iters > 0".into());
        }
        let steps = whole_multiple(self.t_final, self.dt)
            .ok_or_else(|| HsError::BadConfig(format!("t_final {} is not a multiple of dt {}", self.t_final, self.dt)))?;
        let stride = whole_multiple(self.snapshot_every, self.dt)
            .filter(|&s| s > 0)
            .ok_or_else(|| {
                HsError::BadConfig(format!(
                    "snapshot_every {} is not a positive multiple of dt {}",
                    self.snapshot_every, self.dt
                ))
            })?;
        Ok((steps, stride))
    }
}

fn whole_multiple(x: f64, dt: f64) -> Option<usize> {
    let k = (x / dt).round();
    ((k * dt - x).abs() <= 1e-9 * dt.max(x.abs())).then_some(k as usize)
}

#[derive(Debug, Clone)]
pub struct HsState {
    pub t: f64,
    pub law: GrowthLaw,
    pub n0: ScalarField,
    pub n: ScalarField,
    pub p: ScalarField,
    pub w: ScalarField,
    pub forcing: ScalarField,
    pub omega_mask: RegionMask,
    /// `∫₀ᵗ e^{-G(0)s} (G(0) - G(p(s))) ds`, per cell.
    pub quad_accum: ScalarField,
    /// `w` one step back, for the second-order pressure recovery.
    pub w_prev: Option<ScalarField>,
    pub dt_prev: f64,
    /// Cumulative count of recovered pressures clamped by more than
    /// [`CLAMP_REPORT`].
    pub clamp_events: usize,
    /// Residual of the last obstacle solve.
    pub obstacle_residual: f64,
    pub psor_sweeps: usize,
}

impl HsState {
    pub fn initial(n0: ScalarField, law: GrowthLaw) -> Result<Self, HsError> {
        if let Some((index, &value)) = n0
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| !(0.0..=1.0).contains(&v))
        {
            return Err(HsError::BadInitialData { index, value });
        }
        if !(law.g0() > 0.0) {
            return Err(HsError::NonPositiveRate(law.g0()));
        }
        let g = *n0.grid();
        let saturated = RegionMask::from_vec(g, n0.values().iter().map(|&v| v >= 1.0).collect())?;
        let p = solve_pressure_on_region(&saturated, &law)?;
        Ok(Self {
            omega_mask: positivity_set(&p, DEFAULT_P_THRESHOLD),
            t: 0.0,
            forcing: n0.map(|v| 1.0 - v),
            n: n0.clone(),
            p,
            w: ScalarField::zeros(g),
            quad_accum: ScalarField::zeros(g),
            w_prev: None,
            dt_prev: 0.0,
            clamp_events: 0,
            obstacle_residual: 0.0,
            psor_sweeps: 0,
            n0,
            law,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.n0.grid()
    }

    /// `{w > 0}`.
    pub fn w_support(&self) -> RegionMask {
        positivity_set(&self.w, 0.0)
    }

    /// Right end of `{w > 0}` in 1D, to sub-cell accuracy.
    pub fn front_1d(&self) -> Option<f64> {
        quadratic_front_1d(&self.w).map(|(_, r)| r)
    }
}

/// Weights `(c0, c1)` with `∫_{t0}^{t0+dt} e^{-g0 s} q(s) ds ≈ c0 q(t0) + c1 q(t0+dt)`
/// for `q` linear in `s`; exact for constant `q`.
pub fn product_weights(g0: f64, t0: f64, dt: f64) -> (f64, f64) {
    if dt <= 0.0 {
        return (0.0, 0.0);
    }
    let a = (-g0 * t0).exp();
    let x = g0 * dt;
    if x < 1e-8 {
        return (0.5 * a * dt, 0.5 * a * dt);
    }
    let e = (-x).exp();
    let total = -a * (-x).exp_m1() / g0;
    let c1 = a * (-(-x).exp_m1() - x * e) / (g0 * x);
    (total - c1, c1)
}

fn advance_quad(state: &HsState, t_new: f64, p_end: &ScalarField) -> Vec<f64> {
    let law = &state.law;
    let g0 = law.g0();
    let (c0, c1) = product_weights(g0, state.t, t_new - state.t);
    state
        .quad_accum
        .values()
        .iter()
        .zip(state.p.values())
        .zip(p_end.values())
        .map(|((&q, &pa), &pb)| q + c0 * (g0 - law.value(pa)) + c1 * (g0 - law.value(pb)))
        .collect()
}

fn forcing_from(state: &HsState, t_new: f64, quad: &[f64]) -> ScalarField {
    let decay = (-state.law.g0() * t_new).exp();
    let values = state
        .n0
        .values()
        .iter()
        .zip(quad)
        .map(|(&n0, &q)| decay - n0 + q)
        .collect();
    ScalarField::from_vec_unchecked(*state.grid(), values)
}

/// `F(t_new) = e^{-G(0) t_new} - n⁰ + ∫₀^{t_new} e^{-G(0)s} (G(0) - G(p)) ds`,
/// the last step of the integral taken with `p(state.t)` and `p_predictor`.
pub fn forcing_f(state: &HsState, t_new: f64, p_predictor: &ScalarField) -> ScalarField {
    forcing_from(state, t_new, &advance_quad(state, t_new, p_predictor))
}

/// One step of length `cfg.dt`.
pub fn hs_step(state: &HsState, cfg: &HsRunConfig) -> Result<HsState, HsError> {
    cfg.schedule()?;
    advance(state, state.t + cfg.dt, cfg)
}

fn advance(state: &HsState, t_new: f64, cfg: &HsRunConfig) -> Result<HsState, HsError> {
    let g = *state.grid();
    let g0 = state.law.g0();
    let pm = state.law.p_max();
    let dt = t_new - state.t;
    let growth = (g0 * t_new).exp();
    // second-order backward difference when a previous w exists
    let (a_new, a_cur, a_prev) = match &state.w_prev {
        Some(_) if state.dt_prev > 0.0 => {
            let r = dt / state.dt_prev;
            ((1.0 + 2.0 * r) / (1.0 + r), 1.0 + r, r * r / (1.0 + r))
        }
        _ => (1.0, 1.0, 0.0),
    };

    let mut p_hat = state.p.clone();
    // linear extrapolation in time as the first warm start
    let mut w_new = match &state.w_prev {
        Some(wp) if state.dt_prev > 0.0 => {
            let r = dt / state.dt_prev;
            let v = state
                .w
                .values()
                .iter()
                .zip(wp.values())
                .map(|(&a, &b)| (a + r * (a - b)).max(a))
                .collect();
            ScalarField::from_vec_unchecked(g, v)
        }
        _ => state.w.clone(),
    };
    let mut quad = state.quad_accum.values().to_vec();
    let mut forcing = state.forcing.clone();
    let mut clamps = 0;
    let mut residual = 0.0;
    let mut sweeps = 0;
    for _ in 0..cfg.picard_iters {
        quad = advance_quad(state, t_new, &p_hat);
        forcing = forcing_from(state, t_new, &quad);
        let spec = ObstacleSpec::new(forcing.clone())
            .with_tol(cfg.tol)
            .with_omega(cfg.omega)
            .with_max_iters(cfg.max_iters)
            .with_warm_start(w_new)
            .with_polish(true);
        let sol = psor_solve(&spec)?;
        sweeps += sol.iters;
        if !sol.converged {
            return Err(HsError::NotConverged {
                t: t_new,
                residual: sol.residual,
                iters: sol.iters,
            });
        }
        residual = sol.residual;
        w_new = sol.w;
        clamps = 0;
        let wn = w_new.values();
        let wc = state.w.values();
        let wp = state.w_prev.as_ref().map(|f| f.values());
        for (i, p) in p_hat.values_mut().iter_mut().enumerate() {
            let back = wp.map_or(0.0, |wp| a_prev * wp[i]);
            let raw = growth * (a_new * wn[i] - a_cur * wc[i] + back) / dt;
            if raw < -CLAMP_REPORT || raw > pm + CLAMP_REPORT {
                clamps += 1;
            }
            *p = raw.clamp(0.0, pm);
        }
    }
    if clamps > 0 {
        log::warn!("t = {t_new}: {clamps} recovered pressures clamped into [0, pM]");
    }

    for (i, (&a, &b)) in state.w.values().iter().zip(w_new.values()).enumerate() {
        if b < a - cfg.tol {
            return Err(HsError::NonMonotone {
                t: t_new,
                index: i,
                drop: a - b,
            });
        }
    }

    let n = state
        .n0
        .values()
        .iter()
        .zip(w_new.values())
        .map(|(&n0, &w)| if w > 0.0 { 1.0 } else { (growth * n0).min(1.0) })
        .collect();
    let n = ScalarField::from_vec_unchecked(g, n);
    let omega_mask = positivity_set(&p_hat, cfg.p_threshold);

    Ok(HsState {
        t: t_new,
        law: state.law.clone(),
        n0: state.n0.clone(),
        n,
        p: p_hat,
        w_prev: Some(state.w.clone()),
        w: w_new,
        forcing,
        omega_mask,
        quad_accum: ScalarField::from_vec_unchecked(g, quad),
        dt_prev: dt,
        clamp_events: state.clamp_events + clamps,
        obstacle_residual: residual,
        psor_sweeps: state.psor_sweeps + sweeps,
    })
}

/// Steps to `cfg.t_final` with `t_k = k dt`, keeping the initial state,
/// every `snapshot_every` and the final state.
pub fn hs_run(state0: &HsState, cfg: &HsRunConfig) -> Result<RunOutput<HsState>, HsError> {
    let (steps, stride) = cfg.schedule()?;
    let mut out = RunOutput::new(vec![state0.clone()]);
    let mut state = state0.clone();
    let t0 = state0.t;
    let mut warned = false;
    for k in 1..=steps {
        state = advance(&state, t0 + k as f64 * cfg.dt, cfg)?;
        out.steps += 1;
        if !warned {
            if let Some(c) = state.w_support().edge_clearance() {
                if c < EDGE_CLEARANCE {
                    let msg = format!(
                        "t = {}: active set is {c} cells from the box edge (< {EDGE_CLEARANCE})",
                        state.t
                    );
                    log::warn!("{msg}");
                    out.warnings.push(msg);
                    warned = true;
                }
            }
        }
        if k % stride == 0 || k == steps {
            out.snapshots.push(state.clone());
        }
    }
    if state.clamp_events > 0 {
        out.warnings
            .push(format!("{} recovered pressures were clamped into [0, pM]", state.clamp_events));
    }
    Ok(out)
}

/// Solves `-Δ_h p = G(p)` on the cells of `mask` with `p = 0` elsewhere, by
/// Newton iteration on `G` and conjugate gradients for each linear solve.
pub fn solve_pressure_on_region(mask: &RegionMask, law: &GrowthLaw) -> Result<ScalarField, HsError> {
    let g = *mask.grid();
    let mut p = vec![0.0; g.len()];
    if mask.is_empty() {
        return Ok(ScalarField::zeros(g));
    }
    let idx = mask.indices();
    let linear = matches!(law, GrowthLaw::Linear { .. } | GrowthLaw::ZeroSource { .. });
    let scale = law.p_max().max(1.0);
    for _ in 0..NEWTON_MAX {
        let shift: Vec<f64> = idx.iter().map(|&i| -law.derivative(p[i])).collect();
        let rhs: Vec<f64> = idx
            .iter()
            .zip(&shift)
            .map(|(&i, &s)| law.value(p[i]) + s * p[i])
            .collect();
        let next = masked_solve(mask, &idx, &shift, &rhs, CG_RTOL)
            .map_err(|r| HsError::PressureSolve(format!("conjugate gradients stalled at relative residual {r:e}")))?;
        let mut change: f64 = 0.0;
        for (&i, &v) in idx.iter().zip(&next) {
            change = change.max((v - p[i]).abs());
            p[i] = v;
        }
        if linear || change <= 1e-12 * scale {
            return ScalarField::from_vec(g, p).map_err(Into::into);
        }
    }
    Err(HsError::PressureSolve(format!("Newton iteration did not settle in {NEWTON_MAX} rounds")))
}
