//! Checks of the structural statements about the two models, computed from
//! snapshot series. Every check is a pure function of its inputs and
//! returns a [`CheckResult`]; [`default_suite`] assembles the standard set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barriers::Barrier;
use crate::geometry::{
    boundary_cells, flatness_ratio, hausdorff_distance, lebesgue_density, neighborhood, perimeter_proxy,
    positivity_set, quadratic_front_1d, radial_bounds, GeometryError,
};
use crate::grid::{grad_sq, integrate, laplacian, GridError, RegionMask, ScalarField};
use crate::growth::GrowthError;
use crate::heleshaw::DEFAULT_P_THRESHOLD;
use crate::obstacle::{complementarity_residual, ObstacleError, DEFAULT_TOL};
use crate::snapshot::{Snapshot, SnapshotSeries};
use crate::tolerances as tol;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("check needs at least {need} snapshots, got {got}")]
    TooFewSnapshots { need: usize, got: usize },
    #[error("snapshot cadence too coarse: {0}")]
    Cadence(String),
    #[error("check needs stiff-limit snapshots carrying w and F")]
    NotStiffLimit,
    #[error("check needs porous-medium snapshots")]
    NotPorousMedium,
    #[error("check is defined in 1D only")]
    NotOneDimensional,
    #[error("initial support leaves the ball of radius {0} around the origin")]
    SupportNotCentered(f64),
    #[error("the γ ladder is missing or shares no snapshot time with the stiff limit")]
    LadderMissing,
    #[error("no boundary cell satisfies the precondition")]
    NoBoundaryCells,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error(transparent)]
    Obstacle(#[from] ObstacleError),
}

/// Outcome of one check. Unless stated otherwise,
/// `passed == measured <= bound + tolerance`. Report-only results always
/// pass and are excluded from the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    #[serde(with = "json_float")]
    pub measured: f64,
    #[serde(with = "json_float")]
    pub bound: f64,
    #[serde(with = "json_float")]
    pub tolerance: f64,
    pub context: String,
    #[serde(default)]
    pub report_only: bool,
    /// Sub-measurements, keyed for stable ordering.
    #[serde(default, with = "json_float::map")]
    pub values: BTreeMap<String, f64>,
}

/// JSON has no infinities or NaN; those are written as the strings `"inf"`,
/// `"-inf"` and `"nan"` so that reports read back unchanged.
mod json_float {
    use std::collections::BTreeMap;

    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(x: f64) -> Repr {
        if x.is_finite() {
            Repr::Num(x)
        } else if x.is_nan() {
            Repr::Text("nan".into())
        } else if x > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod map {
        use super::*;

        pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            s.collect_map(m.iter().map(|(k, v)| (k, to_repr(*v))))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
            BTreeMap::<String, Repr>::deserialize(d)?
                .into_iter()
                .map(|(k, v)| from_repr(v).map(|x| (k, x)))
                .collect()
        }
    }
}

impl CheckResult {
    pub fn new(name: impl Into<String>, measured: f64, bound: f64, tolerance: f64, context: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured <= bound + tolerance,
            measured,
            bound,
            tolerance,
            context: context.into(),
            report_only: false,
            values: BTreeMap::new(),
        }
    }

    pub fn report(name: impl Into<String>, measured: f64, context: impl Into<String>) -> Self {
        let mut r = Self::new(name, measured, f64::INFINITY, 0.0, context);
        r.passed = true;
        r.report_only = true;
        r
    }

    pub fn with_value(mut self, key: impl Into<String>, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    /// Adds a further condition to the verdict.
    pub fn and(mut self, ok: bool) -> Self {
        self.passed &= ok;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<CheckResult>,
    pub run_manifest: serde_json::Value,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn need(series: &SnapshotSeries, k: usize) -> Result<(), DiagnosticsError> {
    if series.snapshots.len() < k {
        return Err(DiagnosticsError::TooFewSnapshots {
            need: k,
            got: series.snapshots.len(),
        });
    }
    Ok(())
}

fn stiff(series: &SnapshotSeries) -> Result<(), DiagnosticsError> {
    if series.snapshots.iter().any(|s| s.gamma.is_some() || s.w.is_none() || s.forcing.is_none()) {
        return Err(DiagnosticsError::NotStiffLimit);
    }
    Ok(())
}

fn gamma_of(series: &SnapshotSeries) -> Result<f64, DiagnosticsError> {
    series.gamma().ok_or(DiagnosticsError::NotPorousMedium)
}

fn context(series: &SnapshotSeries) -> String {
    let g = series.grid();
    let gamma = series.gamma().map_or_else(|| "inf".to_string(), |v| v.to_string());
    let (t0, t1) = match (series.snapshots.first(), series.snapshots.last()) {
        (Some(a), Some(b)) => (a.time, b.time),
        _ => (0.0, 0.0),
    };
    format!(
        "gamma={gamma} grid={}x{} h={} snapshots={} t=[{t0}, {t1}]",
        g.dim(),
        g.cells_per_axis(),
        g.spacing(),
        series.snapshots.len()
    )
}

fn erode(mask: &RegionMask, times: usize) -> RegionMask {
    let mut m = mask.clone();
    for _ in 0..times {
        m = m.interior();
    }
    m
}

/// `min(1, e^{G(0)t} n⁰)`, the density off the saturated set.
fn precancer(series: &SnapshotSeries, t: f64, i: usize) -> f64 {
    ((series.law.g0() * t).exp() * series.n0[i]).min(1.0)
}

/// Structure of the stiff limit: (a) `n = min(1, e^{G(0)t}n⁰)` where
/// `p ≤ thr`, (b) `n = 1` where `p > thr`, (c) `|Δ_h p + G(p)| ≤ K h` two
/// cells inside `Ω(t)`.
pub fn check_structure_theorem(series: &SnapshotSeries, thr: f64) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    stiff(series)?;
    let h = series.grid().spacing();
    let (mut a, mut b, mut c) = (0.0f64, 0.0f64, 0.0f64);
    for s in &series.snapshots {
        let omega = positivity_set(&s.p, thr);
        for i in 0..s.n.values().len() {
            if omega.contains(i) {
                b = b.max((s.n[i] - 1.0).abs());
            } else {
                a = a.max((s.n[i] - precancer(series, s.time, i)).abs());
            }
        }
        let lap = laplacian(&s.p);
        for i in erode(&omega, 2).indices() {
            c = c.max((lap[i] + series.law.value(s.p[i])).abs());
        }
    }
    Ok(CheckResult::new("structure_theorem", c, tol::K_STRUCTURE * h, 0.0, context(series))
        .with_value("off_omega_density", a)
        .with_value("omega_density", b)
        .with_value("interior_equation", c)
        .and(a <= tol::EXACT && b <= tol::EXACT))
}

/// Complementarity of the stiff limit: every obstacle solution meets
/// `residual ≤ 1e-9`; on interior cells `|p(Δ_h p + G(p))| ≤ K h` and
/// `Δ_h p + G(p) ≥ -K' h`.
pub fn check_complementarity(series: &SnapshotSeries, thr: f64) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    stiff(series)?;
    let h = series.grid().spacing();
    let (mut obstacle, mut product, mut one_sided) = (0.0f64, 0.0f64, 0.0f64);
    for s in &series.snapshots {
        let (Some(w), Some(f)) = (&s.w, &s.forcing) else {
            return Err(DiagnosticsError::NotStiffLimit);
        };
        obstacle = obstacle.max(complementarity_residual(w, f)?);
        let lap = laplacian(&s.p);
        for i in positivity_set(&s.p, thr).interior().indices() {
            let r = lap[i] + series.law.value(s.p[i]);
            product = product.max((s.p[i] * r).abs());
            one_sided = one_sided.max(-r);
        }
    }
    Ok(
        CheckResult::new("complementarity", product, tol::K_COMPLEMENTARITY * h, 0.0, context(series))
            .with_value("obstacle_residual", obstacle)
            .with_value("one_sided_deficit", one_sided)
            .and(obstacle <= tol::OBSTACLE_RESIDUAL && one_sided <= tol::K_ONE_SIDED * h),
    )
}

/// Monotonicity in time of the stiff limit: `Ω(t)` and `{w(t) > 0}` never
/// shrink, `{w(t)>0} ⊆ Ω(t) ⊆ {w(s)>0}` for `t < s`, and `p` decreases by
/// at most `K h` between snapshots.
pub fn check_hs_monotonicity(series: &SnapshotSeries, thr: f64) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    stiff(series)?;
    let h = series.grid().spacing();
    let masks: Vec<(RegionMask, RegionMask)> = series
        .snapshots
        .iter()
        .map(|s| (positivity_set(&s.p, thr), positivity_set(s.w.as_ref().expect("checked"), 0.0)))
        .collect();
    let mut violations = 0usize;
    let mut drop: f64 = 0.0;
    for (k, (omega, wpos)) in masks.iter().enumerate() {
        violations += usize::from(!wpos.is_subset_of(omega));
        if let Some((next_omega, next_w)) = masks.get(k + 1) {
            violations += usize::from(!omega.is_subset_of(next_omega));
            violations += usize::from(!wpos.is_subset_of(next_w));
            violations += usize::from(!omega.is_subset_of(next_w));
            let (a, b) = (&series.snapshots[k].p, &series.snapshots[k + 1].p);
            for (x, y) in a.values().iter().zip(b.values()) {
                drop = drop.max(x - y);
            }
        }
    }
    Ok(CheckResult::new("hs_monotonicity", drop, tol::K_P_MONOTONE * h, 0.0, context(series))
        .with_value("set_inclusion_violations", violations as f64)
        .and(violations == 0))
}

/// `∫n(t) ≤ e^{G(0)t} ∫n⁰ (1 + 1e-8)` and `∫p(t) ≤ pM e^{G(0)t} ∫n⁰ (1 + 1e-6)`.
/// `measured` is the largest `∫n(t) / (e^{G(0)t} ∫n⁰)`.
pub fn check_mass_bounds(series: &SnapshotSeries) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    let m0 = integrate(&series.n0);
    let g0 = series.law.g0();
    let pm = series.law.p_max();
    let (mut rn, mut rp) = (0.0f64, 0.0f64);
    for s in &series.snapshots {
        let bound = (g0 * s.time).exp() * m0;
        let ratio = |v: f64, b: f64| if b > 0.0 { v / b } else if v > 0.0 { f64::INFINITY } else { 0.0 };
        rn = rn.max(ratio(integrate(&s.n), bound));
        rp = rp.max(ratio(integrate(&s.p), pm * bound));
    }
    Ok(CheckResult::new(name_for("mass_bounds", series), rn, 1.0, tol::MASS_REL, context(series))
        .with_value("pressure_mass_ratio", rp)
        .and(rp <= 1.0 + tol::PRESSURE_MASS_REL))
}

fn name_for(base: &str, series: &SnapshotSeries) -> String {
    match series.gamma() {
        Some(g) => format!("{base}[gamma={g}]"),
        None => format!("{base}[hs]"),
    }
}

/// `p ≤ pM` at all times.
pub fn check_pressure_bound(series: &SnapshotSeries) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    let worst = series.snapshots.iter().map(|s| s.p.max()).fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckResult::new(
        name_for("pressure_bound", series),
        worst,
        series.law.p_max(),
        tol::PRESSURE_BOUND,
        context(series),
    ))
}

/// `c e^{-γct} / (1 - e^{-γct})`.
fn ab_rate(c: f64, gamma: f64, t: f64) -> f64 {
    let e = (-gamma * c * t).exp();
    c * e / (1.0 - e)
}

/// Cells at least `buffer` inside `{p > thr}`, by repeated erosion.
fn buffered_interior(p: &ScalarField, thr: f64, buffer: f64) -> RegionMask {
    let depth = (buffer / p.grid().spacing()).ceil().max(1.0) as usize;
    erode(&positivity_set(p, thr), depth)
}

/// Aronson–Bénilan bound for the porous-medium pressure at `t ≥ 5/(γc)`:
/// `Δ_h p + G(p) ≥ -c e^{-γct}/(1 - e^{-γct}) - K h` on cells at least
/// `buffer` inside the support. `measured` is the largest deficit below the
/// continuous bound.
pub fn check_aronson_benilan(series: &SnapshotSeries, thr: f64, buffer: f64) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    let gamma = gamma_of(series)?;
    let c = series.law.semiconvexity_constant()?;
    let h = series.grid().spacing();
    let t_start = 5.0 / (gamma * c);
    let mut deficit: f64 = 0.0;
    let mut used = 0usize;
    for s in series.snapshots.iter().filter(|s| s.time >= t_start) {
        used += 1;
        let lap = laplacian(&s.p);
        let floor = -ab_rate(c, gamma, s.time);
        for i in buffered_interior(&s.p, thr, buffer).indices() {
            deficit = deficit.max(floor - (lap[i] + series.law.value(s.p[i])));
        }
    }
    Ok(
        CheckResult::new(name_for("aronson_benilan", series), deficit, tol::K_AB * h, 0.0, context(series))
            .with_value("c", c)
            .with_value("t_start", t_start)
            .with_value("snapshots_used", used as f64)
            .with_value("front_buffer", buffer),
    )
}

/// `∂t p_γ ≥ -γ p c e^{-γct}/(1 - e^{-γct}) - K h` by differencing consecutive
/// snapshots, on the cells of [`check_aronson_benilan`].
pub fn check_pme_time_monotonicity(series: &SnapshotSeries, thr: f64, buffer: f64) -> Result<CheckResult, DiagnosticsError> {
    need(series, 2)?;
    let gamma = gamma_of(series)?;
    let c = series.law.semiconvexity_constant()?;
    let h = series.grid().spacing();
    let t_start = 5.0 / (gamma * c);
    let mut deficit: f64 = 0.0;
    for pair in series.snapshots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.time < t_start {
            continue;
        }
        let dt = b.time - a.time;
        let rate = ab_rate(c, gamma, a.time);
        for i in buffered_interior(&a.p, thr, buffer).indices() {
            let dp = (b.p[i] - a.p[i]) / dt;
            deficit = deficit.max(-gamma * a.p[i] * rate - dp);
        }
    }
    Ok(CheckResult::new(
        name_for("pme_time_monotonicity", series),
        deficit,
        tol::K_PME_MONOTONE * h,
        0.0,
        context(series),
    ))
}

/// Energy monitors (report only): the largest
/// `∫|∇p|² / ((1 + 1/(γt)) e^{G(0)t})` over snapshots with `t > 0`, and the
/// quartic dissipation `Σ_t Δt Σ_x (n / max(p, 1e-6)) |∇p|⁴ h^dim / (2γ)`.
pub fn energy_monitor(series: &SnapshotSeries) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    let gamma = gamma_of(series)?;
    let vol = series.grid().cell_volume();
    let g0 = series.law.g0();
    let mut h1: f64 = 0.0;
    let mut quartic = 0.0;
    for (k, s) in series.snapshots.iter().enumerate() {
        let gs = grad_sq(&s.p);
        if s.time > 0.0 {
            let scale = (1.0 + 1.0 / (gamma * s.time)) * (g0 * s.time).exp();
            h1 = h1.max(integrate(&gs) / scale);
        }
        if let Some(next) = series.snapshots.get(k + 1) {
            let dt = next.time - s.time;
            let sum: f64 = (0..gs.values().len())
                .map(|i| s.n[i] / s.p[i].max(1e-6) * gs[i] * gs[i])
                .sum();
            quartic += dt * sum * vol / (2.0 * gamma);
        }
    }
    Ok(CheckResult::report(name_for("energy_monitor", series), h1, context(series)).with_value("quartic_dissipation", quartic))
}

/// Perimeter proxy of `{p > thr}` at the last snapshot (report only).
pub fn perimeter_monitor(series: &SnapshotSeries, thr: f64) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    let last = series.last().expect("nonempty");
    let per = perimeter_proxy(&positivity_set(&last.p, thr));
    let max = series
        .snapshots
        .iter()
        .map(|s| perimeter_proxy(&positivity_set(&s.p, thr)))
        .fold(0.0, f64::max);
    Ok(CheckResult::report(name_for("perimeter_proxy", series), per, context(series)).with_value("max_over_run", max))
}

/// `w(t_k)` rebuilt as the trapezoid sum of `e^{-G(0)s} p(s)` over the
/// snapshot history (with `weighted = false` the exponential is dropped,
/// which is wrong and serves as a negative control).
pub fn reconstruct_w(series: &SnapshotSeries, weighted: bool) -> Vec<ScalarField> {
    let g0 = if weighted { series.law.g0() } else { 0.0 };
    let mut acc = ScalarField::zeros(*series.grid());
    let mut out = Vec::with_capacity(series.snapshots.len());
    let mut prev: Option<&Snapshot> = None;
    for s in &series.snapshots {
        if let Some(a) = prev {
            let dt = s.time - a.time;
            let (ea, eb) = ((-g0 * a.time).exp(), (-g0 * s.time).exp());
            for (i, v) in acc.values_mut().iter_mut().enumerate() {
                *v += 0.5 * dt * (ea * a.p[i] + eb * s.p[i]);
            }
        }
        out.push(acc.clone());
        prev = Some(s);
    }
    out
}

/// Obstacle form of the stiff limit: (a) every snapshot's `(w, F)` meets the
/// complementarity residual `tol`; (b) `w` agrees with its trapezoid
/// reconstruction from the `p` history within `K Δ (Δ + h) T`, `Δ` the largest
/// snapshot spacing. `measured` is the reconstruction gap.
pub fn check_obstacle_equivalence(series: &SnapshotSeries, solver_tol: f64) -> Result<CheckResult, DiagnosticsError> {
    obstacle_equivalence(series, solver_tol, true)
}

/// [`check_obstacle_equivalence`] with the reconstruction weight chosen by the
/// caller, for negative controls.
pub fn obstacle_equivalence(series: &SnapshotSeries, solver_tol: f64, weighted: bool) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    stiff(series)?;
    let mut residual: f64 = 0.0;
    for s in &series.snapshots {
        residual = residual.max(complementarity_residual(s.w.as_ref().expect("checked"), s.forcing.as_ref().expect("checked"))?);
    }
    let rebuilt = reconstruct_w(series, weighted);
    let mut gap: f64 = 0.0;
    for (s, r) in series.snapshots.iter().zip(&rebuilt) {
        gap = gap.max(s.w.as_ref().expect("checked").max_abs_diff(r)?);
    }
    let spacing = series
        .snapshots
        .windows(2)
        .map(|w| w[1].time - w[0].time)
        .fold(0.0, f64::max);
    let t_final = series.last().map_or(0.0, |s| s.time);
    let h = series.grid().spacing();
    let bound = tol::K_RECONSTRUCTION * spacing * (spacing + h) * t_final;
    Ok(CheckResult::new("obstacle_equivalence", gap, bound, 0.0, context(series))
        .with_value("complementarity_residual", residual)
        .with_value("snapshot_spacing", spacing)
        .and(residual <= solver_tol))
}

fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Piecewise linear `b_{ε,δ}`: 0 below `δ`, 1 above `δ + ε`.
pub fn b_eps_delta(p: f64, eps: f64, delta: f64) -> f64 {
    ((p - delta) / eps).clamp(0.0, 1.0)
}

/// One rung of the weak Stefan ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StefanRung {
    pub eps: f64,
    pub delta: f64,
    /// `∫∫ (1 - e^{G(0)t} n⁰) ∂t b(p) φ`.
    pub time_term: f64,
    /// `∫∫ β(p) |∇p|² φ`, `β = b'`.
    pub gradient_term: f64,
}

impl StefanRung {
    pub fn residual(&self) -> f64 {
        (self.time_term - self.gradient_term).abs()
    }

    pub fn relative(&self) -> f64 {
        let scale = self.time_term.abs().max(self.gradient_term.abs());
        if scale > 0.0 {
            self.residual() / scale
        } else {
            0.0
        }
    }
}

/// Smoothed weak Stefan residual for each fraction `f` (with
/// `ε = δ = f max p`), against `φ(x, t)`, a product of smooth bumps over the
/// middle half of the box and of the time span. The time term is
/// `Σ (1 - e^{G(0)t} n⁰) φ (b(p_{k+1}) - b(p_k))` at interval midpoints, which
/// equals `β(p) ∂t p` integrated exactly along each snapshot difference;
/// the gradient term integrates `β(p)|∇p|²` exactly along grid edges of the
/// piecewise-linear interpolant of `p` and uses the trapezoid rule in time. `gradient_weight`
/// multiplies `|∇p|²` (1 for the real check).
pub fn stefan_weak_ladder(series: &SnapshotSeries, fractions: &[f64], gradient_weight: f64) -> Result<Vec<StefanRung>, DiagnosticsError> {
    need(series, 3)?;
    let g = *series.grid();
    let snaps = &series.snapshots;
    let t0 = snaps[0].time;
    let t1 = snaps[snaps.len() - 1].time;
    let span = t1 - t0;
    let half = 0.5 * g.half_width();
    let inside = snaps.iter().filter(|s| (s.time - 0.5 * (t0 + t1)).abs() < 0.25 * span).count();
    if inside < 3 {
        return Err(DiagnosticsError::Cadence(format!(
            "{inside} snapshots in the middle half of [{t0}, {t1}]; need at least 3"
        )));
    }
    let phi_x: Vec<f64> = (0..g.len())
        .map(|i| {
            let c = g.center(i);
            (0..g.dim()).map(|a| bump(c[a] / half)).product()
        })
        .collect();
    let phi_t = |t: f64| bump((t - 0.5 * (t0 + t1)) / (0.25 * span));
    let p_max = snaps.iter().map(|s| s.p.max()).fold(0.0, f64::max);
    let vol = g.cell_volume();
    let g0 = series.law.g0();
    // Edges (a, b) with a before b along x, then along y; φ at the midpoint.
    let edges: Vec<(usize, usize, f64)> = (0..g.len())
        .flat_map(|i| {
            let nb = g.neighbors(i);
            [nb[1], nb[3]]
                .into_iter()
                .flatten()
                .map(move |j| (i, j))
        })
        .map(|(i, j)| (i, j, 0.5 * (phi_x[i] + phi_x[j])))
        .filter(|e| e.2 > 0.0)
        .collect();
    let mut out = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let eps = f * p_max;
        let delta = eps;
        let (mut time_term, mut grad_term) = (0.0, 0.0);
        // ∫ β(p) |∂p|² along each edge of the piecewise-linear interpolant:
        // |slope| times the length of the p-range inside the band, over ε.
        let band = |s: &Snapshot, t: f64| -> f64 {
            let pt = phi_t(t);
            if pt == 0.0 {
                return 0.0;
            }
            let h = g.spacing();
            edges
                .iter()
                .map(|&(i, j, phi)| {
                    let (lo, hi) = (s.p[i].min(s.p[j]), s.p[i].max(s.p[j]));
                    let overlap = (hi.min(delta + eps) - lo.max(delta)).max(0.0);
                    (hi - lo) / h * overlap * phi
                })
                .sum::<f64>()
                * pt
                / eps
                / h
        };
        for k in 0..snaps.len() - 1 {
            let (a, b) = (&snaps[k], &snaps[k + 1]);
            let dt = b.time - a.time;
            let tm = 0.5 * (a.time + b.time);
            let pt = phi_t(tm);
            if pt != 0.0 {
                let e = (g0 * tm).exp();
                time_term += (0..g.len())
                    .map(|i| {
                        let db = b_eps_delta(b.p[i], eps, delta) - b_eps_delta(a.p[i], eps, delta);
                        (1.0 - e * series.n0[i]) * phi_x[i] * db
                    })
                    .sum::<f64>()
                    * pt;
            }
            grad_term += 0.5 * dt * (band(a, a.time) + band(b, b.time));
        }
        out.push(StefanRung {
            eps,
            delta,
            time_term: time_term * vol,
            gradient_term: gradient_weight * grad_term * vol,
        });
    }
    Ok(out)
}

/// Passes when `|residual|` decreases down the ladder until it stops
/// decreasing (the grid floor) and every value from the floor on is at most
/// the first divided by [`tol::STEFAN_WEAK_DECREASE`]. `measured` is the last
/// residual over the first.
pub fn check_stefan_weak(series: &SnapshotSeries, fractions: &[f64]) -> Result<CheckResult, DiagnosticsError> {
    stiff(series)?;
    let rungs = stefan_weak_ladder(series, fractions, 1.0)?;
    Ok(stefan_verdict("stefan_weak", &rungs, context(series)))
}

/// Verdict of [`check_stefan_weak`] on precomputed rungs.
pub fn stefan_verdict(name: &str, rungs: &[StefanRung], ctx: String) -> CheckResult {
    let res: Vec<f64> = rungs.iter().map(StefanRung::residual).collect();
    let first = res.first().copied().unwrap_or(0.0);
    let mut floor = 0;
    while floor + 1 < res.len() && res[floor + 1] < res[floor] {
        floor += 1;
    }
    let target = first / tol::STEFAN_WEAK_DECREASE;
    let ratio = if first > 0.0 { res.last().copied().unwrap_or(0.0) / first } else { 0.0 };
    let mut r = CheckResult::new(name, ratio, 1.0 / tol::STEFAN_WEAK_DECREASE, 0.0, ctx)
        .with_value("floor_rung", floor as f64)
        .and(res.len() >= 2 && floor >= 1 && res[floor..].iter().all(|&v| v <= target));
    for (k, rung) in rungs.iter().enumerate() {
        r = r
            .with_value(format!("rung{k}_eps"), rung.eps)
            .with_value(format!("rung{k}_residual"), rung.residual())
            .with_value(format!("rung{k}_relative"), rung.relative());
    }
    r
}

/// One front-speed sample of a 1D run (right front).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub t: f64,
    pub front: f64,
    /// Central difference of front positions over neighbouring snapshots.
    pub speed: f64,
    /// `|∇p|` at the front, extrapolated from the two outermost one-sided
    /// differences.
    pub grad: f64,
    /// `1 - e^{G(0)t} n⁰` just ahead of the front.
    pub denominator: f64,
}

impl VelocitySample {
    pub fn predicted(&self) -> f64 {
        self.grad / self.denominator
    }
}

/// Front positions of a 1D stiff-limit run: the right end of `{w > 0}`
/// located to sub-cell accuracy.
pub fn front_positions(series: &SnapshotSeries) -> Result<Vec<(f64, Option<f64>)>, DiagnosticsError> {
    stiff(series)?;
    if series.grid().dim() != 1 {
        return Err(DiagnosticsError::NotOneDimensional);
    }
    Ok(series
        .snapshots
        .iter()
        .map(|s| (s.time, s.w.as_ref().and_then(quadratic_front_1d).map(|(_, r)| r)))
        .collect())
}

/// Speed samples at every snapshot with neighbours on both sides, a front
/// at all three, and at least three positive pressure cells.
/// Slope of the least-squares line through the fronts in the smallest
/// symmetric window around `k` across which the front moves at least `span`.
/// The sub-cell front estimate jitters by a fraction of a cell, so a plain
/// difference between neighbouring snapshots is dominated by that jitter
/// once the front moves less than a cell per snapshot.
fn windowed_speed(fronts: &[(f64, Option<f64>)], k: usize, span: f64) -> Option<f64> {
    let mut j = 1;
    loop {
        if j > k || k + j >= fronts.len() {
            return None;
        }
        let (a, b) = (fronts[k - j].1?, fronts[k + j].1?);
        if (b - a).abs() >= span {
            break;
        }
        j += 1;
    }
    let pts: Vec<(f64, f64)> = (k - j..=k + j).map(|i| fronts[i].1.map(|r| (fronts[i].0, r))).collect::<Option<_>>()?;
    let n = pts.len() as f64;
    let tm = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let rm = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|q| (q.0 - tm) * (q.1 - rm)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - tm).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn velocity_samples(series: &SnapshotSeries, thr: f64) -> Result<Vec<VelocitySample>, DiagnosticsError> {
    need(series, 3)?;
    let fronts = front_positions(series)?;
    let g = *series.grid();
    let h = g.spacing();
    let mut out = Vec::new();
    for k in 1..fronts.len() - 1 {
        let Some(r) = fronts[k].1 else {
            continue;
        };
        let Some(speed) = windowed_speed(&fronts, k, tol::STEFAN_VELOCITY_CELLS * h) else {
            continue;
        };
        let s = &series.snapshots[k];
        let p = s.p.values();
        let Some(m) = p.iter().rposition(|&v| v > thr) else {
            continue;
        };
        if m < 2 || m + 1 >= p.len() {
            continue;
        }
        let g1 = (p[m - 1] - p[m]) / h;
        let g2 = (p[m - 2] - p[m - 1]) / h;
        let x_half = g.center_1d(m) - 0.5 * h;
        let grad = g1 + (g1 - g2) * (r - x_half) / h;
        let ahead = g.locate([r + h, 0.0]).unwrap_or(m + 1);
        let denominator = 1.0 - (series.law.g0() * s.time).exp() * series.n0[ahead];
        out.push(VelocitySample {
            t: s.time,
            front: r,
            speed,
            grad,
            denominator,
        });
    }
    Ok(out)
}

/// Stefan condition `V = |∇p| / (1 - e^{G(0)t} n⁰)` in 1D: mean relative
/// error of the differenced front speed against the formula. Samples whose
/// denominator is below `STEFAN_DENOMINATOR_MIN` are counted, not asserted.
pub fn check_stefan_velocity(series: &SnapshotSeries, thr: f64) -> Result<CheckResult, DiagnosticsError> {
    let samples = velocity_samples(series, thr)?;
    let (good, degenerate): (Vec<_>, Vec<_>) = samples
        .iter()
        .partition(|s| s.denominator >= tol::STEFAN_DENOMINATOR_MIN);
    if good.is_empty() {
        return Err(DiagnosticsError::TooFewSnapshots { need: 3, got: 0 });
    }
    let errs: Vec<f64> = good.iter().map(|s: &&VelocitySample| (s.speed - s.predicted()).abs() / s.predicted().abs()).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(CheckResult::new("stefan_velocity", mean, tol::STEFAN_VELOCITY_REL, 0.0, context(series))
        .with_value("samples", good.len() as f64)
        .with_value("degenerate_samples", degenerate.len() as f64)
        .with_value("max_relative_error", worst))
}

/// Nonincreasing along the ladder, allowing one increase of at most
/// `LADDER_INVERSION` relative to the previous value.
pub fn ladder_nonincreasing(seq: &[f64]) -> bool {
    let mut inversions = 0;
    for w in seq.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            if inversions > 1 || w[1] > w[0] * (1.0 + tol::LADDER_INVERSION) {
                return false;
            }
        }
    }
    true
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

/// Stiff-limit convergence along the γ ladder. At every snapshot time shared
/// by all runs, `‖n_γ - n‖₁`, `‖p_γ - p‖₁` and the Hausdorff distance between
/// `{n_γ > thr}` and `{n > thr}` must be nonincreasing in γ (one inversion of
/// at most 10% allowed); the final Hausdorff distance at the largest γ must
/// be at most `4h`, and each positivity set must lie in the `4h`
/// neighbourhood of the other. `measured` is that final distance.
pub fn check_gamma_convergence(ladder: &[SnapshotSeries], hs: &SnapshotSeries, thr: f64) -> Result<CheckResult, DiagnosticsError> {
    stiff(hs)?;
    let mut ladder: Vec<&SnapshotSeries> = ladder.iter().collect();
    if ladder.is_empty() || ladder.iter().any(|s| s.gamma().is_none()) {
        return Err(DiagnosticsError::LadderMissing);
    }
    ladder.sort_by(|a, b| a.gamma().partial_cmp(&b.gamma()).expect("finite gammas"));
    let g = *hs.grid();
    if ladder.iter().any(|s| s.grid() != &g) {
        return Err(GridError::GridMismatch.into());
    }
    let h = g.spacing();
    let mut shared: Vec<(&Snapshot, Vec<&Snapshot>)> = Vec::new();
    for s in &hs.snapshots {
        let row: Option<Vec<&Snapshot>> = ladder
            .iter()
            .map(|run| run.snapshots.iter().find(|q| same_time(q.time, s.time)))
            .collect();
        if let Some(row) = row {
            shared.push((s, row));
        }
    }
    if shared.is_empty() {
        return Err(DiagnosticsError::LadderMissing);
    }
    let mut ok = true;
    let mut result = CheckResult::new("gamma_convergence", 0.0, tol::HAUSDORFF_CELLS * h, 0.0, format!(
        "gammas={:?} shared_times={} {}",
        ladder.iter().map(|s| s.gamma().unwrap_or(f64::NAN)).collect::<Vec<_>>(),
        shared.len(),
        context(hs)
    ));
    let mut final_haus = 0.0;
    let mut failures = 0usize;
    for (s, row) in &shared {
        let limit = positivity_set(&s.n, thr);
        let mut dn = Vec::new();
        let mut dp = Vec::new();
        let mut dh = Vec::new();
        for q in row {
            dn.push(q.n.l1_distance(&s.n)?);
            dp.push(q.p.l1_distance(&s.p)?);
            dh.push(hausdorff_distance(&positivity_set(&q.n, thr), &limit)?);
        }
        let seq_ok = ladder_nonincreasing(&dn) && ladder_nonincreasing(&dp) && ladder_nonincreasing(&dh);
        failures += usize::from(!seq_ok);
        ok &= seq_ok;
        final_haus = *dh.last().expect("nonempty ladder");
    }
    let (s, row) = shared.last().expect("nonempty");
    let top = positivity_set(&row.last().expect("nonempty").n, thr);
    let limit = positivity_set(&s.n, thr);
    let delta = tol::HAUSDORFF_CELLS * h;
    let inclusions = limit.is_subset_of(&neighborhood(&top, delta)) && top.is_subset_of(&neighborhood(&limit, delta));
    for (k, q) in row.iter().enumerate() {
        let gamma = ladder[k].gamma().unwrap_or(f64::NAN);
        result = result
            .with_value(format!("final_l1_n[gamma={gamma}]"), q.n.l1_distance(&s.n)?)
            .with_value(format!("final_l1_p[gamma={gamma}]"), q.p.l1_distance(&s.p)?)
            .with_value(
                format!("final_hausdorff[gamma={gamma}]"),
                hausdorff_distance(&positivity_set(&q.n, thr), &limit)?,
            );
    }
    result.measured = final_haus;
    result.passed = final_haus <= result.bound;
    Ok(result
        .with_value("nonmonotone_times", failures as f64)
        .with_value("neighbourhood_inclusions", f64::from(u8::from(inclusions)))
        .and(ok && inclusions))
}

/// Lattice directions: axis steps, plus diagonals in 2D.
fn lattice_steps(dim: usize) -> Vec<(isize, isize)> {
    if dim == 1 {
        vec![(1, 0), (-1, 0)]
    } else {
        vec![(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]
    }
}

/// Reflection consequences when `supp n⁰ ⊆ B_R(0)`: for every lattice
/// direction `e` and cell pair `x`, `y = x + step` whose mirror plane lies
/// beyond `R` (`x·e + |step|/2 ≥ R`), `p(y) ≤ p(x) + 10 tol`; and at
/// snapshots with `t ≥ t_late`, `R₊ - R₋ ≤ 2R + 2h` for `Ω(t)` around the
/// origin. `measured` counts monotonicity violations.
pub fn check_reflection_monotonicity(
    series: &SnapshotSeries,
    r_support: f64,
    solver_tol: f64,
    thr: f64,
    t_late: f64,
) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    let g = *series.grid();
    let h = g.spacing();
    for i in 0..g.len() {
        let c = g.center(i);
        if series.n0[i] > 0.0 && c[0].hypot(c[1]) > r_support + 0.5 * h * (g.dim() as f64).sqrt() {
            return Err(DiagnosticsError::SupportNotCentered(r_support));
        }
    }
    let slack = tol::REFLECTION_FACTOR * solver_tol;
    let n = g.cells_per_axis() as isize;
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    let mut spread: f64 = f64::NEG_INFINITY;
    for s in &series.snapshots {
        for (dx, dy) in lattice_steps(g.dim()) {
            let len = ((dx * dx + dy * dy) as f64).sqrt();
            let e = [dx as f64 / len, dy as f64 / len];
            for i in 0..g.len() {
                let c = g.center(i);
                if c[0] * e[0] + c[1] * e[1] + 0.5 * len * h < r_support {
                    continue;
                }
                let [ix, iy] = g.unflatten(i);
                let (jx, jy) = (ix as isize + dx, iy as isize + dy);
                if jx < 0 || jx >= n || jy < 0 || jy >= n {
                    continue;
                }
                let j = g.flatten(jx as usize, jy as usize);
                let rise = s.p[j] - s.p[i];
                worst = worst.max(rise);
                if rise > slack {
                    violations += 1;
                }
            }
        }
        if s.time >= t_late {
            let omega = positivity_set(&s.p, thr);
            if !omega.is_empty() {
                let (rm, rp) = radial_bounds(&omega, [0.0, 0.0])?;
                spread = spread.max(rp - rm);
            }
        }
    }
    let spread_bound = 2.0 * r_support + 2.0 * h;
    Ok(CheckResult::new(name_for("reflection_monotonicity", series), violations as f64, 0.0, 0.0, context(series))
        .with_value("largest_rise", worst)
        .with_value("late_radial_spread", spread)
        .with_value("spread_bound", spread_bound)
        .and(spread <= spread_bound))
}

/// Flatness and density of the zero set `{p ≤ thr}` at up to `sample_count`
/// boundary cells of `Ω(t)` whose outside neighbour has
/// `e^{G(0)t} n⁰ < 0.95`, over radii `4h`, `8h`, `16h`. With
/// `assert_density` the check requires density `≥ 0.3` everywhere;
/// otherwise it only reports. `measured` is the smallest density.
pub fn check_flatness_criteria(
    series: &SnapshotSeries,
    snapshot: &Snapshot,
    sample_count: usize,
    thr: f64,
    assert_density: bool,
) -> Result<CheckResult, DiagnosticsError> {
    let g = *series.grid();
    let h = g.spacing();
    let omega = positivity_set(&snapshot.p, thr);
    let edge = boundary_cells(&omega);
    let growth = (series.law.g0() * snapshot.time).exp();
    let candidates: Vec<usize> = edge
        .indices()
        .into_iter()
        .filter(|&i| {
            g.neighbors(i)[..2 * g.dim()]
                .iter()
                .flatten()
                .any(|&j| !omega.contains(j) && growth * series.n0[j] < 1.0 - tol::STEFAN_DENOMINATOR_MIN)
        })
        .collect();
    if candidates.is_empty() || sample_count == 0 {
        return Err(DiagnosticsError::NoBoundaryCells);
    }
    let take = sample_count.min(candidates.len());
    let mut min_density = f64::INFINITY;
    let mut min_flat = f64::INFINITY;
    let mut sampled = 0usize;
    for k in 0..take {
        let x = candidates[k * candidates.len() / take];
        for r in [4.0 * h, 8.0 * h, 16.0 * h] {
            match (flatness_ratio(&snapshot.p, x, r, thr), lebesgue_density(&snapshot.p, x, r, thr)) {
                (Ok(f), Ok(d)) => {
                    min_flat = min_flat.min(f);
                    min_density = min_density.min(d);
                    sampled += 1;
                }
                (Err(GeometryError::BallOutsideGrid { .. }), _) | (_, Err(GeometryError::BallOutsideGrid { .. })) => {}
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
        }
    }
    if sampled == 0 {
        return Err(DiagnosticsError::NoBoundaryCells);
    }
    let ctx = format!("t={} {}", snapshot.time, context(series));
    let r = if assert_density {
        let mut r = CheckResult::new("flatness_criteria", min_density, tol::DENSITY_MIN, 0.0, ctx);
        r.passed = min_density >= tol::DENSITY_MIN;
        r
    } else {
        CheckResult::report("flatness_criteria", min_density, ctx)
    };
    Ok(r.with_value("min_flatness_ratio", min_flat)
        .with_value("samples", sampled as f64)
        .with_value("candidates", candidates.len() as f64))
}

/// A porous-medium run started below the barrier stays below it, up to
/// `K h`, at every snapshot inside the barrier's window and ball. `measured`
/// is the largest excess `p - P`.
pub fn check_barrier_comparison(series: &SnapshotSeries, barrier: &Barrier) -> Result<CheckResult, DiagnosticsError> {
    need(series, 1)?;
    gamma_of(series)?;
    let g = *series.grid();
    let t_bar = barrier.t_bar();
    let mut excess = f64::NEG_INFINITY;
    let mut inner_max: f64 = 0.0;
    let mut used = 0usize;
    for s in series.snapshots.iter().filter(|s| s.time > 0.0 && s.time <= t_bar) {
        used += 1;
        for i in 0..g.len() {
            let c = g.center(i);
            let rho = barrier.distance(c);
            if rho > barrier.r0 {
                continue;
            }
            excess = excess.max(s.p[i] - barrier.value(c, s.time));
            if rho < barrier.inner_radius() {
                inner_max = inner_max.max(s.p[i]);
            }
        }
    }
    Ok(CheckResult::new(name_for("barrier_comparison", series), excess, 0.0, tol::K_BARRIER * g.spacing(), context(series))
        .with_value("t_bar", t_bar)
        .with_value("snapshots_used", used as f64)
        .with_value("inner_ball_max_pressure", inner_max)
        .and(used > 0))
}

/// First snapshot time at which a cell of `region` has `w > 0`.
pub fn activation_time(series: &SnapshotSeries, region: &RegionMask) -> Option<f64> {
    series
        .snapshots
        .iter()
        .find(|s| s.w.as_ref().is_some_and(|w| region.indices().iter().any(|&i| w[i] > 0.0)))
        .map(|s| s.time)
}

/// Options of [`default_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub p_threshold: f64,
    pub density_threshold: f64,
    pub solver_tol: f64,
    pub ab_buffer: f64,
    pub stefan_ladder: Vec<f64>,
    /// Radius of a ball around the origin containing `supp n⁰`; enables the
    /// reflection check.
    pub r_support: Option<f64>,
    pub flatness_samples: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            p_threshold: DEFAULT_P_THRESHOLD,
            density_threshold: 1e-6,
            solver_tol: DEFAULT_TOL,
            ab_buffer: tol::AB_FRONT_BUFFER,
            stefan_ladder: tol::STEFAN_LADDER.to_vec(),
            r_support: None,
            flatness_samples: 8,
        }
    }
}

fn push(out: &mut Vec<CheckResult>, name: String, r: Result<CheckResult, DiagnosticsError>) {
    out.push(r.unwrap_or_else(|e| {
        let mut c = CheckResult::new(name, f64::NAN, 0.0, 0.0, format!("check could not run: {e}"));
        c.passed = false;
        c
    }));
}

/// The default checks over a stiff-limit run and a γ ladder; either may be
/// absent. Checks that do not apply (1D-only checks on 2D runs, the AB check
/// before `5/(γc)`, Stefan checks on a run without pressure) are left out;
/// checks that apply but cannot run are reported as failures.
pub fn default_suite(hs: Option<&SnapshotSeries>, ladder: &[SnapshotSeries], opts: &SuiteOptions) -> Vec<CheckResult> {
    let thr = opts.p_threshold;
    let mut out = Vec::new();
    if let Some(hs) = hs {
        push(&mut out, "structure_theorem".into(), check_structure_theorem(hs, thr));
        push(&mut out, "complementarity".into(), check_complementarity(hs, thr));
        push(&mut out, "hs_monotonicity".into(), check_hs_monotonicity(hs, thr));
        push(&mut out, "mass_bounds[hs]".into(), check_mass_bounds(hs));
        push(&mut out, "pressure_bound[hs]".into(), check_pressure_bound(hs));
        push(&mut out, "obstacle_equivalence".into(), check_obstacle_equivalence(hs, opts.solver_tol));
        // no free boundary, nothing for the Stefan condition to constrain
        let has_front = hs.snapshots.iter().any(|s| s.p.max() > thr);
        if has_front && hs.snapshots.len() >= 3 {
            push(&mut out, "stefan_weak".into(), check_stefan_weak(hs, &opts.stefan_ladder));
        }
        if has_front && hs.grid().dim() == 1 && hs.snapshots.len() >= 3 {
            push(&mut out, "stefan_velocity".into(), check_stefan_velocity(hs, thr));
        }
        if let Some(r) = opts.r_support {
            let t_late = hs.last().map_or(0.0, |s| s.time);
            push(
                &mut out,
                "reflection_monotonicity[hs]".into(),
                check_reflection_monotonicity(hs, r, opts.solver_tol, thr, t_late),
            );
        }
        if let Some(last) = hs.last() {
            if let Ok(r) = check_flatness_criteria(hs, last, opts.flatness_samples, thr, false) {
                out.push(r);
            }
        }
        push(&mut out, "perimeter_proxy[hs]".into(), perimeter_monitor(hs, thr));
    }
    for run in ladder {
        let gamma = run.gamma().unwrap_or(f64::NAN);
        let tag = |b: &str| format!("{b}[gamma={gamma}]");
        push(&mut out, tag("mass_bounds"), check_mass_bounds(run));
        push(&mut out, tag("pressure_bound"), check_pressure_bound(run));
        let c = run.law.semiconvexity_constant().unwrap_or(f64::INFINITY);
        if run.last().is_some_and(|s| s.time >= 5.0 / (gamma * c)) {
            push(&mut out, tag("aronson_benilan"), check_aronson_benilan(run, thr, opts.ab_buffer));
            push(&mut out, tag("pme_time_monotonicity"), check_pme_time_monotonicity(run, thr, opts.ab_buffer));
        }
        push(&mut out, tag("energy_monitor"), energy_monitor(run));
        push(&mut out, tag("perimeter_proxy"), perimeter_monitor(run, thr));
    }
    if let (Some(hs), false) = (hs, ladder.is_empty()) {
        push(
            &mut out,
            "gamma_convergence".into(),
            check_gamma_convergence(ladder, hs, opts.density_threshold),
        );
    }
    out
}
