//! Every tolerance the checks use, in one place.
//!
//! The `K_*` constants multiply the grid spacing `h`. They were measured once
//! by the refinement study in `examples/calibrate.rs` (128 to 1024 cells on
//! the reference scenario) and frozen with a safety margin; the measured
//! worst cases are quoted next to each. They are not tuned per run.

/// Pointwise identities that hold by construction.
pub const EXACT: f64 = 1e-8;
/// Relative slack on `∫n(t) ≤ e^{G(0)t} ∫n⁰`.
pub const MASS_REL: f64 = 1e-8;
/// Relative slack on `∫p(t) ≤ pM e^{G(0)t} ∫n⁰`.
pub const PRESSURE_MASS_REL: f64 = 1e-6;
/// Absolute slack on `p ≤ pM`.
pub const PRESSURE_BOUND: f64 = 1e-8;
/// Obstacle residual every emitted solution must meet.
pub const OBSTACLE_RESIDUAL: f64 = 1e-9;

/// `|Δ_h p + G(p)|` two cells inside `Ω(t)`; measured 0.12 to 0.15.
pub const K_STRUCTURE: f64 = 0.5;
/// `|p (Δ_h p + G(p))|` on interior cells; measured 0.009 to 0.014.
pub const K_COMPLEMENTARITY: f64 = 0.1;
/// `Δ_h p + G(p) ≥ -K h` on interior cells; measured 0.12.
pub const K_ONE_SIDED: f64 = 0.5;
/// Largest decrease of the stiff-limit `p` between snapshots. The
/// second-order pressure recovery overshoots by up to `0.15 h` at the step a
/// cell joins `Ω`.
pub const K_P_MONOTONE: f64 = 0.5;

/// Aronson–Bénilan bound for the porous-medium pressure, on cells at least
/// [`AB_FRONT_BUFFER`] away from the edge of the support; measured at most 1.8
/// with upwind mobility.
pub const K_AB: f64 = 5.0;
/// Distance from the moving front inside which the explicit scheme's
/// cell-by-cell front advance spoils pointwise second differences.
pub const AB_FRONT_BUFFER: f64 = 0.1;
/// Time monotonicity of the porous-medium pressure, same cells as the AB
/// check; measured 0 with upwind mobility, the bound covers other laws.
pub const K_PME_MONOTONE: f64 = 4.0;

/// Trapezoid reconstruction of `w` from the `p` history:
/// gap `≤ K Δ (Δ + h) T` with `Δ` the snapshot spacing. The `Δ h` part is
/// the jump of `p` by a fraction of `h` when a cell joins `Ω`, which the
/// trapezoid rule cannot see. Measured 0.11 to 0.76.
pub const K_RECONSTRUCTION: f64 = 2.0;
/// Porous-medium pressure above the barrier; measured 0 (never above).
pub const K_BARRIER: f64 = 1.0;

/// Required decrease of the weak Stefan residual down the smoothing ladder.
pub const STEFAN_WEAK_DECREASE: f64 = 4.0;
/// Default smoothing ladder, as fractions of `max p`.
pub const STEFAN_LADDER: [f64; 5] = [1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
/// Mean relative error of front speed against `|∇p| / (1 - e^{G(0)t} n⁰)`.
pub const STEFAN_VELOCITY_REL: f64 = 0.05;
/// Front speeds are fitted over a window across which the front moves at
/// least this many cells.
pub const STEFAN_VELOCITY_CELLS: f64 = 4.0;
/// Smallest Stefan denominator `1 - e^{G(0)t} n⁰` at which a speed sample
/// is asserted.
pub const STEFAN_DENOMINATOR_MIN: f64 = 0.05;

/// Final Hausdorff distance along the γ ladder, in cells.
pub const HAUSDORFF_CELLS: f64 = 4.0;
/// Largest relative increase tolerated once along a γ ladder.
pub const LADDER_INVERSION: f64 = 0.10;

/// Reflection monotonicity slack, in multiples of the obstacle tolerance.
pub const REFLECTION_FACTOR: f64 = 10.0;
/// Lebesgue density of the zero set at late-time boundary points.
pub const DENSITY_MIN: f64 = 0.3;
/// Constant in `MD(A ∩ B_r) / r ≥ c |A ∩ B_r| / |B_r|`, per dimension. The
/// 2D value is half the smallest ratio seen on random masks (1.99).
pub const FLATNESS_C_1D: f64 = 0.5;
pub const FLATNESS_C_2D: f64 = 1.0;
