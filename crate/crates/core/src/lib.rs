//! Porous-medium tumor growth `∂t n = div(n ∇p) + n G(p)` with `p = n^γ`,
//! its incompressible (Hele-Shaw) limit `γ → ∞` computed through a family
//! of obstacle problems, and the instruments used to check one against the
//! other.
//!
//! The stiff limit is advanced in the time-integrated pressure
//! `w(t) = ∫₀ᵗ e^{-G(0)s} p(s) ds`, which solves, for each `t`,
//!
//! ```text
//! w ≥ 0,   -Δw + F(t) ≥ 0,   w (-Δw + F(t)) = 0,
//! F(t) = e^{-G(0)t} - n⁰ + ∫₀ᵗ e^{-G(0)s} (G(0) - G(p(s))) ds.
//! ```
//!
//! ```
//! use stifflimit::grid::{Grid, ScalarField};
//! use stifflimit::growth::GrowthLaw;
//! use stifflimit::heleshaw::{hs_run, HsRunConfig, HsState};
//!
//! let grid = Grid::new(1, 64, 1.5).unwrap();
//! let n0 = ScalarField::from_fn(grid, |x| if x[0].abs() < 0.3 { 1.0 } else { 0.0 });
//! let law = GrowthLaw::linear(1.0, 1.0).unwrap();
//! let cfg = HsRunConfig::new(0.01, 0.1, 0.05);
//! let run = hs_run(&HsState::initial(n0, law).unwrap(), &cfg).unwrap();
//! assert_eq!(run.snapshots.len(), 3);
//! assert!(run.snapshots[2].p.max() > 0.0);
//! ```

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod diagnostics;
pub mod geometry;
pub mod grid;
pub mod growth;
pub mod heleshaw;
pub mod obstacle;
pub mod pme;
pub mod scenario;
pub mod snapshot;
pub mod tolerances;

/// Snapshots of a run together with the warnings it raised.
#[derive(Debug, Clone)]
pub struct RunOutput<S> {
    pub snapshots: Vec<S>,
    pub warnings: Vec<String>,
    pub steps: usize,
}

impl<S> RunOutput<S> {
    pub(crate) fn new(snapshots: Vec<S>) -> Self {
        Self {
            snapshots,
            warnings: Vec::new(),
            steps: 0,
        }
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/porous-medium.md")]
    mod porous_medium {}
    #[doc = include_str!("../../../book/src/obstacle.md")]
    mod obstacle {}
    #[doc = include_str!("../../../book/src/hele-shaw.md")]
    mod hele_shaw {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
