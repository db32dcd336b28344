//! Refinement study behind the `K_*` constants in `tolerances`.
//!
//! Runs the reference scenario at 128, 256, 512 and 1024 cells and prints
//! each grid-scaled defect divided by `h`, the reconstruction gap under
//! snapshot refinement, the barrier excess, and the smallest ratio
//! `flatness / density` seen on random 2D masks.
//!
//! ```text
//! cargo run --release --example calibrate
//! ```

use rand::{rngs::StdRng, Rng, SeedableRng};
use stifflimit::barriers::Barrier;
use stifflimit::diagnostics::*;
use stifflimit::geometry::{flatness_ratio, lebesgue_density};
use stifflimit::grid::{Grid, ScalarField};
use stifflimit::scenario::{InitialData, Scenario};
use stifflimit::tolerances::AB_FRONT_BUFFER;

const THR: f64 = 1e-7;

fn per_h(c: &CheckResult, key: Option<&str>, h: f64) -> f64 {
    key.map_or(c.measured, |k| c.values[k]) / h
}

fn grid_study() {
    println!("cells  structure  complementarity  one_sided  p_drop  aronson_benilan  pme_monotone   (all / h)");
    for cells in [128, 256, 512, 1024] {
        let mut sc = Scenario::reference();
        sc.grid = Grid::new(1, cells, 1.5).unwrap();
        let h = sc.grid.spacing();
        let (hs, _) = sc.run_hs().unwrap();
        let (pme, _) = sc.run_pme(40.0).unwrap();
        let s = check_structure_theorem(&hs, THR).unwrap();
        let c = check_complementarity(&hs, THR).unwrap();
        let m = check_hs_monotonicity(&hs, THR).unwrap();
        let ab = check_aronson_benilan(&pme, THR, AB_FRONT_BUFFER).unwrap();
        let pm = check_pme_time_monotonicity(&pme, THR, AB_FRONT_BUFFER).unwrap();
        println!(
            "{cells:5}  {:9.3}  {:15.3}  {:9.3}  {:6.3}  {:15.3}  {:12.3}",
            per_h(&s, Some("interior_equation"), h),
            per_h(&c, None, h),
            per_h(&c, Some("one_sided_deficit"), h),
            per_h(&m, None, h),
            per_h(&ab, None, h),
            per_h(&pm, None, h),
        );
    }
}

fn reconstruction_study() {
    println!("\nsnapshot spacing  gap / (spacing² T)  unweighted gap / (spacing² T)");
    for every in [0.02, 0.01, 0.005] {
        let mut sc = Scenario::reference();
        sc.solver.snapshot_every = every;
        let (hs, _) = sc.run_hs().unwrap();
        let scale = every * every * sc.solver.t_final;
        let w = obstacle_equivalence(&hs, 1e-9, true).unwrap();
        let u = obstacle_equivalence(&hs, 1e-9, false).unwrap();
        println!("{every:16}  {:18.3}  {:29.3}", w.measured / scale, u.measured / scale);
    }
}

/// Vacuum ball of radius 0.4 at the origin, tumor `0.4 ≤ |x| < 0.8`.
fn barrier_study() {
    println!("\ncells  gamma  barrier excess / h  inner-ball max p");
    for cells in [128, 256, 512, 1024] {
        for gamma in [10.0, 40.0] {
            let mut sc = Scenario::reference();
            sc.grid = Grid::new(1, cells, 1.5).unwrap();
            sc.init = InitialData::Annulus {
                center: [0.0, 0.0],
                inner_radius: 0.4,
                outer_radius: 0.8,
                amplitude: 1.0,
            };
            let b = Barrier::new(sc.law.p_max(), 0.4, [0.0, 0.0], 1, sc.law.clone(), gamma).unwrap();
            sc.solver.t_final = b.t_bar();
            sc.solver.snapshot_every = b.t_bar() / 20.0;
            let (pme, _) = sc.run_pme(gamma).unwrap();
            let r = check_barrier_comparison(&pme, &b).unwrap();
            println!(
                "{cells:5}  {gamma:5}  {:18.3}  {:16.3e}",
                r.measured / sc.grid.spacing(),
                r.values["inner_ball_max_pressure"]
            );
        }
    }
}

fn flatness_study() {
    let g = Grid::new(2, 64, 1.0).unwrap();
    let h = g.spacing();
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = f64::INFINITY;
    for _ in 0..400 {
        let fill: f64 = rng.gen_range(0.02..0.98);
        let p = ScalarField::from_fn(g, |_| if rng.gen_bool(fill) { 0.0 } else { 1.0 });
        let x = g.locate([rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)]).unwrap();
        for r in [4.0 * h, 8.0 * h, 16.0 * h] {
            let d = lebesgue_density(&p, x, r, 0.5).unwrap();
            if d > 0.0 {
                worst = worst.min(flatness_ratio(&p, x, r, 0.5).unwrap() / d);
            }
        }
    }
    println!("\nrandom 2D masks: smallest flatness / density = {worst:.3}");
}

fn main() {
    grid_study();
    reconstruction_study();
    barrier_study();
    flatness_study();
}
