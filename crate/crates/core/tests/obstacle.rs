use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};
use stifflimit::grid::{laplacian, Grid, ScalarField};
use stifflimit::obstacle::*;

/// Grid on which the zero ghost value outside the box sits at `x = ±1`.
fn unit_wall_grid(cells: usize) -> Grid {
    Grid::new(1, cells, cells as f64 / (cells as f64 + 1.0)).unwrap()
}

fn parabola(x: f64) -> f64 {
    (1.0 - x * x) / 2.0
}

/// `F = -1` on `|x| < 0.3`, `+3` outside. The solution is
/// `2a²/3 - x²/2` inside, `3/2 (b - |x|)²` on `a ≤ |x| < b`, with `b = 0.4`.
const A: f64 = 0.3;
const B: f64 = 0.4;

fn matching_forcing(g: Grid) -> ScalarField {
    ScalarField::from_fn(g, |x| if x[0].abs() < A { -1.0 } else { 3.0 })
}

fn matching_exact(x: f64) -> f64 {
    let x = x.abs();
    if x < A {
        2.0 * A * A / 3.0 - x * x / 2.0
    } else if x < B {
        1.5 * (B - x).powi(2)
    } else {
        0.0
    }
}

fn max_err(w: &ScalarField, exact: impl Fn(f64) -> f64) -> f64 {
    let g = w.grid();
    (0..g.len()).map(|i| (w[i] - exact(g.center_1d(i))).abs()).fold(0.0, f64::max)
}

#[test]
fn unconstrained_poisson_matches_the_parabola() {
    for cells in [32, 64, 128] {
        let g = unit_wall_grid(cells);
        let sol = psor_solve(&ObstacleSpec::new(ScalarField::constant(g, -1.0))).unwrap();
        assert!(sol.converged);
        let h = g.spacing();
        assert!(max_err(&sol.w, parabola) <= h * h, "{cells} cells");
        assert!(sol.residual <= DEFAULT_TOL);
        assert_eq!(sol.active_set.count(), g.len());
    }
}

#[test]
fn free_boundary_matches_the_matching_solution() {
    // half width 0.8 puts faces on 0.3 and 0.4 when cells is a multiple of 16
    let mut prev = f64::NAN;
    for cells in [64, 128, 256] {
        let g = Grid::new(1, cells, 0.8).unwrap();
        let h = g.spacing();
        let f = matching_forcing(g);
        let sol = psor_solve(&ObstacleSpec::new(f.clone())).unwrap();
        assert!(sol.converged);
        let edge = sol.active_set.indices().iter().map(|&i| g.center_1d(i).abs()).fold(0.0, f64::max);
        assert!((edge - B).abs() <= 2.0 * h, "edge {edge} at {cells} cells");
        let err = max_err(&sol.w, matching_exact);
        assert!(err <= h * h, "error {err:e} at {cells} cells");
        if prev.is_finite() {
            assert!(prev / err >= 3.5, "ratio {}", prev / err);
        }
        prev = err;

        // Δ_h w = F on the active set, Δ_h w = 0 two cells away from it
        let lap = laplacian(&sol.w);
        for i in 0..g.len() {
            if sol.w[i] > DEFAULT_TOL {
                assert!((lap[i] - f[i]).abs() <= 1e-6, "cell {i}: {} vs {}", lap[i], f[i]);
            } else if (i.saturating_sub(2)..(i + 3).min(g.len())).all(|j| sol.w[j] == 0.0) {
                assert_eq!(lap[i], 0.0);
            }
        }
    }
}

#[test]
fn solution_minimizes_the_energy() {
    let g = unit_wall_grid(64);
    let f = ScalarField::constant(g, -1.0);
    let sol = psor_solve(&ObstacleSpec::new(f.clone())).unwrap();
    let j = discrete_energy(&sol.w, &f).unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..100 {
        let scale = 10f64.powf(rng.gen_range(-6.0..-1.0));
        let v = ScalarField::from_vec(g, (0..g.len()).map(|i| (sol.w[i] + scale * rng.gen_range(-1.0..1.0)).max(0.0)).collect()).unwrap();
        assert!(j <= discrete_energy(&v, &f).unwrap());
    }
}

#[test]
fn sweeps_never_increase_the_energy() {
    for dim in [1, 2] {
        let g = Grid::new(dim, 24, 0.8).unwrap();
        let f = ScalarField::from_fn(g, |x| if x[0].hypot(x[1]) < A { -1.0 } else { 3.0 });
        let mut w = vec![0.0; g.len()];
        let energy = |w: &[f64]| discrete_energy(&ScalarField::from_vec(g, w.to_vec()).unwrap(), &f).unwrap();
        let mut last = energy(&w);
        for _ in 0..300 {
            psor_sweep(&mut w, &f, DEFAULT_OMEGA);
            let now = energy(&w);
            assert!(now <= last + 1e-12, "{now} > {last}");
            last = now;
        }
    }
}

#[test]
fn analytic_samples_have_a_small_residual() {
    for cells in [32, 64, 128] {
        let g = unit_wall_grid(cells);
        let w = ScalarField::from_fn(g, |x| parabola(x[0]));
        let r = complementarity_residual(&w, &ScalarField::constant(g, -1.0)).unwrap();
        let h = g.spacing();
        assert!(r <= h * h, "{r:e} at {cells} cells");
    }
    // a smooth profile that is not a polynomial: the residual falls like h²
    let mut prev = f64::NAN;
    for cells in [64, 128, 256] {
        let g = unit_wall_grid(cells);
        let pi = std::f64::consts::PI;
        let w = ScalarField::from_fn(g, |x| (pi * x[0] / 2.0).cos());
        let f = ScalarField::from_fn(g, |x| -pi * pi / 4.0 * (pi * x[0] / 2.0).cos());
        let r = complementarity_residual(&w, &f).unwrap();
        if prev.is_finite() {
            assert!(prev / r >= 3.5, "ratio {}", prev / r);
        }
        prev = r;
    }
}

#[test]
fn iteration_count_scales_at_most_like_cells_to_the_three_halves() {
    let iters = |cells: usize| {
        let g = Grid::new(1, cells, 0.8).unwrap();
        let spec = ObstacleSpec::new(matching_forcing(g)).with_omega(optimal_omega(&g));
        psor_solve(&spec).unwrap().iters as f64
    };
    let base = iters(64);
    for cells in [128, 256, 512] {
        let bound = 2.0 * base * (cells as f64 / 64.0).powf(1.5);
        assert!(iters(cells) <= bound, "{cells} cells: {} > {bound}", iters(cells));
    }
}

#[test]
fn solves_are_bit_deterministic() {
    let g = Grid::new(2, 32, 0.8).unwrap();
    let f = ScalarField::from_fn(g, |x| if x[0].hypot(x[1]) < A { -1.0 } else { 0.5 });
    let a = psor_solve(&ObstacleSpec::new(f.clone())).unwrap();
    let b = psor_solve(&ObstacleSpec::new(f)).unwrap();
    assert_eq!(a.w, b.w);
    assert_eq!(a.iters, b.iters);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_satisfy_the_complementarity_system(
        vals in prop::collection::vec(-2.0f64..2.0, 16 * 16),
    ) {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = ScalarField::from_vec(g, vals).unwrap();
        let sol = psor_solve(&ObstacleSpec::new(f.clone())).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.w.values().iter().all(|&v| v >= 0.0));
        prop_assert!(complementarity_residual(&sol.w, &f).unwrap() <= DEFAULT_TOL);
        let lap = laplacian(&sol.w);
        for i in 0..g.len() {
            let slack = -lap[i] + f[i];
            prop_assert!(slack >= -DEFAULT_TOL);
            prop_assert!((sol.w[i] * slack).abs() <= DEFAULT_TOL);
        }
    }
}
