use stifflimit::grid::{integrate, Grid, RegionMask, ScalarField};
use stifflimit::growth::GrowthLaw;
use stifflimit::heleshaw::*;
use stifflimit::obstacle::optimal_omega;

fn law() -> GrowthLaw {
    GrowthLaw::linear(1.0, 1.0).unwrap()
}

fn interval(g: Grid, r: f64) -> ScalarField {
    ScalarField::from_fn(g, |x| if x[0].abs() < r { 1.0 } else { 0.0 })
}

fn config(g: &Grid, dt: f64, t_final: f64, every: f64) -> HsRunConfig {
    HsRunConfig::new(dt, t_final, every).with_omega(optimal_omega(g))
}

/// Front ODE `R' = pM k tanh(k R)`, `k = sqrt(g0 / pM)`, by classical RK4.
fn front_ode(r0: f64, t: f64, steps: usize) -> f64 {
    let f = |r: f64| r.tanh();
    let dt = t / steps as f64;
    let mut r = r0;
    for _ in 0..steps {
        let k1 = f(r);
        let k2 = f(r + 0.5 * dt * k1);
        let k3 = f(r + 0.5 * dt * k2);
        let k4 = f(r + dt * k3);
        r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    r
}

#[test]
fn ball_pressure_matches_the_elliptic_solve() {
    let g = Grid::new(2, 64, 1.0).unwrap();
    let n0 = ScalarField::from_fn(g, |x| if x[0].hypot(x[1]) < 0.4 { 1.0 } else { 0.0 });
    let s0 = HsState::initial(n0, law()).unwrap();
    let dt = 1e-4;
    let s1 = hs_step(&s0, &config(&g, dt, dt, dt)).unwrap();
    let elliptic = solve_pressure_on_region(&s1.w_support(), &law()).unwrap();
    let diff = s1.p.max_abs_diff(&elliptic).unwrap();
    assert!(s1.w_support().count() >= s0.omega_mask.count());
    assert!(diff <= 1e-4, "{diff}");
}

#[test]
fn front_follows_the_ode() {
    let g = Grid::new(1, 512, 1.5).unwrap();
    let r0 = 0.3;
    let s0 = HsState::initial(interval(g, r0), law()).unwrap();
    let run = hs_run(&s0, &config(&g, 1e-3, 1.0, 0.05)).unwrap();
    assert!(run.warnings.is_empty(), "{:?}", run.warnings);
    let mut worst: f64 = 0.0;
    for s in &run.snapshots[1..] {
        let exact = front_ode(r0, s.t, 10_000);
        worst = worst.max((s.front_1d().unwrap() - exact).abs() / exact);
    }
    assert!(worst <= 0.03, "{worst}");
}

#[test]
fn sets_grow_and_nest() {
    let g = Grid::new(2, 48, 1.0).unwrap();
    let n0 = ScalarField::from_fn(g, |x| {
        let r = x[0].hypot(x[1]);
        if r < 0.25 {
            1.0
        } else if x[0] > 0.3 {
            0.4
        } else {
            0.0
        }
    });
    let s0 = HsState::initial(n0, law()).unwrap();
    let run = hs_run(&s0, &config(&g, 0.01, 0.4, 0.02)).unwrap();
    let snaps = &run.snapshots;
    for (k, a) in snaps.iter().enumerate() {
        // {w(t) > 0} ⊆ Ω(t) away from t = 0, where w vanishes
        if k > 0 {
            assert!(a.w_support().is_subset_of(&a.omega_mask), "t = {}", a.t);
        }
        for b in &snaps[k + 1..] {
            assert!(a.omega_mask.is_subset_of(&b.omega_mask));
            assert!(a.w_support().is_subset_of(&b.w_support()));
            if k > 0 {
                assert!(a.omega_mask.is_subset_of(&b.w_support()), "{} vs {}", a.t, b.t);
            }
        }
    }
}

#[test]
fn density_grows_exponentially_off_the_support() {
    let g = Grid::new(1, 128, 1.5).unwrap();
    let n0 = ScalarField::from_fn(g, |x| if x[0].abs() < 0.3 { 1.0 } else { 0.3 * (1.0 + x[0]).abs() / 2.5 });
    let s0 = HsState::initial(n0.clone(), law()).unwrap();
    let run = hs_run(&s0, &config(&g, 0.01, 0.6, 0.6)).unwrap();
    let last = run.snapshots.last().unwrap();
    let mut checked = 0;
    for i in 0..g.len() {
        if last.w[i] == 0.0 {
            checked += 1;
            let exact = (last.t.exp() * n0[i]).min(1.0);
            assert!((last.n[i] - exact).abs() <= 1e-8, "cell {i}");
        }
    }
    assert!(checked > 0);
}

#[test]
fn pressure_is_nondecreasing_and_mass_is_bounded() {
    let g = Grid::new(1, 256, 1.5).unwrap();
    let n0 = interval(g, 0.3);
    let s0 = HsState::initial(n0.clone(), law()).unwrap();
    let run = hs_run(&s0, &config(&g, 2e-3, 0.5, 0.05)).unwrap();
    let m0 = integrate(&n0);
    for pair in run.snapshots.windows(2) {
        for i in 0..g.len() {
            assert!(pair[1].w[i] >= pair[0].w[i]);
        }
    }
    for s in &run.snapshots {
        assert!(integrate(&s.p) <= s.t.exp() * m0 * (1.0 + 1e-6));
        assert!(s.p.max() <= 1.0 + 1e-8);
    }
}

#[test]
fn island_appears_at_ln_two() {
    let g = Grid::new(1, 256, 1.5).unwrap();
    let island = |x: f64| (0.9..1.0).contains(&x);
    let n0 = ScalarField::from_fn(g, |x| {
        if x[0].abs() < 0.3 {
            1.0
        } else if island(x[0]) {
            0.5
        } else {
            0.0
        }
    });
    let dt = 1e-3;
    let s0 = HsState::initial(n0, law()).unwrap();
    let run = hs_run(&s0, &config(&g, dt, 0.8, dt)).unwrap();
    let cells: Vec<usize> = (0..g.len()).filter(|&i| island(g.center_1d(i))).collect();
    let first = run
        .snapshots
        .iter()
        .find(|s| cells.iter().any(|&i| s.w[i] > 0.0))
        .expect("island never activates");
    assert!((first.t - std::f64::consts::LN_2).abs() <= 2.0 * dt);
    // the new component is separated from the main one
    let w = first.w_support();
    let gap = RegionMask::from_fn(g, |x| (0.8..0.85).contains(&x[0]));
    assert!(w.intersection(&gap).unwrap().is_empty());
}

#[test]
fn runs_are_bit_deterministic() {
    let g = Grid::new(2, 32, 1.0).unwrap();
    let n0 = ScalarField::from_fn(g, |x| if x[0].hypot(x[1]) < 0.3 { 1.0 } else { 0.2 });
    let s0 = HsState::initial(n0, law()).unwrap();
    let cfg = config(&g, 0.02, 0.2, 0.1);
    let a = hs_run(&s0, &cfg).unwrap();
    let b = hs_run(&s0, &cfg).unwrap();
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.w, y.w);
        assert_eq!(x.p, y.p);
        assert_eq!(x.n, y.n);
    }
}
