//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! ```text
//! cargo test --release -p stifflimit-cli --test acceptance
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{rngs::StdRng, Rng, SeedableRng};
use stifflimit::barriers::Barrier;
use stifflimit::diagnostics::*;
use stifflimit::geometry::{hausdorff_distance, minimal_diameter, DEFAULT_ANGLES};
use stifflimit::grid::{Grid, RegionMask, ScalarField};
use stifflimit::obstacle::{complementarity_residual, psor_solve, ObstacleSpec};
use stifflimit::scenario::{InitialData, Scenario};
use stifflimit::snapshot::SnapshotSeries;
use stifflimit::tolerances::{self as tol, AB_FRONT_BUFFER};
use stifflimit_cli::run_cli;

// Pinned tolerances.
const OBSTACLE_EDGE_CELLS: f64 = 2.0;
const OBSTACLE_C: f64 = 1.0;
const OBSTACLE_RATIO: f64 = 3.5;
const SOLVER_RESIDUAL: f64 = 1e-9;
const FRONT_ODE_REL: f64 = 0.03;
const PLATEAU_REL: f64 = 0.10;
const BARRIER_ROUNDOFF: f64 = 1e-9;
const BARRIER_SAMPLES: usize = 50;
const ISLAND_STEPS: f64 = 2.0;
const THR: f64 = 1e-7;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn all(parts: Vec<Verdict>) -> Verdict {
    verdict(
        parts.iter().all(|v| v.passed),
        parts
            .iter()
            .map(|v| format!("{}{}", if v.passed { "" } else { "FAILED " }, v.detail))
            .collect::<Vec<_>>()
            .join("; "),
    )
}

fn check(c: &CheckResult) -> Verdict {
    verdict(c.passed, format!("{} {:.3e} <= {:.3e}", c.name, c.measured, c.bound + c.tolerance))
}

/// Reference scenario: the stiff limit and the full γ ladder.
struct Reference {
    scenario: Scenario,
    hs: SnapshotSeries,
    ladder: Vec<SnapshotSeries>,
}

fn reference() -> Reference {
    let scenario = Scenario::reference();
    let (hs, ladder) = std::thread::scope(|s| {
        let hs = s.spawn(|| scenario.run_hs().unwrap().0);
        let ladder = scenario.run_ladder().unwrap().into_iter().map(|r| r.0).collect::<Vec<_>>();
        (hs.join().unwrap(), ladder)
    });
    Reference { scenario, hs, ladder }
}

fn criterion_1() -> Verdict {
    let (a, b) = (0.3, 0.4);
    let exact = |x: f64| {
        let x = x.abs();
        if x < a {
            2.0 * a * a / 3.0 - x * x / 2.0
        } else if x < b {
            1.5 * (b - x).powi(2)
        } else {
            0.0
        }
    };
    let mut parts = Vec::new();
    let mut prev = f64::NAN;
    for cells in [128, 256, 512] {
        let g = Grid::new(1, cells, 0.8).unwrap();
        let h = g.spacing();
        let f = ScalarField::from_fn(g, |x| if x[0].abs() < a { -1.0 } else { 3.0 });
        let sol = psor_solve(&ObstacleSpec::new(f)).unwrap();
        let edge = sol.active_set.indices().iter().map(|&i| g.center_1d(i).abs()).fold(0.0, f64::max);
        let err = (0..g.len()).map(|i| (sol.w[i] - exact(g.center_1d(i))).abs()).fold(0.0, f64::max);
        let ratio = prev / err;
        let ok = sol.converged
            && (edge - b).abs() <= OBSTACLE_EDGE_CELLS * h
            && err <= OBSTACLE_C * h * h
            && (prev.is_nan() || ratio >= OBSTACLE_RATIO);
        parts.push(verdict(ok, format!("{cells} cells: edge {edge:.4} error {err:.2e} ratio {ratio:.2}")));
        prev = err;
    }
    all(parts)
}

fn criterion_2(r: &Reference) -> Verdict {
    let worst = r
        .hs
        .snapshots
        .iter()
        .map(|s| complementarity_residual(s.w.as_ref().unwrap(), s.forcing.as_ref().unwrap()).unwrap())
        .fold(0.0, f64::max);
    all(vec![
        verdict(worst <= SOLVER_RESIDUAL, format!("obstacle residual {worst:.2e}")),
        check(&check_complementarity(&r.hs, THR).unwrap()),
    ])
}

fn criterion_3(r: &Reference) -> Verdict {
    let mut parts = vec![check(&check_mass_bounds(&r.hs).unwrap())];
    for s in &r.ladder {
        let c = check_mass_bounds(s).unwrap();
        let p = c.values["pressure_mass_ratio"];
        parts.push(verdict(c.passed, format!("{} n {:.6} p {:.6}", c.name, c.measured, p)));
    }
    all(parts)
}

fn criterion_4(r: &Reference) -> Verdict {
    let pme = r.ladder.iter().find(|s| s.gamma() == Some(40.0)).unwrap();
    check(&check_aronson_benilan(pme, THR, AB_FRONT_BUFFER).unwrap())
}

fn criterion_5(r: &Reference) -> Verdict {
    let c = check_structure_theorem(&r.hs, THR).unwrap();
    verdict(
        c.passed,
        format!(
            "off-Omega density {:.1e}, Omega density {:.1e}, equation {:.2e} <= {:.2e}",
            c.values["off_omega_density"],
            c.values["omega_density"],
            c.values["interior_equation"],
            tol::K_STRUCTURE * r.scenario.grid.spacing(),
        ),
    )
}

/// `R' = pM k tanh(k R)` with `k = sqrt(g0 / pM)`, classical RK4.
fn front_ode(law_g0: f64, pm: f64, r0: f64, t: f64) -> f64 {
    let k = (law_g0 / pm).sqrt();
    let f = |r: f64| pm * k * (k * r).tanh();
    let steps = 10_000;
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

fn criterion_6(r: &Reference) -> Verdict {
    let law = &r.scenario.law;
    let fronts = front_positions(&r.hs).unwrap();
    let ode_err = fronts[1..]
        .iter()
        .map(|(t, f)| {
            let exact = front_ode(law.g0(), law.p_max(), 0.3, *t);
            (f.unwrap() - exact).abs() / exact
        })
        .fold(0.0, f64::max);

    let mut plateau = Scenario::reference();
    plateau.init = InitialData::Plateau {
        center: [0.0, 0.0],
        radius: 0.3,
        amplitude: 1.0,
        outer_radius: 1.0,
        outer_amplitude: 0.5,
    };
    let (ps, _) = plateau.run_hs().unwrap();
    let samples: Vec<VelocitySample> = velocity_samples(&ps, THR)
        .unwrap()
        .into_iter()
        .filter(|s| s.denominator < 0.9 && s.denominator >= tol::STEFAN_DENOMINATOR_MIN)
        .collect();
    let amp_err = samples.iter().map(|s| (s.speed - s.predicted()).abs() / s.predicted()).sum::<f64>() / samples.len() as f64;
    let amplification = samples.iter().map(|s| 1.0 / s.denominator).fold(0.0, f64::max);

    all(vec![
        verdict(ode_err <= FRONT_ODE_REL, format!("front vs ODE {ode_err:.4}")),
        verdict(
            !samples.is_empty() && amp_err <= PLATEAU_REL,
            format!("plateau speed error {amp_err:.4} over {} samples (amplification up to {amplification:.2})", samples.len()),
        ),
        check(&check_stefan_weak(&r.hs, &tol::STEFAN_LADDER).unwrap()),
    ])
}

fn criterion_7(r: &Reference) -> Verdict {
    let c = check_gamma_convergence(&r.ladder, &r.hs, 1e-6).unwrap();
    verdict(
        c.passed,
        format!(
            "final Hausdorff {:.4} <= {:.4}, nonmonotone times {}",
            c.measured,
            c.bound + c.tolerance,
            c.values["nonmonotone_times"]
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut parts = Vec::new();
    for gamma in [10.0, 40.0, 160.0] {
        for dim in [1, 2] {
            let sc = Scenario::reference();
            let b = Barrier::new(sc.law.p_max(), 0.4, [0.0, 0.0], dim, sc.law.clone(), gamma).unwrap();
            let (mut worst, mut evaluated) = (f64::INFINITY, 0usize);
            for i in 1..=BARRIER_SAMPLES {
                let t = b.t_bar() * i as f64 / BARRIER_SAMPLES as f64;
                for j in 0..BARRIER_SAMPLES {
                    let rho = b.r0 * (j as f64 + 0.5) / BARRIER_SAMPLES as f64;
                    if let Ok(res) = b.residual([rho, 0.0], t) {
                        let scale = 1.0 + gamma * b.c / t;
                        worst = worst.min(res / scale);
                        evaluated += 1;
                    }
                }
            }
            parts.push(verdict(
                evaluated > 0 && worst >= -BARRIER_ROUNDOFF,
                format!("gamma {gamma} dim {dim}: min scaled residual {worst:.2e} over {evaluated} points"),
            ));
        }
    }
    for gamma in [10.0, 40.0] {
        let mut sc = Scenario::reference();
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
        parts.push(check(&check_barrier_comparison(&pme, &b).unwrap()));
    }
    all(parts)
}

fn two_balls() -> Scenario {
    let mut sc = Scenario::reference();
    sc.grid = Grid::new(2, 64, 1.5).unwrap();
    sc.init = InitialData::TwoBalls {
        centers: [[-0.3, 0.15], [0.35, -0.1]],
        radii: [0.25, 0.2],
        amplitudes: [1.0, 1.0],
    };
    sc.solver.dt = 0.005;
    sc.solver.snapshot_every = 0.02;
    sc
}

fn criterion_9() -> Verdict {
    let sc = two_balls();
    let (hs, _) = sc.run_hs().unwrap();
    let r = sc.init.support_radius().unwrap();
    let t_late = 0.5 * sc.solver.t_final;
    let c = check_reflection_monotonicity(&hs, r, sc.solver.psor_tol, THR, t_late).unwrap();
    verdict(
        c.passed,
        format!(
            "{} violations, largest rise {:.2e}, late spread {:.4} <= {:.4}",
            c.measured, c.values["largest_rise"], c.values["late_radial_spread"], c.values["spread_bound"]
        ),
    )
}

fn criterion_10() -> Verdict {
    let mut rng = StdRng::seed_from_u64(20);
    let g = Grid::new(2, 24, 1.0).unwrap();
    let mut axioms = true;
    for _ in 0..40 {
        let masks: Vec<RegionMask> = (0..3)
            .map(|_| {
                let fill: f64 = rng.gen_range(0.05..0.6);
                RegionMask::from_fn(g, |_| rng.gen_bool(fill))
            })
            .collect();
        let d = |a: &RegionMask, b: &RegionMask| hausdorff_distance(a, b).unwrap();
        let (a, b, c) = (&masks[0], &masks[1], &masks[2]);
        axioms &= d(a, a) == 0.0;
        axioms &= d(a, b) == d(b, a);
        axioms &= a == b || d(a, b) > 0.0;
        axioms &= d(a, c) <= d(a, b) + d(b, c);
    }

    let sq = Grid::new(2, 64, 1.0).unwrap();
    let square = RegionMask::from_fn(sq, |x| x[0].abs() < 0.5 && x[1].abs() < 0.5);
    let md = minimal_diameter(&square).unwrap();
    let md_tol = sq.spacing() + (std::f64::consts::PI / DEFAULT_ANGLES as f64).sin();

    let g1 = Grid::new(1, 256, 1.5).unwrap();
    let island = |x: f64| (0.9..1.0).contains(&x);
    let n0 = ScalarField::from_fn(g1, |x| {
        if x[0].abs() < 0.3 {
            1.0
        } else if island(x[0]) {
            0.5
        } else {
            0.0
        }
    });
    let mut sc = Scenario::reference();
    sc.grid = g1;
    sc.init = InitialData::Field(n0);
    sc.solver.t_final = 0.8;
    sc.solver.snapshot_every = sc.solver.dt;
    let (hs, _) = sc.run_hs().unwrap();
    let region = RegionMask::from_fn(g1, |x| island(x[0]));
    let t = activation_time(&hs, &region).unwrap_or(f64::NAN);
    let expected = std::f64::consts::LN_2 / sc.law.g0();

    all(vec![
        verdict(axioms, "Hausdorff axioms on 40 random triples"),
        verdict((md - 1.0).abs() <= md_tol, format!("MD(unit square) {md:.4} within {md_tol:.4}")),
        verdict(
            (t - expected).abs() <= ISLAND_STEPS * sc.solver.dt,
            format!("island activates at {t:.4}, ln2/g0 = {expected:.4}"),
        ),
    ])
}

/// Every output of two sweeps from one config compares equal; the manifest
/// differs only in its wall time.
fn criterion_11(tmp: &Path) -> Verdict {
    let runs: Vec<_> = ["a", "b"].iter().map(|n| tmp.join(n)).collect();
    for out in &runs {
        let code = run_cli(["stifflimit", "sweep", "--out", out.to_str().unwrap()]);
        if code != 0 {
            return verdict(false, format!("sweep exited with {code}"));
        }
    }
    let manifest = |d: &Path| -> serde_json::Value {
        let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        m.as_object_mut().unwrap().remove("wall_time_seconds");
        m
    };
    let (ma, mb) = (manifest(&runs[0]), manifest(&runs[1]));
    let outputs = ma["outputs"].as_array().unwrap();
    let differing: Vec<&str> = outputs
        .iter()
        .map(|p| p.as_str().unwrap())
        .filter(|p| fs::read(runs[0].join(p)).unwrap() != fs::read(runs[1].join(p)).unwrap())
        .collect();
    verdict(
        ma == mb && differing.is_empty(),
        format!("{} files compared, {} differ, manifests equal: {}", outputs.len(), differing.len(), ma == mb),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; this target runs
    // everything or nothing.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let started = Instant::now();
    let tmp = tempfile::TempDir::new().unwrap();
    let (verdicts, r) = std::thread::scope(|s| {
        let sweep = s.spawn(|| criterion_11(tmp.path()));
        let c1 = s.spawn(criterion_1);
        let c8 = s.spawn(criterion_8);
        let c9 = s.spawn(criterion_9);
        let c10 = s.spawn(criterion_10);
        let r = reference();
        let mut v = vec![
            (1, "obstacle solver exactness", c1.join().unwrap()),
            (2, "complementarity", criterion_2(&r)),
            (3, "mass bounds", criterion_3(&r)),
            (4, "Aronson-Benilan", criterion_4(&r)),
            (5, "structure theorem", criterion_5(&r)),
            (6, "Stefan condition", criterion_6(&r)),
            (7, "stiff-limit convergence", criterion_7(&r)),
            (8, "barrier supersolution", c8.join().unwrap()),
            (9, "reflection corollaries", c9.join().unwrap()),
            (10, "geometry instruments", c10.join().unwrap()),
        ];
        v.push((11, "determinism", sweep.join().unwrap()));
        (v, r)
    });
    drop(r);
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (k, name, v) in &verdicts {
        failed += usize::from(!v.passed);
        writeln!(out, "criterion {k:2} {:4} {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail).unwrap();
    }
    writeln!(out, "{} of {} criteria passed in {:.1}s", verdicts.len() - failed, verdicts.len(), started.elapsed().as_secs_f64()).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
