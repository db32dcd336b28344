//! The run modes behind each subcommand.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use stifflimit::diagnostics::{
    check_flatness_criteria, default_suite, CheckResult, DiagnosticsReport, SuiteOptions,
};
use stifflimit::geometry::{diameter, hausdorff_distance, minimal_diameter, perimeter_proxy, positivity_set};
use stifflimit::growth::GrowthLaw;
use stifflimit::snapshot::{read_series, write_series, SnapshotSeries};

use crate::config::{parse_config, ConfigErrors, RunConfig};
use crate::plotdata::{export_plotdata, PlotKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pme,
    Hs,
    Sweep,
    Verify,
    Geometry,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Pme => "pme",
            Mode::Hs => "hs",
            Mode::Sweep => "sweep",
            Mode::Verify => "verify",
            Mode::Geometry => "geometry",
        }
    }
}

#[derive(Debug)]
pub enum AppError {
    Config(ConfigErrors),
    /// Input that exists but cannot be used, reported like a config error.
    Input(String),
    Solver(String),
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Input(_) => EXIT_CONFIG,
            AppError::Solver(_) | AppError::Io(_) => EXIT_SOLVER,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(e) => write!(f, "{e}"),
            AppError::Input(m) => write!(f, "input error: {m}"),
            AppError::Solver(m) => write!(f, "solver error: {m}"),
            AppError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigErrors> for AppError {
    fn from(e: ConfigErrors) -> Self {
        AppError::Config(e)
    }
}

fn io(e: impl fmt::Display) -> AppError {
    AppError::Io(e.to_string())
}

/// What a finished run hands back to the caller.
#[derive(Debug)]
pub struct Outcome {
    pub report: DiagnosticsReport,
    pub outputs: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            EXIT_OK
        } else {
            EXIT_CHECK
        }
    }
}

fn suite_options(cfg: &RunConfig) -> SuiteOptions {
    SuiteOptions {
        p_threshold: cfg.scenario.solver.p_threshold,
        solver_tol: cfg.scenario.solver.psor_tol,
        r_support: cfg.reflection_radius(),
        flatness_samples: cfg.geometry_samples,
        ..SuiteOptions::default()
    }
}

fn gamma_dir(gamma: f64) -> String {
    format!("pme_gamma_{gamma}")
}

struct Writer<'a> {
    out: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn series(&mut self, name: &str, s: &SnapshotSeries, thr: f64) -> Result<(), AppError> {
        let paths = write_series(&s.snapshots, &self.out.join(name)).map_err(io)?;
        self.files.extend(paths);
        self.plots(name, s, thr)
    }

    fn plots(&mut self, name: &str, s: &SnapshotSeries, thr: f64) -> Result<(), AppError> {
        let dir = self.out.join("plots").join(name);
        let paths = export_plotdata(s, &dir, &PlotKind::ALL, thr).map_err(io)?;
        self.files.extend(paths);
        Ok(())
    }
}

/// Runs one mode. `out` is created if needed; `report.json` and
/// `manifest.json` are always written once the configuration is valid.
pub fn run(mode: Mode, cfg: &RunConfig, out: &Path) -> Result<Outcome, AppError> {
    let started = Instant::now();
    fs::create_dir_all(out).map_err(io)?;
    let mut w = Writer {
        out,
        files: Vec::new(),
    };
    let thr = cfg.scenario.solver.p_threshold;
    let mut warnings = Vec::new();
    let checks = match mode {
        Mode::Pme => {
            let gamma = cfg.scenario.solver.gamma;
            let (s, warn) = cfg.scenario.run_pme(gamma).map_err(|e| AppError::Solver(e.to_string()))?;
            warnings.extend(warn);
            w.series(&gamma_dir(gamma), &s, thr)?;
            default_suite(None, std::slice::from_ref(&s), &suite_options(cfg))
        }
        Mode::Hs => {
            let (s, warn) = cfg.scenario.run_hs().map_err(|e| AppError::Solver(e.to_string()))?;
            warnings.extend(warn);
            w.series("hs", &s, thr)?;
            default_suite(Some(&s), &[], &suite_options(cfg))
        }
        Mode::Sweep => {
            let (hs, warn) = cfg.scenario.run_hs().map_err(|e| AppError::Solver(e.to_string()))?;
            warnings.extend(warn);
            w.series("hs", &hs, thr)?;
            let mut ladder = Vec::new();
            for (s, warn) in cfg.scenario.run_ladder().map_err(|e| AppError::Solver(e.to_string()))? {
                warnings.extend(warn);
                w.series(&gamma_dir(s.gamma().unwrap_or(f64::NAN)), &s, thr)?;
                ladder.push(s);
            }
            default_suite(Some(&hs), &ladder, &suite_options(cfg))
        }
        Mode::Verify => {
            let input = required(cfg.verify_input.as_deref(), "verify.input")?;
            let loaded = load_run(input, &cfg.scenario.law)?;
            for (name, s) in &loaded.runs {
                w.plots(name, s, thr)?;
            }
            let hs = loaded.runs.iter().find(|(_, s)| s.gamma().is_none()).map(|(_, s)| s);
            let ladder: Vec<SnapshotSeries> = loaded
                .runs
                .iter()
                .filter(|(_, s)| s.gamma().is_some())
                .map(|(_, s)| s.clone())
                .collect();
            default_suite(hs, &ladder, &suite_options(cfg))
        }
        Mode::Geometry => {
            let input = required(cfg.geometry_input.as_deref(), "geometry.input")?;
            let loaded = load_run(input, &cfg.scenario.law)?;
            let (name, s) = loaded
                .runs
                .iter()
                .find(|(_, s)| s.gamma().is_none())
                .or(loaded.runs.first())
                .expect("load_run returns at least one run");
            w.plots(name, s, thr)?;
            geometry_checks(s, cfg)?
        }
    };
    for m in &warnings {
        log::warn!("{m}");
    }
    let report = DiagnosticsReport {
        checks,
        run_manifest: json!({
            "program": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "mode": mode.name(),
            "config": cfg.resolved,
        }),
    };
    let report_path = out.join("report.json");
    fs::write(&report_path, report.to_json()).map_err(io)?;
    w.files.push(report_path);
    let mut outputs: Vec<String> = w
        .files
        .iter()
        .map(|p| p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect();
    outputs.sort();
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "mode": mode.name(),
        "config": cfg.resolved,
        "outputs": outputs,
        "warnings": warnings,
        "passed": report.passed(),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(io)? + "\n";
    fs::write(out.join("manifest.json"), text).map_err(io)?;
    w.files.push(out.join("manifest.json"));
    Ok(Outcome {
        report,
        outputs: w.files,
    })
}

fn required<'a>(p: Option<&'a Path>, key: &str) -> Result<&'a Path, AppError> {
    p.ok_or_else(|| AppError::Input(format!("no input directory: pass one or set {key}")))
}

/// Series found under an input directory, by subdirectory name.
pub struct LoadedRun {
    pub runs: Vec<(String, SnapshotSeries)>,
}

/// Reads either a directory of snapshot files or a run directory holding
/// `hs/` and `pme_gamma_*/`. When the directory carries a `manifest.json`
/// its growth law replaces `law`.
pub fn load_run(dir: &Path, law: &GrowthLaw) -> Result<LoadedRun, AppError> {
    if !dir.is_dir() {
        return Err(AppError::Input(format!("{} is not a directory", dir.display())));
    }
    let law = manifest_law(dir)?.unwrap_or_else(|| law.clone());
    let series_at = |d: &Path| -> Result<SnapshotSeries, AppError> {
        let snaps = read_series(d).map_err(|e| AppError::Input(e.to_string()))?;
        SnapshotSeries::from_snapshots(law.clone(), snaps).map_err(|e| AppError::Input(format!("{}: {e}", d.display())))
    };
    if has_snapshots(dir) {
        let name = dir.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned());
        return Ok(LoadedRun {
            runs: vec![(name, series_at(dir)?)],
        });
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && has_snapshots(p))
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(AppError::Input(format!("no snapshot files under {}", dir.display())));
    }
    let mut runs = Vec::new();
    for d in subdirs {
        let name = d.file_name().expect("directory entries have names").to_string_lossy().into_owned();
        runs.push((name, series_at(&d)?));
    }
    // ladder members in increasing γ
    runs.sort_by(|a, b| a.1.gamma().unwrap_or(0.0).total_cmp(&b.1.gamma().unwrap_or(0.0)));
    Ok(LoadedRun { runs })
}

fn has_snapshots(dir: &Path) -> bool {
    fs::read_dir(dir).is_ok_and(|mut it| {
        it.any(|e| {
            e.ok()
                .and_then(|e| e.file_name().into_string().ok())
                .is_some_and(|n| n.starts_with("snap_") && n.ends_with(".csv"))
        })
    })
}

fn manifest_law(dir: &Path) -> Result<Option<GrowthLaw>, AppError> {
    let path = dir.join("manifest.json");
    let Ok(text) = fs::read_to_string(&path) else {
        return Ok(None);
    };
    let bad = |m: String| AppError::Input(format!("{}: {m}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let Some(config) = value.get("config").and_then(|c| c.as_object()) else {
        return Err(bad("missing config object".into()));
    };
    let doc: String = config
        .iter()
        .filter(|(k, _)| k.starts_with("law."))
        .map(|(k, v)| format!("{k} = {}\n", v.as_str().unwrap_or_default()))
        .collect();
    let cfg = parse_config(&doc, &[], dir).map_err(|e| bad(e.to_string()))?;
    Ok(Some(cfg.scenario.law))
}

/// Shape measurements of `Ω = {p > thr}` at the chosen snapshot, all
/// report-only, followed by the flatness and density sampling.
fn geometry_checks(s: &SnapshotSeries, cfg: &RunConfig) -> Result<Vec<CheckResult>, AppError> {
    let thr = cfg.scenario.solver.p_threshold;
    let k = cfg.geometry_snapshot.unwrap_or(s.snapshots.len() - 1);
    let Some(snap) = s.snapshots.get(k) else {
        return Err(AppError::Input(format!(
            "geometry.snapshot {k} out of range, the run has {} snapshots",
            s.snapshots.len()
        )));
    };
    let omega = positivity_set(&snap.p, thr);
    let ctx = format!("snapshot {k} at t = {}", snap.time);
    let mut out = vec![CheckResult::report("omega_cells", omega.count() as f64, ctx.clone())];
    if !omega.is_empty() {
        let d = diameter(&omega).map_err(|e| AppError::Solver(e.to_string()))?;
        let md = minimal_diameter(&omega).map_err(|e| AppError::Solver(e.to_string()))?;
        out.push(CheckResult::report("diameter", d, ctx.clone()));
        out.push(CheckResult::report("minimal_diameter", md, ctx.clone()));
    }
    out.push(CheckResult::report("perimeter_proxy", perimeter_proxy(&omega), ctx.clone()));
    if k > 0 {
        let prev = positivity_set(&s.snapshots[k - 1].p, thr);
        let d = hausdorff_distance(&prev, &omega).map_err(|e| AppError::Solver(e.to_string()))?;
        out.push(CheckResult::report("hausdorff_to_previous", d, ctx.clone()));
    }
    if let Ok(r) = check_flatness_criteria(s, snap, cfg.geometry_samples, thr, false) {
        out.push(r);
    }
    out.push(CheckResult::report("snapshot_index", k as f64, ctx).with_value("snapshots", s.snapshots.len() as f64));
    Ok(out)
}
