//! Flat `key = value` run configuration.
//!
//! ```text
//! # reference scenario, Hele-Shaw limit and a short ladder
//! grid.dim = 1
//! grid.cells = 512
//! law.g0 = 1
//! init.kind = ball
//! init.radius = 0.3
//! solver.gamma_ladder = 5, 10, 20, 40, 80
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known, may appear once, and must be used by the chosen `law.shape` and
//! `init.kind`. Parsing never stops at the first problem: all of them are
//! collected and reported together.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use stifflimit::grid::Grid;
use stifflimit::growth::GrowthLaw;
use stifflimit::heleshaw::HsRunConfig;
use stifflimit::scenario::{InitialData, Scenario, SolverSettings};
use stifflimit::snapshot::read_snapshot_file;

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "grid.dim",
    "grid.cells",
    "grid.half_width",
    "law.shape",
    "law.g0",
    "law.p_max",
    "law.table",
    "init.kind",
    "init.center",
    "init.radius",
    "init.amplitude",
    "init.inner_radius",
    "init.outer_radius",
    "init.outer_amplitude",
    "init.center1",
    "init.center2",
    "init.radius1",
    "init.radius2",
    "init.amplitude1",
    "init.amplitude2",
    "init.path",
    "solver.gamma",
    "solver.gamma_ladder",
    "solver.dt",
    "solver.t_final",
    "solver.snapshot_every",
    "solver.cfl_safety",
    "solver.psor_tol",
    "solver.psor_omega",
    "solver.psor_max_iters",
    "solver.picard_iters",
    "solver.p_threshold",
    "verify.input",
    "verify.r_support",
    "geometry.input",
    "geometry.snapshot",
    "geometry.samples",
];

/// Where a value came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => write!(f, "--override"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: Option<String>,
    pub origin: Option<Origin>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.origin, &self.key) {
            (Some(o), Some(k)) => write!(f, "{o}: {k}: {}", self.message),
            (None, Some(k)) => write!(f, "{k}: {}", self.message),
            (Some(o), None) => write!(f, "{o}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

/// All problems found in one document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Raw entries, before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: BTreeMap<String, (String, Origin)>,
}

impl Document {
    /// Splits `text` into entries; syntax errors, unknown and duplicate keys
    /// are appended to `issues`.
    pub fn parse(text: &str, issues: &mut Vec<ConfigIssue>) -> Self {
        let mut doc = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let origin = Origin::Line(k + 1);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(ConfigIssue {
                    key: None,
                    origin: Some(origin),
                    message: format!("expected `key = value`, found {line:?}"),
                });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                issues.push(unknown(key, origin));
                continue;
            }
            if let Some((_, first)) = doc.entries.get(key) {
                issues.push(ConfigIssue {
                    key: Some(key.into()),
                    origin: Some(origin),
                    message: format!("duplicate key, first set on {first}"),
                });
                continue;
            }
            doc.entries.insert(key.into(), (value.into(), origin));
        }
        doc
    }

    /// Applies a `KEY=VALUE` override, replacing any value from the file.
    pub fn apply_override(&mut self, spec: &str, issues: &mut Vec<ConfigIssue>) {
        let Some((key, value)) = spec.split_once('=') else {
            issues.push(ConfigIssue {
                key: None,
                origin: Some(Origin::Override),
                message: format!("expected KEY=VALUE, found {spec:?}"),
            });
            return;
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            issues.push(unknown(key, Origin::Override));
            return;
        }
        self.entries.insert(key.into(), (value.trim().into(), Origin::Override));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn unknown(key: &str, origin: Origin) -> ConfigIssue {
    let hint = KEYS
        .iter()
        .map(|k| (strsim::levenshtein(k, key), k))
        .filter(|(d, _)| *d <= 3)
        .min()
        .map(|(_, k)| format!(" (did you mean `{k}`?)"))
        .unwrap_or_default();
    ConfigIssue {
        key: Some(key.into()),
        origin: Some(origin),
        message: format!("unknown key{hint}"),
    }
}

/// `r_support` for the reflection check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// From the initial-data description, when it is centred.
    Auto,
    Off,
    Radius(f64),
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub verify_input: Option<PathBuf>,
    pub r_support: Support,
    pub geometry_input: Option<PathBuf>,
    /// Snapshot index inside `geometry_input`; `None` for the last one.
    pub geometry_snapshot: Option<usize>,
    pub geometry_samples: usize,
    /// Every key with the value in force, defaults included.
    pub resolved: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn reflection_radius(&self) -> Option<f64> {
        match self.r_support {
            Support::Off => None,
            Support::Radius(r) => Some(r),
            Support::Auto => self.scenario.init.support_radius(),
        }
    }
}

/// Typed reader over a [`Document`] that records every problem it meets and
/// every value it hands out.
struct Reader<'a> {
    doc: &'a Document,
    base: &'a Path,
    issues: Vec<ConfigIssue>,
    used: Vec<String>,
    resolved: BTreeMap<String, String>,
}

impl<'a> Reader<'a> {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        let origin = self.doc.entries.get(key).map(|(_, o)| o.clone());
        self.issues.push(ConfigIssue {
            key: Some(key.into()),
            origin,
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &str, default: &str) -> String {
        self.used.push(key.into());
        let v = self.doc.get(key).unwrap_or(default).to_string();
        self.resolved.insert(key.into(), v.clone());
        v
    }

    fn real(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, rule: &str) -> f64 {
        let text = self.raw(key, &default.to_string());
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && ok(v) => v,
            Ok(v) if v.is_finite() => {
                self.issue(key, format!("{rule}, got {v}"));
                default
            }
            _ => {
                self.issue(key, format!("expected a finite number, got {text:?}"));
                default
            }
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        let text = self.raw(key, &default.to_string());
        match text.parse::<usize>() {
            Ok(v) if v >= min => v,
            Ok(v) => {
                self.issue(key, format!("must be at least {min}, got {v}"));
                default
            }
            Err(_) => {
                self.issue(key, format!("expected a whole number, got {text:?}"));
                default
            }
        }
    }

    fn reals(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        let d = default.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let text = self.raw(key, &d);
        let parsed: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => v,
            _ => {
                self.issue(key, format!("expected a comma-separated list of numbers, got {text:?}"));
                default.to_vec()
            }
        }
    }

    fn point(&mut self, key: &str, default: [f64; 2], dim: usize) -> [f64; 2] {
        let v = self.reals(key, &default[..dim]);
        match v[..] {
            [x] => [x, 0.0],
            [x, y] if dim == 2 => [x, y],
            [x, 0.0] => [x, 0.0],
            _ => {
                self.issue(key, format!("expected {dim} coordinate(s), got {}", v.len()));
                default
            }
        }
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        let text = self.raw(key, "");
        if text.is_empty() {
            self.resolved.remove(key);
            return None;
        }
        let p = PathBuf::from(&text);
        Some(if p.is_absolute() { p } else { self.base.join(p) })
    }

    fn choice<'c>(&mut self, key: &str, default: &'c str, options: &[&'c str]) -> &'c str {
        let text = self.raw(key, default);
        match options.iter().find(|o| **o == text) {
            Some(o) => o,
            None => {
                self.issue(key, format!("expected one of {}, got {text:?}", options.join(", ")));
                default
            }
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

const AMPLITUDE_RULE: &str = "initial density must satisfy 0 <= n0 <= 1";

/// Parses a document plus overrides. Relative paths resolve against
/// `base` (the directory of the config file).
pub fn parse_config(text: &str, overrides: &[String], base: &Path) -> Result<RunConfig, ConfigErrors> {
    let mut issues = Vec::new();
    let mut doc = Document::parse(text, &mut issues);
    for o in overrides {
        doc.apply_override(o, &mut issues);
    }
    let mut r = Reader {
        doc: &doc,
        base,
        issues,
        used: Vec::new(),
        resolved: BTreeMap::new(),
    };
    let reference = Scenario::reference();
    let defaults = SolverSettings::default();

    let dim = r.count("grid.dim", reference.grid.dim(), 1);
    if dim > 2 {
        r.issue("grid.dim", format!("must be 1 or 2, got {dim}"));
    }
    let dim = dim.clamp(1, 2);
    let cells = r.count("grid.cells", reference.grid.cells_per_axis(), stifflimit::grid::MIN_CELLS);
    let half_width = r.real("grid.half_width", reference.grid.half_width(), positive, "must be positive");
    let mut grid = Grid::new(dim, cells, half_width).unwrap_or(reference.grid);

    let law = match r.choice("law.shape", "linear", &["linear", "tabulated"]) {
        "tabulated" => match r.path("law.table") {
            Some(p) => GrowthLaw::from_csv_path(&p).unwrap_or_else(|e| {
                r.issue("law.table", format!("{}: {e}", p.display()));
                reference.law.clone()
            }),
            None => {
                r.issue("law.table", "required when law.shape = tabulated");
                reference.law.clone()
            }
        },
        _ => {
            let g0 = r.real("law.g0", reference.law.g0(), positive, "growth rate must be positive");
            let pm = r.real("law.p_max", reference.law.p_max(), positive, "homeostatic pressure must be positive");
            GrowthLaw::linear(g0, pm).unwrap_or(reference.law.clone())
        }
    };

    let init = match r.choice("init.kind", "ball", &["ball", "annulus", "two_balls", "plateau", "file"]) {
        "annulus" => InitialData::Annulus {
            center: r.point("init.center", [0.0, 0.0], dim),
            inner_radius: r.real("init.inner_radius", 0.4, |v| v >= 0.0, "must be nonnegative"),
            outer_radius: r.real("init.outer_radius", 0.8, positive, "must be positive"),
            amplitude: r.real("init.amplitude", 1.0, unit, AMPLITUDE_RULE),
        },
        "two_balls" => InitialData::TwoBalls {
            centers: [r.point("init.center1", [-0.35, 0.0], dim), r.point("init.center2", [0.35, 0.0], dim)],
            radii: [
                r.real("init.radius1", 0.25, positive, "must be positive"),
                r.real("init.radius2", 0.25, positive, "must be positive"),
            ],
            amplitudes: [
                r.real("init.amplitude1", 1.0, unit, AMPLITUDE_RULE),
                r.real("init.amplitude2", 1.0, unit, AMPLITUDE_RULE),
            ],
        },
        "plateau" => InitialData::Plateau {
            center: r.point("init.center", [0.0, 0.0], dim),
            radius: r.real("init.radius", 0.3, positive, "must be positive"),
            amplitude: r.real("init.amplitude", 1.0, unit, AMPLITUDE_RULE),
            outer_radius: r.real("init.outer_radius", 0.6, positive, "must be positive"),
            outer_amplitude: r.real("init.outer_amplitude", 0.5, unit, AMPLITUDE_RULE),
        },
        "file" => match r.path("init.path") {
            Some(p) => match read_snapshot_file(&p) {
                Ok(s) => {
                    let g = *s.n.grid();
                    let explicit = ["grid.dim", "grid.cells", "grid.half_width"].iter().any(|k| doc.get(k).is_some());
                    if explicit && g != grid {
                        r.issue("init.path", format!("snapshot grid {g:?} differs from the configured grid {grid:?}"));
                    }
                    grid = g;
                    for (k, v) in [
                        ("grid.dim", g.dim().to_string()),
                        ("grid.cells", g.cells_per_axis().to_string()),
                        ("grid.half_width", g.half_width().to_string()),
                    ] {
                        r.resolved.insert(k.into(), v);
                    }
                    if s.n.values().iter().any(|v| !unit(*v)) {
                        r.issue("init.path", AMPLITUDE_RULE);
                    }
                    InitialData::Field(s.n)
                }
                Err(e) => {
                    r.issue("init.path", format!("{}: {e}", p.display()));
                    reference.init.clone()
                }
            },
            None => {
                r.issue("init.path", "required when init.kind = file");
                reference.init.clone()
            }
        },
        _ => InitialData::Ball {
            center: r.point("init.center", [0.0, 0.0], dim),
            radius: r.real("init.radius", 0.3, positive, "must be positive"),
            amplitude: r.real("init.amplitude", 1.0, unit, AMPLITUDE_RULE),
        },
    };
    if r.issues.iter().all(|i| !i.key.as_deref().is_some_and(|k| k.starts_with("init."))) {
        if let Err(e) = init.validate() {
            r.issue("init.kind", e.to_string());
        }
    }

    let gamma_rule = "gamma must exceed 1";
    let gamma = r.real("solver.gamma", defaults.gamma, |v| v > 1.0, gamma_rule);
    let ladder = r.reals("solver.gamma_ladder", &defaults.gamma_ladder);
    if let Some(bad) = ladder.iter().find(|g| **g <= 1.0) {
        r.issue("solver.gamma_ladder", format!("{gamma_rule}, got {bad}"));
    }
    let mut sorted = ladder.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() != ladder.len() {
        r.issue("solver.gamma_ladder", "values must be distinct");
    }
    let omega_text = r.raw("solver.psor_omega", "auto");
    let psor_omega = if omega_text == "auto" {
        None
    } else {
        match omega_text.parse::<f64>() {
            Ok(w) if w > 0.0 && w < 2.0 => Some(w),
            _ => {
                r.issue("solver.psor_omega", format!("expected `auto` or a number in (0, 2), got {omega_text:?}"));
                None
            }
        }
    };
    let solver = SolverSettings {
        gamma,
        gamma_ladder: ladder,
        dt: r.real("solver.dt", defaults.dt, positive, "must be positive"),
        t_final: r.real("solver.t_final", defaults.t_final, |v| v >= 0.0, "must be nonnegative"),
        snapshot_every: r.real("solver.snapshot_every", defaults.snapshot_every, positive, "must be positive"),
        cfl_safety: r.real("solver.cfl_safety", defaults.cfl_safety, |v| v > 0.0 && v <= 1.0, "must lie in (0, 1]"),
        psor_tol: r.real("solver.psor_tol", defaults.psor_tol, positive, "must be positive"),
        psor_omega,
        psor_max_iters: r.count("solver.psor_max_iters", defaults.psor_max_iters, 1),
        picard_iters: r.count("solver.picard_iters", defaults.picard_iters, 1),
        p_threshold: r.real("solver.p_threshold", defaults.p_threshold, |v| v >= 0.0, "must be nonnegative"),
    };
    let scenario = Scenario { grid, law, init, solver };
    let timing_ok = ["solver.dt", "solver.t_final", "solver.snapshot_every"]
        .iter()
        .all(|k| !r.issues.iter().any(|i| i.key.as_deref() == Some(*k)));
    if timing_ok {
        let cfg: HsRunConfig = scenario.hs_config();
        if let Err(e) = cfg.schedule() {
            r.issue("solver.t_final", e.to_string());
        }
    }

    let verify_input = r.path("verify.input");
    let support_text = r.raw("verify.r_support", "auto");
    let r_support = match support_text.as_str() {
        "auto" => Support::Auto,
        "none" => Support::Off,
        t => match t.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Support::Radius(v),
            _ => {
                r.issue("verify.r_support", format!("expected `auto`, `none` or a positive radius, got {t:?}"));
                Support::Auto
            }
        },
    };
    let geometry_input = r.path("geometry.input");
    let snap_text = r.raw("geometry.snapshot", "last");
    let geometry_snapshot = if snap_text == "last" {
        None
    } else {
        match snap_text.parse::<usize>() {
            Ok(k) => Some(k),
            Err(_) => {
                r.issue("geometry.snapshot", format!("expected `last` or an index, got {snap_text:?}"));
                None
            }
        }
    };
    let geometry_samples = r.count("geometry.samples", 8, 1);

    // keys set but not read belong to another law shape or initial-data kind
    let stray: Vec<String> = doc.keys().filter(|k| !r.used.iter().any(|u| u == k)).map(String::from).collect();
    for k in stray {
        let owner = if k.starts_with("law.") { "law.shape" } else { "init.kind" };
        let value = r.resolved.get(owner).cloned().unwrap_or_default();
        r.issue(&k, format!("not used when {owner} = {value}"));
    }

    if r.issues.is_empty() {
        Ok(RunConfig {
            scenario,
            verify_input,
            r_support,
            geometry_input,
            geometry_snapshot,
            geometry_samples,
            resolved: r.resolved,
        })
    } else {
        Err(ConfigErrors(r.issues))
    }
}

/// Reads and parses a config file; `None` means defaults plus overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigErrors> {
    let (text, base) = match path {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => (t, p.parent().map(Path::to_path_buf).unwrap_or_default()),
            Err(e) => {
                return Err(ConfigErrors(vec![ConfigIssue {
                    key: None,
                    origin: None,
                    message: format!("cannot read {}: {e}", p.display()),
                }]))
            }
        },
        None => (String::new(), PathBuf::from(".")),
    };
    parse_config(&text, overrides, &base)
}

/// The resolved configuration as a document that parses back to the same
/// values.
pub fn echo(cfg: &RunConfig) -> String {
    cfg.resolved.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
