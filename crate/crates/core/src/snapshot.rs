//! Solver-independent snapshots and their CSV form.
//!
//! A snapshot file is a CSV table preceded by `#` header lines:
//!
//! ```text
//! # stifflimit snapshot
//! # version = 1
//! # time = 5e-1
//! # gamma = inf
//! # grid = 1 512 1.5e0
//! x,n,p,w,f
//! -1.4970703125e0,0e0,0e0,0e0,6.065306597126334e-1
//! ```
//!
//! The grid line holds dimension, cells per axis and half width. Floats are
//! written in the shortest form that parses back to the same value, so
//! write, read, write reproduces the file byte for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{Grid, GridError, ScalarField};
use crate::growth::GrowthLaw;
use crate::heleshaw::HsState;
use crate::pme::PmeState;
use crate::RunOutput;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# stifflimit snapshot";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no snapshot files in {0}")]
    EmptyDirectory(PathBuf),
}

fn fmt_err<T>(msg: impl Into<String>) -> Result<T, SnapshotError> {
    Err(SnapshotError::Format(msg.into()))
}

/// One instant of either model. `gamma` is `None` for the stiff limit,
/// which also carries `w` and the obstacle forcing `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub gamma: Option<f64>,
    pub n: ScalarField,
    pub p: ScalarField,
    pub w: Option<ScalarField>,
    pub forcing: Option<ScalarField>,
}

impl Snapshot {
    pub fn grid(&self) -> &Grid {
        self.n.grid()
    }
}

impl From<&HsState> for Snapshot {
    fn from(s: &HsState) -> Self {
        Self {
            time: s.t,
            gamma: None,
            n: s.n.clone(),
            p: s.p.clone(),
            w: Some(s.w.clone()),
            forcing: Some(s.forcing.clone()),
        }
    }
}

impl From<&PmeState> for Snapshot {
    fn from(s: &PmeState) -> Self {
        Self {
            time: s.t,
            gamma: Some(s.gamma),
            n: s.n.clone(),
            p: s.pressure(),
            w: None,
            forcing: None,
        }
    }
}

/// A run as the diagnostics see it: the law, the initial density and the
/// snapshots in time order.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    pub law: GrowthLaw,
    pub n0: ScalarField,
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotSeries {
    pub fn from_hs(run: &RunOutput<HsState>) -> Option<Self> {
        let first = run.snapshots.first()?;
        Some(Self {
            law: first.law.clone(),
            n0: first.n0.clone(),
            snapshots: run.snapshots.iter().map(Snapshot::from).collect(),
        })
    }

    /// The first snapshot's density serves as `n⁰` (already scaled).
    pub fn from_pme(run: &RunOutput<PmeState>) -> Option<Self> {
        let first = run.snapshots.first()?;
        Some(Self {
            law: first.law.clone(),
            n0: first.n.clone(),
            snapshots: run.snapshots.iter().map(Snapshot::from).collect(),
        })
    }

    /// Rebuilds a series from files; `n⁰` is the density of the earliest
    /// snapshot, which must sit at `t = 0`.
    pub fn from_snapshots(law: GrowthLaw, snapshots: Vec<Snapshot>) -> Result<Self, SnapshotError> {
        let Some(first) = snapshots.first() else {
            return fmt_err("empty snapshot list");
        };
        if first.time != 0.0 {
            return fmt_err(format!("earliest snapshot is at t = {}, not 0", first.time));
        }
        if snapshots.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return fmt_err("snapshot times must increase strictly");
        }
        Ok(Self {
            law,
            n0: first.n.clone(),
            snapshots,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.n0.grid()
    }

    pub fn gamma(&self) -> Option<f64> {
        self.snapshots.first().and_then(|s| s.gamma)
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Shortest round-tripping representation.
pub fn format_float(x: f64) -> String {
    format!("{x:e}")
}

fn parse_float(s: &str) -> Result<f64, SnapshotError> {
    s.trim()
        .parse::<f64>()
        .or_else(|_| fmt_err(format!("not a number: {s:?}")))
}

pub fn write_snapshot(s: &Snapshot, out: impl Write) -> Result<(), SnapshotError> {
    let mut out = BufWriter::new(out);
    let g = s.grid();
    let io = |e| SnapshotError::Io {
        path: PathBuf::from("<writer>"),
        source: e,
    };
    let gamma = s.gamma.map_or_else(|| "inf".to_string(), format_float);
    writeln!(
        out,
        "{MAGIC}\n# version = {FORMAT_VERSION}\n# time = {}\n# gamma = {gamma}\n# grid = {} {} {}",
        format_float(s.time),
        g.dim(),
        g.cells_per_axis(),
        format_float(g.half_width())
    )
    .map_err(io)?;
    let mut header: Vec<&str> = if g.dim() == 1 { vec!["x"] } else { vec!["x", "y"] };
    header.extend(["n", "p"]);
    if s.w.is_some() {
        header.push("w");
    }
    if s.forcing.is_some() {
        header.push("f");
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..g.len() {
        row.clear();
        let c = g.center(i);
        row.extend(c[..g.dim()].iter().map(|&v| format_float(v)));
        row.push(format_float(s.n[i]));
        row.push(format_float(s.p[i]));
        if let Some(f) = &s.w {
            row.push(format_float(f[i]));
        }
        if let Some(f) = &s.forcing {
            row.push(format_float(f[i]));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

fn header_value<'a>(line: &'a str, key: &str) -> Result<&'a str, SnapshotError> {
    line.strip_prefix("# ")
        .and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.trim_start().strip_prefix('='))
        .map(str::trim)
        .ok_or_else(|| SnapshotError::Format(format!("expected `# {key} = ...`, found {line:?}")))
}

pub fn read_snapshot(input: impl Read) -> Result<Snapshot, SnapshotError> {
    let mut r = BufReader::new(input);
    let mut lines = Vec::with_capacity(5);
    for _ in 0..5 {
        let mut l = String::new();
        r.read_line(&mut l).map_err(|e| SnapshotError::Io {
            path: PathBuf::from("<reader>"),
            source: e,
        })?;
        lines.push(l.trim_end_matches(['\n', '\r']).to_string());
    }
    if lines[0] != MAGIC {
        return fmt_err(format!("missing `{MAGIC}` line"));
    }
    let version: u32 = header_value(&lines[1], "version")?
        .parse()
        .or_else(|_| fmt_err("bad version"))?;
    if version != FORMAT_VERSION {
        return Err(SnapshotError::Version(version));
    }
    let time = parse_float(header_value(&lines[2], "time")?)?;
    let gamma = match header_value(&lines[3], "gamma")? {
        "inf" => None,
        v => Some(parse_float(v)?),
    };
    let parts: Vec<&str> = header_value(&lines[4], "grid")?.split_whitespace().collect();
    let [dim, cells, hw] = parts[..] else {
        return fmt_err("grid line needs `dim cells half_width`");
    };
    let dim: usize = dim.parse().or_else(|_| fmt_err("bad grid dimension"))?;
    let cells: usize = cells.parse().or_else(|_| fmt_err("bad cell count"))?;
    let grid = Grid::new(dim, cells, parse_float(hw)?)?;

    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let coords: &[&str] = if dim == 1 { &["x"] } else { &["x", "y"] };
    if header.len() < dim + 2 || header[..dim] != *coords || header[dim] != "n" || header[dim + 1] != "p" {
        return fmt_err(format!("unexpected columns {header:?}"));
    }
    let extra = &header[dim + 2..];
    let (has_w, has_f) = match extra.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        [] => (false, false),
        ["w"] => (true, false),
        ["w", "f"] => (true, true),
        _ => return fmt_err(format!("unexpected columns {header:?}")),
    };
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); header.len() - dim];
    let mut count = 0;
    for rec in rd.records() {
        let rec = rec?;
        if count >= grid.len() {
            return fmt_err("more rows than grid cells");
        }
        if rec.len() != header.len() {
            return fmt_err(format!("row {count} has {} fields", rec.len()));
        }
        let c = grid.center(count);
        for (a, field) in rec.iter().take(dim).enumerate() {
            if parse_float(field)? != c[a] {
                return fmt_err(format!("row {count}: coordinates do not match the grid"));
            }
        }
        for (col, field) in cols.iter_mut().zip(rec.iter().skip(dim)) {
            col.push(parse_float(field)?);
        }
        count += 1;
    }
    if count != grid.len() {
        return fmt_err(format!("{count} rows for {} cells", grid.len()));
    }
    let mut cols = cols.into_iter();
    let mut field = || ScalarField::from_vec(grid, cols.next().unwrap_or_default());
    let n = field()?;
    let p = field()?;
    let w = if has_w { Some(field()?) } else { None };
    let forcing = if has_f { Some(field()?) } else { None };
    Ok(Snapshot {
        time,
        gamma,
        n,
        p,
        w,
        forcing,
    })
}

pub fn write_snapshot_file(s: &Snapshot, path: &Path) -> Result<(), SnapshotError> {
    let f = File::create(path).map_err(|e| SnapshotError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_snapshot(s, f)
}

pub fn read_snapshot_file(path: &Path) -> Result<Snapshot, SnapshotError> {
    let f = File::open(path).map_err(|e| SnapshotError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_snapshot(f)
}

/// File name of the `k`-th snapshot of a run.
pub fn snapshot_file_name(k: usize) -> String {
    format!("snap_{k:05}.csv")
}

/// Writes every snapshot into `dir` (created if needed) and returns the
/// paths in order.
pub fn write_series(snapshots: &[Snapshot], dir: &Path) -> Result<Vec<PathBuf>, SnapshotError> {
    std::fs::create_dir_all(dir).map_err(|e| SnapshotError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    snapshots
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let path = dir.join(snapshot_file_name(k));
            write_snapshot_file(s, &path).map(|_| path)
        })
        .collect()
}

/// Reads every `snap_*.csv` in `dir`, sorted by name.
pub fn read_series(dir: &Path) -> Result<Vec<Snapshot>, SnapshotError> {
    let io = |e| SnapshotError::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snap_") && n.ends_with(".csv"))
        })
        .collect();
    if paths.is_empty() {
        return Err(SnapshotError::EmptyDirectory(dir.to_path_buf()));
    }
    paths.sort();
    paths.iter().map(|p| read_snapshot_file(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dim: usize, gamma: Option<f64>) -> Snapshot {
        let g = Grid::new(dim, 12, 0.7).unwrap();
        let f = |k: f64| ScalarField::from_fn(g, move |x| (k * x[0]).sin() * 1e-3 + x[1] / 3.0);
        Snapshot {
            time: 0.1 + 0.2,
            gamma,
            n: f(1.0),
            p: f(2.0),
            w: gamma.is_none().then(|| f(3.0)),
            forcing: gamma.is_none().then(|| f(4.0)),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for (dim, gamma) in [(1, None), (2, Some(40.0)), (2, None), (1, Some(1.5))] {
            let s = sample(dim, gamma);
            let mut a = Vec::new();
            write_snapshot(&s, &mut a).unwrap();
            let back = read_snapshot(&a[..]).unwrap();
            assert_eq!(back, s);
            let mut b = Vec::new();
            write_snapshot(&back, &mut b).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn header_layout() {
        let mut a = Vec::new();
        write_snapshot(&sample(1, None), &mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        let head: Vec<&str> = text.lines().take(6).collect();
        assert_eq!(head[0], "# stifflimit snapshot");
        assert_eq!(head[1], "# version = 1");
        assert_eq!(head[2], "# time = 3.0000000000000004e-1");
        assert_eq!(head[3], "# gamma = inf");
        assert_eq!(head[4], "# grid = 1 12 7e-1");
        assert_eq!(head[5], "x,n,p,w,f");
    }

    #[test]
    fn rejects_bad_files() {
        let mut a = Vec::new();
        write_snapshot(&sample(1, Some(2.0)), &mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(read_snapshot(truncated.as_bytes()).is_err());
        let bad_version = text.replace("# version = 1", "# version = 9");
        assert!(matches!(read_snapshot(bad_version.as_bytes()), Err(SnapshotError::Version(9))));
        let moved = text.replacen("-6.416666666666666e-1", "-6e-1", 1);
        assert!(read_snapshot(moved.as_bytes()).is_err());
        assert!(read_snapshot("x,n,p\n".as_bytes()).is_err());
    }
}
