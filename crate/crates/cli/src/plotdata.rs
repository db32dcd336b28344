//! Tidy CSV tables for plotting, one observation per row.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use stifflimit::geometry::positivity_set;
use stifflimit::grid::{integrate, RegionMask};
use stifflimit::snapshot::{format_float, Snapshot, SnapshotSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlotKind {
    /// `t, R`: largest distance from the origin of a cell of the front set.
    FrontPosition,
    /// `t, mass, bound` with `bound = e^{G(0)t} ∫n⁰`.
    Mass,
    /// `t, x, n, p` along the row through the origin.
    PressureProfile,
    /// `t, x[, y], set`: members of `omega = {p > thr}` and
    /// `support = {n > 0}`.
    Masks,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [Self::FrontPosition, Self::Mass, Self::PressureProfile, Self::Masks];

    pub fn name(self) -> &'static str {
        match self {
            Self::FrontPosition => "front_position",
            Self::Mass => "mass",
            Self::PressureProfile => "pressure_profile",
            Self::Masks => "masks",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown plot kind {s:?}"))
    }
}

/// Set whose outer edge is reported as the front. In the stiff limit
/// `{w > 0}` only grows, so the front never recedes.
fn front_set(s: &Snapshot, thr: f64) -> RegionMask {
    let mut set = positivity_set(&s.p, thr);
    if let Some(w) = &s.w {
        for (i, v) in w.values().iter().enumerate() {
            if *v > 0.0 {
                set.set(i, true);
            }
        }
    }
    set
}

fn radius(set: &RegionMask) -> f64 {
    let g = set.grid();
    set.indices()
        .into_iter()
        .map(|i| {
            let c = g.center(i);
            c[0].hypot(c[1])
        })
        .fold(f64::NAN, f64::max)
}

/// Rows of one table, header first.
pub fn table(series: &SnapshotSeries, kind: PlotKind, thr: f64) -> Vec<Vec<String>> {
    let g = *series.grid();
    let two_d = g.dim() == 2;
    let f = |x: f64| format_float(x);
    let mut rows: Vec<Vec<String>> = Vec::new();
    match kind {
        PlotKind::FrontPosition => {
            rows.push(vec!["t".into(), "R".into()]);
            for s in &series.snapshots {
                rows.push(vec![f(s.time), f(radius(&front_set(s, thr)))]);
            }
        }
        PlotKind::Mass => {
            rows.push(vec!["t".into(), "mass".into(), "bound".into()]);
            let m0 = integrate(&series.n0);
            for s in &series.snapshots {
                rows.push(vec![f(s.time), f(integrate(&s.n)), f((series.law.g0() * s.time).exp() * m0)]);
            }
        }
        PlotKind::PressureProfile => {
            rows.push(vec!["t".into(), "x".into(), "n".into(), "p".into()]);
            let row = if two_d { g.cells_per_axis() / 2 } else { 0 };
            for s in &series.snapshots {
                for ix in 0..g.cells_per_axis() {
                    let i = if two_d { g.flatten(ix, row) } else { ix };
                    rows.push(vec![f(s.time), f(g.center(i)[0]), f(s.n[i]), f(s.p[i])]);
                }
            }
        }
        PlotKind::Masks => {
            let mut head = vec!["t".to_string(), "x".into()];
            if two_d {
                head.push("y".into());
            }
            head.push("set".into());
            rows.push(head);
            for s in &series.snapshots {
                let omega = positivity_set(&s.p, thr);
                let support = positivity_set(&s.n, 0.0);
                for (name, set) in [("omega", &omega), ("support", &support)] {
                    for i in set.indices() {
                        let c = g.center(i);
                        let mut r = vec![f(s.time), f(c[0])];
                        if two_d {
                            r.push(f(c[1]));
                        }
                        r.push(name.into());
                        rows.push(r);
                    }
                }
            }
        }
    }
    rows
}

/// Writes `<kind>.csv` for each kind into `dir` and returns the paths.
pub fn export_plotdata(series: &SnapshotSeries, dir: &Path, kinds: &[PlotKind], thr: f64) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for &kind in kinds {
        let path = dir.join(format!("{kind}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for row in table(series, kind, thr) {
            w.write_record(&row)?;
        }
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stifflimit::grid::{Grid, ScalarField};
    use stifflimit::growth::GrowthLaw;

    fn series() -> SnapshotSeries {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let n = ScalarField::from_fn(g, |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 });
        let p = n.map(|v| 0.5 * v);
        let snap = |t: f64| Snapshot {
            time: t,
            gamma: Some(10.0),
            n: n.clone(),
            p: p.clone(),
            w: None,
            forcing: None,
        };
        SnapshotSeries::from_snapshots(GrowthLaw::linear(1.0, 1.0).unwrap(), vec![snap(0.0), snap(0.5)]).unwrap()
    }

    #[test]
    fn kinds_round_trip_through_names() {
        for k in PlotKind::ALL {
            assert_eq!(k.name().parse::<PlotKind>(), Ok(k));
        }
        assert!("fronts".parse::<PlotKind>().is_err());
    }

    #[test]
    fn tables_are_tidy() {
        let s = series();
        let front = table(&s, PlotKind::FrontPosition, 1e-8);
        assert_eq!(front, vec![vec!["t", "R"], vec!["0e0", "3.75e-1"], vec!["5e-1", "3.75e-1"]]);
        let mass = table(&s, PlotKind::Mass, 1e-8);
        assert_eq!(mass[2][1], "1e0");
        assert_eq!(mass[2][2], format_float(0.5f64.exp()));
        assert_eq!(table(&s, PlotKind::PressureProfile, 1e-8).len(), 1 + 2 * 8);
        let masks = table(&s, PlotKind::Masks, 1e-8);
        assert_eq!(masks[0], vec!["t", "x", "set"]);
        assert_eq!(masks.len(), 1 + 2 * 2 * 4);
    }
}
