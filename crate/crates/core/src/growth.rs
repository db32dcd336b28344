//! The pressure-limited growth law `G`.
//!
//! Every admissible law is `C^1`, strictly decreasing on `[0, pM]` and
//! vanishes at the homeostatic pressure `pM`. Two shapes are provided: the
//! linear law `G(p) = g0 (1 - p/pM)`, and a law tabulated from CSV and
//! interpolated by monotone cubic Hermite splines.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sample count used by [`GrowthLaw::semiconvexity_constant`].
pub const SEMICONVEXITY_SAMPLES: usize = 10_000;
/// Simpson panels for antiderivatives of tabulated laws.
pub const SIMPSON_PANELS: usize = 512;
/// Tolerance on `|G(pM)|` for tabulated laws.
pub const ROOT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("g0 must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("homeostatic pressure must be positive and finite, got {0}")]
    BadHomeostaticPressure(f64),
    #[error("pressure must be nonnegative, got {0}")]
    NegativePressure(f64),
    #[error("pressure {p} outside [0, {p_max}]")]
    OutOfRange { p: f64, p_max: f64 },
    #[error("semiconvexity constant {0} is not positive")]
    NotSemiconvex(f64),
    #[error("invalid table: {0}")]
    BadTable(String),
    #[error("reading growth table: {0}")]
    Io(#[from] std::io::Error),
    #[error("reading growth table: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum GrowthLaw {
    /// `G(p) = g0 (1 - p / p_max)`.
    Linear { g0: f64, p_max: f64 },
    /// Monotone cubic Hermite interpolation through `(p_i, G_i)`, extended
    /// linearly past the last node.
    Tabulated(Arc<Table>),
    /// `G = 0`. Exempt from the law invariants; only for conservation tests
    /// of the transport part.
    ZeroSource { p_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    p: Vec<f64>,
    g: Vec<f64>,
    slope: Vec<f64>,
}

impl GrowthLaw {
    pub fn linear(g0: f64, p_max: f64) -> Result<Self, GrowthError> {
        if !(g0.is_finite() && g0 > 0.0) {
            return Err(GrowthError::BadRate(g0));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(GrowthError::BadHomeostaticPressure(p_max));
        }
        Ok(GrowthLaw::Linear { g0, p_max })
    }

    pub fn zero_source(p_max: f64) -> Self {
        GrowthLaw::ZeroSource { p_max }
    }

    /// Builds a tabulated law. Nodes must start at `p = 0`, increase strictly,
    /// carry strictly decreasing values and end on a root of `G`.
    pub fn tabulated(p: Vec<f64>, g: Vec<f64>) -> Result<Self, GrowthError> {
        let bad = |m: &str| Err(GrowthError::BadTable(m.to_string()));
        if p.len() != g.len() {
            return bad("column lengths differ");
        }
        if p.len() < 2 {
            return bad("need at least two rows");
        }
        if p.iter().chain(&g).any(|v| !v.is_finite()) {
            return bad("non-finite entry");
        }
        if p[0] != 0.0 {
            return bad("first pressure must be 0");
        }
        if p.windows(2).any(|w| w[1] <= w[0]) {
            return bad("pressures must increase strictly");
        }
        if g.windows(2).any(|w| w[1] >= w[0]) {
            return bad("growth values must decrease strictly");
        }
        let last = *g.last().unwrap();
        if last.abs() > ROOT_TOLERANCE {
            return bad(&format!("G(pM) = {last:e} is not a root"));
        }
        if g[0] <= 0.0 {
            return bad("G(0) must be positive");
        }
        let slope = fritsch_carlson_slopes(&p, &g);
        let law = GrowthLaw::Tabulated(Arc::new(Table { p, g, slope }));
        law.semiconvexity_constant()?;
        Ok(law)
    }

    /// Reads a two-column `p,G(p)` CSV. `#` lines and a non-numeric header
    /// row are skipped.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self, GrowthError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let (mut p, mut g) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(GrowthError::BadTable(format!(
                    "row {} has {} columns, expected 2",
                    row + 1,
                    rec.len()
                )));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    p.push(a);
                    g.push(b);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(GrowthError::BadTable(format!(
                        "row {} is not numeric",
                        row + 1
                    )))
                }
            }
        }
        Self::tabulated(p, g)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, GrowthError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// `G(0)`.
    pub fn g0(&self) -> f64 {
        match self {
            GrowthLaw::Linear { g0, .. } => *g0,
            GrowthLaw::Tabulated(t) => t.g[0],
            GrowthLaw::ZeroSource { .. } => 0.0,
        }
    }

    /// Homeostatic pressure `pM`.
    pub fn p_max(&self) -> f64 {
        match self {
            GrowthLaw::Linear { p_max, .. } | GrowthLaw::ZeroSource { p_max } => *p_max,
            GrowthLaw::Tabulated(t) => *t.p.last().unwrap(),
        }
    }

    /// `G(p)` for `p >= 0`.
    pub fn eval(&self, p: f64) -> Result<f64, GrowthError> {
        if p < 0.0 || p.is_nan() {
            return Err(GrowthError::NegativePressure(p));
        }
        Ok(self.value(p))
    }

    /// `G(p)` without the sign check; negative inputs are treated as 0.
    #[inline]
    pub fn value(&self, p: f64) -> f64 {
        let p = p.max(0.0);
        match self {
            GrowthLaw::Linear { g0, p_max } => g0 * (1.0 - p / p_max),
            GrowthLaw::Tabulated(t) => t.value(p),
            GrowthLaw::ZeroSource { .. } => 0.0,
        }
    }

    /// `G'(p)`.
    pub fn derivative(&self, p: f64) -> f64 {
        let p = p.max(0.0);
        match self {
            GrowthLaw::Linear { g0, p_max } => -g0 / p_max,
            GrowthLaw::Tabulated(t) => t.derivative(p),
            GrowthLaw::ZeroSource { .. } => 0.0,
        }
    }

    /// `c = min_{[0, pM]} (G(p) - p G'(p))`: exactly `g0` for the linear law,
    /// by dense sampling (endpoints included) otherwise. Errors unless `c > 0`.
    pub fn semiconvexity_constant(&self) -> Result<f64, GrowthError> {
        match self {
            Self::Linear { g0, .. } => Ok(*g0),
            _ => self.semiconvexity_constant_sampled(SEMICONVEXITY_SAMPLES),
        }
    }

    pub fn semiconvexity_constant_sampled(&self, samples: usize) -> Result<f64, GrowthError> {
        let pm = self.p_max();
        let samples = samples.max(2);
        let c = (0..=samples)
            .map(|k| {
                let p = pm * k as f64 / samples as f64;
                self.value(p) - p * self.derivative(p)
            })
            .fold(f64::INFINITY, f64::min);
        if c > 0.0 {
            Ok(c)
        } else {
            Err(GrowthError::NotSemiconvex(c))
        }
    }

    /// `H^(alpha)(p) = int_0^p q^alpha G(q) dq` for `0 <= p <= pM`; `alpha = 0`
    /// gives `H(p)`.
    pub fn antiderivative(&self, p: f64, alpha: f64) -> Result<f64, GrowthError> {
        let pm = self.p_max();
        if !(0.0..=pm).contains(&p) {
            return Err(GrowthError::OutOfRange { p, p_max: pm });
        }
        if alpha < 0.0 || alpha.is_nan() {
            return Err(GrowthError::BadTable(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(match self {
            GrowthLaw::Linear { g0, p_max } => {
                g0 * (p.powf(alpha + 1.0) / (alpha + 1.0)
                    - p.powf(alpha + 2.0) / ((alpha + 2.0) * p_max))
            }
            GrowthLaw::ZeroSource { .. } => 0.0,
            GrowthLaw::Tabulated(_) => simpson(|q| pow_alpha(q, alpha) * self.value(q), 0.0, p, SIMPSON_PANELS),
        })
    }
}

#[inline]
fn pow_alpha(q: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        q.powf(alpha)
    }
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

impl Table {
    fn segment(&self, p: f64) -> usize {
        match self.p.binary_search_by(|x| x.total_cmp(&p)) {
            Ok(i) => i.min(self.p.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.p.len() - 2),
        }
    }

    fn value(&self, p: f64) -> f64 {
        let last = self.p.len() - 1;
        if p >= self.p[last] {
            return self.g[last] + self.slope[last] * (p - self.p[last]);
        }
        let i = self.segment(p);
        let (x0, x1) = (self.p[i], self.p[i + 1]);
        let dx = x1 - x0;
        let s = (p - x0) / dx;
        let (h00, h10, h01, h11) = hermite_basis(s);
        h00 * self.g[i] + h10 * dx * self.slope[i] + h01 * self.g[i + 1] + h11 * dx * self.slope[i + 1]
    }

    fn derivative(&self, p: f64) -> f64 {
        let last = self.p.len() - 1;
        if p >= self.p[last] {
            return self.slope[last];
        }
        let i = self.segment(p);
        let (x0, x1) = (self.p[i], self.p[i + 1]);
        let dx = x1 - x0;
        let s = (p - x0) / dx;
        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s * s - 2.0 * s;
        (d00 * self.g[i] + d01 * self.g[i + 1]) / dx + d10 * self.slope[i] + d11 * self.slope[i + 1]
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}

/// Node slopes that keep a cubic Hermite interpolant monotone.
fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            // weighted harmonic mean
            let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
            let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
            (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
        };
    }
    m
}
