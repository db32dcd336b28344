//! Closed-form comparison functions: the parabolic barrier
//! `P = (C - (|x| - r0)² / (4t))₊` that keeps the porous-medium pressure out
//! of a vacuum ball for short times, and the 1D stationary pressure profile
//! of the linear law.

use thiserror::Error;

use crate::growth::GrowthLaw;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("amplitude, radius and gamma must be positive (C = {c}, r0 = {r0}, gamma = {gamma})")]
    BadParameters { c: f64, r0: f64, gamma: f64 },
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("t = {t} outside the validity window (0, {t_bar}]")]
    OutsideWindow { t: f64, t_bar: f64 },
    #[error("point at distance {rho} from the center lies outside the ball of radius {r0}")]
    OutsideBall { rho: f64, r0: f64 },
    #[error("the barrier is not smooth here (P = {value}, |x - center| = {rho})")]
    NotSmooth { value: f64, rho: f64 },
    #[error("the closed-form profile needs a linear law")]
    NonlinearLaw,
    #[error("|x| = {x} exceeds the support radius {r}")]
    OutsideSupport { x: f64, r: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    pub c: f64,
    pub r0: f64,
    pub center: [f64; 2],
    pub dim: usize,
    pub law: GrowthLaw,
    pub gamma: f64,
}

/// `P`, `∂t P`, `ΔP` and `|∇P|²` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierJet {
    pub value: f64,
    pub dt: f64,
    pub laplacian: f64,
    pub grad_sq: f64,
}

impl Barrier {
    pub fn new(c: f64, r0: f64, center: [f64; 2], dim: usize, law: GrowthLaw, gamma: f64) -> Result<Self, BarrierError> {
        if !(c > 0.0 && r0 > 0.0 && gamma > 0.0) {
            return Err(BarrierError::BadParameters { c, r0, gamma });
        }
        if dim != 1 && dim != 2 {
            return Err(BarrierError::BadDimension(dim));
        }
        Ok(Self {
            c,
            r0,
            center,
            dim,
            law,
            gamma,
        })
    }

    /// `min(1/(4 G(0)), r0² / (16 N² C))`.
    pub fn t_bar(&self) -> f64 {
        let n = self.dim as f64;
        let growth = if self.law.g0() > 0.0 { 0.25 / self.law.g0() } else { f64::INFINITY };
        growth.min(self.r0 * self.r0 / (16.0 * n * n * self.c))
    }

    /// Radius of the ball where the barrier vanishes throughout the window.
    pub fn inner_radius(&self) -> f64 {
        let n = self.dim as f64;
        self.r0 * (2.0 * n - 1.0) / (2.0 * n)
    }

    pub fn distance(&self, x: [f64; 2]) -> f64 {
        let dx = x[0] - self.center[0];
        let dy = if self.dim == 2 { x[1] - self.center[1] } else { 0.0 };
        dx.hypot(dy)
    }

    /// `P(x, t)` with no range checks.
    pub fn value(&self, x: [f64; 2], t: f64) -> f64 {
        let u = self.distance(x) - self.r0;
        (self.c - u * u / (4.0 * t)).max(0.0)
    }

    fn check(&self, x: [f64; 2], t: f64) -> Result<f64, BarrierError> {
        let t_bar = self.t_bar();
        if !(t > 0.0 && t <= t_bar) {
            return Err(BarrierError::OutsideWindow { t, t_bar });
        }
        let rho = self.distance(x);
        if rho > self.r0 {
            return Err(BarrierError::OutsideBall { rho, r0: self.r0 });
        }
        Ok(rho)
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> Result<f64, BarrierError> {
        self.check(x, t)?;
        Ok(self.value(x, t))
    }

    /// Exact derivatives where `P > 0` and `x` is off the center.
    pub fn jet(&self, x: [f64; 2], t: f64) -> Result<BarrierJet, BarrierError> {
        let rho = self.check(x, t)?;
        let value = self.value(x, t);
        if value <= 0.0 || rho == 0.0 || rho >= self.r0 {
            return Err(BarrierError::NotSmooth { value, rho });
        }
        let u = rho - self.r0;
        let radial = -u / (2.0 * t);
        let second = -1.0 / (2.0 * t);
        Ok(BarrierJet {
            value,
            dt: u * u / (4.0 * t * t),
            laplacian: second + (self.dim as f64 - 1.0) * radial / rho,
            grad_sq: radial * radial,
        })
    }

    /// `∂t P - γ P ΔP - |∇P|² - γ P G(0)`; nonnegative for a supersolution.
    pub fn residual(&self, x: [f64; 2], t: f64) -> Result<f64, BarrierError> {
        let j = self.jet(x, t)?;
        let gp = self.gamma * j.value;
        Ok(j.dt - gp * j.laplacian - j.grad_sq - gp * self.law.g0())
    }
}

fn linear_parts(law: &GrowthLaw) -> Result<(f64, f64), BarrierError> {
    match law {
        GrowthLaw::Linear { g0, p_max } => Ok((*g0, *p_max)),
        _ => Err(BarrierError::NonlinearLaw),
    }
}

/// `pM (1 - cosh(kx) / cosh(kR))` with `k = sqrt(g0 / pM)`: the pressure on
/// `(-R, R)` solving `-p'' = g0 (1 - p / pM)`, `p(±R) = 0`.
pub fn cosh_profile(law: &GrowthLaw, r: f64, x: f64) -> Result<f64, BarrierError> {
    let (g0, pm) = linear_parts(law)?;
    if x.abs() > r {
        return Err(BarrierError::OutsideSupport { x, r });
    }
    let k = (g0 / pm).sqrt();
    Ok(pm * (1.0 - (k * x).cosh() / (k * r).cosh()))
}

/// Front speed `|p'(R)| = pM k tanh(kR)` of the 1D profile.
pub fn front_speed(law: &GrowthLaw, r: f64) -> Result<f64, BarrierError> {
    let (g0, pm) = linear_parts(law)?;
    let k = (g0 / pm).sqrt();
    Ok(pm * k * (k * r).tanh())
}

/// Front radius `R(t)` of `Ṙ = pM k tanh(kR)`, `R(0) = r0`, at each of the
/// increasing `times`, by classical Runge-Kutta with steps no longer than
/// `max_step`.
pub fn front_trajectory(law: &GrowthLaw, r0: f64, times: &[f64], max_step: f64) -> Result<Vec<f64>, BarrierError> {
    let (g0, pm) = linear_parts(law)?;
    let k = (g0 / pm).sqrt();
    let f = |r: f64| pm * k * (k * r).tanh();
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut r) = (0.0, r0);
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / max_step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                let k1 = f(r);
                let k2 = f(r + 0.5 * h * k1);
                let k3 = f(r + 0.5 * h * k2);
                let k4 = f(r + h * k3);
                r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            t = target;
        }
        out.push(r);
    }
    Ok(out)
}
