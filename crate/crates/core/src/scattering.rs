//! Zero-energy two-body scattering for radial, nonnegative, finite-range
//! potentials.
//!
//! With `u = r f` the radial equation reads `u'' = c·w(r)·u`, `u(r_c) = 0`,
//! where `r_c` is the hard-core radius (zero without a core). Outside the
//! range `u` is affine, `u ∝ r − a`, and `a` is the scattering length. The
//! default coefficient `c = 2` corresponds to `[−½Δ + w] f = 0`; the
//! [`Convention::UnitMass`] switch uses `c = 1`, i.e. `[−Δ + w] f = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScatteringError {
    #[error("potential must be nonnegative, found {0}")]
    NegativePotential(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("step size underflow at r = {0} (potential too stiff for the requested tolerance)")]
    StepUnderflow(f64),
    #[error("scale factor must be at least 1, got {0}")]
    InvalidScale(f64),
}

/// Profile of `w` on `[0, R₀]` outside the hard core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Zero,
    /// Constant height on the whole range.
    Square { height: f64 },
    /// Piecewise-linear interpolation of samples `(r_i, w_i)`; constant
    /// continuation below the first and above the last sample.
    Tabulated { r: Vec<f64>, w: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPotential {
    range: f64,
    hard_core: Option<f64>,
    shape: Shape,
}

impl RadialPotential {
    pub fn new(range: f64, hard_core: Option<f64>, shape: Shape) -> Result<Self, ScatteringError> {
        if !(range.is_finite() && range > 0.0) {
            return Err(ScatteringError::InvalidPotential(format!("range must be positive, got {range}")));
        }
        if let Some(rc) = hard_core {
            if !(rc.is_finite() && rc > 0.0 && rc <= range) {
                return Err(ScatteringError::InvalidPotential(format!(
                    "hard-core radius must lie in (0, {range}], got {rc}"
                )));
            }
        }
        match &shape {
            Shape::Zero => {}
            Shape::Square { height } => {
                if !height.is_finite() {
                    return Err(ScatteringError::InvalidPotential("height must be finite".into()));
                }
                if *height < 0.0 {
                    return Err(ScatteringError::NegativePotential(*height));
                }
            }
            Shape::Tabulated { r, w } => {
                if r.is_empty() || r.len() != w.len() {
                    return Err(ScatteringError::InvalidPotential("table needs matching nonempty r and w".into()));
                }
                if r.windows(2).any(|p| !(p[1] > p[0])) || r[0] < 0.0 || *r.last().expect("nonempty") > range {
                    return Err(ScatteringError::InvalidPotential(
                        "table radii must increase strictly within [0, range]".into(),
                    ));
                }
                if let Some(v) = w.iter().find(|v| !v.is_finite()) {
                    return Err(ScatteringError::InvalidPotential(format!("non-finite table value {v}")));
                }
                if let Some(v) = w.iter().find(|v| **v < 0.0) {
                    return Err(ScatteringError::NegativePotential(*v));
                }
            }
        }
        Ok(Self { range, hard_core, shape })
    }

    /// Pure hard core of radius `r0`.
    pub fn hard_sphere(r0: f64) -> Result<Self, ScatteringError> {
        Self::new(r0, Some(r0), Shape::Zero)
    }

    pub fn square(r0: f64, height: f64) -> Result<Self, ScatteringError> {
        Self::new(r0, None, Shape::Square { height })
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn hard_core(&self) -> Option<f64> {
        self.hard_core
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// `w(r)` outside the core; zero beyond the range.
    pub fn value(&self, r: f64) -> f64 {
        if r > self.range {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Square { height } => *height,
            Shape::Tabulated { r: rs, w } => {
                if r <= rs[0] {
                    return w[0];
                }
                let k = rs.partition_point(|&x| x < r);
                if k >= rs.len() {
                    return *w.last().expect("nonempty");
                }
                let t = (r - rs[k - 1]) / (rs[k] - rs[k - 1]);
                w[k - 1] + t * (w[k] - w[k - 1])
            }
        }
    }

    /// Points where `w` may have a kink, in increasing order within
    /// `[start, range]`.
    fn breakpoints(&self, start: f64) -> Vec<f64> {
        let mut pts = vec![start];
        if let Shape::Tabulated { r, .. } = &self.shape {
            pts.extend(r.iter().copied().filter(|&x| x > start && x < self.range));
        }
        pts.push(self.range);
        pts.dedup();
        pts
    }
}

/// Coefficient in front of `w` in the radial equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `u'' = 2wu`
    #[default]
    Printed,
    /// `u'' = wu`
    UnitMass,
}

impl Convention {
    fn factor(self) -> f64 {
        match self {
            Self::Printed => 2.0,
            Self::UnitMass => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub a: f64,
    /// `(r, f(r))` with `f = u / (slope · r)`, so that `f → 1 − a/r` outside.
    pub f_profile: Vec<(f64, f64)>,
    /// RMS deviation of `u` from the fitted affine function on `[R₀, 2R₀]`,
    /// relative to the fitted value at `2R₀`.
    pub match_residual: f64,
}

/// One classical RK4 step for `y = (u, u')`.
fn rk4(pot: &RadialPotential, c: f64, r: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let f = |r: f64, y: [f64; 2]| [y[1], c * pot.value(r) * y[0]];
    let k1 = f(r, y);
    let k2 = f(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

const MAX_STEPS: usize = 2_000_000;

/// Adaptive RK4 with step doubling across one smooth piece `[a, b]`.
fn integrate_piece(
    pot: &RadialPotential,
    c: f64,
    a: f64,
    b: f64,
    mut y: [f64; 2],
    tol: f64,
    samples: &mut Vec<(f64, f64)>,
) -> Result<[f64; 2], ScatteringError> {
    let width = b - a;
    let mut r = a;
    let mut h = width / 16.0;
    let min_h = width * 1e-13;
    let mut steps = 0usize;
    while r < b {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(ScatteringError::StepUnderflow(r));
        }
        if r + h > b {
            h = b - r;
        }
        let full = rk4(pot, c, r, y, h);
        let half = rk4(pot, c, r, y, 0.5 * h);
        let two = rk4(pot, c, r + 0.5 * h, half, 0.5 * h);
        let scale = two[0].abs().max(two[1].abs() * width).max(f64::MIN_POSITIVE);
        let err = ((two[0] - full[0]).abs().max((two[1] - full[1]).abs() * width)) / 15.0;
        if err <= tol * scale || h <= min_h {
            if err > tol * scale && h <= min_h {
                return Err(ScatteringError::StepUnderflow(r));
            }
            // Richardson extrapolation of the accepted pair.
            y = [two[0] + (two[0] - full[0]) / 15.0, two[1] + (two[1] - full[1]) / 15.0];
            r += h;
            samples.push((r, y[0]));
            // The equation is linear: rescale to stay clear of overflow.
            if y[0].abs() > 1e150 {
                let f = 1e-150;
                y = [y[0] * f, y[1] * f];
                samples.iter_mut().for_each(|p| p.1 *= f);
            }
            let grow = if err == 0.0 { 2.0 } else { (0.9 * (tol * scale / err).powf(0.2)).clamp(0.2, 2.0) };
            h *= grow;
        } else {
            h *= (0.9 * (tol * scale / err).powf(0.2)).clamp(0.1, 0.5);
        }
    }
    Ok(y)
}

/// Scattering length of `pot` with relative integration tolerance `tol`.
pub fn scattering_length(pot: &RadialPotential, tol: f64) -> Result<ScatteringResult, ScatteringError> {
    scattering_length_with(pot, tol, Convention::Printed)
}

pub fn scattering_length_with(
    pot: &RadialPotential,
    tol: f64,
    convention: Convention,
) -> Result<ScatteringResult, ScatteringError> {
    let c = convention.factor();
    let start = pot.hard_core.unwrap_or(0.0);
    let mut y = [0.0, 1.0];
    let mut samples = vec![(start, 0.0)];
    let pts = pot.breakpoints(start);
    let step_tol = (tol * 1e-3).max(1e-15);
    for piece in pts.windows(2) {
        if piece[1] > piece[0] {
            y = integrate_piece(pot, c, piece[0], piece[1], y, step_tol, &mut samples)?;
        }
    }
    // Outside the range u is affine; sample it and fit.
    let r0 = pot.range;
    let fit_pts: Vec<(f64, f64)> = (0..=32)
        .map(|k| {
            let r = r0 * (1.0 + k as f64 / 32.0);
            (r, y[0] + y[1] * (r - r0))
        })
        .collect();
    let m = fit_pts.len() as f64;
    let mean_r = fit_pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_u = fit_pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = fit_pts.iter().map(|p| (p.0 - mean_r).powi(2)).sum();
    let sxy: f64 = fit_pts.iter().map(|p| (p.0 - mean_r) * (p.1 - mean_u)).sum();
    let slope = sxy / sxx;
    let intercept = mean_u - slope * mean_r;
    let a = -intercept / slope;
    let rms = (fit_pts.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum::<f64>() / m).sqrt();
    let match_residual = rms / (slope * 2.0 * r0).abs().max(f64::MIN_POSITIVE);
    samples.extend(fit_pts.iter().skip(1).copied());
    let f_profile = samples
        .iter()
        .filter(|p| p.0 > 0.0)
        .map(|&(r, u)| (r, u / (slope * r)))
        .collect();
    Ok(ScatteringResult { a, f_profile, match_residual })
}

/// `v_N(x) = N² w(N x)`: range, core and table radii shrink by `N`,
/// values grow by `N²`. The scattering length becomes `a/N`.
pub fn scale_interaction(pot: &RadialPotential, n: f64) -> Result<RadialPotential, ScatteringError> {
    if !(n.is_finite() && n >= 1.0) {
        return Err(ScatteringError::InvalidScale(n));
    }
    let shape = match &pot.shape {
        Shape::Zero => Shape::Zero,
        Shape::Square { height } => Shape::Square { height: height * n * n },
        Shape::Tabulated { r, w } => Shape::Tabulated {
            r: r.iter().map(|x| x / n).collect(),
            w: w.iter().map(|x| x * n * n).collect(),
        },
    };
    RadialPotential::new(pot.range / n, pot.hard_core.map(|rc| rc / n), shape)
}

/// Scattering lengths of `v_N` for several `N`, computed in parallel.
pub fn scaling_sweep(pot: &RadialPotential, ns: &[f64], tol: f64) -> Result<Vec<(f64, f64)>, ScatteringError> {
    ns.par_iter()
        .map(|&n| Ok((n, scattering_length(&scale_interaction(pot, n)?, tol)?.a)))
        .collect()
}

/// Closed form for a square barrier of height `w0` on `[0, r0]` in the
/// printed convention: `a = r0 − tanh(κ r0)/κ` with `κ = √(2 w0)`.
pub fn square_barrier_length(r0: f64, w0: f64) -> f64 {
    if w0 == 0.0 {
        return 0.0;
    }
    let k = (2.0 * w0).sqrt();
    r0 - (k * r0).tanh() / k
}
