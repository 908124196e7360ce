//! Soft-potential objects of the generalized Dyson lemma and the modified
//! one-body operator `K₀`.
//!
//! Fourier convention: `ĝ(x) = (2π)⁻³ ∫ g(p) e^{ip·x} dp`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Direction, FieldError, GaugeField, Grid, GridOperator, C64};
use crate::gp::GpProblem;
use crate::linalg::{lobpcg, symmetric_eigen, EigenError, EigenPairs, LobpcgOptions};
use crate::quad::{gauss_legendre_on, QuadError};
use crate::scattering::{scattering_length_with, Convention, RadialPotential, ScatteringError, Shape};

#[derive(Debug, Error)]
pub enum DysonError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("box too small: eigenvector weight {0:.2e} at the boundary")]
    BoxTooSmall(f64),
}

/// `ψ(t) = e^{-1/t}` for `t > 0`, zero otherwise.
fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, `ψ(t)/(ψ(t)+ψ(1−t))` between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = psi(t);
        a / (a + psi(1.0 - t))
    }
}

/// High-momentum cutoff `χ(p) = ℓ(s|p|)` with `ℓ(p) = S(|p| − 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffFunction {
    s: f64,
}

impl CutoffFunction {
    pub fn new(s: f64) -> Result<Self, DysonError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(DysonError::InvalidParameter(format!("cutoff scale must be positive, got {s}")));
        }
        Ok(Self { s })
    }

    pub fn scale(&self) -> f64 {
        self.s
    }

    /// The profile `ℓ`.
    pub fn profile(p: f64) -> f64 {
        smooth_step(p.abs() - 1.0)
    }

    pub fn chi(&self, p: f64) -> f64 {
        Self::profile(self.s * p)
    }
}

/// Cubic Hermite table on a uniform radial grid starting at 0.
#[derive(Clone, Debug)]
pub struct RadialTable {
    dr: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl RadialTable {
    pub fn radius_max(&self) -> f64 {
        self.dr * (self.values.len() - 1) as f64
    }

    /// Interpolated value; zero beyond the table.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let x = r / self.dr;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return if i + 1 == self.values.len() && x == i as f64 { self.values[i] } else { 0.0 };
        }
        let t = x - i as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t).powi(2),
            t * (1.0 - t).powi(2),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        h00 * self.values[i] + h10 * self.dr * self.derivs[i] + h01 * self.values[i + 1] + h11 * self.dr * self.derivs[i + 1]
    }
}

/// `sin(t)/t` and its derivative.
fn sinc_and_derivative(t: f64) -> (f64, f64) {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, -t / 3.0 + t * t2 / 30.0)
    } else {
        let (s, c) = t.sin_cos();
        (s / t, (c * t - s) / (t * t))
    }
}

/// Radial profile of `h = (1−χ)^`, i.e.
/// `h(r) = (2π²)⁻¹ ∫₀^{2/s} (1−χ(p)) p² sin(pr)/(pr) dp`, tabulated with
/// its derivative on `[0, r_max]`.
pub fn h_table(cutoff: &CutoffFunction, r_max: f64) -> RadialTable {
    let s = cutoff.s;
    let dr = s / 64.0;
    let count = (r_max / dr).ceil() as usize + 1;
    // The integrand is smooth and compactly supported: composite Gauss with
    // enough panels to resolve pr up to r_max · 2/s.
    let panels = 64 + (4.0 * r_max / s) as usize;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let width = 2.0 / s / panels as f64;
    for k in 0..panels {
        let (x, w) = gauss_legendre_on(k as f64 * width, (k + 1) as f64 * width, 12);
        for (p, wt) in x.into_iter().zip(w) {
            let g = (1.0 - cutoff.chi(p)) * p * p * wt / (2.0 * PI * PI);
            nodes.push(p);
            weights.push(g);
        }
    }
    let (values, derivs): (Vec<f64>, Vec<f64>) = (0..count)
        .into_par_iter()
        .map(|i| {
            let r = i as f64 * dr;
            let mut v = 0.0;
            let mut d = 0.0;
            for (p, g) in nodes.iter().zip(&weights) {
                let (sv, sd) = sinc_and_derivative(p * r);
                v += g * sv;
                d += g * p * sd;
            }
            (v, d)
        })
        .unzip();
    RadialTable { dr, values, derivs }
}

/// Sampling of the ball `|y| ≤ R` used for the supremum in `f_R`: the
/// boundary points of the cube lattice `{−k..k}³` as directions and
/// `radii` equally spaced radii, plus the center.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupSampling {
    pub shell: usize,
    pub radii: usize,
}

impl Default for SupSampling {
    /// 26 directions × 8 radii.
    fn default() -> Self {
        Self { shell: 1, radii: 8 }
    }
}

impl SupSampling {
    pub fn refined(self) -> Self {
        Self { shell: 2 * self.shell, radii: 2 * self.radii }
    }

    /// Cosines of the angles between the sampled directions and the
    /// lattice axis along which `x` is placed.
    fn cosines(&self) -> Vec<f64> {
        let k = self.shell as i64;
        let mut out = Vec::new();
        for i in -k..=k {
            for j in -k..=k {
                for l in -k..=k {
                    if i.abs().max(j.abs()).max(l.abs()) != k {
                        continue;
                    }
                    let d = [i as f64, j as f64, l as f64];
                    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    out.push(d[2] / n);
                }
            }
        }
        out
    }
}

/// Radial samples of `h`, `f_R`, `w_R` and the hat function `U_R`.
#[derive(Clone, Debug)]
pub struct SoftPotentials {
    cutoff: CutoffFunction,
    r: f64,
    epsilon: f64,
    h: RadialTable,
    /// Radial grid on which `f_R` and `w_R` are sampled.
    pub radii: Vec<f64>,
    pub f_r: Vec<f64>,
    pub w_r: Vec<f64>,
    /// `∫ f_R(x) dx`
    pub int_f_r: f64,
}

/// Simpson integral `4π ∫ g(r) r² dr` over a uniform radial grid; an even
/// point count closes with a trapezoid on the last interval.
fn radial_integral(radii: &[f64], g: &[f64]) -> f64 {
    let n = radii.len();
    let dr = radii[1] - radii[0];
    let y = |i: usize| g[i] * radii[i] * radii[i];
    let odd = if n % 2 == 1 { n } else { n - 1 };
    let mut sum = 0.0;
    for i in 0..odd {
        let w = if i == 0 || i == odd - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * y(i);
    }
    let mut val = sum * dr / 3.0;
    if odd < n {
        val += 0.5 * dr * (y(n - 2) + y(n - 1));
    }
    4.0 * PI * val
}

/// `sup_{|y| ≤ R} |h(x−y) − h(x)|` with `|x| = r`, sampled.
fn f_r_sampled(h: &RadialTable, r: f64, big_r: f64, cosines: &[f64], radii: usize) -> f64 {
    let h0 = h.eval(r);
    let mut best = 0.0f64;
    for k in 1..=radii {
        let rho = big_r * k as f64 / radii as f64;
        for c in cosines {
            let d = (r * r + rho * rho - 2.0 * r * rho * c).max(0.0).sqrt();
            best = best.max((h.eval(d) - h0).abs());
        }
    }
    best
}

/// Same supremum via the exact range of distances `[|r−R|₊, r+R]`.
fn f_r_radial(h: &RadialTable, r: f64, big_r: f64) -> f64 {
    let lo = (r - big_r).max(0.0);
    let hi = r + big_r;
    let h0 = h.eval(r);
    let m = 400;
    let mut best = 0.0f64;
    let mut arg = lo;
    for k in 0..=m {
        let d = lo + (hi - lo) * k as f64 / m as f64;
        let v = (h.eval(d) - h0).abs();
        if v > best {
            best = v;
            arg = d;
        }
    }
    let step = (hi - lo) / m as f64;
    let (_, v) = crate::quad::golden_min(|d| -(h.eval(d) - h0).abs(), (arg - step).max(lo), (arg + step).min(hi), 1e-12 * hi);
    best.max(-v)
}

impl SoftPotentials {
    /// Builds the soft potentials with the default sampling.
    pub fn build(cutoff: CutoffFunction, r: f64, epsilon: f64) -> Result<Self, DysonError> {
        Self::build_with(cutoff, r, epsilon, SupSampling::default())
    }

    pub fn build_with(cutoff: CutoffFunction, r: f64, epsilon: f64, sampling: SupSampling) -> Result<Self, DysonError> {
        Self::assemble(cutoff, r, epsilon, |h, x| f_r_sampled(h, x, r, &sampling.cosines(), sampling.radii))
    }

    /// Builds `f_R` from the exact one-dimensional extremum over distances
    /// instead of sampling directions.
    pub fn build_radial(cutoff: CutoffFunction, r: f64, epsilon: f64) -> Result<Self, DysonError> {
        Self::assemble(cutoff, r, epsilon, |h, x| f_r_radial(h, x, r))
    }

    fn assemble<F>(cutoff: CutoffFunction, r: f64, epsilon: f64, sup: F) -> Result<Self, DysonError>
    where
        F: Fn(&RadialTable, f64) -> f64 + Sync,
    {
        let s = cutoff.s;
        if !(r.is_finite() && r > 0.0) || r > s {
            return Err(DysonError::InvalidParameter(format!("range R must lie in (0, s = {s}], got {r}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(DysonError::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let r_out = 24.0 * s;
        let h = h_table(&cutoff, r_out + 2.0 * r);
        let dr = (s / 32.0).min(r / 4.0);
        let count = (r_out / dr).ceil() as usize + 1;
        let radii: Vec<f64> = (0..count).map(|i| i as f64 * dr).collect();
        let f_r: Vec<f64> = radii.par_iter().map(|&x| sup(&h, x)).collect();
        let int_f_r = radial_integral(&radii, &f_r);
        let c = 2.0 / (PI * PI) * int_f_r;
        let w_r = f_r.iter().map(|f| c * f).collect();
        Ok(Self { cutoff, r, epsilon, h, radii, f_r, w_r, int_f_r })
    }

    pub fn cutoff(&self) -> CutoffFunction {
        self.cutoff
    }

    pub fn range(&self) -> f64 {
        self.r
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn h(&self, r: f64) -> f64 {
        self.h.eval(r)
    }

    /// `U_R(r) = 6R⁻³` on `2^{−1/3}R ≤ r ≤ R`, zero elsewhere.
    pub fn u_r(&self, r: f64) -> f64 {
        hat_potential(self.r, r)
    }

    /// Linear interpolation of `w_R`; zero beyond the sampled range.
    pub fn w_r_at(&self, r: f64) -> f64 {
        interp(&self.radii, &self.w_r, r)
    }

    pub fn f_r_at(&self, r: f64) -> f64 {
        interp(&self.radii, &self.f_r, r)
    }

    /// `∫ w_R = (2/π²)(∫ f_R)²`.
    pub fn int_w_r(&self) -> f64 {
        2.0 / (PI * PI) * self.int_f_r * self.int_f_r
    }

    /// `∫ U_R`, by Gauss–Legendre on the support shell.
    pub fn int_u_r(&self) -> f64 {
        integrate_hat(self.r)
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let dr = xs[1] - xs[0];
    let t = x / dr;
    let i = t.floor() as usize;
    if i + 1 >= xs.len() {
        return 0.0;
    }
    let f = t - i as f64;
    ys[i] * (1.0 - f) + ys[i + 1] * f
}

pub fn hat_potential(big_r: f64, r: f64) -> f64 {
    let inner = big_r * 2f64.powf(-1.0 / 3.0);
    if r >= inner && r <= big_r {
        6.0 / big_r.powi(3)
    } else {
        0.0
    }
}

pub fn integrate_hat(big_r: f64) -> f64 {
    let inner = big_r * 2f64.powf(-1.0 / 3.0);
    let (x, w) = gauss_legendre_on(inner, big_r, 4);
    x.iter().zip(&w).map(|(r, wt)| wt * 4.0 * PI * r * r * 6.0 / big_r.powi(3)).sum()
}

/// Fourier transform `∫ U_R(x) e^{−ik·x} dx` at `|k| = k`.
pub fn hat_transform(big_r: f64, k: f64) -> f64 {
    let inner = big_r * 2f64.powf(-1.0 / 3.0);
    let c = 24.0 * PI / big_r.powi(3);
    if k * big_r < 1e-3 {
        // Series of ∫ r² sin(kr)/(kr) dr to avoid cancellation.
        let m = |r: f64| r.powi(3) / 3.0 - k * k * r.powi(5) / 30.0 + k.powi(4) * r.powi(7) / 840.0;
        return c * (m(big_r) - m(inner));
    }
    let prim = |r: f64| ((k * r).sin() - k * r * (k * r).cos()) / k.powi(3);
    c * (prim(big_r) - prim(inner))
}

/// `∫ w_R` over a sweep of `R` at fixed cutoff and the fitted log-log slope.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WrScaling {
    pub ranges: Vec<f64>,
    pub integrals: Vec<f64>,
    pub slope: f64,
    /// `max ∫w_R / (R²/s²)` over the sweep.
    pub max_ratio: f64,
}

pub fn verify_wr_scaling(cutoff: CutoffFunction, ranges: &[f64]) -> Result<WrScaling, DysonError> {
    let s = cutoff.s;
    let (lo, hi) = ranges.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    if ranges.len() < 2 || hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(DysonError::InvalidParameter("R sweep must span at least one decade".into()));
    }
    let integrals = ranges
        .par_iter()
        .map(|&r| SoftPotentials::build(cutoff, r, 0.5).map(|sp| sp.int_w_r()))
        .collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = ranges.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = integrals.iter().map(|w| w.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    let max_ratio = ranges.iter().zip(&integrals).map(|(r, w)| w / (r * r / (s * s))).fold(0.0, f64::max);
    Ok(WrScaling { ranges: ranges.to_vec(), integrals, slope, max_ratio })
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Radial discretization for the single-center operator inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBox {
    pub length: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DysonLevel {
    pub points: usize,
    /// Lowest eigenvalue of `LHS − RHS` per angular momentum channel.
    pub min_eig: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DysonReport {
    /// Scattering length of `v_N` (for `−Δ + ½v_N`).
    pub a: f64,
    pub levels: Vec<DysonLevel>,
    pub min_eig: f64,
    pub slack: f64,
    /// Largest change of the minimum eigenvalue between successive levels.
    pub drift: f64,
    pub passed: bool,
}

/// `½ v`, so that the scattering length of `−Δ + ½v` can be read off with
/// the unit-mass convention.
fn halved(v: &RadialPotential) -> Result<RadialPotential, ScatteringError> {
    let shape = match v.shape() {
        Shape::Zero => Shape::Zero,
        Shape::Square { height } => Shape::Square { height: 0.5 * height },
        Shape::Tabulated { r, w } => Shape::Tabulated { r: r.clone(), w: w.iter().map(|x| 0.5 * x).collect() },
    };
    RadialPotential::new(v.range(), v.hard_core(), shape)
}

/// Scattering length of the pair interaction `v` in the kinetic convention
/// `−Δ + ½v`.
pub fn pair_scattering_length(v: &RadialPotential) -> Result<f64, DysonError> {
    Ok(scattering_length_with(&halved(v)?, 1e-12, Convention::UnitMass)?.a)
}

/// Lowest eigenvalue of
/// `|p|²χ(p)² + ½v − (1−ε)a U_R + (a/ε) w_R` in angular momentum channel
/// `l` on a radial box with Dirichlet walls. The kinetic part is a function
/// of the sine-basis Laplacian (exact spectrum `(kπ/L)²` in the `l = 0`
/// channel); a hard core removes the nodes it covers.
pub fn dyson_channel_min(
    v: &RadialPotential,
    a: f64,
    sp: &SoftPotentials,
    grid: RadialBox,
    l: usize,
) -> Result<f64, DysonError> {
    let m = grid.points;
    let len = grid.length;
    if m < 8 || !(len > 0.0) {
        return Err(DysonError::InvalidParameter("radial box needs at least 8 points and positive length".into()));
    }
    let n = m - 1;
    let h = len / m as f64;
    let r: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    let norm = (2.0 / m as f64).sqrt();
    let q = DMatrix::from_fn(n, n, |i, k| norm * (PI * ((i + 1) * (k + 1)) as f64 / m as f64).sin());
    let lam: Vec<f64> = (1..=n).map(|k| (k as f64 * PI / len).powi(2)).collect();
    let cutoff = sp.cutoff();
    let g = |lambda: f64| {
        let c = cutoff.chi(lambda.max(0.0).sqrt());
        lambda * c * c
    };
    let kinetic = if l == 0 {
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { g(lam[i]) } else { 0.0 });
        &q * d * q.transpose()
    } else {
        let mut t = &q * DMatrix::from_fn(n, n, |i, j| if i == j { lam[i] } else { 0.0 }) * q.transpose();
        let cf = (l * (l + 1)) as f64;
        for i in 0..n {
            t[(i, i)] += cf / (r[i] * r[i]);
        }
        let (vals, vecs) = symmetric_eigen(t);
        let gv = DMatrix::from_fn(n, n, |i, j| if i == j { g(vals[i]) } else { 0.0 });
        &vecs * gv * vecs.transpose()
    };
    let core = v.hard_core().unwrap_or(0.0);
    let keep: Vec<usize> = (0..n).filter(|&i| r[i] > core).collect();
    let eps = sp.epsilon();
    let mut d = DMatrix::from_fn(keep.len(), keep.len(), |i, j| kinetic[(keep[i], keep[j])]);
    for (i, &k) in keep.iter().enumerate() {
        let x = r[k];
        d[(i, i)] += 0.5 * v.value(x) - (1.0 - eps) * a * sp.u_r(x) + a / eps * sp.w_r_at(x);
    }
    let d = (&d + d.transpose()) * 0.5;
    let (vals, _) = symmetric_eigen(d);
    Ok(vals[0])
}

/// Checks the single-center Dyson inequality on successively refined radial
/// grids (`base.points`, doubled per level) for channels `l = 0, 1, 2`.
/// Passes when every minimum eigenvalue is at least
/// `−1e−6 · a · ‖U_R‖∞` and the drift between the two finest levels is
/// within the same slack.
pub fn check_dyson_inequality(
    v: &RadialPotential,
    sp: &SoftPotentials,
    base: RadialBox,
    levels: usize,
) -> Result<DysonReport, DysonError> {
    let a = pair_scattering_length(v)?;
    let jobs: Vec<(usize, usize)> = (0..levels).flat_map(|lv| (0..3).map(move |l| (lv, l))).collect();
    let mins = jobs
        .par_iter()
        .map(|&(lv, l)| {
            let grid = RadialBox { length: base.length, points: base.points << lv };
            dyson_channel_min(v, a, sp, grid, l)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let levels: Vec<DysonLevel> = (0..levels)
        .map(|lv| DysonLevel { points: base.points << lv, min_eig: mins[3 * lv..3 * lv + 3].to_vec() })
        .collect();
    let per_level: Vec<f64> = levels.iter().map(|l| l.min_eig.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let min_eig = per_level.iter().copied().fold(f64::INFINITY, f64::min);
    let drift = per_level.windows(2).map(|w| (w[1] - w[0]).abs()).last().unwrap_or(0.0);
    let slack = 1e-6 * a * 6.0 / sp.range().powi(3);
    let slack = slack.max(1e-10);
    let passed = min_eig >= -slack;
    Ok(DysonReport { a, levels, min_eig, slack, drift, passed })
}

/// `K₀` and its lowest eigenpairs.
#[derive(Clone, Debug)]
pub struct ModifiedOneBody {
    pub eta: f64,
    pub kappa: f64,
    pub operator: GridOperator,
    pub energies: Vec<f64>,
    pub modes: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub boundary_ratio: f64,
}

/// Initial block for grid eigensolves: Gaussians times low monomials,
/// lightly perturbed so that degenerate multiplets are not missed.
fn initial_block(grid: &Grid, count: usize, width: f64, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut exps: Vec<[i32; 3]> = Vec::new();
    'outer: for deg in 0..10 {
        for i in 0..=deg {
            for j in 0..=(deg - i) {
                let k = deg - i - j;
                if (dim < 3 && k != 0) || (dim < 2 && j != 0) {
                    continue;
                }
                exps.push([i, j, k]);
                if exps.len() >= count {
                    break 'outer;
                }
            }
        }
    }
    exps.into_iter()
        .map(|e| {
            grid.points()
                .map(|x| {
                    let r2: f64 = x.iter().map(|c| c * c).sum();
                    let poly = x[0].powi(e[0]) * x[1].powi(e[1]) * x[2].powi(e[2]);
                    let noise = 1e-3 * rng.gen_range(-1.0..1.0);
                    C64::new(poly * (-0.5 * r2 / width).exp() + noise, 0.0)
                })
                .collect()
        })
        .collect()
}

/// Lowest eigenpairs of a grid operator by preconditioned LOBPCG.
pub fn grid_eigenpairs(op: &GridOperator, wanted: usize, tol: f64) -> Result<EigenPairs, DysonError> {
    let grid = op.grid().clone();
    let guard = 2;
    let init = initial_block(&grid, wanted + guard, 1.0, 7);
    let umin = op.potential().iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = 1.0;
    // Symmetric potential-aware scaling around the kinetic inverse.
    let pv: Vec<f64> = op.potential().iter().map(|u| (sigma / (sigma + u - umin)).sqrt()).collect();
    let kin = op.kinetic().to_vec();
    let precond = |r: &[C64]| {
        let mut hat: Vec<C64> = r.iter().zip(&pv).map(|(x, s)| x * s).collect();
        crate::field::fft_in_place(&grid, &mut hat, Direction::Forward);
        for (x, k) in hat.iter_mut().zip(&kin) {
            *x /= sigma + k;
        }
        crate::field::fft_in_place(&grid, &mut hat, Direction::Inverse);
        hat.iter_mut().zip(&pv).for_each(|(x, s)| *x *= s);
        hat
    };
    let opts = LobpcgOptions { wanted, tol, max_iter: 2000 };
    Ok(lobpcg(|v: &[C64]| op.apply_values(v), Some(precond), init, &opts)?)
}

/// `κ(η) = inf spec[−ηΔ + 2p·A + η|x|⁴]` on the problem grid.
pub fn kappa(p: &GpProblem, eta: f64) -> Result<f64, DysonError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(DysonError::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let grid = p.grid();
    let gauge = GaugeField::new(grid, p.omega())?;
    let kinetic = grid.k_squared().iter().map(|k| eta * k).collect();
    let quartic = grid.sample(|x| eta * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powi(2));
    let op = GridOperator::new(grid, kinetic, Some(gauge), quartic)?;
    // Eigenvalue error is quadratic in the residual.
    let pairs = grid_eigenpairs(&op, 1, 1e-7)?;
    Ok(pairs.values[0])
}

/// Assembles `K₀ = (1−χ²)|p|² + 2η|p|² + 2p·A + |A|² + V + η|x|⁴ − κ(η)` on
/// the problem grid and returns its lowest `j` eigenpairs.
pub fn build_k0(p: &GpProblem, cutoff: &CutoffFunction, eta: f64, j: usize) -> Result<ModifiedOneBody, DysonError> {
    let kappa = kappa(p, eta)?;
    let grid = p.grid();
    let gauge = GaugeField::new(grid, p.omega())?;
    let a2 = gauge.magnitude_sqr();
    let kinetic: Vec<f64> = grid
        .k_squared()
        .iter()
        .map(|&k2| {
            let c = cutoff.chi(k2.sqrt());
            (1.0 - c * c) * k2 + 2.0 * eta * k2
        })
        .collect();
    let quartic = grid.sample(|x| eta * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powi(2));
    let potential = p
        .potential()
        .iter()
        .zip(&a2)
        .zip(&quartic)
        .map(|((v, a), q)| v + a + q - kappa)
        .collect();
    let operator = GridOperator::new(grid, kinetic, Some(gauge), potential)?;
    let pairs = grid_eigenpairs(&operator, j, 1e-7)?;
    // The cutoff makes the kinetic term nonlocal, so eigenvectors keep a
    // small tail of order (kernel tail)/potential at the walls. Only a tail
    // comparable to the bulk signals a box that is too small.
    let mut boundary_ratio = 0.0f64;
    for v in &pairs.vectors {
        boundary_ratio = boundary_ratio.max(crate::field::ComplexField::new(grid.clone(), v.clone())?.boundary_ratio());
    }
    if boundary_ratio > 1e-3 {
        return Err(DysonError::BoxTooSmall(boundary_ratio));
    }
    Ok(ModifiedOneBody {
        eta,
        kappa,
        operator,
        energies: pairs.values,
        modes: pairs.vectors,
        residuals: pairs.residuals,
        boundary_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_plateaus_and_monotone() {
        let c = CutoffFunction::new(0.5).unwrap();
        assert_eq!(c.chi(1.99), 0.0);
        assert_eq!(c.chi(2.0), 0.0);
        assert_eq!(c.chi(4.0), 1.0);
        assert_eq!(c.chi(-5.0), 1.0);
        let mut prev = 0.0;
        for k in 0..=400 {
            let v = c.chi(2.0 + 2.0 * k as f64 / 400.0);
            assert!((0.0..=1.0).contains(&v) && v >= prev);
            prev = v;
        }
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hat_transform_matches_quadrature() {
        let r = 0.3;
        assert!((hat_transform(r, 0.0) - 4.0 * PI).abs() < 1e-12);
        for k in [1e-4, 0.5, 7.0, 40.0] {
            let inner = r * 2f64.powf(-1.0 / 3.0);
            let (v, _) = crate::quad::integrate(
                |x| 4.0 * PI * x * x * 6.0 / r.powi(3) * sinc_and_derivative(k * x).0,
                inner,
                r,
                1e-15,
                1e-13,
            )
            .unwrap();
            assert!((hat_transform(r, k) - v).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn hat_integral_is_four_pi() {
        for r in [0.01, 0.3, 2.0] {
            assert!((integrate_hat(r) - 4.0 * PI).abs() < 1e-12);
            assert_eq!(hat_potential(r, 0.9 * r), 6.0 / r.powi(3));
            assert_eq!(hat_potential(r, 0.7 * r), 0.0);
        }
    }

    #[test]
    fn h_at_origin_matches_direct_quadrature() {
        let c = CutoffFunction::new(1.0).unwrap();
        let t = h_table(&c, 4.0);
        let (v, _) = crate::quad::integrate(|p| (1.0 - c.chi(p)) * p * p / (2.0 * PI * PI), 0.0, 2.0, 1e-14, 1e-13).unwrap();
        assert!((t.eval(0.0) - v).abs() < 1e-12);
        // Interpolation between nodes agrees with direct evaluation.
        let r = 1.2345;
        let (d, _) = crate::quad::integrate(
            |p| (1.0 - c.chi(p)) * p * p * (p * r).sin() / (p * r) / (2.0 * PI * PI),
            0.0,
            2.0,
            1e-14,
            1e-13,
        )
        .unwrap();
        assert!((t.eval(r) - d).abs() < 1e-8 * v);
    }

    #[test]
    fn soft_potentials_invariants() {
        let sp = SoftPotentials::build(CutoffFunction::new(1.0).unwrap(), 0.1, 0.5).unwrap();
        assert!(sp.f_r.iter().all(|&f| f >= 0.0));
        let c = 2.0 / (PI * PI) * sp.int_f_r;
        for (w, f) in sp.w_r.iter().zip(&sp.f_r) {
            assert!(*w >= 0.0 && (w - c * f).abs() <= 1e-15 * w.abs().max(1e-300));
        }
        let peak = sp.f_r.iter().copied().fold(0.0, f64::max);
        // Compact support of 1−χ only gives stretched-exponential decay.
        let tail = |r: f64| sp.radii.iter().zip(&sp.f_r).filter(|p| *p.0 >= r).map(|p| *p.1).fold(0.0, f64::max) / peak;
        assert!(tail(10.0) < 1e-2 && tail(20.0) < 1e-3 && tail(20.0) < 0.2 * tail(10.0));
    }

    #[test]
    fn sampled_sup_agrees_with_radial_extremum() {
        let c = CutoffFunction::new(1.0).unwrap();
        let a = SoftPotentials::build(c, 0.2, 0.5).unwrap();
        let b = SoftPotentials::build_with(c, 0.2, 0.5, SupSampling::default().refined()).unwrap();
        let e = SoftPotentials::build_radial(c, 0.2, 0.5).unwrap();
        assert!((a.int_f_r - b.int_f_r).abs() < 0.01 * b.int_f_r);
        assert!((b.int_f_r - e.int_f_r).abs() < 0.01 * e.int_f_r);
        assert!(a.int_f_r <= e.int_f_r * (1.0 + 1e-9));
    }

    #[test]
    fn wr_integral_depends_on_ratio_only() {
        let a = SoftPotentials::build(CutoffFunction::new(1.0).unwrap(), 0.1, 0.5).unwrap().int_w_r();
        let b = SoftPotentials::build(CutoffFunction::new(2.0).unwrap(), 0.1, 0.5).unwrap().int_w_r();
        let c = SoftPotentials::build(CutoffFunction::new(1.0).unwrap(), 0.05, 0.5).unwrap().int_w_r();
        assert!((a / b - 4.0).abs() < 0.4, "{}", a / b);
        assert!((b - c).abs() < 0.02 * c);
    }

    #[test]
    fn rejects_range_beyond_cutoff_scale() {
        assert!(SoftPotentials::build(CutoffFunction::new(1.0).unwrap(), 2.0, 0.5).is_err());
        assert!(verify_wr_scaling(CutoffFunction::new(1.0).unwrap(), &[0.05, 0.1]).is_err());
    }

    #[test]
    fn free_kinetic_is_positive() {
        let sp = SoftPotentials::build(CutoffFunction::new(1.0).unwrap(), 0.2, 0.5).unwrap();
        let v = RadialPotential::new(0.01, None, Shape::Zero).unwrap();
        for l in 0..3 {
            let m = dyson_channel_min(&v, 0.0, &sp, RadialBox { length: 4.0, points: 128 }, l).unwrap();
            assert!(m >= -1e-10, "l={l}: {m}");
        }
    }

    #[test]
    fn kappa_is_linear_in_eta_without_rotation() {
        let p = GpProblem::harmonic(Grid::new(2, 48, 8.0).unwrap(), [0.0; 3], 0.0).unwrap();
        let k1 = kappa(&p, 1.0).unwrap();
        for eta in [0.3, 2.5] {
            assert!((kappa(&p, eta).unwrap() - eta * k1).abs() < 1e-9 * eta * k1);
        }
        assert!(kappa(&p, 0.0).is_err());
    }

    #[test]
    fn k0_is_nonnegative_with_ordered_spectrum() {
        let p = GpProblem::harmonic(Grid::new(2, 48, 10.0).unwrap(), [0.0, 0.0, -0.7], 1.0).unwrap();
        let k = build_k0(&p, &CutoffFunction::new(1.0).unwrap(), 0.5, 5).unwrap();
        assert!(k.energies[0] >= -1e-8);
        assert!(k.energies.windows(2).all(|w| w[1] > w[0]), "{:?}", k.energies);
    }

    #[test]
    fn inequality_needs_the_hard_core() {
        let sp = SoftPotentials::build(CutoffFunction::new(1.0).unwrap(), 0.2, 0.5).unwrap();
        let grid = RadialBox { length: 4.0, points: 200 };
        let hard = RadialPotential::hard_sphere(0.04).unwrap();
        assert!(dyson_channel_min(&hard, 0.04, &sp, grid, 0).unwrap() >= 0.0);
        // Same coupling without the core it is supposed to come from.
        let none = RadialPotential::new(0.04, None, Shape::Zero).unwrap();
        assert!(dyson_channel_min(&none, 0.04, &sp, grid, 0).unwrap() < -1e-3);
    }

    #[test]
    fn pair_length_of_soft_barrier_uses_half_the_potential() {
        let v = RadialPotential::square(1.0, 4.0).unwrap();
        let a = pair_scattering_length(&v).unwrap();
        assert!((a - crate::scattering::square_barrier_length(1.0, 1.0)).abs() < 1e-9);
    }
}
