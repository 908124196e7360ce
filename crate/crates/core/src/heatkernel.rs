//! Diagonal bounds for the heat kernel `e^{α(Δ−V)}` of a confining
//! Schrödinger operator, weighted traces, and the bound for a rank-one
//! perturbation, together with brute-force kernels from dense
//! eigendecompositions.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{gauss_legendre, golden_min, integrate, QuadError};

#[derive(Debug, Error)]
pub enum HeatError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension {0} is not supported (use 1 or 3)")]
    Dimension(usize),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("box too small: kernel diagonal drifts by {0:.3e} when the box is doubled")]
    BoundaryContamination(f64),
}

/// Radial confining potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConfiningPotential {
    Zero,
    /// `ω²|x|²`.
    Harmonic { omega: f64 },
    /// `C₁ ln(1 + |x|)`; `c2` is the constant of the growth condition
    /// `V ≥ C₁ ln|x| − C₂`.
    LogGrowth { c1: f64, c2: f64 },
    /// Samples `V(r)` on increasing radii, linear in between and linearly
    /// extrapolated beyond the last sample.
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

impl ConfiningPotential {
    pub fn harmonic() -> Self {
        Self::Harmonic { omega: 1.0 }
    }

    pub fn log_growth(c1: f64, c2: f64) -> Result<Self, HeatError> {
        let p = Self::LogGrowth { c1, c2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HeatError> {
        match self {
            Self::Zero => Ok(()),
            Self::Harmonic { omega } if omega.is_finite() && *omega > 0.0 => Ok(()),
            Self::Harmonic { omega } => Err(HeatError::InvalidParameter(format!("ω must be positive, got {omega}"))),
            Self::LogGrowth { c1, c2 } if *c1 > 0.0 && *c2 >= 0.0 && c1.is_finite() && c2.is_finite() => Ok(()),
            Self::LogGrowth { c1, c2 } => {
                Err(HeatError::InvalidParameter(format!("need C₁ > 0 and C₂ ≥ 0, got {c1}, {c2}")))
            }
            Self::Tabulated { r, v } => {
                if r.len() < 2 || r.len() != v.len() {
                    return Err(HeatError::InvalidParameter("tabulated potential needs ≥ 2 matching samples".into()));
                }
                if r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(HeatError::InvalidParameter("radii must start at 0 and increase".into()));
                }
                if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(HeatError::InvalidParameter("potential must be finite and nonnegative".into()));
                }
                let n = r.len();
                if v[n - 1] < v[n - 2] {
                    return Err(HeatError::InvalidParameter("tabulated potential must not decrease at the edge".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        match self {
            Self::Zero => 0.0,
            Self::Harmonic { omega } => omega * omega * r * r,
            Self::LogGrowth { c1, .. } => c1 * r.ln_1p(),
            Self::Tabulated { r: rs, v } => {
                let n = rs.len();
                let i = match rs.partition_point(|&x| x <= r) {
                    0 => 0,
                    k if k >= n => n - 2,
                    k => k - 1,
                };
                let t = (r - rs[i]) / (rs[i + 1] - rs[i]);
                v[i] + t * (v[i + 1] - v[i])
            }
        }
    }

    /// Radii where `V` has a kink.
    fn kinks(&self) -> Vec<f64> {
        match self {
            Self::LogGrowth { .. } => vec![0.0],
            Self::Tabulated { r, .. } => r.clone(),
            _ => Vec::new(),
        }
    }
}

fn check_dim(dim: usize) -> Result<(), HeatError> {
    if dim == 1 || dim == 3 {
        Ok(())
    } else {
        Err(HeatError::Dimension(dim))
    }
}

/// Free heat kernel `j_t(r) = (4πt)^{−d/2} e^{−r²/4t}`.
pub fn free_kernel(t: f64, r: f64, dim: usize) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

const TABLE_POINTS: usize = 4096;

/// The averaged kernel `h_α = (2/α)∫₀^{α/4} (1 − 4t/α)^{−1/2} j_t dt`.
///
/// With `t = (α/4) sin²θ` the weight becomes `sin θ dθ` on `[0, π/2]` and
/// both endpoint singularities disappear. The profile is tabulated on
/// `[0, r_max]`: in one dimension `h_α` itself, in three dimensions the
/// cumulative `H(s) = ∫₀ˢ σ h_α(σ) dσ`, which stays bounded at the origin.
#[derive(Clone, Debug)]
pub struct HeatProfile {
    alpha: f64,
    dim: usize,
    r_max: f64,
    dr: f64,
    table: Vec<f64>,
    derivs: Vec<f64>,
}

impl HeatProfile {
    pub fn new(alpha: f64, dim: usize) -> Result<Self, HeatError> {
        check_dim(dim)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(HeatError::InvalidParameter(format!("α must be positive, got {alpha}")));
        }
        let r_max = (40.0 * alpha).sqrt();
        let dr = r_max / (TABLE_POINTS - 1) as f64;
        let table = (0..TABLE_POINTS)
            .into_par_iter()
            .map(|i| tabulated_quantity(alpha, dim, i as f64 * dr))
            .collect::<Result<Vec<f64>, HeatError>>()?;
        let derivs = finite_difference(&table, dr);
        Ok(Self { alpha, dim, r_max, dr, table, derivs })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radius beyond which `h_α` is below `e^{−40}` of its scale.
    pub fn radius_max(&self) -> f64 {
        self.r_max
    }

    /// `h_α(r)` by adaptive quadrature over the angle; infinite at `r = 0`
    /// in three dimensions.
    pub fn value(&self, r: f64) -> Result<f64, HeatError> {
        let r = r.abs();
        let a = self.alpha;
        let q = |th: f64| {
            let s = th.sin();
            if s == 0.0 {
                0.0
            } else {
                (-r * r / (a * s * s)).exp()
            }
        };
        match self.dim {
            1 => Ok((PI * a).powf(-0.5) * integrate(q, 0.0, FRAC_PI_2, 1e-15, 1e-12)?.0),
            _ if r == 0.0 => Ok(f64::INFINITY),
            _ => {
                let g = |th: f64| {
                    let s = th.sin();
                    if s == 0.0 {
                        0.0
                    } else {
                        q(th) / (s * s)
                    }
                };
                Ok((PI * a).powf(-1.5) * integrate(g, 0.0, FRAC_PI_2, 1e-300, 1e-12)?.0)
            }
        }
    }

    /// `∫h_α` over the whole space.
    pub fn integral(&self) -> Result<f64, HeatError> {
        let f = |r: f64| match self.dim {
            1 => 2.0 * self.value(r).unwrap_or(f64::NAN),
            _ => 4.0 * PI * r * r * self.value(r).unwrap_or(f64::NAN),
        };
        let mut total = 0.0;
        let edges = [0.0, 0.25 * self.r_max, 0.5 * self.r_max, self.r_max, 1.5 * self.r_max];
        for w in edges.windows(2) {
            total += integrate(f, w[0], w[1], 1e-14, 1e-12)?.0;
        }
        Ok(total)
    }

    /// `(r, h_α(r))` on `points` equally spaced radii in `(0, r_max]`.
    pub fn samples(&self, points: usize) -> Result<Vec<(f64, f64)>, HeatError> {
        (1..=points)
            .map(|i| {
                let r = self.r_max * i as f64 / points as f64;
                Ok((r, self.value(r)?))
            })
            .collect()
    }

    /// Tabulated quantity (`h_α` in 1D, `H` in 3D) by Hermite interpolation.
    fn table_eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.r_max {
            return self.table[TABLE_POINTS - 1];
        }
        let x = r / self.dr;
        let i = (x.floor() as usize).min(TABLE_POINTS - 2);
        let t = x - i as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t).powi(2),
            t * (1.0 - t).powi(2),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        h00 * self.table[i] + h10 * self.dr * self.derivs[i] + h01 * self.table[i + 1] + h11 * self.dr * self.derivs[i + 1]
    }

    /// `(e^{−αV} * h_α)(x)` at radius `r`, by direct quadrature.
    pub fn convolve(&self, v: &ConfiningPotential, r: f64) -> f64 {
        let a = self.alpha;
        let f = |y: f64| (-a * v.value(y)).exp();
        let r = r.abs();
        let rm = self.r_max;
        if self.dim == 1 {
            let mut cuts = vec![r - rm, r, r + rm];
            cuts.extend(v.kinks().iter().flat_map(|&k| [k, -k]).filter(|&k| k > r - rm && k < r + rm));
            piecewise(&mut cuts, |y| f(y) * self.table_eval(r - y))
        } else if r < 1e-9 * rm {
            // Limit r → 0 of the shell formula: 4π ∫ρ f(ρ) H'(ρ) dρ.
            let mut cuts = vec![0.0, rm];
            cuts.extend(v.kinks().into_iter().filter(|&k| k > 0.0 && k < rm));
            4.0 * PI * piecewise(&mut cuts, |p| p * f(p) * self.table_deriv(p))
        } else {
            let far = self.table[TABLE_POINTS - 1];
            let mut cuts = vec![(r - rm).max(0.0), r, r + rm];
            if rm > r {
                cuts.push(rm - r);
            }
            cuts.extend(v.kinks().into_iter().filter(|&k| k > r - rm && k < r + rm && k > 0.0));
            let g = |p: f64| {
                let hi = if r + p >= rm { far } else { self.table_eval(r + p) };
                p * f(p) * (hi - self.table_eval(r - p))
            };
            2.0 * PI / r * piecewise(&mut cuts, g)
        }
    }

    fn table_deriv(&self, r: f64) -> f64 {
        if r >= self.r_max {
            return 0.0;
        }
        let x = r / self.dr;
        let i = (x.floor() as usize).min(TABLE_POINTS - 2);
        let t = x - i as f64;
        // Derivative of the Hermite interpolant.
        let (d00, d10, d01, d11) = (6.0 * t * t - 6.0 * t, 3.0 * t * t - 4.0 * t + 1.0, -6.0 * t * t + 6.0 * t, 3.0 * t * t - 2.0 * t);
        (d00 * self.table[i] + d01 * self.table[i + 1]) / self.dr + d10 * self.derivs[i] + d11 * self.derivs[i + 1]
    }
}

/// Composite Gauss–Legendre over the sorted breakpoints.
fn piecewise<F: Fn(f64) -> f64>(cuts: &mut Vec<f64>, f: F) -> f64 {
    const PANELS: usize = 24;
    let (x, w) = gauss_legendre(10);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut sum = 0.0;
    for seg in cuts.windows(2) {
        let width = (seg[1] - seg[0]) / PANELS as f64;
        for p in 0..PANELS {
            let mid = seg[0] + (p as f64 + 0.5) * width;
            sum += 0.5 * width * x.iter().zip(&w).map(|(t, wt)| wt * f(mid + 0.5 * width * t)).sum::<f64>();
        }
    }
    sum
}

fn tabulated_quantity(alpha: f64, dim: usize, r: f64) -> Result<f64, HeatError> {
    let q = move |th: f64| {
        let s = th.sin();
        if s == 0.0 {
            0.0
        } else {
            (-r * r / (alpha * s * s)).exp()
        }
    };
    if dim == 1 {
        Ok((PI * alpha).powf(-0.5) * integrate(q, 0.0, FRAC_PI_2, 1e-16, 1e-13)?.0)
    } else {
        let g = move |th: f64| 1.0 - q(th);
        Ok(integrate(g, 0.0, FRAC_PI_2, 1e-16, 1e-13)?.0 / (2.0 * PI.powf(1.5) * alpha.sqrt()))
    }
}

/// Fourth-order finite differences, one-sided near the ends.
fn finite_difference(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h)
            } else if i < 2 {
                (-25.0 * y[i] + 48.0 * y[i + 1] - 36.0 * y[i + 2] + 16.0 * y[i + 3] - 3.0 * y[i + 4]) / (12.0 * h)
            } else {
                (25.0 * y[i] - 48.0 * y[i - 1] + 36.0 * y[i - 2] - 16.0 * y[i - 3] + 3.0 * y[i - 4]) / (12.0 * h)
            }
        })
        .collect()
}

/// `(4πα)^{−d/2} (e^{−αV} * h_α)(r)`.
pub fn diag_bound(profile: &HeatProfile, v: &ConfiningPotential, r: f64) -> f64 {
    (4.0 * PI * profile.alpha).powf(-(profile.dim as f64) / 2.0) * profile.convolve(v, r)
}

/// Discretization of the brute-force kernel.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BruteOptions {
    /// Half-width of the box (1D) or radius of the ball (3D).
    pub half_length: f64,
    /// Interior grid points; rounded up to an odd number in 1D.
    pub points: usize,
    /// Recompute on a box of twice the size and fail on drift.
    pub check_drift: bool,
}

impl Default for BruteOptions {
    fn default() -> Self {
        Self { half_length: 8.0, points: 255, check_drift: true }
    }
}

/// Sine-basis kinetic matrix `S diag((kπ/ℓ)²) S` on `n` interior points of
/// an interval of length `ℓ` with Dirichlet ends.
fn sine_kinetic(n: usize, length: f64) -> DMatrix<f64> {
    let s = DMatrix::from_fn(n, n, |i, k| {
        (2.0 / (n + 1) as f64).sqrt() * (((i + 1) * (k + 1)) as f64 * PI / (n + 1) as f64).sin()
    });
    let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |k, _| ((k + 1) as f64 * PI / length).powi(2)));
    &s * lam * &s
}

/// Kernel of `e^{−α(−Δ + V + K)}` on a 1D grid, `K = |φ⟩⟨φ|`.
#[derive(Clone, Debug)]
pub struct GridKernel {
    pub x: Vec<f64>,
    pub kernel: DMatrix<f64>,
}

impl GridKernel {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.x.len()).map(|i| self.kernel[(i, i)]).collect()
    }
}

fn grid_kernel_once(
    v: &ConfiningPotential,
    alpha: f64,
    half_length: f64,
    n: usize,
    rank_one: Option<&dyn Fn(f64) -> f64>,
) -> GridKernel {
    let dx = 2.0 * half_length / (n + 1) as f64;
    let x: Vec<f64> = (1..=n).map(|i| -half_length + i as f64 * dx).collect();
    let mut h = sine_kinetic(n, 2.0 * half_length);
    for (i, xi) in x.iter().enumerate() {
        h[(i, i)] += v.value(*xi);
    }
    if let Some(phi) = rank_one {
        let p: Vec<f64> = x.iter().map(|&xi| phi(xi)).collect();
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += dx * p[i] * p[j];
            }
        }
    }
    let eig = SymmetricEigen::new(h);
    let weights = eig.eigenvalues.map(|l| (-alpha * l).exp() / dx);
    let q = &eig.eigenvectors;
    let kernel = q * DMatrix::from_diagonal(&weights) * q.transpose();
    GridKernel { x, kernel }
}

/// Brute-force kernel on `[−L, L]`, optionally with a rank-one term.
pub fn grid_kernel_1d(
    v: &ConfiningPotential,
    alpha: f64,
    opts: &BruteOptions,
    rank_one: Option<&dyn Fn(f64) -> f64>,
) -> Result<GridKernel, HeatError> {
    v.validate()?;
    if !(alpha > 0.0) || !(opts.half_length > 0.0) || opts.points < 3 {
        return Err(HeatError::InvalidParameter("need α > 0, L > 0 and at least 3 points".into()));
    }
    let n = opts.points | 1;
    let k = grid_kernel_once(v, alpha, opts.half_length, n, rank_one);
    if opts.check_drift {
        // Twice the box at the same spacing; the old grid sits at offset (n+1)/2.
        let big = grid_kernel_once(v, alpha, 2.0 * opts.half_length, 2 * n + 1, rank_one);
        let off = (n + 1) / 2;
        let scale = k.kernel.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let inner: Vec<usize> = (0..n).filter(|&i| k.x[i].abs() <= 0.5 * opts.half_length).collect();
        let mut drift = 0.0f64;
        for &i in &inner {
            for &j in &inner {
                drift = drift.max((k.kernel[(i, j)] - big.kernel[(i + off, j + off)]).abs());
            }
        }
        let drift = drift / scale;
        if drift > 1e-8 {
            return Err(HeatError::BoundaryContamination(drift));
        }
    }
    Ok(k)
}

/// Brute-force diagonal in three dimensions for a radial potential: sum over
/// angular momenta of radial sine-basis spectral sums on a ball.
pub fn brute_diag_radial(v: &ConfiningPotential, alpha: f64, opts: &BruteOptions) -> Result<(Vec<f64>, Vec<f64>), HeatError> {
    v.validate()?;
    if !(alpha > 0.0) || !(opts.half_length > 0.0) || opts.points < 3 {
        return Err(HeatError::InvalidParameter("need α > 0, R > 0 and at least 3 points".into()));
    }
    let n = opts.points;
    let big_r = opts.half_length;
    let dr = big_r / (n + 1) as f64;
    let r: Vec<f64> = (1..=n).map(|i| i as f64 * dr).collect();
    let kin = sine_kinetic(n, big_r);
    let channel = |l: usize| -> Vec<f64> {
        let mut h = kin.clone();
        for (i, ri) in r.iter().enumerate() {
            h[(i, i)] += (l * (l + 1)) as f64 / (ri * ri) + v.value(*ri);
        }
        let eig = SymmetricEigen::new(h);
        (0..n)
            .map(|i| {
                let s: f64 = (0..n).map(|k| (-alpha * eig.eigenvalues[k]).exp() * eig.eigenvectors[(i, k)].powi(2)).sum();
                (2 * l + 1) as f64 * s / (4.0 * PI * r[i] * r[i] * dr)
            })
            .collect()
    };
    let mut diag = vec![0.0; n];
    for l in 0..400 {
        let c = channel(l);
        let mut rel = 0.0f64;
        for i in 0..n {
            diag[i] += c[i];
            if r[i] <= 0.5 * big_r {
                rel = rel.max(c[i] / diag[i]);
            }
        }
        if rel < 1e-13 {
            break;
        }
    }
    Ok((r, diag))
}

/// Tabulated bound and brute-force diagonal.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelBound {
    pub alpha: f64,
    pub dim: usize,
    /// `(r, h_α(r))` samples.
    pub h_alpha: Vec<(f64, f64)>,
    pub points: Vec<f64>,
    pub bound_diag: Vec<f64>,
    pub brute_diag: Vec<f64>,
}

impl KernelBound {
    /// `max (brute − bound)`; nonpositive when the bound dominates.
    pub fn max_violation(&self) -> f64 {
        self.brute_diag.iter().zip(&self.bound_diag).map(|(b, u)| b - u).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest ratio `bound / brute` over points where the brute diagonal
    /// exceeds `floor`.
    pub fn min_ratio(&self, floor: f64) -> f64 {
        self.brute_diag
            .iter()
            .zip(&self.bound_diag)
            .filter(|(b, _)| **b > floor)
            .map(|(b, u)| u / b)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn kernel_bound(v: &ConfiningPotential, alpha: f64, dim: usize, opts: &BruteOptions) -> Result<KernelBound, HeatError> {
    let profile = HeatProfile::new(alpha, dim)?;
    let (points, brute_diag) = match dim {
        1 => {
            let k = grid_kernel_1d(v, alpha, opts, None)?;
            let d = k.diagonal();
            (k.x, d)
        }
        _ => brute_diag_radial(v, alpha, opts)?,
    };
    let bound_diag = points.par_iter().map(|&x| diag_bound(&profile, v, x)).collect();
    Ok(KernelBound { alpha, dim, h_alpha: profile.samples(64)?, points, bound_diag, brute_diag })
}

/// Result of integrating `|x|^s` against the diagonal bound on growing
/// domains.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub value: f64,
    pub converged: bool,
    /// `(L, ∫_{|x|≤L})` after each doubling.
    pub history: Vec<(f64, f64)>,
}

/// `∫|x|^s diag_bound(x) dx` over `|x| ≤ L` with `L` doubled from
/// `initial` up to `doublings` times. Converged when a doubling changes the
/// value by at most 1%; otherwise the report certifies divergence.
pub fn weighted_trace(
    v: &ConfiningPotential,
    alpha: f64,
    s: f64,
    dim: usize,
    initial: f64,
    doublings: usize,
) -> Result<TraceReport, HeatError> {
    v.validate()?;
    if !(s >= 0.0) || !(initial > 0.0) {
        return Err(HeatError::InvalidParameter("need s ≥ 0 and a positive initial radius".into()));
    }
    let profile = HeatProfile::new(alpha, dim)?;
    let shell = |r: f64| {
        let w = match dim {
            1 => 2.0,
            _ => 4.0 * PI * r * r,
        };
        w * r.powf(s) * diag_bound(&profile, v, r)
    };
    let segment = |a: f64, b: f64| -> f64 {
        let (x, w) = gauss_legendre(10);
        let panels = 16;
        let width = (b - a) / panels as f64;
        (0..panels)
            .into_par_iter()
            .map(|p| {
                let mid = a + (p as f64 + 0.5) * width;
                0.5 * width * x.iter().zip(&w).map(|(t, wt)| wt * shell(mid + 0.5 * width * t)).sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    };
    let mut l = initial;
    let mut total = segment(0.0, l);
    let mut history = vec![(l, total)];
    let mut converged = false;
    for _ in 0..doublings {
        let add = segment(l, 2.0 * l);
        l *= 2.0;
        let growth = add / total;
        total += add;
        history.push((l, total));
        if growth.abs() <= 0.01 {
            converged = true;
            break;
        }
    }
    Ok(TraceReport { value: total, converged, history })
}

/// Rank-one perturbation `K = |Φ⟩⟨Φ|` with `Φ(x) = √B e^{−D|x|}` in one
/// dimension.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RankOne {
    pub b: f64,
    pub d: f64,
}

impl RankOne {
    pub fn phi(&self, x: f64) -> f64 {
        self.b.sqrt() * (-self.d * x.abs()).exp()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.b / self.d
    }

    /// `(j_t * Φ)(x)` for the 1D free kernel.
    pub fn smoothed(&self, t: f64, x: f64) -> f64 {
        let x = x.abs();
        if t <= 0.0 {
            return self.phi(x);
        }
        let (d, st) = (self.d, t.sqrt());
        let term = |sign: f64| {
            let e = libm::erfc((2.0 * d * t + sign * x) / (2.0 * st));
            if e == 0.0 {
                0.0
            } else {
                (d * d * t + sign * d * x).exp() * e
            }
        };
        0.5 * self.b.sqrt() * (term(-1.0) + term(1.0))
    }

    /// `ξ_α(x) = ‖Φ‖⁻¹ sup_{0<t<α} (j_t * Φ)(x)`.
    pub fn xi(&self, alpha: f64, x: f64) -> f64 {
        if self.b == 0.0 {
            return 0.0;
        }
        const SAMPLES: usize = 200;
        let ts: Vec<f64> = (0..=SAMPLES).map(|k| alpha * (k as f64 / SAMPLES as f64).powi(2)).collect();
        let (k_best, best) =
            ts.iter().map(|&t| self.smoothed(t, x)).enumerate().fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        let lo = ts[k_best.saturating_sub(1)];
        let hi = ts[(k_best + 1).min(SAMPLES)];
        let refined = if hi > lo { -golden_min(|t| -self.smoothed(t, x), lo, hi, 1e-12 * alpha).1 } else { best };
        best.max(refined) / self.norm_sqr().sqrt()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbedReport {
    pub max_violation: f64,
    pub slack: f64,
    pub passed: bool,
    pub xi: Vec<(f64, f64)>,
}

/// Compares `|e^{α(Δ−V−K)}(x,y)|` with
/// `e^{α(Δ−V)}(x,y) + (e^{α‖Φ‖²} − 1) ξ_α(x) ξ_α(y)` on the grid.
pub fn perturbed_bound_check(
    v: &ConfiningPotential,
    alpha: f64,
    k: RankOne,
    opts: &BruteOptions,
) -> Result<PerturbedReport, HeatError> {
    if !(k.b >= 0.0) || !(k.d > 0.0) {
        return Err(HeatError::InvalidParameter("need B ≥ 0 and D > 0".into()));
    }
    let free = grid_kernel_1d(v, alpha, opts, None)?;
    let phi = |x: f64| k.phi(x);
    let pert = grid_kernel_1d(v, alpha, opts, Some(&phi))?;
    let xi: Vec<f64> = free.x.par_iter().map(|&x| k.xi(alpha, x)).collect();
    let amp = (alpha * k.norm_sqr()).exp_m1();
    let n = free.x.len();
    let scale = free.kernel.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let bound = free.kernel[(i, j)] + amp * xi[i] * xi[j];
            worst = worst.max(pert.kernel[(i, j)].abs() - bound);
        }
    }
    let slack = 1e-10 * scale;
    Ok(PerturbedReport {
        max_violation: worst,
        slack,
        passed: worst <= slack,
        xi: free.x.iter().copied().zip(xi).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mehler(alpha: f64, x: f64) -> f64 {
        (2.0 * PI * (2.0 * alpha).sinh()).powf(-0.5) * (-x * x * alpha.tanh()).exp()
    }

    #[test]
    fn profile_matches_closed_forms() {
        for alpha in [0.3, 1.0, 4.0] {
            let p1 = HeatProfile::new(alpha, 1).unwrap();
            let p3 = HeatProfile::new(alpha, 3).unwrap();
            for r in [0.0, 0.01, 0.3, 1.0, 2.5] {
                let exact1 = PI.sqrt() / (2.0 * alpha.sqrt()) * libm::erfc(r / alpha.sqrt());
                assert!((p1.value(r).unwrap() - exact1).abs() < 1e-11 * exact1.max(1e-3));
                assert!((p1.table_eval(r) - exact1).abs() < 1e-10);
                let big_h = libm::erf(r / alpha.sqrt()) / (4.0 * (PI * alpha).sqrt());
                assert!((p3.table_eval(r) - big_h).abs() < 1e-10);
                if r > 0.0 {
                    let exact3 = (-r * r / alpha).exp() / (2.0 * PI * alpha * r);
                    assert!((p3.value(r).unwrap() - exact3).abs() < 1e-10 * exact3);
                }
            }
        }
    }

    #[test]
    fn profile_is_normalized_and_nonnegative() {
        for dim in [1, 3] {
            for alpha in [0.1, 1.0, 10.0] {
                let p = HeatProfile::new(alpha, dim).unwrap();
                assert!((p.integral().unwrap() - 1.0).abs() < 1e-8, "dim {dim} α {alpha}");
                assert!(p.samples(32).unwrap().iter().all(|(_, h)| *h >= 0.0));
            }
        }
        assert!(HeatProfile::new(1.0, 2).is_err());
        assert!(HeatProfile::new(0.0, 1).is_err());
    }

    #[test]
    fn gaussian_tail() {
        let alpha = 0.5;
        let p = HeatProfile::new(alpha, 3).unwrap();
        for r in [3.0, 4.0] {
            let ratio = p.value(r).unwrap().ln() / (-r * r / alpha);
            assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
        }
    }

    #[test]
    fn free_case_is_exact() {
        for dim in [1, 3] {
            let p = HeatProfile::new(0.7, dim).unwrap();
            let free = (4.0 * PI * 0.7f64).powf(-(dim as f64) / 2.0);
            for r in [0.0, 0.4, 3.0] {
                assert!((diag_bound(&p, &ConfiningPotential::Zero, r) / free - 1.0).abs() < 1e-9);
            }
        }
        let opts = BruteOptions { half_length: 8.0, points: 127, check_drift: false };
        let k = grid_kernel_1d(&ConfiningPotential::Zero, 0.7, &opts, None).unwrap();
        let mid = k.x.len() / 2;
        assert!((k.kernel[(mid, mid)] - (4.0 * PI * 0.7f64).powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn brute_force_reproduces_mehler() {
        let opts = BruteOptions { half_length: 7.0, points: 127, check_drift: true };
        let k = grid_kernel_1d(&ConfiningPotential::harmonic(), 1.0, &opts, None).unwrap();
        for (x, d) in k.x.iter().zip(k.diagonal()) {
            assert!((d - mehler(1.0, *x)).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn bound_dominates_harmonic_diagonal() {
        let opts = BruteOptions { half_length: 7.0, points: 95, check_drift: false };
        let kb = kernel_bound(&ConfiningPotential::harmonic(), 1.0, 1, &opts).unwrap();
        assert!(kb.max_violation() <= 0.0);
        for (x, b) in kb.points.iter().zip(&kb.bound_diag) {
            assert!(*b >= mehler(1.0, *x));
        }
    }

    #[test]
    fn drift_detects_small_box() {
        let opts = BruteOptions { half_length: 2.0, points: 63, check_drift: true };
        let err = grid_kernel_1d(&ConfiningPotential::Zero, 1.0, &opts, None).unwrap_err();
        assert!(matches!(err, HeatError::BoundaryContamination(_)));
    }

    #[test]
    fn radial_brute_matches_product_mehler() {
        let opts = BruteOptions { half_length: 6.0, points: 120, check_drift: false };
        let (r, d) = brute_diag_radial(&ConfiningPotential::harmonic(), 1.0, &opts).unwrap();
        for (ri, di) in r.iter().zip(&d).filter(|(r, _)| **r > 0.3 && **r < 3.0) {
            let exact = mehler(1.0, 0.0).powi(2) * mehler(1.0, *ri);
            assert!((di / exact - 1.0).abs() < 1e-4, "{ri}: {di} vs {exact}");
        }
    }

    #[test]
    fn xi_is_radially_nonincreasing() {
        let k = RankOne { b: 1.0, d: 1.0 };
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let x = 0.2 * i as f64;
            let v = k.xi(1.0, x);
            assert!(v >= 0.0 && v <= prev + 1e-14, "{x}");
            prev = v;
        }
        // Smoothing preserves the mass of Φ.
        let mass = integrate(|x| 2.0 * k.smoothed(0.3, x), 0.0, 40.0, 1e-13, 1e-12).unwrap().0;
        assert!((mass - 2.0 * k.b.sqrt() / k.d).abs() < 1e-9);
    }

    #[test]
    fn zero_perturbation_reduces_to_free_kernel() {
        let opts = BruteOptions { half_length: 7.0, points: 63, check_drift: false };
        let rep = perturbed_bound_check(&ConfiningPotential::harmonic(), 1.0, RankOne { b: 0.0, d: 1.0 }, &opts).unwrap();
        assert!(rep.max_violation.abs() < 1e-14);
    }

    #[test]
    fn tabulated_potential_interpolates() {
        let v = ConfiningPotential::Tabulated { r: vec![0.0, 1.0, 2.0], v: vec![0.0, 1.0, 4.0] };
        v.validate().unwrap();
        assert_eq!(v.value(-0.5), 0.5);
        assert_eq!(v.value(3.0), 7.0);
        assert!(ConfiningPotential::Tabulated { r: vec![0.0, 1.0], v: vec![1.0, -1.0] }.validate().is_err());
        assert!(ConfiningPotential::log_growth(0.0, 1.0).is_err());
    }
}
