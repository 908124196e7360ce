//! The rotating Gross–Pitaevskii functional
//!
//! `E[φ] = ⟨φ|(p+A)² + V|φ⟩ + 4πa ∫|φ|⁴`
//!
//! on the unit sphere of `L²`, its gradient, and a minimizer.
//!
//! The minimizer is a preconditioned nonlinear conjugate gradient on the
//! sphere. Each step moves along the great circle
//! `φ(θ) = cos θ φ + sin θ d` and picks θ by minimizing the energy along
//! that curve, which is a trigonometric polynomial in θ once a handful of
//! overlap integrals are known. Steps that do not lower the energy are
//! never taken.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{fft_in_place, ComplexField, Direction, FieldError, GaugeField, Grid, GridOperator, C64};
use crate::quad::golden_min;

#[derive(Debug, Error)]
pub enum GpError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("state is not normalized: ‖φ‖₂ = {0}")]
    NotNormalized(f64),
    #[error("non-finite energy or residual at iteration {iteration} (energy {energy}, residual {residual})")]
    NonFinite { iteration: usize, energy: f64, residual: f64 },
    #[error("unknown initial state `{0}` (expected gaussian, random-phase or vortex:<q>)")]
    UnknownInit(String),
}

/// Trap potential, rotation and coupling on a fixed grid.
#[derive(Clone, Debug)]
pub struct GpProblem {
    grid: Grid,
    potential: Vec<f64>,
    omega: [f64; 3],
    a: f64,
    one_body: GridOperator,
}

/// `|x|²` on every grid point.
pub fn harmonic_potential(grid: &Grid) -> Vec<f64> {
    grid.sample(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
}

impl GpProblem {
    pub fn new(grid: Grid, potential: Vec<f64>, omega: [f64; 3], a: f64) -> Result<Self, GpError> {
        if potential.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), got: potential.len() }.into());
        }
        if let Some(v) = potential.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(GpError::InvalidProblem(format!("trap potential must be finite and nonnegative, found {v}")));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(GpError::InvalidProblem(format!("coupling must be finite and nonnegative, got {a}")));
        }
        let gauge = GaugeField::new(&grid, omega)?;
        let one_body = GridOperator::magnetic(&grid, &gauge, &potential)?;
        Ok(Self { grid, potential, omega, a, one_body })
    }

    /// `V = |x|²`.
    pub fn harmonic(grid: Grid, omega: [f64; 3], a: f64) -> Result<Self, GpError> {
        let v = harmonic_potential(&grid);
        Self::new(grid, v, omega, a)
    }

    pub fn with_coupling(&self, a: f64) -> Result<Self, GpError> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(GpError::InvalidProblem(format!("coupling must be finite and nonnegative, got {a}")));
        }
        Ok(Self { a, ..self.clone() })
    }

    pub fn with_omega(&self, omega: [f64; 3]) -> Result<Self, GpError> {
        Self::new(self.grid.clone(), self.potential.clone(), omega, self.a)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    pub fn coupling(&self) -> f64 {
        self.a
    }

    /// `H₀ = (p+A)² + V`.
    pub fn one_body(&self) -> &GridOperator {
        &self.one_body
    }
}

fn check_normalized(phi: &ComplexField) -> Result<(), GpError> {
    let n = phi.norm();
    if (n - 1.0).abs() > 1e-8 {
        return Err(GpError::NotNormalized(n));
    }
    Ok(())
}

/// `(⟨φ|H₀|φ⟩, ‖φ‖₄⁴)`
fn energy_parts(p: &GpProblem, phi: &ComplexField) -> Result<(f64, f64), GpError> {
    p.grid.ensure_same(phi.grid())?;
    Ok((p.one_body.expectation(phi)?, phi.l4_pow4()))
}

/// `E[φ] = ⟨φ|H₀|φ⟩ + 4πa‖φ‖₄⁴` for normalized `φ`.
pub fn gp_energy(p: &GpProblem, phi: &ComplexField) -> Result<f64, GpError> {
    check_normalized(phi)?;
    let (quad, quart) = energy_parts(p, phi)?;
    Ok(quad + 4.0 * PI * p.a * quart)
}

/// `μ = ⟨φ|H₀|φ⟩ + 8πa‖φ‖₄⁴` for normalized `φ`.
pub fn chemical_potential(p: &GpProblem, phi: &ComplexField) -> Result<f64, GpError> {
    check_normalized(phi)?;
    let (quad, quart) = energy_parts(p, phi)?;
    Ok(quad + 8.0 * PI * p.a * quart)
}

/// `H₀φ + 8πa|φ|²φ`, half the unconstrained functional derivative.
pub fn gp_gradient(p: &GpProblem, phi: &ComplexField) -> Result<ComplexField, GpError> {
    let mut g = p.one_body.apply(phi)?;
    let c = 8.0 * PI * p.a;
    for (gv, v) in g.values_mut().iter_mut().zip(phi.values()) {
        *gv += v * (c * v.norm_sqr());
    }
    Ok(g)
}

/// `‖Gφ − μφ‖₂` with `G` the gradient and `μ = ⟨φ|Gφ⟩`.
pub fn gp_residual(p: &GpProblem, phi: &ComplexField) -> Result<f64, GpError> {
    let g = gp_gradient(p, phi)?;
    let mu = phi.inner(&g)?.re / phi.norm_sqr();
    let mut r = g;
    r.axpy(C64::new(-mu, 0.0), phi)?;
    Ok(r.norm())
}

/// Starting point of a minimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// `e^{-|x|²/2}`
    Gaussian,
    /// Gaussian envelope with a smooth random phase.
    RandomPhase,
    /// `(x ± iy)^{|q|} e^{-|x|²/2}` with the sign of `q`.
    Vortex(i32),
}

impl FromStr for InitStrategy {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "random-phase" => Ok(Self::RandomPhase),
            _ => s
                .strip_prefix("vortex:")
                .and_then(|q| q.parse().ok())
                .map(Self::Vortex)
                .ok_or_else(|| GpError::UnknownInit(s.to_string())),
        }
    }
}

impl std::fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gaussian => write!(f, "gaussian"),
            Self::RandomPhase => write!(f, "random-phase"),
            Self::Vortex(q) => write!(f, "vortex:{q}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpOptions {
    /// Largest rotation angle along the sphere allowed in one step.
    pub step: f64,
    /// Stop once `‖Gφ − μφ‖₂` drops to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Independent runs; runs after the first start from a perturbed state.
    pub restarts: usize,
    pub seed: u64,
    /// Relative amplitude of the smooth noise added on restarts.
    pub noise: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { step: 0.5 * PI, tol: 1e-7, max_iter: 20_000, restarts: 1, seed: 0, noise: 0.3 }
    }
}

#[derive(Clone, Debug)]
pub struct GpState {
    pub phi: ComplexField,
    pub energy: f64,
    pub mu: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final energy of every restart, in restart order.
    pub restart_energies: Vec<f64>,
    /// Index of the restart that produced `phi`.
    pub chosen_restart: usize,
    /// Energy after every accepted step of the chosen run.
    pub energy_history: Vec<f64>,
    /// Set when the field is not negligible on the box boundary.
    pub boundary_warning: bool,
}

/// Low-pass complex noise with unit maximum modulus.
fn smooth_noise(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let kc = 2.0;
    let mut hat: Vec<C64> = (0..grid.len())
        .map(|idx| {
            let k = grid.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let amp = (-k2 / (2.0 * kc * kc)).exp();
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * amp
        })
        .collect();
    fft_in_place(grid, &mut hat, Direction::Inverse);
    let max = hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut hat {
            *v /= max;
        }
    }
    hat
}

/// Unnormalized starting field for `init`; `rng` feeds the random phase.
pub fn initial_field(grid: &Grid, init: InitStrategy, rng: &mut ChaCha8Rng) -> ComplexField {
    let envelope = |x: [f64; 3]| (-0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
    match init {
        InitStrategy::Gaussian => ComplexField::from_fn(grid, |x| C64::new(envelope(x), 0.0)),
        InitStrategy::RandomPhase => {
            let noise = smooth_noise(grid, rng);
            let values = grid
                .points()
                .zip(&noise)
                .map(|(x, n)| C64::from_polar(envelope(x), PI * n.re))
                .collect();
            ComplexField::new(grid.clone(), values).expect("sized by grid")
        }
        InitStrategy::Vortex(q) => {
            let sign = if q < 0 { -1.0 } else { 1.0 };
            ComplexField::from_fn(grid, |x| C64::new(x[0], sign * x[1]).powu(q.unsigned_abs()) * envelope(x))
        }
    }
}

fn vdot(a: &[C64], b: &[C64], dv: f64) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>() * dv
}

fn vnorm(a: &[C64], dv: f64) -> f64 {
    (a.iter().map(|x| x.norm_sqr()).sum::<f64>() * dv).sqrt()
}

/// Energy change along `cos θ φ + sin θ d` expressed through overlaps that
/// do not depend on θ.
struct GreatCircle {
    quad_phi: f64,
    quad_d: f64,
    quad_cross: f64,
    i_uu: f64,
    i_uv: f64,
    i_uw: f64,
    i_vv: f64,
    i_vw: f64,
    i_ww: f64,
    g: f64,
}

impl GreatCircle {
    fn new(phi: &[C64], hphi: &[C64], d: &[C64], hd: &[C64], g: f64, dv: f64) -> Self {
        let (mut i_uu, mut i_uv, mut i_uw, mut i_vv, mut i_vw, mut i_ww) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (p, q) in phi.iter().zip(d) {
            let u = p.norm_sqr();
            let v = 2.0 * (p.conj() * q).re;
            let w = q.norm_sqr();
            i_uu += u * u;
            i_uv += u * v;
            i_uw += u * w;
            i_vv += v * v;
            i_vw += v * w;
            i_ww += w * w;
        }
        Self {
            quad_phi: vdot(phi, hphi, dv).re,
            quad_d: vdot(d, hd, dv).re,
            quad_cross: vdot(phi, hd, dv).re,
            i_uu: i_uu * dv,
            i_uv: i_uv * dv,
            i_uw: i_uw * dv,
            i_vv: i_vv * dv,
            i_vw: i_vw * dv,
            i_ww: i_ww * dv,
            g,
        }
    }

    fn delta(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let quadratic = s * s * (self.quad_d - self.quad_phi) + 2.0 * c * s * self.quad_cross;
        let quartic = -s * s * (1.0 + c * c) * self.i_uu
            + 2.0 * c * c * c * s * self.i_uv
            + c * c * s * s * (2.0 * self.i_uw + self.i_vv)
            + 2.0 * c * s * s * s * self.i_vw
            + s.powi(4) * self.i_ww;
        quadratic + self.g * quartic
    }

    /// Best θ in `(0, max]` with strictly negative energy change, if any.
    fn search(&self, max: f64) -> Option<(f64, f64)> {
        let samples = 80;
        let lo = (max * 1e-12).ln();
        let hi = max.ln();
        let thetas: Vec<f64> = (0..=samples)
            .map(|i| (lo + (hi - lo) * i as f64 / samples as f64).exp())
            .chain((1..=samples).map(|i| max * i as f64 / samples as f64))
            .collect();
        let mut thetas = thetas;
        thetas.sort_by(f64::total_cmp);
        let vals: Vec<f64> = thetas.iter().map(|&t| self.delta(t)).collect();
        let (best, &best_val) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        if !(best_val < 0.0) {
            return None;
        }
        let left = if best == 0 { 0.0 } else { thetas[best - 1] };
        let right = if best + 1 < thetas.len() { thetas[best + 1] } else { thetas[best] };
        let (t, v) = golden_min(|t| self.delta(t), left, right, 1e-14 * right.max(1e-300));
        if v < best_val && v < 0.0 {
            Some((t, v))
        } else {
            Some((thetas[best], best_val))
        }
    }
}

struct RunOutcome {
    phi: Vec<C64>,
    energy: f64,
    mu: f64,
    residual: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn minimize_from(p: &GpProblem, start: ComplexField, opts: &GpOptions) -> Result<RunOutcome, GpError> {
    let grid = &p.grid;
    let dv = grid.cell_volume();
    let op = &p.one_body;
    let g = 4.0 * PI * p.a;
    let k2 = grid.k_squared();

    let mut phi = start.into_values();
    let n0 = vnorm(&phi, dv);
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(GpError::InvalidProblem("initial field has zero or non-finite norm".into()));
    }
    for v in &mut phi {
        *v /= n0;
    }
    let mut hphi = op.apply_values(&phi);
    let mut history = Vec::new();
    let mut prev_z: Vec<C64> = Vec::new();
    let mut prev_d: Vec<C64> = Vec::new();
    let mut prev_rz = 0.0;
    let mut iterations = 0;

    loop {
        let u: Vec<f64> = phi.iter().map(|v| v.norm_sqr()).collect();
        let quad = vdot(&phi, &hphi, dv).re;
        let quart = u.iter().map(|x| x * x).sum::<f64>() * dv;
        let energy = quad + g * quart;
        let mu = quad + 2.0 * g * quart;
        let r: Vec<C64> = hphi
            .iter()
            .zip(&phi)
            .zip(&u)
            .map(|((h, v), uu)| h + v * (2.0 * g * uu) - v * mu)
            .collect();
        let residual = vnorm(&r, dv);
        if !(energy.is_finite() && residual.is_finite()) {
            return Err(GpError::NonFinite { iteration: iterations, energy, residual });
        }
        history.push(energy);
        if residual <= opts.tol || iterations >= opts.max_iter {
            return Ok(RunOutcome { phi, energy, mu, residual, iterations, history });
        }

        // Kinetic and potential preconditioner applied symmetrically.
        let sigma = mu.abs().max(1.0);
        let pv: Vec<f64> = op
            .potential()
            .iter()
            .zip(&u)
            .map(|(v, uu)| (sigma / (sigma + v + 2.0 * g * uu)).sqrt())
            .collect();
        let mut z: Vec<C64> = r.iter().zip(&pv).map(|(a, b)| a * b).collect();
        fft_in_place(grid, &mut z, Direction::Forward);
        for (zv, k) in z.iter_mut().zip(&k2) {
            *zv /= sigma + k;
        }
        fft_in_place(grid, &mut z, Direction::Inverse);
        for (zv, b) in z.iter_mut().zip(&pv) {
            *zv *= b;
        }
        let c = vdot(&phi, &z, dv);
        for (zv, v) in z.iter_mut().zip(&phi) {
            *zv -= c * v;
        }
        let rz = vdot(&r, &z, dv).re;

        let steepest: Vec<C64> = z.iter().map(|v| -v).collect();
        let mut direction = steepest.clone();
        let mut conjugate = false;
        if !prev_d.is_empty() && prev_rz > 0.0 {
            let num: f64 = r
                .iter()
                .zip(z.iter().zip(&prev_z))
                .map(|(rv, (zn, zo))| (rv.conj() * (zn - zo)).re)
                .sum::<f64>()
                * dv;
            let beta = (num / prev_rz).max(0.0);
            if beta > 0.0 {
                conjugate = true;
                let c = vdot(&phi, &prev_d, dv);
                for ((dv_, pd), v) in direction.iter_mut().zip(&prev_d).zip(&phi) {
                    *dv_ += beta * (pd - c * v);
                }
            }
        }

        let mut step = None;
        let candidates: &[&Vec<C64>] = if conjugate { &[&direction, &steepest] } else { &[&steepest] };
        for &d in candidates {
            let slope = vdot(&r, d, dv).re;
            if !(slope < 0.0) {
                continue;
            }
            let dn = vnorm(d, dv);
            if dn == 0.0 {
                continue;
            }
            let dhat: Vec<C64> = d.iter().map(|v| v / dn).collect();
            let hd = op.apply_values(&dhat);
            let circle = GreatCircle::new(&phi, &hphi, &dhat, &hd, g, dv);
            if let Some((theta, _)) = circle.search(opts.step) {
                step = Some((theta, dhat, hd, d.clone()));
                break;
            }
        }
        let Some((theta, dhat, hd, used)) = step else {
            // No descent direction left at this precision.
            return Ok(RunOutcome { phi, energy, mu, residual, iterations, history });
        };
        let (s, cth) = theta.sin_cos();
        for (((v, h), d), hdv) in phi.iter_mut().zip(hphi.iter_mut()).zip(&dhat).zip(&hd) {
            *v = *v * cth + d * s;
            *h = *h * cth + hdv * s;
        }
        let nrm = vnorm(&phi, dv);
        for (v, h) in phi.iter_mut().zip(hphi.iter_mut()) {
            *v /= nrm;
            *h /= nrm;
        }
        iterations += 1;
        if iterations % 50 == 0 {
            hphi = op.apply_values(&phi);
        }
        prev_z = z;
        prev_d = used;
        prev_rz = rz;
    }
}

/// Minimizes the GP functional, running `opts.restarts` independent
/// descents in parallel and returning the lowest-energy result (the first
/// one among runs whose energies agree to within `opts.tol`).
pub fn gp_minimize(p: &GpProblem, init: InitStrategy, opts: &GpOptions) -> Result<GpState, GpError> {
    if opts.restarts == 0 {
        return Err(GpError::InvalidProblem("at least one restart is required".into()));
    }
    if !(opts.tol > 0.0 && opts.step > 0.0) {
        return Err(GpError::InvalidProblem("tolerance and step must be positive".into()));
    }
    let runs: Vec<Result<RunOutcome, GpError>> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
            let mut start = initial_field(&p.grid, init, &mut rng);
            if i > 0 {
                let noise = smooth_noise(&p.grid, &mut rng);
                let envelope = initial_field(&p.grid, InitStrategy::Gaussian, &mut rng);
                let amp = opts.noise * start.max_abs() / envelope.max_abs().max(f64::MIN_POSITIVE);
                for ((v, n), e) in start.values_mut().iter_mut().zip(&noise).zip(envelope.values()) {
                    *v += n * e * amp;
                }
            }
            minimize_from(p, start, opts)
        })
        .collect();
    let runs: Vec<RunOutcome> = runs.into_iter().collect::<Result<_, _>>()?;
    let restart_energies: Vec<f64> = runs.iter().map(|r| r.energy).collect();
    let lowest = restart_energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let chosen = restart_energies
        .iter()
        .position(|&e| e <= lowest + opts.tol)
        .expect("at least one run");
    let best = runs.into_iter().nth(chosen).expect("index in range");
    let phi = ComplexField::new(p.grid.clone(), best.phi)?;
    let boundary_warning = phi.boundary_ratio() >= 1e-10;
    Ok(GpState {
        phi,
        energy: best.energy,
        mu: best.mu,
        residual: best.residual,
        iterations: best.iterations,
        converged: best.residual <= opts.tol,
        restart_energies,
        chosen_restart: chosen,
        energy_history: best.history,
        boundary_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new(3, 32, 14.0).unwrap()
    }

    fn ground(grid: &Grid) -> ComplexField {
        let d = grid.dim() as i32;
        ComplexField::from_fn(grid, |x| {
            C64::new(PI.powf(-0.25 * d as f64) * (-0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 0.0)
        })
    }

    #[test]
    fn oscillator_energies() {
        let g = grid3();
        let phi = ground(&g);
        let p = GpProblem::harmonic(g.clone(), [0.0; 3], 0.0).unwrap();
        assert!((gp_energy(&p, &phi).unwrap() - 3.0).abs() < 1e-6);
        let p = GpProblem::harmonic(g.clone(), [0.0, 0.0, 0.5], 0.0).unwrap();
        assert!((gp_energy(&p, &phi).unwrap() - 3.0625).abs() < 1e-6);
        let p = GpProblem::harmonic(g, [0.0; 3], 1.0).unwrap();
        let e = gp_energy(&p, &phi).unwrap();
        let oracle = 3.0 + 4.0 * PI * (2.0 * PI).powf(-1.5);
        assert!((e - oracle).abs() < 1e-6);
        assert!((e - 3.797885).abs() < 1e-6);
        let mu = chemical_potential(&p, &phi).unwrap();
        assert!((mu - e - 0.797885).abs() < 1e-6);
    }

    #[test]
    fn gradient_of_eigenfunction() {
        let g = grid3();
        let phi = ground(&g);
        let p = GpProblem::harmonic(g, [0.0; 3], 0.0).unwrap();
        let grad = gp_gradient(&p, &phi).unwrap();
        for (a, b) in grad.values().iter().zip(phi.values()) {
            assert!((a - b * 3.0).norm() < 1e-6);
        }
        assert!(gp_residual(&p, &phi).unwrap() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        assert!(GpProblem::harmonic(g.clone(), [0.0; 3], -1.0).is_err());
        let mut v = harmonic_potential(&g);
        v[3] = -1.0;
        assert!(GpProblem::new(g.clone(), v, [0.0; 3], 0.0).is_err());
        let p = GpProblem::harmonic(g.clone(), [0.0; 3], 0.0).unwrap();
        let mut phi = ground(&g);
        phi.scale(C64::new(2.0, 0.0));
        assert!(matches!(gp_energy(&p, &phi), Err(GpError::NotNormalized(_))));
    }

    #[test]
    fn init_strategy_round_trips_through_strings() {
        for s in ["gaussian", "random-phase", "vortex:2", "vortex:-1"] {
            assert_eq!(s.parse::<InitStrategy>().unwrap().to_string(), s);
        }
        assert!("vortex".parse::<InitStrategy>().is_err());
    }

    #[test]
    fn great_circle_matches_direct_evaluation() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        let p = GpProblem::harmonic(g.clone(), [0.0, 0.0, 0.7], 1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut phi = initial_field(&g, InitStrategy::RandomPhase, &mut rng);
        phi.normalize();
        let dv = g.cell_volume();
        let mut d = smooth_noise(&g, &mut rng);
        let c = vdot(phi.values(), &d, dv);
        for (x, v) in d.iter_mut().zip(phi.values()) {
            *x -= c * v;
        }
        let n = vnorm(&d, dv);
        d.iter_mut().for_each(|x| *x /= n);
        let hphi = p.one_body().apply_values(phi.values());
        let hd = p.one_body().apply_values(&d);
        let circle = GreatCircle::new(phi.values(), &hphi, &d, &hd, 4.0 * PI * p.coupling(), dv);
        let e0 = gp_energy(&p, &phi).unwrap();
        for theta in [1e-3, 0.1, 0.7, 1.5] {
            let (s, cth) = f64::sin_cos(theta);
            let moved: Vec<C64> = phi.values().iter().zip(&d).map(|(a, b)| a * cth + b * s).collect();
            let moved = phi.with_values(moved).unwrap();
            let direct = gp_energy(&p, &moved).unwrap() - e0;
            assert!((circle.delta(theta) - direct).abs() < 1e-10, "θ={theta}");
        }
    }

    #[test]
    fn minimizer_finds_2d_oscillator() {
        let g = Grid::new(2, 32, 12.0).unwrap();
        let p = GpProblem::harmonic(g, [0.0; 3], 0.0).unwrap();
        let s = gp_minimize(&p, InitStrategy::RandomPhase, &GpOptions::default()).unwrap();
        assert!(s.converged);
        assert!((s.energy - 2.0).abs() < 1e-8);
        assert!((s.mu - 2.0).abs() < 1e-8);
        assert!(s.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
    }
}
