//! Rectangular periodic grids, complex fields sampled on them, and the
//! spectral operators built from a unitary discrete Fourier transform.
//!
//! Units are ħ = 2m = 1 throughout, so the kinetic energy is `-Δ` and the
//! rotation enters through the gauge field `A(x) = ½ Ω ∧ x`.
//!
//! Grid points sit at `x_i = -L/2 + i·L/n`, so the origin is the grid point
//! with index `n/2` on every axis. Wavenumbers follow the usual FFT ordering
//! and cover the symmetric set `2πk/L, k = -n/2 … n/2-1`.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed field dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Square grid of `n^dim` points on the periodic box `[-L/2, L/2)^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self, FieldError> {
        if dim != 2 && dim != 3 {
            return Err(FieldError::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n == 0 || n % 2 != 0 {
            return Err(FieldError::InvalidGrid(format!(
                "points per axis must be even and positive, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(FieldError::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight of a single grid point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    /// Wavenumber of FFT bin `i` along one axis.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let k = if i < self.n / 2 { i as isize } else { i as isize - self.n as isize };
        2.0 * std::f64::consts::PI * k as f64 / self.length
    }

    /// Axis indices of a flat (row-major) index; unused axes are zero.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        match self.dim {
            2 => [idx / n, idx % n, 0],
            _ => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    pub fn flat_index(&self, m: [usize; 3]) -> usize {
        let n = self.n;
        match self.dim {
            2 => m[0] * n + m[1],
            _ => (m[0] * n + m[1]) * n + m[2],
        }
    }

    /// Position of a grid point; the z component is zero on 2D grids.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.coord(m[axis]);
        }
        x
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut k = [0.0; 3];
        for (axis, ka) in k.iter_mut().enumerate().take(self.dim) {
            *ka = self.wavenumber(m[axis]);
        }
        k
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// `|k|^2` for every Fourier bin, in flat order.
    pub fn k_squared(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let k = self.wavevector(i);
                k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
            })
            .collect()
    }

    /// Real samples of `f(x)` at every grid point.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        self.points().map(f).collect()
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<(), FieldError> {
        if self == other {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn fft_plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    type PlanCache = Mutex<(FftPlanner<f64>, HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>)>;
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    if let Some(p) = plans.get(&n) {
        return p.clone();
    }
    let p = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    plans.insert(n, p.clone());
    p
}

/// In-place unitary one-dimensional DFT.
pub fn fft_1d(line: &mut [C64], direction: Direction) {
    let (fwd, inv) = fft_plans(line.len());
    match direction {
        Direction::Forward => fwd.process(line),
        Direction::Inverse => inv.process(line),
    }
    let scale = 1.0 / (line.len() as f64).sqrt();
    for v in line.iter_mut() {
        *v *= scale;
    }
}

/// In-place unitary n-dimensional DFT of row-major data on `grid`.
pub fn fft_in_place(grid: &Grid, data: &mut [C64], direction: Direction) {
    let n = grid.n();
    let (fwd, inv) = fft_plans(n);
    let plan = match direction {
        Direction::Forward => fwd,
        Direction::Inverse => inv,
    };
    let total = data.len();
    let mut line = vec![C64::new(0.0, 0.0); n];
    let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for axis in 0..grid.dim() {
        let stride = n.pow((grid.dim() - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                plan.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for base in (0..total).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[start + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    data[start + j * stride] = *l;
                }
            }
        }
    }
    let scale = 1.0 / (total as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Complex scalar field sampled on a grid (row-major, last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<C64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn<F: Fn([f64; 3]) -> C64>(grid: &Grid, f: F) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self, FieldError> {
        Self::new(grid.clone(), values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<C64>) -> Result<Self, FieldError> {
        Self::new(self.grid.clone(), values)
    }

    pub fn spectral_transform(&self, direction: Direction) -> ComplexField {
        let mut values = self.values.clone();
        fft_in_place(&self.grid, &mut values, direction);
        Self { grid: self.grid.clone(), values }
    }

    /// Quadrature inner product `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &ComplexField) -> Result<C64, FieldError> {
        self.grid.ensure_same(&other.grid)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit L² norm and returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let nrm = self.norm();
        if nrm > 0.0 {
            let inv = 1.0 / nrm;
            for v in &mut self.values {
                *v *= inv;
            }
        }
        nrm
    }

    /// `‖φ‖_p^p` by midpoint quadrature.
    pub fn lp_pow(&self, p: f64) -> f64 {
        self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * self.grid.cell_volume()
    }

    /// `‖φ‖₄⁴ = ∫|φ|⁴`.
    pub fn l4_pow4(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr() * v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l6_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr().powi(3)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / 6.0)
    }

    /// `‖∇φ‖₂²`, evaluated in Fourier space.
    pub fn grad_norm_sqr(&self) -> f64 {
        let hat = self.spectral_transform(Direction::Forward);
        let k2 = self.grid.k_squared();
        hat.values.iter().zip(&k2).map(|(v, k)| v.norm_sqr() * k).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude on the outer faces of the box divided by the global
    /// maximum. Spectral derivatives are trustworthy when this is tiny.
    pub fn boundary_ratio(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            return 0.0;
        }
        let n = self.grid.n();
        let dim = self.grid.dim();
        let mut edge: f64 = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            let m = self.grid.multi_index(idx);
            if m[..dim].iter().any(|&i| i == 0 || i == n - 1) {
                edge = edge.max(v.norm());
            }
        }
        edge / max
    }

    /// `-i ∂_axis φ` by spectral differentiation.
    pub fn momentum_component(&self, axis: usize) -> ComplexField {
        let mut hat = self.spectral_transform(Direction::Forward);
        for (idx, v) in hat.values.iter_mut().enumerate() {
            *v *= self.grid.wavevector(idx)[axis];
        }
        fft_in_place(&self.grid, &mut hat.values, Direction::Inverse);
        hat
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn axpy(&mut self, alpha: C64, x: &ComplexField) -> Result<(), FieldError> {
        self.grid.ensure_same(&x.grid)?;
        for (a, b) in self.values.iter_mut().zip(&x.values) {
            *a += alpha * b;
        }
        Ok(())
    }
}

/// Gauge field `A(x) = ½ Ω ∧ x` sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeField {
    grid: Grid,
    omega: [f64; 3],
    values: Vec<[f64; 3]>,
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl GaugeField {
    pub fn new(grid: &Grid, omega: [f64; 3]) -> Result<Self, FieldError> {
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(FieldError::InvalidGrid("angular velocity must be finite".into()));
        }
        if grid.dim() == 2 && (omega[0] != 0.0 || omega[1] != 0.0) {
            return Err(FieldError::InvalidGrid(
                "2D grids only support rotation about the z axis".into(),
            ));
        }
        let values = grid
            .points()
            .map(|x| {
                let c = cross(omega, x);
                [0.5 * c[0], 0.5 * c[1], 0.5 * c[2]]
            })
            .collect();
        Ok(Self { grid: grid.clone(), omega, values })
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.omega == [0.0; 3]
    }

    /// `|A(x)|²` at every grid point.
    pub fn magnitude_sqr(&self) -> Vec<f64> {
        self.values.iter().map(|a| a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).collect()
    }

    /// Centred-difference divergence; vanishes up to rounding because each
    /// component `A_j` never depends on `x_j`.
    pub fn divergence(&self) -> Vec<f64> {
        let n = self.grid.n();
        let h = self.grid.spacing();
        (0..self.grid.len())
            .map(|idx| {
                let m = self.grid.multi_index(idx);
                let mut div = 0.0;
                for axis in 0..self.grid.dim() {
                    let mut up = m;
                    let mut down = m;
                    up[axis] = (m[axis] + 1) % n;
                    down[axis] = (m[axis] + n - 1) % n;
                    if m[axis] == 0 || m[axis] == n - 1 {
                        continue;
                    }
                    let a_up = self.values[self.grid.flat_index(up)][axis];
                    let a_down = self.values[self.grid.flat_index(down)][axis];
                    div += (a_up - a_down) / (2.0 * h);
                }
                div
            })
            .collect()
    }
}

/// Hermitian grid operator `T(p) + 2A·p + U(x)` where `T` is a Fourier
/// multiplier, `A` an optional gauge field and `U` a real potential.
///
/// With `T = |k|²` and `U = |A|² + V` this is `(-i∇+A)² + V`.
#[derive(Clone, Debug)]
pub struct GridOperator {
    grid: Grid,
    kinetic: Vec<f64>,
    gauge: Option<GaugeField>,
    potential: Vec<f64>,
}

impl GridOperator {
    pub fn new(
        grid: &Grid,
        kinetic: Vec<f64>,
        gauge: Option<GaugeField>,
        potential: Vec<f64>,
    ) -> Result<Self, FieldError> {
        for len in [kinetic.len(), potential.len()] {
            if len != grid.len() {
                return Err(FieldError::LengthMismatch { expected: grid.len(), got: len });
            }
        }
        if let Some(a) = &gauge {
            grid.ensure_same(a.grid())?;
        }
        let gauge = gauge.filter(|a| !a.is_zero());
        Ok(Self { grid: grid.clone(), kinetic, gauge, potential })
    }

    /// `(-i∇+A)² + V`, i.e. `-Δ + 2A·p + |A|² + V`.
    pub fn magnetic(grid: &Grid, gauge: &GaugeField, v: &[f64]) -> Result<Self, FieldError> {
        let a2 = gauge.magnitude_sqr();
        let potential = v.iter().zip(&a2).map(|(v, a)| v + a).collect();
        Self::new(grid, grid.k_squared(), Some(gauge.clone()), potential)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn gauge(&self) -> Option<&GaugeField> {
        self.gauge.as_ref()
    }

    /// Shifts the potential by a constant.
    pub fn shifted(mut self, shift: f64) -> Self {
        for u in &mut self.potential {
            *u += shift;
        }
        self
    }

    pub fn apply_values(&self, phi: &[C64]) -> Vec<C64> {
        let grid = &self.grid;
        let mut hat = phi.to_vec();
        fft_in_place(grid, &mut hat, Direction::Forward);
        let mut out: Vec<C64> = hat.iter().zip(&self.kinetic).map(|(v, t)| v * t).collect();
        fft_in_place(grid, &mut out, Direction::Inverse);
        for ((o, v), u) in out.iter_mut().zip(phi).zip(&self.potential) {
            *o += v * u;
        }
        if let Some(a) = &self.gauge {
            for axis in 0..grid.dim() {
                let active = a.values().iter().any(|av| av[axis] != 0.0);
                if !active {
                    continue;
                }
                let mut d: Vec<C64> = hat
                    .iter()
                    .enumerate()
                    .map(|(idx, v)| v * grid.wavevector(idx)[axis])
                    .collect();
                fft_in_place(grid, &mut d, Direction::Inverse);
                for ((o, pv), av) in out.iter_mut().zip(&d).zip(a.values()) {
                    *o += pv * (2.0 * av[axis]);
                }
            }
        }
        out
    }

    pub fn apply(&self, phi: &ComplexField) -> Result<ComplexField, FieldError> {
        self.grid.ensure_same(phi.grid())?;
        Ok(ComplexField { grid: self.grid.clone(), values: self.apply_values(phi.values()) })
    }

    /// `⟨φ|H|φ⟩` (real part; the imaginary part vanishes by hermiticity).
    pub fn expectation(&self, phi: &ComplexField) -> Result<f64, FieldError> {
        let h = self.apply(phi)?;
        Ok(phi.inner(&h)?.re)
    }
}

/// `(-i∇+A)²φ = -Δφ - 2iA·∇φ + |A|²φ` with spectral derivatives.
pub fn apply_gauge_kinetic(phi: &ComplexField, a: &GaugeField) -> Result<ComplexField, FieldError> {
    phi.grid().ensure_same(a.grid())?;
    let zero = vec![0.0; phi.grid().len()];
    GridOperator::magnetic(phi.grid(), a, &zero)?.apply(phi)
}

/// JSON sidecar describing a binary field dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub dim: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub omega: [f64; 3],
}

/// Path of the JSON sidecar belonging to a `.f64` dump.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes little-endian `f64` pairs `(re, im)` in row-major order plus the
/// JSON sidecar next to it.
pub fn write_dump(path: &Path, field: &ComplexField, omega: [f64; 3]) -> Result<(), FieldError> {
    let mut bytes = Vec::with_capacity(field.values.len() * 16);
    for v in &field.values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let header = DumpHeader {
        dim: field.grid.dim(),
        n: field.grid.n(),
        length: field.grid.length(),
        omega,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<(ComplexField, DumpHeader), FieldError> {
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let grid = Grid::new(header.dim, header.n, header.length)?;
    let bytes = fs::read(path)?;
    if bytes.len() != grid.len() * 16 {
        return Err(FieldError::Format(format!(
            "expected {} bytes for a {}^{} grid, found {}",
            grid.len() * 16,
            header.n,
            header.dim,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    Ok((ComplexField::new(grid, values)?, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn gaussian3(grid: &Grid) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            C64::new(PI.powf(-0.75) * (-0.5 * r2).exp(), 0.0)
        })
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 8, 1.0).is_err());
        assert!(Grid::new(2, 7, 1.0).is_err());
        assert!(Grid::new(3, 8, -1.0).is_err());
    }

    #[test]
    fn wavenumbers_are_symmetric_set() {
        let g = Grid::new(2, 8, 2.0 * PI).unwrap();
        let mut ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i).round() as i64).collect();
        ks.sort();
        assert_eq!(ks, vec![-4, -3, -2, -1, 0, 1, 2, 3]);
        assert_eq!(g.coord(4), 0.0);
    }

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        let g = Grid::new(2, 16, 5.0).unwrap();
        let f = ComplexField::from_fn(&g, |_| C64::new(1.0, 0.0));
        let hat = f.spectral_transform(Direction::Forward);
        assert!((hat.values()[0].re - (g.len() as f64).sqrt()).abs() < 1e-12);
        assert!(hat.values()[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn plane_wave_has_single_coefficient() {
        let g = Grid::new(3, 8, 4.0).unwrap();
        let k = [g.wavenumber(1), g.wavenumber(7), g.wavenumber(2)];
        let f = ComplexField::from_fn(&g, |x| C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]));
        let hat = f.spectral_transform(Direction::Forward);
        let target = g.flat_index([1, 7, 2]);
        for (i, v) in hat.values().iter().enumerate() {
            if i == target {
                assert!((v.norm() - (g.len() as f64).sqrt()).abs() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "bin {i} = {v}");
            }
        }
    }

    #[test]
    fn round_trip_and_parseval_on_random_field() {
        let g = Grid::new(3, 12, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ComplexField::from_fn(&g, |_| C64::new(0.0, 0.0));
        let values: Vec<C64> = f.values().iter().map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let f = f.with_values(values).unwrap();
        let hat = f.spectral_transform(Direction::Forward);
        let back = hat.spectral_transform(Direction::Inverse);
        let scale = f.max_abs();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
        assert!((f.norm() - hat.norm()).abs() <= 1e-12 * f.norm());
    }

    #[test]
    fn gaussian_norms() {
        let g = Grid::new(3, 32, 14.0).unwrap();
        let phi = gaussian3(&g);
        assert!((phi.norm_sqr() - 1.0).abs() < 1e-8);
        // ∫ π^{-3} e^{-2r²} d³x = (2π)^{-3/2}
        assert!((phi.l4_pow4() - (2.0 * PI).powf(-1.5)).abs() < 1e-8);
        assert!((phi.l4_pow4() - 0.063494).abs() < 1e-6);
    }

    #[test]
    fn plane_wave_is_kinetic_eigenfunction() {
        let g = Grid::new(2, 16, 6.0).unwrap();
        let k = [g.wavenumber(3), g.wavenumber(14)];
        let f = ComplexField::from_fn(&g, |x| C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
        let a = GaugeField::new(&g, [0.0; 3]).unwrap();
        let out = apply_gauge_kinetic(&f, &a).unwrap();
        let k2 = k[0] * k[0] + k[1] * k[1];
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - v * k2).norm() < 1e-9);
        }
    }

    #[test]
    fn oscillator_kinetic_expectation_is_three_halves() {
        let g = Grid::new(3, 32, 14.0).unwrap();
        let phi = gaussian3(&g);
        let a = GaugeField::new(&g, [0.0; 3]).unwrap();
        let t = phi.inner(&apply_gauge_kinetic(&phi, &a).unwrap()).unwrap();
        assert!((t.re - 1.5).abs() < 1e-8);
        assert!((phi.grad_norm_sqr() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn real_field_has_no_rotation_cross_term() {
        let g = Grid::new(3, 32, 14.0).unwrap();
        let phi = gaussian3(&g);
        let omega = [0.0, 0.0, 1.0];
        let a = GaugeField::new(&g, omega).unwrap();
        let total = phi.inner(&apply_gauge_kinetic(&phi, &a).unwrap()).unwrap().re;
        let a2: f64 = phi
            .values()
            .iter()
            .zip(a.magnitude_sqr())
            .map(|(v, m)| v.norm_sqr() * m)
            .sum::<f64>()
            * g.cell_volume();
        assert!((total - (phi.grad_norm_sqr() + a2)).abs() < 1e-10);
        // ¼|Ω|²⟨x²+y²⟩ = 0.25
        assert!((a2 - 0.25).abs() < 1e-8);
    }

    #[test]
    fn gauge_field_is_divergence_free_and_vanishes_at_origin() {
        let g = Grid::new(3, 8, 4.0).unwrap();
        let a = GaugeField::new(&g, [0.3, -0.7, 1.1]).unwrap();
        assert!(a.divergence().iter().all(|d| d.abs() < 1e-12));
        let origin = g.flat_index([4, 4, 4]);
        assert_eq!(a.values()[origin], [0.0; 3]);
        assert!(GaugeField::new(&Grid::new(2, 8, 4.0).unwrap(), [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let g1 = Grid::new(2, 8, 4.0).unwrap();
        let g2 = Grid::new(2, 8, 5.0).unwrap();
        let f1 = ComplexField::zeros(&g1);
        let f2 = ComplexField::zeros(&g2);
        assert!(matches!(f1.inner(&f2), Err(FieldError::GridMismatch)));
        let a = GaugeField::new(&g2, [0.0; 3]).unwrap();
        assert!(apply_gauge_kinetic(&f1, &a).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.f64");
        let g = Grid::new(2, 8, 3.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| C64::new(x[0], -x[1]));
        write_dump(&path, &f, [0.0, 0.0, 0.5]).unwrap();
        let (back, header) = read_dump(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(header.omega, [0.0, 0.0, 0.5]);
        let raw = fs::read(&path).unwrap();
        assert_eq!(raw.len(), 64 * 16);
        assert_eq!(f64::from_le_bytes(raw[..8].try_into().unwrap()), g.coord(0));
    }
}
