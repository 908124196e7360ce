//! Diagnostics of GP minimizers: vortex census, angular momentum,
//! rotational symmetry breaking, concavity of the ground-state energy in
//! the coupling, and finite mixtures of minimizers.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{fft_1d, ComplexField, Direction, FieldError, Grid, C64};
use crate::gp::{gp_energy, gp_minimize, GpError, GpOptions, GpProblem, InitStrategy};
use crate::linalg::hermitian_eigen;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("problem is not symmetric under rotations about the z axis: {0}")]
    NotAxisymmetric(String),
    #[error("invalid scan: {0}")]
    InvalidScan(String),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
}

/// Amplitude floor, relative to the field maximum, below which the phase
/// is ignored.
pub const VORTEX_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VortexReport {
    /// `(x, y)` positions of the detected phase singularities.
    pub locations: Vec<[f64; 2]>,
    pub windings: Vec<i32>,
    pub total_winding: i32,
}

fn wrap_phase(d: f64) -> f64 {
    // Fold into (-π, π].
    let mut w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn loop_winding(values: &[C64]) -> i32 {
    let mut total = 0.0;
    for k in 0..values.len() {
        let a = values[k];
        let b = values[(k + 1) % values.len()];
        total += wrap_phase(b.arg() - a.arg());
    }
    (total / (2.0 * PI)).round() as i32
}

/// Vortex census of a 2D field, or of the `z = 0` slice of a 3D field.
pub fn detect_vortices(phi: &ComplexField) -> VortexReport {
    let slice = if phi.grid().dim() == 3 { phi.grid().n() / 2 } else { 0 };
    detect_vortices_in_slice(phi, slice)
}

/// Vortex census of the plane `z = z_index` (ignored for 2D fields).
///
/// Every plaquette whose corners all exceed the floor contributes its
/// phase winding. Isolated groups of sub-floor points (a vortex core that
/// falls exactly on grid points) are handled by measuring the winding
/// around a rectangle enclosing the group and subtracting the plaquettes
/// already counted inside it. Groups connected to the box edge are the
/// low-density outskirts and carry no meaningful phase.
pub fn detect_vortices_in_slice(phi: &ComplexField, z_index: usize) -> VortexReport {
    let grid = phi.grid();
    let n = grid.n();
    let at = |i: usize, j: usize| -> C64 {
        let idx = if grid.dim() == 2 { grid.flat_index([i, j, 0]) } else { grid.flat_index([i, j, z_index]) };
        phi.values()[idx]
    };
    let max = phi.max_abs();
    let mut report = VortexReport::default();
    if max == 0.0 {
        return report;
    }
    let floor = VORTEX_FLOOR * max;
    let valid = |i: usize, j: usize| at(i, j).norm() >= floor;
    if !(0..n).any(|i| (0..n).any(|j| valid(i, j))) {
        return report;
    }
    let plaquette = |i: usize, j: usize| -> Option<i32> {
        let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        if corners.iter().all(|&(a, b)| valid(a, b)) {
            Some(loop_winding(&corners.map(|(a, b)| at(a, b))))
        } else {
            None
        }
    };
    let mut plaquettes = vec![None; (n - 1) * (n - 1)];
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let w = plaquette(i, j);
            plaquettes[i * (n - 1) + j] = w;
            if let Some(w) = w.filter(|&w| w != 0) {
                let h = grid.spacing();
                report.locations.push([grid.coord(i) + 0.5 * h, grid.coord(j) + 0.5 * h]);
                report.windings.push(w);
            }
        }
    }

    // Connected groups of sub-floor points.
    let mut label = vec![usize::MAX; n * n];
    let mut next = 0;
    for i0 in 0..n {
        for j0 in 0..n {
            if valid(i0, j0) || label[i0 * n + j0] != usize::MAX {
                continue;
            }
            let mut stack = vec![(i0, j0)];
            label[i0 * n + j0] = next;
            let mut members = Vec::new();
            while let Some((i, j)) = stack.pop() {
                members.push((i, j));
                let mut nb = Vec::with_capacity(4);
                if i > 0 {
                    nb.push((i - 1, j));
                }
                if i + 1 < n {
                    nb.push((i + 1, j));
                }
                if j > 0 {
                    nb.push((i, j - 1));
                }
                if j + 1 < n {
                    nb.push((i, j + 1));
                }
                for (a, b) in nb {
                    if !valid(a, b) && label[a * n + b] == usize::MAX {
                        label[a * n + b] = next;
                        stack.push((a, b));
                    }
                }
            }
            next += 1;
            let (imin, imax) = members.iter().fold((n, 0), |(lo, hi), &(i, _)| (lo.min(i), hi.max(i)));
            let (jmin, jmax) = members.iter().fold((n, 0), |(lo, hi), &(_, j)| (lo.min(j), hi.max(j)));
            if imin == 0 || jmin == 0 || imax == n - 1 || jmax == n - 1 {
                continue;
            }
            let (i0, i1, j0, j1) = (imin - 1, imax + 1, jmin - 1, jmax + 1);
            let mut ring = Vec::new();
            for i in i0..i1 {
                ring.push((i, j0));
            }
            for j in j0..j1 {
                ring.push((i1, j));
            }
            for i in (i0 + 1..=i1).rev() {
                ring.push((i, j1));
            }
            for j in (j0 + 1..=j1).rev() {
                ring.push((i0, j));
            }
            if !ring.iter().all(|&(a, b)| valid(a, b)) {
                continue;
            }
            let enclosed = loop_winding(&ring.iter().map(|&(a, b)| at(a, b)).collect::<Vec<_>>());
            let counted: i32 = (i0..i1)
                .flat_map(|i| (j0..j1).map(move |j| (i, j)))
                .filter_map(|(i, j)| plaquettes[i * (n - 1) + j])
                .sum();
            let w = enclosed - counted;
            if w != 0 {
                let ci = members.iter().map(|m| m.0 as f64).sum::<f64>() / members.len() as f64;
                let cj = members.iter().map(|m| m.1 as f64).sum::<f64>() / members.len() as f64;
                let h = grid.spacing();
                report.locations.push([-0.5 * grid.length() + ci * h, -0.5 * grid.length() + cj * h]);
                report.windings.push(w);
            }
        }
    }
    report.total_winding = report.windings.iter().sum();
    report
}

/// `⟨φ|x p_y − y p_x|φ⟩ / ⟨φ|φ⟩` with spectral derivatives.
pub fn angular_momentum_z(phi: &ComplexField) -> Result<f64, AnalysisError> {
    let grid = phi.grid();
    let px = phi.momentum_component(0);
    let py = phi.momentum_component(1);
    let lz: Vec<C64> = grid
        .points()
        .zip(px.values().iter().zip(py.values()))
        .map(|(x, (a, b))| b * x[0] - a * x[1])
        .collect();
    let lz = phi.with_values(lz)?;
    Ok(phi.inner(&lz)?.re / phi.norm_sqr())
}

/// Translates every line along `axis` by `rate · x_other` using a Fourier
/// phase ramp.
fn shear(grid: &Grid, values: &mut [C64], axis: usize, other: usize, rate: f64) {
    let n = grid.n();
    let step = n.pow((grid.dim() - 1 - axis) as u32);
    let ks: Vec<f64> = (0..n).map(|i| grid.wavenumber(i)).collect();
    let mut line = vec![C64::new(0.0, 0.0); n];
    for start in 0..grid.len() {
        let m = grid.multi_index(start);
        if m[axis] != 0 {
            continue;
        }
        for (k, l) in line.iter_mut().enumerate() {
            *l = values[start + k * step];
        }
        let t = rate * grid.coord(m[other]);
        fft_1d(&mut line, Direction::Forward);
        for (v, k) in line.iter_mut().zip(&ks) {
            *v *= C64::from_polar(1.0, -k * t);
        }
        fft_1d(&mut line, Direction::Inverse);
        for (k, l) in line.iter().enumerate() {
            values[start + k * step] = *l;
        }
    }
}

/// Rotates a field about the z axis by `angle` (counterclockwise):
/// `ψ(x) = φ(R_{-angle} x)`. Quarter turns are exact index permutations;
/// the remaining angle in `[-π/4, π/4]` uses three Fourier shears, so the
/// L² norm is preserved exactly.
pub fn rotate_field(phi: &ComplexField, angle: f64) -> ComplexField {
    let quarter = (angle / (0.5 * PI)).round();
    let rest = angle - quarter * 0.5 * PI;
    let grid = phi.grid().clone();
    let n = grid.n();
    let turns = (quarter as i64).rem_euclid(4);
    let mut values = phi.values().to_vec();
    for _ in 0..turns {
        let old = values.clone();
        for (idx, v) in values.iter_mut().enumerate() {
            let m = grid.multi_index(idx);
            // ψ(x, y) = φ(y, −x)
            let src = [m[1], (n - m[0]) % n, m[2]];
            *v = old[grid.flat_index(src)];
        }
    }
    if rest != 0.0 {
        let a = -(0.5 * rest).tan();
        let b = rest.sin();
        shear(&grid, &mut values, 0, 1, a);
        shear(&grid, &mut values, 1, 0, b);
        shear(&grid, &mut values, 0, 1, a);
    }
    ComplexField::new(grid, values).expect("same grid")
}

/// Checks that the trap and rotation are invariant under rotations about z.
///
/// Grid points with equal `x² + y²` (and equal z) must carry the same trap
/// value; on a square lattice this compares points on different lattice
/// orbits, e.g. `(5, 0)` and `(3, 4)`.
pub fn check_axisymmetric(p: &GpProblem) -> Result<(), AnalysisError> {
    let w = p.omega();
    if w[0] != 0.0 || w[1] != 0.0 {
        return Err(AnalysisError::NotAxisymmetric("rotation axis is not the z axis".into()));
    }
    let grid = p.grid();
    let n = grid.n() as i64;
    let mut shells: BTreeMap<(i64, usize), f64> = BTreeMap::new();
    for (idx, &v) in p.potential().iter().enumerate() {
        let m = grid.multi_index(idx);
        let (i, j) = (m[0] as i64 - n / 2, m[1] as i64 - n / 2);
        // Only shells fully inside the box are comparable.
        if i.abs() >= n / 2 || j.abs() >= n / 2 {
            continue;
        }
        let key = (i * i + j * j, m[2]);
        match shells.get(&key) {
            Some(&v0) if (v - v0).abs() > 1e-9 * (1.0 + v0.abs()) => {
                return Err(AnalysisError::NotAxisymmetric(format!(
                    "trap takes values {v0} and {v} at equal distance from the axis"
                )));
            }
            Some(_) => {}
            None => {
                shells.insert(key, v);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub angles: Vec<f64>,
    pub energies: Vec<f64>,
    /// `max |E(rotated) − E(φ)|`
    pub spread: f64,
    /// `max ‖rotated − φ‖₂`, nonzero when the state itself is not symmetric.
    pub max_change: f64,
}

/// Rotates a minimizer by each angle and compares energies.
pub fn symmetry_orbit_check(
    phi: &ComplexField,
    p: &GpProblem,
    angles: &[f64],
) -> Result<SymmetryReport, AnalysisError> {
    check_axisymmetric(p)?;
    let e0 = gp_energy(p, phi)?;
    let mut energies = Vec::with_capacity(angles.len());
    let mut spread: f64 = 0.0;
    let mut max_change: f64 = 0.0;
    for &angle in angles {
        let rotated = rotate_field(phi, angle);
        let e = gp_energy(p, &rotated)?;
        spread = spread.max((e - e0).abs());
        let mut diff = rotated.clone();
        diff.axpy(C64::new(-1.0, 0.0), phi)?;
        max_change = max_change.max(diff.norm());
        energies.push(e);
    }
    Ok(SymmetryReport { angles: angles.to_vec(), energies, spread, max_change })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanSample {
    pub a: f64,
    pub energy: f64,
    pub mu: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcavityScan {
    pub samples: Vec<ScanSample>,
    pub tolerance: f64,
    /// Largest decrease `E(a_i) − E(a_{i+1})` between neighbours (≤ 0 when monotone).
    pub monotonicity_violation: f64,
    /// Largest amount by which a sample falls below the chord of two others.
    pub concavity_violation: f64,
    /// Largest amount by which `E(λa) ≥ λE(a)` fails over sampled pairs.
    pub scaling_violation: f64,
    pub all_converged: bool,
    pub passed: bool,
}

/// Minimizes at each coupling and checks that `a ↦ E(a)` is nondecreasing
/// and concave, and that `E(λa) ≥ λE(a)`, all within `2·tol`.
pub fn concavity_scan(
    p: &GpProblem,
    couplings: &[f64],
    init: InitStrategy,
    opts: &GpOptions,
) -> Result<ConcavityScan, AnalysisError> {
    if couplings.len() < 3 {
        return Err(AnalysisError::InvalidScan("need at least three couplings".into()));
    }
    if couplings.windows(2).any(|w| !(w[1] > w[0])) || couplings[0] < 0.0 {
        return Err(AnalysisError::InvalidScan("couplings must be nonnegative and strictly increasing".into()));
    }
    let samples: Vec<ScanSample> = couplings
        .par_iter()
        .map(|&a| -> Result<ScanSample, AnalysisError> {
            let s = gp_minimize(&p.with_coupling(a)?, init, opts)?;
            Ok(ScanSample { a, energy: s.energy, mu: s.mu, residual: s.residual, converged: s.converged })
        })
        .collect::<Result<_, _>>()?;
    Ok(assess_scan(samples, 2.0 * opts.tol))
}

/// Evaluates the scan inequalities on precomputed samples.
pub fn assess_scan(samples: Vec<ScanSample>, tolerance: f64) -> ConcavityScan {
    let e: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let a: Vec<f64> = samples.iter().map(|s| s.a).collect();
    let m = samples.len();
    let monotonicity_violation = e.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let mut concavity_violation = f64::NEG_INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let t = (a[j] - a[i]) / (a[k] - a[i]);
                let chord = (1.0 - t) * e[i] + t * e[k];
                concavity_violation = concavity_violation.max(chord - e[j]);
            }
        }
    }
    let mut scaling_violation = f64::NEG_INFINITY;
    for i in 0..m {
        for j in i..m {
            if a[j] == 0.0 {
                continue;
            }
            let lambda = a[i] / a[j];
            scaling_violation = scaling_violation.max(lambda * e[j] - e[i]);
        }
    }
    let all_converged = samples.iter().all(|s| s.converged);
    let passed = all_converged
        && monotonicity_violation <= tolerance
        && concavity_violation <= tolerance
        && scaling_violation <= tolerance;
    ConcavityScan {
        samples,
        tolerance,
        monotonicity_violation,
        concavity_violation,
        scaling_violation,
        all_converged,
        passed,
    }
}

/// Finite convex combination `γ = Σ λᵢ |φᵢ⟩⟨φᵢ|` of normalized states.
#[derive(Clone, Debug)]
pub struct MixtureState {
    weights: Vec<f64>,
    components: Vec<ComplexField>,
}

/// Normalizes the weights to sum to one and validates the components.
pub fn build_mixture(components: Vec<(f64, ComplexField)>) -> Result<MixtureState, AnalysisError> {
    if components.is_empty() {
        return Err(AnalysisError::InvalidMixture("no components".into()));
    }
    if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
        return Err(AnalysisError::InvalidMixture("weights must be finite and nonnegative".into()));
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return Err(AnalysisError::InvalidMixture("all weights are zero".into()));
    }
    let grid = components[0].1.grid().clone();
    for (_, phi) in &components {
        grid.ensure_same(phi.grid())?;
        if (phi.norm() - 1.0).abs() > 1e-8 {
            return Err(AnalysisError::InvalidMixture(format!("component has norm {}", phi.norm())));
        }
    }
    let (weights, components) = components.into_iter().map(|(w, phi)| (w / total, phi)).unzip();
    Ok(MixtureState { weights, components })
}

impl MixtureState {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ComplexField] {
        &self.components
    }

    pub fn trace(&self) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, phi)| w * phi.norm_sqr()).sum()
    }

    /// `γ f = Σ λᵢ φᵢ ⟨φᵢ|f⟩`
    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField, AnalysisError> {
        let mut out = ComplexField::zeros(f.grid());
        for (w, phi) in self.weights.iter().zip(&self.components) {
            let c = phi.inner(f)? * *w;
            out.axpy(c, phi)?;
        }
        Ok(out)
    }

    /// Nonzero spectrum of `γ` (descending), from the weighted Gram matrix
    /// `Λ^{1/2} G Λ^{1/2}` which shares it.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, AnalysisError> {
        let m = self.components.len();
        let mut gram = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
        for i in 0..m {
            for j in 0..m {
                let g = self.components[i].inner(&self.components[j])?;
                gram[(i, j)] = g * (self.weights[i] * self.weights[j]).sqrt();
            }
        }
        let (mut vals, _) = hermitian_eigen(gram);
        vals.reverse();
        Ok(vals)
    }

    pub fn rank(&self) -> Result<usize, AnalysisError> {
        let vals = self.eigenvalues()?;
        let top = vals.first().copied().unwrap_or(0.0);
        Ok(vals.iter().filter(|&&v| v > 1e-10 * top).count())
    }
}

/// Extreme points of the set of limiting density matrices are exactly the
/// rank-one projections.
pub fn is_extreme(m: &MixtureState) -> Result<bool, AnalysisError> {
    Ok(m.rank()? == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::new(2, 64, 16.0).unwrap()
    }

    fn normalized(mut f: ComplexField) -> ComplexField {
        f.normalize();
        f
    }

    fn vortex(grid: &Grid, q: i32) -> ComplexField {
        let s = if q < 0 { -1.0 } else { 1.0 };
        normalized(ComplexField::from_fn(grid, |x| {
            C64::new(x[0], s * x[1]).powu(q.unsigned_abs()) * (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp()
        }))
    }

    #[test]
    fn single_vortex_on_a_grid_node() {
        let r = detect_vortices(&vortex(&grid2(), 1));
        assert_eq!(r.total_winding, 1);
        assert_eq!(r.windings, vec![1]);
        assert!(r.locations[0][0].abs() < 0.2 && r.locations[0][1].abs() < 0.2);
    }

    #[test]
    fn antivortex_pair_and_real_field() {
        assert_eq!(detect_vortices(&vortex(&grid2(), -2)).total_winding, -2);
        assert_eq!(detect_vortices(&vortex(&grid2(), 0)), VortexReport::default());
    }

    #[test]
    fn off_node_vortex() {
        let g = grid2();
        let phi = ComplexField::from_fn(&g, |x| {
            C64::new(x[0] - 0.33, x[1] + 0.71) * (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp()
        });
        let r = detect_vortices(&phi);
        assert_eq!(r.windings, vec![1]);
        assert!((r.locations[0][0] - 0.33).abs() < 0.25 && (r.locations[0][1] + 0.71).abs() < 0.25);
    }

    #[test]
    fn zero_field_gives_empty_report() {
        assert_eq!(detect_vortices(&ComplexField::zeros(&grid2())), VortexReport::default());
    }

    #[test]
    fn angular_momentum_of_vortices() {
        let g = grid2();
        assert!((angular_momentum_z(&vortex(&g, 1)).unwrap() - 1.0).abs() < 1e-8);
        assert!((angular_momentum_z(&vortex(&g, -2)).unwrap() + 2.0).abs() < 1e-8);
        assert!(angular_momentum_z(&vortex(&g, 0)).unwrap().abs() < 1e-10);
    }

    #[test]
    fn shear_rotation_moves_a_displaced_gaussian() {
        let g = grid2();
        let blob = |cx: f64, cy: f64| {
            normalized(ComplexField::from_fn(&g, move |x| {
                C64::new((-((x[0] - cx).powi(2) + (x[1] - cy).powi(2))).exp(), 0.0)
            }))
        };
        let start = blob(1.5, 0.0);
        for angle in [0.3, -0.7, 2.0, PI] {
            let rotated = rotate_field(&start, angle);
            let expected = blob(1.5 * angle.cos(), 1.5 * angle.sin());
            let mut d = rotated.clone();
            d.axpy(C64::new(-1.0, 0.0), &expected).unwrap();
            assert!(d.norm() < 1e-8, "angle {angle}: {}", d.norm());
            assert!((rotated.norm() - 1.0).abs() < 1e-12);
        }
        let same = rotate_field(&start, 0.0);
        assert_eq!(same, start);
    }

    #[test]
    fn axisymmetry_check() {
        let g = grid2();
        let p = GpProblem::harmonic(g.clone(), [0.0, 0.0, 0.5], 1.0).unwrap();
        assert!(check_axisymmetric(&p).is_ok());
        let v = g.sample(|x| x[0].powi(4) + x[1].powi(4));
        let p = GpProblem::new(g.clone(), v, [0.0; 3], 1.0).unwrap();
        assert!(matches!(check_axisymmetric(&p), Err(AnalysisError::NotAxisymmetric(_))));
        let v = g.sample(|x| 2.0 * x[0] * x[0] + x[1] * x[1]);
        let p = GpProblem::new(g, v, [0.0; 3], 1.0).unwrap();
        assert!(symmetry_orbit_check(&vortex(p.grid(), 0), &p, &[0.1]).is_err());
    }

    #[test]
    fn mixtures() {
        let g = grid2();
        let v1 = vortex(&g, 1);
        let v2 = vortex(&g, -1);
        let single = build_mixture(vec![(3.0, v1.clone())]).unwrap();
        assert!(is_extreme(&single).unwrap());
        assert!((single.trace() - 1.0).abs() < 1e-12);
        let pair = build_mixture(vec![(1.0, v1.clone()), (1.0, v2)]).unwrap();
        assert!(!is_extreme(&pair).unwrap());
        let ev = pair.eigenvalues().unwrap();
        assert!((ev[0] - 0.5).abs() < 1e-10 && (ev[1] - 0.5).abs() < 1e-10);
        assert!((pair.trace() - 1.0).abs() < 1e-12);
        let twice = build_mixture(vec![(0.2, v1.clone()), (0.8, v1.clone())]).unwrap();
        assert!(is_extreme(&twice).unwrap());
        assert!(build_mixture(vec![(0.0, v1.clone())]).is_err());
        assert!(build_mixture(vec![(-1.0, v1)]).is_err());
    }

    #[test]
    fn scan_assessment_flags_convexity() {
        let mk = |a: f64, e: f64| ScanSample { a, energy: e, mu: e, residual: 0.0, converged: true };
        let concave = assess_scan(vec![mk(0.0, 1.0), mk(1.0, 2.0), mk(2.0, 2.5)], 1e-9);
        assert!(concave.passed);
        let convex = assess_scan(vec![mk(0.0, 1.0), mk(1.0, 1.2), mk(2.0, 2.5)], 1e-9);
        assert!(!convex.passed);
        assert!(convex.concavity_violation > 0.5);
    }
}
