//! Cross-checks of library routines against independent computations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rotogp::dyson::{kappa, CutoffFunction, SoftPotentials};
use rotogp::fock::{coherent_state, ladder_operators, FockBasis, OperatorPolynomial};
use rotogp::gp::{gp_minimize, GpOptions, GpProblem, InitStrategy};
use rotogp::heatkernel::{brute_diag_radial, diag_bound, BruteOptions, ConfiningPotential, HeatProfile};
use rotogp::quad::integrate;
use rotogp::scattering::{scattering_length, RadialPotential, Shape};
use rotogp::{Grid, C64};

/// Lowest eigenvalue of `−u'' + r⁴u` on `(0, R)` with Dirichlet ends,
/// second-order finite differences.
fn radial_quartic_fd(big_r: f64, n: usize) -> f64 {
    let h = big_r / (n + 1) as f64;
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let r = (i + 1) as f64 * h;
            2.0 / (h * h) + r.powi(4)
        } else if i.abs_diff(j) == 1 {
            -1.0 / (h * h)
        } else {
            0.0
        }
    });
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn kappa_matches_radial_quartic_oscillator() {
    let coarse = radial_quartic_fd(6.0, 399);
    let fine = radial_quartic_fd(6.0, 799);
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    let p = GpProblem::harmonic(Grid::new(3, 24, 7.0).unwrap(), [0.0; 3], 0.0).unwrap();
    let k = kappa(&p, 1.0).unwrap();
    assert!((k - extrapolated).abs() < 1e-5, "{k} vs {extrapolated}");
}

#[test]
fn thomas_fermi_regime_energy_scaling() {
    // For strong coupling in 2D the energy grows like √a.
    let p = GpProblem::harmonic(Grid::new(2, 64, 16.0).unwrap(), [0.0; 3], 0.0).unwrap();
    let opts = GpOptions::default();
    let e = |a: f64| gp_minimize(&p.with_coupling(a).unwrap(), InitStrategy::Gaussian, &opts).unwrap().energy;
    let (e1, e2) = (e(25.0), e(100.0));
    let ratio = e2 / e1;
    assert!(ratio > 1.8 && ratio < 2.0, "{ratio}");
}

#[test]
fn scattering_of_tabulated_square_matches_square() {
    let r: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
    let w = vec![3.0; r.len()];
    let tab = RadialPotential::new(1.0, None, Shape::Tabulated { r, w }).unwrap();
    let a_tab = scattering_length(&tab, 1e-10).unwrap().a;
    let a_sq = scattering_length(&RadialPotential::square(1.0, 3.0).unwrap(), 1e-10).unwrap().a;
    assert!((a_tab - a_sq).abs() < 1e-9);
}

#[test]
fn hat_potential_integral_by_quadrature() {
    let sp = SoftPotentials::build(CutoffFunction::new(1.0).unwrap(), 0.3, 0.5).unwrap();
    let inner = 0.3 * 2f64.powf(-1.0 / 3.0);
    let direct = integrate(|r| 4.0 * PI * r * r * sp.u_r(r), inner, 0.3, 1e-14, 1e-13).unwrap().0;
    assert!((direct - 4.0 * PI).abs() < 1e-10);
}

#[test]
fn coherent_state_is_displaced_vacuum() {
    // |z⟩ = e^{z a† − z̄ a}|0⟩, built from the matrix exponential series.
    let basis = FockBasis::new(1, 40).unwrap();
    let z = C64::new(0.5, 0.8);
    let (a, adag) = ladder_operators(&basis, 0).unwrap();
    let gen = adag.to_dense() * z - a.to_dense() * z.conj();
    let dim = basis.dim();
    let mut vac = nalgebra::DVector::<C64>::zeros(dim);
    vac[0] = C64::new(1.0, 0.0);
    let mut term = vac.clone();
    let mut sum = vac.clone();
    for k in 1..80 {
        term = &gen * term / C64::new(k as f64, 0.0);
        sum += &term;
    }
    let cs = coherent_state(&[z], &basis).unwrap();
    for i in 0..20 {
        assert!((sum[i] - cs.state[i]).norm() < 1e-12, "{i}");
    }
}

#[test]
fn upper_symbol_expectation_in_coherent_state() {
    // ⟨z|op|z⟩ equals the lower symbol; check the quartic one directly.
    let basis = FockBasis::new(2, 30).unwrap();
    let z = [C64::new(0.3, 0.4), C64::new(-0.5, 0.1)];
    let op: OperatorPolynomial = "0.7*adag0 adag1 a1 a0 + adag1 a0 + 2*adag0 a0".parse().unwrap();
    let m = op.to_operator(&basis).unwrap();
    let cs = coherent_state(&z, &basis).unwrap();
    let mv = m.apply(&cs.state);
    let expect: C64 = cs.state.iter().zip(&mv).map(|(x, y)| x.conj() * y).sum();
    assert!((expect - op.lower_symbol(&z)).norm() < 1e-12);
}

#[test]
fn radial_bound_dominates_three_dimensional_harmonic_kernel() {
    let alpha = 0.8;
    let v = ConfiningPotential::harmonic();
    let p = HeatProfile::new(alpha, 3).unwrap();
    let (r, brute) = brute_diag_radial(&v, alpha, &BruteOptions { half_length: 6.0, points: 100, check_drift: false }).unwrap();
    for (ri, bi) in r.iter().zip(&brute).filter(|(r, _)| **r > 0.3 && **r < 4.0) {
        let mehler = (2.0 * PI * (2.0 * alpha).sinh()).powf(-1.5) * (-ri * ri * alpha.tanh()).exp();
        assert!((bi / mehler - 1.0).abs() < 1e-4, "{ri}: {bi} vs {mehler}");
        assert!(diag_bound(&p, &v, *ri) >= mehler, "{ri}");
    }
}
