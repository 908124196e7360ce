use std::path::PathBuf;

use clap::Args;
use rotogp::fock::{
    build_hamiltonian, coherent_state, default_n_max, ground_state, hartree_minimum, number_operator,
    verify_resolution, FockBasis, ModeBasis, OperatorPolynomial,
};
use rotogp::C64;
use serde::{Deserialize, Serialize};

use crate::config::Failure;
use crate::report::{Check, Report};

/// `a+bi`, `a-bi`, `a`, or `bi`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("cannot parse `{s}` as a complex number");
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    // Split at the last sign that is not leading and not part of an exponent.
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        x => x,
    };
    Ok(C64::new(re.parse().map_err(|_| err())?, im.parse().map_err(|_| err())?))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

fn read_tensor(path: &PathBuf) -> Result<Vec<C64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: Vec<Entry> = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(raw
        .into_iter()
        .map(|e| match e {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        })
        .collect())
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FockEdFlags {
    /// Number of modes.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    modes: Option<usize>,
    /// Largest total particle number kept in the basis.
    #[arg(long = "Nmax")]
    #[serde(rename = "Nmax")]
    n_max: Option<usize>,
    /// One-particle energies, comma separated (nonnegative, nondecreasing).
    #[arg(long, value_delimiter = ',')]
    e: Option<Vec<f64>>,
    /// JSON array of the J⁴ entries W_ijkl (row-major), each a number or [re, im].
    /// Default: W_iiii = 1.
    #[arg(long = "W-file")]
    #[serde(rename = "W-file")]
    w_file: Option<PathBuf>,
    /// Factor applied to W.
    #[arg(long)]
    g: Option<f64>,
    /// Particle number of the diagonalized sector (default: Nmax).
    #[arg(long)]
    sector: Option<usize>,
    /// Weight of the number penalty (C/M)(N̂ − M)².
    #[arg(long = "C")]
    #[serde(rename = "C")]
    c: Option<f64>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    m: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct FockEd {
    #[serde(rename = "J")]
    modes: usize,
    #[serde(rename = "Nmax")]
    n_max: Option<usize>,
    e: Option<Vec<f64>>,
    #[serde(rename = "W-file")]
    w_file: Option<PathBuf>,
    g: f64,
    sector: Option<usize>,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "M")]
    m: f64,
}

impl Default for FockEd {
    fn default() -> Self {
        Self { modes: 2, n_max: None, e: None, w_file: None, g: 1.0, sector: None, c: 0.0, m: 1.0 }
    }
}

pub fn fock_ed(cfg: FockEd, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    let j = cfg.modes;
    if j == 0 {
        return Err(Failure::Config("need at least one mode".into()));
    }
    let n_max = cfg.n_max.unwrap_or_else(|| default_n_max(j));
    let n = cfg.sector.unwrap_or(n_max);
    let e = cfg.e.clone().unwrap_or_else(|| (0..j).map(|k| k as f64).collect());
    let w = match &cfg.w_file {
        Some(p) => read_tensor(p)?,
        None => {
            let mut w = vec![C64::new(0.0, 0.0); j.pow(4)];
            for i in 0..j {
                w[((i * j + i) * j + i) * j + i] = C64::new(1.0, 0.0);
            }
            w
        }
    };
    let w = w.into_iter().map(|x| x * cfg.g).collect();
    let mb = ModeBasis::new(e, w, cfg.c, cfg.m)?;
    if mb.modes() != j {
        return Err(Failure::Config(format!("J = {j} but {} energies were given", mb.modes())));
    }
    let basis = FockBasis::new(j, n_max)?;
    let h = build_hamiltonian(&mb, &basis, true)?;
    let gs = ground_state(&h, &basis, n)?;
    let number = number_operator(&basis);
    let commutator = h.mul(&number).add_scaled(&number.mul(&h), C64::new(-1.0, 0.0)).max_abs();
    let occupations: Vec<f64> = (0..j)
        .map(|m| (0..basis.dim()).map(|i| basis.state(i)[m] as f64 * gs.vector[i].norm_sqr()).sum())
        .collect();
    // A product state c^{⊗N} has energy N[Σe|c|² + (N−1)Q(c)] plus the penalty.
    let nf = n as f64;
    let penalty = cfg.c / cfg.m * (nf - cfg.m).powi(2);
    let (e_h, c_h) = hartree_minimum(&mb, (nf - 1.0).max(0.0));
    let product_bound = nf * e_h + penalty;
    let scale = gs.energy.abs().max(1.0);

    report.output("dim", basis.dim());
    report.output("sector_dim", basis.sector(n)?.len());
    report.output("energy", gs.energy);
    report.output("energy_per_particle", if n > 0 { gs.energy / nf } else { 0.0 });
    report.output("residual", gs.residual);
    report.output("occupations", &occupations);
    report.output("product_bound", product_bound);
    report.output("hartree_coefficients", &c_h);
    report.check(Check::at_most("residual", gs.residual, 0.0, 1e-8 * scale));
    report.check(Check::at_most("hermiticity_defect", h.hermiticity_defect(), 0.0, 1e-12 * h.max_abs().max(1.0)));
    report.check(Check::at_most("number_commutator", commutator, 0.0, 1e-12 * h.max_abs().max(1.0) * n_max as f64));
    report.check(Check::at_most("variational_bound", gs.energy, product_bound, 1e-9 * scale));
    report.check(Check::close("occupation_sum", occupations.iter().sum(), nf, 1e-10 * nf.max(1.0)));
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SymbolsFlags {
    /// Normal-ordered polynomial, e.g. "0.5*adag0 adag1 a0 a1 + adag a".
    #[arg(long)]
    op: Option<String>,
    /// Coherent-state labels, one per mode, e.g. 0.7+0.2i,0.1-0.3i.
    #[arg(long, value_delimiter = ',', value_parser = parse_complex, allow_hyphen_values = true)]
    z: Option<Vec<C64>>,
    /// Radius of the disk integrated over in the resolution check.
    #[arg(long = "Z")]
    #[serde(rename = "Z")]
    radius: Option<f64>,
    /// Quadrature nodes per radial and angular direction.
    #[arg(long)]
    nodes: Option<usize>,
    /// Largest particle number on which the resolution is compared.
    #[arg(long)]
    ncut: Option<usize>,
    /// Truncation used for the coherent-state expectation.
    #[arg(long)]
    nmax: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Symbols {
    op: String,
    z: Vec<C64>,
    #[serde(rename = "Z")]
    radius: f64,
    nodes: usize,
    ncut: usize,
    nmax: usize,
}

impl Default for Symbols {
    fn default() -> Self {
        Self { op: "adag a".into(), z: vec![C64::new(0.7, 0.2)], radius: 6.0, nodes: 64, ncut: 3, nmax: 40 }
    }
}

pub fn symbols_check(cfg: Symbols, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    let op: OperatorPolynomial = cfg.op.parse()?;
    let modes = cfg.z.len();
    if modes == 0 || op.modes() > modes {
        return Err(Failure::Config(format!("the operator acts on {} modes but {modes} labels were given", op.modes())));
    }
    let lower = op.lower_symbol(&cfg.z);
    let upper = op.upper_symbol(&cfg.z)?;
    let basis = FockBasis::new(modes, cfg.nmax + op.degree())?;
    let truncated = FockBasis::new(modes, cfg.nmax)?;
    let cs = coherent_state(&cfg.z, &truncated)?;
    let mut state = vec![C64::new(0.0, 0.0); basis.dim()];
    for (i, amp) in cs.state.iter().enumerate() {
        let k = basis.index_of(truncated.state(i)).expect("smaller truncation embeds");
        state[k] = *amp;
    }
    let applied = op.to_operator(&basis)?.apply(&state);
    let expectation: C64 = state.iter().zip(&applied).map(|(x, y)| x.conj() * y).sum();

    report.output("lower", lower);
    report.output("upper", upper);
    report.output("expectation", expectation);
    report.output("coherent_tail", cs.truncation_error);
    report.check(Check::at_most("expectation_vs_lower", (expectation - lower).norm(), 0.0, 1e-6 * lower.norm().max(1.0)));
    if modes <= 2 {
        let res = verify_resolution(&op, modes, cfg.radius, cfg.nodes, cfg.ncut)?;
        report.output("identity_error", res.identity_error);
        report.output("reconstruction_error", res.reconstruction_error);
        report.check(Check::at_most("identity_error", res.identity_error, 0.0, 1e-6));
        report.check(Check::at_most("reconstruction_error", res.reconstruction_error, 0.0, 1e-6));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.7+0.2i").unwrap(), C64::new(0.7, 0.2));
        assert_eq!(parse_complex("-1e-2-3i").unwrap(), C64::new(-0.01, -3.0));
        assert_eq!(parse_complex("2.5").unwrap(), C64::new(2.5, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("1.5e+1i").unwrap(), C64::new(0.0, 15.0));
        assert!(parse_complex("x+2i").is_err());
    }
}
