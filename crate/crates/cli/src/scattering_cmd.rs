use std::f64::consts::PI;

use clap::Args;
use rotogp::dyson::{build_k0, check_dyson_inequality, verify_wr_scaling, CutoffFunction, RadialBox, SoftPotentials};
use rotogp::gp::GpProblem;
use rotogp::scattering::{
    scale_interaction, scattering_length_with, square_barrier_length, Convention, RadialPotential, Shape,
};
use rotogp::Grid;
use serde::{Deserialize, Serialize};

use crate::config::{Failure, OmegaSpec};
use crate::report::{Check, Report};

/// `hardcore R0`, `square R0 W0`, or a JSON file with a serialized potential.
fn parse_potential(spec: &str) -> Result<RadialPotential, Failure> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| Failure::Config(format!("potential `{spec}`: {e}")));
    match words.as_slice() {
        ["hardcore", r0] => Ok(RadialPotential::hard_sphere(num(r0)?)?),
        ["square", r0, w0] => Ok(RadialPotential::square(num(r0)?, num(w0)?)?),
        [path] => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("potential `{spec}` is neither a known form nor a readable file: {e}")))?;
            let raw: RadialPotential =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{path}: {e}")))?;
            // Deserializing bypasses the constructor checks.
            Ok(RadialPotential::new(raw.range(), raw.hard_core(), raw.shape().clone())?)
        }
        _ => Err(Failure::Config(format!("cannot parse potential `{spec}`"))),
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScatteringFlags {
    /// `hardcore R0`, `square R0 W0`, or a JSON potential file.
    #[arg(long)]
    potential: Option<String>,
    /// Evaluate `N² v(N x)` instead of `v`.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// `printed` (u'' = 2vu) or `unit-mass` (u'' = vu).
    #[arg(long)]
    convention: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Scattering {
    potential: String,
    scale: f64,
    tol: f64,
    convention: Convention,
}

impl Default for Scattering {
    fn default() -> Self {
        Self { potential: "hardcore 1".into(), scale: 1.0, tol: 1e-10, convention: Convention::Printed }
    }
}

pub fn scattering(cfg: Scattering, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    let pot = scale_interaction(&parse_potential(&cfg.potential)?, cfg.scale)?;
    let res = scattering_length_with(&pot, cfg.tol, cfg.convention)?;
    report.output("a", res.a);
    report.output("residual", res.match_residual);
    report.output("range", pot.range());
    report.output("f_profile", &res.f_profile);
    let closed = match (pot.hard_core(), pot.shape()) {
        (Some(rc), Shape::Zero) => Some(rc),
        (None, Shape::Square { height }) => Some(match cfg.convention {
            Convention::Printed => square_barrier_length(pot.range(), *height),
            Convention::UnitMass => square_barrier_length(pot.range(), 0.5 * height),
        }),
        _ => None,
    };
    if let Some(exact) = closed {
        report.output("closed_form", exact);
        report.check(Check::close("a_closed_form", res.a, exact, 1e-6 * pot.range()));
    }
    report.check(Check::at_least("a_nonnegative", res.a, 0.0, cfg.tol * pot.range()));
    report.check(Check::at_most("a_below_range", res.a, pot.range(), cfg.tol * pot.range()));
    report.check(Check::at_most("match_residual", res.match_residual, 0.0, 1e-8));
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DysonFlags {
    /// Momentum cutoff scale of χ.
    #[arg(long)]
    s: Option<f64>,
    /// Range R of the soft potentials.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    big_r: Option<f64>,
    /// Fraction ε of the interaction kept in reserve.
    #[arg(long)]
    eps: Option<f64>,
    /// Particle number in the scaling `N² v(N x)`.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    big_n: Option<f64>,
    /// `hardcore R0`, `square R0 W0`, or a JSON potential file.
    #[arg(long)]
    potential: Option<String>,
    /// Radial box length for the Dyson check.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    box_len: Option<f64>,
    /// Radial points on the coarsest level.
    #[arg(long)]
    points: Option<usize>,
    /// Number of refinement levels, each doubling the points.
    #[arg(long)]
    levels: Option<usize>,
    /// η in K₀.
    #[arg(long)]
    eta: Option<f64>,
    /// Number of K₀ eigenvalues.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    modes: Option<usize>,
    #[arg(long)]
    k0_dim: Option<usize>,
    #[arg(long)]
    k0_n: Option<usize>,
    #[arg(long)]
    k0_box: Option<f64>,
    /// Rotation of the trap in K₀: Ω_z or x,y,z.
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<OmegaSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Dyson {
    s: f64,
    #[serde(rename = "R")]
    big_r: f64,
    eps: f64,
    #[serde(rename = "N")]
    big_n: f64,
    potential: String,
    #[serde(rename = "box")]
    box_len: f64,
    points: usize,
    levels: usize,
    eta: f64,
    #[serde(rename = "J")]
    modes: usize,
    k0_dim: usize,
    k0_n: usize,
    k0_box: f64,
    omega: OmegaSpec,
}

impl Default for Dyson {
    fn default() -> Self {
        Self {
            s: 1.0,
            big_r: 0.2,
            eps: 0.5,
            big_n: 1.0,
            potential: "hardcore 0.04".into(),
            box_len: 4.0,
            points: 200,
            levels: 3,
            eta: 0.5,
            modes: 3,
            k0_dim: 2,
            k0_n: 48,
            k0_box: 10.0,
            omega: OmegaSpec::default(),
        }
    }
}

pub fn dyson_check(cfg: Dyson, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    if cfg.levels == 0 || cfg.modes == 0 {
        return Err(Failure::Config("levels and J must be positive".into()));
    }
    let cutoff = CutoffFunction::new(cfg.s)?;
    let sp = SoftPotentials::build(cutoff, cfg.big_r, cfg.eps)?;
    let r = cfg.big_r;
    let scaling = verify_wr_scaling(cutoff, &[0.1 * r, 0.2 * r, 0.5 * r, r])?;
    let v = scale_interaction(&parse_potential(&cfg.potential)?, cfg.big_n)?;
    let dyson = check_dyson_inequality(&v, &sp, RadialBox { length: cfg.box_len, points: cfg.points }, cfg.levels)?;
    let p = GpProblem::harmonic(Grid::new(cfg.k0_dim, cfg.k0_n, cfg.k0_box)?, cfg.omega.vector(), 0.0)?;
    let k0 = build_k0(&p, &cutoff, cfg.eta, cfg.modes)?;

    report.output("int_UR", sp.int_u_r());
    report.output("int_wR", sp.int_w_r());
    report.output("slope", scaling.slope);
    report.output("wR_sweep", &scaling);
    report.output("a", dyson.a);
    report.output("min_eig", dyson.min_eig);
    report.output("slack", dyson.slack);
    report.output("drift", dyson.drift);
    report.output("levels", &dyson.levels);
    report.output("kappa", k0.kappa);
    report.output("e_spectrum", &k0.energies);
    report.output("e_residuals", &k0.residuals);

    report.check(Check::close("int_UR", sp.int_u_r(), 4.0 * PI, 1e-8));
    report.check(Check::at_least("wR_slope", scaling.slope, 2.0, 0.1));
    report.check(Check::at_least("dyson_min_eig", dyson.min_eig, 0.0, dyson.slack));
    report.check(Check::at_least("k0_lowest", k0.energies[0], 0.0, 1e-8));
    Ok(())
}
