use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use rotogp::analysis::{angular_momentum_z, assess_scan, detect_vortices, detect_vortices_in_slice, ScanSample};
use rotogp::field::{read_dump, write_dump};
use rotogp::gp::{gp_minimize, GpOptions, GpProblem, GpState, InitStrategy};
use rotogp::Grid;
use serde::{Deserialize, Serialize};

use crate::config::{Failure, OmegaSpec};
use crate::report::{write_csv, write_json, Cell, Check, Report};

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProblemFlags {
    /// Spatial dimension, 2 or 3.
    #[arg(long)]
    dim: Option<usize>,
    /// Grid points per axis (even).
    #[arg(long)]
    n: Option<usize>,
    /// Edge length of the periodic box.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    box_len: Option<f64>,
    /// Coupling a ≥ 0.
    #[arg(long)]
    a: Option<f64>,
    /// `harmonic` for |x|², or a JSON file holding the potential on the grid
    /// (flat array, row-major).
    #[arg(long)]
    trap: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Problem {
    dim: usize,
    n: usize,
    #[serde(rename = "box")]
    box_len: f64,
    a: f64,
    trap: String,
}

impl Default for Problem {
    fn default() -> Self {
        Self { dim: 2, n: 64, box_len: 14.0, a: 0.0, trap: "harmonic".into() }
    }
}

impl Problem {
    fn build(&self, omega: [f64; 3]) -> Result<GpProblem, Failure> {
        let grid = Grid::new(self.dim, self.n, self.box_len)?;
        if self.trap == "harmonic" {
            return Ok(GpProblem::harmonic(grid, omega, self.a)?);
        }
        let text = std::fs::read_to_string(&self.trap)
            .map_err(|e| Failure::Config(format!("cannot read trap file {}: {e}", self.trap)))?;
        let v: Vec<f64> = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", self.trap)))?;
        if v.len() != grid.len() {
            return Err(Failure::Config(format!("trap file has {} values, the grid has {}", v.len(), grid.len())));
        }
        Ok(GpProblem::new(grid, v, omega, self.a)?)
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SolverFlags {
    /// gaussian, random-phase, vortex:<q>, or auto (lowest of gaussian, a
    /// unit vortex and random-phase).
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Residual tolerance ‖Gφ − μφ‖₂.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed for the perturbed restarts and the random-phase start.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Solver {
    init: String,
    restarts: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
}

impl Default for Solver {
    fn default() -> Self {
        let o = GpOptions::default();
        Self { init: "auto".into(), restarts: o.restarts, tol: o.tol, max_iter: o.max_iter, seed: o.seed }
    }
}

impl Solver {
    fn options(&self) -> GpOptions {
        GpOptions { tol: self.tol, max_iter: self.max_iter, restarts: self.restarts, seed: self.seed, ..GpOptions::default() }
    }

    fn inits(&self, omega: [f64; 3]) -> Result<Vec<InitStrategy>, Failure> {
        if self.init == "auto" {
            // Positive Ω_z favours negative angular momentum.
            let q = if omega[2] > 0.0 { -1 } else { 1 };
            return Ok(vec![InitStrategy::Gaussian, InitStrategy::Vortex(q), InitStrategy::RandomPhase]);
        }
        Ok(vec![self.init.parse()?])
    }

    /// Lowest-energy state over the requested starts; ties keep the first.
    fn minimize(&self, p: &GpProblem) -> Result<GpState, Failure> {
        let opts = self.options();
        let mut best: Option<GpState> = None;
        for init in self.inits(p.omega())? {
            let s = gp_minimize(p, init, &opts)?;
            if best.as_ref().map_or(true, |b| s.energy < b.energy) {
                best = Some(s);
            }
        }
        Ok(best.expect("at least one start"))
    }
}

/// Edge amplitude relative to the peak above which spectral derivatives of
/// the stored field are no longer trusted.
const BOUNDARY_TOL: f64 = 1e-5;

/// `|μ − E − 4πa‖φ‖₄⁴| / max(1, |μ|)`
fn mu_identity_defect(p: &GpProblem, s: &GpState) -> f64 {
    let quartic = 4.0 * std::f64::consts::PI * p.coupling() * s.phi.l4_pow4();
    (s.mu - s.energy - quartic).abs() / s.mu.abs().max(1.0)
}

#[derive(Args, Debug, Serialize)]
pub struct SolveGpFlags {
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemFlags,
    /// Ω_z, or the full vector as x,y,z.
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<OmegaSpec>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverFlags,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveGp {
    #[serde(flatten)]
    problem: Problem,
    omega: OmegaSpec,
    #[serde(flatten)]
    solver: Solver,
}

pub fn solve_gp(cfg: SolveGp, out: &Path, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    let omega = cfg.omega.vector();
    let p = cfg.problem.build(omega)?;
    let s = cfg.solver.minimize(&p)?;
    let lz = angular_momentum_z(&s.phi)?;
    let vortices = detect_vortices(&s.phi);
    report.output("energy", s.energy);
    report.output("mu", s.mu);
    report.output("residual", s.residual);
    report.output("iterations", s.iterations);
    report.output("winding", vortices.total_winding);
    report.output("Lz", lz);
    report.output("vortices", &vortices);
    report.output("restart_energies", &s.restart_energies);
    report.output("boundary_ratio", s.phi.boundary_ratio());
    report.check(Check::at_most("residual", s.residual, cfg.solver.tol, 0.0));
    report.check(Check::close("norm", s.phi.norm(), 1.0, 1e-10));
    report.check(Check::at_most("mu_identity", mu_identity_defect(&p, &s), 0.0, 1e-8));
    report.output("boundary_warning", s.boundary_warning);
    report.check(Check::at_most("boundary_ratio", s.phi.boundary_ratio(), 0.0, BOUNDARY_TOL));
    write_dump(&out.join("phi.f64"), &s.phi, omega).map_err(|e| Failure::Numerical(e.to_string()))?;
    report.file("phi.f64");
    report.file("phi.json");
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScanOmegaFlags {
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemFlags,
    /// First Ω_z of the scan.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    /// Last Ω_z of the scan.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    /// Number of equally spaced values, endpoints included.
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverFlags,
}

// Flattened parts take their own defaults, so only the scan fields are
// defaulted here.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOmega {
    #[serde(flatten)]
    problem: Problem,
    from: f64,
    to: f64,
    steps: usize,
    #[serde(flatten)]
    solver: Solver,
}

impl Default for ScanOmega {
    fn default() -> Self {
        Self {
            problem: Problem::default(),
            from: 0.0,
            to: -3.0,
            steps: 7,
            solver: Solver::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ScanRow {
    parameter: f64,
    energy: f64,
    mu: f64,
    residual: f64,
    #[serde(rename = "Lz")]
    lz: f64,
    total_winding: i32,
    converged: bool,
}

fn scan_rows(problems: Vec<(f64, GpProblem)>, solver: &Solver) -> Result<Vec<ScanRow>, Failure> {
    problems
        .into_par_iter()
        .map(|(parameter, p)| {
            let s = solver.minimize(&p)?;
            Ok(ScanRow {
                parameter,
                energy: s.energy,
                mu: s.mu,
                residual: s.residual,
                lz: angular_momentum_z(&s.phi)?,
                total_winding: detect_vortices(&s.phi).total_winding,
                converged: s.converged,
            })
        })
        .collect()
}

fn write_scan(path: &Path, name: &str, rows: &[ScanRow]) -> Result<(), Failure> {
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| vec![Cell::F(r.parameter), Cell::F(r.energy), Cell::F(r.mu), Cell::F(r.lz), Cell::I(r.total_winding as i64)])
        .collect();
    write_csv(path, &[name, "energy", "mu", "Lz", "total_winding"], &table)
}

pub fn scan_omega(cfg: ScanOmega, out: &Path, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    if cfg.steps < 2 {
        return Err(Failure::Config("a scan needs at least two steps".into()));
    }
    let problems = (0..cfg.steps)
        .map(|i| {
            let wz = cfg.from + (cfg.to - cfg.from) * i as f64 / (cfg.steps - 1) as f64;
            Ok((wz, cfg.problem.build([0.0, 0.0, wz])?))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let rows = scan_rows(problems, &cfg.solver)?;
    write_scan(&out.join("scan_omega.csv"), "omega_z", &rows)?;
    report.file("scan_omega.csv");
    let first_vortex = rows.iter().find(|r| r.total_winding != 0).map(|r| r.parameter);
    report.output("samples", &rows);
    report.output("first_vortex_omega_z", first_vortex);
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    report.check(Check::at_most("max_residual", worst, cfg.solver.tol, 0.0));
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ScanAFlags {
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemFlags,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<OmegaSpec>,
    /// Couplings, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverFlags,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanA {
    #[serde(flatten)]
    problem: Problem,
    omega: OmegaSpec,
    values: Vec<f64>,
    #[serde(flatten)]
    solver: Solver,
}

impl Default for ScanA {
    fn default() -> Self {
        Self {
            problem: Problem::default(),
            omega: OmegaSpec::default(),
            values: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            solver: Solver::default(),
        }
    }
}

pub fn scan_a(cfg: ScanA, out: &Path, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    let v = &cfg.values;
    if v.len() < 3 || v[0] < 0.0 || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Failure::Config("need at least three nonnegative, strictly increasing couplings".into()));
    }
    let omega = cfg.omega.vector();
    let base = cfg.problem.build(omega)?;
    let problems = v.iter().map(|&a| Ok((a, base.with_coupling(a)?))).collect::<Result<Vec<_>, Failure>>()?;
    let rows = scan_rows(problems, &cfg.solver)?;
    write_scan(&out.join("scan_a.csv"), "a", &rows)?;
    report.file("scan_a.csv");
    let samples = rows
        .iter()
        .map(|r| ScanSample { a: r.parameter, energy: r.energy, mu: r.mu, residual: r.residual, converged: r.converged })
        .collect();
    let scan = assess_scan(samples, 2.0 * cfg.solver.tol);
    report.output("samples", &rows);
    report.check(Check::at_most("monotonicity_violation", scan.monotonicity_violation, 0.0, scan.tolerance));
    report.check(Check::at_most("concavity_violation", scan.concavity_violation, 0.0, scan.tolerance));
    report.check(Check::at_most("scaling_violation", scan.scaling_violation, 0.0, scan.tolerance));
    report.check(Check::holds("all minimizations converged", scan.all_converged));
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AnalyzeFlags {
    /// Field dump (`.f64`) with its JSON sidecar next to it.
    #[arg(long)]
    input: Option<PathBuf>,
    /// z index of the plane searched for vortices in 3D (default: middle).
    #[arg(long)]
    slice: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Analyze {
    input: Option<PathBuf>,
    slice: Option<usize>,
}

pub fn analyze(cfg: Analyze, out: &Path, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    let input = cfg.input.as_ref().ok_or_else(|| Failure::Config("analyze needs --input".into()))?;
    let (phi, header) = read_dump(input)?;
    let grid = phi.grid();
    let vortices = match (grid.dim(), cfg.slice) {
        (3, Some(k)) if k >= grid.n() => return Err(Failure::Config(format!("slice {k} outside 0..{}", grid.n()))),
        (3, Some(k)) => detect_vortices_in_slice(&phi, k),
        _ => detect_vortices(&phi),
    };
    write_json(&out.join("vortices.json"), &vortices)?;
    report.file("vortices.json");
    report.output("vortices", &vortices);
    report.output("winding", vortices.total_winding);
    report.output("Lz", angular_momentum_z(&phi)?);
    report.output("omega", header.omega);
    report.output("norm", phi.norm());
    report.output("boundary_ratio", phi.boundary_ratio());
    report.check(Check::close("norm", phi.norm(), 1.0, 1e-8));
    Ok(())
}
