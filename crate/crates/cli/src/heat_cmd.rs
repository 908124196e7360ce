use clap::Args;
use rotogp::heatkernel::{
    kernel_bound, perturbed_bound_check, weighted_trace, BruteOptions, ConfiningPotential, HeatProfile, RankOne,
};
use serde::{Deserialize, Serialize};

use crate::config::Failure;
use crate::report::{Check, Report};

/// `harmonic [ω]`, `log C1 C2`, `zero`, or a JSON file with a serialized potential.
fn parse_confining(spec: &str) -> Result<ConfiningPotential, Failure> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| Failure::Config(format!("potential `{spec}`: {e}")));
    let v = match words.as_slice() {
        ["zero"] => ConfiningPotential::Zero,
        ["harmonic"] => ConfiningPotential::harmonic(),
        ["harmonic", w] => ConfiningPotential::Harmonic { omega: num(w)? },
        ["log", c1, c2] => ConfiningPotential::LogGrowth { c1: num(c1)?, c2: num(c2)? },
        [path] => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("potential `{spec}` is neither a known form nor a readable file: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{path}: {e}")))?
        }
        _ => return Err(Failure::Config(format!("cannot parse potential `{spec}`"))),
    };
    v.validate()?;
    Ok(v)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct HeatFlags {
    /// `harmonic [ω]`, `log C1 C2`, `zero`, or a JSON potential file.
    #[arg(long = "V")]
    #[serde(rename = "V")]
    potential: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Power of the weight |x|^s in the trace.
    #[arg(long)]
    s: Option<f64>,
    /// 1 or 3.
    #[arg(long)]
    dim: Option<usize>,
    /// Half-width (1D) or radius (3D) of the brute-force box.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    box_len: Option<f64>,
    /// Interior points of the brute-force grid.
    #[arg(long)]
    points: Option<usize>,
    /// Amplitude B of the rank-one perturbation |Φ⟩⟨Φ|, Φ = √B e^{−D|x|} (1D only; 0 disables it).
    #[arg(long = "B")]
    #[serde(rename = "B")]
    b: Option<f64>,
    #[arg(long = "D")]
    #[serde(rename = "D")]
    d: Option<f64>,
    /// Initial radius of the weighted trace domain.
    #[arg(long)]
    trace_radius: Option<f64>,
    /// Largest number of domain doublings.
    #[arg(long)]
    doublings: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct Heat {
    #[serde(rename = "V")]
    potential: String,
    alpha: f64,
    s: f64,
    dim: usize,
    #[serde(rename = "box")]
    box_len: f64,
    points: usize,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "D")]
    d: f64,
    trace_radius: f64,
    doublings: usize,
}

impl Default for Heat {
    fn default() -> Self {
        Self {
            potential: "harmonic".into(),
            alpha: 1.0,
            s: 2.0,
            dim: 1,
            box_len: 8.0,
            points: 127,
            b: 0.0,
            d: 1.0,
            trace_radius: 4.0,
            doublings: 16,
        }
    }
}

pub fn heat_bound(cfg: Heat, report: &mut Report) -> Result<(), Failure> {
    report.config(&cfg);
    let v = parse_confining(&cfg.potential)?;
    if cfg.b > 0.0 && cfg.dim != 1 {
        return Err(Failure::Config("the rank-one perturbation is only checked in one dimension".into()));
    }
    let profile = HeatProfile::new(cfg.alpha, cfg.dim)?;
    let int_h = profile.integral()?;
    let opts = BruteOptions { half_length: cfg.box_len, points: cfg.points, check_drift: true };
    let kb = kernel_bound(&v, cfg.alpha, cfg.dim, &opts)?;
    let max_violation = kb.max_violation();
    let peak = kb.brute_diag.iter().copied().fold(0.0, f64::max);
    let trace = weighted_trace(&v, cfg.alpha, cfg.s, cfg.dim, cfg.trace_radius, cfg.doublings)?;

    report.output("int_h", int_h);
    report.output("max_violation", max_violation);
    report.output("min_ratio", kb.min_ratio(1e-8 * peak));
    report.output("trace_value", trace.value);
    report.output("converged", trace.converged);
    report.output("trace_history", &trace.history);
    report.output("kernel", &kb);
    report.check(Check::close("int_h", int_h, 1.0, 1e-6));
    report.check(Check::at_most("max_violation", max_violation, 0.0, 0.0));
    if cfg.b > 0.0 {
        let pert = perturbed_bound_check(&v, cfg.alpha, RankOne { b: cfg.b, d: cfg.d }, &opts)?;
        report.output("perturbed_max_violation", pert.max_violation);
        report.output("perturbed_slack", pert.slack);
        report.check(Check::at_most("perturbed_max_violation", pert.max_violation, 0.0, pert.slack));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_forms() {
        assert_eq!(parse_confining("harmonic").unwrap(), ConfiningPotential::harmonic());
        assert_eq!(parse_confining("log 2 0").unwrap(), ConfiningPotential::LogGrowth { c1: 2.0, c2: 0.0 });
        assert!(matches!(parse_confining("log -1 0"), Err(Failure::Config(_))));
        assert!(matches!(parse_confining("cubic 1"), Err(Failure::Config(_))));
    }
}
