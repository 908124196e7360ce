use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rotogp::analysis::AnalysisError;
use rotogp::dyson::DysonError;
use rotogp::field::FieldError;
use rotogp::fock::FockError;
use rotogp::gp::GpError;
use rotogp::heatkernel::HeatError;
use rotogp::scattering::ScatteringError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Why a run stopped. Config errors exit with 2, numerical ones with 1.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "invalid configuration: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::GridMismatch => Self::Numerical(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<GpError> for Failure {
    fn from(e: GpError) -> Self {
        match e {
            GpError::Field(f) => f.into(),
            GpError::InvalidProblem(_) | GpError::UnknownInit(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Field(f) => f.into(),
            AnalysisError::Gp(g) => g.into(),
            AnalysisError::InvalidScan(_) | AnalysisError::NotAxisymmetric(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ScatteringError> for Failure {
    fn from(e: ScatteringError) -> Self {
        match e {
            ScatteringError::StepUnderflow(_) => Self::Numerical(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<DysonError> for Failure {
    fn from(e: DysonError) -> Self {
        match e {
            DysonError::InvalidParameter(_) => Self::Config(e.to_string()),
            DysonError::Field(f) => f.into(),
            DysonError::Scattering(s) => s.into(),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<FockError> for Failure {
    fn from(e: FockError) -> Self {
        match e {
            FockError::Eigen(_) | FockError::TailBound(_) => Self::Numerical(e.to_string()),
            FockError::Field(f) => f.into(),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<HeatError> for Failure {
    fn from(e: HeatError) -> Self {
        match e {
            HeatError::InvalidParameter(_) | HeatError::Dimension(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

/// Persisted form of a run: enough to reproduce it bit for bit.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl RunFile {
    pub fn load(path: &Path, subcommand: &str) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: RunFile =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        if let Some(s) = &file.subcommand {
            if s != subcommand {
                return Err(Failure::Config(format!("{} is a `{s}` run file, not `{subcommand}`", path.display())));
            }
        }
        Ok(file)
    }
}

/// Overlays the flags that were given on top of the file values and fills
/// the rest with defaults. Keys that no parameter consumes are rejected.
pub fn resolve<P: DeserializeOwned + Serialize, F: Serialize>(
    file: Option<&Map<String, Value>>,
    flags: &F,
) -> Result<P, Failure> {
    let mut merged = file.cloned().unwrap_or_default();
    match serde_json::to_value(flags) {
        Ok(Value::Object(over)) => merged.extend(over.into_iter().filter(|(_, v)| !v.is_null())),
        Ok(_) => unreachable!("flag structs serialize to objects"),
        Err(e) => return Err(Failure::Config(e.to_string())),
    }
    let keys: Vec<String> = merged.keys().cloned().collect();
    let params: P = serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::Config(e.to_string()))?;
    if let Ok(Value::Object(known)) = serde_json::to_value(&params) {
        if let Some(k) = keys.iter().find(|k| !known.contains_key(*k)) {
            return Err(Failure::Config(format!("unknown parameter `{k}`")));
        }
    }
    Ok(params)
}

/// Rotation vector given as `Ω_z` or as `x,y,z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Axial(f64),
    Vector([f64; 3]),
}

impl Default for OmegaSpec {
    fn default() -> Self {
        Self::Axial(0.0)
    }
}

impl OmegaSpec {
    pub fn vector(self) -> [f64; 3] {
        match self {
            Self::Axial(z) => [0.0, 0.0, z],
            Self::Vector(v) => v,
        }
    }
}

impl FromStr for OmegaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        match parts.as_slice() {
            [z] => Ok(Self::Axial(*z)),
            [x, y, z] => Ok(Self::Vector([*x, *y, *z])),
            _ => Err(format!("expected Ω_z or x,y,z, got `{s}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Flags {
        n: Option<usize>,
        tol: Option<f64>,
    }

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    #[serde(default)]
    struct Params {
        n: usize,
        tol: f64,
        seed: u64,
    }

    impl Default for Params {
        fn default() -> Self {
            Self { n: 8, tol: 1e-7, seed: 0 }
        }
    }

    #[test]
    fn flags_override_file_and_defaults_fill_the_rest() {
        let file: Map<String, Value> = serde_json::from_str(r#"{"n": 16, "seed": 4}"#).unwrap();
        let p: Params = resolve(Some(&file), &Flags { n: Some(32), tol: None }).unwrap();
        assert_eq!(p, Params { n: 32, tol: 1e-7, seed: 4 });
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let file: Map<String, Value> = serde_json::from_str(r#"{"nn": 16}"#).unwrap();
        let r: Result<Params, _> = resolve(Some(&file), &Flags { n: None, tol: None });
        assert!(matches!(r, Err(Failure::Config(_))));
    }

    #[test]
    fn omega_forms() {
        assert_eq!("-1.5".parse::<OmegaSpec>().unwrap().vector(), [0.0, 0.0, -1.5]);
        assert_eq!("1,0,2".parse::<OmegaSpec>().unwrap().vector(), [1.0, 0.0, 2.0]);
        assert!("1,2".parse::<OmegaSpec>().is_err());
        let v: OmegaSpec = serde_json::from_str("[0, 0, 3]").unwrap();
        assert_eq!(v, OmegaSpec::Vector([0.0, 0.0, 3.0]));
    }
}
