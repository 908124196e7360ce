//! Ground states of rotating dilute Bose gases in the Gross–Pitaevskii
//! description, together with numerical checks of the constructions used to
//! derive that description from many-body quantum mechanics.
//!
//! Units are ħ = 2m = 1. The one-body operator is `(p + A)² + V` with
//! `A(x) = ½ Ω ∧ x`.

pub mod analysis;
pub mod dyson;
pub mod field;
pub mod fock;
pub mod gp;
pub mod heatkernel;
pub mod linalg;
pub mod quad;
pub mod scattering;

pub use field::{ComplexField, GaugeField, Grid, C64};
