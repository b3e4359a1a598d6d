use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{probe_points, MatrixField, Monomial, Polynomial};
use crate::interval_sheaf::grid_count;
use crate::metriplectic::MetriplecticSystem;
use crate::ode_behavior::{OdeBehavior, VectorField};
use crate::port_hamiltonian::PHSystem;
use crate::signal::Signal;

/// Smallest and largest accepted node count `length / step`.
pub const NODE_RANGE: (f64, f64) = (10.0, 1e7);

pub const BUILT_INS: [&str; 4] = ["mass_spring", "blowup", "rigid_body", "linear"];

fn one() -> f64 {
    1.0
}

fn i2() -> f64 {
    2.0
}

fn i3() -> f64 {
    3.0
}

fn gamma() -> f64 {
    0.1
}

/// A system description, tagged by `"system"` in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum SystemSpec {
    MassSpring {
        #[serde(default = "one")]
        k: f64,
        #[serde(default = "one")]
        m: f64,
    },
    Blowup,
    /// `ẋ = Ax`.
    Linear {
        #[serde(default = "default_linear")]
        #[serde(alias = "A")]
        a: Vec<Vec<f64>>,
    },
    RigidBody {
        #[serde(default = "one")]
        i1: f64,
        #[serde(default = "i2")]
        i2: f64,
        #[serde(default = "i3")]
        i3: f64,
        #[serde(default = "gamma")]
        gamma: f64,
    },
    /// Constant `J`, `R`, `B` and a polynomial `H`.
    PhMatrices {
        #[serde(alias = "J")]
        j: Vec<Vec<f64>>,
        #[serde(alias = "R")]
        r: Vec<Vec<f64>>,
        #[serde(alias = "B")]
        b: Vec<Vec<f64>>,
        #[serde(alias = "H")]
        h: Vec<Monomial>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
    /// Constant `J`, `G`, `B`, `A`, `Jt`, `Gt` and polynomial `H`, `S`.
    MpMatrices {
        #[serde(alias = "J")]
        j: Vec<Vec<f64>>,
        #[serde(alias = "G")]
        g: Vec<Vec<f64>>,
        #[serde(alias = "B")]
        b: Vec<Vec<f64>>,
        #[serde(alias = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "Jt", alias = "jt")]
        jt: Vec<Vec<f64>>,
        #[serde(rename = "Gt", alias = "gt")]
        gt: Vec<Vec<f64>>,
        #[serde(alias = "H")]
        h: Vec<Monomial>,
        #[serde(alias = "S")]
        s: Vec<Monomial>,
    },
}

fn default_linear() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![-1.0, -0.1]]
}

/// Input curves for port systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    Zero,
    Constant { value: Vec<f64> },
    /// `amplitude · sin(frequency · t + phase)` in every channel.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl InputSpec {
    pub fn signal(&self, width: usize) -> Result<Signal> {
        Ok(match self {
            InputSpec::Zero => Signal::zero(width),
            InputSpec::Constant { value } => {
                if value.len() != width {
                    return Err(Error::Config(format!("constant input has {} channels, expected {width}", value.len())));
                }
                Signal::constant(DVector::from_vec(value.clone()))
            }
            InputSpec::Sine {
                amplitude,
                frequency,
                phase,
            } => Signal::sine(width, *amplitude, *frequency, *phase),
        })
    }
}

/// Contents of a `--config` file: a system plus optional initial value and
/// inputs (`tau` is the second input of metriplectic port systems).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(flatten)]
    pub system: SystemSpec,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub input: Option<InputSpec>,
    #[serde(default)]
    pub tau: Option<InputSpec>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl SystemSpec {
    pub fn built_in(name: &str) -> Result<Self> {
        Ok(match name {
            "mass_spring" => SystemSpec::MassSpring { k: 1.0, m: 1.0 },
            "blowup" => SystemSpec::Blowup,
            "rigid_body" => SystemSpec::RigidBody {
                i1: 1.0,
                i2: 2.0,
                i3: 3.0,
                gamma: 0.1,
            },
            "linear" => SystemSpec::Linear { a: default_linear() },
            _ => {
                return Err(Error::Config(format!(
                    "unknown system `{name}`; built-in systems: {}",
                    BUILT_INS.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::MassSpring { .. } => "mass_spring",
            SystemSpec::Blowup => "blowup",
            SystemSpec::Linear { .. } => "linear",
            SystemSpec::RigidBody { .. } => "rigid_body",
            SystemSpec::PhMatrices { .. } => "ph_matrices",
            SystemSpec::MpMatrices { .. } => "mp_matrices",
        }
    }

    pub fn model(&self, step: f64) -> Result<Model> {
        Ok(match self {
            SystemSpec::MassSpring { k, m } => Model::Ph(PHSystem::mass_spring(*k, *m)?.with_step(step)),
            SystemSpec::Blowup => Model::Ode(OdeBehavior::new("blowup", VectorField::blowup()).with_step(step)),
            SystemSpec::Linear { a } => {
                let a = matrix("a", a, None)?;
                Model::Ode(OdeBehavior::new("linear", VectorField::linear(a)?).with_step(step))
            }
            SystemSpec::RigidBody { i1, i2, i3, gamma } => {
                Model::Mp(MetriplecticSystem::rigid_body([*i1, *i2, *i3], *gamma)?.with_step(step))
            }
            SystemSpec::PhMatrices { j, r, b, h, labels } => {
                let j = matrix("j", j, None)?;
                let n = j.nrows();
                let b = matrix("b", b, Some(n))?;
                let sys = PHSystem::new(
                    "ph_matrices",
                    MatrixField::constant(j),
                    MatrixField::constant(matrix("r", r, Some(n))?),
                    MatrixField::constant(b),
                    Polynomial::new(h.clone()).into_field(n)?,
                )?;
                let sys = match labels {
                    Some(l) => sys.with_labels(l.clone())?,
                    None => sys,
                };
                Model::Ph(sys.with_step(step))
            }
            SystemSpec::MpMatrices { j, g, b, a, jt, gt, h, s } => {
                let j = matrix("j", j, None)?;
                let n = j.nrows();
                let b = matrix("b", b, Some(n))?;
                let m = b.ncols();
                let c = |name, rows, v: &Vec<Vec<f64>>| matrix(name, v, Some(rows)).map(MatrixField::constant);
                let sys = MetriplecticSystem::new(
                    "mp_matrices",
                    MatrixField::constant(j),
                    c("g", n, g)?,
                    Polynomial::new(h.clone()).into_field(n)?,
                    Polynomial::new(s.clone()).into_field(n)?,
                )?
                .with_ports(MatrixField::constant(b), c("a", n, a)?, c("Jt", m, jt)?, c("Gt", m, gt)?)?;
                Model::Mp(sys.with_step(step))
            }
        })
    }

    /// Initial value used when the configuration gives none.
    pub fn default_x0(&self, model: &Model, seed: u64) -> Vec<f64> {
        match self {
            SystemSpec::MassSpring { .. } => vec![1.0, 0.0],
            SystemSpec::Blowup => vec![1.0],
            SystemSpec::RigidBody { .. } => vec![1.0, 0.5, -0.3],
            _ => probe_points(model.dim(), 1, seed)[0].iter().copied().collect(),
        }
    }
}

/// Rows of a dense matrix; `rows` pins the row count when known.
fn matrix(name: &str, v: &[Vec<f64>], rows: Option<usize>) -> Result<DMatrix<f64>> {
    let r = rows.unwrap_or(v.len());
    if v.len() != r {
        return Err(Error::Config(format!("matrix `{name}` has {} rows, expected {r}", v.len())));
    }
    let c = v.first().map_or(0, Vec::len);
    if v.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("matrix `{name}` has ragged rows")));
    }
    Ok(DMatrix::from_row_iterator(r, c, v.iter().flatten().copied()))
}

/// A system ready to run.
#[derive(Debug, Clone)]
pub enum Model {
    Ode(OdeBehavior),
    Ph(PHSystem),
    Mp(MetriplecticSystem),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Ode(b) => b.field().dim(),
            Model::Ph(s) => s.dims().0,
            Model::Mp(s) => s.dims().0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Audit,
    CheckSheaf,
    VerifyDiagram,
    PhSimulate,
    PhAuditPower,
    PhVerifyDiagram,
    MpSimulate,
    MpAuditRates,
    MpCheckNoninteraction,
    MpVerifyDiagram,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Audit => "audit",
            Command::CheckSheaf => "check-sheaf",
            Command::VerifyDiagram => "verify-diagram",
            Command::PhSimulate => "ph simulate",
            Command::PhAuditPower => "ph audit-power",
            Command::PhVerifyDiagram => "ph verify-diagram",
            Command::MpSimulate => "mp simulate",
            Command::MpAuditRates => "mp audit-rates",
            Command::MpCheckNoninteraction => "mp check-noninteraction",
            Command::MpVerifyDiagram => "mp verify-diagram",
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub system: SystemSpec,
    pub x0: Option<Vec<f64>>,
    pub input: InputSpec,
    pub tau: InputSpec,
    pub length: f64,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Raw flag values before resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Flags {
    pub system: Option<String>,
    pub config: Option<PathBuf>,
    pub length: f64,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            system: None,
            config: None,
            length: 10.0,
            step: 1e-3,
            tolerance: 1e-5,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let file = flags.config.as_deref().map(ConfigFile::load).transpose()?;
        let system = match (&flags.system, &file) {
            (_, Some(f)) => {
                if let Some(name) = &flags.system {
                    if name != f.system.name() {
                        return Err(Error::Config(format!(
                            "--system {name} conflicts with config system `{}`",
                            f.system.name()
                        )));
                    }
                }
                f.system.clone()
            }
            (Some(name), None) => SystemSpec::built_in(name)?,
            (None, None) => {
                return Err(Error::Config(format!(
                    "give --system or --config; built-in systems: {}",
                    BUILT_INS.join(", ")
                )))
            }
        };
        for (what, v) in [("length", flags.length), ("step", flags.step), ("tol", flags.tolerance)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("--{what} must be positive, got {v}")));
            }
        }
        let nodes = flags.length / flags.step;
        if !(NODE_RANGE.0..=NODE_RANGE.1).contains(&nodes) {
            return Err(Error::Config(format!(
                "length/step = {nodes} outside the accepted range [{}, {}]",
                NODE_RANGE.0, NODE_RANGE.1
            )));
        }
        grid_count(flags.length, flags.step).map_err(|e| Error::Config(e.to_string()))?;
        let (x0, input, tau) = match file {
            Some(f) => (f.x0, f.input, f.tau),
            None => (None, None, None),
        };
        Ok(Self {
            command,
            system,
            x0,
            input: input.unwrap_or(InputSpec::Sine {
                amplitude: 1.0,
                frequency: 1.0,
                phase: 0.0,
            }),
            tau: tau.unwrap_or(InputSpec::Zero),
            length: flags.length,
            step: flags.step,
            tolerance: flags.tolerance,
            seed: flags.seed,
            output_dir: flags.out.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_systems() {
        let f = ConfigFile::from_json(r#"{"system": "mass_spring", "k": 4.0}"#).unwrap();
        assert_eq!(f.system, SystemSpec::MassSpring { k: 4.0, m: 1.0 });
        let f = ConfigFile::from_json(
            r#"{"system": "ph_matrices", "j": [[0, 1], [-1, 0]], "r": [[0, 0], [0, 0.1]], "b": [[0], [1]],
                "h": [{"coeff": 0.5, "powers": [2, 0]}, {"coeff": 0.5, "powers": [0, 2]}],
                "x0": [1, 0], "input": {"kind": "constant", "value": [0.5]}}"#,
        )
        .unwrap();
        assert_eq!(f.x0, Some(vec![1.0, 0.0]));
        let Model::Ph(sys) = f.system.model(1e-3).unwrap() else { panic!() };
        assert_eq!(sys.dims(), (2, 1));
        let f = ConfigFile::from_json(r#"{"system": "rigid_body", "gamma": 0.5}"#).unwrap();
        assert!(matches!(f.system.model(1e-3).unwrap(), Model::Mp(_)));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ConfigFile::from_json(r#"{"system": "pendulum"}"#).is_err());
        let f = ConfigFile::from_json(r#"{"system": "linear", "a": [[1, 2], [3]]}"#).unwrap();
        assert!(matches!(f.system.model(1e-3), Err(Error::Config(_))));
        let flags = Flags {
            system: Some("mass_spring".into()),
            length: 1e-3,
            ..Flags::default()
        };
        assert!(matches!(RunConfig::resolve(Command::Simulate, &flags), Err(Error::Config(_))));
        let flags = Flags {
            system: Some("nope".into()),
            ..Flags::default()
        };
        match RunConfig::resolve(Command::Simulate, &flags) {
            Err(Error::Config(msg)) => assert!(msg.contains("mass_spring, blowup, rigid_body")),
            other => panic!("{other:?}"),
        }
    }
}
