//! Command-line driver: built-in examples, configuration, simulation,
//! audits, sheaf checks and diagram verification, writing CSV trajectories
//! and a JSON report into the output directory.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 for
//! configuration and I/O errors.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use self::config::{Command, ConfigFile, Flags, InputSpec, Model, RunConfig, SystemSpec, BUILT_INS, NODE_RANGE};
use crate::error::{Error, Result};
use crate::fields::probe_points;
use crate::interval_sheaf::{check_sheaf_axioms, grid_count, restrict, write_csv_file, Sheaf, Trajectory};
use crate::machine::{default_cuts, DiagramReport};
use crate::metriplectic::{self as mp, MetriplecticSystem};
use crate::ode_behavior::{membership_residual, OdeBehavior};
use crate::port_hamiltonian::{self as ph, PHSystem};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Probes per diagram verification.
pub const DIAGRAM_PROBES: usize = 5;
/// Probes per sheaf-axiom check.
pub const SHEAF_PROBES: usize = 10;
/// Points for the noninteraction check.
pub const NONINTERACTION_POINTS: usize = 100;
/// Slack for `Ṡ ≥ 0` in metriplectic audits.
pub const ENTROPY_RATE_SLACK: f64 = 1e-8;

mod notes {
    pub const ZETA_SIGN: &str = "zeta-sign: port coordinates use dζ/dt = -y, so the mass-spring from (1, 0) gives ζ = 1 - cos t";
    pub const LEG_ROLES: &str = "leg-roles: the closed machine's constant leg is the aux-gradient leg and its port leg is the port-rate leg";
    pub const PORT_RATE: &str = "port-rate-leg: -dζ/dt is read from the enclosing vector field, not differentiated from samples";
    pub const BLOW_UP: &str = "blow-up: only the observed forward blow-up time is reported; the maximal interval is not adjudicated";
    pub const BLOW_UP_PROBES: &str = "blow-up-probes: initial values are scaled so that every probe exists on the whole interval";
    pub const TAU: &str = "tau-channel: the second port input is named tau_in";
    pub const SIDE_CONDITIONS: &str = "side-conditions: J∇S = G∇H = Bτ = Au = 0 plus strong noninteraction are enforced; the dimensionally inconsistent Gu = 0 is not";
    pub const MP_ZETA_SIGN: &str = "mp-zeta-sign: ζ = -∫(Bᵀ∇H - Aᵀ∇S), the sign that matches the extended dynamics";
}

/// The JSON report written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub system: String,
    pub pass: bool,
    pub residuals: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub version: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

impl Report {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            command: cfg.command.name().into(),
            system: cfg.system.name().into(),
            pass: true,
            residuals: BTreeMap::new(),
            notes: Vec::new(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            details: None,
        }
    }

    fn set(&mut self, name: &str, value: f64) {
        self.residuals.insert(name.into(), value);
    }

    /// Records `value` and fails the report unless `value <= limit`.
    fn bound(&mut self, name: &str, value: f64, limit: f64) {
        self.set(name, value);
        self.pass &= value <= limit;
    }

    fn note(&mut self, n: &str) {
        if !self.notes.iter().any(|m| m == n) {
            self.notes.push(n.into());
        }
    }

    fn details(&mut self, v: &impl Serialize) -> Result<()> {
        self.details = Some(serde_json::to_value(v)?);
        Ok(())
    }
}

/// Text of `list-examples`.
pub fn list_examples() -> String {
    [
        ("mass_spring", "k=1 m=1 x0=(1, 0)", "extended mass-spring system; port-Hamiltonian construction"),
        ("blowup", "x0=1", "dx/dt = x^2, finite-time blow-up of maximal solutions"),
        ("rigid_body", "I=(1, 2, 3) gamma=0.1 x0=(1, 0.5, -0.3)", "metriplectic toy; port-metriplectic construction"),
        ("linear", "a=[[0, 1], [-1, -0.1]]", "damped oscillator dx/dt = Ax"),
    ]
    .iter()
    .map(|(name, params, about)| format!("{name:<12} {params:<40} {about}"))
    .collect::<Vec<_>>()
    .join("\n")
        + "\n"
}

fn closed(model: &Model) -> Result<OdeBehavior> {
    match model {
        Model::Ode(b) => Ok(b.clone()),
        Model::Ph(s) => ph::closed_behavior(s),
        Model::Mp(s) => mp::closed_metriplectic_behavior(s),
    }
}

fn ph_model(model: &Model, cfg: &RunConfig) -> Result<PHSystem> {
    match model {
        Model::Ph(s) => Ok(s.clone()),
        _ => Err(Error::Config(format!(
            "`{}` needs a port-Hamiltonian system (mass_spring or ph_matrices), got `{}`",
            cfg.command.name(),
            cfg.system.name()
        ))),
    }
}

fn mp_model(model: &Model, cfg: &RunConfig) -> Result<MetriplecticSystem> {
    match model {
        Model::Mp(s) => Ok(s.clone()),
        _ => Err(Error::Config(format!(
            "`{}` needs a metriplectic system (rigid_body or mp_matrices), got `{}`",
            cfg.command.name(),
            cfg.system.name()
        ))),
    }
}

fn x0(cfg: &RunConfig, model: &Model) -> Result<Vec<f64>> {
    let x0 = cfg.x0.clone().unwrap_or_else(|| cfg.system.default_x0(model, cfg.seed));
    if x0.len() != model.dim() {
        return Err(Error::Config(format!("x0 has {} entries, expected {}", x0.len(), model.dim())));
    }
    Ok(x0)
}

/// Seeded members of the closed behavior, all defined on `[0, length]`.
pub fn sheaf_probes(spec: &SystemSpec, b: &OdeBehavior, count: usize, seed: u64, length: f64) -> Result<Vec<Trajectory>> {
    // ẋ = x² from x₀ exists up to 1/x₀, so |x₀| ≤ 1/(2·length) keeps a margin
    let scale = match spec {
        SystemSpec::Blowup => (0.25 / length).min(1.0),
        _ => 1.0,
    };
    probe_points(b.field().dim(), count, seed)
        .iter()
        .map(|p| b.integrate((p * scale).as_slice(), 0.0, length))
        .collect()
}

fn write(cfg: &RunConfig, name: &str, e: &Trajectory) -> Result<()> {
    write_csv_file(e, cfg.output_dir.join(name))
}

/// Runs the command and writes its outputs; check failures that surface as
/// errors are returned as errors.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    fs::create_dir_all(&cfg.output_dir)?;
    let model = cfg.system.model(cfg.step)?;
    let mut r = Report::new(cfg);
    match cfg.command {
        Command::Simulate => simulate(cfg, &model, &mut r)?,
        Command::Audit => audit(cfg, &model, &mut r)?,
        Command::CheckSheaf => check_sheaf(cfg, &model, &mut r)?,
        Command::VerifyDiagram => verify_diagram(cfg, &model, &mut r)?,
        Command::PhSimulate => ph_simulate(cfg, &ph_model(&model, cfg)?, &mut r)?,
        Command::PhAuditPower => ph_audit_power(cfg, &ph_model(&model, cfg)?, &mut r)?,
        Command::PhVerifyDiagram => {
            ph_model(&model, cfg)?;
            verify_diagram(cfg, &model, &mut r)?
        }
        Command::MpSimulate => mp_simulate(cfg, &mp_model(&model, cfg)?, &mut r)?,
        Command::MpAuditRates => mp_audit_rates(cfg, &mp_model(&model, cfg)?, &mut r)?,
        Command::MpCheckNoninteraction => mp_check_noninteraction(cfg, &mp_model(&model, cfg)?, &mut r)?,
        Command::MpVerifyDiagram => {
            mp_model(&model, cfg)?;
            verify_diagram(cfg, &model, &mut r)?
        }
    }
    write_report(cfg, &r)?;
    Ok(r)
}

fn write_report(cfg: &RunConfig, r: &Report) -> Result<()> {
    let mut text = serde_json::to_string_pretty(r)?;
    text.push('\n');
    fs::write(cfg.output_dir.join("report.json"), text)?;
    Ok(())
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Parse { .. }
            | Error::DimensionMismatch { .. }
            | Error::UnknownChannel(_)
            | Error::MisalignedOffset { .. }
    )
}

/// Runs and maps the outcome to an exit status. A check failure raised as an
/// error still produces a failing report naming the error.
pub fn execute(cfg: &RunConfig) -> i32 {
    match run(cfg) {
        Ok(r) if r.pass => EXIT_PASS,
        Ok(_) => EXIT_FAIL,
        Err(e) if is_config_error(&e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("check failed: {e}");
            let mut r = Report::new(cfg);
            r.pass = false;
            r.notes.push(format!("error: {e}"));
            match write_report(cfg, &r) {
                Ok(()) => EXIT_FAIL,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            }
        }
    }
}

fn simulate(cfg: &RunConfig, model: &Model, r: &mut Report) -> Result<()> {
    let b = closed(model)?;
    let x0 = x0(cfg, model)?;
    let e = match b.integrate(&x0, 0.0, cfg.length) {
        Ok(e) => e,
        Err(Error::BlowUp { time, truncated }) => {
            r.note(notes::BLOW_UP);
            r.set("blow_up_time", time);
            r.set("nodes", truncated.nodes() as f64);
            return write(cfg, "trajectory.csv", &truncated);
        }
        Err(e) => return Err(e),
    };
    r.set("nodes", e.nodes() as f64);
    r.bound("membership_residual", membership_residual(&b, &e)?, b.tolerance());
    match model {
        Model::Ph(s) => r.set("energy_drift", ph::energy_drift(s, &e)?),
        Model::Mp(s) => {
            let a = mp::degeneracy_audit(s, &e)?;
            r.set("energy_drift", a.energy_drift);
            r.set("min_entropy_rate", a.min_entropy_rate);
        }
        Model::Ode(_) => {}
    }
    write(cfg, "trajectory.csv", &e)
}

fn audit(cfg: &RunConfig, model: &Model, r: &mut Report) -> Result<()> {
    let b = closed(model)?;
    let x0 = x0(cfg, model)?;
    match model {
        Model::Ph(s) => {
            let st = s.check_structure()?;
            r.set("j_antisymmetry", st.j_antisymmetry);
            r.set("r_negative_eigenvalue", st.r_negative_eigenvalue);
            let e = b.integrate(&x0, 0.0, cfg.length)?;
            r.bound("membership_residual", membership_residual(&b, &e)?, b.tolerance());
            if s.r(&nalgebra::DVector::from_vec(x0.clone()))?.amax() == 0.0 {
                r.bound("energy_drift", ph::energy_drift(s, &e)?, cfg.tolerance);
            } else {
                r.set("energy_drift", ph::energy_drift(s, &e)?);
            }
            ph_audit_power(cfg, s, r)?;
        }
        Model::Mp(s) => {
            let st = s.check_structure()?;
            r.set("noninteraction", st.noninteraction());
            r.set("extended_negative_eigenvalue", st.extended_negative_eigenvalue);
            let e = b.integrate(&x0, 0.0, cfg.length)?;
            r.bound("membership_residual", membership_residual(&b, &e)?, b.tolerance());
            let a = mp::degeneracy_audit(s, &e)?;
            r.bound("energy_drift", a.energy_drift, cfg.tolerance);
            r.set("max_energy_rate", a.max_energy_rate);
            r.bound("entropy_rate_deficit", (-a.min_entropy_rate_fd).max(0.0), ENTROPY_RATE_SLACK);
            r.details(&a)?;
            write(cfg, "trajectory.csv", &e)?;
        }
        Model::Ode(_) => {
            r.set("lipschitz_estimate", b.field().lipschitz_estimate(0.0, &x0, 0.1, 64, cfg.seed)?);
            let e = match b.integrate(&x0, 0.0, cfg.length) {
                Ok(e) => e,
                Err(Error::BlowUp { time, truncated }) => {
                    r.note(notes::BLOW_UP);
                    r.set("blow_up_time", time);
                    // the residual is absolute and x''' grows like (1 − t)⁻⁴, so
                    // only the first half of the existence interval is audited
                    let keep = (0.5 * time / cfg.step).floor() * cfg.step;
                    restrict(&truncated, keep, 0.0)?
                }
                Err(e) => return Err(e),
            };
            r.set("audited_length", e.length());
            r.bound("membership_residual", membership_residual(&b, &e)?, b.tolerance());
            if let (SystemSpec::Blowup, Some(&x)) = (&cfg.system, x0.first()) {
                if x != 0.0 {
                    let mut worst: f64 = 0.0;
                    for i in 0..e.nodes() {
                        let exact = 1.0 / (1.0 / x - e.local_time(i));
                        worst = worst.max(((e.node(i)[0] - exact) / exact).abs());
                    }
                    r.bound("oracle_relative_error", worst, cfg.tolerance);
                }
            }
            write(cfg, "trajectory.csv", &e)?;
        }
    }
    Ok(())
}

fn check_sheaf(cfg: &RunConfig, model: &Model, r: &mut Report) -> Result<()> {
    let b = closed(model)?;
    if matches!(cfg.system, SystemSpec::Blowup) {
        r.note(notes::BLOW_UP_PROBES);
    }
    let probes = sheaf_probes(&cfg.system, &b, SHEAF_PROBES, cfg.seed, cfg.length)?;
    let report = check_sheaf_axioms(&b, &probes, &default_cuts(cfg.length, cfg.step))?;
    r.set("probes", probes.len() as f64);
    r.set("checks", report.entries.len() as f64);
    let gluing_failures = report.entries.iter().filter(|e| !e.gluing_exact).count();
    let separation = report.entries.iter().map(|e| e.separation_violations).sum::<usize>();
    let glued = report.entries.iter().map(|e| e.glued_residual).fold(0.0, f64::max);
    r.bound("gluing_failures", gluing_failures as f64, 0.0);
    r.bound("separation_violations", separation as f64, 0.0);
    r.bound("glued_residual", glued, report.tolerance);
    r.details(&report)
}

fn diagram_notes(model: &Model, r: &mut Report) {
    r.note(notes::LEG_ROLES);
    r.note(notes::PORT_RATE);
    match model {
        Model::Ph(_) => r.note(notes::ZETA_SIGN),
        _ => {
            r.note(notes::MP_ZETA_SIGN);
            r.note(notes::TAU);
        }
    }
}

fn verify_diagram(cfg: &RunConfig, model: &Model, r: &mut Report) -> Result<()> {
    let report: DiagramReport = match model {
        Model::Ph(s) => {
            let probes = ph::closed_probes(s, DIAGRAM_PROBES, cfg.seed, cfg.length)?;
            ph::build_ph_diagram(s, &probes, cfg.tolerance)?
        }
        Model::Mp(s) => {
            let probes = mp::metriplectic_probes(s, DIAGRAM_PROBES, cfg.seed, cfg.length)?;
            mp::build_metriplectic_diagram(s, &probes, cfg.tolerance)?
        }
        Model::Ode(_) => {
            return Err(Error::Config(format!(
                "`{}` has no port structure; use mass_spring, rigid_body, ph_matrices or mp_matrices",
                cfg.system.name()
            )))
        }
    };
    diagram_notes(model, r);
    for (k, v) in &report.worst {
        r.set(k, *v);
    }
    r.pass &= report.pass;
    r.details(&report)
}

fn ph_simulate(cfg: &RunConfig, s: &PHSystem, r: &mut Report) -> Result<()> {
    let model = Model::Ph(s.clone());
    let iso = ph::ph_iso_system(s)?;
    let e = iso.simulate(&x0(cfg, &model)?, &cfg.input.signal(s.dims().1)?, 0.0, cfg.length)?;
    let sheaf = crate::machine::IsoBehavior(std::sync::Arc::new(iso.clone()));
    r.set("nodes", e.nodes() as f64);
    r.bound("membership_residual", sheaf.residual(&e)?, sheaf.tolerance());
    r.set("power_balance_defect", ph::power_audit(s, &e)?.balance_defect);
    write(cfg, "trajectory.csv", &e)?;
    write(cfg, "output.csv", &iso.output_trajectory(&e)?)
}

fn ph_audit_power(cfg: &RunConfig, s: &PHSystem, r: &mut Report) -> Result<()> {
    let model = Model::Ph(s.clone());
    let iso = ph::ph_iso_system(s)?;
    let e = iso.simulate(&x0(cfg, &model)?, &cfg.input.signal(s.dims().1)?, 0.0, cfg.length)?;
    let a = ph::power_audit(s, &e)?;
    r.bound("power_balance_defect", a.balance_defect, cfg.tolerance);
    r.bound("supply_excess", a.supply_excess.max(0.0), cfg.tolerance);
    r.details(&a)?;
    write(cfg, "port_trajectory.csv", &e)
}

fn mp_port_run(cfg: &RunConfig, s: &MetriplecticSystem) -> Result<(crate::machine::IsoSystem, Trajectory)> {
    let model = Model::Mp(s.clone());
    let iso = mp::port_metriplectic_system(s)?;
    let m = s.dims().1;
    let input = cfg.input.signal(m)?.stack(&cfg.tau.signal(m)?);
    let e = iso.simulate(&x0(cfg, &model)?, &input, 0.0, cfg.length)?;
    Ok((iso, e))
}

fn mp_simulate(cfg: &RunConfig, s: &MetriplecticSystem, r: &mut Report) -> Result<()> {
    r.note(notes::TAU);
    let (iso, e) = mp_port_run(cfg, s)?;
    let sheaf = crate::machine::IsoBehavior(std::sync::Arc::new(iso.clone()));
    r.set("nodes", e.nodes() as f64);
    r.bound("membership_residual", sheaf.residual(&e)?, sheaf.tolerance());
    write(cfg, "trajectory.csv", &e)?;
    write(cfg, "output.csv", &iso.output_trajectory(&e)?)
}

fn mp_audit_rates(cfg: &RunConfig, s: &MetriplecticSystem, r: &mut Report) -> Result<()> {
    r.note(notes::TAU);
    r.note(notes::SIDE_CONDITIONS);
    let (_, e) = mp_port_run(cfg, s)?;
    write(cfg, "trajectory.csv", &e)?;
    for c in mp::port_side_conditions(s) {
        let worst = (0..e.nodes()).map(|i| c.value(&e, i)).collect::<Result<Vec<_>>>()?;
        r.set(c.name(), worst.into_iter().fold(0.0, f64::max));
    }
    mp::check_side_conditions(s, &e)?;
    let a = mp::rates_audit(s, &e)?;
    r.bound("energy_rate_defect", a.energy_defect, cfg.tolerance);
    r.bound("entropy_rate_defect", a.entropy_defect, cfg.tolerance);
    r.details(&a)
}

fn mp_check_noninteraction(cfg: &RunConfig, s: &MetriplecticSystem, r: &mut Report) -> Result<()> {
    let points = probe_points(s.dims().0, NONINTERACTION_POINTS, cfg.seed);
    let st = s.check_structure_at(&points)?;
    r.bound("j_grad_s", st.j_grad_s, crate::fields::STRUCTURE_TOLERANCE);
    r.bound("g_grad_h", st.g_grad_h, crate::fields::STRUCTURE_TOLERANCE);
    r.set("extended_negative_eigenvalue", st.extended_negative_eigenvalue);
    r.details(&st)
}

#[derive(Debug, Parser)]
#[command(name = "portsheaf", version, about = "Behaviors as interval sheaves and port-control diagrams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, Args)]
pub struct FlagArgs {
    /// Built-in system name
    #[arg(long)]
    pub system: Option<String>,
    /// JSON configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub length: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long = "tol", default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl From<&FlagArgs> for Flags {
    fn from(a: &FlagArgs) -> Self {
        Flags {
            system: a.system.clone(),
            config: a.config.clone(),
            length: a.length,
            step: a.step,
            tolerance: a.tol,
            seed: a.seed,
            out: a.out.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Print the built-in systems
    ListExamples,
    /// Integrate the closed system
    Simulate(FlagArgs),
    /// Structure, conservation and residual audit
    Audit(FlagArgs),
    /// Check separation and gluing on seeded members
    CheckSheaf(FlagArgs),
    /// Verify the port-control diagram
    VerifyDiagram(FlagArgs),
    /// Port-Hamiltonian commands
    #[command(subcommand)]
    Ph(PhCommand),
    /// Port-metriplectic commands
    #[command(subcommand)]
    Mp(MpCommand),
}

#[derive(Debug, Subcommand)]
pub enum PhCommand {
    Simulate(FlagArgs),
    AuditPower(FlagArgs),
    VerifyDiagram(FlagArgs),
}

#[derive(Debug, Subcommand)]
pub enum MpCommand {
    Simulate(FlagArgs),
    AuditRates(FlagArgs),
    CheckNoninteraction(FlagArgs),
    VerifyDiagram(FlagArgs),
}

impl CliCommand {
    fn resolve(&self) -> Option<(Command, &FlagArgs)> {
        Some(match self {
            CliCommand::ListExamples => return None,
            CliCommand::Simulate(f) => (Command::Simulate, f),
            CliCommand::Audit(f) => (Command::Audit, f),
            CliCommand::CheckSheaf(f) => (Command::CheckSheaf, f),
            CliCommand::VerifyDiagram(f) => (Command::VerifyDiagram, f),
            CliCommand::Ph(PhCommand::Simulate(f)) => (Command::PhSimulate, f),
            CliCommand::Ph(PhCommand::AuditPower(f)) => (Command::PhAuditPower, f),
            CliCommand::Ph(PhCommand::VerifyDiagram(f)) => (Command::PhVerifyDiagram, f),
            CliCommand::Mp(MpCommand::Simulate(f)) => (Command::MpSimulate, f),
            CliCommand::Mp(MpCommand::AuditRates(f)) => (Command::MpAuditRates, f),
            CliCommand::Mp(MpCommand::CheckNoninteraction(f)) => (Command::MpCheckNoninteraction, f),
            CliCommand::Mp(MpCommand::VerifyDiagram(f)) => (Command::MpVerifyDiagram, f),
        })
    }
}

/// Parses arguments and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let Some((command, flags)) = cli.command.resolve() else {
        print!("{}", list_examples());
        return EXIT_PASS;
    };
    match RunConfig::resolve(command, &Flags::from(flags)) {
        Ok(cfg) => {
            let code = execute(&cfg);
            if code != EXIT_CONFIG {
                println!("{}: {}", command.name(), if code == EXIT_PASS { "pass" } else { "FAIL" });
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Node count of a run, for callers that want to size work up front.
pub fn node_count(cfg: &RunConfig) -> Result<usize> {
    Ok(grid_count(cfg.length, cfg.step)? + 1)
}
