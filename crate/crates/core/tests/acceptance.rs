//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines are printed in order; exits non-zero on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use portsheaf::cli::{sheaf_probes, SystemSpec};
use portsheaf::error::Error;
use portsheaf::fields::{probe_points, MatrixField};
use portsheaf::interval_sheaf::{check_sheaf_axioms, glue, restrict, Trajectory};
use portsheaf::machine::default_cuts;
use portsheaf::metriplectic::{self as mp, MetriplecticSystem};
use portsheaf::ode_behavior::{integrate, VectorField};
use portsheaf::port_hamiltonian::{self as ph, PHSystem};
use portsheaf::signal::Signal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

/// `restrict(restrict(e, a, o₁), b, o₂) == restrict(e, b, o₁ + o₂)` and
/// `glue(restrict(e, c, 0), restrict(e, L − c, c)) == e`, both bit for bit.
fn round_trips(p: &Trajectory, cut: f64) -> Result<bool, Error> {
    let (n, h) = (p.intervals(), p.step());
    let (k1, k2, k3) = (n / 5, n / 7, n / 2);
    let outer = restrict(p, (n - k1 - n / 10) as f64 * h, k1 as f64 * h)?;
    let twice = restrict(&outer, k3 as f64 * h, k2 as f64 * h)?;
    let once = restrict(p, k3 as f64 * h, (k1 + k2) as f64 * h)?;
    let left = restrict(p, cut, 0.0)?;
    let right = restrict(p, p.length() - cut, cut)?;
    Ok(twice == once && glue(&left, &right, 1e-9)? == *p)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (length, h) = (2.0, 1e-3);
    let cuts = default_cuts(length, h);
    let mut probes_total = 0;
    let mut separation = 0;
    let mut gluing_failures = 0;
    let mut round_trip_failures = 0;
    for (spec, count) in [
        (SystemSpec::built_in("blowup").map_err(e)?, 17),
        (SystemSpec::built_in("mass_spring").map_err(e)?, 17),
        (SystemSpec::built_in("rigid_body").map_err(e)?, 16),
    ] {
        let b = match spec.model(h).map_err(e)? {
            portsheaf::cli::Model::Ode(b) => b,
            portsheaf::cli::Model::Ph(s) => ph::closed_behavior(&s).map_err(e)?,
            portsheaf::cli::Model::Mp(s) => mp::closed_metriplectic_behavior(&s).map_err(e)?,
        };
        let probes = sheaf_probes(&spec, &b, count, 1, length).map_err(e)?;
        probes_total += probes.len();
        let report = check_sheaf_axioms(&b, &probes, &cuts).map_err(e)?;
        separation += report.entries.iter().map(|x| x.separation_violations).sum::<usize>();
        gluing_failures += report.entries.iter().filter(|x| !x.gluing_exact).count();
        for p in &probes {
            for &c in &cuts {
                if !round_trips(p, c).map_err(e)? {
                    round_trip_failures += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        probes_total == 50 && separation == 0 && gluing_failures == 0 && round_trip_failures == 0 && secs <= 30.0,
        format!(
            "{probes_total} probes, round-trip failures {round_trip_failures}, gluing failures {gluing_failures}, separation violations {separation}, {secs:.1} s"
        ),
    )
}

fn blowup_error(h: f64) -> Result<f64, String> {
    let x = integrate(&VectorField::blowup(), &[1.0], 0.0, 0.9, h).map_err(e)?;
    Ok((x.last()[0] - 10.0).abs() / 10.0)
}

fn criterion_2() -> Outcome {
    let err = blowup_error(1e-4)?;
    let time = match integrate(&VectorField::blowup(), &[1.0], 0.0, 2.0, 1e-4) {
        Err(Error::BlowUp { time, .. }) => time,
        other => return Err(format!("no blow-up reported: {:?}", other.map(|t| t.length()))),
    };
    check(
        err <= 1e-6 && (time - 1.0).abs() <= 0.01,
        format!("relative error at t = 0.9: {err:.3e}, blow-up reported at t = {time}"),
    )
}

fn criterion_3() -> Outcome {
    let ratio = blowup_error(1e-4)? / blowup_error(5e-5)?;
    let coarse = blowup_error(1e-3)? / blowup_error(5e-4)?;
    check(
        ratio >= 12.0,
        format!("error ratio h = 1e-4 vs 5e-5: {ratio:.1} (1e-3 vs 5e-4: {coarse:.1})"),
    )
}

fn criterion_4() -> Outcome {
    let sys = PHSystem::mass_spring(1.0, 1.0).map_err(e)?;
    let x = ph::closed_behavior(&sys).map_err(e)?.integrate(&[1.0, 0.0], 0.0, 10.0).map_err(e)?;
    let drift = ph::energy_drift(&sys, &x).map_err(e)?;
    let xi = ph::embed_closed(&sys, &x).map_err(e)?;
    let zeta = xi.channel("zeta0").map_err(e)?;
    let zeta_err = zeta
        .iter()
        .enumerate()
        .map(|(i, z)| (z - (1.0 - x.local_time(i).cos())).abs())
        .fold(0.0, f64::max);
    check(
        drift <= 1e-6 && zeta_err <= 1e-6,
        format!("energy drift {drift:.3e}, max |ζ − (1 − cos t)| {zeta_err:.3e}"),
    )
}

fn criterion_5() -> Outcome {
    let sine = Signal::sine(1, 1.0, 1.0, 0.0);
    let sys = PHSystem::mass_spring(1.0, 1.0).map_err(e)?;
    let run = |s: &PHSystem| -> Result<ph::PowerAudit, String> {
        let e1 = ph::ph_iso_system(s).map_err(e)?.simulate(&[1.0, 0.0], &sine, 0.0, 10.0).map_err(e)?;
        ph::power_audit(s, &e1).map_err(e)
    };
    let lossless = run(&sys)?;
    let damped = sys
        .with_dissipation(MatrixField::constant(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.1]))))
        .map_err(e)?;
    let lossy = run(&damped)?;
    check(
        lossless.balance_defect <= 1e-5 && lossy.balance_defect <= 1e-5 && lossy.supply_excess <= 1e-5,
        format!(
            "balance defect {:.3e} (R = 0), {:.3e} (R = diag(0, 0.1)); max(Ḣ − yᵀu) {:.3e}",
            lossless.balance_defect, lossy.balance_defect, lossy.supply_excess
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let sys = PHSystem::mass_spring(1.0, 1.0).map_err(e)?;
    let probes = ph::closed_probes(&sys, 5, 0, 10.0).map_err(e)?;
    let report = ph::build_ph_diagram(&sys, &probes, 1e-5).map_err(e)?;
    let mut broken = ph::ph_diagram(&sys).map_err(e)?;
    broken.xi.beta = ph::xi_map(&sys, -1.0);
    let corrupted = broken.verify(&probes, 1e-5).map_err(e)?;
    let secs = start.elapsed().as_secs_f64();
    check(
        report.pass && !corrupted.pass && secs <= 60.0,
        format!(
            "pass = {}, worst triangle {:.1e}; flipped Ξ sign: pass = {} (fails {:?}); {secs:.1} s",
            report.pass,
            report.worst["triangle"],
            corrupted.pass,
            corrupted.failures()
        ),
    )
}

fn rigid_body() -> Result<MetriplecticSystem, String> {
    MetriplecticSystem::rigid_body([1.0, 2.0, 3.0], 0.1).map_err(e)
}

fn criterion_7() -> Outcome {
    let sys = rigid_body()?;
    let st = sys.check_structure_at(&probe_points(3, 100, 7)).map_err(e)?;
    let b = mp::closed_metriplectic_behavior(&sys).map_err(e)?;
    let (mut drift, mut min_sdot): (f64, f64) = (0.0, f64::INFINITY);
    for x0 in probe_points(3, 5, 11) {
        let x = b.integrate(x0.as_slice(), 0.0, 10.0).map_err(e)?;
        let a = mp::degeneracy_audit(&sys, &x).map_err(e)?;
        drift = drift.max(a.energy_drift);
        min_sdot = min_sdot.min(a.min_entropy_rate_fd);
    }
    check(
        st.noninteraction() <= 1e-10 && drift <= 1e-6 && min_sdot >= -1e-8,
        format!(
            "max(‖J∇S‖, ‖G∇H‖) {:.3e} over 100 points; |ΔH| {drift:.3e}; min Ṡ {min_sdot:.3e}",
            st.noninteraction()
        ),
    )
}

fn criterion_8() -> Outcome {
    let sys = rigid_body()?;
    let iso = mp::port_metriplectic_system(&sys).map_err(e)?;
    let good = iso
        .simulate(&[1.0, 0.5, -0.3], &Signal::sine(1, 1.0, 1.0, 0.0).stack(&Signal::zero(1)), 0.0, 10.0)
        .map_err(e)?;
    let accepted = mp::check_side_conditions(&sys, &good).is_ok();
    let rates = mp::rates_audit(&sys, &good).map_err(e)?;
    let bad = iso
        .simulate(&[1.0, 0.5, -0.3], &Signal::zero(1).stack(&Signal::constant(DVector::from_element(1, 0.5))), 0.0, 10.0)
        .map_err(e)?;
    let named = match mp::check_side_conditions(&sys, &bad) {
        Err(Error::ConstraintViolation { condition, node, .. }) => format!("{condition} at node {node}"),
        other => format!("{other:?}"),
    };
    check(
        accepted && named.starts_with("Bτ ≡ 0") && rates.energy_defect <= 1e-5,
        format!(
            "compliant run accepted = {accepted}; τ ∉ ker B rejected by {named}; Ḣ-rate defect {:.3e}",
            rates.energy_defect
        ),
    )
}

fn criterion_9() -> Outcome {
    let sys = rigid_body()?;
    let probes = mp::metriplectic_probes(&sys, 5, 0, 10.0).map_err(e)?;
    let report = mp::build_metriplectic_diagram(&sys, &probes, 1e-5).map_err(e)?;
    check(
        report.pass,
        format!("pass = {}, worst triangle {:.1e}, failures {:?}", report.pass, report.worst["triangle"], report.failures()),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map(|d| d.flatten().map(|f| (f.file_name().to_string_lossy().into_owned(), std::fs::read(f.path()).unwrap_or_default())).collect())
        .unwrap_or_default();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let out = dir.path().join("out");
    let runs: [&[&str]; 5] = [
        &["verify-diagram", "--system", "mass_spring", "--length", "2", "--seed", "3"],
        &["check-sheaf", "--system", "rigid_body", "--length", "1", "--seed", "5"],
        &["simulate", "--system", "blowup", "--length", "2"],
        &["mp", "audit-rates", "--system", "rigid_body", "--length", "2"],
        &["ph", "audit-power", "--system", "mass_spring", "--length", "5"],
    ];
    let mut identical = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(&out);
            let status = Command::new(env!("CARGO_BIN_EXE_portsheaf"))
                .args(args)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(e)?;
            outputs.push((status.status.code(), status.stdout, snapshot(&out)));
        }
        if outputs[0] == outputs[1] && !outputs[0].2.is_empty() {
            identical += 1;
        }
    }
    check(identical == runs.len(), format!("{identical}/{} CLI runs byte-identical on repeat", runs.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("sheaf laws on 50 probes", criterion_1),
        ("blow-up oracle", criterion_2),
        ("convergence order", criterion_3),
        ("mass-spring conservation and port integral", criterion_4),
        ("power balance", criterion_5),
        ("port-Hamiltonian diagram", criterion_6),
        ("metriplectic degeneracy", criterion_7),
        ("port-metriplectic side conditions", criterion_8),
        ("metriplectic diagram", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (status, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {status}: {name}: {detail}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
