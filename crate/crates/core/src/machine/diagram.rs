use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    default_cuts, injectivity_probe, min_pairwise_distance, morphism_defects_at, trajectory_defect, Leg, LegDefects,
    Machine, MachineMorphism, ProbeResult, Variant, NATURALITY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::interval_sheaf::{nan_max, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramOptions {
    pub tolerance: f64,
    /// Which leg of the closed machine lands in the constant sheaf 𝔒; the
    /// other one is the port leg.
    pub constant_leg: Leg,
    /// Restriction cuts for the naturality checks; defaults to a few
    /// interior grid points of each probe.
    pub cuts: Option<Vec<f64>>,
}

impl DiagramOptions {
    pub fn new(tolerance: f64, constant_leg: Leg) -> Self {
        Self {
            tolerance,
            constant_leg,
            cuts: None,
        }
    }
}

/// Defects on one closed-system probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeDefects {
    pub probe: usize,
    pub psi: LegDefects,
    pub xi: LegDefects,
    pub a_phi: LegDefects,
    /// `‖Ξ.β(Ψ.β(e)) − A.β(e)‖∞`.
    pub triangle: f64,
    /// Leg maps of `Ξ∘Ψ` against those of `(A, Φ₁, Φ₂)`.
    pub triangle_legs: LegDefects,
    pub psi_image_residual: f64,
    pub xi_image_residual: f64,
    pub a_phi_image_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramReport {
    pub tolerance: f64,
    pub constant_leg: Leg,
    pub variants: BTreeMap<String, Variant>,
    /// Largest deviation of the constant leg from a single value.
    pub closed_spread: f64,
    pub naturality: BTreeMap<String, f64>,
    pub probes: Vec<ProbeDefects>,
    pub injectivity: Vec<ProbeResult>,
    /// Worst value of every named defect over the probes.
    pub worst: BTreeMap<String, f64>,
    pub image_tolerances: BTreeMap<String, f64>,
    pub pass: bool,
}

impl DiagramReport {
    /// Names of the checks that failed.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .worst
            .iter()
            .filter(|(k, v)| {
                let limit = match k.strip_suffix("_image_residual") {
                    Some(name) => self.image_tolerances[name],
                    None => self.tolerance,
                };
                !(**v <= limit)
            })
            .map(|(k, _)| k.clone())
            .collect();
        out.extend(self.naturality.iter().filter(|(_, v)| !(**v <= NATURALITY_TOLERANCE)).map(|(k, _)| format!("naturality {k}")));
        out.extend(self.injectivity.iter().filter(|r| !r.separates()).map(|r| format!("injectivity {}", r.map)));
        if !(self.closed_spread <= self.tolerance) {
            out.push("closed_spread".into());
        }
        out
    }
}

fn closed_spread(closed: &Machine, leg: Leg, probes: &[Trajectory]) -> Result<f64> {
    let outs = probes.iter().map(|e| closed.leg(leg).apply(e)).collect::<Result<Vec<_>>>()?;
    let Some(first) = outs.first() else {
        return Ok(0.0);
    };
    let (reference, token) = (first.first().to_vec(), first.token_id());
    let mut spread: f64 = 0.0;
    for o in &outs {
        if o.token_id() != token || o.dim() != reference.len() {
            return Ok(f64::INFINITY);
        }
        for i in 0..o.nodes() {
            for (v, r) in o.node(i).iter().zip(&reference) {
                spread = nan_max(spread, (v - r).abs());
            }
        }
    }
    Ok(spread)
}

fn naturality_defect(m: &Machine, probes: &[Trajectory], cuts: &Option<Vec<f64>>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for e in probes {
        let c = cuts.clone().unwrap_or_else(|| default_cuts(e.length(), e.step()));
        worst = nan_max(
            worst,
            match m.check_naturality(std::slice::from_ref(e), &c) {
                Ok(d) => d,
                Err(Error::LegNotNatural { defect, .. }) => defect,
                Err(err) => return Err(err),
            },
        );
    }
    Ok(worst)
}

fn leg_comparison(left: &MachineMorphism, right: &MachineMorphism, closed: &Machine, e: &Trajectory) -> Result<LegDefects> {
    let mut out = [0.0; 2];
    for (k, leg) in [Leg::E, Leg::A].into_iter().enumerate() {
        if left.target_leg(leg) != right.target_leg(leg) {
            out[k] = f64::INFINITY;
            continue;
        }
        let src = closed.leg(leg).apply(e)?;
        out[k] = trajectory_defect(&left.leg_map(leg).apply(&src)?, &right.leg_map(leg).apply(&src)?);
    }
    Ok(LegDefects { e: out[0], a: out[1] })
}

/// Checks that `Ψ: closed → port`, `Ξ: port → enclosing` and
/// `(A, Φ₁, Φ₂): closed → enclosing` are machine morphisms, that
/// `Ξ∘Ψ = (A, Φ₁, Φ₂)`, that every image is a member of its target behavior,
/// that all legs commute with restriction, and that the three underlying
/// maps separate the probes.
///
/// The probes must be members of the closed behavior, and the closed
/// machine's constant leg must take a single value on all of them.
#[allow(clippy::too_many_arguments)]
pub fn verify_port_control_diagram(
    closed: &Machine,
    enclosing: &Machine,
    port: &Machine,
    psi: &MachineMorphism,
    xi: &MachineMorphism,
    a_phi: &MachineMorphism,
    probes: &[Trajectory],
    options: &DiagramOptions,
) -> Result<DiagramReport> {
    for p in probes {
        closed.behavior().require_member(p)?;
    }
    let spread = closed_spread(closed, options.constant_leg, probes)?;
    if !(spread <= options.tolerance) {
        return Err(Error::NotClosed { spread });
    }
    let composite = xi.after(psi);

    let per_probe = probes
        .par_iter()
        .enumerate()
        .map(|(k, e)| -> Result<(ProbeDefects, Trajectory, Trajectory, Trajectory)> {
            let psi_img = psi.beta.apply(e)?;
            let xi_img = xi.beta.apply(&psi_img)?;
            let a_img = a_phi.beta.apply(e)?;
            let defects = ProbeDefects {
                probe: k,
                psi: morphism_defects_at(psi, closed, port, e)?,
                xi: morphism_defects_at(xi, port, enclosing, &psi_img)?,
                a_phi: morphism_defects_at(a_phi, closed, enclosing, e)?,
                triangle: trajectory_defect(&xi_img, &a_img),
                triangle_legs: leg_comparison(&composite, a_phi, closed, e)?,
                psi_image_residual: port.behavior().residual(&psi_img)?,
                xi_image_residual: enclosing.behavior().residual(&xi_img)?,
                a_phi_image_residual: enclosing.behavior().residual(&a_img)?,
            };
            Ok((defects, psi_img, xi_img, a_img))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(per_probe.len());
    let (mut psi_imgs, mut enclosing_imgs) = (Vec::new(), Vec::new());
    for (d, p, x, a) in per_probe {
        rows.push(d);
        psi_imgs.push(p);
        enclosing_imgs.push(x);
        enclosing_imgs.push(a);
    }

    let mut naturality = BTreeMap::new();
    naturality.insert(closed.name().to_string(), naturality_defect(closed, probes, &options.cuts)?);
    naturality.insert(port.name().to_string(), naturality_defect(port, &psi_imgs, &options.cuts)?);
    naturality.insert(enclosing.name().to_string(), naturality_defect(enclosing, &enclosing_imgs, &options.cuts)?);

    let injectivity = vec![
        injectivity_probe(&psi.beta, probes, min_pairwise_distance(probes))?,
        injectivity_probe(&xi.beta, &psi_imgs, min_pairwise_distance(&psi_imgs))?,
        injectivity_probe(&a_phi.beta, probes, min_pairwise_distance(probes))?,
    ];

    let mut worst = BTreeMap::new();
    let mut record = |name: &str, f: &dyn Fn(&ProbeDefects) -> f64| {
        worst.insert(name.to_string(), rows.iter().map(f).fold(0.0, nan_max));
    };
    record("psi", &|d| d.psi.max());
    record("xi", &|d| d.xi.max());
    record("a_phi", &|d| d.a_phi.max());
    record("triangle", &|d| d.triangle);
    record("triangle_legs", &|d| d.triangle_legs.max());
    record("psi_image_residual", &|d| d.psi_image_residual);
    record("xi_image_residual", &|d| d.xi_image_residual);
    record("a_phi_image_residual", &|d| d.a_phi_image_residual);

    let image_tolerances = BTreeMap::from([
        ("psi".to_string(), port.behavior().tolerance()),
        ("xi".to_string(), enclosing.behavior().tolerance()),
        ("a_phi".to_string(), enclosing.behavior().tolerance()),
    ]);
    let variants = BTreeMap::from([
        ("psi".to_string(), psi.variant),
        ("xi".to_string(), xi.variant),
        ("a_phi".to_string(), a_phi.variant),
        ("xi_after_psi".to_string(), composite.variant),
    ]);

    let mut report = DiagramReport {
        tolerance: options.tolerance,
        constant_leg: options.constant_leg,
        variants,
        closed_spread: spread,
        naturality,
        probes: rows,
        injectivity,
        worst,
        image_tolerances,
        pass: false,
    };
    report.pass = report.failures().is_empty();
    Ok(report)
}
