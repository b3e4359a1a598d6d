use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::trajectory::{glue, grid_count, restrict, Trajectory};
use super::DEFAULT_JUNCTION_TOLERANCE;
use crate::error::{Error, Result};

/// A presheaf over **Int** whose sections are sampled trajectories, with a
/// residual-based membership test.
pub trait Sheaf: Send + Sync {
    fn name(&self) -> &str;

    /// Largest membership residual still accepted.
    fn tolerance(&self) -> f64;

    fn junction_tolerance(&self) -> f64 {
        DEFAULT_JUNCTION_TOLERANCE
    }

    /// Nonnegative defect of `e`; zero for exact members.
    fn residual(&self, e: &Trajectory) -> Result<f64>;

    fn restrict(&self, e: &Trajectory, new_length: f64, offset: f64) -> Result<Trajectory> {
        restrict(e, new_length, offset)
    }

    fn glue(&self, left: &Trajectory, right: &Trajectory) -> Result<Trajectory> {
        glue(left, right, self.junction_tolerance())
    }

    /// Generates a member from initial data, when the sheaf knows how.
    fn sample(&self, _init: &[f64], _length: f64, _shift: f64) -> Option<Result<Trajectory>> {
        None
    }

    /// Returns the residual of `e`, or `NotAMember` when it exceeds the tolerance.
    fn require_member(&self, e: &Trajectory) -> Result<f64> {
        let residual = self.residual(e)?;
        if residual <= self.tolerance() {
            Ok(residual)
        } else {
            Err(Error::NotAMember {
                behavior: self.name().to_string(),
                residual,
                tolerance: self.tolerance(),
            })
        }
    }
}

type MembershipFn = dyn Fn(&Trajectory) -> Result<f64> + Send + Sync;
type SamplerFn = dyn Fn(&[f64], f64, f64) -> Result<Trajectory> + Send + Sync;

/// A behavior given by a membership residual and an optional sampler.
/// Restriction and gluing are the grid operations of [`restrict`] and [`glue`].
#[derive(Clone)]
pub struct BehaviorSheaf {
    name: String,
    tolerance: f64,
    membership: Arc<MembershipFn>,
    sampler: Option<Arc<SamplerFn>>,
}

impl BehaviorSheaf {
    pub fn new(
        name: impl Into<String>,
        tolerance: f64,
        membership: impl Fn(&Trajectory) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            tolerance,
            membership: Arc::new(membership),
            sampler: None,
        }
    }

    pub fn with_sampler(
        mut self,
        sampler: impl Fn(&[f64], f64, f64) -> Result<Trajectory> + Send + Sync + 'static,
    ) -> Self {
        self.sampler = Some(Arc::new(sampler));
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

impl Sheaf for BehaviorSheaf {
    fn name(&self) -> &str {
        &self.name
    }

    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn residual(&self, e: &Trajectory) -> Result<f64> {
        (self.membership)(e)
    }

    fn sample(&self, init: &[f64], length: f64, shift: f64) -> Option<Result<Trajectory>> {
        self.sampler.as_ref().map(|s| s(init, length, shift))
    }
}

impl fmt::Debug for BehaviorSheaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BehaviorSheaf")
            .field("name", &self.name)
            .field("tolerance", &self.tolerance)
            .field("sampler", &self.sampler.is_some())
            .finish()
    }
}

/// The constant sheaf on a finite token set: every interval gets the same
/// set and every restriction map is the identity on tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSheaf {
    size: u32,
    name: String,
}

pub fn constant_sheaf(value_set_size: u32) -> ConstantSheaf {
    ConstantSheaf {
        size: value_set_size,
        name: format!("constant[{value_set_size}]"),
    }
}

impl ConstantSheaf {
    pub fn size(&self) -> u32 {
        self.size
    }

    /// The element `token` over an interval of the given length.
    pub fn element(&self, token: u32, length: f64, step: f64) -> Result<Trajectory> {
        if token >= self.size {
            return Err(Error::InvalidTrajectory(format!(
                "token {token} outside value set of size {}",
                self.size
            )));
        }
        Trajectory::token(token, length, step, 0.0)
    }

    fn check(&self, e: &Trajectory) -> Result<u32> {
        match e.token_id() {
            Some(t) if t < self.size && e.dim() == 0 => Ok(t),
            _ => Err(Error::NotAMember {
                behavior: self.name.clone(),
                residual: f64::INFINITY,
                tolerance: 0.0,
            }),
        }
    }
}

impl Sheaf for ConstantSheaf {
    fn name(&self) -> &str {
        &self.name
    }

    fn tolerance(&self) -> f64 {
        0.0
    }

    fn residual(&self, e: &Trajectory) -> Result<f64> {
        Ok(match self.check(e) {
            Ok(_) => 0.0,
            Err(_) => f64::INFINITY,
        })
    }

    fn restrict(&self, e: &Trajectory, new_length: f64, offset: f64) -> Result<Trajectory> {
        let token = self.check(e)?;
        // validates range and alignment; the element itself is unchanged
        restrict(e, new_length, offset)?;
        Trajectory::token(token, new_length, e.step(), e.shift())
    }

    fn glue(&self, left: &Trajectory, right: &Trajectory) -> Result<Trajectory> {
        let (a, b) = (self.check(left)?, self.check(right)?);
        if left.step() != right.step() {
            return Err(Error::GridMismatch(format!(
                "steps {} and {}",
                left.step(),
                right.step()
            )));
        }
        if a != b {
            return Err(Error::JunctionMismatch {
                defect: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        let intervals = left.intervals() + right.intervals();
        Trajectory::token(a, intervals as f64 * left.step(), left.step(), left.shift())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomEntry {
    pub probe: usize,
    pub cut: f64,
    /// Candidates that were compared against the probe for separation.
    pub separation_candidates: usize,
    /// Candidates distinct from the probe whose two restrictions agree with
    /// the probe's; separation fails iff this is nonzero.
    pub separation_violations: usize,
    pub gluing_exact: bool,
    pub glued_residual: f64,
}

impl AxiomEntry {
    pub fn separation_ok(&self) -> bool {
        self.separation_violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub sheaf: String,
    pub tolerance: f64,
    pub entries: Vec<AxiomEntry>,
    /// `(probe, cut)` pairs skipped because the cut is not interior to the probe.
    pub skipped: Vec<(usize, f64)>,
}

impl AxiomReport {
    pub fn gluing_ok(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.gluing_exact && e.glued_residual <= self.tolerance)
    }

    pub fn separation_ok(&self) -> bool {
        self.entries.iter().all(AxiomEntry::separation_ok)
    }

    pub fn all_ok(&self) -> bool {
        self.gluing_ok() && self.separation_ok()
    }
}

/// Checks separation and gluing for every probe and every interior cut.
///
/// Separation candidates are the other probes on the same grid plus, when
/// the sheaf has a sampler, a member regenerated from the probe's initial
/// value. Gluing is checked by cutting each probe and gluing the pieces back.
pub fn check_sheaf_axioms(
    sheaf: &dyn Sheaf,
    probes: &[Trajectory],
    cut_points: &[f64],
) -> Result<AxiomReport> {
    for p in probes {
        sheaf.require_member(p)?;
        for &c in cut_points {
            grid_count(c, p.step())?;
        }
    }
    let tol = sheaf.junction_tolerance();
    type ProbeOutcome = Result<(Vec<AxiomEntry>, Vec<(usize, f64)>)>;
    let per_probe: Vec<ProbeOutcome> = probes
        .par_iter()
        .enumerate()
        .map(|(pi, e)| {
            let mut candidates: Vec<Trajectory> = probes
                .iter()
                .enumerate()
                .filter(|(j, c)| *j != pi && c.nodes() == e.nodes() && c.step() == e.step())
                .map(|(_, c)| c.clone())
                .collect();
            if e.dim() > 0 {
                if let Some(regen) = sheaf.sample(e.first(), e.length(), e.shift()) {
                    match regen {
                        Ok(c) => candidates.push(c),
                        // a probe whose regeneration fails still gets checked
                        // against the other probes
                        Err(Error::BlowUp { .. }) => {}
                        Err(err) => return Err(err),
                    }
                }
            }
            let mut entries = Vec::new();
            let mut skipped = Vec::new();
            for &cut in cut_points {
                if !(cut > 0.0 && cut < e.length()) {
                    skipped.push((pi, cut));
                    continue;
                }
                let rest = e.length() - cut;
                let left = sheaf.restrict(e, cut, 0.0)?;
                let right = sheaf.restrict(e, rest, cut)?;
                let glued = sheaf.glue(&left, &right)?;
                let glued_residual = sheaf.residual(&glued)?;

                let mut violations = 0;
                for c in &candidates {
                    let distinct = !(c.sup_distance(e) <= tol);
                    if !distinct {
                        continue;
                    }
                    let (Ok(cl), Ok(cr)) = (sheaf.restrict(c, cut, 0.0), sheaf.restrict(c, rest, cut)) else {
                        continue;
                    };
                    let shifts_agree = (cl.shift() - left.shift()).abs() <= tol
                        && (cr.shift() - right.shift()).abs() <= tol;
                    if shifts_agree && cl.sup_distance(&left) <= tol && cr.sup_distance(&right) <= tol {
                        violations += 1;
                    }
                }
                entries.push(AxiomEntry {
                    probe: pi,
                    cut,
                    separation_candidates: candidates.len(),
                    separation_violations: violations,
                    gluing_exact: glued == *e,
                    glued_residual,
                });
            }
            Ok((entries, skipped))
        })
        .collect();

    let mut report = AxiomReport {
        sheaf: sheaf.name().to_string(),
        tolerance: sheaf.tolerance(),
        entries: Vec::new(),
        skipped: Vec::new(),
    };
    for r in per_probe {
        let (entries, skipped) = r?;
        report.entries.extend(entries);
        report.skipped.extend(skipped);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sheaf::channel_labels;

    fn constant_members() -> BehaviorSheaf {
        // members: trajectories constant in time
        BehaviorSheaf::new("constant-in-time", 1e-12, |e: &Trajectory| {
            let first = e.first().to_vec();
            Ok((0..e.nodes())
                .flat_map(|i| e.node(i).iter().zip(&first).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
                .fold(0.0, f64::max))
        })
    }

    #[test]
    fn unit_constant_sheaf_is_the_terminal_one() {
        let o = constant_sheaf(1);
        let e = o.element(0, 2.0, 0.5).unwrap();
        assert_eq!(o.residual(&e).unwrap(), 0.0);
        assert!(o.element(1, 2.0, 0.5).is_err());
    }

    #[test]
    fn constant_sheaf_restriction_is_identity_on_tokens() {
        let s = constant_sheaf(3);
        let e = s.element(2, 2.0, 0.5).unwrap();
        let r = s.restrict(&e, 1.0, 0.5).unwrap();
        assert_eq!(r.token_id(), Some(2));
        assert_eq!(r.length(), 1.0);
        assert_eq!(r.shift(), e.shift());
    }

    #[test]
    fn constant_sheaf_glues_equal_tokens_only() {
        let s = constant_sheaf(3);
        let a = s.element(1, 1.0, 0.5).unwrap();
        let b = s.element(1, 2.0, 0.5).unwrap();
        let g = s.glue(&a, &b).unwrap();
        assert_eq!(g.token_id(), Some(1));
        assert_eq!(g.length(), 3.0);
        let c = s.element(2, 2.0, 0.5).unwrap();
        assert!(matches!(s.glue(&a, &c), Err(Error::JunctionMismatch { .. })));
    }

    #[test]
    fn constant_sheaf_axioms_hold() {
        let s = constant_sheaf(4);
        let probes: Vec<_> = (0..4).map(|k| s.element(k, 2.0, 0.25).unwrap()).collect();
        let report = check_sheaf_axioms(&s, &probes, &[0.5, 1.0, 1.75]).unwrap();
        assert!(report.all_ok());
        assert_eq!(report.entries.len(), 12);
        assert!(report.entries.iter().all(|e| e.separation_candidates == 3));
    }

    #[test]
    fn relabelled_constant_sheaves_report_identically() {
        let s = constant_sheaf(3);
        let perm = [2u32, 0, 1];
        let probes: Vec<_> = (0..3).map(|k| s.element(k, 1.0, 0.25).unwrap()).collect();
        let relabelled: Vec<_> = (0..3).map(|k| s.element(perm[k as usize], 1.0, 0.25).unwrap()).collect();
        let a = check_sheaf_axioms(&s, &probes, &[0.25, 0.5]).unwrap();
        let b = check_sheaf_axioms(&s, &relabelled, &[0.25, 0.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn glue_of_restrictions_is_exact() {
        let sheaf = constant_members();
        let probes: Vec<_> = [1.0, -2.0, 3.5]
            .iter()
            .map(|&c| Trajectory::constant(1.0, 0.125, 0.0, channel_labels("x", 1), &[c]).unwrap())
            .collect();
        let report = check_sheaf_axioms(&sheaf, &probes, &[0.125, 0.5, 0.875, 1.0, 0.0]).unwrap();
        assert!(report.all_ok());
        assert_eq!(report.entries.len(), 9);
        assert_eq!(report.skipped.len(), 6);
    }

    #[test]
    fn separation_detects_a_non_sheaf() {
        // a "behavior" that forgets everything but the endpoints cannot separate:
        // two candidates equal at the junction pieces but differing overall
        // are impossible on a grid, so build a sheaf whose restriction loses data
        struct Forgetful;
        impl Sheaf for Forgetful {
            fn name(&self) -> &str {
                "forgetful"
            }
            fn tolerance(&self) -> f64 {
                f64::INFINITY
            }
            fn residual(&self, _: &Trajectory) -> Result<f64> {
                Ok(0.0)
            }
            fn restrict(&self, e: &Trajectory, l: f64, o: f64) -> Result<Trajectory> {
                let r = restrict(e, l, o)?;
                Trajectory::constant(l, e.step(), r.shift(), e.labels().to_vec(), &vec![0.0; e.dim()])
            }
        }
        let a = Trajectory::constant(1.0, 0.25, 0.0, channel_labels("x", 1), &[1.0]).unwrap();
        let b = Trajectory::constant(1.0, 0.25, 0.0, channel_labels("x", 1), &[2.0]).unwrap();
        let report = check_sheaf_axioms(&Forgetful, &[a, b], &[0.5]).unwrap();
        assert!(!report.separation_ok());
        assert!(!report.gluing_ok());
    }

    #[test]
    fn non_members_are_rejected() {
        let sheaf = constant_members();
        let ramp = Trajectory::from_fn(1.0, 0.25, 0.0, channel_labels("x", 1), |t| vec![t]).unwrap();
        assert!(matches!(
            check_sheaf_axioms(&sheaf, &[ramp], &[0.5]),
            Err(Error::NotAMember { .. })
        ));
    }
}
