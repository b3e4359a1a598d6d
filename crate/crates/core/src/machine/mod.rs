//! Continuous machines and their morphisms.
//!
//! A machine is a behavior sheaf with two sheaf morphisms out of it, the
//! 𝔄-leg and the 𝔈-leg. A morphism of machines is a triple `(β, η, α)` of
//! sheaf morphisms commuting with the legs, either leg-to-same-leg
//! ([`Variant::Straight`]) or with the legs exchanged ([`Variant::Swapped`]).
//!
//! Injectivity of a morphism cannot be decided numerically; it is probed on
//! finite sets of members and reported as evidence.

mod diagram;
mod iso;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval_sheaf::{grid_count, nan_max, restrict, Sheaf, Trajectory};

pub use self::diagram::{verify_port_control_diagram, DiagramOptions, DiagramReport, ProbeDefects};
pub use self::iso::{iso_machine, IsoBehavior, IsoSystem};

/// Sup-norm tolerance for legs commuting with restriction.
pub const NATURALITY_TOLERANCE: f64 = 1e-9;

type MapFn = dyn Fn(&Trajectory) -> Result<Trajectory> + Send + Sync;

/// A morphism of interval sheaves, applied member by member.
#[derive(Clone)]
pub struct SheafMap {
    name: String,
    f: Arc<MapFn>,
}

impl SheafMap {
    pub fn new(name: impl Into<String>, f: impl Fn(&Trajectory) -> Result<Trajectory> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn identity() -> Self {
        Self::new("id", |e| Ok(e.clone()))
    }

    /// Projection onto named channels.
    pub fn select(labels: Vec<String>) -> Self {
        Self::new(format!("select{labels:?}"), move |e| e.select(&labels))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, e: &Trajectory) -> Result<Trajectory> {
        (self.f)(e)
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &SheafMap) -> SheafMap {
        let (outer, inner_f) = (self.f.clone(), inner.f.clone());
        SheafMap::new(format!("{}∘{}", self.name, inner.name), move |e| outer(&inner_f(e)?))
    }
}

impl fmt::Debug for SheafMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SheafMap({})", self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    A,
    E,
}

impl Leg {
    pub fn other(self) -> Leg {
        match self {
            Leg::A => Leg::E,
            Leg::E => Leg::A,
        }
    }
}

/// A continuous machine `(𝔅, 𝔄, 𝔈, (φ_𝔄, φ_𝔈))`.
#[derive(Clone)]
pub struct Machine {
    name: String,
    behavior: Arc<dyn Sheaf>,
    a_leg: SheafMap,
    e_leg: SheafMap,
    a_labels: Vec<String>,
    e_labels: Vec<String>,
}

impl Machine {
    pub fn new(
        name: impl Into<String>,
        behavior: Arc<dyn Sheaf>,
        a_leg: SheafMap,
        a_labels: Vec<String>,
        e_leg: SheafMap,
        e_labels: Vec<String>,
    ) -> Self {
        Self {
            name: name.into(),
            behavior,
            a_leg,
            e_leg,
            a_labels,
            e_labels,
        }
    }

    /// The same behavior with the two legs exchanged.
    pub fn swapped(&self) -> Machine {
        Machine {
            name: format!("{}ᵀ", self.name),
            behavior: self.behavior.clone(),
            a_leg: self.e_leg.clone(),
            e_leg: self.a_leg.clone(),
            a_labels: self.e_labels.clone(),
            e_labels: self.a_labels.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn behavior(&self) -> &dyn Sheaf {
        self.behavior.as_ref()
    }

    pub fn a_labels(&self) -> &[String] {
        &self.a_labels
    }

    pub fn e_labels(&self) -> &[String] {
        &self.e_labels
    }

    pub fn leg(&self, which: Leg) -> &SheafMap {
        match which {
            Leg::A => &self.a_leg,
            Leg::E => &self.e_leg,
        }
    }

    pub fn a(&self, e: &Trajectory) -> Result<Trajectory> {
        self.a_leg.apply(e)
    }

    pub fn e(&self, e: &Trajectory) -> Result<Trajectory> {
        self.e_leg.apply(e)
    }

    /// Worst `‖leg(restrict(e)) − restrict(leg(e))‖∞` over the probes and
    /// the interior grid cuts `cuts`, including shift and length agreement.
    /// Fails with [`Error::LegNotNatural`] above [`NATURALITY_TOLERANCE`].
    pub fn check_naturality(&self, probes: &[Trajectory], cuts: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for which in [Leg::A, Leg::E] {
            let leg = self.leg(which);
            let d = probes
                .par_iter()
                .map(|e| leg_naturality(leg, e, cuts))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, nan_max);
            if !(d <= NATURALITY_TOLERANCE) {
                return Err(Error::LegNotNatural {
                    leg: format!("{}.{:?} ({})", self.name, which, leg.name()),
                    defect: d,
                });
            }
            worst = worst.max(d);
        }
        Ok(worst)
    }
}

impl fmt::Debug for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Machine")
            .field("name", &self.name)
            .field("behavior", &self.behavior.name())
            .field("a_labels", &self.a_labels)
            .field("e_labels", &self.e_labels)
            .finish()
    }
}

/// Defect between two trajectories, counting shift disagreement and
/// incompatible shapes (infinite).
pub fn trajectory_defect(x: &Trajectory, y: &Trajectory) -> f64 {
    if x.step() != y.step() {
        return f64::INFINITY;
    }
    nan_max(x.sup_distance(y), (x.shift() - y.shift()).abs())
}

fn leg_naturality(leg: &SheafMap, e: &Trajectory, cuts: &[f64]) -> Result<f64> {
    let image = leg.apply(e)?;
    if image.nodes() != e.nodes() || image.step() != e.step() {
        return Ok(f64::INFINITY);
    }
    let mut worst = (image.shift() - e.shift()).abs();
    for &c in cuts {
        if !(c > 0.0 && c < e.length()) || grid_count(c, e.step()).is_err() {
            continue;
        }
        for (len, off) in [(c, 0.0), (e.length() - c, c)] {
            let a = leg.apply(&restrict(e, len, off)?)?;
            let b = restrict(&image, len, off)?;
            worst = nan_max(worst, trajectory_defect(&a, &b));
        }
    }
    Ok(worst)
}

/// Grid-aligned cuts at roughly a quarter, a third and a half of `length`.
pub fn default_cuts(length: f64, step: f64) -> Vec<f64> {
    let n = (length / step).round() as usize;
    let mut cuts: Vec<f64> = [4, 3, 2]
        .iter()
        .map(|d| (n / d) as f64 * step)
        .filter(|&c| c > 0.0 && c < length)
        .collect();
    cuts.dedup();
    cuts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `dst.𝔈∘β = η∘src.𝔈` and `dst.𝔄∘β = α∘src.𝔄`.
    Straight,
    /// `dst.𝔄∘β = η∘src.𝔈` and `dst.𝔈∘β = α∘src.𝔄`.
    Swapped,
}

/// `(β, η, α)`: `η` acts on the source's 𝔈-leg, `α` on its 𝔄-leg, and the
/// variant says which target leg each lands in.
#[derive(Debug, Clone)]
pub struct MachineMorphism {
    pub name: String,
    pub beta: SheafMap,
    pub eta: SheafMap,
    pub alpha: SheafMap,
    pub variant: Variant,
}

impl MachineMorphism {
    pub fn new(name: impl Into<String>, beta: SheafMap, eta: SheafMap, alpha: SheafMap, variant: Variant) -> Self {
        Self {
            name: name.into(),
            beta,
            eta,
            alpha,
            variant,
        }
    }

    pub fn identity(variant: Variant) -> Self {
        Self::new("id", SheafMap::identity(), SheafMap::identity(), SheafMap::identity(), variant)
    }

    /// The target leg receiving the image of the source leg `leg`.
    pub fn target_leg(&self, leg: Leg) -> Leg {
        match self.variant {
            Variant::Straight => leg,
            Variant::Swapped => leg.other(),
        }
    }

    /// The map applied to the source leg `leg`.
    pub fn leg_map(&self, leg: Leg) -> &SheafMap {
        match leg {
            Leg::E => &self.eta,
            Leg::A => &self.alpha,
        }
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &MachineMorphism) -> MachineMorphism {
        let compose = |leg: Leg| {
            let mid = inner.target_leg(leg);
            self.leg_map(mid).after(inner.leg_map(leg))
        };
        let variant = if self.target_leg(inner.target_leg(Leg::E)) == Leg::E {
            Variant::Straight
        } else {
            Variant::Swapped
        };
        MachineMorphism {
            name: format!("{}∘{}", self.name, inner.name),
            beta: self.beta.after(&inner.beta),
            eta: compose(Leg::E),
            alpha: compose(Leg::A),
            variant,
        }
    }
}

/// Leg defects of a morphism on one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegDefects {
    /// Defect of the square starting at the source 𝔈-leg.
    pub e: f64,
    /// Defect of the square starting at the source 𝔄-leg.
    pub a: f64,
}

impl LegDefects {
    pub fn max(&self) -> f64 {
        nan_max(self.e, self.a)
    }
}

/// Leg defects of `phi` on a single member `e` of `src`.
pub fn morphism_defects_at(phi: &MachineMorphism, src: &Machine, dst: &Machine, e: &Trajectory) -> Result<LegDefects> {
    let image = phi.beta.apply(e)?;
    let mut out = [0.0; 2];
    for (k, leg) in [Leg::E, Leg::A].into_iter().enumerate() {
        let down = dst.leg(phi.target_leg(leg)).apply(&image)?;
        let across = phi.leg_map(leg).apply(&src.leg(leg).apply(e)?)?;
        out[k] = trajectory_defect(&down, &across);
    }
    Ok(LegDefects { e: out[0], a: out[1] })
}

/// Worst leg defect of `phi` over probes, which must be members of `src`.
pub fn morphism_defect(phi: &MachineMorphism, src: &Machine, dst: &Machine, probes: &[Trajectory]) -> Result<f64> {
    for p in probes {
        src.behavior().require_member(p)?;
    }
    Ok(probes
        .par_iter()
        .map(|e| morphism_defects_at(phi, src, dst, e).map(|d| d.max()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, nan_max))
}

/// Outcome of [`injectivity_probe`]: pairs of probes whose images are closer
/// than `separation·1e−3`. An empty list is evidence of injectivity on the
/// probe set, not a proof.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub map: String,
    pub probes: usize,
    pub separation: f64,
    pub threshold: f64,
    pub collisions: Vec<(usize, usize, f64)>,
    pub min_image_distance: f64,
    pub evidence: &'static str,
}

impl ProbeResult {
    pub fn separates(&self) -> bool {
        self.collisions.is_empty()
    }
}

pub fn injectivity_probe(map: &SheafMap, probes: &[Trajectory], separation: f64) -> Result<ProbeResult> {
    let images = probes.par_iter().map(|e| map.apply(e)).collect::<Result<Vec<_>>>()?;
    let threshold = separation * 1e-3;
    let pairs: Vec<(usize, usize)> = (0..images.len())
        .flat_map(|i| (i + 1..images.len()).map(move |j| (i, j)))
        .collect();
    let distances: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| (i, j, trajectory_defect(&images[i], &images[j])))
        .collect();
    let min_image_distance = distances.iter().map(|d| d.2).fold(f64::INFINITY, f64::min);
    let collisions = distances.into_iter().filter(|d| !(d.2 >= threshold)).collect();
    Ok(ProbeResult {
        map: map.name().to_string(),
        probes: probes.len(),
        separation,
        threshold,
        collisions,
        min_image_distance,
        evidence: "probe-set evidence of injectivity, not a proof",
    })
}

/// Smallest pairwise defect among the probes (`+∞` for fewer than two).
pub fn min_pairwise_distance(probes: &[Trajectory]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            best = best.min(trajectory_defect(&probes[i], &probes[j]));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sheaf::{channel_labels, BehaviorSheaf};

    fn free_machine() -> Machine {
        // every 2-channel trajectory; 𝔄 = channel 0, 𝔈 = channel 1
        let b: Arc<dyn Sheaf> = Arc::new(BehaviorSheaf::new("free", 0.0, |_| Ok(0.0)));
        Machine::new(
            "free",
            b,
            SheafMap::select(vec!["x0".into()]),
            vec!["x0".into()],
            SheafMap::select(vec!["x1".into()]),
            vec!["x1".into()],
        )
    }

    fn probes() -> Vec<Trajectory> {
        (0..4)
            .map(|k| {
                let k = k as f64;
                Trajectory::from_fn(1.0, 0.125, 0.25, channel_labels("x", 2), move |t| vec![k + t, (k * t).sin()]).unwrap()
            })
            .collect()
    }

    #[test]
    fn identity_has_zero_defect() {
        let m = free_machine();
        assert_eq!(morphism_defect(&MachineMorphism::identity(Variant::Straight), &m, &m, &probes()).unwrap(), 0.0);
    }

    #[test]
    fn swapped_identity_onto_the_swapped_machine() {
        let m = free_machine();
        let id = MachineMorphism::identity(Variant::Swapped);
        assert_eq!(morphism_defect(&id, &m, &m.swapped(), &probes()).unwrap(), 0.0);
        assert!(morphism_defect(&id, &m, &m, &probes()).unwrap() > 0.0);
    }

    #[test]
    fn corrupted_eta_is_detected() {
        let m = free_machine();
        let mut phi = MachineMorphism::identity(Variant::Straight);
        phi.eta = SheafMap::new("2·", |e| {
            let v = e.values().iter().map(|v| 2.0 * v).collect();
            e.with_values(e.labels().to_vec(), v)
        });
        assert!(morphism_defect(&phi, &m, &m, &probes()).unwrap() > 0.0);
    }

    #[test]
    fn composition_of_variants() {
        let m = free_machine();
        let s = MachineMorphism::identity(Variant::Swapped);
        let twice = s.after(&s);
        assert_eq!(twice.variant, Variant::Straight);
        assert_eq!(morphism_defect(&twice, &m, &m, &probes()).unwrap(), 0.0);
        let mixed = s.after(&MachineMorphism::identity(Variant::Straight));
        assert_eq!(mixed.variant, Variant::Swapped);
        assert_eq!(morphism_defect(&mixed, &m, &m.swapped(), &probes()).unwrap(), 0.0);
    }

    #[test]
    fn injectivity_of_identity_and_constant() {
        let ps = probes();
        let sep = min_pairwise_distance(&ps);
        assert!(injectivity_probe(&SheafMap::identity(), &ps, sep).unwrap().separates());
        let constant = SheafMap::new("0", |e| e.with_values(e.labels().to_vec(), vec![0.0; e.values().len()]));
        let r = injectivity_probe(&constant, &ps, sep).unwrap();
        assert_eq!(r.collisions.len(), 6);
    }

    #[test]
    fn naturality_of_projections() {
        let m = free_machine();
        let ps = probes();
        assert_eq!(m.check_naturality(&ps, &default_cuts(1.0, 0.125)).unwrap(), 0.0);
        // a leg that depends on the whole interval is not a sheaf morphism
        let bad = Machine::new(
            "bad",
            Arc::new(BehaviorSheaf::new("free", 0.0, |_| Ok(0.0))),
            SheafMap::new("minus-first", |e| {
                let first = e.first().to_vec();
                e.map_nodes(e.labels().to_vec(), |_, _, x| Ok(x.iter().zip(&first).map(|(a, b)| a - b).collect()))
            }),
            vec![],
            SheafMap::identity(),
            vec![],
        );
        assert!(matches!(bad.check_naturality(&ps, &[0.5]), Err(Error::LegNotNatural { .. })));
    }

    #[test]
    fn default_cuts_are_interior_and_aligned() {
        let cuts = default_cuts(10.0, 1e-3);
        assert_eq!(cuts.len(), 3);
        for c in cuts {
            assert!(c > 0.0 && c < 10.0);
            grid_count(c, 1e-3).unwrap();
        }
        assert!(default_cuts(0.0, 0.1).is_empty());
    }
}
