//! Port-Hamiltonian systems `ẋ = (J − R)∇H + Bu`, `y = Bᵀ∇H` as
//! port-controlled subsystems of an enclosing dissipative Hamiltonian model.
//!
//! The closed system `ẋ = (J − R)∇H` is extended by port coordinates `ζ ∈ ℝᵐ`
//! with structure
//!
//! ```text
//! 𝒥 = [[J, B], [−Bᵀ, 0]]      ℛ = [[R, 0], [0, 0]]
//! ```
//!
//! and Hamiltonian `H ⊕ H_α`, where `H_α(t, ζ)` is an auxiliary,
//! time-varying potential. The closed system embeds by
//! `ζ = −∫₀ Bᵀ∇H dw` with `H_α = 0`, the port system by the same integral with
//! `H_α = u(t)ᵀζ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::auxiliary::{AuxHamiltonian, AuxKind, AuxTag};
use crate::error::{Error, Result};
use crate::fields::{block2, check_antisymmetric, check_symmetric_psd, probe_points, MatrixField, ScalarField};
use crate::interval_sheaf::{channel_labels, nan_max, Sheaf, Trajectory};
use crate::machine::{
    iso_machine, verify_port_control_diagram, DiagramOptions, DiagramReport, IsoSystem, Leg, Machine,
    MachineMorphism, SheafMap, Variant,
};
use crate::ode_behavior::{NodeBehavior, OdeBehavior, VectorField, DEFAULT_RESIDUAL_TOLERANCE};
use crate::interval_sheaf::DEFAULT_STEP;

/// Number of seeded points at which structure conditions are checked.
pub const STRUCTURE_PROBES: usize = 32;

#[derive(Debug, Clone)]
pub struct PHSystem {
    name: String,
    n: usize,
    m: usize,
    j: MatrixField,
    r: MatrixField,
    b: MatrixField,
    h: ScalarField,
    x_labels: Vec<String>,
    step: f64,
    tolerance: f64,
}

/// Worst values of the structure conditions over the probe points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub points: usize,
    pub j_antisymmetry: f64,
    pub r_symmetry: f64,
    pub r_negative_eigenvalue: f64,
    pub gradient_defect: f64,
}

impl PHSystem {
    pub fn new(
        name: impl Into<String>,
        j: MatrixField,
        r: MatrixField,
        b: MatrixField,
        h: ScalarField,
    ) -> Result<Self> {
        let n = h.dim();
        let m = b.shape().1;
        for (what, shape, expected) in [("J", j.shape(), (n, n)), ("R", r.shape(), (n, n)), ("B", b.shape(), (n, m))] {
            if shape != expected {
                return Err(Error::Config(format!("{what} is {shape:?}, expected {expected:?}")));
            }
        }
        Ok(Self {
            name: name.into(),
            n,
            m,
            j,
            r,
            b,
            h,
            x_labels: channel_labels("x", n),
            step: DEFAULT_STEP,
            tolerance: DEFAULT_RESIDUAL_TOLERANCE,
        })
    }

    /// Hooke spring and point mass, `H = (k q² + p²/m)/2`, force input on the
    /// momentum: `J = [[0, 1], [−1, 0]]`, `R = 0`, `B = [0; 1]`.
    pub fn mass_spring(k: f64, mass: f64) -> Result<Self> {
        if !(k > 0.0 && mass > 0.0) {
            return Err(Error::Config(format!("mass_spring needs k > 0 and m > 0, got k={k}, m={mass}")));
        }
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![k, 1.0 / mass]));
        let sys = Self::new(
            "mass_spring",
            MatrixField::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])),
            MatrixField::zeros(2, 2),
            MatrixField::constant(DMatrix::from_row_slice(2, 1, &[0.0, 1.0])),
            ScalarField::quadratic(q),
        )?;
        sys.with_labels(vec!["q".into(), "p".into()])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.x_labels = labels;
        Ok(self)
    }

    pub fn with_dissipation(mut self, r: MatrixField) -> Result<Self> {
        if r.shape() != (self.n, self.n) {
            return Err(Error::Config(format!("R is {:?}, expected {:?}", r.shape(), (self.n, self.n))));
        }
        self.r = r;
        Ok(self)
    }

    pub fn with_port(mut self, b: MatrixField) -> Result<Self> {
        if b.shape().0 != self.n {
            return Err(Error::Config(format!("B has {} rows, expected {}", b.shape().0, self.n)));
        }
        self.m = b.shape().1;
        self.b = b;
        Ok(self)
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn zeta_labels(&self) -> Vec<String> {
        channel_labels("zeta", self.m)
    }

    pub fn u_labels(&self) -> Vec<String> {
        channel_labels("u", self.m)
    }

    pub fn y_labels(&self) -> Vec<String> {
        channel_labels("y", self.m)
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.h
    }

    pub fn grad_h(&self, x: &DVector<f64>) -> DVector<f64> {
        self.h.gradient(x)
    }

    pub fn j(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.j.eval(x)
    }

    pub fn r(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.r.eval(x)
    }

    pub fn b(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.b.eval(x)
    }

    /// `(J − R)∇H` at `x`.
    pub fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.j(x)? - self.r(x)?) * self.grad_h(x))
    }

    /// `Bᵀ∇H` at `x`.
    pub fn output(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.b(x)?.transpose() * self.grad_h(x))
    }

    /// Checks antisymmetry of `J`, symmetric PSD of `R`, and the closed-form
    /// gradient of `H` at the given points.
    pub fn check_structure_at(&self, points: &[DVector<f64>]) -> Result<StructureReport> {
        let j_antisymmetry = check_antisymmetric("J", &self.j, points)?;
        let (r_symmetry, r_negative_eigenvalue) = check_symmetric_psd("R", &self.r, points)?;
        let gradient_defect = self.h.check_gradient("H", points)?;
        Ok(StructureReport {
            points: points.len(),
            j_antisymmetry,
            r_symmetry,
            r_negative_eigenvalue,
            gradient_defect,
        })
    }

    /// [`PHSystem::check_structure_at`] on seeded points of `[−2, 2]ⁿ`.
    pub fn check_structure(&self) -> Result<StructureReport> {
        self.check_structure_at(&probe_points(self.n, STRUCTURE_PROBES, 0))
    }

    fn xv(&self, node: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&node[..self.n])
    }
}

/// `ẋ = (J − R)∇H`, after checking the structure conditions.
pub fn closed_behavior(sys: &PHSystem) -> Result<OdeBehavior> {
    sys.check_structure()?;
    let s = sys.clone();
    let field = VectorField::new(sys.n, "(J - R) grad H", move |_, x| {
        s.drift(x).unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN))
    });
    OdeBehavior::new(format!("{} closed", sys.name), field)
        .with_step(sys.step)
        .with_tolerance(sys.tolerance)
        .with_labels(sys.x_labels.clone())
}

/// `(𝒥, ℛ)` over `ℝ^{n+m}`.
pub fn extended_structure(sys: &PHSystem) -> (MatrixField, MatrixField) {
    let (n, m) = (sys.n, sys.m);
    let (s1, s2) = (sys.clone(), sys.clone());
    let jj = MatrixField::new(n + m, n + m, move |xi| {
        let x = s1.xv(xi.as_slice());
        let (j, b) = (s1.j(&x).expect("J shape"), s1.b(&x).expect("B shape"));
        block2(&j, &b, &(-b.transpose()), &DMatrix::zeros(m, m))
    });
    let rr = MatrixField::new(n + m, n + m, move |xi| {
        let x = s2.xv(xi.as_slice());
        let r = s2.r(&x).expect("R shape");
        block2(&r, &DMatrix::zeros(n, m), &DMatrix::zeros(m, n), &DMatrix::zeros(m, m))
    });
    (jj, rr)
}

/// `ξ̇ = (𝒥 − ℛ)(ξ)·[∇H(x); ∇_ζ H_α(t − ϑ, ζ)]` for a fixed auxiliary
/// Hamiltonian, which is sampled onto every generated member.
pub fn extended_behavior(sys: &PHSystem, aux: AuxHamiltonian) -> Result<OdeBehavior> {
    sys.check_structure()?;
    if aux.width() != sys.m {
        return Err(Error::DimensionMismatch {
            expected: sys.m,
            got: aux.width(),
        });
    }
    let (jj, rr) = extended_structure(sys);
    let (s, a) = (sys.clone(), aux.clone());
    let field = VectorField::new(sys.n + sys.m, format!("(𝒥 - ℛ) grad (H + H_α[{}])", aux.kind().name()), move |t, xi| {
        let grad = stacked_gradient(&s, xi.as_slice(), a.gradient(t, &xi.as_slice()[s.n..]));
        (jj.eval(xi).expect("𝒥 shape") - rr.eval(xi).expect("ℛ shape")) * grad
    });
    let mut labels = sys.x_labels.clone();
    labels.extend(sys.zeta_labels());
    OdeBehavior::new(format!("{} extended", sys.name), field)
        .with_step(sys.step)
        .with_tolerance(sys.tolerance)
        .with_labels(labels)
        .map(|b| b.with_tags(vec![aux]))
}

fn stacked_gradient(sys: &PHSystem, xi: &[f64], aux_grad: DVector<f64>) -> DVector<f64> {
    let gh = sys.grad_h(&sys.xv(xi));
    DVector::from_iterator(sys.n + sys.m, gh.iter().chain(aux_grad.iter()).copied())
}

fn single_tag(e: &Trajectory) -> Result<&AuxTag> {
    e.aux().first().ok_or(Error::MissingAuxTag)
}

/// The enclosing behavior 𝔅: extended trajectories with any auxiliary
/// Hamiltonian of the supported kinds, read from the member's tag.
pub fn enclosing_behavior(sys: &PHSystem) -> NodeBehavior {
    let s = sys.clone();
    let sampler = sys.clone();
    NodeBehavior::new(format!("{} enclosing", sys.name), sys.n + sys.m, sys.tolerance, move |e, i| {
        let tag = single_tag(e)?;
        let node = e.node(i);
        let x = s.xv(node);
        let zeta = &node[s.n..];
        let gh = s.grad_h(&x);
        let b = s.b(&x)?;
        let dx = (s.j(&x)? - s.r(&x)?) * &gh + &b * tag.gradient(i, zeta);
        let dz = -(b.transpose() * gh);
        Ok(DVector::from_iterator(s.n + s.m, dx.iter().chain(dz.iter()).copied()))
    })
    .with_sampler(move |init, length, shift| {
        extended_behavior(&sampler, AuxHamiltonian::zero(sampler.m))?.integrate(init, shift, length)
    })
}

/// `ζ` with `ζ(0) = 0` and `ζ̇ = −y` by the trapezoidal rule on the grid of
/// `e`, where `y(i)` is the port output at node `i`.
pub fn port_integral(e: &Trajectory, m: usize, y: impl Fn(usize) -> Result<DVector<f64>>) -> Result<Vec<f64>> {
    let h = e.step();
    let mut out = Vec::with_capacity(e.nodes() * m);
    let mut zeta = DVector::zeros(m);
    let mut prev = y(0)?;
    out.extend(zeta.iter());
    for i in 1..e.nodes() {
        let cur = y(i)?;
        zeta -= (&prev + &cur) * (0.5 * h);
        out.extend(zeta.iter());
        prev = cur;
    }
    Ok(out)
}

/// The embedding `A: 𝔅₀ ↪ 𝔅` as a map, without the membership check.
pub fn embedding_map(sys: &PHSystem) -> SheafMap {
    let s = sys.clone();
    SheafMap::new("A", move |e| embed_unchecked(&s, e, 1.0))
}

fn embed_unchecked(sys: &PHSystem, e: &Trajectory, sign: f64) -> Result<Trajectory> {
    let zeta = port_integral(e, sys.m, |i| Ok(sys.output(&sys.xv(e.node(i)))? * sign))?;
    e.select(&sys.x_labels)?
        .append_channels(sys.zeta_labels(), &zeta)?
        .with_aux(vec![AuxTag::zero(sys.m, e.nodes())])
}

/// `A(x, ϑ) = ((x, −∫₀ Bᵀ∇H(x) dw), ϑ, 0)` for a member of the closed behavior.
pub fn embed_closed(sys: &PHSystem, e: &Trajectory) -> Result<Trajectory> {
    closed_behavior(sys)?.require_member(e)?;
    embed_unchecked(sys, e, 1.0)
}

/// `φ_𝔄 = ∇_ζ H_α(t − ϑ, ζ)`, read from the member's auxiliary tag.
pub fn aux_gradient_leg(sys: &PHSystem) -> SheafMap {
    let s = sys.clone();
    SheafMap::new("φ_𝔄", move |e| {
        let tag = single_tag(e)?.clone();
        e.map_nodes(s.u_labels(), |_, i, node| Ok(tag.gradient(i, &node[s.n..s.n + s.m]).data.into()))
    })
}

/// `φ_𝔈 = −ζ̇`, evaluated from the ζ-block of the extended vector field,
/// which on members of 𝔅 reads `−ζ̇ = Bᵀ∇H`.
pub fn port_rate_leg(sys: &PHSystem) -> SheafMap {
    let s = sys.clone();
    SheafMap::new("φ_𝔈", move |e| {
        e.map_nodes(s.y_labels(), |_, _, node| Ok(s.output(&s.xv(node))?.data.into()))
    })
}

/// `−ζ̇` by finite differences of the ζ channels (central inside, one-sided
/// second order at the ends), for auditing [`port_rate_leg`].
pub fn differentiated_port_leg(sys: &PHSystem, e: &Trajectory) -> Result<Trajectory> {
    let zeta = e.select(&sys.zeta_labels())?;
    let d = finite_difference(&zeta)?;
    let v = d.values().iter().map(|v| -v).collect();
    d.with_values(sys.y_labels(), v)
}

/// Node-wise second-order derivative estimate of every channel.
pub fn finite_difference(e: &Trajectory) -> Result<Trajectory> {
    let (n, h, dim) = (e.nodes(), e.step(), e.dim());
    if n < 3 {
        return Err(Error::InvalidTrajectory("differentiation needs at least three nodes".into()));
    }
    let mut values = Vec::with_capacity(n * dim);
    for i in 0..n {
        for c in 0..dim {
            let v = |k: usize| e.node(k)[c];
            values.push(if i == 0 {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h)
            } else {
                (v(i + 1) - v(i - 1)) / (2.0 * h)
            });
        }
    }
    e.with_values(e.labels().to_vec(), values)
}

/// `(φ_𝔄, φ_𝔈)` of the enclosing machine.
pub fn projections(sys: &PHSystem) -> (SheafMap, SheafMap) {
    (aux_gradient_leg(sys), port_rate_leg(sys))
}

/// The input-state-output system of `ẋ = (J − R)∇H + Bu`, `y = Bᵀ∇H`.
pub fn ph_iso_system(sys: &PHSystem) -> Result<IsoSystem> {
    sys.check_structure()?;
    let (s1, s2) = (sys.clone(), sys.clone());
    IsoSystem::new(
        format!("{} port", sys.name),
        (sys.n, sys.m, sys.m),
        move |_, x, u| match (s1.drift(x), s1.b(x)) {
            (Ok(d), Ok(b)) => d + b * u,
            _ => DVector::from_element(x.len(), f64::NAN),
        },
        move |_, x, _| s2.output(x).unwrap_or_else(|_| DVector::from_element(s2.m, f64::NAN)),
    )
    .with_labels(sys.x_labels.clone(), sys.u_labels(), sys.y_labels())
    .map(|iso| iso.with_step(sys.step).with_tolerance(sys.tolerance))
}

pub fn ph_iso_machine(sys: &PHSystem) -> Result<Machine> {
    Ok(iso_machine(ph_iso_system(sys)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAudit {
    /// `max |Ḣ − yᵀu + ∇HᵀR∇H|` over the nodes.
    pub balance_defect: f64,
    /// `max (Ḣ − yᵀu)`; nonpositive up to differentiation error when `R ⪰ 0`.
    pub supply_excess: f64,
    pub nodes: usize,
}

/// Power balance along a packed `(x, u)` trajectory, with `Ḣ` by second-order
/// finite differences of `H(x(t))`.
pub fn power_audit(sys: &PHSystem, e: &Trajectory) -> Result<PowerAudit> {
    let mut labels = sys.x_labels.clone();
    labels.extend(sys.u_labels());
    let e = e.select(&labels)?;
    let energy = e.map_nodes(vec!["H".into()], |_, _, node| Ok(vec![sys.h.value(&sys.xv(node))]))?;
    let hdot = finite_difference(&energy)?;
    let (mut balance_defect, mut supply_excess) = (0.0, f64::NEG_INFINITY);
    for i in 0..e.nodes() {
        let node = e.node(i);
        let x = sys.xv(node);
        let u = DVector::from_column_slice(&node[sys.n..]);
        let gh = sys.grad_h(&x);
        let supply = sys.output(&x)?.dot(&u);
        let dissipation = gh.dot(&(sys.r(&x)? * &gh));
        let d = hdot.node(i)[0];
        balance_defect = nan_max(balance_defect, (d - supply + dissipation).abs());
        supply_excess = nan_max(supply_excess, d - supply);
    }
    Ok(PowerAudit {
        balance_defect,
        supply_excess,
        nodes: e.nodes(),
    })
}

/// `max_i |H(x_i) − H(x_0)|` along a closed trajectory.
pub fn energy_drift(sys: &PHSystem, e: &Trajectory) -> Result<f64> {
    let x = e.select(&sys.x_labels)?;
    let h0 = sys.h.value(&x.node_vector(0));
    Ok((0..x.nodes()).map(|i| (sys.h.value(&x.node_vector(i)) - h0).abs()).fold(0.0, nan_max))
}

/// The machines and morphisms of the port-control diagram
///
/// ```text
/// (𝔅₀, 𝔒, 𝔄₀) ──(A, id, id)──▶ (𝔅, 𝔄, 𝔈)
///        ╲                        ▲
///         Ψ                       Ξ
///          ╲                     ╱
///           ▶ (𝔅̂, 𝔄̂, 𝔈̂) ───────
/// ```
#[derive(Debug, Clone)]
pub struct PortControlDiagram {
    pub closed: Machine,
    pub enclosing: Machine,
    pub port: Machine,
    pub psi: MachineMorphism,
    pub xi: MachineMorphism,
    pub a_phi: MachineMorphism,
    /// Which leg of `closed` is the constant one.
    pub constant_leg: Leg,
}

impl PortControlDiagram {
    pub fn verify(&self, probes: &[Trajectory], tolerance: f64) -> Result<DiagramReport> {
        verify_port_control_diagram(
            &self.closed,
            &self.enclosing,
            &self.port,
            &self.psi,
            &self.xi,
            &self.a_phi,
            probes,
            &DiagramOptions::new(tolerance, self.constant_leg),
        )
    }
}

/// `Ξ₀(x, u, ϑ) = ((x, sign·(−∫₀ Bᵀ∇H dw)), ϑ, u(·)ᵀζ)`; `sign = −1` is the
/// corrupted variant used to show that the diagram check has teeth.
pub fn xi_map(sys: &PHSystem, sign: f64) -> SheafMap {
    let s = sys.clone();
    SheafMap::new(if sign == 1.0 { "Ξ₀" } else { "Ξ₀(corrupted)" }, move |e| {
        let u = e.select(&s.u_labels())?;
        let zeta = port_integral(e, s.m, |i| Ok(s.output(&s.xv(e.node(i)))? * sign))?;
        let tag = AuxTag::linear_from_samples(s.m, e.nodes(), u.values().to_vec())?;
        e.select(&s.x_labels)?.append_channels(s.zeta_labels(), &zeta)?.with_aux(vec![tag])
    })
}

/// Assembles the diagram with the closed machine's legs taken as pullbacks
/// of the enclosing legs along `A`: the 𝔄-leg `φ_𝔈∘A = Bᵀ∇H` is the port leg
/// and the 𝔈-leg `φ_𝔄∘A = 0` is the constant leg into 𝔒.
pub fn ph_diagram(sys: &PHSystem) -> Result<PortControlDiagram> {
    let closed_b = closed_behavior(sys)?;
    let (a_leg, e_leg) = projections(sys);
    let embed = embedding_map(sys);

    let enclosing = Machine::new(
        format!("{} enclosing", sys.name),
        Arc::new(enclosing_behavior(sys)),
        a_leg.clone(),
        sys.u_labels(),
        e_leg.clone(),
        sys.y_labels(),
    );
    let closed = Machine::new(
        format!("{} closed", sys.name),
        Arc::new(closed_b),
        e_leg.after(&embed),
        sys.y_labels(),
        a_leg.after(&embed),
        sys.u_labels(),
    );
    let port = ph_iso_machine(sys)?;

    let s = sys.clone();
    let psi_beta = SheafMap::new("Ψ", move |e| {
        let x = e.select(&s.x_labels)?;
        x.append_channels(s.u_labels(), &vec![0.0; x.nodes() * s.m])
    });
    // Ψ and A send the port leg to the output/𝔈 side and the constant leg
    // to the input/𝔄 side, so both are of the swapped kind; Ξ is straight.
    let psi = MachineMorphism::new("Ψ", psi_beta, SheafMap::identity(), SheafMap::identity(), Variant::Swapped);
    let xi = MachineMorphism::new("Ξ", xi_map(sys, 1.0), SheafMap::identity(), SheafMap::identity(), Variant::Straight);
    let a_phi = MachineMorphism::new("(A, id, id)", embed, SheafMap::identity(), SheafMap::identity(), Variant::Swapped);
    Ok(PortControlDiagram {
        closed,
        enclosing,
        port,
        psi,
        xi,
        a_phi,
        constant_leg: Leg::E,
    })
}

/// Closed members from seeded initial values in `[−2, 2]ⁿ`.
pub fn closed_probes(sys: &PHSystem, count: usize, seed: u64, length: f64) -> Result<Vec<Trajectory>> {
    let b = closed_behavior(sys)?;
    probe_points(sys.n, count, seed)
        .iter()
        .map(|x0| b.integrate(x0.as_slice(), 0.0, length))
        .collect()
}

pub fn build_ph_diagram(sys: &PHSystem, probes: &[Trajectory], tolerance: f64) -> Result<DiagramReport> {
    ph_diagram(sys)?.verify(probes, tolerance)
}

/// True when a quadratic auxiliary Hamiltonian with constant profile is used;
/// only then is `H ⊕ H_α` conserved exactly by the extended flow with `R = 0`.
pub fn total_energy(sys: &PHSystem, aux: &AuxHamiltonian, e: &Trajectory) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(e.nodes());
    for i in 0..e.nodes() {
        let node = e.node(i);
        out.push(sys.h.value(&sys.xv(node)) + aux.value(e.abs_time(i), &node[sys.n..sys.n + sys.m]));
    }
    Ok(out)
}

/// Is `kind` one of the families the enclosing behavior accepts.
pub fn supported_aux(kind: &AuxKind) -> bool {
    matches!(kind, AuxKind::Zero | AuxKind::Linear | AuxKind::Quadratic { .. })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sheaf::restrict;
    use crate::machine::{injectivity_probe, min_pairwise_distance};
    use crate::signal::Signal;

    fn ms() -> PHSystem {
        PHSystem::mass_spring(1.0, 1.0).unwrap()
    }

    #[test]
    fn mass_spring_orbit() {
        let b = closed_behavior(&ms()).unwrap();
        let e = b.integrate(&[1.0, 0.0], 0.0, 10.0).unwrap();
        assert!(energy_drift(&ms(), &e).unwrap() <= 1e-6);
        let t = 10.0f64;
        assert!((e.last()[0] - t.cos()).abs() < 1e-9);
        assert!((e.last()[1] + t.sin()).abs() < 1e-9);
    }

    #[test]
    fn pure_dissipation_decays() {
        let sys = PHSystem::new(
            "decay",
            MatrixField::zeros(2, 2),
            MatrixField::constant(DMatrix::identity(2, 2)),
            MatrixField::zeros(2, 1),
            ScalarField::quadratic(DMatrix::identity(2, 2)),
        )
        .unwrap();
        let e = closed_behavior(&sys).unwrap().integrate(&[1.0, -2.0], 0.0, 2.0).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..e.nodes() {
            let t = e.local_time(i);
            assert!((e.node(i)[0] - (-t).exp()).abs() < 1e-10);
            let h = sys.hamiltonian().value(&e.node_vector(i));
            assert!(h < last);
            last = h;
        }
    }

    #[test]
    fn non_antisymmetric_j_is_rejected() {
        let sys = PHSystem::new(
            "bad",
            MatrixField::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
            MatrixField::zeros(2, 2),
            MatrixField::zeros(2, 1),
            ScalarField::quadratic(DMatrix::identity(2, 2)),
        )
        .unwrap();
        assert!(matches!(closed_behavior(&sys), Err(Error::StructureViolation { .. })));
    }

    #[test]
    fn extended_structure_of_the_mass_spring() {
        let (jj, rr) = extended_structure(&ms());
        let xi = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
        assert_eq!(jj.eval(&xi).unwrap(), expected);
        assert_eq!(rr.eval(&xi).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn zeta_of_the_mass_spring() {
        // p = −sin t  ⇒  ζ = −∫ p dw = 1 − cos t
        let sys = ms();
        let e = closed_behavior(&sys).unwrap().integrate(&[1.0, 0.0], 0.0, 10.0).unwrap();
        let xi = embed_closed(&sys, &e).unwrap();
        let zeta = xi.channel("zeta0").unwrap();
        for (i, z) in zeta.iter().enumerate() {
            assert!((z - (1.0 - e.local_time(i).cos())).abs() < 1e-6);
        }
        let leg = port_rate_leg(&sys).apply(&xi).unwrap();
        let fd = differentiated_port_leg(&sys, &xi).unwrap();
        for i in 0..xi.nodes() {
            let t = e.local_time(i);
            assert!((leg.node(i)[0] + t.sin()).abs() < 1e-8);
            assert!((fd.node(i)[0] + t.sin()).abs() < 5e-6);
        }
        let zero = aux_gradient_leg(&sys).apply(&xi).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        assert!(enclosing_behavior(&sys).residual(&xi).unwrap() <= 1e-6);
    }

    #[test]
    fn embedding_re_anchors_under_restriction() {
        let sys = ms();
        let e = closed_behavior(&sys).unwrap().integrate(&[0.5, 1.0], 0.0, 2.0).unwrap();
        let full = embed_closed(&sys, &e).unwrap();
        let r = restrict(&e, 1.0, 0.5).unwrap();
        let a = embed_closed(&sys, &r).unwrap();
        let b = restrict(&full, 1.0, 0.5).unwrap();
        let offset = b.node(0)[2];
        for i in 0..a.nodes() {
            assert!((a.node(i)[2] - (b.node(i)[2] - offset)).abs() <= 1e-9);
            assert_eq!(&a.node(i)[..2], &b.node(i)[..2]);
        }
    }

    #[test]
    fn quadratic_aux_conserves_total_energy() {
        let sys = ms();
        let kappa = 2.0;
        let aux = AuxHamiltonian::quadratic(DMatrix::identity(1, 1), Signal::constant(DVector::from_element(1, kappa))).unwrap();
        let b = extended_behavior(&sys, aux.clone()).unwrap();
        let e = b.integrate(&[1.0, 0.0, 0.5], 0.0, 10.0).unwrap();
        let energy = total_energy(&sys, &aux, &e).unwrap();
        let drift = energy.iter().map(|v| (v - energy[0]).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-6, "{drift}");
        assert!(enclosing_behavior(&sys).residual(&e).unwrap() <= b.tolerance());
    }

    #[test]
    fn linear_aux_is_a_constant_force() {
        let sys = ms();
        let u0 = 0.7;
        let aux = AuxHamiltonian::linear(Signal::constant(DVector::from_element(1, u0)));
        let b = extended_behavior(&sys, aux).unwrap();
        let xi = DVector::from_vec(vec![0.2, 0.4, 3.0]);
        let v = b.field().eval(0.0, &xi).unwrap();
        assert_eq!(v.as_slice(), &[0.4, -0.2 + u0, -0.4]);
        let e = b.integrate(&[0.2, 0.4, 0.0], 0.0, 1.0).unwrap();
        let a = aux_gradient_leg(&sys).apply(&e).unwrap();
        assert!(a.values().iter().all(|&v| v == u0));
    }

    #[test]
    fn power_balance_with_sinusoidal_input() {
        let sys = ms();
        let iso = ph_iso_system(&sys).unwrap();
        let e = iso.simulate(&[1.0, 0.0], &Signal::sine(1, 1.0, 1.0, 0.0), 0.0, 10.0).unwrap();
        let audit = power_audit(&sys, &e).unwrap();
        assert!(audit.balance_defect <= 1e-5, "{audit:?}");
    }

    #[test]
    fn embedding_separates_probes() {
        let sys = ms();
        let probes = closed_probes(&sys, 5, 1, 2.0).unwrap();
        let r = injectivity_probe(&embedding_map(&sys), &probes, min_pairwise_distance(&probes)).unwrap();
        assert!(r.separates());
    }

    #[test]
    fn mass_spring_diagram() {
        let sys = ms();
        let probes = closed_probes(&sys, 3, 7, 2.0).unwrap();
        let report = build_ph_diagram(&sys, &probes, 1e-5).unwrap();
        assert!(report.pass, "{:?}", report.failures());
        assert_eq!(report.worst["triangle"], 0.0);
        let mut broken = ph_diagram(&sys).unwrap();
        broken.xi.beta = xi_map(&sys, -1.0);
        let report = broken.verify(&probes, 1e-5).unwrap();
        assert!(!report.pass);
        assert!(report.worst["triangle"] > 1e-3);
    }

    #[test]
    fn degenerate_port() {
        let sys = ms().with_port(MatrixField::zeros(2, 1)).unwrap();
        let probes = closed_probes(&sys, 3, 2, 1.0).unwrap();
        let report = build_ph_diagram(&sys, &probes, 1e-5).unwrap();
        assert!(report.pass, "{:?}", report.failures());
        let xi = embed_closed(&sys, &probes[0]).unwrap();
        assert_eq!(xi.select(&["zeta0"]).unwrap().sup_norm(), 0.0);
    }
}
