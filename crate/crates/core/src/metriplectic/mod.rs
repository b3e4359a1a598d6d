//! Metriplectic systems `ẋ = J∇H + G∇S` with `J∇S = G∇H = 0`, and their
//! port-controlled extensions.
//!
//! The enclosing system lives on `(x, ζ) ∈ ℝ^{n+m}` with
//!
//! ```text
//! 𝒥 = [[J, B], [−Bᵀ, J̃]]      𝒢 = [[G, A], [Aᵀ, G̃]]
//! ```
//!
//! and potentials `H ⊕ H_α`, `S ⊕ S_α`. Its members carry two auxiliary tags,
//! `[H_α, S_α]`, and must satisfy `J̃∇H_α = G̃∇S_α = 0` node-wise.
//!
//! The port system has inputs `u` (channels `u*`) and `τ` (channels
//! `tau_in*`) and output `y = Bᵀ∇H − Aᵀ∇S − J̃u − G̃τ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::auxiliary::{AuxHamiltonian, AuxTag};
use crate::error::{Error, Result};
use crate::fields::{
    block2, check_antisymmetric, check_symmetric_psd, hat, min_sym_eigenvalue, probe_points, worst_over,
    MatrixField, ScalarField,
};
use crate::interval_sheaf::{channel_labels, nan_max, Sheaf, Trajectory, DEFAULT_STEP};
use crate::machine::{
    iso_machine, verify_port_control_diagram, DiagramOptions, DiagramReport, IsoSystem, Leg, Machine,
    MachineMorphism, SheafMap, Variant,
};
use crate::ode_behavior::{
    check_constraints, Constraint, NodeBehavior, OdeBehavior, VectorField, DEFAULT_RESIDUAL_TOLERANCE,
};
use crate::port_hamiltonian::{finite_difference, port_integral, STRUCTURE_PROBES};

/// Tolerance for the algebraic side conditions of the port system.
pub const SIDE_CONDITION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct MetriplecticSystem {
    name: String,
    n: usize,
    m: usize,
    j: MatrixField,
    g: MatrixField,
    b: MatrixField,
    a: MatrixField,
    jt: MatrixField,
    gt: MatrixField,
    h: ScalarField,
    s: ScalarField,
    x_labels: Vec<String>,
    step: f64,
    tolerance: f64,
}

/// Worst values of the structure and noninteraction conditions over the
/// probe points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetriplecticStructure {
    pub points: usize,
    pub j_antisymmetry: f64,
    pub g_symmetry: f64,
    pub g_negative_eigenvalue: f64,
    pub jt_antisymmetry: f64,
    pub extended_negative_eigenvalue: f64,
    /// `max ‖J∇S‖∞`
    pub j_grad_s: f64,
    /// `max ‖G∇H‖∞`
    pub g_grad_h: f64,
    pub gradient_defect: f64,
}

impl MetriplecticStructure {
    pub fn noninteraction(&self) -> f64 {
        self.j_grad_s.max(self.g_grad_h)
    }
}

impl MetriplecticSystem {
    /// Closed system with no ports (`m = 0`); attach ports with
    /// [`MetriplecticSystem::with_ports`].
    pub fn new(name: impl Into<String>, j: MatrixField, g: MatrixField, h: ScalarField, s: ScalarField) -> Result<Self> {
        let n = h.dim();
        if s.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
        }
        for (what, shape) in [("J", j.shape()), ("G", g.shape())] {
            if shape != (n, n) {
                return Err(Error::Config(format!("{what} is {shape:?}, expected {:?}", (n, n))));
            }
        }
        Ok(Self {
            name: name.into(),
            n,
            m: 0,
            j,
            g,
            b: MatrixField::zeros(n, 0),
            a: MatrixField::zeros(n, 0),
            jt: MatrixField::zeros(0, 0),
            gt: MatrixField::zeros(0, 0),
            h,
            s,
            x_labels: channel_labels("x", n),
            step: DEFAULT_STEP,
            tolerance: DEFAULT_RESIDUAL_TOLERANCE,
        })
    }

    /// Sets `B, A` (n×m) and `J̃, G̃` (m×m).
    pub fn with_ports(mut self, b: MatrixField, a: MatrixField, jt: MatrixField, gt: MatrixField) -> Result<Self> {
        let m = b.shape().1;
        for (what, shape, expected) in [
            ("B", b.shape(), (self.n, m)),
            ("A", a.shape(), (self.n, m)),
            ("J̃", jt.shape(), (m, m)),
            ("G̃", gt.shape(), (m, m)),
        ] {
            if shape != expected {
                return Err(Error::Config(format!("{what} is {shape:?}, expected {expected:?}")));
            }
        }
        self.m = m;
        self.b = b;
        self.a = a;
        self.jt = jt;
        self.gt = gt;
        Ok(self)
    }

    /// Free rigid body with a relaxing dissipation.
    ///
    /// `J(x) = x̂`, `H = ½Σ xᵢ²/Iᵢ`, `S = ½‖x‖²`,
    /// `G = γ(I − ∇H∇Hᵀ/‖∇H‖²)` (`γI` where `∇H = 0`), one port with
    /// `B(x) = e₃ × x` and `A = J̃ = G̃ = 0`. Then `J∇S = x × x = 0`,
    /// `G∇H = 0` and `Bᵀ∇S = x·(e₃ × x) = 0`.
    pub fn rigid_body(inertia: [f64; 3], gamma: f64) -> Result<Self> {
        if !(inertia.iter().all(|&i| i > 0.0) && gamma >= 0.0) {
            return Err(Error::Config(format!("rigid_body needs positive inertia and γ ≥ 0, got {inertia:?}, γ={gamma}")));
        }
        let inv = DVector::from_iterator(3, inertia.iter().map(|i| 1.0 / i));
        let h = ScalarField::quadratic(DMatrix::from_diagonal(&inv));
        let s = ScalarField::quadratic(DMatrix::identity(3, 3));
        let j = MatrixField::new(3, 3, |x| hat(x.as_slice()));
        let inv2 = inv.clone();
        let g = MatrixField::new(3, 3, move |x| {
            let gh = x.component_mul(&inv2);
            let norm2 = gh.norm_squared();
            let id = DMatrix::identity(3, 3);
            if norm2 == 0.0 {
                id * gamma
            } else {
                (id - &gh * gh.transpose() / norm2) * gamma
            }
        });
        let b = MatrixField::new(3, 1, |x| DMatrix::from_column_slice(3, 1, &[-x[1], x[0], 0.0]));
        Self::new("rigid_body", j, g, h, s)?
            .with_ports(b, MatrixField::zeros(3, 1), MatrixField::zeros(1, 1), MatrixField::zeros(1, 1))
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

    pub fn with_dissipation(mut self, g: MatrixField) -> Result<Self> {
        if g.shape() != (self.n, self.n) {
            return Err(Error::Config(format!("G is {:?}, expected {:?}", g.shape(), (self.n, self.n))));
        }
        self.g = g;
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

    pub fn tau_labels(&self) -> Vec<String> {
        channel_labels("tau_in", self.m)
    }

    /// `u*` followed by `tau_in*`.
    pub fn input_labels(&self) -> Vec<String> {
        let mut l = self.u_labels();
        l.extend(self.tau_labels());
        l
    }

    pub fn y_labels(&self) -> Vec<String> {
        channel_labels("y", self.m)
    }

    pub fn energy(&self) -> &ScalarField {
        &self.h
    }

    pub fn entropy(&self) -> &ScalarField {
        &self.s
    }

    pub fn fields(&self, x: &DVector<f64>) -> Result<PointFields> {
        Ok(PointFields {
            j: self.j.eval(x)?,
            g: self.g.eval(x)?,
            b: self.b.eval(x)?,
            a: self.a.eval(x)?,
            jt: self.jt.eval(x)?,
            gt: self.gt.eval(x)?,
            grad_h: self.h.gradient(x),
            grad_s: self.s.gradient(x),
        })
    }

    /// `J∇H + G∇S` at `x`.
    pub fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.fields(x)?;
        Ok(&f.j * &f.grad_h + &f.g * &f.grad_s)
    }

    /// `Bᵀ∇H − Aᵀ∇S − J̃u − G̃τ` at `x`.
    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>, tau: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.fields(x)?;
        Ok(f.b.transpose() * &f.grad_h - f.a.transpose() * &f.grad_s - &f.jt * u - &f.gt * tau)
    }

    pub fn check_structure_at(&self, points: &[DVector<f64>]) -> Result<MetriplecticStructure> {
        let j_antisymmetry = check_antisymmetric("J", &self.j, points)?;
        let (g_symmetry, g_negative_eigenvalue) = check_symmetric_psd("G", &self.g, points)?;
        let jt_antisymmetry = check_antisymmetric("J̃", &self.jt, points)?;
        let extended_negative_eigenvalue = worst_over(
            points,
            |x| {
                let f = self.fields(x)?;
                Ok((-min_sym_eigenvalue(&block2(&f.g, &f.a, &f.a.transpose(), &f.gt))).max(0.0))
            },
            |x, v| Error::StructureViolation {
                what: "[[G, A], [Aᵀ, G̃]] is not positive semidefinite".into(),
                point: x.iter().copied().collect(),
                value: -v,
            },
        )?;
        let gradient_defect = nan_max(self.h.check_gradient("H", points)?, self.s.check_gradient("S", points)?);
        let noninteraction = |what: &'static str, v: fn(&PointFields) -> DVector<f64>| {
            worst_over(
                points,
                |x| Ok(v(&self.fields(x)?).amax()),
                |x, value| Error::NoninteractionViolation {
                    what: what.into(),
                    point: x.iter().copied().collect(),
                    value,
                },
            )
        };
        let j_grad_s = noninteraction("J∇S ≡ 0", |f| &f.j * &f.grad_s)?;
        let g_grad_h = noninteraction("G∇H ≡ 0", |f| &f.g * &f.grad_h)?;
        Ok(MetriplecticStructure {
            points: points.len(),
            j_antisymmetry,
            g_symmetry,
            g_negative_eigenvalue,
            jt_antisymmetry,
            extended_negative_eigenvalue,
            j_grad_s,
            g_grad_h,
            gradient_defect,
        })
    }

    pub fn check_structure(&self) -> Result<MetriplecticStructure> {
        self.check_structure_at(&probe_points(self.n, STRUCTURE_PROBES, 0))
    }

    fn xv(&self, node: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&node[..self.n])
    }
}

/// All structure fields evaluated at one point.
#[derive(Debug, Clone)]
pub struct PointFields {
    pub j: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub jt: DMatrix<f64>,
    pub gt: DMatrix<f64>,
    pub grad_h: DVector<f64>,
    pub grad_s: DVector<f64>,
}

/// `ẋ = J∇H + G∇S`, after checking structure and noninteraction.
pub fn closed_metriplectic_behavior(sys: &MetriplecticSystem) -> Result<OdeBehavior> {
    sys.check_structure()?;
    let s = sys.clone();
    let field = VectorField::new(sys.n, "J grad H + G grad S", move |_, x| {
        s.drift(x).unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN))
    });
    OdeBehavior::new(format!("{} closed", sys.name), field)
        .with_step(sys.step)
        .with_tolerance(sys.tolerance)
        .with_labels(sys.x_labels.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyAudit {
    /// `max_i |H(x_i) − H(x_0)|`
    pub energy_drift: f64,
    /// `max |Ḣ|` with `Ḣ` by finite differences.
    pub max_energy_rate: f64,
    /// `min ∇Sᵀẋ` with `ẋ` from the vector field.
    pub min_entropy_rate: f64,
    /// `min Ṡ` with `Ṡ` by finite differences.
    pub min_entropy_rate_fd: f64,
}

/// Conservation of `H` and production of `S` along a closed trajectory.
pub fn degeneracy_audit(sys: &MetriplecticSystem, e: &Trajectory) -> Result<DegeneracyAudit> {
    let x = e.select(&sys.x_labels)?;
    let hs = x.map_nodes(vec!["H".into(), "S".into()], |_, _, node| {
        let x = sys.xv(node);
        Ok(vec![sys.h.value(&x), sys.s.value(&x)])
    })?;
    let rates = finite_difference(&hs)?;
    let h0 = hs.node(0)[0];
    let mut audit = DegeneracyAudit {
        energy_drift: 0.0,
        max_energy_rate: 0.0,
        min_entropy_rate: f64::INFINITY,
        min_entropy_rate_fd: f64::INFINITY,
    };
    for i in 0..x.nodes() {
        let xi = x.node_vector(i);
        let sdot = sys.s.gradient(&xi).dot(&sys.drift(&xi)?);
        audit.energy_drift = nan_max(audit.energy_drift, (hs.node(i)[0] - h0).abs());
        audit.max_energy_rate = nan_max(audit.max_energy_rate, rates.node(i)[0].abs());
        audit.min_entropy_rate = audit.min_entropy_rate.min(sdot);
        audit.min_entropy_rate_fd = audit.min_entropy_rate_fd.min(rates.node(i)[1]);
    }
    Ok(audit)
}

/// `(𝒥, 𝒢)` over `ℝ^{n+m}`, checked on the structure probes lifted by `ζ`.
pub fn extended_metriplectic_structure(sys: &MetriplecticSystem) -> Result<(MatrixField, MatrixField)> {
    sys.check_structure()?;
    let (s1, s2) = (sys.clone(), sys.clone());
    let (n, m) = (sys.n, sys.m);
    let jj = MatrixField::new(n + m, n + m, move |xi| {
        let f = s1.fields(&s1.xv(xi.as_slice())).expect("structure shapes");
        block2(&f.j, &f.b, &(-f.b.transpose()), &f.jt)
    });
    let gg = MatrixField::new(n + m, n + m, move |xi| {
        let f = s2.fields(&s2.xv(xi.as_slice())).expect("structure shapes");
        block2(&f.g, &f.a, &f.a.transpose(), &f.gt)
    });
    let points = probe_points(n + m, STRUCTURE_PROBES, 1);
    check_antisymmetric("𝒥", &jj, &points)?;
    check_symmetric_psd("𝒢", &gg, &points)?;
    Ok((jj, gg))
}

fn side_constraints(sys: &MetriplecticSystem) -> [Constraint; 2] {
    let (s1, s2) = (sys.clone(), sys.clone());
    [
        Constraint::at_node("J̃∇H_α ≡ 0", move |e, i| {
            let (node, tags) = (e.node(i), tags(e)?);
            Ok(s1.jt.eval(&s1.xv(node))? * tags[0].gradient(i, &node[s1.n..s1.n + s1.m]))
        }),
        Constraint::at_node("G̃∇S_α ≡ 0", move |e, i| {
            let (node, tags) = (e.node(i), tags(e)?);
            Ok(s2.gt.eval(&s2.xv(node))? * tags[1].gradient(i, &node[s2.n..s2.n + s2.m]))
        }),
    ]
}

fn tags(e: &Trajectory) -> Result<&[AuxTag]> {
    match e.aux() {
        t if t.len() >= 2 => Ok(&t[..2]),
        _ => Err(Error::MissingAuxTag),
    }
}

/// `ξ̇ = 𝒥∇(H ⊕ H_α) + 𝒢∇(S ⊕ S_α)` with the side conditions
/// `J̃∇H_α = G̃∇S_α = 0` as named constraints.
pub fn extended_metriplectic_behavior(
    sys: &MetriplecticSystem,
    aux_h: AuxHamiltonian,
    aux_s: AuxHamiltonian,
) -> Result<OdeBehavior> {
    let (jj, gg) = extended_metriplectic_structure(sys)?;
    for w in [aux_h.width(), aux_s.width()] {
        if w != sys.m {
            return Err(Error::DimensionMismatch { expected: sys.m, got: w });
        }
    }
    let (s, ah, as_) = (sys.clone(), aux_h.clone(), aux_s.clone());
    let field = VectorField::new(sys.n + sys.m, "𝒥 grad (H + H_α) + 𝒢 grad (S + S_α)", move |t, xi| {
        let x = s.xv(xi.as_slice());
        let zeta = &xi.as_slice()[s.n..];
        let stack = |a: DVector<f64>, b: DVector<f64>| DVector::from_iterator(s.n + s.m, a.iter().chain(b.iter()).copied());
        let dh = stack(s.h.gradient(&x), ah.gradient(t, zeta));
        let ds = stack(s.s.gradient(&x), as_.gradient(t, zeta));
        jj.eval(xi).expect("𝒥 shape") * dh + gg.eval(xi).expect("𝒢 shape") * ds
    });
    let mut labels = sys.x_labels.clone();
    labels.extend(sys.zeta_labels());
    let [c1, c2] = side_constraints(sys);
    Ok(OdeBehavior::new(format!("{} extended", sys.name), field)
        .with_step(sys.step)
        .with_tolerance(sys.tolerance)
        .with_labels(labels)?
        .with_tags(vec![aux_h, aux_s])
        .with_constraint(c1)
        .with_constraint(c2))
}

/// `ξ̇` of a member of the enclosing behavior at node `i`, using its tags.
fn enclosing_rhs(sys: &MetriplecticSystem, e: &Trajectory, i: usize) -> Result<DVector<f64>> {
    let tags = tags(e)?;
    let node = e.node(i);
    let zeta = &node[sys.n..sys.n + sys.m];
    let f = sys.fields(&sys.xv(node))?;
    let (dha, dsa) = (tags[0].gradient(i, zeta), tags[1].gradient(i, zeta));
    let dx = &f.j * &f.grad_h + &f.b * &dha + &f.g * &f.grad_s + &f.a * &dsa;
    let dz = -(f.b.transpose() * &f.grad_h) + &f.jt * &dha + f.a.transpose() * &f.grad_s + &f.gt * &dsa;
    Ok(DVector::from_iterator(sys.n + sys.m, dx.iter().chain(dz.iter()).copied()))
}

/// The enclosing behavior: extended trajectories with any supported pair of
/// auxiliary potentials, read from the member's two tags.
pub fn metriplectic_enclosing_behavior(sys: &MetriplecticSystem) -> NodeBehavior {
    let (s, sampler) = (sys.clone(), sys.clone());
    let [c1, c2] = side_constraints(sys);
    NodeBehavior::new(format!("{} enclosing", sys.name), sys.n + sys.m, sys.tolerance, move |e, i| {
        enclosing_rhs(&s, e, i)
    })
    .with_constraint(c1)
    .with_constraint(c2)
    .with_sampler(move |init, length, shift| {
        let zero = AuxHamiltonian::zero(sampler.m);
        extended_metriplectic_behavior(&sampler, zero.clone(), zero)?.integrate(init, shift, length)
    })
}

fn embed_unchecked(sys: &MetriplecticSystem, e: &Trajectory) -> Result<Trajectory> {
    let zero = DVector::zeros(sys.m);
    let zeta = port_integral(e, sys.m, |i| sys.output(&sys.xv(e.node(i)), &zero, &zero))?;
    e.select(&sys.x_labels)?
        .append_channels(sys.zeta_labels(), &zeta)?
        .with_aux(vec![AuxTag::zero(sys.m, e.nodes()), AuxTag::zero(sys.m, e.nodes())])
}

/// `A(x, ϑ) = ((x, −∫₀ (Bᵀ∇H − Aᵀ∇S) dw), ϑ, 0, 0)` for a closed member.
pub fn embed_metriplectic(sys: &MetriplecticSystem, e: &Trajectory) -> Result<Trajectory> {
    closed_metriplectic_behavior(sys)?.require_member(e)?;
    embed_unchecked(sys, e)
}

pub fn metriplectic_embedding_map(sys: &MetriplecticSystem) -> SheafMap {
    let s = sys.clone();
    SheafMap::new("A", move |e| embed_unchecked(&s, e))
}

/// `φ_𝔄 = (∇_ζ H_α, ∇_ζ S_α)`, `2m` channels.
pub fn aux_gradients_leg(sys: &MetriplecticSystem) -> SheafMap {
    let s = sys.clone();
    SheafMap::new("φ_𝔄", move |e| {
        let tags = tags(e)?.to_vec();
        e.map_nodes(s.input_labels(), |_, i, node| {
            let zeta = &node[s.n..s.n + s.m];
            Ok(tags[0].gradient(i, zeta).iter().chain(tags[1].gradient(i, zeta).iter()).copied().collect())
        })
    })
}

/// `φ_𝔈 = −ζ̇`, read from the ζ-block of the enclosing vector field.
pub fn metriplectic_port_rate_leg(sys: &MetriplecticSystem) -> SheafMap {
    let s = sys.clone();
    SheafMap::new("φ_𝔈", move |e| {
        let nodes: Vec<f64> = (0..e.nodes())
            .map(|i| enclosing_rhs(&s, e, i).map(|v| v.rows(s.n, s.m).iter().map(|z| -z).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
            .concat();
        e.with_values(s.y_labels(), nodes)
    })
}

/// The port conditions `J∇S = G∇H = Bτ = Au ≡ 0` and the strong
/// noninteraction `Bᵀ∇S = Aᵀ∇H = J̃τ = G̃u ≡ 0`, on packed `(x, u, τ)` nodes.
pub fn port_side_conditions(sys: &MetriplecticSystem) -> Vec<Constraint> {
    type Cond = fn(&PointFields, &DVector<f64>, &DVector<f64>) -> DVector<f64>;
    let conds: [(&str, Cond); 8] = [
        ("J∇S ≡ 0", |f, _, _| &f.j * &f.grad_s),
        ("G∇H ≡ 0", |f, _, _| &f.g * &f.grad_h),
        ("Bτ ≡ 0", |f, _, tau| &f.b * tau),
        ("Au ≡ 0", |f, u, _| &f.a * u),
        ("Bᵀ∇S ≡ 0", |f, _, _| f.b.transpose() * &f.grad_s),
        ("Aᵀ∇H ≡ 0", |f, _, _| f.a.transpose() * &f.grad_h),
        ("J̃τ ≡ 0", |f, _, tau| &f.jt * tau),
        ("G̃u ≡ 0", |f, u, _| &f.gt * u),
    ];
    conds
        .into_iter()
        .map(|(name, c)| {
            let s = sys.clone();
            Constraint::new(name, move |_, node| {
                let (n, m) = (s.n, s.m);
                let u = DVector::from_column_slice(&node[n..n + m]);
                let tau = DVector::from_column_slice(&node[n + m..n + 2 * m]);
                match s.fields(&s.xv(node)) {
                    Ok(f) => c(&f, &u, &tau),
                    Err(_) => DVector::from_element(1, f64::NAN),
                }
            })
        })
        .collect()
}

/// The port-metriplectic input-state-output system with inputs `(u, τ)`.
pub fn port_metriplectic_system(sys: &MetriplecticSystem) -> Result<IsoSystem> {
    sys.check_structure()?;
    let (s1, s2) = (sys.clone(), sys.clone());
    let (n, m) = (sys.n, sys.m);
    let split = move |w: &DVector<f64>| (w.rows(0, m).into_owned(), w.rows(m, m).into_owned());
    let mut iso = IsoSystem::new(
        format!("{} port", sys.name),
        (n, 2 * m, m),
        move |_, x, w| {
            let (u, tau) = split(w);
            match s1.fields(x) {
                Ok(f) => &f.j * &f.grad_h + &f.g * &f.grad_s + &f.b * u + &f.a * tau,
                Err(_) => DVector::from_element(n, f64::NAN),
            }
        },
        move |_, x, w| {
            let (u, tau) = split(w);
            s2.output(x, &u, &tau).unwrap_or_else(|_| DVector::from_element(m, f64::NAN))
        },
    )
    .with_labels(sys.x_labels.clone(), sys.input_labels(), sys.y_labels())?
    .with_step(sys.step)
    .with_tolerance(sys.tolerance);
    for c in port_side_conditions(sys) {
        iso = iso.with_constraint(c);
    }
    Ok(iso)
}

pub fn port_metriplectic_machine(sys: &MetriplecticSystem) -> Result<Machine> {
    Ok(iso_machine(port_metriplectic_system(sys)?))
}

/// Checks the side conditions of a packed `(x, u, τ)` trajectory at
/// [`SIDE_CONDITION_TOLERANCE`], naming the first violated one.
pub fn check_side_conditions(sys: &MetriplecticSystem, e: &Trajectory) -> Result<()> {
    check_constraints(&port_side_conditions(sys), e, SIDE_CONDITION_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesAudit {
    /// `max |Ḣ − ∇Hᵀ(Bu + Aτ)|`
    pub energy_defect: f64,
    /// `max |Ṡ − ∇SᵀG∇S − ∇Sᵀ(Bu + Aτ)|`
    pub entropy_defect: f64,
    pub nodes: usize,
}

/// Chain-rule identities for `H` and `S` along a packed `(x, u, τ)`
/// trajectory, with `Ḣ`, `Ṡ` by second-order finite differences.
pub fn rates_audit(sys: &MetriplecticSystem, e: &Trajectory) -> Result<RatesAudit> {
    let mut labels = sys.x_labels.clone();
    labels.extend(sys.input_labels());
    let e = e.select(&labels)?;
    let hs = e.map_nodes(vec!["H".into(), "S".into()], |_, _, node| {
        let x = sys.xv(node);
        Ok(vec![sys.h.value(&x), sys.s.value(&x)])
    })?;
    let rates = finite_difference(&hs)?;
    let (n, m) = (sys.n, sys.m);
    let mut audit = RatesAudit {
        energy_defect: 0.0,
        entropy_defect: 0.0,
        nodes: e.nodes(),
    };
    for i in 0..e.nodes() {
        let node = e.node(i);
        let f = sys.fields(&sys.xv(node))?;
        let u = DVector::from_column_slice(&node[n..n + m]);
        let tau = DVector::from_column_slice(&node[n + m..n + 2 * m]);
        let supply = &f.b * u + &f.a * tau;
        let dh = f.grad_h.dot(&supply);
        let ds = f.grad_s.dot(&(&f.g * &f.grad_s)) + f.grad_s.dot(&supply);
        audit.energy_defect = nan_max(audit.energy_defect, (rates.node(i)[0] - dh).abs());
        audit.entropy_defect = nan_max(audit.entropy_defect, (rates.node(i)[1] - ds).abs());
    }
    Ok(audit)
}

/// Machines and morphisms of the metriplectic port-control diagram.
#[derive(Debug, Clone)]
pub struct MetriplecticDiagram {
    pub closed: Machine,
    pub enclosing: Machine,
    pub port: Machine,
    pub psi: MachineMorphism,
    pub xi: MachineMorphism,
    pub a_phi: MachineMorphism,
    pub constant_leg: Leg,
}

impl MetriplecticDiagram {
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

/// `Ξ₀(x, u, τ, ϑ) = ((x, sign·(−∫₀ y dw)), ϑ, u(·)ᵀζ, τ(·)ᵀζ)`.
pub fn metriplectic_xi_map(sys: &MetriplecticSystem, sign: f64) -> SheafMap {
    let s = sys.clone();
    SheafMap::new(if sign == 1.0 { "Ξ₀" } else { "Ξ₀(corrupted)" }, move |e| {
        let (n, m) = (s.n, s.m);
        let u = e.select(&s.u_labels())?;
        let tau = e.select(&s.tau_labels())?;
        let zeta = port_integral(e, m, |i| {
            let node = e.node(i);
            let (ui, ti) = (DVector::from_column_slice(&node[n..n + m]), DVector::from_column_slice(&node[n + m..n + 2 * m]));
            Ok(s.output(&s.xv(node), &ui, &ti)? * sign)
        })?;
        let tags = vec![
            AuxTag::linear_from_samples(m, e.nodes(), u.values().to_vec())?,
            AuxTag::linear_from_samples(m, e.nodes(), tau.values().to_vec())?,
        ];
        e.select(&s.x_labels)?.append_channels(s.zeta_labels(), &zeta)?.with_aux(tags)
    })
}

/// Same assembly as the port-Hamiltonian diagram, with `2m` input channels.
pub fn metriplectic_diagram(sys: &MetriplecticSystem) -> Result<MetriplecticDiagram> {
    let closed_b = closed_metriplectic_behavior(sys)?;
    let (a_leg, e_leg) = (aux_gradients_leg(sys), metriplectic_port_rate_leg(sys));
    let embed = metriplectic_embedding_map(sys);
    let enclosing = Machine::new(
        format!("{} enclosing", sys.name),
        Arc::new(metriplectic_enclosing_behavior(sys)),
        a_leg.clone(),
        sys.input_labels(),
        e_leg.clone(),
        sys.y_labels(),
    );
    let closed = Machine::new(
        format!("{} closed", sys.name),
        Arc::new(closed_b),
        e_leg.after(&embed),
        sys.y_labels(),
        a_leg.after(&embed),
        sys.input_labels(),
    );
    let port = port_metriplectic_machine(sys)?;
    let s = sys.clone();
    let psi_beta = SheafMap::new("Ψ", move |e| {
        let x = e.select(&s.x_labels)?;
        x.append_channels(s.input_labels(), &vec![0.0; x.nodes() * 2 * s.m])
    });
    Ok(MetriplecticDiagram {
        closed,
        enclosing,
        port,
        psi: MachineMorphism::new("Ψ", psi_beta, SheafMap::identity(), SheafMap::identity(), Variant::Swapped),
        xi: MachineMorphism::new("Ξ", metriplectic_xi_map(sys, 1.0), SheafMap::identity(), SheafMap::identity(), Variant::Straight),
        a_phi: MachineMorphism::new("(A, id, id)", embed, SheafMap::identity(), SheafMap::identity(), Variant::Swapped),
        constant_leg: Leg::E,
    })
}

/// Closed members from seeded initial values in `[−2, 2]ⁿ`.
pub fn metriplectic_probes(sys: &MetriplecticSystem, count: usize, seed: u64, length: f64) -> Result<Vec<Trajectory>> {
    let b = closed_metriplectic_behavior(sys)?;
    probe_points(sys.n, count, seed)
        .iter()
        .map(|x0| b.integrate(x0.as_slice(), 0.0, length))
        .collect()
}

pub fn build_metriplectic_diagram(sys: &MetriplecticSystem, probes: &[Trajectory], tolerance: f64) -> Result<DiagramReport> {
    metriplectic_diagram(sys)?.verify(probes, tolerance)
}
