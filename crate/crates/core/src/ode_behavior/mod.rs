//! Behaviors of ordinary differential equations as interval sheaves.
//!
//! A member of the behavior of `ẋ = f(t, x)` over `[0, τ]` is a pair `(x, ϑ)`
//! with `ẋ(t) = f(t − ϑ, x(t))` on the whole closed interval. Members are
//! produced by a fixed-step fourth-order Runge-Kutta method and recognized by
//! a finite-difference residual.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auxiliary::AuxHamiltonian;
use crate::error::{Error, Result};
use crate::interval_sheaf::{channel_labels, grid_count, nan_max, BehaviorSheaf, Sheaf, Trajectory, DEFAULT_STEP};

/// Component magnitude treated as finite-time escape.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;

pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-4;

type Rhs = dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// `f: ℝ × ℝⁿ → ℝⁿ`, evaluated at absolute time.
///
/// The closure must be re-entrant; it is called from several threads when
/// probes are checked in parallel.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    description: String,
    rhs: Arc<Rhs>,
}

impl VectorField {
    pub fn new(
        dim: usize,
        description: impl Into<String>,
        rhs: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            description: description.into(),
            rhs: Arc::new(rhs),
        }
    }

    /// `ẋ = x²`, the scalar equation with finite escape time.
    pub fn blowup() -> Self {
        Self::new(1, "x' = x^2", |_, x| x.map(|v| v * v))
    }

    /// `ẋ = A x`.
    pub fn linear(a: nalgebra::DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let dim = a.nrows();
        Ok(Self::new(dim, format!("x' = A x ({dim}x{dim})"), move |_, x| &a * x))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let v = (self.rhs)(t, x);
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(v)
    }

    /// Largest difference quotient `‖f(t,x) − f(t,y)‖∞ / ‖x − y‖∞` over
    /// seeded random pairs in the box `center ± radius`. A report value only;
    /// it is a lower bound of the true Lipschitz constant on the box.
    pub fn lipschitz_estimate(&self, t: f64, center: &[f64], radius: f64, pairs: usize, seed: u64) -> Result<f64> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: center.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let point = |rng: &mut ChaCha8Rng| {
            DVector::from_iterator(self.dim, center.iter().map(|c| c + rng.random_range(-radius..=radius)))
        };
        let mut best: f64 = 0.0;
        for _ in 0..pairs {
            let (x, y) = (point(&mut rng), point(&mut rng));
            let dx = (&x - &y).amax();
            if dx > 0.0 {
                let df = (self.eval(t, &x)? - self.eval(t, &y)?).amax();
                best = best.max(df / dx);
            }
        }
        Ok(best)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("description", &self.description)
            .finish()
    }
}

/// The RK4 increment from `x` at stage time `s`.
fn rk4_increment(field: &VectorField, s: f64, h: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let k1 = field.eval(s, x)?;
    let k2 = field.eval(s + 0.5 * h, &(x + &k1 * (0.5 * h)))?;
    let k3 = field.eval(s + 0.5 * h, &(x + &k2 * (0.5 * h)))?;
    let k4 = field.eval(s + h, &(x + &k3 * h))?;
    Ok((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Integrates `ẋ(t) = f(t − ϑ, x(t))` from `x(0) = x0` over `[0, length]`.
///
/// Fails with [`Error::BlowUp`] as soon as a component leaves
/// `[−1e8, 1e8]` or stops being finite; the error carries the trajectory up to
/// the last node that was still within bounds.
pub fn integrate(field: &VectorField, x0: &[f64], shift: f64, length: f64, h: f64) -> Result<Trajectory> {
    integrate_labeled(field, x0, shift, length, h, channel_labels("x", field.dim()))
}

pub fn integrate_labeled(
    field: &VectorField,
    x0: &[f64],
    shift: f64,
    length: f64,
    h: f64,
    labels: Vec<String>,
) -> Result<Trajectory> {
    let steps = grid_count(length, h)?;
    if x0.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: x0.len(),
        });
    }
    let dim = field.dim();
    let mut values = Vec::with_capacity((steps + 1) * dim);
    values.extend_from_slice(x0);
    let mut x = DVector::from_column_slice(x0);
    // Kahan compensation of the running sum x₀ + Σ Δxᵢ; without it the
    // rounding of x + Δx dominates the error for h ≲ 1e−4
    let mut carry = DVector::zeros(dim);
    for i in 0..steps {
        let s = i as f64 * h - shift;
        let y = rk4_increment(field, s, h, &x)? - &carry;
        let next = &x + &y;
        carry = (&next - &x) - y;
        if next.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD) {
            let truncated = Trajectory::new(h, shift, labels, i + 1, values)?;
            return Err(Error::BlowUp {
                time: i as f64 * h,
                truncated: Box::new(truncated),
            });
        }
        values.extend(next.iter());
        x = next;
    }
    Trajectory::new(h, shift, labels, steps + 1, values)
}

/// Largest defect of the sampled derivative of the first `channels` channels
/// against `rhs(node)`.
///
/// Interior nodes compare the central difference with the field at the node.
/// Every grid interval additionally compares the forward difference with the
/// trapezoidal mean of the field at its two ends, which is second order at
/// the endpoints and makes the residual monotone under restriction. A
/// single-node trajectory has residual 0.
pub fn derivative_residual(
    e: &Trajectory,
    channels: usize,
    rhs: impl Fn(usize) -> Result<DVector<f64>>,
) -> Result<f64> {
    if e.dim() < channels {
        return Err(Error::DimensionMismatch {
            expected: channels,
            got: e.dim(),
        });
    }
    let n = e.nodes();
    if n < 2 || channels == 0 {
        return Ok(0.0);
    }
    let h = e.step();
    let f: Vec<DVector<f64>> = (0..n).map(&rhs).collect::<Result<_>>()?;
    if let Some(v) = f.iter().find(|v| v.len() != channels) {
        return Err(Error::DimensionMismatch {
            expected: channels,
            got: v.len(),
        });
    }
    let mut worst: f64 = 0.0;
    let mut track = |d: f64| {
        worst = if d.is_nan() || worst.is_nan() { f64::NAN } else { worst.max(d) };
    };
    for i in 0..n - 1 {
        let (a, b) = (e.node(i), e.node(i + 1));
        for c in 0..channels {
            track(((b[c] - a[c]) / h - 0.5 * (f[i][c] + f[i + 1][c])).abs());
        }
    }
    for i in 1..n - 1 {
        let (a, b) = (e.node(i - 1), e.node(i + 1));
        for c in 0..channels {
            track(((b[c] - a[c]) / (2.0 * h) - f[i][c]).abs());
        }
    }
    Ok(worst)
}

type ConstraintFn = dyn Fn(&Trajectory, usize) -> Result<DVector<f64>> + Send + Sync;

/// An algebraic side condition `g = 0` imposed at every node.
#[derive(Clone)]
pub struct Constraint {
    name: String,
    eval: Arc<ConstraintFn>,
}

impl Constraint {
    /// A condition `g(t − ϑ, state) = 0` on the node values.
    pub fn new(name: impl Into<String>, eval: impl Fn(f64, &[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self::at_node(name, move |e, i| Ok(eval(e.abs_time(i), e.node(i))))
    }

    /// A condition that may also read the trajectory's auxiliary tags.
    pub fn at_node(
        name: impl Into<String>,
        eval: impl Fn(&Trajectory, usize) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `‖g‖∞` at node `i` of `e`.
    pub fn value(&self, e: &Trajectory, i: usize) -> Result<f64> {
        Ok((self.eval)(e, i)?.iter().map(|v| v.abs()).fold(0.0, nan_max))
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Constraint").field("name", &self.name).finish()
    }
}

/// Worst value of each constraint along `e`, as `(name, node, value)`.
pub fn constraint_residuals(constraints: &[Constraint], e: &Trajectory) -> Result<Vec<(String, usize, f64)>> {
    constraints
        .iter()
        .map(|c| {
            let mut worst = (0, 0.0);
            for i in 0..e.nodes() {
                let v = c.value(e, i)?;
                if v.is_nan() || v > worst.1 {
                    worst = (i, v);
                    if v.is_nan() {
                        break;
                    }
                }
            }
            Ok((c.name.clone(), worst.0, worst.1))
        })
        .collect()
}

/// Returns [`Error::ConstraintViolation`] for the first constraint whose worst
/// node value exceeds `tolerance`.
pub fn check_constraints(constraints: &[Constraint], e: &Trajectory, tolerance: f64) -> Result<()> {
    for (condition, node, value) in constraint_residuals(constraints, e)? {
        if !(value <= tolerance) {
            return Err(Error::ConstraintViolation {
                condition,
                node,
                time: e.abs_time(node),
                value,
            });
        }
    }
    Ok(())
}

type NodeRhsFn = dyn Fn(&Trajectory, usize) -> Result<DVector<f64>> + Send + Sync;
type SamplerFn = dyn Fn(&[f64], f64, f64) -> Result<Trajectory> + Send + Sync;

/// A differential behavior whose right-hand side is read off each member at
/// its nodes, for dynamics that depend on data carried by the member (such
/// as auxiliary Hamiltonian tags) rather than on a fixed vector field.
#[derive(Clone)]
pub struct NodeBehavior {
    name: String,
    tolerance: f64,
    channels: usize,
    rhs: Arc<NodeRhsFn>,
    constraints: Vec<Constraint>,
    sampler: Option<Arc<SamplerFn>>,
}

impl NodeBehavior {
    /// `rhs(e, i)` is the required derivative of the first `channels` channels at node `i`.
    pub fn new(
        name: impl Into<String>,
        channels: usize,
        tolerance: f64,
        rhs: impl Fn(&Trajectory, usize) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            tolerance,
            channels,
            rhs: Arc::new(rhs),
            constraints: Vec::new(),
            sampler: None,
        }
    }

    pub fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_sampler(mut self, s: impl Fn(&[f64], f64, f64) -> Result<Trajectory> + Send + Sync + 'static) -> Self {
        self.sampler = Some(Arc::new(s));
        self
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn dynamics_residual(&self, e: &Trajectory) -> Result<f64> {
        if e.dim() != self.channels {
            return Err(Error::DimensionMismatch {
                expected: self.channels,
                got: e.dim(),
            });
        }
        derivative_residual(e, self.channels, |i| (self.rhs)(e, i))
    }
}

impl fmt::Debug for NodeBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeBehavior")
            .field("name", &self.name)
            .field("channels", &self.channels)
            .field("constraints", &self.constraints)
            .finish()
    }
}

impl Sheaf for NodeBehavior {
    fn name(&self) -> &str {
        &self.name
    }

    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn residual(&self, e: &Trajectory) -> Result<f64> {
        let mut r = self.dynamics_residual(e)?;
        for (_, _, v) in constraint_residuals(&self.constraints, e)? {
            r = nan_max(r, v);
        }
        Ok(r)
    }

    fn sample(&self, init: &[f64], length: f64, shift: f64) -> Option<Result<Trajectory>> {
        self.sampler.as_ref().map(|s| s(init, length, shift))
    }

    fn require_member(&self, e: &Trajectory) -> Result<f64> {
        check_constraints(&self.constraints, e, self.tolerance)?;
        require_residual(&self.name, self.residual(e)?, self.tolerance)
    }
}

pub(crate) fn require_residual(name: &str, residual: f64, tolerance: f64) -> Result<f64> {
    if residual <= tolerance {
        Ok(residual)
    } else {
        Err(Error::NotAMember {
            behavior: name.to_string(),
            residual,
            tolerance,
        })
    }
}

/// The behavior of `ẋ = f(t − ϑ, x)` with integrator settings and a residual
/// tolerance, optionally cut down by algebraic constraints and carrying
/// auxiliary Hamiltonians that are sampled onto generated members.
#[derive(Debug, Clone)]
pub struct OdeBehavior {
    name: String,
    field: VectorField,
    labels: Vec<String>,
    step: f64,
    residual_tolerance: f64,
    constraints: Vec<Constraint>,
    tags: Vec<AuxHamiltonian>,
}

impl OdeBehavior {
    pub fn new(name: impl Into<String>, field: VectorField) -> Self {
        let labels = channel_labels("x", field.dim());
        Self {
            name: name.into(),
            field,
            labels,
            step: DEFAULT_STEP,
            residual_tolerance: DEFAULT_RESIDUAL_TOLERANCE,
            constraints: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.residual_tolerance = tolerance;
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.field.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.field.dim(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_tags(mut self, tags: Vec<AuxHamiltonian>) -> Self {
        self.tags = tags;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn tolerance(&self) -> f64 {
        self.residual_tolerance
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Generates the member with initial value `x0` on the behavior's grid.
    pub fn integrate(&self, x0: &[f64], shift: f64, length: f64) -> Result<Trajectory> {
        let e = integrate_labeled(&self.field, x0, shift, length, self.step, self.labels.clone())?;
        if self.tags.is_empty() {
            return Ok(e);
        }
        let times: Vec<f64> = (0..e.nodes()).map(|i| e.abs_time(i)).collect();
        let tags = self.tags.iter().map(|a| a.sample(times.iter().copied())).collect();
        e.with_aux(tags)
    }

    /// The derivative residual alone, without the constraints.
    pub fn dynamics_residual(&self, e: &Trajectory) -> Result<f64> {
        if e.dim() != self.field.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.field.dim(),
                got: e.dim(),
            });
        }
        derivative_residual(e, self.field.dim(), |i| {
            self.field.eval(e.abs_time(i), &e.node_vector(i))
        })
    }

    /// Checks the constraints, naming the first violated one.
    pub fn check_constraints(&self, e: &Trajectory) -> Result<()> {
        check_constraints(&self.constraints, e, self.residual_tolerance)
    }

    pub fn as_behavior_sheaf(&self) -> BehaviorSheaf {
        as_behavior_sheaf(self)
    }
}

/// Derivative residual of `e`, maximized with the worst constraint value.
pub fn membership_residual(behavior: &OdeBehavior, e: &Trajectory) -> Result<f64> {
    let mut r = behavior.dynamics_residual(e)?;
    for (_, _, v) in constraint_residuals(&behavior.constraints, e)? {
        r = nan_max(r, v);
    }
    Ok(r)
}

/// Wraps the behavior as a sheaf: residual membership, grid restriction and
/// gluing, and the integrator as sampler.
pub fn as_behavior_sheaf(behavior: &OdeBehavior) -> BehaviorSheaf {
    let (b, s) = (behavior.clone(), behavior.clone());
    BehaviorSheaf::new(behavior.name.clone(), behavior.residual_tolerance, move |e| {
        membership_residual(&b, e)
    })
    .with_sampler(move |x0, length, shift| s.integrate(x0, shift, length))
}

impl Sheaf for OdeBehavior {
    fn name(&self) -> &str {
        &self.name
    }

    fn tolerance(&self) -> f64 {
        self.residual_tolerance
    }

    fn residual(&self, e: &Trajectory) -> Result<f64> {
        membership_residual(self, e)
    }

    fn sample(&self, init: &[f64], length: f64, shift: f64) -> Option<Result<Trajectory>> {
        Some(self.integrate(init, shift, length))
    }

    fn require_member(&self, e: &Trajectory) -> Result<f64> {
        self.check_constraints(e)?;
        require_residual(&self.name, membership_residual(self, e)?, self.residual_tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sheaf::{check_sheaf_axioms, glue, restrict};
    use nalgebra::DMatrix;

    #[test]
    fn zero_field_keeps_constants() {
        let f = VectorField::new(2, "0", |_, _| DVector::zeros(2));
        let e = integrate(&f, &[1.5, -2.0], 0.0, 1.0, 0.25).unwrap();
        assert_eq!(e.nodes(), 5);
        for i in 0..5 {
            assert_eq!(e.node(i), &[1.5, -2.0]);
        }
    }

    #[test]
    fn blowup_oracle() {
        let e = integrate(&VectorField::blowup(), &[1.0], 0.0, 0.9, 1e-4).unwrap();
        let exact = 1.0 / (1.0 - 0.9);
        assert!((e.last()[0] - exact).abs() / exact < 1e-6);
        match integrate(&VectorField::blowup(), &[1.0], 0.0, 2.0, 1e-4) {
            Err(Error::BlowUp { time, truncated }) => {
                assert!((time - 1.0).abs() < 0.01, "{time}");
                assert_eq!(truncated.local_time(truncated.nodes() - 1), time);
                assert!(truncated.sup_norm() <= BLOW_UP_THRESHOLD);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn exponential_residual_is_second_order_small() {
        let f = VectorField::linear(DMatrix::from_element(1, 1, -1.0)).unwrap();
        let e = Trajectory::from_fn(2.0, 1e-3, 0.0, channel_labels("x", 1), |t| vec![(-t).exp()]).unwrap();
        let b = OdeBehavior::new("decay", f);
        assert!(membership_residual(&b, &e).unwrap() <= 5e-6);
    }

    #[test]
    fn constant_against_unit_field() {
        let f = VectorField::new(1, "1", |_, _| DVector::from_element(1, 1.0));
        let b = OdeBehavior::new("unit", f);
        let e = Trajectory::constant(1.0, 0.1, 0.0, channel_labels("x", 1), &[1.0]).unwrap();
        assert!((membership_residual(&b, &e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_is_a_member() {
        let b = OdeBehavior::new("blowup", VectorField::blowup());
        let e = Trajectory::constant(0.0, 0.1, 0.0, channel_labels("x", 1), &[7.0]).unwrap();
        assert_eq!(membership_residual(&b, &e).unwrap(), 0.0);
    }

    #[test]
    fn time_varying_field_uses_the_shift() {
        // x' = t − ϑ  ⇒  x(t) = x0 + ((t − ϑ)² − ϑ²)/2
        let f = VectorField::new(1, "x' = t", |s, _| DVector::from_element(1, s));
        let b = OdeBehavior::new("ramp", f).with_step(1e-2);
        let (x0, shift) = (0.5, 0.3);
        let e = b.integrate(&[x0], shift, 1.0).unwrap();
        for i in 0..e.nodes() {
            let t = e.local_time(i);
            let exact = x0 + ((t - shift).powi(2) - shift * shift) / 2.0;
            assert!((e.node(i)[0] - exact).abs() < 1e-12);
        }
        let r = restrict(&e, 0.5, 0.3).unwrap();
        assert!(membership_residual(&b, &r).unwrap() <= b.tolerance());
        // shifting the same values by a different ϑ is not a member
        let wrong = Trajectory::new(r.step(), r.shift() + 0.5, r.labels().to_vec(), r.nodes(), r.values().to_vec()).unwrap();
        assert!(membership_residual(&b, &wrong).unwrap() > 0.1);
    }

    #[test]
    fn residual_is_monotone_under_restriction() {
        let b = OdeBehavior::new("blowup", VectorField::blowup()).with_step(1e-2);
        let e = b.integrate(&[0.5], 0.0, 1.0).unwrap();
        let full = membership_residual(&b, &e).unwrap();
        for (len, off) in [(0.5, 0.0), (0.3, 0.7), (0.01, 0.5), (0.0, 0.2), (0.98, 0.01)] {
            let r = restrict(&e, len, off).unwrap();
            assert!(membership_residual(&b, &r).unwrap() <= full + 1e-12);
        }
    }

    #[test]
    fn shift_covariance() {
        let f = VectorField::new(2, "forced", |s, x| {
            DVector::from_vec(vec![x[1], -x[0] + s.sin()])
        });
        let (h, shift) = (1e-2, 0.7);
        let e = integrate(&f, &[1.0, 0.0], shift, 2.0, h).unwrap();
        let tau = 0.6;
        let r = restrict(&e, 2.0 - tau, tau).unwrap();
        let again = integrate(&f, e.node(60), shift - tau, 2.0 - tau, h).unwrap();
        assert!(r.sup_distance(&again) <= 1e-9);
        assert!((r.shift() - again.shift()).abs() <= 1e-12);
    }

    #[test]
    fn example_two_gluing() {
        // the solution of x' = x² from x(0) = 1 cut at 0.4 and restarted
        let b = OdeBehavior::new("blowup", VectorField::blowup()).with_step(1e-4);
        let left = b.integrate(&[1.0], 0.0, 0.4).unwrap();
        let right = b.integrate(left.last(), -0.4, 0.4).unwrap();
        let z = glue(&left, &right, 1e-9).unwrap();
        assert_eq!(z.length(), 0.8);
        for i in 0..z.nodes() {
            let exact = 1.0 / (1.0 - z.local_time(i));
            assert!((z.node(i)[0] - exact).abs() / exact < 1e-9);
        }
        assert!(membership_residual(&b, &z).unwrap() <= b.tolerance());
    }

    #[test]
    fn ode_sheaf_axioms() {
        let b = OdeBehavior::new("linear", VectorField::linear(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1])).unwrap())
            .with_step(1e-2);
        let probes: Vec<_> = [[1.0, 0.0], [0.0, 1.0], [-0.5, 0.25]]
            .iter()
            .map(|x0| b.integrate(x0, 0.0, 2.0).unwrap())
            .collect();
        let report = check_sheaf_axioms(&b, &probes, &[0.5, 1.0, 1.5]).unwrap();
        assert!(report.all_ok(), "{report:?}");
        assert!(report.entries.iter().all(|e| e.separation_candidates == 3));
        let sheaf = b.as_behavior_sheaf();
        assert!(check_sheaf_axioms(&sheaf, &probes, &[0.5]).unwrap().all_ok());
    }

    #[test]
    fn constraints_are_named() {
        let b = OdeBehavior::new("zero", VectorField::new(1, "0", |_, _| DVector::zeros(1)))
            .with_constraint(Constraint::new("x ≤ 1", |_, x| DVector::from_element(1, (x[0] - 1.0).max(0.0))));
        let ok = b.integrate(&[0.5], 0.0, 1.0).unwrap();
        assert!(b.require_member(&ok).is_ok());
        let bad = b.integrate(&[2.0], 0.0, 1.0).unwrap();
        match b.require_member(&bad) {
            Err(Error::ConstraintViolation { condition, node, .. }) => {
                assert_eq!(condition, "x ≤ 1");
                assert_eq!(node, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lipschitz_estimate_of_linear_field() {
        let f = VectorField::linear(DMatrix::from_element(1, 1, -3.0)).unwrap();
        let l = f.lipschitz_estimate(0.0, &[0.0], 1.0, 50, 7).unwrap();
        assert!((l - 3.0).abs() < 1e-9);
    }
}
