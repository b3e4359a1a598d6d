use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::{Machine, SheafMap};
use crate::error::{Error, Result};
use crate::interval_sheaf::{channel_labels, nan_max, Sheaf, Trajectory, DEFAULT_STEP};
use crate::ode_behavior::{
    check_constraints, constraint_residuals, derivative_residual, integrate_labeled, Constraint, VectorField,
    DEFAULT_RESIDUAL_TOLERANCE,
};
use crate::signal::Signal;

type IsoFn = dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;

/// `ẋ = f(t, x, u)`, `y = g(t, x, u)`, with time taken as `t − ϑ` on members.
#[derive(Clone)]
pub struct IsoSystem {
    name: String,
    n: usize,
    m: usize,
    p: usize,
    f: Arc<IsoFn>,
    g: Arc<IsoFn>,
    x_labels: Vec<String>,
    u_labels: Vec<String>,
    y_labels: Vec<String>,
    step: f64,
    tolerance: f64,
    constraints: Vec<Constraint>,
}

impl IsoSystem {
    pub fn new(
        name: impl Into<String>,
        (n, m, p): (usize, usize, usize),
        f: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        g: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            m,
            p,
            f: Arc::new(f),
            g: Arc::new(g),
            x_labels: channel_labels("x", n),
            u_labels: channel_labels("u", m),
            y_labels: channel_labels("y", p),
            step: DEFAULT_STEP,
            tolerance: DEFAULT_RESIDUAL_TOLERANCE,
            constraints: Vec::new(),
        }
    }

    pub fn with_labels(mut self, x: Vec<String>, u: Vec<String>, y: Vec<String>) -> Result<Self> {
        for (got, expected) in [(x.len(), self.n), (u.len(), self.m), (y.len(), self.p)] {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        self.x_labels = x;
        self.u_labels = u;
        self.y_labels = y;
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

    /// Adds an algebraic condition on the packed node `(x, u)`.
    pub fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.p)
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn u_labels(&self) -> &[String] {
        &self.u_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn split(&self, node: &[f64]) -> (DVector<f64>, DVector<f64>) {
        (
            DVector::from_column_slice(&node[..self.n]),
            DVector::from_column_slice(&node[self.n..self.n + self.m]),
        )
    }

    pub fn rhs(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let v = (self.f)(t, x, u);
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(v)
    }

    pub fn output(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let v = (self.g)(t, x, u);
        if v.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: v.len(),
            });
        }
        Ok(v)
    }

    /// Integrates the state under the input signal and packs `(x, u)`.
    pub fn simulate(&self, x0: &[f64], input: &Signal, shift: f64, length: f64) -> Result<Trajectory> {
        if input.width() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: input.width(),
            });
        }
        let (sys, u) = (self.clone(), input.clone());
        let field = VectorField::new(self.n, format!("{} under input", self.name), move |s, x| {
            (sys.f)(s, x, &u.at(s))
        });
        let x = integrate_labeled(&field, x0, shift, length, self.step, self.x_labels.clone())?;
        let extra: Vec<f64> = (0..x.nodes()).flat_map(|i| input.at(x.abs_time(i)).data.as_vec().clone()).collect();
        x.append_channels(self.u_labels.clone(), &extra)
    }

    /// Output trajectory `(g(· − ϑ, x, u), ϑ)`.
    pub fn output_trajectory(&self, e: &Trajectory) -> Result<Trajectory> {
        self.check_dim(e)?;
        e.map_nodes(self.y_labels.clone(), |t, _, node| {
            let (x, u) = self.split(node);
            Ok(self.output(t, &x, &u)?.data.into())
        })
    }

    fn check_dim(&self, e: &Trajectory) -> Result<()> {
        if e.dim() != self.n + self.m {
            return Err(Error::DimensionMismatch {
                expected: self.n + self.m,
                got: e.dim(),
            });
        }
        Ok(())
    }

    /// Residual of the state channels; the input channels are free.
    pub fn dynamics_residual(&self, e: &Trajectory) -> Result<f64> {
        self.check_dim(e)?;
        derivative_residual(e, self.n, |i| {
            let (x, u) = self.split(e.node(i));
            self.rhs(e.abs_time(i), &x, &u)
        })
    }

    pub fn constraint_residuals(&self, e: &Trajectory) -> Result<Vec<(String, usize, f64)>> {
        constraint_residuals(&self.constraints, e)
    }

    pub fn check_constraints(&self, e: &Trajectory) -> Result<()> {
        check_constraints(&self.constraints, e, self.tolerance)
    }
}

impl fmt::Debug for IsoSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IsoSystem")
            .field("name", &self.name)
            .field("dims", &(self.n, self.m, self.p))
            .field("constraints", &self.constraints)
            .finish()
    }
}

/// The behavior of an ISO system: packed `(x, u)` trajectories whose state
/// channels satisfy the dynamics and whose nodes satisfy the constraints.
#[derive(Debug, Clone)]
pub struct IsoBehavior(pub Arc<IsoSystem>);

impl Sheaf for IsoBehavior {
    fn name(&self) -> &str {
        &self.0.name
    }

    fn tolerance(&self) -> f64 {
        self.0.tolerance
    }

    fn residual(&self, e: &Trajectory) -> Result<f64> {
        let mut r = self.0.dynamics_residual(e)?;
        for (_, _, v) in self.0.constraint_residuals(e)? {
            r = nan_max(r, v);
        }
        Ok(r)
    }

    /// Regenerates with the input held at its initial value.
    fn sample(&self, init: &[f64], length: f64, shift: f64) -> Option<Result<Trajectory>> {
        let sys = &self.0;
        if init.len() != sys.n + sys.m {
            return Some(Err(Error::DimensionMismatch {
                expected: sys.n + sys.m,
                got: init.len(),
            }));
        }
        let u = Signal::constant(DVector::from_column_slice(&init[sys.n..]));
        Some(sys.simulate(&init[..sys.n], &u, shift, length))
    }

    fn require_member(&self, e: &Trajectory) -> Result<f64> {
        self.0.check_constraints(e)?;
        crate::ode_behavior::require_residual(&self.0.name, self.residual(e)?, self.0.tolerance)
    }
}

/// The machine `(x, u, ϑ) ↦ ((u, ϑ), (g(· − ϑ, x, u), ϑ))`: the 𝔄-leg
/// extracts the input, the 𝔈-leg evaluates the output map node-wise.
pub fn iso_machine(sys: IsoSystem) -> Machine {
    let sys = Arc::new(sys);
    let (u_labels, y_labels) = (sys.u_labels.clone(), sys.y_labels.clone());
    let out = sys.clone();
    Machine::new(
        sys.name.clone(),
        Arc::new(IsoBehavior(sys.clone())),
        SheafMap::select(u_labels.clone()),
        u_labels,
        SheafMap::new("output", move |e| out.output_trajectory(e)),
        y_labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::default_cuts;

    #[test]
    fn integrator_with_unit_input() {
        let sys = IsoSystem::new("integrator", (1, 1, 1), |_, _, u| u.clone(), |_, x, _| x.clone()).with_step(1e-2);
        let e = sys.simulate(&[0.0], &Signal::constant(DVector::from_element(1, 1.0)), 0.0, 1.0).unwrap();
        let m = iso_machine(sys);
        m.behavior().require_member(&e).unwrap();
        let y = m.e(&e).unwrap();
        let u = m.a(&e).unwrap();
        for i in 0..e.nodes() {
            assert!((y.node(i)[0] - e.local_time(i)).abs() < 1e-12);
            assert_eq!(u.node(i)[0], 1.0);
        }
    }

    #[test]
    fn decay_output() {
        let sys = IsoSystem::new("decay", (1, 1, 1), |_, x, u| -x + u, |_, x, _| x.clone());
        let e = sys.simulate(&[2.0], &Signal::zero(1), 0.0, 3.0).unwrap();
        let y = iso_machine(sys).e(&e).unwrap();
        for i in 0..e.nodes() {
            assert!((y.node(i)[0] - 2.0 * (-e.local_time(i)).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn free_input_but_checked_state() {
        let sys = IsoSystem::new("decay", (1, 1, 1), |_, x, u| -x + u, |_, x, _| x.clone()).with_step(1e-2);
        let e = sys.simulate(&[1.0], &Signal::sine(1, 1.0, 2.0, 0.0), 0.5, 2.0).unwrap();
        let b = IsoBehavior(Arc::new(sys));
        assert!(b.residual(&e).unwrap() <= b.tolerance());
        // replacing u by another input breaks the x equation
        let v: Vec<f64> = e.values().chunks(2).flat_map(|r| [r[0], r[1] + 1.0]).collect();
        let other = e.with_values(e.labels().to_vec(), v).unwrap();
        assert!(b.residual(&other).unwrap() > 0.5);
    }

    #[test]
    fn legs_are_natural_and_time_varying_output_respects_shift() {
        let sys = IsoSystem::new("forced", (2, 1, 1), |s, x, u| {
            DVector::from_vec(vec![x[1], -x[0] + u[0] * s.cos()])
        }, |s, x, u| DVector::from_element(1, x[0] * s + u[0]))
        .with_step(1e-2);
        let probes: Vec<_> = (0..3)
            .map(|k| sys.simulate(&[k as f64, 1.0], &Signal::sine(1, 1.0, 1.0, k as f64), 0.3 * k as f64, 2.0).unwrap())
            .collect();
        let m = iso_machine(sys);
        assert!(m.check_naturality(&probes, &default_cuts(2.0, 1e-2)).unwrap() <= 1e-12);
    }
}
