//! Auxiliary, time-varying Hamiltonians on the port coordinates.
//!
//! Three parametric families are supported: the zero potential, potentials
//! linear in the port state (`u(t)ᵀζ`, induced by a curve in the dual space),
//! and a fixed quadratic form scaled in time (`κ(t)·½ζᵀQζ`).
//!
//! [`AuxHamiltonian`] is the continuous-time description used while
//! integrating. [`AuxTag`] is its sampled form that rides with a trajectory
//! and is sliced and concatenated together with it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub enum AuxKind {
    Zero,
    Linear,
    /// `κ(t)·½ζᵀQζ` with the symmetric part of `form` as `Q`.
    Quadratic { form: DMatrix<f64> },
}

impl AuxKind {
    pub fn name(&self) -> &'static str {
        match self {
            AuxKind::Zero => "zero",
            AuxKind::Linear => "linear",
            AuxKind::Quadratic { .. } => "quadratic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuxHamiltonian {
    kind: AuxKind,
    width: usize,
    profile: Signal,
}

impl AuxHamiltonian {
    pub fn zero(width: usize) -> Self {
        Self {
            kind: AuxKind::Zero,
            width,
            profile: Signal::zero(0),
        }
    }

    /// `H_α(t, ζ) = u(t)ᵀζ`.
    pub fn linear(u: Signal) -> Self {
        Self {
            kind: AuxKind::Linear,
            width: u.width(),
            profile: u,
        }
    }

    /// `H_α(t, ζ) = κ(t)·½ζᵀQζ`; `kappa` must be a scalar signal.
    pub fn quadratic(form: DMatrix<f64>, kappa: Signal) -> Result<Self> {
        if !form.is_square() {
            return Err(Error::DimensionMismatch {
                expected: form.nrows(),
                got: form.ncols(),
            });
        }
        if kappa.width() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: kappa.width(),
            });
        }
        let width = form.nrows();
        let sym = (&form + form.transpose()) * 0.5;
        Ok(Self {
            kind: AuxKind::Quadratic { form: sym },
            width,
            profile: kappa,
        })
    }

    pub fn kind(&self) -> &AuxKind {
        &self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `∇_ζ H_α(s, ζ)` at absolute time `s`.
    pub fn gradient(&self, s: f64, zeta: &[f64]) -> DVector<f64> {
        grad(&self.kind, self.width, self.profile.at(s).as_slice(), zeta)
    }

    pub fn value(&self, s: f64, zeta: &[f64]) -> f64 {
        value(&self.kind, self.profile.at(s).as_slice(), zeta)
    }

    /// Samples the time profile at the given absolute node times.
    pub fn sample(&self, times: impl IntoIterator<Item = f64>) -> AuxTag {
        let pw = self.profile_width();
        let mut samples = Vec::new();
        let mut nodes = 0;
        for s in times {
            if pw > 0 {
                samples.extend(self.profile.at(s).iter());
            }
            nodes += 1;
        }
        AuxTag {
            kind: self.kind.clone(),
            width: self.width,
            nodes,
            samples,
        }
    }

    fn profile_width(&self) -> usize {
        profile_width(&self.kind, self.width)
    }
}

fn profile_width(kind: &AuxKind, width: usize) -> usize {
    match kind {
        AuxKind::Zero => 0,
        AuxKind::Linear => width,
        AuxKind::Quadratic { .. } => 1,
    }
}

fn grad(kind: &AuxKind, width: usize, profile: &[f64], zeta: &[f64]) -> DVector<f64> {
    match kind {
        AuxKind::Zero => DVector::zeros(width),
        AuxKind::Linear => DVector::from_column_slice(profile),
        AuxKind::Quadratic { form } => form * DVector::from_column_slice(zeta) * profile[0],
    }
}

fn value(kind: &AuxKind, profile: &[f64], zeta: &[f64]) -> f64 {
    match kind {
        AuxKind::Zero => 0.0,
        AuxKind::Linear => profile.iter().zip(zeta).map(|(u, z)| u * z).sum(),
        AuxKind::Quadratic { form } => {
            let z = DVector::from_column_slice(zeta);
            0.5 * profile[0] * z.dot(&(form * &z))
        }
    }
}

/// Node-sampled auxiliary Hamiltonian carried by a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxTag {
    kind: AuxKind,
    width: usize,
    nodes: usize,
    samples: Vec<f64>,
}

impl AuxTag {
    pub fn zero(width: usize, nodes: usize) -> Self {
        Self {
            kind: AuxKind::Zero,
            width,
            nodes,
            samples: Vec::new(),
        }
    }

    /// Linear tag from already sampled curve values (`nodes × width`, row per node).
    pub fn linear_from_samples(width: usize, nodes: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != width * nodes {
            return Err(Error::DimensionMismatch {
                expected: width * nodes,
                got: samples.len(),
            });
        }
        Ok(Self {
            kind: AuxKind::Linear,
            width,
            nodes,
            samples,
        })
    }

    pub fn kind(&self) -> &AuxKind {
        &self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    fn profile_at(&self, node: usize) -> &[f64] {
        let pw = profile_width(&self.kind, self.width);
        &self.samples[node * pw..(node + 1) * pw]
    }

    pub fn gradient(&self, node: usize, zeta: &[f64]) -> DVector<f64> {
        grad(&self.kind, self.width, self.profile_at(node), zeta)
    }

    pub fn value(&self, node: usize, zeta: &[f64]) -> f64 {
        value(&self.kind, self.profile_at(node), zeta)
    }

    pub(crate) fn slice(&self, start: usize, count: usize) -> Self {
        let pw = profile_width(&self.kind, self.width);
        Self {
            kind: self.kind.clone(),
            width: self.width,
            nodes: count,
            samples: self.samples[start * pw..(start + count) * pw].to_vec(),
        }
    }

    /// Sup-norm mismatch of the profiles where `self` ends and `next` starts,
    /// or `None` when the two tags are of different families.
    pub(crate) fn junction_defect(&self, next: &AuxTag) -> Option<f64> {
        if self.kind != next.kind || self.width != next.width {
            return None;
        }
        if self.nodes == 0 || next.nodes == 0 {
            return Some(0.0);
        }
        let a = self.profile_at(self.nodes - 1);
        let b = next.profile_at(0);
        Some(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    /// `self` followed by `next` without its first node.
    pub(crate) fn concat(&self, next: &AuxTag) -> Self {
        let pw = profile_width(&self.kind, self.width);
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&next.samples[pw.min(next.samples.len())..]);
        Self {
            kind: self.kind.clone(),
            width: self.width,
            nodes: self.nodes + next.nodes.saturating_sub(1),
            samples,
        }
    }

    /// Largest absolute sample; used for finiteness checks.
    pub fn max_abs_sample(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
