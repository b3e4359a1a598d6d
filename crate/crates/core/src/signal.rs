//! Continuous-time vector signals.
//!
//! Inputs and auxiliary-Hamiltonian profiles are needed between grid nodes
//! by the Runge-Kutta stages, so they are kept as functions of absolute time
//! and only sampled when a trajectory is produced.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

type SignalFn = dyn Fn(f64) -> DVector<f64> + Send + Sync;

#[derive(Clone)]
pub struct Signal {
    width: usize,
    f: Arc<SignalFn>,
}

impl Signal {
    pub fn from_fn(width: usize, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self {
            width,
            f: Arc::new(f),
        }
    }

    pub fn zero(width: usize) -> Self {
        Self::from_fn(width, move |_| DVector::zeros(width))
    }

    pub fn constant(value: DVector<f64>) -> Self {
        let width = value.len();
        Self::from_fn(width, move |_| value.clone())
    }

    /// `amplitude * sin(frequency * s + phase)` in every channel.
    pub fn sine(width: usize, amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self::from_fn(width, move |s| {
            DVector::from_element(width, amplitude * (frequency * s + phase).sin())
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Value at absolute time `s`.
    pub fn at(&self, s: f64) -> DVector<f64> {
        let v = (self.f)(s);
        debug_assert_eq!(v.len(), self.width);
        v
    }

    /// Concatenates the channels of two signals.
    pub fn stack(&self, other: &Signal) -> Signal {
        let (a, b) = (self.clone(), other.clone());
        let width = a.width + b.width;
        Signal::from_fn(width, move |s| {
            let (va, vb) = (a.at(s), b.at(s));
            DVector::from_iterator(width, va.iter().chain(vb.iter()).copied())
        })
    }
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Signal").field("width", &self.width).finish()
    }
}
