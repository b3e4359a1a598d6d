//! Dynamical systems as sheaves on the category of intervals.
//!
//! A behavior assigns to every interval `[0, a]` its admissible sampled
//! trajectories, closed under restriction and gluing. Machines add an input
//! leg and an output leg. On top of these the crate builds port-Hamiltonian
//! and metriplectic systems, closes their ports with auxiliary coordinates,
//! and checks the port-control diagram numerically.
//!
//! ```
//! use portsheaf::port_hamiltonian::{build_ph_diagram, closed_probes, PHSystem};
//!
//! let sys = PHSystem::mass_spring(1.0, 1.0).unwrap();
//! let probes = closed_probes(&sys, 2, 0, 1.0).unwrap();
//! assert!(build_ph_diagram(&sys, &probes, 1e-5).unwrap().pass);
//! ```
//!
//! The guide in `book/` walks through each layer with runnable examples.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auxiliary;
pub mod cli;
pub mod error;
pub mod fields;
pub mod interval_sheaf;
pub mod machine;
pub mod metriplectic;
pub mod ode_behavior;
pub mod port_hamiltonian;
pub mod signal;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/interval_sheaves.md")]
    mod interval_sheaves {}
    #[doc = include_str!("../../../book/src/ode_behaviors.md")]
    mod ode_behaviors {}
    #[doc = include_str!("../../../book/src/machines.md")]
    mod machines {}
    #[doc = include_str!("../../../book/src/port_hamiltonian.md")]
    mod port_hamiltonian {}
    #[doc = include_str!("../../../book/src/metriplectic.md")]
    mod metriplectic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
