//! The interval category **Int**, sampled trajectories, and continuous
//! interval sheaves.
//!
//! Objects of **Int** are interval lengths `a ≥ 0`; a morphism `a → b` is an
//! offset `x ∈ [0, b − a]` placing `[0, a]` inside `[0, b]`, and composition
//! adds offsets. A behavior assigns to each length the set of admissible
//! trajectories and to each morphism a restriction map
//! `(x, ϑ) ↦ (t ↦ x(t + offset), ϑ − offset)`.
//!
//! Trajectories live on a uniform grid so that restriction and gluing are
//! index operations and the presheaf laws hold bit-exactly.

mod csv;
mod sheaf;
mod trajectory;

pub use self::csv::{read_csv, read_csv_file, write_csv, write_csv_file};
pub use self::sheaf::{
    check_sheaf_axioms, constant_sheaf, AxiomEntry, AxiomReport, BehaviorSheaf, ConstantSheaf,
    Sheaf,
};
pub use self::trajectory::{
    channel_labels, glue, grid_count, nan_max, restrict, restrict_interpolated, Trajectory,
};

use crate::error::{Error, Result};

/// Default step of the sampling grid.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Sup-norm tolerance for junction and shift checks when gluing.
pub const DEFAULT_JUNCTION_TOLERANCE: f64 = 1e-9;

/// Relative tolerance used to decide whether a real is a grid multiple.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntObject {
    length: f64,
}

impl IntObject {
    pub fn new(length: f64) -> Result<Self> {
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::InvalidTrajectory(format!(
                "interval length must be a finite nonnegative real, got {length}"
            )));
        }
        Ok(Self { length })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

/// A morphism `source → target` of **Int**, i.e. an offset in `[0, target − source]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntMorphism {
    source: IntObject,
    target: IntObject,
    offset: f64,
}

impl IntMorphism {
    pub fn new(source: f64, target: f64, offset: f64) -> Result<Self> {
        let source = IntObject::new(source)?;
        let target = IntObject::new(target)?;
        // Hom(a, b) = [0, b - a], empty when b < a.
        if !(offset >= 0.0) || offset > target.length - source.length {
            return Err(Error::EmptyHom {
                source_len: source.length,
                target_len: target.length,
                offset,
            });
        }
        Ok(Self {
            source,
            target,
            offset,
        })
    }

    pub fn identity(length: f64) -> Result<Self> {
        Self::new(length, length, 0.0)
    }

    pub fn source(&self) -> IntObject {
        self.source
    }

    pub fn target(&self) -> IntObject {
        self.target
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

/// `outer ∘ inner`; offsets add.
pub fn compose_int(outer: &IntMorphism, inner: &IntMorphism) -> Result<IntMorphism> {
    if inner.target.length != outer.source.length {
        return Err(Error::DomainMismatch {
            inner_target: inner.target.length,
            outer_source: outer.source.length,
        });
    }
    IntMorphism::new(
        inner.source.length,
        outer.target.length,
        outer.offset + inner.offset,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_adds_offsets() {
        let outer = IntMorphism::new(1.0, 3.0, 1.0).unwrap();
        let inner = IntMorphism::new(0.0, 1.0, 0.5).unwrap();
        let c = compose_int(&outer, &inner).unwrap();
        assert_eq!(c, IntMorphism::new(0.0, 3.0, 1.5).unwrap());
    }

    #[test]
    fn identity_is_a_unit() {
        let id = IntMorphism::identity(2.0).unwrap();
        let m = IntMorphism::new(0.5, 2.0, 1.25).unwrap();
        assert_eq!(compose_int(&id, &m).unwrap(), m);
        let id_src = IntMorphism::identity(0.5).unwrap();
        assert_eq!(compose_int(&m, &id_src).unwrap(), m);
    }

    #[test]
    fn hom_from_longer_to_shorter_is_empty() {
        for x in [0.0, 0.5, 1.0, 2.0, 10.0] {
            assert!(matches!(
                IntMorphism::new(3.0, 1.0, x),
                Err(Error::EmptyHom { .. })
            ));
        }
    }

    #[test]
    fn offset_outside_hom_is_rejected() {
        assert!(matches!(
            IntMorphism::new(1.0, 2.0, 1.5),
            Err(Error::EmptyHom { .. })
        ));
        assert!(IntMorphism::new(1.0, 2.0, 1.0).is_ok());
    }

    #[test]
    fn composing_non_matching_morphisms_fails() {
        let outer = IntMorphism::new(1.0, 3.0, 1.0).unwrap();
        let inner = IntMorphism::new(0.0, 2.0, 0.5).unwrap();
        assert!(matches!(
            compose_int(&outer, &inner),
            Err(Error::DomainMismatch { .. })
        ));
    }

    #[test]
    fn zero_length_objects_exist() {
        assert_eq!(IntObject::new(0.0).unwrap().length(), 0.0);
        assert!(IntObject::new(-1e-9).is_err());
        assert!(IntObject::new(f64::NAN).is_err());
    }
}
