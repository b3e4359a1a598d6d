//! State-dependent matrix and scalar fields, polynomial potentials, and the
//! pointwise structure checks (antisymmetry, symmetric PSD) used by the
//! port-Hamiltonian and metriplectic modules.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for antisymmetry, symmetry and eigenvalue checks.
pub const STRUCTURE_TOLERANCE: f64 = 1e-10;

/// Relative agreement required between a supplied gradient and central
/// differences.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// `x ↦ M(x) ∈ ℝ^{rows×cols}`.
#[derive(Clone)]
pub struct MatrixField {
    rows: usize,
    cols: usize,
    f: Arc<MatrixFn>,
}

impl MatrixField {
    pub fn new(rows: usize, cols: usize, f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self {
            rows,
            cols,
            f: Arc::new(f),
        }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        Self::new(rows, cols, move |_| m.clone())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, move |_| DMatrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = (self.f)(x);
        if m.shape() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: m.len(),
            });
        }
        Ok(m)
    }

    /// Pointwise `M(x)·k`.
    pub fn scaled(&self, k: f64) -> Self {
        let f = self.f.clone();
        Self::new(self.rows, self.cols, move |x| f(x) * k)
    }
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixField({}x{})", self.rows, self.cols)
    }
}

type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A potential `V: ℝⁿ → ℝ` with a closed-form gradient or, failing that,
/// central differences.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: Arc<ScalarFn>,
    gradient: Option<Arc<GradientFn>>,
}

impl ScalarField {
    pub fn new(dim: usize, value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// `½ xᵀQx` with `Q` symmetrized.
    pub fn quadratic(q: DMatrix<f64>) -> Self {
        let q = (&q + q.transpose()) * 0.5;
        let qg = q.clone();
        Self::new(q.nrows(), move |x| 0.5 * x.dot(&(&q * x))).with_gradient(move |x| &qg * x)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_| 0.0).with_gradient(move |_| DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_closed_form_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.gradient {
            Some(g) => g(x),
            None => self.fd_gradient(x),
        }
    }

    /// Central differences with step `1e−6·(1 + |xᵢ|)`.
    pub fn fd_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        let mut y = x.clone();
        for i in 0..self.dim {
            let d = 1e-6 * (1.0 + x[i].abs());
            y[i] = x[i] + d;
            let up = self.value(&y);
            y[i] = x[i] - d;
            let down = self.value(&y);
            y[i] = x[i];
            g[i] = (up - down) / (2.0 * d);
        }
        g
    }

    /// Compares the closed-form gradient with central differences at every
    /// point; returns the worst relative defect, or a violation above
    /// [`GRADIENT_TOLERANCE`].
    pub fn check_gradient(&self, name: &str, points: &[DVector<f64>]) -> Result<f64> {
        let Some(g) = &self.gradient else {
            return Ok(0.0);
        };
        let mut worst: f64 = 0.0;
        for x in points {
            let (a, b) = (g(x), self.fd_gradient(x));
            let scale = 1.0 + a.amax().max(b.amax());
            let defect = (a - b).amax() / scale;
            if !(defect <= GRADIENT_TOLERANCE) {
                return Err(Error::StructureViolation {
                    what: format!("gradient of {name} disagrees with finite differences"),
                    point: x.iter().copied().collect(),
                    value: defect,
                });
            }
            worst = worst.max(defect);
        }
        Ok(worst)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("closed_form_gradient", &self.gradient.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// `Σ cₖ Πᵢ xᵢ^{pₖᵢ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for t in &self.terms {
            if t.powers.len() != dim {
                return Err(Error::Config(format!(
                    "monomial {:?} has {} exponents, state dimension is {dim}",
                    t.powers,
                    t.powers.len()
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.powers.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for t in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                let p = t.powers[i];
                if p == 0 {
                    continue;
                }
                let mut term = t.coeff * p as f64 * x[i].powi(p as i32 - 1);
                for (j, (&q, &v)) in t.powers.iter().zip(x).enumerate() {
                    if j != i {
                        term *= v.powi(q as i32);
                    }
                }
                *gi += term;
            }
        }
        g
    }

    pub fn into_field(self, dim: usize) -> Result<ScalarField> {
        self.validate(dim)?;
        let p = self.clone();
        Ok(ScalarField::new(dim, move |x| p.eval(x.as_slice()))
            .with_gradient(move |x| DVector::from_vec(self.gradient(x.as_slice()))))
    }
}

/// The cross-product matrix `hat(v)` with `hat(v)·w = v × w`.
pub fn hat(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0])
}

/// `‖M + Mᵀ‖∞` (entrywise max).
pub fn antisymmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m + m.transpose()).amax()
}

pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Smallest eigenvalue of the symmetric part of `m`; `+∞` for the empty matrix.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Block matrix `[[a, b], [c, d]]`.
pub fn block2(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), d.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, m)).copy_from(b);
    out.view_mut((n, 0), (m, n)).copy_from(c);
    out.view_mut((n, n), (m, m)).copy_from(d);
    out
}

/// Seeded points with coordinates uniform in `[−2, 2]`.
pub fn probe_points(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-2.0..=2.0)))
        .collect()
}

/// Worst `‖M(x) + M(x)ᵀ‖∞` over the points, or a violation.
pub fn check_antisymmetric(name: &str, field: &MatrixField, points: &[DVector<f64>]) -> Result<f64> {
    worst_over(points, |x| Ok(antisymmetry_defect(&field.eval(x)?)), |x, v| Error::StructureViolation {
        what: format!("{name} is not antisymmetric"),
        point: x.iter().copied().collect(),
        value: v,
    })
}

/// Worst symmetry defect and worst negative eigenvalue part over the points,
/// or a violation.
pub fn check_symmetric_psd(name: &str, field: &MatrixField, points: &[DVector<f64>]) -> Result<(f64, f64)> {
    let sym = worst_over(points, |x| Ok(symmetry_defect(&field.eval(x)?)), |x, v| Error::StructureViolation {
        what: format!("{name} is not symmetric"),
        point: x.iter().copied().collect(),
        value: v,
    })?;
    let neg = worst_over(
        points,
        |x| Ok((-min_sym_eigenvalue(&field.eval(x)?)).max(0.0)),
        |x, v| Error::StructureViolation {
            what: format!("{name} is not positive semidefinite"),
            point: x.iter().copied().collect(),
            value: -v,
        },
    )?;
    Ok((sym, neg))
}

/// Largest `measure(x)` over the points; fails with `violation` at the first
/// point where it exceeds [`STRUCTURE_TOLERANCE`].
pub fn worst_over(
    points: &[DVector<f64>],
    measure: impl Fn(&DVector<f64>) -> Result<f64>,
    violation: impl Fn(&DVector<f64>, f64) -> Error,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        let v = measure(x)?;
        if !(v <= STRUCTURE_TOLERANCE) {
            return Err(violation(x, v));
        }
        worst = worst.max(v);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polynomial_gradient_matches_finite_differences() {
        // 3x²y − z + 0.5
        let p = Polynomial::new(vec![
            Monomial { coeff: 3.0, powers: vec![2, 1, 0] },
            Monomial { coeff: -1.0, powers: vec![0, 0, 1] },
            Monomial { coeff: 0.5, powers: vec![0, 0, 0] },
        ]);
        let x = [1.5, -2.0, 0.25];
        assert_eq!(p.eval(&x), 3.0 * 2.25 * -2.0 - 0.25 + 0.5);
        assert_eq!(p.gradient(&x), vec![6.0 * 1.5 * -2.0, 3.0 * 2.25, -1.0]);
        let f = p.into_field(3).unwrap();
        f.check_gradient("p", &probe_points(3, 20, 1)).unwrap();
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let f = ScalarField::new(2, |x| x[0] * x[0] + x[1]).with_gradient(|x| DVector::from_vec(vec![x[0], 1.0]));
        assert!(matches!(
            f.check_gradient("f", &probe_points(2, 5, 3)),
            Err(Error::StructureViolation { .. })
        ));
    }

    #[test]
    fn fd_fallback_is_accurate() {
        let f = ScalarField::new(2, |x| (x[0] * x[1]).sin());
        let x = DVector::from_vec(vec![0.3, -1.2]);
        let g = f.gradient(&x);
        let c = (0.3f64 * -1.2).cos();
        assert!((g[0] - c * -1.2).abs() < 1e-8);
        assert!((g[1] - c * 0.3).abs() < 1e-8);
    }

    #[test]
    fn hat_is_the_cross_product() {
        let (v, w) = ([1.0, 2.0, 3.0], DVector::from_vec(vec![-1.0, 0.5, 2.0]));
        let c = hat(&v) * &w;
        assert_eq!(c.as_slice(), &[2.0 * 2.0 - 3.0 * 0.5, -3.0 - 1.0 * 2.0, 1.0 * 0.5 + 2.0]);
        assert_eq!(antisymmetry_defect(&hat(&v)), 0.0);
    }

    #[test]
    fn psd_checks() {
        let good = MatrixField::constant(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.1])));
        let pts = probe_points(2, 3, 0);
        assert_eq!(check_symmetric_psd("R", &good, &pts).unwrap(), (0.0, 0.0));
        let bad = MatrixField::constant(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.1])));
        assert!(check_symmetric_psd("R", &bad, &pts).is_err());
        let skew = MatrixField::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(check_antisymmetric("J", &skew, &pts).is_err());
    }

    #[test]
    fn block_layout() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let b = DMatrix::from_element(2, 1, 2.0);
        let c = DMatrix::from_element(1, 2, 3.0);
        let d = DMatrix::from_element(1, 1, 4.0);
        let m = block2(&a, &b, &c, &d);
        assert_eq!(m[(0, 2)], 2.0);
        assert_eq!(m[(2, 0)], 3.0);
        assert_eq!(m[(2, 2)], 4.0);
    }

    proptest! {
        #[test]
        fn probe_points_are_in_the_box(seed in any::<u64>(), dim in 1usize..6) {
            for p in probe_points(dim, 4, seed) {
                prop_assert!(p.iter().all(|v| (-2.0..=2.0).contains(v)));
            }
        }

        #[test]
        fn gram_matrices_are_psd(entries in proptest::collection::vec(-3.0f64..3.0, 9)) {
            let m = DMatrix::from_row_slice(3, 3, &entries);
            prop_assert!(min_sym_eigenvalue(&(&m * m.transpose())) >= -1e-10);
        }
    }
}
