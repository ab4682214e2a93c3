//! The `(A, b)` input pair.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TlsError};

/// A TLS problem `min ‖[E r]‖_F  s.t.  b − r ∈ range(A + E)`.
///
/// `A` is `m × n` with `m > n ≥ 1`, `b` has length `m`, and every entry is
/// finite. Instances can only be obtained through the validating
/// constructors, so a `TlsProblem` in hand always satisfies these invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct TlsProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    label: String,
}

impl TlsProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, label: impl Into<String>) -> Result<Self> {
        let (m, n) = a.shape();
        if n == 0 || m == 0 {
            return Err(TlsError::Shape(format!("empty coefficient matrix ({m} x {n})")));
        }
        if m <= n {
            return Err(TlsError::Shape(format!(
                "need more rows than columns in A, got m = {m}, n = {n}"
            )));
        }
        if b.len() != m {
            return Err(TlsError::Shape(format!(
                "right-hand side has length {}, expected {m}",
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(TlsError::Parse("non-finite entry in problem data".into()));
        }
        Ok(Self {
            a,
            b,
            label: label.into(),
        })
    }

    /// Split an `m × (n+1)` array `[A b]`; the last column becomes `b`.
    pub fn from_augmented(ab: &DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        let cols = ab.ncols();
        if cols < 2 || ab.nrows() == 0 {
            return Err(TlsError::Shape(format!(
                "augmented array needs at least 2 columns and 1 row, got {} x {cols}",
                ab.nrows()
            )));
        }
        let a = ab.columns(0, cols - 1).into_owned();
        let b = ab.column(cols - 1).into_owned();
        Self::new(a, b, label)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Number of rows `m`.
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Number of unknowns `n`.
    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// The `m × (n+1)` matrix `[A b]`.
    pub fn augmented(&self) -> DMatrix<f64> {
        let (m, n) = self.a.shape();
        let mut ab = DMatrix::zeros(m, n + 1);
        ab.columns_mut(0, n).copy_from(&self.a);
        ab.column_mut(n).copy_from(&self.b);
        ab
    }

    /// `‖[A b]‖_F`.
    pub fn augmented_norm(&self) -> f64 {
        (self.a.norm_squared() + self.b.norm_squared()).sqrt()
    }

    /// `(A + t·ΔA, b + t·Δb)`.
    pub fn perturbed(&self, delta_a: &DMatrix<f64>, delta_b: &DVector<f64>, t: f64) -> Result<Self> {
        Self::new(
            &self.a + delta_a * t,
            &self.b + delta_b * t,
            self.label.clone(),
        )
    }

    /// `(c·A, c·b)`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.a * c, &self.b * c, self.label.clone())
    }
}
