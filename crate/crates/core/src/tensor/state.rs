use num_complex::Complex64;

use super::layout::SystemLayout;
use super::linalg::{c, CMatrix, CVector};
use crate::error::{Error, Result};

/// Norm tolerance for states flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Complex amplitude vector over a [`SystemLayout`].
///
/// States are normalized unless built with [`StateVector::unnormalized`],
/// which marks intermediate branch vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: SystemLayout,
    amplitudes: CVector,
    normalized: bool,
}

impl StateVector {
    pub fn new(layout: SystemLayout, amplitudes: CVector) -> Result<Self> {
        check_len(&layout, amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { layout, amplitudes, normalized: true })
    }

    /// Divides by the Euclidean norm; fails on the zero vector.
    pub fn normalizing(layout: SystemLayout, amplitudes: CVector) -> Result<Self> {
        check_len(&layout, amplitudes.len())?;
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { layout, amplitudes: amplitudes / c(norm, 0.0), normalized: true })
    }

    pub fn unnormalized(layout: SystemLayout, amplitudes: CVector) -> Result<Self> {
        check_len(&layout, amplitudes.len())?;
        Ok(Self { layout, amplitudes, normalized: false })
    }

    pub fn from_slice(layout: SystemLayout, amplitudes: &[Complex64]) -> Result<Self> {
        Self::new(layout, CVector::from_column_slice(amplitudes))
    }

    /// Computational basis state `|index>`.
    pub fn basis(layout: SystemLayout, index: usize) -> Result<Self> {
        let dim = layout.total_dim();
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, min: 0, max: dim - 1 });
        }
        let mut v = CVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        Ok(Self { layout, amplitudes: v, normalized: true })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Renormalized copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        Self::normalizing(self.layout.clone(), self.amplitudes.clone()).ok()
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|<self|other>|^2`; equality up to global phase is `overlap >= 1 - tol`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn with_layout(&self, layout: SystemLayout) -> Result<Self> {
        check_len(&layout, self.dim())?;
        Ok(Self { layout, amplitudes: self.amplitudes.clone(), normalized: self.normalized })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        self.with_layout(self.layout.relabel(from, to)?)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            layout: self.layout.clone(),
            amplitudes: &self.amplitudes * factor,
            normalized: self.normalized && (factor.norm() - 1.0).abs() < NORM_TOLERANCE,
        }
    }

    /// `|self><self|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// Amplitudes arranged as a `group x rest` matrix (group in the given
    /// order, rest in layout order).
    pub fn as_matrix(&self, group: &[&str]) -> Result<CMatrix> {
        let split = self.layout.split(group)?;
        Ok(CMatrix::from_fn(split.group_dim, split.rest_dim, |g, r| self.amplitudes[split.full(g, r)]))
    }

    /// Inverse of [`as_matrix`](Self::as_matrix).
    pub(crate) fn from_matrix(layout: &SystemLayout, group: &[&str], m: &CMatrix) -> Result<CVector> {
        let split = layout.split(group)?;
        let mut out = CVector::zeros(layout.total_dim());
        for g in 0..split.group_dim {
            for r in 0..split.rest_dim {
                out[split.full(g, r)] = m[(g, r)];
            }
        }
        Ok(out)
    }

    /// Reorders subsystems; the labels must be a permutation of the layout.
    pub fn permuted(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.layout.len() {
            return Err(Error::InvalidLayout(format!("permutation {:?} does not cover {}", order, self.layout)));
        }
        let m = self.as_matrix(order)?;
        Ok(Self {
            layout: self.layout.select(order)?,
            amplitudes: CVector::from_iterator(m.nrows(), m.column(0).iter().copied()),
            normalized: self.normalized,
        })
    }

    /// Partial inner product with `vector` on `labels`: `(<v|_labels (x) I) |self>`.
    /// The result lives on the remaining subsystems and is unnormalized.
    pub fn contract(&self, labels: &[&str], vector: &CVector) -> Result<StateVector> {
        let m = self.as_matrix(labels)?;
        if vector.len() != m.nrows() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: vector.len() });
        }
        let rest = m.transpose() * vector.conjugate();
        StateVector::unnormalized(self.layout.without(labels)?, rest)
    }

    /// Applies an arbitrary operator to `targets` (taken in the order given)
    /// without any unitarity check. Result is flagged unnormalized.
    pub fn apply_operator(&self, op: &CMatrix, targets: &[&str]) -> Result<StateVector> {
        let m = self.as_matrix(targets)?;
        if op.nrows() != m.nrows() || op.ncols() != m.nrows() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: op.nrows() });
        }
        let out = StateVector::from_matrix(&self.layout, targets, &(op * m))?;
        StateVector::unnormalized(self.layout.clone(), out)
    }

    pub(crate) fn mark_normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        self.normalized = true;
        Ok(self)
    }
}

fn check_len(layout: &SystemLayout, len: usize) -> Result<()> {
    if layout.total_dim() != len {
        return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: len });
    }
    Ok(())
}
