use super::layout::SystemLayout;
use super::linalg::{self, CMatrix};
use crate::error::{Error, Result};

/// Hermiticity tolerance for [`HermitianMatrix::new`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Complex Hermitian operator over a [`SystemLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    layout: SystemLayout,
    entries: CMatrix,
}

impl HermitianMatrix {
    /// Checks shape and Hermiticity within [`HERMITIAN_TOLERANCE`], then
    /// stores the exactly Hermitian part.
    pub fn new(layout: SystemLayout, entries: CMatrix) -> Result<Self> {
        let dim = layout.total_dim();
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: entries.nrows() });
        }
        let defect = linalg::hermiticity_defect(&entries);
        if defect > HERMITIAN_TOLERANCE * linalg::max_abs(&entries).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { layout, entries: linalg::hermitize(&entries) })
    }

    /// For results that are Hermitian by construction.
    pub(crate) fn from_hermitian(layout: SystemLayout, entries: CMatrix) -> Self {
        debug_assert_eq!(entries.nrows(), layout.total_dim());
        Self { layout, entries: linalg::hermitize(&entries) }
    }

    pub fn identity(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        Self { layout, entries: CMatrix::identity(d, d) }
    }

    pub fn maximally_mixed(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        Self { layout, entries: CMatrix::identity(d, d).map(|z| z / d as f64) }
    }

    pub fn zeros(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        Self { layout, entries: CMatrix::zeros(d, d) }
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.entries).re
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigh(&self.entries).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }

    /// Max-norm distance, ignoring labels.
    pub fn max_diff(&self, other: &HermitianMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(linalg::max_abs_diff(&self.entries, &other.entries))
    }

    /// Unit trace and eigenvalues at least `-tol`.
    pub fn is_density(&self, tol: f64) -> bool {
        (self.trace() - 1.0).abs() <= tol && self.min_eigenvalue() >= -tol
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { layout: self.layout.clone(), entries: self.entries.map(|z| z * factor) }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self { layout: self.layout.clone(), entries: &self.entries + &other.entries })
    }

    /// `U rho U†`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.nrows() });
        }
        Ok(Self::from_hermitian(self.layout.clone(), u * &self.entries * u.adjoint()))
    }

    pub fn with_layout(&self, layout: SystemLayout) -> Result<Self> {
        if layout.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: layout.total_dim() });
        }
        Ok(Self { layout, entries: self.entries.clone() })
    }
}
