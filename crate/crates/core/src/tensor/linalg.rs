//! Small dense helpers on complex matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `(m + m†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let id = CMatrix::identity(u.nrows(), u.ncols());
    max_abs_diff(&(u.adjoint() * u), &id)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

/// Rebuild `V diag(f(λ)) V†`.
pub fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (col, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        for r in 0..n {
            scaled[(r, col)] *= w;
        }
    }
    hermitize(&(scaled * vectors.adjoint()))
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigh(m).0[0]
}

/// Nearest PSD matrix in Frobenius norm: clip negative eigenvalues.
pub fn psd_projection(m: &CMatrix) -> CMatrix {
    let (values, vectors) = eigh(m);
    if values.first().is_none_or(|&v| v >= 0.0) {
        return hermitize(m);
    }
    spectral_map(&values, &vectors, |l| l.max(0.0))
}

/// Square root of a PSD matrix. Eigenvalues in `[-clip, 0)` are treated as
/// zero; anything more negative is an error.
pub fn sqrt_psd(m: &CMatrix, clip: f64) -> Result<CMatrix> {
    let (values, vectors) = eigh(m);
    if let Some(&lowest) = values.first() {
        if lowest < -clip {
            return Err(Error::NotPositive(lowest));
        }
    }
    Ok(spectral_map(&values, &vectors, |l| l.max(0.0).sqrt()))
}

/// Moore-Penrose pseudo-inverse of the square root of a PSD matrix,
/// dropping eigenvalues below `cutoff`.
pub fn pinv_sqrt_psd(m: &CMatrix, cutoff: f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    spectral_map(&values, &vectors, |l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 })
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Complex Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Outer product `|u><v|`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

/// Complete the orthonormal columns of `partial` (given at `fixed` column
/// positions) to a unitary, filling remaining columns by Gram-Schmidt over
/// the standard basis.
pub fn complete_unitary(dim: usize, fixed: &[(usize, CVector)]) -> Result<CMatrix> {
    let mut u = CMatrix::zeros(dim, dim);
    let mut basis: Vec<CVector> = Vec::with_capacity(dim);
    for (col, v) in fixed {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
        }
        u.set_column(*col, v);
        basis.push(v.clone());
    }
    let taken: Vec<usize> = fixed.iter().map(|(c, _)| *c).collect();
    let mut free = (0..dim).filter(|c| !taken.contains(c));
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = CVector::zeros(dim);
        v[e] = ONE;
        for b in &basis {
            let overlap = b.dotc(&v);
            v -= b * overlap;
        }
        // second pass for numerical orthogonality
        for b in &basis {
            let overlap = b.dotc(&v);
            v -= b * overlap;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            v /= c(norm, 0.0);
            let col = free.next().expect("column count matches basis deficit");
            u.set_column(col, &v);
            basis.push(v);
        }
    }
    let defect = unitarity_defect(&u);
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_ascending() {
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        let (vals, _) = eigh(&m);
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn sqrt_rejects_negative() {
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1e-3, 0.0)]));
        assert!(matches!(sqrt_psd(&m, 1e-10), Err(Error::NotPositive(_))));
        let tiny = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1e-12, 0.0)]));
        assert!(sqrt_psd(&tiny, 1e-10).is_ok());
    }

    #[test]
    fn complete_unitary_keeps_fixed_columns() {
        let s = 0.5f64.sqrt();
        let v = CVector::from_vec(vec![c(s, 0.0), ZERO, ZERO, c(0.0, s)]);
        let u = complete_unitary(4, &[(2, v.clone())]).unwrap();
        assert!(unitarity_defect(&u) < 1e-12);
        assert!((u.column(2) - v).norm() < 1e-15);
    }
}
