//! Dense complex linear algebra over labeled tensor-product spaces.

mod layout;
pub mod linalg;
mod operator;
mod state;

use std::cmp::Ordering;

pub use layout::{Subsystem, SystemLayout};
pub use linalg::{CMatrix, CVector};
pub use operator::{HermitianMatrix, HERMITIAN_TOLERANCE};
pub use state::{StateVector, NORM_TOLERANCE};

use crate::error::{Error, Result};

/// Default absolute tolerance for equality checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Unitarity tolerance for [`apply_on_subsystems`].
pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// Operand of [`tensor_product`].
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    State(StateVector),
    Operator(HermitianMatrix),
}

/// Kronecker product of a nonempty list of states or operators, in order.
pub fn tensor_product(factors: &[Factor]) -> Result<Factor> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::KindMismatch("empty factor list".into()))?;
    match first {
        Factor::State(s0) => {
            let mut acc = s0.clone();
            for f in rest {
                match f {
                    Factor::State(s) => acc = tensor_states(&acc, s)?,
                    Factor::Operator(_) => {
                        return Err(Error::KindMismatch("cannot mix states and operators".into()))
                    }
                }
            }
            Ok(Factor::State(acc))
        }
        Factor::Operator(o0) => {
            let mut acc = o0.clone();
            for f in rest {
                match f {
                    Factor::Operator(o) => acc = tensor_operators(&acc, o)?,
                    Factor::State(_) => {
                        return Err(Error::KindMismatch("cannot mix states and operators".into()))
                    }
                }
            }
            Ok(Factor::Operator(acc))
        }
    }
}

pub fn tensor_states(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let layout = a.layout().concat(b.layout())?;
    let amps = a.amplitudes().kronecker(b.amplitudes());
    if a.is_normalized() && b.is_normalized() {
        StateVector::normalizing(layout, amps)
    } else {
        StateVector::unnormalized(layout, amps)
    }
}

pub fn tensor_operators(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    let layout = a.layout().concat(b.layout())?;
    HermitianMatrix::new(layout, a.entries().kronecker(b.entries()))
}

/// Traces out everything except `keep`; kept labels stay in layout order.
pub fn partial_trace(op: &HermitianMatrix, keep: &[&str]) -> Result<HermitianMatrix> {
    let kept = op.layout().select_in_order(keep)?;
    let order: Vec<&str> = kept.labels().collect();
    partial_trace_ordered(op, &order)
}

/// Like [`partial_trace`], with the kept labels in the order given.
pub fn partial_trace_ordered(op: &HermitianMatrix, keep: &[&str]) -> Result<HermitianMatrix> {
    let split = op.layout().split(keep)?;
    let rho = op.entries();
    let out = CMatrix::from_fn(split.group_dim, split.group_dim, |k1, k2| {
        (0..split.rest_dim).map(|r| rho[(split.full(k1, r), split.full(k2, r))]).sum()
    });
    Ok(HermitianMatrix::from_hermitian(op.layout().select(keep)?, out))
}

/// Reduced density operator of a pure (possibly unnormalized) state on
/// `keep`, in the order given. Trace equals the squared norm.
pub fn reduced_density(state: &StateVector, keep: &[&str]) -> Result<HermitianMatrix> {
    let psi = state.as_matrix(keep)?;
    Ok(HermitianMatrix::from_hermitian(state.layout().select(keep)?, &psi * psi.adjoint()))
}

/// `|psi><psi|` as an operator over the state's layout.
pub fn density(state: &StateVector) -> HermitianMatrix {
    HermitianMatrix::from_hermitian(state.layout().clone(), state.projector())
}

/// Applies a unitary to `targets` (in the order given); identity elsewhere.
pub fn apply_on_subsystems(state: &StateVector, u: &CMatrix, targets: &[&str]) -> Result<StateVector> {
    let defect = linalg::unitarity_defect(u);
    if defect > UNITARY_TOLERANCE {
        return Err(Error::NotUnitary(defect));
    }
    let out = state.apply_operator(u, targets)?;
    if state.is_normalized() {
        out.mark_normalized()
    } else {
        Ok(out)
    }
}

/// Full-space matrix of `op` acting on `targets` (in the order given).
pub fn embed_operator(op: &CMatrix, targets: &[&str], layout: &SystemLayout) -> Result<CMatrix> {
    let split = layout.split(targets)?;
    if op.nrows() != split.group_dim || op.ncols() != split.group_dim {
        return Err(Error::DimensionMismatch { expected: split.group_dim, found: op.nrows() });
    }
    let dim = layout.total_dim();
    let mut full = CMatrix::zeros(dim, dim);
    for g1 in 0..split.group_dim {
        for g2 in 0..split.group_dim {
            let v = op[(g1, g2)];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            for r in 0..split.rest_dim {
                full[(split.full(g1, r), split.full(g2, r))] = v;
            }
        }
    }
    Ok(full)
}

/// Schmidt decomposition across `left | rest`.
#[derive(Clone, Debug)]
pub struct Schmidt {
    /// Descending, nonnegative.
    pub coefficients: Vec<f64>,
    pub left: Vec<StateVector>,
    pub right: Vec<StateVector>,
}

impl Schmidt {
    /// Number of coefficients above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.coefficients.iter().filter(|&&c| c > tol).count()
    }

    /// `sum_l c_l |l>_L |l>_R` as amplitudes over `left ++ right` layout.
    pub fn reconstruct(&self) -> Result<StateVector> {
        let mut acc: Option<StateVector> = None;
        for ((c, l), r) in self.coefficients.iter().zip(&self.left).zip(&self.right) {
            let term = tensor_states(l, r)?.scaled(linalg::c(*c, 0.0));
            acc = Some(match acc {
                None => term,
                Some(a) => StateVector::unnormalized(a.layout().clone(), a.amplitudes() + term.amplitudes())?,
            });
        }
        acc.ok_or_else(|| Error::InvalidLayout("empty decomposition".into()))
    }
}

const SCHMIDT_TIE: f64 = 1e-10;

/// Schmidt decomposition of `state` across the bipartition `left | rest`.
///
/// Left labels are taken in layout order. Coefficients are sorted
/// descending; degenerate coefficients are ordered by the lexicographic
/// order of their left vectors, whose first non-negligible amplitude is
/// made real positive, so the output is deterministic.
pub fn schmidt_decompose(state: &StateVector, left_labels: &[&str]) -> Result<Schmidt> {
    let left_layout = state.layout().select_in_order(left_labels)?;
    let right_layout = state.layout().without(left_labels)?;
    let order: Vec<&str> = left_layout.labels().collect();
    let psi = state.as_matrix(&order)?;
    let svd = psi.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let rank = svd.singular_values.len();

    let mut terms: Vec<(f64, CVector, CVector)> = (0..rank)
        .map(|i| {
            let mut l: CVector = u.column(i).into_owned();
            let mut r: CVector = v_t.row(i).transpose().into_owned();
            if let Some(pivot) = l.iter().find(|z| z.norm() > 1e-12).copied() {
                let phase = pivot / pivot.norm();
                l /= phase;
                r *= phase;
            }
            (svd.singular_values[i], l, r)
        })
        .collect();

    terms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut start = 0;
    while start < terms.len() {
        let mut end = start + 1;
        while end < terms.len() && (terms[start].0 - terms[end].0).abs() <= SCHMIDT_TIE {
            end += 1;
        }
        terms[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        start = end;
    }

    let mut schmidt = Schmidt { coefficients: vec![], left: vec![], right: vec![] };
    for (coef, l, r) in terms {
        schmidt.coefficients.push(coef.max(0.0));
        schmidt.left.push(StateVector::normalizing(left_layout.clone(), l)?);
        schmidt.right.push(StateVector::normalizing(right_layout.clone(), r)?);
    }
    Ok(schmidt)
}

fn lexicographic(a: &CVector, b: &CVector) -> Ordering {
    const EPS: f64 = 1e-12;
    for (x, y) in a.iter().zip(b.iter()) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > EPS {
                return p.total_cmp(&q);
            }
        }
    }
    Ordering::Equal
}

/// Nearest PSD operator in Frobenius norm.
pub fn project_psd(h: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::from_hermitian(h.layout().clone(), linalg::psd_projection(h.entries()))
}

/// `<pure|rho|pure>`. Only dimensions must agree, not labels.
pub fn fidelity(pure: &StateVector, rho: &HermitianMatrix) -> Result<f64> {
    if pure.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: pure.dim() });
    }
    let v = pure.amplitudes();
    Ok(v.dotc(&(rho.entries() * v)).re)
}

#[cfg(test)]
mod tests;
