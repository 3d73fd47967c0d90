//! The n-qubit Pauli set, the Pauli twirl, and Haar sampling.

mod sampling;

pub use sampling::{
    haar_state_with, random_density_with, random_hermitian_with, random_unitary_with, rng_from_seed,
    sample_haar_state, sample_haar_states, DetRng, RNG_ALGORITHM,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::linalg::{c, CMatrix, I, ONE, ZERO};
use crate::tensor::HermitianMatrix;

/// Index `l` in `1..=4^n` of an n-qubit Pauli operator.
///
/// The base-4 digits of `l - 1`, most significant first, select
/// `sigma_0..sigma_3` on qubits `1..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliIndex {
    l: usize,
    n: usize,
}

impl PauliIndex {
    pub fn new(l: usize, n: usize) -> Result<Self> {
        let count = pauli_count(n)?;
        if l == 0 || l > count {
            return Err(Error::IndexOutOfRange { index: l, min: 1, max: count });
        }
        Ok(Self { l, n })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Single-qubit factor codes, first qubit first.
    pub fn digits(&self) -> Vec<u8> {
        let mut rem = self.l - 1;
        let mut digits = vec![0u8; self.n];
        for slot in digits.iter_mut().rev() {
            *slot = (rem % 4) as u8;
            rem /= 4;
        }
        digits
    }

    fn from_digits(digits: &[u8]) -> Self {
        let l = digits.iter().fold(0usize, |acc, &d| acc * 4 + d as usize) + 1;
        Self { l, n: digits.len() }
    }

    pub fn all(n: usize) -> Result<impl Iterator<Item = PauliIndex>> {
        let count = pauli_count(n)?;
        Ok((1..=count).map(move |l| PauliIndex { l, n }))
    }
}

/// `4^n`, refusing `n = 0` and sizes that overflow.
pub fn pauli_count(n: usize) -> Result<usize> {
    if n == 0 || n > 15 {
        return Err(Error::IndexOutOfRange { index: n, min: 1, max: 15 });
    }
    Ok(1usize << (2 * n))
}

/// `sigma_0` (identity), `sigma_1` (X), `sigma_2` (Y), `sigma_3` (Z).
pub fn sigma(code: u8) -> CMatrix {
    let entries: [Complex64; 4] = match code {
        0 => [ONE, ZERO, ZERO, ONE],
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, -I, I, ZERO],
        3 => [ONE, ZERO, ZERO, -ONE],
        _ => panic!("single-qubit Pauli code must be 0..=3, got {code}"),
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

/// `V_l`, the ordered Kronecker product of single-qubit factors.
pub fn pauli_element(idx: PauliIndex) -> CMatrix {
    idx.digits()
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, &d| acc.kronecker(&sigma(d)))
}

/// `V_l V_m = phase * V_r`, with the phase in `{±1, ±i}`.
pub fn pauli_product(a: PauliIndex, b: PauliIndex) -> Result<(Complex64, PauliIndex)> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch { expected: a.n, found: b.n });
    }
    let mut phase = ONE;
    let mut digits = Vec::with_capacity(a.n);
    for (&x, &y) in a.digits().iter().zip(b.digits().iter()) {
        let (p, z) = single_product(x, y);
        phase *= p;
        digits.push(z);
    }
    Ok((phase, PauliIndex::from_digits(&digits)))
}

fn single_product(x: u8, y: u8) -> (Complex64, u8) {
    match (x, y) {
        (0, y) => (ONE, y),
        (x, 0) => (ONE, x),
        (x, y) if x == y => (ONE, 0),
        // sigma_i sigma_j = i eps_ijk sigma_k
        (x, y) => {
            let k = 6 - x - y;
            let cyclic = matches!((x, y), (1, 2) | (2, 3) | (3, 1));
            (if cyclic { I } else { -I }, k)
        }
    }
}

/// `(1/4^n) sum_l V_l rho V_l†` for a `2^n`-dimensional operator.
pub fn twirl(rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = qubit_count(rho.dim())?;
    let count = pauli_count(n)?;
    let mut acc = CMatrix::zeros(rho.dim(), rho.dim());
    for idx in PauliIndex::all(n)? {
        let v = pauli_element(idx);
        acc += &v * rho.entries() * v.adjoint();
    }
    acc /= c(count as f64, 0.0);
    HermitianMatrix::new(rho.layout().clone(), acc)
}

/// `n` such that `dim = 2^n`, `n >= 1`.
pub fn qubit_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch { expected: dim.next_power_of_two().max(2), found: dim });
    }
    Ok(dim.trailing_zeros() as usize)
}
