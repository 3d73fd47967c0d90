//! The superdense-coding chain that turns a PBT protocol into a signaling
//! test, and the success bound it implies.

mod bound;
mod chain;
mod table;

pub use bound::{bound, f_of_r, f_of_r_exact, per_qubit_power, p_max_qubit, Bound, FOfR};
pub use chain::{
    audit_signaling, build_tree, compute_chain_exact, exact_rate, monte_carlo, run_chain, simulate_rounds, ChainBranch,
    ChainCase, ChainOutcome, ChainTree, MonteCarloSummary, SignalingAudit, SignalingReport, SubOutcome,
};
pub use table::{bound_table, write_bound_table, BoundRow};

use crate::error::{Error, Result};
use crate::pauli::{pauli_count, pauli_element, PauliIndex};
use crate::tensor::linalg::CMatrix;
use crate::tensor::StateVector;

/// Label of Bob's half of the superdense-coding pair.
pub const BOB_PAIR: &str = "b";

/// `(V_message (x) I)|Phi>` over `(a, b)`, messages `1..=4^n`.
pub fn sdc_encode(message: usize, n: usize) -> Result<StateVector> {
    let count = pauli_count(n)?;
    if message == 0 || message > count {
        return Err(Error::IndexOutOfRange { index: message, min: 1, max: count });
    }
    let d = 1usize << n;
    let phi = crate::engine::maximally_entangled(crate::engine::INPUT, BOB_PAIR, d)?;
    let v = pauli_element(PauliIndex::new(message, n)?);
    let amps = v.kronecker(&CMatrix::identity(d, d)) * phi.amplitudes();
    StateVector::new(phi.layout().clone(), amps)
}

/// All `4^n` encodings, as Bob's measurement basis on `(port, b)`.
pub(crate) fn sdc_basis(n: usize) -> Result<Vec<StateVector>> {
    (1..=pauli_count(n)?).map(|m| sdc_encode(m, n)).collect()
}


#[cfg(test)]
mod tests;
