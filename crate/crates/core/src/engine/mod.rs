//! Protocol model and exact branch simulation.

mod audit;
mod protocol;
mod simulate;

pub use audit::{check_perfect, verify_port_decomposition, verify_psi_independence};
pub(crate) use audit::spread;
pub use protocol::{
    bell_pbt_protocol, maximally_entangled, paired_resource, port_label, PbtProtocol, ALICE, INPUT,
    POVM_TOLERANCE,
};
pub(crate) use simulate::{as_input, split_branches};
pub use simulate::{
    decomposition_residual, global_state, marginals_from_branches, measure, measure_with_cutoff,
    outcome_probabilities_mixed, port_marginals, success_probability, teleport_report, Branch, PortMarginals,
    TeleportReport, BRANCH_CUTOFF,
};

#[cfg(test)]
mod tests;
