use crate::error::{Error, Result};
use crate::tensor::linalg::CMatrix;
use crate::tensor::{self, HermitianMatrix, StateVector};

use super::protocol::{port_label, PbtProtocol, ALICE, INPUT};

/// Branches less likely than this carry no post-measurement state.
pub const BRANCH_CUTOFF: f64 = 1e-12;

/// One outcome of Alice's measurement.
#[derive(Clone, Debug)]
pub struct Branch {
    pub outcome: usize,
    pub probability: f64,
    /// Normalized post-measurement state; `None` when the branch is impossible.
    pub state: Option<StateVector>,
}

impl Branch {
    pub fn is_success(&self) -> bool {
        self.outcome >= 1
    }
}

/// Fidelity of the teleported state on the announced port, and the residual
/// state of everything else when that port is pure.
#[derive(Clone, Debug)]
pub struct TeleportReport {
    pub port: usize,
    pub fidelity: f64,
    /// Largest eigenvalue of the port marginal.
    pub port_purity: f64,
    pub residual: Option<StateVector>,
}

/// Input relabeled as `a`; must have dimension `2^n`.
pub(crate) fn as_input(proto: &PbtProtocol, psi: &StateVector) -> Result<StateVector> {
    if psi.dim() != proto.port_dim() {
        return Err(Error::DimensionMismatch { expected: proto.port_dim(), found: psi.dim() });
    }
    psi.with_layout(proto.input_layout())
}

/// `|psi>_a (x) |xi>_{A B1..BN}`.
pub fn global_state(proto: &PbtProtocol, psi: &StateVector) -> Result<StateVector> {
    tensor::tensor_states(&as_input(proto, psi)?, proto.resource())
}

/// Applies each `sqrt(M_k)` to `targets` of `state` and splits into branches.
pub(crate) fn split_branches(
    state: &StateVector,
    sqrt_povm: &[CMatrix],
    targets: &[&str],
    cutoff: f64,
) -> Result<Vec<Branch>> {
    sqrt_povm
        .iter()
        .enumerate()
        .map(|(k, root)| {
            let post = state.apply_operator(root, targets)?;
            let q = post.norm_sqr();
            Ok(if q < cutoff {
                Branch { outcome: k, probability: 0.0, state: None }
            } else {
                Branch { outcome: k, probability: q, state: post.normalized() }
            })
        })
        .collect()
}

/// Measures `|psi>_a (x) |xi>` with Alice's POVM (Lüders instrument).
pub fn measure(proto: &PbtProtocol, psi: &StateVector) -> Result<Vec<Branch>> {
    measure_with_cutoff(proto, psi, BRANCH_CUTOFF)
}

pub fn measure_with_cutoff(proto: &PbtProtocol, psi: &StateVector, cutoff: f64) -> Result<Vec<Branch>> {
    let global = global_state(proto, psi)?;
    split_branches(&global, proto.sqrt_povm(), &[INPUT, ALICE], cutoff)
}

/// Outcome probabilities for a mixed input, `Tr[M_k (rho (x) rho_A)]`.
pub fn outcome_probabilities_mixed(proto: &PbtProtocol, rho: &HermitianMatrix) -> Result<Vec<f64>> {
    if rho.dim() != proto.port_dim() {
        return Err(Error::DimensionMismatch { expected: proto.port_dim(), found: rho.dim() });
    }
    let rho_alice = tensor::reduced_density(proto.resource(), &[ALICE])?;
    let joint = rho.entries().kronecker(rho_alice.entries());
    Ok(proto.povm().iter().map(|m| (m.entries() * &joint).trace().re).collect())
}

/// `sum_{k>=1} q_k`.
pub fn success_probability(branches: &[Branch]) -> f64 {
    branches.iter().filter(|b| b.is_success()).map(|b| b.probability).sum()
}

/// Fidelity of the announced port with `psi`; the residual is extracted
/// when the port marginal has an eigenvalue at least `1 - purity_tol`.
pub fn teleport_report(branch: &Branch, psi: &StateVector, purity_tol: f64) -> Result<TeleportReport> {
    if branch.outcome == 0 {
        return Err(Error::BranchKind("branch 0 is the failure branch and announces no port".into()));
    }
    let state = branch.state.as_ref().ok_or_else(|| {
        Error::BranchKind(format!("branch {} has zero probability and no state", branch.outcome))
    })?;
    let port = port_label(branch.outcome);
    let rho = tensor::reduced_density(state, &[&port])?;
    let fidelity = tensor::fidelity(psi, &rho)?;
    let port_purity = rho.eigenvalues().last().copied().unwrap_or(0.0);
    let residual = if port_purity >= 1.0 - purity_tol {
        let schmidt = tensor::schmidt_decompose(state, &[&port])?;
        schmidt.right.into_iter().next()
    } else {
        None
    };
    Ok(TeleportReport { port: branch.outcome, fidelity, port_purity, residual })
}

/// Marginals of port `j` in every branch, plus the resource marginal.
#[derive(Clone, Debug)]
pub struct PortMarginals {
    pub port: usize,
    /// Port `j` of the resource alone.
    pub eta: HermitianMatrix,
    /// `q_0..q_N`.
    pub probabilities: Vec<f64>,
    /// `(i, gamma_{j,i})` for every success outcome `i != j`.
    pub gamma: Vec<(usize, Option<HermitianMatrix>)>,
    /// Port `j` in the failure branch.
    pub omega: Option<HermitianMatrix>,
}

impl PortMarginals {
    pub fn success_probability(&self) -> f64 {
        self.probabilities.iter().skip(1).sum()
    }

    /// Every present marginal, labeled for reporting.
    pub fn all(&self) -> Vec<(String, &HermitianMatrix)> {
        let mut out = vec![("eta".to_string(), &self.eta)];
        for (i, g) in &self.gamma {
            if let Some(g) = g {
                out.push((format!("gamma_{}_{}", self.port, i), g));
            }
        }
        if let Some(w) = &self.omega {
            out.push(("omega".to_string(), w));
        }
        out
    }
}

/// Port-`j` marginals from a resource and the branches of a measurement on it.
pub fn marginals_from_branches(resource: &StateVector, branches: &[Branch], j: usize) -> Result<PortMarginals> {
    let label = port_label(j);
    let eta = tensor::reduced_density(resource, &[&label])?;
    let marginal = |b: &Branch| b.state.as_ref().map(|s| tensor::reduced_density(s, &[&label])).transpose();
    let mut gamma = Vec::new();
    let mut omega = None;
    for b in branches {
        match b.outcome {
            0 => omega = marginal(b)?,
            i if i == j => {}
            i => gamma.push((i, marginal(b)?)),
        }
    }
    Ok(PortMarginals {
        port: j,
        eta,
        probabilities: branches.iter().map(|b| b.probability).collect(),
        gamma,
        omega,
    })
}

pub fn port_marginals(proto: &PbtProtocol, psi: &StateVector, j: usize) -> Result<PortMarginals> {
    if j == 0 || j > proto.ports() {
        return Err(Error::IndexOutOfRange { index: j, min: 1, max: proto.ports() });
    }
    let branches = measure(proto, psi)?;
    marginals_from_branches(proto.resource(), &branches, j)
}

/// Max-abs entry of `eta - q_j psi psi† - sum_i q_i gamma_i - (1 - p) omega`.
pub fn decomposition_residual(m: &PortMarginals, psi: &StateVector) -> Result<f64> {
    let mut r = m.eta.entries().clone();
    if psi.dim() != r.nrows() {
        return Err(Error::DimensionMismatch { expected: r.nrows(), found: psi.dim() });
    }
    r -= psi.projector() * num_complex::Complex64::from(m.probabilities[m.port]);
    for (i, g) in &m.gamma {
        if let Some(g) = g {
            r -= g.entries() * num_complex::Complex64::from(m.probabilities[*i]);
        }
    }
    if let Some(w) = &m.omega {
        r -= w.entries() * num_complex::Complex64::from(1.0 - m.success_probability());
    }
    Ok(crate::tensor::linalg::max_abs(&r))
}
