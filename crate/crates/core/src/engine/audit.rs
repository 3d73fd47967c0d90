use crate::error::Result;
use crate::pauli::sample_haar_states;
use crate::report::AuditReport;
use crate::tensor::{HermitianMatrix, StateVector};
use crate::tolerances::Tolerances;

use super::protocol::PbtProtocol;
use super::simulate::{decomposition_residual, measure_with_cutoff, port_marginals, teleport_report, Branch};

/// Checks the port-state mixture decomposition for port `j` and that every
/// marginal involved is a density operator.
pub fn verify_port_decomposition(
    proto: &PbtProtocol,
    psi: &StateVector,
    j: usize,
    tol: &Tolerances,
) -> Result<AuditReport> {
    let m = port_marginals(proto, psi, j)?;
    let mut report = AuditReport::new(format!("port-state decomposition, port {j}"));
    for (name, rho) in m.all() {
        density_checks(&mut report, &name, rho, tol.equality);
    }
    let total: f64 = m.probabilities.iter().sum();
    report.at_most("outcome probabilities sum to 1", "Eq.3", (total - 1.0).abs(), tol.equality);
    let residual = decomposition_residual(&m, psi)?;
    report.at_most(&format!("decomposition residual (port {j})"), "Eq.3", residual, tol.decomposition);
    Ok(report)
}

fn density_checks(report: &mut AuditReport, name: &str, rho: &HermitianMatrix, tol: f64) {
    report.at_most(&format!("{name} trace defect"), "density", (rho.trace() - 1.0).abs(), tol);
    report.at_least(&format!("{name} min eigenvalue"), "density", rho.min_eigenvalue(), -tol);
}

/// Worst fidelity defect over the possible success branches.
fn success_defect(branches: &[Branch], psi: &StateVector, tol: &Tolerances) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for b in branches.iter().filter(|b| b.is_success() && b.state.is_some()) {
        let t = teleport_report(b, psi, tol.purity)?;
        worst = worst.max(1.0 - t.fidelity);
    }
    Ok(worst)
}

/// Whether every success branch teleports every input in `inputs` perfectly.
/// Returns the worst infidelity found.
pub fn check_perfect(proto: &PbtProtocol, inputs: &[StateVector], tol: &Tolerances) -> Result<(bool, f64)> {
    let mut worst: f64 = 0.0;
    for psi in inputs {
        let branches = measure_with_cutoff(proto, psi, tol.branch_cutoff)?;
        worst = worst.max(success_defect(&branches, psi, tol)?);
    }
    Ok((worst <= tol.perfect_fidelity, worst))
}

/// For a perfect protocol, success probabilities and residual states must
/// not depend on the input. Checked on `samples` Haar inputs from `seed`.
/// The spread of the failure-branch port marginals is reported only.
pub fn verify_psi_independence(
    proto: &PbtProtocol,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<AuditReport> {
    let mut report = AuditReport::new("input independence of success branches").with_seed(seed);
    let inputs = sample_haar_states(&proto.input_layout(), samples.max(2), seed)?;
    let runs = inputs
        .iter()
        .map(|psi| measure_with_cutoff(proto, psi, tol.branch_cutoff))
        .collect::<Result<Vec<_>>>()?;

    let mut worst: f64 = 0.0;
    for (psi, branches) in inputs.iter().zip(&runs) {
        worst = worst.max(success_defect(branches, psi, tol)?);
    }
    report.metric("worst success infidelity", worst);
    if worst > tol.perfect_fidelity {
        report.mark_not_applicable(format!(
            "not a perfect PBT protocol (worst success infidelity {worst:.3e}); lemma not applicable"
        ));
        return Ok(report);
    }

    for k in 0..=proto.ports() {
        let qs: Vec<f64> = runs.iter().map(|r| r[k].probability).collect();
        report.at_most(&format!("q_{k} spread"), "Lemma", spread(&qs), tol.equality);
    }

    for k in 1..=proto.ports() {
        let mut residuals = Vec::new();
        let mut missing = false;
        for (psi, branches) in inputs.iter().zip(&runs) {
            if branches[k].state.is_none() {
                continue;
            }
            match teleport_report(&branches[k], psi, tol.purity)?.residual {
                Some(r) => residuals.push(r),
                None => missing = true,
            }
        }
        if residuals.is_empty() && !missing {
            report.note(format!("outcome {k} never occurs"));
            continue;
        }
        report.require(&format!("residual R_{k} factors out"), "Lemma", !missing);
        let mut min_overlap: f64 = 1.0;
        for (x, r1) in residuals.iter().enumerate() {
            for r2 in &residuals[x + 1..] {
                min_overlap = min_overlap.min(r1.overlap(r2)?);
            }
        }
        report.at_least(&format!("residual R_{k} pairwise fidelity"), "Lemma", min_overlap, 1.0 - tol.fidelity);
    }

    for j in 1..=proto.ports() {
        let omegas: Vec<HermitianMatrix> = runs
            .iter()
            .filter_map(|r| r[0].state.as_ref())
            .map(|s| crate::tensor::reduced_density(s, &[&super::port_label(j)]))
            .collect::<Result<_>>()?;
        if let Some((first, rest)) = omegas.split_first() {
            let mut s: f64 = 0.0;
            for w in rest {
                s = s.max(w.max_diff(first)?);
            }
            report.metric(format!("omega_{j} spread"), s);
        }
    }
    Ok(report)
}

pub(crate) fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
