//! Numerical maximization of PBT success probability.
//!
//! [`build_sdp`] assembles the perfect-teleportation program for a given
//! resource; [`build_joint_sdp`] also optimizes the resource. [`solve`] runs a
//! relaxed ADMM (affine projection plus PSD-cone projection) on the face of
//! the PSD cone that perfect teleportation allows, scales the result to exact
//! completeness, and re-simulates the resulting protocol with the engine. [`certify`] audits any POVM independently of the solver.

mod admm;
mod sdp;

use admm::FaceProgram;
pub use admm::{SolverConfig, TraceRow};
pub use sdp::{
    build_joint_sdp, build_joint_sdp_with_limit, build_sdp, build_sdp_with_limit, hermitian_basis, PbtSdp,
    ResourceMode, DEFAULT_MAX_DIM,
};

use std::io::Write;

use serde::Serialize;

use crate::engine::{self, PbtProtocol, ALICE, INPUT};
use crate::error::{Error, Result};
use crate::pauli::sample_haar_states;
use crate::report::AuditReport;
use crate::signaling::bound;
use crate::tensor::linalg::{self, c, CMatrix};
use crate::tensor::{StateVector, SystemLayout};
use crate::tolerances::Tolerances;

/// Singular values of the resource factor below this fraction of the
/// largest are dropped when inverting it.
const SUPPORT_CUTOFF: f64 = 1e-10;

/// A solved (or partially solved) instance.
#[derive(Clone, Debug)]
pub struct SolverResult {
    pub n: usize,
    pub ports: usize,
    pub mode: ResourceMode,
    /// Success probability of the polished protocol, re-simulated.
    pub p_opt: f64,
    /// `sum q_k` after polishing.
    pub objective: f64,
    /// `sum q_k` at the last ADMM iterate.
    pub admm_objective: f64,
    pub q: Vec<f64>,
    /// `M_0..M_N` over `(a, A)`.
    pub povm: Vec<CMatrix>,
    pub resource: StateVector,
    pub converged: bool,
    pub iterations: usize,
    /// Final `max(primal, dual)` ADMM residual.
    pub residual: f64,
    pub residuals: Residuals,
    pub trace: Vec<TraceRow>,
}

/// Constraint residuals of the polished POVM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residuals {
    /// Most negative eigenvalue over `M_0..M_N` (clamped at 0 from above).
    pub positivity: f64,
    /// `max |sum_k M_k - I|`.
    pub completeness: f64,
    /// Largest teleportation-constraint violation.
    pub teleportation: f64,
}

/// Serializable digest of a [`SolverResult`].
#[derive(Clone, Debug, Serialize)]
pub struct SolverSummary {
    pub n: usize,
    pub ports: usize,
    pub mode: ResourceMode,
    pub p_opt: f64,
    pub objective: f64,
    pub admm_objective: f64,
    pub q: Vec<f64>,
    pub bound: f64,
    pub gap: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub residuals: Residuals,
}

impl SolverResult {
    pub fn protocol(&self) -> Result<PbtProtocol> {
        PbtProtocol::new(self.n, self.resource.clone(), self.povm.clone())
    }

    pub fn summary(&self) -> Result<SolverSummary> {
        let b = bound(self.n, self.ports)?.value();
        Ok(SolverSummary {
            n: self.n,
            ports: self.ports,
            mode: self.mode,
            p_opt: self.p_opt,
            objective: self.objective,
            admm_objective: self.admm_objective,
            q: self.q.clone(),
            bound: b,
            gap: b - self.p_opt,
            converged: self.converged,
            iterations: self.iterations,
            residual: self.residual,
            residuals: self.residuals,
        })
    }
}

/// Optimizes `n`-qubit PBT with `N` ports: over the POVM for `N` maximally
/// entangled pairs (fixed) or over POVM and resource (joint).
pub fn optimize(n: usize, ports: usize, mode: ResourceMode, cfg: &SolverConfig) -> Result<SolverResult> {
    let sdp = match mode {
        ResourceMode::Fixed => {
            let resource = engine::paired_resource(ports, 1 << n.min(8))?;
            build_sdp_with_limit(n, &resource, ResourceMode::Fixed, cfg.max_dim)?
        }
        ResourceMode::Joint => build_joint_sdp_with_limit(n, ports, cfg.max_dim)?,
    };
    solve(&sdp, cfg)
}

/// Runs the solver, maps the iterate back to a protocol, scales it to exact
/// completeness and re-simulates it.
///
/// A run that hits `max_iterations` still returns its (feasible) iterate,
/// flagged `converged = false`.
pub fn solve(sdp: &PbtSdp, cfg: &SolverConfig) -> Result<SolverResult> {
    let (n, ports, d) = (sdp.n, sdp.ports, sdp.port_dim());
    let db = d.pow(ports as u32);
    let fixed_factor = match sdp.mode {
        ResourceMode::Fixed => {
            let xi = sdp.resource.as_matrix(&[ALICE])?;
            Some(xi * c((db as f64).sqrt(), 0.0))
        }
        ResourceMode::Joint => None,
    };
    let gram = fixed_factor.as_ref().map(|x| linalg::hermitize(&(x.adjoint() * x)));
    let program = FaceProgram::new(n, ports, gram.as_ref());
    let out = program.admm(cfg);

    let (factor, resource) = match (fixed_factor, program.s_block(&out.point.w)) {
        (Some(x), _) => (x, sdp.resource.clone()),
        (None, Some(s)) => {
            let t = linalg::trace(&s).re / db as f64;
            let x = linalg::sqrt_psd(&(s / c(t, 0.0)), f64::INFINITY)?;
            let raw = sdp.resource.apply_operator(&x, &[ALICE])?;
            let resource = StateVector::normalizing(raw.layout().clone(), raw.into_amplitudes())?;
            (x, resource)
        }
        (None, None) => unreachable!("joint program carries S"),
    };
    let top = factor.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pinv = factor
        .pseudo_inverse(top * SUPPORT_CUTOFF)
        .map_err(|e| Error::InvalidProtocol(format!("resource factor: {e}")))?;
    let lift = CMatrix::identity(d, d).kronecker(&pinv);
    let mut measurement: Vec<CMatrix> = (0..ports)
        .map(|k| {
            let omega = program.lift(k, &linalg::psd_projection(&program.y_block(&out.point.w, k)));
            linalg::hermitize(&(lift.adjoint() * omega * &lift))
        })
        .collect();
    let mut q: Vec<f64> = (0..ports)
        .map(|k| linalg::trace(&program.y_block(&out.point.w, k)).re.max(0.0) / (d * db) as f64)
        .collect();

    let dim = sdp.dim;
    let total = measurement.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m);
    let top = linalg::eigh(&total).0.last().copied().unwrap_or(0.0);
    if top > 1.0 {
        for m in &mut measurement {
            *m /= c(top, 0.0);
        }
        for v in &mut q {
            *v /= top;
        }
    }
    let total = measurement.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m);
    let mut povm = vec![linalg::hermitize(&(CMatrix::identity(dim, dim) - total))];
    povm.extend(measurement);

    let rows = match sdp.mode {
        ResourceMode::Fixed => None,
        ResourceMode::Joint => Some(build_sdp_with_limit(n, &resource, ResourceMode::Fixed, sdp.max_dim)?),
    };
    let residuals = residuals_of(rows.as_ref().unwrap_or(sdp), &povm, &q);
    let proto = PbtProtocol::with_tolerance(n, resource.clone(), povm.clone(), 1e-8)?;
    let probe = StateVector::basis(SystemLayout::single(INPUT, d)?, 0)?;
    let p_opt = engine::success_probability(&engine::measure(&proto, &probe)?);

    Ok(SolverResult {
        n,
        ports,
        mode: sdp.mode,
        p_opt,
        objective: q.iter().sum(),
        admm_objective: out.objective,
        q,
        povm,
        resource,
        converged: out.converged,
        iterations: out.iterations,
        residual: out.residual,
        residuals,
        trace: out.trace,
    })
}

fn residuals_of(sdp: &PbtSdp, povm: &[CMatrix], q: &[f64]) -> Residuals {
    let dim = sdp.dim;
    let positivity = povm.iter().map(linalg::min_eigenvalue).fold(0.0, f64::min);
    let total = povm.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m);
    Residuals {
        positivity,
        completeness: linalg::max_abs_diff(&total, &CMatrix::identity(dim, dim)),
        teleportation: sdp.teleportation_residual(&povm[1..], q),
    }
}

/// Audits a POVM `M_0..M_N` on a resource: positivity, completeness,
/// perfect teleportation on `samples` Haar inputs, and the bound.
pub fn certify(
    povm: &[CMatrix],
    resource: &StateVector,
    n: usize,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<AuditReport> {
    let mut report = AuditReport::new("certify").with_seed(seed);
    let ports = resource.layout().len().saturating_sub(1);
    let b = bound(n, ports)?;
    let dim = povm.first().map_or(0, |m| m.nrows());
    let shapes_ok = povm.len() == ports + 1 && povm.iter().all(|m| m.nrows() == dim && m.ncols() == dim);
    if !report.require("POVM shape", "Thm", shapes_ok) {
        report.note(format!("expected {} square POVM elements of equal size", ports + 1));
        return Ok(report);
    }
    let positivity = povm.iter().map(linalg::min_eigenvalue).fold(f64::INFINITY, f64::min);
    let hermiticity = povm.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max);
    let total = povm.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m);
    let completeness = linalg::max_abs_diff(&total, &CMatrix::identity(dim, dim));
    let mut valid = report.at_most("POVM hermiticity", "C1", hermiticity, tol.certify_constraint);
    valid &= report.at_least("POVM positivity", "C1", positivity, -tol.certify_constraint);
    valid &= report.at_most("POVM completeness", "C2", completeness, tol.certify_constraint);
    if !valid {
        report.note("POVM invalid; simulation skipped");
        return Ok(report);
    }
    let proto = match PbtProtocol::with_tolerance(n, resource.clone(), povm.to_vec(), tol.certify_constraint) {
        Ok(p) => p,
        Err(e) => {
            report.require("protocol well-formed", "Thm", false);
            report.note(e.to_string());
            return Ok(report);
        }
    };
    let inputs = sample_haar_states(&proto.input_layout(), samples, seed)?;
    let mut worst: f64 = 0.0;
    let mut probabilities = Vec::with_capacity(samples);
    for psi in &inputs {
        let branches = engine::measure(&proto, psi)?;
        for branch in branches.iter().filter(|b| b.is_success() && b.state.is_some()) {
            let rep = engine::teleport_report(branch, psi, tol.purity)?;
            worst = worst.max(1.0 - rep.fidelity);
        }
        probabilities.push(engine::success_probability(&branches));
    }
    let p = probabilities.iter().sum::<f64>() / samples.max(1) as f64;
    report.at_most("worst infidelity", "C3", worst, tol.certify_fidelity);
    report.at_most("success spread", "Lemma", engine::spread(&probabilities), tol.certify_constraint);
    report.at_most("p - bound", "Eq.2", p - b.value(), tol.bound_slack);
    report.metric("p", p);
    report.metric("bound", b.value());
    report.metric("gap", b.value() - p);
    Ok(report)
}

/// Writes `iteration,objective,residual` rows.
pub fn write_trace<W: Write>(trace: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in trace {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format { path: "trace".into(), message: e.to_string() })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format { path: "trace".into(), message: e.to_string() }
}
