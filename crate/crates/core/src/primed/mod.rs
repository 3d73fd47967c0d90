//! The Pauli-twirled ("primed") version of a PBT protocol. An ancilla `a'`
//! selects a Pauli `V_l` that Bob applies to every port in advance and Alice
//! undoes on the input, so every port starts maximally mixed.

use crate::engine::{
    self, as_input, marginals_from_branches, port_label, split_branches, Branch, PbtProtocol, PortMarginals, ALICE,
    INPUT,
};
use crate::error::{Error, Result};
use crate::pauli::{pauli_count, pauli_element, PauliIndex};
use crate::report::AuditReport;
use crate::tensor::linalg::{self, c, CMatrix};
use crate::tensor::{self, CVector, StateVector, SystemLayout};
use crate::tolerances::Tolerances;

/// Label of the twirl ancilla.
pub const TWIRL: &str = "a'";

/// Largest total state dimension the primed construction will allocate.
pub const MEMORY_CAP: usize = 1 << 22;

#[derive(Clone, Debug)]
pub struct PrimedProtocol {
    base: PbtProtocol,
    resource: StateVector,
    paulis: Vec<CMatrix>,
    w: CMatrix,
}

/// Branches of the primed protocol over `(a, a', A, B1..BN)` and the
/// marginals of every port.
#[derive(Clone, Debug)]
pub struct PrimedRun {
    pub branches: Vec<Branch>,
    pub marginals: Vec<PortMarginals>,
}

pub fn build_primed(base: &PbtProtocol) -> Result<PrimedProtocol> {
    build_primed_with_cap(base, MEMORY_CAP)
}

pub fn build_primed_with_cap(base: &PbtProtocol, cap: usize) -> Result<PrimedProtocol> {
    let n = base.qubits();
    let count = pauli_count(n)?;
    let xi = base.resource();
    let mut subsystems = vec![(TWIRL.to_string(), count)];
    subsystems.extend(xi.layout().subsystems().iter().map(|s| (s.label.clone(), s.dim)));
    let layout = SystemLayout::new(subsystems)?;
    // global state adds `a`; a signaling chain adds another 2^n
    let global = layout.total_dim().saturating_mul(base.port_dim());
    if global > cap {
        return Err(Error::MemoryCap { layout: format!("({INPUT}, {layout})"), dim: global, cap });
    }

    let paulis: Vec<CMatrix> = PauliIndex::all(n)?.map(pauli_element).collect();
    let ports = base.port_labels();
    let scale = c(1.0 / (1u64 << n) as f64, 0.0);
    let mut amps = CVector::zeros(layout.total_dim());
    let block = xi.dim();
    for (l, v) in paulis.iter().enumerate() {
        let mut twisted = xi.clone();
        for port in &ports {
            twisted = twisted.apply_operator(v, &[port])?;
        }
        amps.rows_mut(l * block, block).copy_from(&(twisted.amplitudes() * scale));
    }
    let resource = StateVector::new(layout, amps)?;

    let d = base.port_dim();
    let mut w = CMatrix::zeros(d * count, d * count);
    for (l, v) in paulis.iter().enumerate() {
        let vd = v.adjoint();
        for r in 0..d {
            for col in 0..d {
                w[(r * count + l, col * count + l)] = vd[(r, col)];
            }
        }
    }
    Ok(PrimedProtocol { base: base.clone(), resource, paulis, w })
}

impl PrimedProtocol {
    pub fn base(&self) -> &PbtProtocol {
        &self.base
    }

    /// `|xi'>` over `(a', A, B1..BN)`.
    pub fn resource(&self) -> &StateVector {
        &self.resource
    }

    /// `4^n`.
    pub fn ancilla_dim(&self) -> usize {
        self.paulis.len()
    }

    pub fn paulis(&self) -> &[CMatrix] {
        &self.paulis
    }

    /// `W = sum_l V_l† (x) |mu_l><mu_l|` over `(a, a')`.
    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    /// `|psi>_a (x) |xi'>`.
    pub fn global_state(&self, psi: &StateVector) -> Result<StateVector> {
        tensor::tensor_states(&as_input(&self.base, psi)?, &self.resource)
    }

    /// Applies `W` then the base POVM on `(a, A)` to any state holding
    /// `a`, `a'` and `A`.
    pub fn measure_state(&self, state: &StateVector, cutoff: f64) -> Result<Vec<Branch>> {
        let twisted = tensor::apply_on_subsystems(state, &self.w, &[INPUT, TWIRL])?;
        split_branches(&twisted, self.base.sqrt_povm(), &[INPUT, ALICE], cutoff)
    }

    pub fn run(&self, psi: &StateVector) -> Result<PrimedRun> {
        self.run_with_cutoff(psi, engine::BRANCH_CUTOFF)
    }

    pub fn run_with_cutoff(&self, psi: &StateVector, cutoff: f64) -> Result<PrimedRun> {
        let branches = self.measure_state(&self.global_state(psi)?, cutoff)?;
        let marginals = (1..=self.base.ports())
            .map(|j| marginals_from_branches(&self.resource, &branches, j))
            .collect::<Result<_>>()?;
        Ok(PrimedRun { branches, marginals })
    }

    /// The primed protocol as an ordinary one: Alice holds `(a', A)` merged
    /// into `A`, and measures `W† (M_k (x) I_a') W`.
    pub fn as_protocol(&self) -> Result<PbtProtocol> {
        let count = self.ancilla_dim();
        let alice = count * self.base.alice_dim();
        let mut subsystems = vec![(ALICE.to_string(), alice)];
        subsystems.extend(self.base.port_labels().into_iter().map(|l| (l, self.base.port_dim())));
        let resource = self.resource.with_layout(SystemLayout::new(subsystems)?)?;
        let layout = SystemLayout::new([(INPUT, self.base.port_dim()), (TWIRL, count), (ALICE, self.base.alice_dim())])?;
        let w_full = tensor::embed_operator(&self.w, &[INPUT, TWIRL], &layout)?;
        let povm = self
            .base
            .povm()
            .iter()
            .map(|m| {
                let lifted = tensor::embed_operator(m.entries(), &[INPUT, ALICE], &layout)?;
                Ok(linalg::hermitize(&(w_full.adjoint() * lifted * &w_full)))
            })
            .collect::<Result<Vec<_>>>()?;
        PbtProtocol::new(self.base.qubits(), resource, povm)
    }
}

/// Same branch statistics when Bob's controlled Paulis are applied after
/// Alice's measurement instead of before. Returns the largest difference in
/// outcome probability and in post-measurement state.
pub fn commutation_witness(p: &PrimedProtocol, psi: &StateVector) -> Result<(f64, f64)> {
    let before = p.run(psi)?.branches;

    // |phi>_a' |xi> with |phi> = (1/2^n) sum_l |mu_l>
    let count = p.ancilla_dim();
    let phi = StateVector::normalizing(
        SystemLayout::single(TWIRL, count)?,
        CVector::from_element(count, c(1.0, 0.0)),
    )?;
    let plain = tensor::tensor_states(&phi, p.base.resource())?;
    let global = tensor::tensor_states(&as_input(&p.base, psi)?, &plain)?;
    let after = p.measure_state(&global, engine::BRANCH_CUTOFF)?;

    let mut prob_diff: f64 = 0.0;
    let mut state_diff: f64 = 0.0;
    for (b, a) in before.iter().zip(after) {
        prob_diff = prob_diff.max((b.probability - a.probability).abs());
        if let (Some(sb), Some(sa)) = (&b.state, a.state) {
            let corrected = controlled_port_paulis(p, &sa)?;
            state_diff = state_diff.max((sb.amplitudes() - corrected.amplitudes()).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    Ok((prob_diff, state_diff))
}

/// `sum_l |mu_l><mu_l|_a' (x) prod_i (V_l)_{B_i}`.
fn controlled_port_paulis(p: &PrimedProtocol, state: &StateVector) -> Result<StateVector> {
    let count = p.ancilla_dim();
    let mut out = CVector::zeros(state.dim());
    for (l, v) in p.paulis.iter().enumerate() {
        let mut mu = CVector::zeros(count);
        mu[l] = linalg::ONE;
        let mut term = state.contract(&[TWIRL], &mu)?;
        for port in p.base.port_labels() {
            term = term.apply_operator(v, &[&port])?;
        }
        let mu_state = StateVector::new(SystemLayout::single(TWIRL, count)?, mu)?;
        let lifted = tensor::tensor_states(&mu_state, &term)?;
        let order: Vec<&str> = state.layout().labels().collect();
        out += lifted.permuted(&order)?.amplitudes();
    }
    StateVector::unnormalized(state.layout().clone(), out)
}

/// Port marginals are maximally mixed (resource and other-port success
/// branches) and the failure marginal completes the mixture.
pub fn verify_eq5(p: &PrimedProtocol, samples: &[StateVector], tol: &Tolerances) -> Result<AuditReport> {
    let mut report = AuditReport::new("primed protocol port marginals");
    let (perfect, worst) = engine::check_perfect(&p.base, samples, tol)?;
    if !perfect {
        report.mark_not_applicable(format!(
            "base protocol is not perfect PBT (worst success infidelity {worst:.3e})"
        ));
        return Ok(report);
    }
    let d = p.base.port_dim();
    let mixed = CMatrix::identity(d, d) / c(d as f64, 0.0);
    if p.base.ports() == 1 {
        report.note("no gamma terms");
    }
    for (s, psi) in samples.iter().enumerate() {
        let run = p.run_with_cutoff(psi, tol.branch_cutoff)?;
        let base = engine::measure_with_cutoff(&p.base, psi, tol.branch_cutoff)?;
        let p_primed = engine::success_probability(&run.branches);
        let p_base = engine::success_probability(&base);
        report.at_most(&format!("success invariance (sample {s})"), "Eq.5", (p_primed - p_base).abs(), tol.success_invariance);
        for m in &run.marginals {
            let j = m.port;
            report.at_most(
                &format!("eta'_{j} vs I/d (sample {s})"),
                "Eq.5",
                linalg::max_abs_diff(m.eta.entries(), &mixed),
                tol.equality,
            );
            for (i, g) in &m.gamma {
                if let Some(g) = g {
                    report.at_most(
                        &format!("gamma'_{j},{i} vs I/d (sample {s})"),
                        "Eq.5",
                        linalg::max_abs_diff(g.entries(), &mixed),
                        tol.equality,
                    );
                }
            }
            // I/d = q_j psi psi† + sum_i q_i I/d + (1 - p) omega'
            let mut r = &mixed - psi.projector() * c(m.probabilities[j], 0.0);
            for (i, _) in &m.gamma {
                r -= &mixed * c(m.probabilities[*i], 0.0);
            }
            if let Some(w) = &m.omega {
                r -= w.entries() * c(1.0 - m.success_probability(), 0.0);
            }
            report.at_most(&format!("mixture residual, port {j} (sample {s})"), "Eq.5", linalg::max_abs(&r), tol.decomposition);
        }
    }
    Ok(report)
}

/// The failure-branch marginal of port `j` is the twirl of the base
/// protocol's failure marginals on the inputs `V_l† psi`. Checked per
/// Pauli term, each weighted by the base failure probability, and for the
/// normalized sum (which assumes that probability does not vary with `l`,
/// as for perfect protocols).
pub fn verify_twirled_failure(p: &PrimedProtocol, psi: &StateVector, tol: &Tolerances) -> Result<AuditReport> {
    let mut report = AuditReport::new("primed failure marginals");
    let input = as_input(&p.base, psi)?;
    let global = p.global_state(&input)?;
    let twisted = tensor::apply_on_subsystems(&global, &p.w, &[INPUT, TWIRL])?;
    // unnormalized failure branch
    let failure = twisted.apply_operator(&p.base.sqrt_povm()[0], &[INPUT, ALICE])?;
    let q0 = failure.norm_sqr();
    if q0 < tol.branch_cutoff {
        report.note("failure outcome absent");
        return Ok(report);
    }
    let count = p.ancilla_dim();
    let scale = 1.0 / count as f64;
    for j in 1..=p.base.ports() {
        let label = port_label(j);
        let mut twirled = CMatrix::zeros(p.base.port_dim(), p.base.port_dim());
        let mut worst_term: f64 = 0.0;
        for (l, v) in p.paulis.iter().enumerate() {
            let mut mu = CVector::zeros(count);
            mu[l] = linalg::ONE;
            let term = tensor::reduced_density(&failure.contract(&[TWIRL], &mu)?, &[&label])?;

            let psi_l = StateVector::normalizing(input.layout().clone(), v.adjoint() * input.amplitudes())?;
            let base = engine::measure_with_cutoff(&p.base, &psi_l, tol.branch_cutoff)?;
            let expected = match &base[0].state {
                Some(s) => {
                    let omega = tensor::reduced_density(s, &[&label])?;
                    v * omega.entries() * v.adjoint() * c(base[0].probability * scale, 0.0)
                }
                None => CMatrix::zeros(p.base.port_dim(), p.base.port_dim()),
            };
            worst_term = worst_term.max(linalg::max_abs_diff(term.entries(), &expected));
            if let Some(s) = &base[0].state {
                let omega = tensor::reduced_density(s, &[&label])?;
                twirled += v * omega.entries() * v.adjoint() * c(scale, 0.0);
            }
        }
        report.at_most(&format!("per-Pauli failure terms, port {j}"), "Eq.b9", worst_term, tol.equality);
        let omega_primed = tensor::reduced_density(&failure, &[&label])?.scaled(1.0 / q0);
        report.at_most(
            &format!("omega'_{j} vs twirl of base failure marginals"),
            "Eq.b9",
            linalg::max_abs_diff(omega_primed.entries(), &twirled),
            tol.equality,
        );
    }
    Ok(report)
}
