use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::bound::{bound, f_of_r, Bound};
use super::{sdc_basis, sdc_encode, BOB_PAIR};
use crate::engine::port_label;
use crate::error::{Error, Result};
use crate::pauli::{pauli_element, PauliIndex};
use crate::primed::{verify_eq5, PrimedProtocol};
use crate::report::AuditReport;
use crate::tensor::linalg::{self, c};
use crate::tensor::{self, CVector, HermitianMatrix, StateVector};
use crate::tolerances::Tolerances;

/// Which of the three situations Alice's outcome `k` puts the chain in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainCase {
    /// `k = j`: the state arrived at Bob's port.
    PortHit,
    /// `k = i`, `i` not in `{0, j}`: Alice relays from `B_i` to `B_j` by
    /// teleportation without sending the correction.
    PortMiss,
    /// `k = 0`.
    Failure,
}

impl ChainCase {
    pub fn of(k: usize, port: usize) -> Self {
        match k {
            0 => Self::Failure,
            k if k == port => Self::PortHit,
            _ => Self::PortMiss,
        }
    }
}

/// One simulated round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutcome {
    pub case: ChainCase,
    pub alice_outcome: usize,
    /// Alice's relay measurement outcome in the port-miss case; `4^n + 1`
    /// labels the complement of the relay basis.
    pub relay_outcome: Option<usize>,
    pub bob_message: usize,
    pub correct: bool,
}

/// A sub-outcome of one Alice outcome (a relay outcome, or the whole branch)
/// and Bob's conditional decoding distribution over messages `1..=4^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubOutcome {
    pub probability: f64,
    pub bob: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainBranch {
    pub outcome: usize,
    pub case: ChainCase,
    pub probability: f64,
    /// Empty when the outcome is absent.
    pub sub: Vec<SubOutcome>,
}

impl ChainBranch {
    /// Bob's decoding distribution given this Alice outcome.
    pub fn bob_marginal(&self, messages: usize) -> Vec<f64> {
        let mut out = vec![0.0; messages];
        for s in &self.sub {
            for (o, b) in out.iter_mut().zip(&s.bob) {
                *o += s.probability * b;
            }
        }
        out
    }
}

/// Every outcome of the chain with exact probabilities, for one port and message.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainTree {
    pub n: usize,
    pub port: usize,
    pub message: usize,
    pub branches: Vec<ChainBranch>,
}

impl ChainTree {
    pub fn messages(&self) -> usize {
        1 << (2 * self.n)
    }

    /// Overall distribution of Bob's decoded message.
    pub fn bob_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.messages()];
        for b in &self.branches {
            for (o, x) in out.iter_mut().zip(b.bob_marginal(self.messages())) {
                *o += b.probability * x;
            }
        }
        out
    }

    /// Probability that Bob decodes the sent message, restricted to `case`.
    pub fn correct_in(&self, case: ChainCase) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.case == case)
            .map(|b| b.probability * b.bob_marginal(self.messages())[self.message - 1])
            .sum()
    }

    pub fn correct(&self) -> f64 {
        self.bob_distribution()[self.message - 1]
    }

    fn probability_of(&self, case: ChainCase) -> f64 {
        self.branches.iter().filter(|b| b.case == case).map(|b| b.probability).sum()
    }

    /// Samples one round; with `forced`, conditions on that case.
    pub fn sample(&self, rng: &mut ChaCha20Rng, forced: Option<ChainCase>) -> Result<ChainOutcome> {
        let allowed = |b: &&ChainBranch| forced.is_none_or(|f| b.case == f) && !b.sub.is_empty();
        let candidates: Vec<&ChainBranch> = self.branches.iter().filter(allowed).collect();
        let weights: Vec<f64> = candidates.iter().map(|b| b.probability).collect();
        let Some(x) = pick(rng, &weights) else {
            return Err(Error::ChainPrecondition(format!("case {forced:?} has zero probability")));
        };
        let branch = candidates[x];
        let sub_weights: Vec<f64> = branch.sub.iter().map(|s| s.probability).collect();
        let s = pick(rng, &sub_weights).unwrap_or(0);
        let r = pick(rng, &branch.sub[s].bob).unwrap_or(0) + 1;
        Ok(ChainOutcome {
            case: branch.case,
            alice_outcome: branch.outcome,
            relay_outcome: (branch.case == ChainCase::PortMiss).then_some(s + 1),
            bob_message: r,
            correct: r == self.message,
        })
    }
}

/// Index drawn proportionally to `weights`; `None` if they sum to zero.
fn pick(rng: &mut ChaCha20Rng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if total <= 0.0 {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        last = Some(i);
        if u < *w {
            return Some(i);
        }
        u -= w;
    }
    last
}

/// Exact quantities of the chain for one port and message.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignalingReport {
    pub n: usize,
    pub ports: usize,
    pub port: usize,
    pub message: usize,
    pub q_j: f64,
    pub p: f64,
    pub r_j: f64,
    /// Port-miss contribution to Bob's success.
    pub relay_success: f64,
    /// `q_j + 4^-n (p - q_j) + (1 - p) r_j`.
    pub p_prime_formula: f64,
    /// By summing every branch of the chain.
    pub p_prime_simulated: f64,
    /// Probability of each message Bob can decode.
    pub bob_distribution: Vec<f64>,
    /// Largest deviation of relay outcome probabilities from `4^-n`, per
    /// Alice outcome, and of Bob's decoding in that case from uniform.
    pub relay_outcome_deviation: f64,
    pub relay_decoding_deviation: f64,
    pub bound: Bound,
}

/// Exact chain quantities and checks for every port and message.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignalingAudit {
    pub reports: Vec<SignalingReport>,
    /// `R = sum_j r_j` (message 1).
    pub r_total: f64,
    pub p: f64,
    pub f_of_r: f64,
    pub audit: AuditReport,
}

fn check_precondition(p: &PrimedProtocol, tol: &Tolerances) -> Result<()> {
    let layout = p.base().input_layout();
    let mut inputs: Vec<StateVector> =
        (0..layout.total_dim()).map(|l| StateVector::basis(layout.clone(), l)).collect::<Result<_>>()?;
    inputs.extend(crate::pauli::sample_haar_states(&layout, 2, 0x5eed)?);
    let report = verify_eq5(p, &inputs, tol)?;
    if !report.passed() {
        let failed: Vec<String> = report.failed_checks().map(|c| c.name.clone()).collect();
        return Err(Error::ChainPrecondition(format!(
            "maximally mixed port marginals not established ({:?}; failed: {})",
            report.status,
            if failed.is_empty() { report.notes.join("; ") } else { failed.join(", ") }
        )));
    }
    Ok(())
}

/// `sdc (x) xi'` over `(a, b, a', A, B1..BN)`.
fn chain_state(p: &PrimedProtocol, message: usize) -> Result<StateVector> {
    let pair = sdc_encode(message, p.base().qubits())?;
    tensor::tensor_states(&pair, p.resource())
}

fn decode(rho: &HermitianMatrix, basis: &[StateVector], weight: f64) -> Vec<f64> {
    basis
        .iter()
        .map(|v| {
            let a = v.amplitudes();
            (a.dotc(&(rho.entries() * a)).re / weight).clamp(0.0, 1.0)
        })
        .collect()
}

/// Builds the exact outcome tree of the chain. The primed protocol's port
/// marginals are verified first.
pub fn build_tree(p: &PrimedProtocol, port: usize, message: usize, tol: &Tolerances) -> Result<ChainTree> {
    check_precondition(p, tol)?;
    build_tree_unchecked(p, port, message, tol)
}

fn build_tree_unchecked(p: &PrimedProtocol, port: usize, message: usize, tol: &Tolerances) -> Result<ChainTree> {
    let base = p.base();
    let n = base.qubits();
    if port == 0 || port > base.ports() {
        return Err(Error::IndexOutOfRange { index: port, min: 1, max: base.ports() });
    }
    let basis = sdc_basis(n)?;
    let bj = port_label(port);
    let bob = [bj.as_str(), BOB_PAIR];
    let global = chain_state(p, message)?;
    let branches = p.measure_state(&global, tol.branch_cutoff)?;

    let mut out = Vec::with_capacity(branches.len());
    for b in branches {
        let case = ChainCase::of(b.outcome, port);
        let sub = match (&b.state, case) {
            (None, _) => Vec::new(),
            (Some(s), ChainCase::PortHit | ChainCase::Failure) => {
                let rho = tensor::reduced_density(s, &bob)?;
                vec![SubOutcome { probability: 1.0, bob: decode(&rho, &basis, 1.0) }]
            }
            (Some(s), ChainCase::PortMiss) => relay(s, b.outcome, port, n, &basis, tol)?,
        };
        out.push(ChainBranch { outcome: b.outcome, case, probability: b.probability, sub });
    }
    Ok(ChainTree { n, port, message, branches: out })
}

/// Alice teleports `B_i` onto `B_j` through the Schmidt basis of the
/// residual state, without sending the correction; Bob decodes on `(B_j, b)`.
fn relay(
    state: &StateVector,
    i: usize,
    j: usize,
    n: usize,
    basis: &[StateVector],
    tol: &Tolerances,
) -> Result<Vec<SubOutcome>> {
    let d = 1usize << n;
    let bi = port_label(i);
    let bj = port_label(j);

    let split = tensor::schmidt_decompose(state, &[bi.as_str(), BOB_PAIR])?;
    if split.coefficients[0] < 1.0 - tol.purity {
        return Err(Error::ChainPrecondition(format!(
            "outcome {i} does not leave the input intact at B{i} (Schmidt weight {:.3e})",
            split.coefficients[0]
        )));
    }
    let residual = &split.right[0];
    let inner = tensor::schmidt_decompose(residual, &[bj.as_str()])?;
    let flat = 1.0 / (d as f64).sqrt();
    let worst = inner.coefficients.iter().map(|x| (x - flat).abs()).fold(0.0, f64::max);
    if inner.coefficients.len() != d || worst > tol.purity {
        return Err(Error::ChainPrecondition(format!(
            "residual of outcome {i} is not maximally entangled with B{j} (deviation {worst:.3e})"
        )));
    }
    // R = (1/sqrt d) sum_l |e_l>_{Bj} |s~_l>
    let dim_rest = inner.right[0].dim();
    let aligned: Vec<CVector> = (0..d)
        .map(|l| {
            let mut v = CVector::zeros(dim_rest);
            for (k, (t, s)) in inner.left.iter().zip(&inner.right).enumerate() {
                v += s.amplitudes() * (t.amplitudes()[l] * c(inner.coefficients[k] / flat, 0.0));
            }
            v
        })
        .collect();

    let rest_labels: Vec<String> = inner.right[0].layout().labels().map(str::to_string).collect();
    let mut group: Vec<&str> = vec![bi.as_str()];
    group.extend(rest_labels.iter().map(String::as_str));
    let bob = [bj.as_str(), BOB_PAIR];

    let total = tensor::reduced_density(state, &bob)?;
    let mut leftover = total.entries().clone();
    let mut subs = Vec::with_capacity(basis.len() + 1);
    for m in 1..=basis.len() {
        let v = pauli_element(PauliIndex::new(m, n)?);
        // (V_m (x) I) (1/sqrt d) sum_l |e_l>_{Bi} |s~_l>
        let mut phi = CVector::zeros(d * dim_rest);
        for l in 0..d {
            for e in 0..d {
                let amp = v[(e, l)] * c(flat, 0.0);
                if amp.norm_sqr() == 0.0 {
                    continue;
                }
                let mut row = phi.rows_mut(e * dim_rest, dim_rest);
                row += &aligned[l] * amp;
            }
        }
        let post = state.contract(&group, &phi)?;
        let w = post.norm_sqr();
        let rho = tensor::reduced_density(&post, &bob)?;
        leftover -= rho.entries();
        let decoded = if w < tol.branch_cutoff { vec![0.0; basis.len()] } else { decode(&rho, basis, w) };
        subs.push(SubOutcome { probability: w, bob: decoded });
    }
    let w_rest = linalg::trace(&leftover).re;
    let rho_rest = HermitianMatrix::new(total.layout().clone(), leftover)?;
    let decoded = if w_rest < tol.branch_cutoff { vec![0.0; basis.len()] } else { decode(&rho_rest, basis, w_rest) };
    subs.push(SubOutcome { probability: w_rest.max(0.0), bob: decoded });
    Ok(subs)
}

/// Exact chain for one port and message, with the bookkeeping of each case.
pub fn compute_chain_exact(p: &PrimedProtocol, port: usize, message: usize, tol: &Tolerances) -> Result<SignalingReport> {
    let tree = build_tree(p, port, message, tol)?;
    Ok(report_from_tree(p, &tree))
}

fn report_from_tree(p: &PrimedProtocol, tree: &ChainTree) -> SignalingReport {
    let base = p.base();
    let n = base.qubits();
    let quarter = 1.0 / tree.messages() as f64;
    let q: Vec<f64> = tree.branches.iter().map(|b| b.probability).collect();
    let q_j = q[tree.port];
    let success: f64 = q[1..].iter().sum();
    let failure = &tree.branches[0];
    let r_j = if failure.sub.is_empty() { 0.0 } else { failure.bob_marginal(tree.messages())[tree.message - 1] };

    let mut outcome_dev: f64 = 0.0;
    let mut decoding_dev: f64 = 0.0;
    for b in tree.branches.iter().filter(|b| b.case == ChainCase::PortMiss && !b.sub.is_empty()) {
        for s in &b.sub[..tree.messages()] {
            outcome_dev = outcome_dev.max((s.probability - quarter).abs());
        }
        for x in b.bob_marginal(tree.messages()) {
            decoding_dev = decoding_dev.max((x - quarter).abs());
        }
    }

    SignalingReport {
        n,
        ports: base.ports(),
        port: tree.port,
        message: tree.message,
        q_j,
        p: success,
        r_j,
        relay_success: tree.correct_in(ChainCase::PortMiss),
        p_prime_formula: q_j + quarter * (success - q_j) + (1.0 - success) * r_j,
        p_prime_simulated: tree.correct(),
        bob_distribution: tree.bob_distribution(),
        relay_outcome_deviation: outcome_dev,
        relay_decoding_deviation: decoding_dev,
        bound: bound(n, base.ports()).expect("validated protocol sizes"),
    }
}

/// Runs the chain exactly for every port and every message and checks that
/// Bob learns nothing, that each case contributes as argued, and that the
/// port sums reproduce `p = f(R)`.
pub fn audit_signaling(p: &PrimedProtocol, tol: &Tolerances) -> Result<SignalingAudit> {
    check_precondition(p, tol)?;
    let base = p.base();
    let n = base.qubits();
    let messages = 1usize << (2 * n);
    let quarter = 1.0 / messages as f64;
    let mut audit = AuditReport::new("no-signaling chain");
    let mut reports = Vec::new();
    let mut r_total = 0.0;
    let mut p_success = 0.0;
    for j in 1..=base.ports() {
        let mut per_message = Vec::with_capacity(messages);
        for m in 1..=messages {
            let tree = build_tree_unchecked(p, j, m, tol)?;
            let r = report_from_tree(p, &tree);
            let tag = format!("port {j}, message {m}");
            audit.at_most(&format!("p'_j vs 4^-n ({tag})"), "Eq.6", (r.p_prime_simulated - quarter).abs(), tol.signaling);
            audit.at_most(
                &format!("p'_j formula vs branch sum ({tag})"),
                "Eq.6",
                (r.p_prime_formula - r.p_prime_simulated).abs(),
                tol.equality,
            );
            audit.at_most(
                &format!("relay case vs 4^-n (p - q_j) ({tag})"),
                "Eq.6",
                (r.relay_success - quarter * (r.p - r.q_j)).abs(),
                tol.equality,
            );
            let lowest = r.bob_distribution.iter().copied().fold(f64::INFINITY, f64::min);
            audit.at_least(&format!("every decoding at least 4^-n ({tag})"), "Eq.6", lowest, quarter - tol.signaling);
            audit.require(&format!("0 <= r_j <= 1 ({tag})"), "Eq.6", (0.0..=1.0).contains(&r.r_j));
            per_message.push(r);
        }
        let spread = crate::engine::spread(&per_message.iter().map(|r| r.p_prime_simulated).collect::<Vec<_>>());
        audit.at_most(&format!("p'_j message independence (port {j})"), "Eq.6", spread, 1e-12);
        let worst_outcome = per_message.iter().map(|r| r.relay_outcome_deviation).fold(0.0, f64::max);
        let worst_decoding = per_message.iter().map(|r| r.relay_decoding_deviation).fold(0.0, f64::max);
        audit.metric(format!("relay outcome deviation from 4^-n (port {j})"), worst_outcome);
        audit.metric(format!("relay decoding deviation from uniform (port {j})"), worst_decoding);
        r_total += per_message[0].r_j;
        p_success = per_message[0].p;
        reports.extend(per_message);
    }
    let f = f_of_r(n, base.ports(), r_total)?;
    audit.require("R in feasible range", "Eq.6.5", f.feasible && !f.boundary);
    audit.at_most("p vs f(R)", "Eq.6.5", (p_success - f.value).abs(), tol.equality);
    let b = bound(n, base.ports())?;
    audit.at_most("p vs bound", "Eq.2", p_success - b.value(), tol.bound_slack);
    Ok(SignalingAudit { reports, r_total, p: p_success, f_of_r: f.value, audit })
}

/// One round of the chain, drawn from `seed`.
pub fn run_chain(
    p: &PrimedProtocol,
    port: usize,
    message: usize,
    seed: u64,
    forced: Option<ChainCase>,
    tol: &Tolerances,
) -> Result<ChainOutcome> {
    let tree = build_tree(p, port, message, tol)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    tree.sample(&mut rng, forced)
}

/// Counts correct rounds among `rounds` draws from stream `chunk` of `seed`.
/// Chunks are independent, so they can be run in parallel.
pub fn simulate_rounds(
    tree: &ChainTree,
    rounds: usize,
    seed: u64,
    chunk: u64,
    forced: Option<ChainCase>,
) -> Result<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut correct = 0;
    for _ in 0..rounds {
        if tree.sample(&mut rng, forced)?.correct {
            correct += 1;
        }
    }
    Ok(correct)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub rounds: usize,
    pub correct: usize,
    pub rate: f64,
    pub exact: f64,
    /// Binomial standard error at the exact rate.
    pub sigma: f64,
    /// `|rate - exact| / sigma`; zero when `sigma` is zero and they agree.
    pub z: f64,
}

impl MonteCarloSummary {
    pub fn new(rounds: usize, correct: usize, exact: f64) -> Self {
        let rate = correct as f64 / rounds as f64;
        let sigma = (exact * (1.0 - exact) / rounds as f64).sqrt();
        let diff = (rate - exact).abs();
        let z = if sigma > 0.0 {
            diff / sigma
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self { rounds, correct, rate, exact, sigma, z }
    }
}

/// Monte Carlo estimate of Bob's success rate, split into `chunks`
/// independent streams and compared with the exact value.
pub fn monte_carlo(
    tree: &ChainTree,
    rounds: usize,
    seed: u64,
    chunks: u64,
    forced: Option<ChainCase>,
) -> Result<MonteCarloSummary> {
    let chunks = chunks.max(1);
    let mut correct = 0;
    for chunk in 0..chunks {
        let share = rounds / chunks as usize + usize::from((chunk as usize) < rounds % chunks as usize);
        correct += simulate_rounds(tree, share, seed, chunk, forced)?;
    }
    Ok(MonteCarloSummary::new(rounds, correct, exact_rate(tree, forced)))
}

/// Exact success rate, conditioned on `forced` when given.
pub fn exact_rate(tree: &ChainTree, forced: Option<ChainCase>) -> f64 {
    match forced {
        None => tree.correct(),
        Some(case) => {
            let w = tree.probability_of(case);
            if w > 0.0 {
                tree.correct_in(case) / w
            } else {
                0.0
            }
        }
    }
}

