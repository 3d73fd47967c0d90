//! Unitary-plus-pointer form of an operation, and the consequences forced on
//! any operation that returns its input intact on some outcomes.

use num_complex::Complex64;

use crate::engine::{port_label, PbtProtocol, ALICE, INPUT};
use crate::error::{Error, Result};
use crate::pauli::sample_haar_states;
use crate::report::AuditReport;
use crate::tensor::linalg::{self, CMatrix};
use crate::tensor::{self, CVector, StateVector, SystemLayout, UNITARY_TOLERANCE};
use crate::tolerances::Tolerances;

/// Label of the pointer system.
pub const POINTER: &str = "pi";
/// Label of the ancilla recording fine-grained failure outcomes.
pub const FAILURE_RECORD: &str = "f";

/// An operation `U` on `(a, b, pi)` with fixed ancilla and pointer starts.
/// Measuring `pi` in `pointer_basis` gives outcome `k`.
#[derive(Clone, Debug)]
pub struct PointerOperation {
    layout: SystemLayout,
    u: CMatrix,
    xi: StateVector,
    chi: StateVector,
    pointer_basis: Vec<CVector>,
}

/// Outcome `k` with its conditional state over `(a, b)`.
#[derive(Clone, Debug)]
pub struct BranchRecord {
    pub outcome: usize,
    pub probability: f64,
    /// `None` when the outcome is absent.
    pub state: Option<StateVector>,
}

impl PointerOperation {
    /// `layout` must start with `a` and end with `pi`; everything between is `b`.
    pub fn new(
        layout: SystemLayout,
        u: CMatrix,
        xi: StateVector,
        chi: StateVector,
        pointer_basis: Vec<CVector>,
    ) -> Result<Self> {
        let labels: Vec<&str> = layout.labels().collect();
        if labels.len() < 2 || labels[0] != INPUT || labels[labels.len() - 1] != POINTER {
            return Err(Error::InvalidLayout(format!("pointer operation layout {layout} must be (a, b.., pi)")));
        }
        let dim = layout.total_dim();
        if u.nrows() != dim || u.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: u.nrows() });
        }
        let defect = linalg::unitarity_defect(&u);
        if defect > UNITARY_TOLERANCE {
            return Err(Error::NotUnitary(defect));
        }
        let b_layout = layout.without(&[INPUT, POINTER])?;
        if xi.dim() != b_layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: b_layout.total_dim(), found: xi.dim() });
        }
        let pi_dim = layout.dim_of(POINTER)?;
        if chi.dim() != pi_dim {
            return Err(Error::DimensionMismatch { expected: pi_dim, found: chi.dim() });
        }
        for s in [&xi, &chi] {
            if !s.is_normalized() {
                return Err(Error::NotNormalized(s.norm()));
            }
        }
        if pointer_basis.len() != pi_dim || pointer_basis.iter().any(|v| v.len() != pi_dim) {
            return Err(Error::InvalidLayout(format!("pointer basis must have {pi_dim} vectors of length {pi_dim}")));
        }
        let gram = CMatrix::from_fn(pi_dim, pi_dim, |i, j| pointer_basis[i].dotc(&pointer_basis[j]));
        let defect = linalg::max_abs_diff(&gram, &CMatrix::identity(pi_dim, pi_dim));
        if defect > 1e-12 {
            return Err(Error::InvalidLayout(format!("pointer basis is not orthonormal (defect {defect:.3e})")));
        }
        let xi = xi.with_layout(b_layout)?;
        let chi = chi.with_layout(SystemLayout::single(POINTER, pi_dim)?)?;
        Ok(Self { layout, u, xi, chi, pointer_basis })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.u
    }

    pub fn xi(&self) -> &StateVector {
        &self.xi
    }

    pub fn chi(&self) -> &StateVector {
        &self.chi
    }

    pub fn pointer_basis(&self) -> &[CVector] {
        &self.pointer_basis
    }

    /// `N`, one less than the pointer dimension.
    pub fn ports(&self) -> usize {
        self.pointer_basis.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layout.subsystems()[0].dim
    }

    pub fn input_layout(&self) -> SystemLayout {
        SystemLayout::single(INPUT, self.input_dim()).expect("nonzero dimension")
    }

    /// Labels of `b` in layout order.
    pub fn ancilla_labels(&self) -> Vec<String> {
        self.xi.layout().labels().map(str::to_string).collect()
    }
}

/// Applies `U` to `|psi>|xi>|chi>` and projects the pointer on each basis state.
pub fn decompose_by_pointer(op: &PointerOperation, psi: &StateVector) -> Result<Vec<BranchRecord>> {
    decompose_with_cutoff(op, psi, crate::engine::BRANCH_CUTOFF)
}

pub fn decompose_with_cutoff(op: &PointerOperation, psi: &StateVector, cutoff: f64) -> Result<Vec<BranchRecord>> {
    if psi.dim() != op.input_dim() {
        return Err(Error::DimensionMismatch { expected: op.input_dim(), found: psi.dim() });
    }
    let start = tensor::tensor_states(&tensor::tensor_states(&psi.with_layout(op.input_layout())?, &op.xi)?, &op.chi)?;
    let evolved = StateVector::unnormalized(op.layout.clone(), &op.u * start.amplitudes())?;
    op.pointer_basis
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let cond = evolved.contract(&[POINTER], v)?;
            let q = cond.norm_sqr();
            Ok(if q < cutoff {
                BranchRecord { outcome: k, probability: 0.0, state: None }
            } else {
                BranchRecord { outcome: k, probability: q, state: cond.normalized() }
            })
        })
        .collect()
}

/// Pointer form of a PBT protocol using the Lüders instrument: Naimark
/// dilation of the POVM into `pi`, then a swap of `a` with port `k` when the
/// pointer reads `k >= 1`. The failure branch is already pure, so no
/// fine-grained ancilla is needed.
pub fn from_protocol(proto: &PbtProtocol) -> Result<PointerOperation> {
    let roots: Vec<CMatrix> = proto.povm().iter().map(|m| linalg::sqrt_psd(m.entries(), 1e-10)).collect::<Result<_>>()?;
    build_pointer_form(proto, &roots[1..], &roots[..1])
}

/// Like [`from_protocol`], with the failure outcome fine-grained into Kraus
/// operators `K_m` (`sum_m K_m† K_m = M_0`) recorded in an ancilla `f` that
/// becomes part of `b`.
pub fn from_protocol_fine_grained(proto: &PbtProtocol, failure_kraus: &[CMatrix]) -> Result<PointerOperation> {
    let d = proto.measured_layout().total_dim();
    let mut total = CMatrix::zeros(d, d);
    for k in failure_kraus {
        if k.nrows() != d || k.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: k.nrows() });
        }
        total += k.adjoint() * k;
    }
    let defect = linalg::max_abs_diff(&total, proto.povm()[0].entries());
    if defect > 1e-10 {
        return Err(Error::InvalidProtocol(format!("failure Kraus operators miss M_0 by {defect:.3e}")));
    }
    let roots: Vec<CMatrix> =
        proto.povm()[1..].iter().map(|m| linalg::sqrt_psd(m.entries(), 1e-10)).collect::<Result<_>>()?;
    build_pointer_form(proto, &roots, failure_kraus)
}

fn build_pointer_form(proto: &PbtProtocol, success: &[CMatrix], failure: &[CMatrix]) -> Result<PointerOperation> {
    let ports = proto.ports();
    let measured = proto.measured_layout();
    let d = measured.total_dim();
    let f_dim = failure.len();
    let pi_dim = ports + 1;

    // isometry |x>_{aA} -> sum_m K_m|x>|m>_f|0>_pi + sum_k sqrt(M_k)|x>|0>_f|k>_pi
    let local_dim = d * f_dim * pi_dim;
    let index = |x: usize, m: usize, k: usize| (x * f_dim + m) * pi_dim + k;
    let fixed: Vec<(usize, CVector)> = (0..d)
        .map(|x| {
            let mut col = CVector::zeros(local_dim);
            for (m, km) in failure.iter().enumerate() {
                for y in 0..d {
                    col[index(y, m, 0)] = km[(y, x)];
                }
            }
            for (k, root) in success.iter().enumerate() {
                for y in 0..d {
                    col[index(y, 0, k + 1)] = root[(y, x)];
                }
            }
            (index(x, 0, 0), col)
        })
        .collect();
    let v = linalg::complete_unitary(local_dim, &fixed)?;

    let mut subsystems: Vec<(String, usize)> = vec![(INPUT.into(), proto.port_dim()), (ALICE.into(), proto.alice_dim())];
    subsystems.extend(proto.port_labels().into_iter().map(|l| (l, proto.port_dim())));
    if f_dim > 1 {
        subsystems.push((FAILURE_RECORD.into(), f_dim));
    }
    subsystems.push((POINTER.into(), pi_dim));
    let layout = SystemLayout::new(subsystems)?;
    let targets: Vec<&str> =
        if f_dim > 1 { vec![INPUT, ALICE, FAILURE_RECORD, POINTER] } else { vec![INPUT, ALICE, POINTER] };
    let dilated = tensor::embed_operator(&v, &targets, &layout)?;

    // controlled swap of a and B_k on pointer k >= 1, as a row permutation
    let dims: Vec<usize> = layout.subsystems().iter().map(|s| s.dim).collect();
    let pi_pos = layout.position(POINTER)?;
    let a_pos = layout.position(INPUT)?;
    let port_pos: Vec<usize> = (1..=ports).map(|k| layout.position(&port_label(k))).collect::<Result<_>>()?;
    let dim = layout.total_dim();
    let mut u = CMatrix::zeros(dim, dim);
    for row in 0..dim {
        let mut digits = to_digits(row, &dims);
        let k = digits[pi_pos];
        if k >= 1 {
            digits.swap(a_pos, port_pos[k - 1]);
        }
        u.set_row(from_digits(&digits, &dims), &dilated.row(row));
    }

    let b_layout = layout.without(&[INPUT, POINTER])?;
    let mut xi = proto.resource().clone();
    if f_dim > 1 {
        let record = StateVector::basis(SystemLayout::single(FAILURE_RECORD, f_dim)?, 0)?;
        xi = tensor::tensor_states(&xi, &record)?;
    }
    let xi = xi.with_layout(b_layout)?;
    let chi = StateVector::basis(SystemLayout::single(POINTER, pi_dim)?, 0)?;
    let basis = (0..pi_dim).map(|k| unit(pi_dim, k)).collect();
    PointerOperation::new(layout, u, xi, chi, basis)
}

fn unit(dim: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[k] = linalg::ONE;
    v
}

fn to_digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for (slot, d) in digits.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    digits
}

fn from_digits(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (x, d)| acc * d + x)
}

/// Bell-pair protocol in pointer form, with its three failing Bell outcomes
/// on `(a, A_1)` kept apart in the failure record.
pub fn bell_pointer_operation(ports: usize) -> Result<PointerOperation> {
    let proto = crate::engine::bell_pbt_protocol(ports)?;
    let bell = crate::engine::maximally_entangled(INPUT, "A1", 2)?;
    let rest = CMatrix::identity(1 << (ports - 1), 1 << (ports - 1));
    let kraus: Vec<CMatrix> = (1..=3u8)
        .map(|code| {
            let v = crate::pauli::sigma(code).kronecker(&CMatrix::identity(2, 2)) * bell.amplitudes();
            (&v * v.adjoint()).kronecker(&rest)
        })
        .collect();
    from_protocol_fine_grained(&proto, &kraus)
}

/// Inputs on which the hypothesis is checked: the computational basis and
/// every pair superposition `(e_l + e_m)/sqrt 2`, `(e_l + i e_m)/sqrt 2`.
pub fn hypothesis_inputs(layout: &SystemLayout) -> Result<Vec<StateVector>> {
    let d = layout.total_dim();
    let mut out: Vec<StateVector> = (0..d).map(|l| StateVector::basis(layout.clone(), l)).collect::<Result<_>>()?;
    for l in 0..d {
        for m in l + 1..d {
            for phase in [linalg::ONE, linalg::I] {
                let mut v = CVector::zeros(d);
                v[l] = linalg::ONE;
                v[m] = phase;
                out.push(StateVector::normalizing(layout.clone(), v)?);
            }
        }
    }
    Ok(out)
}

/// Worst deviations of a success branch from "input intact and factorized".
fn hypothesis_defects(op: &PointerOperation, record: &BranchRecord, psi: &StateVector) -> Result<(f64, f64)> {
    let Some(state) = &record.state else { return Ok((0.0, 0.0)) };
    let rho_a = tensor::reduced_density(state, &[INPUT])?;
    let intact = linalg::max_abs_diff(rho_a.entries(), &psi.projector());
    let b_labels = op.ancilla_labels();
    let b_refs: Vec<&str> = b_labels.iter().map(String::as_str).collect();
    let purity = if b_refs.is_empty() {
        1.0
    } else {
        let rho_b = tensor::reduced_density(state, &b_refs)?;
        rho_b.purity()
    };
    Ok((intact, 1.0 - purity))
}

/// `(<psi|_a (x) I) |cond>`, the state left in `b`.
fn residual(record: &BranchRecord, psi: &StateVector) -> Result<Option<StateVector>> {
    record.state.as_ref().map(|s| s.contract(&[INPUT], psi.amplitudes())).transpose()
}

/// Checks the no-cloning consequences on `samples` Haar pairs from `seed`:
/// input-independent success probabilities and residual states, and
/// failure states that preserve inner products. The hypothesis (success
/// branches return the input intact and factorized) is verified first.
pub fn verify_theorem(op: &PointerOperation, samples: usize, seed: u64, tol: &Tolerances) -> Result<AuditReport> {
    let mut report = AuditReport::new("no-cloning consequences").with_seed(seed);
    let layout = op.input_layout();
    let sampled = sample_haar_states(&layout, 2 * samples.max(1), seed)?;
    let mut inputs = hypothesis_inputs(&layout)?;
    let basis_count = layout.total_dim();
    inputs.extend(sampled.iter().cloned());

    let runs = inputs
        .iter()
        .map(|psi| decompose_with_cutoff(op, psi, tol.branch_cutoff))
        .collect::<Result<Vec<_>>>()?;

    let (mut intact, mut mixed, mut leak): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (psi, run) in inputs.iter().zip(&runs) {
        let total: f64 = run.iter().map(|r| r.probability).sum();
        leak = leak.max((total - 1.0).abs());
        for record in run.iter().filter(|r| r.outcome >= 1) {
            let (i, m) = hypothesis_defects(op, record, psi)?;
            intact = intact.max(i);
            mixed = mixed.max(m);
        }
    }
    report.at_most("pointer probabilities sum to 1", "distribution", leak, tol.equality);
    report.metric("hypothesis: worst input deviation", intact);
    report.metric("hypothesis: worst ancilla impurity", mixed);
    if intact > tol.purity || mixed > tol.purity {
        report.mark_not_applicable(format!(
            "hypothesis not satisfied: success branches deviate from the intact input by {intact:.3e} \
             (ancilla impurity {mixed:.3e}); conclusions not checked"
        ));
        return Ok(report);
    }

    // (i) and (ii) over every input; (iii) over the sampled pairs and basis pairs
    for k in 0..=op.ports() {
        let qs: Vec<f64> = runs.iter().map(|r| r[k].probability).collect();
        report.at_most(&format!("q_{k} spread"), "Thm", crate::engine::spread(&qs), tol.equality);
    }
    for k in 1..=op.ports() {
        let residuals: Vec<StateVector> = inputs
            .iter()
            .zip(&runs)
            .map(|(psi, run)| residual(&run[k], psi))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        if residuals.is_empty() {
            report.note(format!("outcome {k} absent for every input"));
            continue;
        }
        let mut min_overlap: f64 = 1.0;
        for (x, r1) in residuals.iter().enumerate() {
            for r2 in &residuals[x + 1..] {
                min_overlap = min_overlap.min(r1.overlap(r2)?);
            }
        }
        report.at_least(&format!("R_{k} pairwise fidelity"), "Thm", min_overlap, 1.0 - tol.fidelity);
    }

    let failure: Vec<Option<&StateVector>> = runs.iter().map(|r| r[0].state.as_ref()).collect();
    let mut pairs: Vec<(usize, usize)> = (0..basis_count).flat_map(|l| (l + 1..basis_count).map(move |m| (l, m))).collect();
    let offset = inputs.len() - sampled.len();
    pairs.extend((0..sampled.len() / 2).map(|s| (offset + 2 * s, offset + 2 * s + 1)));
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (x, y) in pairs {
        let (Some(fx), Some(fy)) = (failure[x], failure[y]) else { continue };
        let lhs: Complex64 = fx.inner(fy)?;
        let rhs: Complex64 = inputs[x].inner(&inputs[y])?;
        worst = worst.max((lhs - rhs).norm());
        compared += 1;
    }
    if compared == 0 {
        report.note("failure outcome absent; inner-product check skipped");
    } else {
        report.at_most("failure-state inner product deviation", "Thm", worst, tol.overlap);
    }
    Ok(report)
}

/// A pointer operation that copies `<0|psi>`-dependence into the pointer:
/// CNOT from `a` to `pi`, ancilla untouched.
pub fn cheating_cloner() -> Result<PointerOperation> {
    let layout = SystemLayout::new([(INPUT, 2), ("b", 2), (POINTER, 2)])?;
    let cnot = CMatrix::from_fn(4, 4, |r, col| {
        let target = if col >= 2 { col ^ 1 } else { col };
        if r == target { linalg::ONE } else { linalg::ZERO }
    });
    let u = tensor::embed_operator(&cnot, &[INPUT, POINTER], &layout)?;
    let xi = StateVector::basis(SystemLayout::single("b", 2)?, 0)?;
    let chi = StateVector::basis(SystemLayout::single(POINTER, 2)?, 0)?;
    PointerOperation::new(layout, u, xi, chi, vec![unit(2, 0), unit(2, 1)])
}

/// Identity on `(a, b, pi)` with a qubit ancilla and a pointer of dimension `N + 1`.
pub fn identity_operation(input_dim: usize, ports: usize) -> Result<PointerOperation> {
    let layout = SystemLayout::new([(INPUT, input_dim), ("b", 2), (POINTER, ports + 1)])?;
    let dim = layout.total_dim();
    let xi = StateVector::basis(SystemLayout::single("b", 2)?, 0)?;
    let chi = StateVector::basis(SystemLayout::single(POINTER, ports + 1)?, 0)?;
    let basis = (0..=ports).map(|k| unit(ports + 1, k)).collect();
    PointerOperation::new(layout, CMatrix::identity(dim, dim), xi, chi, basis)
}
