use crate::error::{Error, Result};
use crate::tensor::linalg::{self, c, CMatrix};
use crate::tensor::{CVector, HermitianMatrix, StateVector, SystemLayout};

/// Label of the unknown input system.
pub const INPUT: &str = "a";
/// Label of Alice's share of the resource (all her ancillas).
pub const ALICE: &str = "A";

/// Label of port `j` (1-based).
pub fn port_label(j: usize) -> String {
    format!("B{j}")
}

/// Default POVM tolerance: positivity and completeness within this.
pub const POVM_TOLERANCE: f64 = 1e-10;

/// A port-based teleportation protocol: `n` qubits per port, `N` ports, a
/// resource state over `(A, B1..BN)` and Alice's POVM `M_0..M_N` over `(a, A)`.
///
/// Outcome `k >= 1` announces port `k`; `k = 0` is failure.
#[derive(Clone, Debug)]
pub struct PbtProtocol {
    n: usize,
    ports: usize,
    resource: StateVector,
    povm: Vec<HermitianMatrix>,
    sqrt_povm: Vec<CMatrix>,
}

impl PbtProtocol {
    /// Validates the layout and POVM with the default tolerance.
    pub fn new(n: usize, resource: StateVector, povm: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerance(n, resource, povm, POVM_TOLERANCE)
    }

    pub fn with_tolerance(n: usize, resource: StateVector, povm: Vec<CMatrix>, tol: f64) -> Result<Self> {
        if n == 0 || n > 8 {
            return Err(Error::InvalidProtocol(format!("qubits per port must be in 1..=8, got {n}")));
        }
        let port_dim = 1usize << n;
        let layout = resource.layout();
        let ports = layout.len().checked_sub(1).filter(|&p| p >= 1).ok_or_else(|| {
            Error::InvalidProtocol(format!("resource layout {layout} needs A and at least one port"))
        })?;
        if layout.subsystems()[0].label != ALICE {
            return Err(Error::InvalidProtocol(format!("resource layout {layout} must start with `{ALICE}`")));
        }
        for (j, s) in layout.subsystems()[1..].iter().enumerate() {
            if s.label != port_label(j + 1) || s.dim != port_dim {
                return Err(Error::InvalidProtocol(format!(
                    "resource subsystem {} is `{}:{}`, expected `{}:{}`",
                    j + 2,
                    s.label,
                    s.dim,
                    port_label(j + 1),
                    port_dim
                )));
            }
        }
        if !resource.is_normalized() {
            return Err(Error::InvalidProtocol("resource state is not normalized".into()));
        }
        if povm.len() != ports + 1 {
            return Err(Error::InvalidProtocol(format!(
                "expected {} POVM elements M_0..M_{}, got {}",
                ports + 1,
                ports,
                povm.len()
            )));
        }
        let alice_dim = layout.subsystems()[0].dim;
        let measured = SystemLayout::new([(INPUT, port_dim), (ALICE, alice_dim)])?;
        let d = measured.total_dim();
        let mut elements = Vec::with_capacity(povm.len());
        let mut sum = CMatrix::zeros(d, d);
        for (k, m) in povm.into_iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::InvalidProtocol(format!(
                    "POVM element M_{k} is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let h = HermitianMatrix::new(measured.clone(), m).map_err(|e| {
                Error::InvalidProtocol(format!("POVM element M_{k} is not Hermitian: {e}"))
            })?;
            let lowest = h.min_eigenvalue();
            if lowest < -tol {
                return Err(Error::InvalidProtocol(format!(
                    "POVM positivity violated: M_{k} has eigenvalue {lowest:.3e}"
                )));
            }
            sum += h.entries();
            elements.push(h);
        }
        let defect = linalg::max_abs_diff(&sum, &CMatrix::identity(d, d));
        if defect > tol {
            return Err(Error::InvalidProtocol(format!(
                "POVM completeness violated: max |sum_k M_k - I| = {defect:.3e}"
            )));
        }
        let sqrt_povm = elements
            .iter()
            .map(|m| linalg::sqrt_psd(m.entries(), tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, ports, resource, povm: elements, sqrt_povm })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    /// `2^n`.
    pub fn port_dim(&self) -> usize {
        1 << self.n
    }

    pub fn alice_dim(&self) -> usize {
        self.resource.layout().subsystems()[0].dim
    }

    pub fn resource(&self) -> &StateVector {
        &self.resource
    }

    pub fn povm(&self) -> &[HermitianMatrix] {
        &self.povm
    }

    pub(crate) fn sqrt_povm(&self) -> &[CMatrix] {
        &self.sqrt_povm
    }

    pub fn port_labels(&self) -> Vec<String> {
        (1..=self.ports).map(port_label).collect()
    }

    pub fn input_layout(&self) -> SystemLayout {
        SystemLayout::single(INPUT, self.port_dim()).expect("nonzero dimension")
    }

    /// Layout `(a, A)` on which the POVM acts.
    pub fn measured_layout(&self) -> SystemLayout {
        self.povm[0].layout().clone()
    }
}

/// Canonical maximally entangled state of two `d`-dimensional systems.
pub fn maximally_entangled(left: &str, right: &str, d: usize) -> Result<StateVector> {
    let layout = SystemLayout::new([(left, d), (right, d)])?;
    let amp = c(1.0 / (d as f64).sqrt(), 0.0);
    let v = CVector::from_fn(d * d, |i, _| if i / d == i % d { amp } else { linalg::ZERO });
    StateVector::normalizing(layout, v)
}

/// Resource of `N` maximally entangled pairs `(A_j, B_j)` of dimension `d`,
/// with `A = A_1 .. A_N` merged into one subsystem (`A_1` most significant).
pub fn paired_resource(ports: usize, d: usize) -> Result<StateVector> {
    let alice = d.pow(ports as u32);
    let mut subsystems = vec![(ALICE.to_string(), alice)];
    subsystems.extend((1..=ports).map(|j| (port_label(j), d)));
    let layout = SystemLayout::new(subsystems)?;
    // A index and B1..BN index share the same digit string
    let amp = c(1.0 / (alice as f64).sqrt(), 0.0);
    let v = CVector::from_fn(alice * alice, |i, _| if i / alice == i % alice { amp } else { linalg::ZERO });
    StateVector::normalizing(layout, v)
}

/// Qubit protocol on `N` Bell pairs: Alice projects `(a, A_1)` onto the
/// Bell state (outcome 1), never announces ports `2..N`, and fails otherwise.
/// Teleports perfectly with success probability `1/4` for every `N`.
pub fn bell_pbt_protocol(ports: usize) -> Result<PbtProtocol> {
    if ports == 0 {
        return Err(Error::InvalidProtocol("need at least one port".into()));
    }
    let resource = paired_resource(ports, 2)?;
    let bell = maximally_entangled(INPUT, "A1", 2)?;
    let rest = 1usize << (ports - 1);
    let m1 = bell.projector().kronecker(&CMatrix::identity(rest, rest));
    let d = m1.nrows();
    let mut povm = vec![CMatrix::identity(d, d) - &m1, m1];
    povm.extend((2..=ports).map(|_| CMatrix::zeros(d, d)));
    PbtProtocol::new(1, resource, povm)
}
