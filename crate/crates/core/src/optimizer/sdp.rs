use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::{paired_resource, port_label, ALICE};
use crate::error::{Error, Result};
use crate::tensor::linalg::{self, c, CMatrix};
use crate::tensor::{self, StateVector};

/// Which variables the program optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceMode {
    /// Alice's measurement only, for a given resource.
    Fixed,
    /// Measurement and resource together, the resource written as
    /// `(X (x) I)|Phi>` over `N` maximally entangled pairs.
    Joint,
}

/// Largest `2^n * dim(A)` accepted by default.
pub const DEFAULT_MAX_DIM: usize = 64;

/// The perfect-teleportation program for `n` qubits and `N` ports.
///
/// Variables `M_1..M_N` over `(a, A)` and `q_1..q_N`; constraints
/// `M_k >= 0`, `I - sum M_k >= 0` and, for every port `k`, operator
/// `X_beta` on `a` and `E_gamma` on `B_k`,
/// `Tr[M_k (X_beta (x) K_gamma)] = q_k Tr(E_gamma X_beta)` with
/// `K_gamma = Tr_B[(E_gamma on B_k) |xi><xi|]`. In joint mode `xi` is the
/// reference `|Phi>` and the rows constrain `(I (x) X†) M_k (I (x) X)`.
#[derive(Clone, Debug)]
pub struct PbtSdp {
    pub(crate) n: usize,
    pub(crate) ports: usize,
    pub(crate) mode: ResourceMode,
    pub(crate) resource: StateVector,
    pub(crate) alice_dim: usize,
    /// `2^n * dim(A)`.
    pub(crate) dim: usize,
    /// Flattened teleportation-constraint operators, one row each.
    pub(crate) g: DMatrix<f64>,
    /// Coefficient of `q_k` in each row, `-Tr(E_gamma X_beta)`.
    pub(crate) row_q: DVector<f64>,
    pub(crate) port_rows: Vec<std::ops::Range<usize>>,
    pub(crate) max_dim: usize,
}

impl PbtSdp {
    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn mode(&self) -> ResourceMode {
        self.mode
    }

    pub fn resource(&self) -> &StateVector {
        &self.resource
    }

    pub fn alice_dim(&self) -> usize {
        self.alice_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of real teleportation constraints.
    pub fn constraint_count(&self) -> usize {
        self.g.nrows()
    }

    pub(crate) fn port_dim(&self) -> usize {
        1 << self.n
    }

    /// Largest teleportation-constraint violation of `(M_k, q_k)`, `k >= 1`.
    pub fn teleportation_residual(&self, measurement: &[CMatrix], q: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.ports {
            let m = flatten(&measurement[k]);
            let range = self.port_rows[k].clone();
            let rows = self.g.rows(range.start, range.len()) * m + self.row_q.rows(range.start, range.len()) * q[k];
            worst = worst.max(rows.amax());
        }
        worst
    }
}

/// `{E_ll, (E_lm + E_ml)/sqrt 2, i(E_lm - E_ml)/sqrt 2}`: an orthonormal
/// basis of `d x d` Hermitian matrices.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for l in 0..d {
        let mut e = CMatrix::zeros(d, d);
        e[(l, l)] = linalg::ONE;
        out.push(e);
    }
    for l in 0..d {
        for m in l + 1..d {
            let mut sym = CMatrix::zeros(d, d);
            sym[(l, m)] = c(h, 0.0);
            sym[(m, l)] = c(h, 0.0);
            out.push(sym);
            let mut anti = CMatrix::zeros(d, d);
            anti[(l, m)] = c(0.0, h);
            anti[(m, l)] = c(0.0, -h);
            out.push(anti);
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub(crate) fn hermitian_coords(m: &CMatrix, out: &mut [f64]) {
    let d = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut i = 0;
    for l in 0..d {
        out[i] = m[(l, l)].re;
        i += 1;
    }
    for l in 0..d {
        for k in l + 1..d {
            out[i] = s * m[(l, k)].re;
            out[i + 1] = s * m[(l, k)].im;
            i += 2;
        }
    }
}

/// Inverse of [`hermitian_coords`].
pub(crate) fn from_hermitian_coords(v: &[f64], d: usize) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(d, d);
    let mut i = 0;
    for l in 0..d {
        m[(l, l)] = c(v[i], 0.0);
        i += 1;
    }
    for l in 0..d {
        for k in l + 1..d {
            let z = c(h * v[i], h * v[i + 1]);
            m[(l, k)] = z;
            m[(k, l)] = z.conj();
            i += 2;
        }
    }
    m
}

/// Real coordinates `[Re; Im]` whose dot product is `Re Tr(A† B)`.
pub(crate) fn flatten(m: &CMatrix) -> DVector<f64> {
    let len = m.len();
    DVector::from_fn(2 * len, |i, _| if i < len { m[i].re } else { m[i - len].im })
}

/// `Tr_a` of an operator on `(a, A)` with `a` first.
pub(crate) fn trace_input(m: &CMatrix, d: usize, alice: usize) -> CMatrix {
    CMatrix::from_fn(alice, alice, |i, j| (0..d).map(|x| m[(x * alice + i, x * alice + j)]).sum())
}

/// Fixed-resource program for a resource over `(A, B1..BN)`.
pub fn build_sdp(n: usize, resource: &StateVector) -> Result<PbtSdp> {
    build_sdp_with_limit(n, resource, ResourceMode::Fixed, DEFAULT_MAX_DIM)
}

/// Joint program over measurement and an `N`-port resource.
pub fn build_joint_sdp(n: usize, ports: usize) -> Result<PbtSdp> {
    build_joint_sdp_with_limit(n, ports, DEFAULT_MAX_DIM)
}

pub fn build_joint_sdp_with_limit(n: usize, ports: usize, max_dim: usize) -> Result<PbtSdp> {
    if n == 0 || n > 8 || ports == 0 {
        return Err(Error::InvalidProtocol(format!("need 1..=8 qubits and at least one port, got n={n}, N={ports}")));
    }
    let d = 1usize << n;
    // checked before building the reference state, which may be huge
    let dim = (d as u128).checked_pow(ports as u32 + 1).unwrap_or(u128::MAX);
    if dim > max_dim as u128 {
        return Err(Error::MemoryCap {
            layout: format!("(a:{d}, A:{d}^{ports})"),
            dim: usize::try_from(dim).unwrap_or(usize::MAX),
            cap: max_dim,
        });
    }
    let reference = paired_resource(ports, d)?;
    build_sdp_with_limit(n, &reference, ResourceMode::Joint, max_dim)
}

pub fn build_sdp_with_limit(n: usize, resource: &StateVector, mode: ResourceMode, max_dim: usize) -> Result<PbtSdp> {
    if n == 0 || n > 8 {
        return Err(Error::InvalidProtocol(format!("qubits per port must be in 1..=8, got {n}")));
    }
    let d = 1usize << n;
    let layout = resource.layout();
    let ports = layout.len().saturating_sub(1);
    if ports == 0 || layout.subsystems()[0].label != ALICE {
        return Err(Error::InvalidProtocol(format!("resource layout {layout} must be (A, B1..BN)")));
    }
    for j in 1..=ports {
        if layout.dim_of(&port_label(j))? != d {
            return Err(Error::InvalidProtocol(format!("port B{j} must have dimension {d}")));
        }
    }
    if !resource.is_normalized() {
        return Err(Error::InvalidProtocol("resource state is not normalized".into()));
    }
    let alice_dim = layout.subsystems()[0].dim;
    let dim = d * alice_dim;
    // the solver also works on a^(x)(N+1) pairs
    let reduced = (d as u128).checked_pow(ports as u32 + 1).unwrap_or(u128::MAX);
    if dim > max_dim || reduced > max_dim as u128 {
        return Err(Error::MemoryCap {
            layout: format!("(a:{d}, A:{alice_dim}) with {ports} ports"),
            dim: dim.max(usize::try_from(reduced).unwrap_or(usize::MAX)),
            cap: max_dim,
        });
    }

    let basis = hermitian_basis(d);
    let rows_per_port = basis.len() * basis.len();
    let total_rows = ports * rows_per_port;
    let mut g = DMatrix::zeros(total_rows, 2 * dim * dim);
    let mut row_q = DVector::zeros(total_rows);
    let mut port_rows = Vec::with_capacity(ports);
    let mut r = 0;
    for k in 1..=ports {
        let start = r;
        let bk = port_label(k);
        let rho = tensor::reduced_density(resource, &[ALICE, bk.as_str()])?;
        for e in &basis {
            let lifted = CMatrix::identity(alice_dim, alice_dim).kronecker(e);
            let k_gamma = linalg::hermitize(&trace_last(&(rho.entries() * lifted), alice_dim, d));
            for x in &basis {
                g.row_mut(r).copy_from(&flatten(&x.kronecker(&k_gamma)).transpose());
                row_q[r] = -(e * x).trace().re;
                r += 1;
            }
        }
        port_rows.push(start..r);
    }
    let sdp = PbtSdp { n, ports, mode, resource: resource.clone(), alice_dim, dim, g, row_q, port_rows, max_dim };
    let zeros = vec![CMatrix::zeros(dim, dim); ports];
    let residual = sdp.teleportation_residual(&zeros, &vec![0.0; ports]);
    if residual != 0.0 {
        return Err(Error::InvalidProtocol(format!("zero solution violates the constraints by {residual:.3e}")));
    }
    Ok(sdp)
}

/// `Tr_B` of an operator on `(A, B)` with `B` last.
fn trace_last(m: &CMatrix, alice: usize, b: usize) -> CMatrix {
    CMatrix::from_fn(alice, alice, |i, j| (0..b).map(|x| m[(i * b + x, j * b + x)]).sum())
}
