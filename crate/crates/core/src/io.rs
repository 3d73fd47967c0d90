//! JSON interchange for protocols, primed protocols and pointer operations.
//!
//! Complex numbers are `[re, im]` pairs; matrices are flat row-major lists of
//! pairs. A protocol document looks like
//!
//! ```json
//! {"version": 1, "n": 1, "N": 2, "dims": {"a": 2, "A": 4, "B": 2},
//!  "resource": [[0.5, 0.0], ...], "povm": [[[1.0, 0.0], ...], ...]}
//! ```
//!
//! with the resource over `(A, B1..BN)` and `M_0..M_N` over `(a, A)`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engine::{port_label, PbtProtocol, ALICE, INPUT};
use crate::error::{Error, Result};
use crate::no_cloning::{PointerOperation, POINTER};
use crate::pauli::pauli_count;
use crate::primed::{build_primed, PrimedProtocol, TWIRL};
use crate::tensor::linalg::{c, CMatrix};
use crate::tensor::{CVector, StateVector, SystemLayout};

pub const FORMAT_VERSION: u32 = 1;

pub type Pair = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub a: usize,
    #[serde(rename = "A")]
    pub alice: usize,
    #[serde(rename = "B")]
    pub port: usize,
}

/// The twirl ancilla of a primed protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AncillaInfo {
    pub label: String,
    pub dim: usize,
    /// How the ancilla index maps to Pauli operators.
    pub ordering: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDocument {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "N")]
    pub ports: usize,
    pub dims: Dims,
    pub resource: Vec<Pair>,
    pub povm: Vec<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub primed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancilla: Option<AncillaInfo>,
    /// Provenance written by the command-line tool; ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

/// A subsystem of the `b` register of a pointer operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledDim {
    pub label: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerDims {
    pub a: usize,
    pub b: Vec<LabeledDim>,
    pub pi: usize,
}

/// `U` on `(a, b.., pi)` with start states `xi` on `b` and `chi` on `pi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerDocument {
    pub version: u32,
    #[serde(rename = "N")]
    pub ports: usize,
    pub dims: PointerDims,
    pub resource: Vec<Pair>,
    pub chi: Vec<Pair>,
    pub unitary: Vec<Pair>,
    /// Defaults to the standard basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_basis: Option<Vec<Vec<Pair>>>,
}

fn format_error(source: &str, field: &str, message: impl std::fmt::Display) -> Error {
    Error::Format { path: source.to_string(), message: format!("field `{field}`: {message}") }
}

/// Deserializes `text`, reporting the JSON path of the first bad field.
pub fn parse<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        format_error(source, &field, e.into_inner())
    })
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Format { path: path.display().to_string(), message: e.to_string() })
}

pub fn to_pairs(values: impl IntoIterator<Item = num_complex::Complex64>) -> Vec<Pair> {
    values.into_iter().map(|z| [z.re, z.im]).collect()
}

fn matrix_pairs(m: &CMatrix) -> Vec<Pair> {
    let (r, cols) = m.shape();
    (0..r).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| [m[(i, j)].re, m[(i, j)].im]).collect()
}

fn vector(pairs: &[Pair], len: usize, source: &str, field: &str) -> Result<CVector> {
    if pairs.len() != len {
        return Err(format_error(source, field, format!("expected {len} entries, found {}", pairs.len())));
    }
    if let Some(i) = pairs.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(format_error(source, &format!("{field}[{i}]"), "non-finite number"));
    }
    Ok(CVector::from_iterator(len, pairs.iter().map(|p| c(p[0], p[1]))))
}

fn matrix(pairs: &[Pair], dim: usize, source: &str, field: &str) -> Result<CMatrix> {
    let v = vector(pairs, dim * dim, source, field)?;
    Ok(CMatrix::from_row_slice(dim, dim, v.as_slice()))
}

pub fn protocol_document(proto: &PbtProtocol) -> ProtocolDocument {
    ProtocolDocument {
        version: FORMAT_VERSION,
        n: proto.qubits(),
        ports: proto.ports(),
        dims: Dims { a: proto.port_dim(), alice: proto.alice_dim(), port: proto.port_dim() },
        resource: to_pairs(proto.resource().amplitudes().iter().copied()),
        povm: proto.povm().iter().map(|m| matrix_pairs(m.entries())).collect(),
        primed: false,
        ancilla: None,
        manifest: None,
    }
}

/// Base protocol JSON with `primed: true` and the twirl ancilla described.
pub fn primed_document(p: &PrimedProtocol) -> ProtocolDocument {
    let mut doc = protocol_document(p.base());
    doc.primed = true;
    doc.ancilla = Some(AncillaInfo {
        label: TWIRL.to_string(),
        dim: p.ancilla_dim(),
        ordering: "index l-1 in base 4, most significant digit on qubit 1, digits 0..3 = I, X, Y, Z".into(),
    });
    doc
}

/// Validates a document and builds the protocol it describes. Primed
/// documents yield their base protocol; see [`primed_from_document`].
pub fn protocol_from_document(doc: &ProtocolDocument, source: &str) -> Result<PbtProtocol> {
    if doc.version != FORMAT_VERSION {
        return Err(format_error(source, "version", format!("unsupported version {}", doc.version)));
    }
    if doc.n == 0 || doc.n > 8 {
        return Err(format_error(source, "n", format!("must be in 1..=8, got {}", doc.n)));
    }
    if doc.ports == 0 {
        return Err(format_error(source, "N", "must be at least 1"));
    }
    let d = 1usize << doc.n;
    if doc.dims.a != d {
        return Err(format_error(source, "dims.a", format!("must be 2^n = {d}, got {}", doc.dims.a)));
    }
    if doc.dims.port != d {
        return Err(format_error(source, "dims.B", format!("must be 2^n = {d}, got {}", doc.dims.port)));
    }
    if doc.dims.alice == 0 {
        return Err(format_error(source, "dims.A", "must be positive"));
    }
    let resource_dim = d
        .checked_pow(doc.ports as u32)
        .and_then(|b| b.checked_mul(doc.dims.alice))
        .ok_or_else(|| format_error(source, "N", "resource dimension overflows"))?;
    let mut subsystems = vec![(ALICE.to_string(), doc.dims.alice)];
    subsystems.extend((1..=doc.ports).map(|j| (port_label(j), d)));
    let layout = SystemLayout::new(subsystems)?;
    let amps = vector(&doc.resource, resource_dim, source, "resource")?;
    let resource = StateVector::new(layout, amps).map_err(|e| format_error(source, "resource", e))?;
    if doc.povm.len() != doc.ports + 1 {
        return Err(format_error(
            source,
            "povm",
            format!("expected {} elements M_0..M_N, found {}", doc.ports + 1, doc.povm.len()),
        ));
    }
    let dim = d * doc.dims.alice;
    let povm = doc
        .povm
        .iter()
        .enumerate()
        .map(|(k, m)| matrix(m, dim, source, &format!("povm[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    PbtProtocol::new(doc.n, resource, povm).map_err(|e| format_error(source, "povm", e))
}

pub fn primed_from_document(doc: &ProtocolDocument, source: &str) -> Result<PrimedProtocol> {
    let base = protocol_from_document(doc, source)?;
    if let Some(info) = &doc.ancilla {
        let expected = pauli_count(doc.n)?;
        if info.dim != expected {
            return Err(format_error(source, "ancilla.dim", format!("must be 4^n = {expected}, got {}", info.dim)));
        }
    }
    build_primed(&base)
}

pub fn parse_protocol(text: &str, source: &str) -> Result<ProtocolDocument> {
    parse(text, source)
}

pub fn read_protocol(path: &Path) -> Result<(ProtocolDocument, PbtProtocol)> {
    let source = path.display().to_string();
    let doc = parse_protocol(&read_file(path)?, &source)?;
    let proto = protocol_from_document(&doc, &source)?;
    Ok((doc, proto))
}

pub fn pointer_document(op: &PointerOperation) -> PointerDocument {
    let b = op
        .xi()
        .layout()
        .subsystems()
        .iter()
        .map(|s| LabeledDim { label: s.label.clone(), dim: s.dim })
        .collect();
    PointerDocument {
        version: FORMAT_VERSION,
        ports: op.ports(),
        dims: PointerDims { a: op.input_dim(), b, pi: op.ports() + 1 },
        resource: to_pairs(op.xi().amplitudes().iter().copied()),
        chi: to_pairs(op.chi().amplitudes().iter().copied()),
        unitary: matrix_pairs(op.unitary()),
        pointer_basis: Some(op.pointer_basis().iter().map(|v| to_pairs(v.iter().copied())).collect()),
    }
}

pub fn pointer_from_document(doc: &PointerDocument, source: &str) -> Result<PointerOperation> {
    if doc.version != FORMAT_VERSION {
        return Err(format_error(source, "version", format!("unsupported version {}", doc.version)));
    }
    if doc.dims.pi != doc.ports + 1 {
        return Err(format_error(source, "dims.pi", format!("must be N + 1 = {}", doc.ports + 1)));
    }
    let mut subsystems = vec![(INPUT.to_string(), doc.dims.a)];
    subsystems.extend(doc.dims.b.iter().map(|s| (s.label.clone(), s.dim)));
    subsystems.push((POINTER.to_string(), doc.dims.pi));
    let layout = SystemLayout::new(subsystems).map_err(|e| format_error(source, "dims", e))?;
    let b_layout = layout.without(&[INPUT, POINTER])?;
    let xi = vector(&doc.resource, b_layout.total_dim(), source, "resource")?;
    let xi = StateVector::new(b_layout, xi).map_err(|e| format_error(source, "resource", e))?;
    let pi = SystemLayout::single(POINTER, doc.dims.pi)?;
    let chi = StateVector::new(pi, vector(&doc.chi, doc.dims.pi, source, "chi")?)
        .map_err(|e| format_error(source, "chi", e))?;
    let u = matrix(&doc.unitary, layout.total_dim(), source, "unitary")?;
    let basis = match &doc.pointer_basis {
        Some(vs) => vs
            .iter()
            .enumerate()
            .map(|(i, v)| vector(v, doc.dims.pi, source, &format!("pointer_basis[{i}]")))
            .collect::<Result<Vec<_>>>()?,
        None => (0..doc.dims.pi)
            .map(|i| CVector::from_fn(doc.dims.pi, |r, _| if r == i { c(1.0, 0.0) } else { c(0.0, 0.0) }))
            .collect(),
    };
    PointerOperation::new(layout, u, xi, chi, basis).map_err(|e| format_error(source, "unitary", e))
}

pub fn read_pointer(path: &Path) -> Result<PointerOperation> {
    let source = path.display().to_string();
    let doc: PointerDocument = parse(&read_file(path)?, &source)?;
    pointer_from_document(&doc, &source)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::bell_pbt_protocol;
    use crate::no_cloning::bell_pointer_operation;
    use crate::tensor::linalg::max_abs_diff;

    #[test]
    fn protocol_round_trip() {
        let proto = bell_pbt_protocol(2).unwrap();
        let text = to_json(&protocol_document(&proto)).unwrap();
        let doc = parse_protocol(&text, "mem").unwrap();
        let back = protocol_from_document(&doc, "mem").unwrap();
        assert_eq!(back.ports(), 2);
        for (a, b) in proto.povm().iter().zip(back.povm()) {
            assert_eq!(max_abs_diff(a.entries(), b.entries()), 0.0);
        }
        assert_eq!(back.resource().amplitudes(), proto.resource().amplitudes());
    }

    #[test]
    fn matrices_are_row_major() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 2.0);
        assert_eq!(matrix_pairs(&m)[1], [1.0, 2.0]);
        assert_eq!(matrix(&matrix_pairs(&m), 2, "", "").unwrap(), m);
    }

    #[test]
    fn malformed_json_names_field() {
        let proto = bell_pbt_protocol(1).unwrap();
        let mut value = serde_json::to_value(protocol_document(&proto)).unwrap();
        value["dims"]["A"] = serde_json::json!("two");
        let err = parse_protocol(&value.to_string(), "p.json").unwrap_err().to_string();
        assert!(err.contains("p.json") && err.contains("dims.A"), "{err}");

        let mut doc = protocol_document(&proto);
        doc.povm[1].pop();
        let err = protocol_from_document(&doc, "p.json").unwrap_err().to_string();
        assert!(err.contains("povm[1]"), "{err}");
    }

    #[test]
    fn broken_completeness_is_named() {
        let proto = bell_pbt_protocol(1).unwrap();
        let mut doc = protocol_document(&proto);
        for i in 0..4 {
            doc.povm[0][i * 4 + i][0] += 0.01;
        }
        let err = protocol_from_document(&doc, "p.json").unwrap_err().to_string();
        assert!(err.contains("completeness"), "{err}");
    }

    #[test]
    fn primed_flag_round_trips() {
        let primed = build_primed(&bell_pbt_protocol(1).unwrap()).unwrap();
        let doc = primed_document(&primed);
        let text = to_json(&doc).unwrap();
        assert!(text.contains("\"primed\": true") && text.contains("a'"));
        let back = primed_from_document(&parse_protocol(&text, "mem").unwrap(), "mem").unwrap();
        assert_eq!(back.ancilla_dim(), 4);
        let plain = to_json(&protocol_document(primed.base())).unwrap();
        assert!(!plain.contains("primed"));
    }

    #[test]
    fn pointer_round_trip() {
        let op = bell_pointer_operation(2).unwrap();
        let text = to_json(&pointer_document(&op)).unwrap();
        let doc: PointerDocument = parse(&text, "mem").unwrap();
        let back = pointer_from_document(&doc, "mem").unwrap();
        assert!(max_abs_diff(back.unitary(), op.unitary()) < 1e-15, "{}", max_abs_diff(back.unitary(), op.unitary()));
        assert_eq!(back.ancilla_labels(), op.ancilla_labels());
    }
}
