use num_complex::Complex64;
use proptest::prelude::*;

use super::linalg::{c, CMatrix, ONE, ZERO};
use super::*;
use crate::pauli::{random_density_with, random_hermitian_with, random_unitary_with, rng_from_seed, haar_state_with, sigma};

fn qubit(label: &str) -> SystemLayout {
    SystemLayout::single(label, 2).unwrap()
}

fn ket(label: &str, amps: &[Complex64]) -> StateVector {
    StateVector::from_slice(SystemLayout::single(label, amps.len()).unwrap(), amps).unwrap()
}



fn bell(a: &str, b: &str) -> StateVector {
    let s = 0.5f64.sqrt();
    StateVector::from_slice(
        SystemLayout::new([(a, 2), (b, 2)]).unwrap(),
        &[c(s, 0.0), ZERO, ZERO, c(s, 0.0)],
    )
    .unwrap()
}

#[test]
fn product_of_basis_states() {
    let out = tensor_product(&[Factor::State(ket("a", &[ONE, ZERO])), Factor::State(ket("b", &[ONE, ZERO]))]).unwrap();
    let Factor::State(s) = out else { panic!("expected a state") };
    assert_eq!(s.amplitudes().as_slice(), &[ONE, ZERO, ZERO, ZERO]);
    assert_eq!(s.layout().labels().collect::<Vec<_>>(), vec!["a", "b"]);
}

#[test]
fn product_matches_index_summation_oracle() {
    let s = 0.5f64.sqrt();
    let left = [c(s, 0.0), c(s, 0.0)];
    let right = [ZERO, ONE];
    // oracle: out[i * d_r + j] = left[i] * right[j]
    let mut expected = vec![ZERO; 4];
    for i in 0..2 {
        for j in 0..2 {
            expected[i * 2 + j] = left[i] * right[j];
        }
    }
    let got = tensor_states(&ket("a", &left), &ket("b", &right)).unwrap();
    for (g, e) in got.amplitudes().iter().zip(&expected) {
        assert!((g - e).norm() < 1e-15);
    }
    assert!((got.amplitudes()[1].re - s).abs() < 1e-15 && (got.amplitudes()[3].re - s).abs() < 1e-15);
}

#[test]
fn mixed_kinds_are_rejected() {
    let err = tensor_product(&[
        Factor::State(ket("a", &[ONE, ZERO])),
        Factor::Operator(HermitianMatrix::identity(qubit("b"))),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::KindMismatch(_)));
    assert!(tensor_product(&[]).is_err());
}

#[test]
fn tracing_out_maximally_mixed_factor_is_identity_round_trip() {
    let mut rng = rng_from_seed(3);
    let rho = random_density_with(&mut rng, qubit("a"));
    let joint = tensor_operators(&rho, &HermitianMatrix::maximally_mixed(qubit("b"))).unwrap();
    let back = partial_trace(&joint, &["a"]).unwrap();
    assert!(back.max_diff(&rho).unwrap() < 1e-15);
}

#[test]
fn partial_trace_of_product_state() {
    let psi = ket("a", &[c(0.6, 0.0), c(0.0, 0.8)]);
    let phi = ket("b", &[c(0.8, 0.0), c(-0.6, 0.0)]);
    let joint = density(&tensor_states(&psi, &phi).unwrap());
    let red = partial_trace(&joint, &["a"]).unwrap();
    assert!(linalg::max_abs_diff(red.entries(), &psi.projector()) < 1e-15);
}

#[test]
fn bell_marginal_is_maximally_mixed() {
    let red = partial_trace(&density(&bell("a", "b")), &["a"]).unwrap();
    assert!(red.max_diff(&HermitianMatrix::maximally_mixed(qubit("a"))).unwrap() < 1e-15);
}

#[test]
fn partial_trace_matches_naive_double_sum() {
    let mut rng = rng_from_seed(11);
    let layout = SystemLayout::new([("a", 2), ("b", 2), ("c", 2)]).unwrap();
    let rho = random_density_with(&mut rng, layout);
    let red = partial_trace(&rho, &["a", "c"]).unwrap();
    // oracle: out[(a,c),(a',c')] = sum_b rho[(a,b,c),(a',b,c')]
    let e = rho.entries();
    for a in 0..2 {
        for cc in 0..2 {
            for a2 in 0..2 {
                for c2 in 0..2 {
                    let mut acc = ZERO;
                    for b in 0..2 {
                        acc += e[(a * 4 + b * 2 + cc, a2 * 4 + b * 2 + c2)];
                    }
                    assert!((red.entries()[(a * 2 + cc, a2 * 2 + c2)] - acc).norm() < 1e-14);
                }
            }
        }
    }
    assert_eq!(red.layout().labels().collect::<Vec<_>>(), vec!["a", "c"]);
}

#[test]
fn partial_trace_unknown_label() {
    let rho = HermitianMatrix::identity(qubit("a"));
    assert!(matches!(partial_trace(&rho, &["q"]), Err(Error::UnknownLabel(_))));
}

#[test]
fn apply_identity_and_flip() {
    let state = tensor_states(&ket("a", &[ONE, ZERO]), &ket("b", &[ONE, ZERO])).unwrap();
    let same = apply_on_subsystems(&state, &CMatrix::identity(2, 2), &["b"]).unwrap();
    assert_eq!(same.amplitudes(), state.amplitudes());
    let flipped = apply_on_subsystems(&state, &sigma(1), &["a"]).unwrap();
    assert_eq!(flipped.amplitudes().as_slice(), &[ZERO, ZERO, ONE, ZERO]);
}

#[test]
fn apply_matches_explicit_kronecker() {
    let mut rng = rng_from_seed(5);
    let layout = SystemLayout::new([("q1", 2), ("q2", 2), ("q3", 2)]).unwrap();
    let state = haar_state_with(&mut rng, layout).unwrap();
    let u = random_unitary_with(&mut rng, 2);
    let id = CMatrix::identity(2, 2);
    let full = id.kronecker(&u).kronecker(&id);
    let expected = &full * state.amplitudes();
    let got = apply_on_subsystems(&state, &u, &["q2"]).unwrap();
    assert!((got.amplitudes() - expected).norm() < 1e-14);
    assert!((got.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn apply_rejects_non_unitary() {
    let state = ket("a", &[ONE, ZERO]);
    let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
    assert!(matches!(apply_on_subsystems(&state, &m, &["a"]), Err(Error::NotUnitary(_))));
}

#[test]
fn apply_respects_target_order() {
    let mut rng = rng_from_seed(8);
    let layout = SystemLayout::new([("x", 2), ("y", 3)]).unwrap();
    let state = haar_state_with(&mut rng, layout).unwrap();
    let u = random_unitary_with(&mut rng, 6);
    // u on (y, x) equals swap-conjugated u on (x, y)
    let got = apply_on_subsystems(&state, &u, &["y", "x"]).unwrap();
    let full = embed_operator(&u, &["y", "x"], state.layout()).unwrap();
    assert!((got.amplitudes() - full * state.amplitudes()).norm() < 1e-13);
}

#[test]
fn schmidt_of_bell_and_product() {
    let s = schmidt_decompose(&bell("a", "b"), &["a"]).unwrap();
    let h = 0.5f64.sqrt();
    assert!((s.coefficients[0] - h).abs() < 1e-14 && (s.coefficients[1] - h).abs() < 1e-14);

    let prod = tensor_states(&ket("a", &[c(0.6, 0.0), c(0.8, 0.0)]), &ket("b", &[ONE, ZERO])).unwrap();
    let s = schmidt_decompose(&prod, &["a"]).unwrap();
    assert!((s.coefficients[0] - 1.0).abs() < 1e-14);
    assert!(s.coefficients[1].abs() < 1e-14);
}

#[test]
fn schmidt_coefficients_match_reduced_spectrum() {
    let mut rng = rng_from_seed(21);
    let layout = SystemLayout::new([("l", 3), ("r", 3)]).unwrap();
    let state = haar_state_with(&mut rng, layout).unwrap();
    let s = schmidt_decompose(&state, &["l"]).unwrap();
    // oracle: singular values are square roots of the reduced spectrum
    let mut spectrum: Vec<f64> = reduced_density(&state, &["l"]).unwrap().eigenvalues();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    for (coef, lambda) in s.coefficients.iter().zip(spectrum) {
        assert!((coef - lambda.max(0.0).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn schmidt_is_deterministic_under_degeneracy() {
    let a = schmidt_decompose(&bell("a", "b"), &["a"]).unwrap();
    let b = schmidt_decompose(&bell("a", "b"), &["a"]).unwrap();
    for (x, y) in a.left.iter().zip(&b.left) {
        assert_eq!(x.amplitudes(), y.amplitudes());
    }
    // first non-negligible amplitude of each left vector is real positive
    for l in &a.left {
        let pivot = l.amplitudes().iter().find(|z| z.norm() > 1e-12).unwrap();
        assert!(pivot.im.abs() < 1e-14 && pivot.re > 0.0);
    }
}

#[test]
fn psd_projection_cases() {
    let layout = qubit("a");
    let rho = HermitianMatrix::maximally_mixed(layout.clone());
    assert!(project_psd(&rho).max_diff(&rho).unwrap() < 1e-15);

    let d = HermitianMatrix::new(layout.clone(), CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])).unwrap();
    let p = project_psd(&d);
    let expected = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
    assert!(linalg::max_abs_diff(p.entries(), &expected) < 1e-15);
}

#[test]
fn psd_projection_beats_random_psd_candidates() {
    let mut rng = rng_from_seed(99);
    let layout = SystemLayout::single("h", 4).unwrap();
    let h = random_hermitian_with(&mut rng, layout.clone());
    let p = project_psd(&h);
    let best = (h.entries() - p.entries()).norm();
    // candidates (B + eps G)(B + eps G)† are PSD and cluster around P = B B†
    let (vals, vecs) = linalg::eigh(p.entries());
    let b = linalg::spectral_map(&vals, &vecs, |l| l.max(0.0).sqrt());
    for i in 0..10_000 {
        let eps = 10f64.powi(-(1 + (i % 4)));
        let g = random_hermitian_with(&mut rng, layout.clone());
        let f = random_unitary_with(&mut rng, 4);
        let factor = &b + g.entries() * c(eps, 0.0) * &f;
        let cand = &factor * factor.adjoint();
        assert!((h.entries() - cand).norm() >= best - 1e-12, "candidate {i} beat the projection");
    }
}

#[test]
fn fidelity_cases() {
    let psi = ket("a", &[c(0.6, 0.0), c(0.0, 0.8)]);
    assert!((fidelity(&psi, &density(&psi)).unwrap() - 1.0).abs() < 1e-15);
    let zero = ket("a", &[ONE, ZERO]);
    let one = ket("a", &[ZERO, ONE]);
    assert_eq!(fidelity(&zero, &density(&one)).unwrap(), 0.0);
    assert!((fidelity(&zero, &HermitianMatrix::maximally_mixed(qubit("a"))).unwrap() - 0.5).abs() < 1e-15);
    let big = HermitianMatrix::identity(SystemLayout::single("x", 3).unwrap());
    assert!(fidelity(&zero, &big).is_err());
}

#[test]
fn contract_and_permute() {
    let state = tensor_states(&ket("a", &[c(0.6, 0.0), c(0.8, 0.0)]), &ket("b", &[ZERO, ONE])).unwrap();
    let rest = state.contract(&["b"], &CVector::from_vec(vec![ZERO, ONE])).unwrap();
    assert_eq!(rest.layout().labels().collect::<Vec<_>>(), vec!["a"]);
    assert!((rest.amplitudes()[1].re - 0.8).abs() < 1e-15);
    let swapped = state.permuted(&["b", "a"]).unwrap();
    assert!((swapped.amplitudes()[3].re - 0.8).abs() < 1e-15);
}

fn layout_of(dims: &[usize]) -> SystemLayout {
    SystemLayout::new(dims.iter().enumerate().map(|(i, &d)| (format!("s{i}"), d))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_out_product_recovers_factor(seed in any::<u64>(), da in 1usize..=4, db in 1usize..=2) {
        let mut rng = rng_from_seed(seed);
        let rho = random_density_with(&mut rng, SystemLayout::single("l", da).unwrap());
        let sigma = random_density_with(&mut rng, SystemLayout::single("r", db * 2).unwrap());
        let joint = tensor_operators(&rho, &sigma).unwrap();
        prop_assert!(partial_trace(&joint, &["l"]).unwrap().max_diff(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn partial_trace_preserves_trace(seed in any::<u64>(), mask in 0u8..8) {
        let mut rng = rng_from_seed(seed);
        let layout = layout_of(&[2, 3, 2]);
        let rho = random_density_with(&mut rng, layout.clone()).scaled(1.7);
        let keep: Vec<&str> = layout.labels().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, l)| l).collect();
        let red = partial_trace(&rho, &keep).unwrap();
        prop_assert!((red.trace() - rho.trace()).abs() < 1e-12);
    }

    #[test]
    fn schmidt_reconstructs_input(seed in any::<u64>(), dl in 1usize..=4, dr in 1usize..=4) {
        let mut rng = rng_from_seed(seed);
        let state = haar_state_with(&mut rng, SystemLayout::new([("l", dl), ("r", dr)]).unwrap()).unwrap();
        let s = schmidt_decompose(&state, &["l"]).unwrap();
        let sum_sq: f64 = s.coefficients.iter().map(|c| c * c).sum();
        prop_assert!((sum_sq - 1.0).abs() < 1e-10);
        prop_assert!(s.coefficients.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = s.reconstruct().unwrap();
        prop_assert!((rebuilt.amplitudes() - state.amplitudes()).norm() < 1e-10);
    }

    #[test]
    fn psd_projection_is_idempotent(seed in any::<u64>(), d in 1usize..=6) {
        let mut rng = rng_from_seed(seed);
        let h = random_hermitian_with(&mut rng, SystemLayout::single("h", d).unwrap());
        let once = project_psd(&h);
        let twice = project_psd(&once);
        prop_assert!(twice.max_diff(&once).unwrap() < 1e-12);
        prop_assert!(once.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn disjoint_unitaries_commute(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let state = haar_state_with(&mut rng, layout_of(&[2, 3, 2])).unwrap();
        let u = random_unitary_with(&mut rng, 2);
        let v = random_unitary_with(&mut rng, 2);
        let uv = apply_on_subsystems(&apply_on_subsystems(&state, &u, &["s0"]).unwrap(), &v, &["s2"]).unwrap();
        let vu = apply_on_subsystems(&apply_on_subsystems(&state, &v, &["s2"]).unwrap(), &u, &["s0"]).unwrap();
        prop_assert!((uv.amplitudes() - vu.amplitudes()).norm() < 1e-12);
    }
}
