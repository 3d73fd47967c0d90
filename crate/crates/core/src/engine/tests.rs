use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::pauli::{haar_state_with, random_density_with, rng_from_seed, sample_haar_state, sample_haar_states, sigma};
use crate::report::Status;
use crate::tensor::linalg::{c, max_abs_diff, CMatrix, ONE, ZERO};
use crate::tensor::{reduced_density, CVector, HermitianMatrix, StateVector, SystemLayout};
use crate::tolerances::Tolerances;

fn qubit(label: &str, amps: [Complex64; 2]) -> StateVector {
    StateVector::new(SystemLayout::single(label, 2).unwrap(), CVector::from_column_slice(&amps)).unwrap()
}

fn zero() -> StateVector {
    qubit("a", [ONE, ZERO])
}

fn one() -> StateVector {
    qubit("a", [ZERO, ONE])
}

fn plus() -> StateVector {
    let h = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    qubit("a", [h, h])
}

/// Protocol over a single Bell pair that projects `(a, A)` onto `(U (x) I)|Phi+>`.
fn rotated_bell_protocol(u: &CMatrix) -> PbtProtocol {
    let bell = maximally_entangled(INPUT, ALICE, 2).unwrap();
    let v = u.kronecker(&CMatrix::identity(2, 2)) * bell.amplitudes();
    let m1 = &v * v.adjoint();
    let resource = paired_resource(1, 2).unwrap();
    PbtProtocol::new(1, resource, vec![CMatrix::identity(4, 4) - &m1, m1]).unwrap()
}

fn product_resource(ports: usize) -> StateVector {
    let mut subs = vec![(ALICE.to_string(), 2)];
    subs.extend((1..=ports).map(|j| (port_label(j), 2)));
    StateVector::basis(SystemLayout::new(subs).unwrap(), 0).unwrap()
}

fn trivial_protocol() -> PbtProtocol {
    PbtProtocol::new(1, product_resource(1), vec![CMatrix::zeros(4, 4), CMatrix::identity(4, 4)]).unwrap()
}

#[test]
fn global_state_with_trivial_resource_is_a_basis_state() {
    let g = global_state(&trivial_protocol(), &zero()).unwrap();
    assert_eq!(g.layout().labels().collect::<Vec<_>>(), vec!["a", "A", "B1"]);
    assert!((g.amplitudes()[0] - ONE).norm() < 1e-15);
    assert!((g.norm() - 1.0).abs() < 1e-15);
}

#[test]
fn global_state_matches_explicit_kronecker_expansion() {
    let proto = bell_pbt_protocol(1).unwrap();
    let g = global_state(&proto, &plus()).unwrap();
    // |+>_a (|00> + |11>)_{A B1} / sqrt 2 = (|000> + |011> + |100> + |111>) / 2
    let expected = [0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5];
    for (i, e) in expected.iter().enumerate() {
        assert!((g.amplitudes()[i] - c(*e, 0.0)).norm() < 1e-15, "index {i}");
    }
}

#[test]
fn global_state_rejects_wrong_input_dimension() {
    let proto = bell_pbt_protocol(1).unwrap();
    let psi = sample_haar_state(4, 1).unwrap();
    assert!(matches!(global_state(&proto, &psi), Err(crate::Error::DimensionMismatch { .. })));
}

#[test]
fn bell_protocol_branch_matches_brute_force_projection() {
    let proto = bell_pbt_protocol(1).unwrap();
    let branches = measure(&proto, &zero()).unwrap();
    assert!((branches[1].probability - 0.25).abs() < 1e-12);
    // (|00> + |11>)_{aA} |0>_B / sqrt 2, ordered (a, A, B1)
    let s = branches[1].state.as_ref().unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut expected = CVector::zeros(8);
    expected[0] = c(h, 0.0);
    expected[6] = c(h, 0.0);
    assert!(s.overlap(&StateVector::new(s.layout().clone(), expected).unwrap()).unwrap() > 1.0 - 1e-12);
}

#[test]
fn probabilities_sum_to_one() {
    let mut rng = rng_from_seed(11);
    for ports in 1..=3 {
        let proto = bell_pbt_protocol(ports).unwrap();
        let psi = haar_state_with(&mut rng, proto.input_layout()).unwrap();
        let branches = measure(&proto, &psi).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((success_probability(&branches) - 0.25).abs() < 1e-12);
        for b in branches.iter().filter(|b| b.state.is_some()) {
            assert!((b.state.as_ref().unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn trivial_measurement_leaves_global_state() {
    let proto = trivial_protocol();
    let psi = sample_haar_state(2, 4).unwrap();
    let branches = measure(&proto, &psi).unwrap();
    assert_eq!(branches[0].probability, 0.0);
    assert!(branches[0].state.is_none());
    assert!((branches[1].probability - 1.0).abs() < 1e-12);
    let g = global_state(&proto, &psi).unwrap();
    assert!(branches[1].state.as_ref().unwrap().overlap(&g).unwrap() > 1.0 - 1e-12);
}

#[test]
fn impossible_outcomes_carry_no_state() {
    let proto = bell_pbt_protocol(3).unwrap();
    let branches = measure(&proto, &plus()).unwrap();
    for b in &branches[2..=3] {
        assert_eq!(b.probability, 0.0);
        assert!(b.state.is_none());
    }
}

#[test]
fn invalid_povms_are_rejected() {
    let resource = paired_resource(1, 2).unwrap();
    let half = CMatrix::identity(4, 4) * c(0.5, 0.0);
    let incomplete = PbtProtocol::new(1, resource.clone(), vec![half.clone(), half.clone() * c(0.5, 0.0)]);
    assert!(matches!(incomplete, Err(crate::Error::InvalidProtocol(m)) if m.contains("completeness")));
    let mut negative = CMatrix::identity(4, 4);
    negative[(0, 0)] = c(-0.5, 0.0);
    let mut rest = CMatrix::zeros(4, 4);
    rest[(0, 0)] = c(1.5, 0.0);
    let err = PbtProtocol::new(1, resource.clone(), vec![negative, rest]).unwrap_err();
    assert!(err.to_string().contains("positivity"), "{err}");
    let too_few = PbtProtocol::new(1, resource, vec![CMatrix::identity(4, 4)]);
    assert!(too_few.is_err());
}

#[test]
fn sqrt_tolerates_tiny_negative_eigenvalues() {
    let resource = paired_resource(1, 2).unwrap();
    let mut m0 = CMatrix::zeros(4, 4);
    m0[(0, 0)] = c(-5e-11, 0.0);
    let mut m1 = CMatrix::identity(4, 4);
    m1[(0, 0)] = c(1.0 + 5e-11, 0.0);
    assert!(PbtProtocol::new(1, resource, vec![m0, m1]).is_ok());
}

#[test]
fn bell_branch_teleports_with_bell_residual() {
    let proto = bell_pbt_protocol(1).unwrap();
    let psi = sample_haar_state(2, 21).unwrap();
    let branches = measure(&proto, &psi).unwrap();
    let t = teleport_report(&branches[1], &psi, 1e-8).unwrap();
    assert!(t.fidelity > 1.0 - 1e-12);
    let r = t.residual.unwrap();
    let bell = maximally_entangled(INPUT, ALICE, 2).unwrap();
    assert!(r.overlap(&bell).unwrap() > 1.0 - 1e-12);
}

#[test]
fn flipped_protocol_teleports_the_flipped_state() {
    let proto = rotated_bell_protocol(&sigma(1));
    let branches = measure(&proto, &zero()).unwrap();
    let t = teleport_report(&branches[1], &zero(), 1e-8).unwrap();
    assert!(t.fidelity.abs() < 1e-12);
}

#[test]
fn failure_branch_has_no_teleport_report() {
    let proto = bell_pbt_protocol(1).unwrap();
    let branches = measure(&proto, &zero()).unwrap();
    assert!(matches!(teleport_report(&branches[0], &zero(), 1e-8), Err(crate::Error::BranchKind(_))));
}

#[test]
fn teleport_fidelity_is_input_independent() {
    let proto = bell_pbt_protocol(2).unwrap();
    let inputs = sample_haar_states(&proto.input_layout(), 50, 3).unwrap();
    let fids: Vec<f64> = inputs
        .iter()
        .map(|psi| teleport_report(&measure(&proto, psi).unwrap()[1], psi, 1e-8).unwrap().fidelity)
        .collect();
    assert!(spread(&fids) < 1e-10);
}

#[test]
fn bell_marginals_match_failure_branch_oracle() {
    let proto = bell_pbt_protocol(1).unwrap();
    let m = port_marginals(&proto, &zero(), 1).unwrap();
    assert!(max_abs_diff(m.eta.entries(), &(CMatrix::identity(2, 2) * c(0.5, 0.0))) < 1e-12);
    // (1/3) sum_{s = x, y, z} s|0><0|s
    let p0 = zero().projector();
    let mut oracle = CMatrix::zeros(2, 2);
    for code in 1..=3 {
        let s = sigma(code);
        oracle += &s * &p0 * &s;
    }
    oracle /= c(3.0, 0.0);
    let omega = m.omega.unwrap();
    assert!(max_abs_diff(omega.entries(), &oracle) < 1e-12);
    assert!((omega.entries()[(0, 0)].re - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn eta_does_not_depend_on_input() {
    let proto = bell_pbt_protocol(2).unwrap();
    let inputs = sample_haar_states(&proto.input_layout(), 2, 8).unwrap();
    let a = port_marginals(&proto, &inputs[0], 2).unwrap();
    let b = port_marginals(&proto, &inputs[1], 2).unwrap();
    assert!(a.eta.max_diff(&b.eta).unwrap() < 1e-12);
}

#[test]
fn eta_is_the_input_average_of_the_pre_measurement_marginal() {
    let proto = bell_pbt_protocol(2).unwrap();
    let m = port_marginals(&proto, &zero(), 1).unwrap();
    let g = global_state(&proto, &plus()).unwrap();
    let direct = reduced_density(&g, &["B1"]).unwrap();
    assert!(m.eta.max_diff(&direct).unwrap() < 1e-14);
}

#[test]
fn port_index_is_range_checked() {
    let proto = bell_pbt_protocol(2).unwrap();
    assert!(port_marginals(&proto, &zero(), 0).is_err());
    assert!(port_marginals(&proto, &zero(), 3).is_err());
}

#[test]
fn decomposition_holds_for_bell_protocols() {
    let tol = Tolerances::default();
    let mut rng = rng_from_seed(5);
    for ports in 1..=3 {
        let proto = bell_pbt_protocol(ports).unwrap();
        let psi = haar_state_with(&mut rng, proto.input_layout()).unwrap();
        for j in 1..=ports {
            let r = verify_port_decomposition(&proto, &psi, j, &tol).unwrap();
            assert!(r.passed(), "{r:?}");
            assert!(r.worst("decomposition residual").unwrap() < 1e-12);
        }
    }
}

#[test]
fn decomposition_degenerates_for_trivial_measurement() {
    let proto = trivial_protocol();
    let r = verify_port_decomposition(&proto, &one(), 1, &Tolerances::default());
    // q_1 = 1 so eta must equal psi psi†: only true for psi = |0>, the product resource's port.
    assert!(!r.unwrap().passed());
    let r = verify_port_decomposition(&proto, &zero(), 1, &Tolerances::default()).unwrap();
    assert!(r.passed());
}

#[test]
fn corrupted_gamma_fails_by_its_weight() {
    // branch 2 never occurs for the Bell protocol, so split the Bell outcome over two ports
    let resource = paired_resource(2, 2).unwrap();
    let bell = maximally_entangled(INPUT, "A1", 2).unwrap().projector().kronecker(&CMatrix::identity(2, 2));
    let bell2 = {
        let layout = SystemLayout::new([("a", 2), ("A1", 2), ("A2", 2)]).unwrap();
        let b = maximally_entangled(INPUT, "A2", 2).unwrap();
        crate::tensor::embed_operator(&b.projector(), &["a", "A2"], &layout).unwrap()
    };
    let m1 = bell * c(0.5, 0.0);
    let m2 = bell2 * c(0.5, 0.0);
    let m0 = CMatrix::identity(8, 8) - &m1 - &m2;
    let split = PbtProtocol::new(1, resource, vec![m0, m1, m2]).unwrap();
    let psi = sample_haar_state(2, 9).unwrap();
    let mut m = port_marginals(&split, &psi, 1).unwrap();
    assert!(decomposition_residual(&m, &psi).unwrap() < 1e-12);
    let q2 = m.probabilities[2];
    assert!((q2 - 0.125).abs() < 1e-12);
    let g = m.gamma[0].1.as_mut().unwrap();
    let mut bumped = g.entries().clone();
    bumped[(0, 0)] += c(1e-3, 0.0);
    *g = HermitianMatrix::new(g.layout().clone(), bumped).unwrap();
    let residual = decomposition_residual(&m, &psi).unwrap();
    assert!((residual - q2 * 1e-3).abs() < 1e-12, "{residual}");
}

#[test]
fn psi_independence_holds_for_bell_protocol() {
    let r = verify_psi_independence(&bell_pbt_protocol(1).unwrap(), 50, 17, &Tolerances::default()).unwrap();
    assert_eq!(r.status, Status::Passed, "{r:?}");
    assert!(r.metrics["omega_1 spread"] > 0.1);
}

#[test]
fn psi_independence_needs_a_perfect_protocol() {
    let resource = paired_resource(1, 2).unwrap();
    let zero_a = zero().projector().kronecker(&CMatrix::identity(2, 2));
    let m0 = CMatrix::identity(4, 4) - &zero_a;
    let proto = PbtProtocol::new(1, resource, vec![m0, zero_a]).unwrap();
    let r = verify_psi_independence(&proto, 10, 1, &Tolerances::default()).unwrap();
    assert_eq!(r.status, Status::NotApplicable);
    assert!(r.notes[0].contains("not a perfect PBT protocol"));
}

#[test]
fn bell_protocol_success_is_a_quarter_for_any_port_count() {
    for ports in [1, 3] {
        let proto = bell_pbt_protocol(ports).unwrap();
        let p = success_probability(&measure(&proto, &plus()).unwrap());
        assert!((p - 0.25).abs() < 1e-12);
        let sum: CMatrix = proto.povm().iter().map(|m| m.entries().clone()).sum();
        assert!(max_abs_diff(&sum, &CMatrix::identity(sum.nrows(), sum.nrows())) < 1e-15);
    }
}

#[test]
fn check_perfect_separates_protocols() {
    let tol = Tolerances::default();
    let inputs = sample_haar_states(&SystemLayout::single("a", 2).unwrap(), 5, 2).unwrap();
    assert!(check_perfect(&bell_pbt_protocol(2).unwrap(), &inputs, &tol).unwrap().0);
    assert!(!check_perfect(&rotated_bell_protocol(&sigma(1)), &inputs, &tol).unwrap().0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mixtures_measure_as_ensembles(seed in any::<u64>(), ports in 1usize..=2) {
        let proto = bell_pbt_protocol(ports).unwrap();
        let mut rng = rng_from_seed(seed);
        let rho = random_density_with(&mut rng, proto.input_layout());
        let (values, vectors) = crate::tensor::linalg::eigh(rho.entries());
        let mut ensemble = vec![0.0; ports + 1];
        for (w, v) in values.iter().zip(vectors.column_iter()) {
            let psi = StateVector::normalizing(proto.input_layout(), v.into_owned()).unwrap();
            for b in measure(&proto, &psi).unwrap() {
                ensemble[b.outcome] += w * b.probability;
            }
        }
        let direct = outcome_probabilities_mixed(&proto, &rho).unwrap();
        for (x, y) in ensemble.iter().zip(&direct) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn decomposition_holds_for_rotated_protocols(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let u = crate::pauli::random_unitary_with(&mut rng, 2);
        let proto = rotated_bell_protocol(&u);
        let psi = haar_state_with(&mut rng, proto.input_layout()).unwrap();
        let branches = measure(&proto, &psi).unwrap();
        // the rotated protocol delivers a pure state other than psi
        let arrived = crate::tensor::schmidt_decompose(branches[1].state.as_ref().unwrap(), &["B1"]).unwrap();
        prop_assert!(arrived.coefficients[0] > 1.0 - 1e-10);
        let m = marginals_from_branches(proto.resource(), &branches, 1).unwrap();
        let phi = arrived.left[0].with_layout(proto.input_layout()).unwrap();
        prop_assert!(decomposition_residual(&m, &phi).unwrap() < 1e-10);
        let total: f64 = m.probabilities.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}
