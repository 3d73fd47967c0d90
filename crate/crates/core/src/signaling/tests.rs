use std::collections::BTreeMap;

use num_rational::Ratio;
use proptest::prelude::*;

use super::*;
use crate::engine::{bell_pbt_protocol, paired_resource, PbtProtocol, ALICE};
use crate::pauli::{random_unitary_with, rng_from_seed, sigma};
use crate::primed::build_primed;
use crate::tensor::linalg::{c, max_abs_diff, CMatrix};
use crate::tolerances::Tolerances;

fn primed_bell(ports: usize) -> crate::primed::PrimedProtocol {
    build_primed(&bell_pbt_protocol(ports).unwrap()).unwrap()
}

/// Bell protocol with Alice's half of the resource rotated by `u` and her
/// measurement rotated to match.
fn disguised_bell(ports: usize, u: &CMatrix) -> PbtProtocol {
    let bell = bell_pbt_protocol(ports).unwrap();
    let resource = crate::tensor::apply_on_subsystems(bell.resource(), u, &[ALICE]).unwrap();
    let lift = CMatrix::identity(2, 2).kronecker(u);
    let povm = bell.povm().iter().map(|m| &lift * m.entries() * lift.adjoint()).collect();
    PbtProtocol::new(1, resource, povm).unwrap()
}

#[test]
fn first_message_is_the_canonical_pair() {
    let phi = crate::engine::maximally_entangled("a", "b", 2).unwrap();
    assert!((sdc_encode(1, 1).unwrap().amplitudes() - phi.amplitudes()).norm() < 1e-15);
}

#[test]
fn encodings_are_orthonormal() {
    for n in 1..=2 {
        let basis = sdc_basis(n).unwrap();
        let gram = CMatrix::from_fn(basis.len(), basis.len(), |i, j| basis[i].inner(&basis[j]).unwrap());
        assert!(max_abs_diff(&gram, &CMatrix::identity(basis.len(), basis.len())) < 1e-14);
    }
}

#[test]
fn third_message_applies_sigma_y() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // (Y (x) I)(|00> + |11>)/sqrt 2 = (i|10> - i|01>)/sqrt 2
    let expected = [c(0.0, 0.0), c(0.0, -h), c(0.0, h), c(0.0, 0.0)];
    let got = sdc_encode(3, 1).unwrap();
    for (g, e) in got.amplitudes().iter().zip(expected) {
        assert!((g - e).norm() < 1e-15);
    }
    let direct = sigma(2).kronecker(&CMatrix::identity(2, 2)) * crate::engine::maximally_entangled("a", "b", 2).unwrap().amplitudes();
    assert!((got.amplitudes() - direct).norm() < 1e-15);
}

#[test]
fn messages_are_range_checked() {
    assert!(sdc_encode(0, 1).is_err());
    assert!(sdc_encode(5, 1).is_err());
    assert!(sdc_encode(16, 2).is_ok());
}

#[test]
fn bound_examples() {
    assert_eq!(bound(1, 3).unwrap().ratio(), Ratio::new(1, 2));
    assert_eq!(bound(1, 1).unwrap().ratio(), Ratio::new(1, 4));
    assert_eq!(bound(2, 1).unwrap().ratio(), Ratio::new(1, 16));
    assert_eq!(bound(2, 4).unwrap().to_string(), "4/19");
    assert!(bound(0, 1).is_err() && bound(1, 0).is_err());
}

#[test]
fn qubit_bound_is_the_known_optimum() {
    for ports in 1..=50u64 {
        assert_eq!(bound(1, ports as usize).unwrap().ratio(), Ratio::new(ports, ports + 3));
    }
}

#[test]
fn f_at_zero_is_the_bound() {
    for n in 1..=3 {
        for ports in 1..=6 {
            let exact = f_of_r_exact(n, ports, Ratio::from_integer(0)).unwrap().unwrap();
            let b = bound(n, ports).unwrap();
            assert_eq!(exact, Ratio::new(b.numerator as i128, b.denominator as i128));
            assert_eq!(f_of_r(n, ports, 0.0).unwrap().value, b.value());
        }
    }
    assert_eq!(f_of_r_exact(1, 3, Ratio::from_integer(0)).unwrap().unwrap(), Ratio::new(1, 2));
}

#[test]
fn f_decreases_on_a_grid() {
    for (n, ports) in [(1, 1), (1, 3), (2, 4), (3, 2)] {
        let top = ports as f64 / 4f64.powi(n as i32);
        let values: Vec<f64> = (0..100).map(|k| f_of_r(n, ports, top * k as f64 / 100.0).unwrap().value).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "({n}, {ports})");
    }
    assert!(f_of_r(1, 3, 0.1).unwrap().value < f_of_r(1, 3, 0.0).unwrap().value);
}

#[test]
fn f_flags_its_range() {
    let edge = f_of_r(1, 2, 0.5).unwrap();
    assert!(edge.boundary && edge.feasible);
    assert_eq!(edge.value, 0.0);
    assert!(f_of_r_exact(1, 2, Ratio::new(1, 2)).unwrap().is_none());
    assert!(!f_of_r(1, 2, 0.6).unwrap().feasible);
    assert!(!f_of_r(1, 2, -0.1).unwrap().feasible);
}

#[test]
fn per_qubit_power_beats_the_global_bound() {
    let power = per_qubit_power(2, 4);
    let b = bound(2, 4).unwrap().value();
    assert!((power - 0.3265).abs() < 1e-4);
    assert!((b - 0.2105).abs() < 1e-4);
    assert!(power > b);
}

#[test]
fn bound_table_has_the_documented_columns() {
    let mut opt = BTreeMap::new();
    opt.insert((1, 2), 0.4);
    let rows = bound_table(2, 4, &opt).unwrap();
    assert_eq!(rows.len(), 8);
    let mut buf = Vec::new();
    write_bound_table(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,N,bound,p_max_n1_formula,optimizer_value_if_present,bound_fraction,per_qubit_power"
    );
    assert_eq!(lines.next().unwrap(), "1,1,0.25,0.25,,1/4,0.25");
    assert!(text.contains("1,2,0.4,0.4,0.4,2/5,0.4"));
}

#[test]
fn single_port_chain_pins_r_to_zero() {
    let p = primed_bell(1);
    let r = compute_chain_exact(&p, 1, 1, &Tolerances::default()).unwrap();
    assert!((r.q_j - 0.25).abs() < 1e-12);
    assert!((r.p - 0.25).abs() < 1e-12);
    assert!((r.p_prime_simulated - 0.25).abs() < 1e-10);
    assert!(r.r_j.abs() < 1e-10);
    assert!((r.p_prime_formula - r.p_prime_simulated).abs() < 1e-10);
}

#[test]
fn two_port_chain_matches_hand_values() {
    // port 2 never fires for the Bell protocol: 0 + (1/4)(1/4) + (3/4) r_2 = 1/4
    let p = primed_bell(2);
    let r = compute_chain_exact(&p, 2, 1, &Tolerances::default()).unwrap();
    assert!((r.r_j - 0.25).abs() < 1e-10);
    assert!((r.relay_success - 1.0 / 16.0).abs() < 1e-10);
}

#[test]
fn no_signaling_holds_for_primed_bell_protocols() {
    let tol = Tolerances::default();
    for ports in 1..=3 {
        let audit = audit_signaling(&primed_bell(ports), &tol).unwrap();
        assert!(audit.audit.passed(), "{:#?}", audit.audit.failed_checks().collect::<Vec<_>>());
        assert_eq!(audit.reports.len(), 4 * ports);
        assert!((audit.p - audit.f_of_r).abs() < 1e-10);
        for (k, v) in &audit.audit.metrics {
            assert!(*v < 1e-10, "{k} = {v}");
        }
    }
}

#[test]
fn port_hit_always_decodes() {
    let p = primed_bell(1);
    let tol = Tolerances::default();
    for seed in 0..20 {
        let o = run_chain(&p, 1, 3, seed, Some(ChainCase::PortHit), &tol).unwrap();
        assert!(o.correct && o.case == ChainCase::PortHit && o.alice_outcome == 1);
    }
}

#[test]
fn port_miss_is_a_random_guess() {
    let p = primed_bell(2);
    let tree = build_tree(&p, 2, 2, &Tolerances::default()).unwrap();
    let mc = monte_carlo(&tree, 100_000, 42, 4, Some(ChainCase::PortMiss)).unwrap();
    assert!((mc.rate - 0.25).abs() < 0.01, "{mc:?}");
    assert!((mc.exact - 0.25).abs() < 1e-10);
}

#[test]
fn failure_rate_estimates_r() {
    let p = primed_bell(2);
    let tol = Tolerances::default();
    let tree = build_tree(&p, 2, 1, &tol).unwrap();
    let exact = compute_chain_exact(&p, 2, 1, &tol).unwrap();
    let mc = monte_carlo(&tree, 40_000, 7, 1, Some(ChainCase::Failure)).unwrap();
    assert!((mc.exact - exact.r_j).abs() < 1e-12);
    assert!(mc.z < 3.0, "{mc:?}");
}

#[test]
fn unforced_monte_carlo_agrees_with_exact() {
    let tree = build_tree(&primed_bell(3), 1, 4, &Tolerances::default()).unwrap();
    let mc = monte_carlo(&tree, 20_000, 3, 3, None).unwrap();
    assert!(mc.z < 3.0, "{mc:?}");
}

#[test]
fn chunks_are_reproducible() {
    let tree = build_tree(&primed_bell(2), 1, 1, &Tolerances::default()).unwrap();
    let a = simulate_rounds(&tree, 500, 9, 2, None).unwrap();
    let b = simulate_rounds(&tree, 500, 9, 2, None).unwrap();
    let other = simulate_rounds(&tree, 500, 9, 3, None).unwrap();
    assert_eq!(a, b);
    assert!(other <= 500);
}

#[test]
fn permuted_decodings_never_beat_guessing() {
    let tree = build_tree(&primed_bell(2), 2, 3, &Tolerances::default()).unwrap();
    let dist = tree.bob_distribution();
    let mut perms = Vec::new();
    permutations(&mut (0..4).collect::<Vec<usize>>(), 0, &mut perms);
    assert_eq!(perms.len(), 24);
    for perm in perms {
        // Bob relabels raw outcome r as perm[r]
        let success: f64 = (0..4).filter(|&r| perm[r] == tree.message - 1).map(|r| dist[r]).sum();
        assert!(success >= 0.25 - 1e-10);
    }
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

#[test]
fn chain_requires_mixed_ports() {
    let resource = paired_resource(1, 2).unwrap();
    // a coin flip between "port 1" and failure teleports nothing
    let m1 = CMatrix::identity(4, 4) * c(0.5, 0.0);
    let proto = PbtProtocol::new(1, resource, vec![m1.clone(), m1]).unwrap();
    let p = build_primed(&proto).unwrap();
    let err = compute_chain_exact(&p, 1, 1, &Tolerances::default()).unwrap_err();
    assert!(matches!(err, crate::Error::ChainPrecondition(_)), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn disguised_protocols_do_not_signal(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let u = random_unitary_with(&mut rng, 4);
        let p = build_primed(&disguised_bell(2, &u)).unwrap();
        let audit = audit_signaling(&p, &Tolerances::default()).unwrap();
        prop_assert!(audit.audit.passed(), "{:?}", audit.audit.failed_checks().collect::<Vec<_>>());
    }
}

proptest! {
    #[test]
    fn bound_is_below_one(n in 1usize..=10, ports in 1usize..=1000) {
        let b = bound(n, ports).unwrap();
        prop_assert!(b.numerator < b.denominator);
    }

    #[test]
    fn f_is_monotone(n in 1usize..=4, ports in 1usize..=20, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let top = ports as f64 / 4f64.powi(n as i32);
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        prop_assume!(hi - lo > 1e-9 && hi < 1.0);
        let a = f_of_r(n, ports, lo * top).unwrap().value;
        let b = f_of_r(n, ports, hi * top).unwrap().value;
        prop_assert!(b <= a);
    }
}
