use nalgebra::DMatrix;
use proptest::prelude::*;
use twotime_core::chain::{
    chain_vs_quantum, classical_db_check, classical_flux, classical_mgf, extract_chain, invariant_distribution,
    quantum_transition_matrix, simple_entropy_observable, transition_matrix,
};
use twotime_core::operator::{default_cluster_tol, pinch, re_bracket, spectral_decompose};
use twotime_core::random::{random_db_model, random_density, seeded};
use twotime_core::two_time::{mgf, MgfMethod};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_matches_quantum_statistics(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = seeded(seed);
        let (l, rho) = random_db_model(dim, &mut rng);
        let rho0 = random_density(dim, &mut rng);
        let chain = extract_chain(&l, &rho, &rho0).unwrap();
        let s = simple_entropy_observable(&rho).unwrap();
        prop_assert!(chain_vs_quantum(&chain, &l, &rho0, &s, &[0.0, 0.1, 1.0, 10.0]).unwrap() < 1e-9);
        for row in chain.rates().row_iter() {
            prop_assert!(row.sum().abs() < 1e-10);
        }
        prop_assert!(classical_db_check(&chain).max() < 1e-9);
        let pi = invariant_distribution(&chain).unwrap();
        for (p, w) in pi.iter().zip(chain.weights(1.0)) {
            prop_assert!((p - w).abs() < 1e-10);
        }
        let quantum = quantum_transition_matrix(&l, &s, 0.5).unwrap();
        prop_assert!((transition_matrix(&chain, 0.5).unwrap() - quantum).amax() < 1e-9);
    }

    #[test]
    fn rates_do_not_depend_on_the_initial_state(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (l, rho) = random_db_model(3, &mut rng);
        let a = extract_chain(&l, &rho, &random_density(3, &mut rng)).unwrap();
        let b = extract_chain(&l, &rho, &random_density(3, &mut rng)).unwrap();
        prop_assert!((a.rates() - b.rates()).amax() < 1e-14);
    }

    #[test]
    fn classical_and_quantum_mgf_agree(seed in any::<u64>(), t in 0.0f64..3.0, alpha in -1.0f64..2.0) {
        let mut rng = seeded(seed);
        let (l, rho) = random_db_model(3, &mut rng);
        let rho0 = random_density(3, &mut rng);
        let chain = extract_chain(&l, &rho, &rho0).unwrap();
        let s = simple_entropy_observable(&rho).unwrap();
        let classical = classical_mgf(&chain, t, alpha).unwrap();
        let direct = mgf(&l, &rho0, &s, t, alpha, MgfMethod::Direct).unwrap();
        prop_assert!((classical - direct).abs() < 1e-9 * direct.max(1.0));
        prop_assert!((classical_mgf(&chain, t, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn flux_identity_from_mixed_derivative() {
    let mut rng = seeded(41);
    let (l, rho) = random_db_model(3, &mut rng);
    let rho0 = random_density(3, &mut rng);
    let chain = extract_chain(&l, &rho, &rho0).unwrap();
    let h = 1e-4;
    let g = |t: f64, a: f64| classical_mgf(&chain, t, a).unwrap();
    // Central in α, second-order one-sided in t.
    let da = |t: f64| (g(t, h) - g(t, -h)) / (2.0 * h);
    let mixed = (-3.0 * da(0.0) + 4.0 * da(h) - da(2.0 * h)) / (2.0 * h);
    let s = simple_entropy_observable(&rho).unwrap();
    let i_plus = l.apply_dual(&s.reconstruct()).unwrap();
    let quantum = re_bracket(rho0.matrix(), &i_plus);
    assert!((classical_flux(&chain) - quantum).abs() < 1e-10);
    assert!((mixed - classical_flux(&chain)).abs() < 1e-5);
}

#[test]
fn symmetric_when_started_from_the_pinched_steady_state() {
    let mut rng = seeded(42);
    let (l, rho) = random_db_model(3, &mut rng);
    let chain = extract_chain(&l, &rho, &rho).unwrap();
    let p = transition_matrix(&chain, 0.9).unwrap();
    let pi = chain.pi0();
    let n = chain.len();
    let joint = DMatrix::from_fn(n, n, |i, k| pi[i] * p[(i, k)]);
    assert!((&joint - joint.transpose()).amax() < 1e-10);
    let states = chain.states();
    let mean: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |k| (i, k)))
        .map(|(i, k)| joint[(i, k)] * (states[k] - states[i]))
        .sum();
    assert!(mean.abs() < 1e-10);
}

#[test]
fn energy_measurement_gives_the_same_chain() {
    let mut rng = seeded(43);
    let (l, rho) = random_db_model(3, &mut rng);
    let chain = extract_chain(&l, &rho, &rho).unwrap();
    let h = spectral_decompose(l.hamiltonian(), default_cluster_tol(l.hamiltonian())).unwrap();
    assert!(h.is_simple());
    let s = simple_entropy_observable(&rho).unwrap();
    // Match each energy projector to the entropy projector it equals.
    let order: Vec<usize> = h
        .projectors()
        .iter()
        .map(|p| {
            s.projectors()
                .iter()
                .position(|q| (p - q).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-8)
                .expect("shared eigenbasis")
        })
        .collect();
    let t = 0.7;
    let energy = quantum_transition_matrix(&l, &h, t).unwrap();
    let p = transition_matrix(&chain, t).unwrap();
    for i in 0..3 {
        for k in 0..3 {
            assert!((energy[(i, k)] - p[(order[i], order[k])]).abs() < 1e-9);
        }
    }
    let pinched = pinch(&s, rho.matrix()).unwrap();
    assert!((pinched - rho.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
}
