use proptest::prelude::*;
use twotime_core::chain::{extract_chain, transition_matrix};
use twotime_core::entropy::{integrated_ep, relative_entropy};
use twotime_core::lindblad::{propagate, unique_steady_state};
use twotime_core::operator::{c64, diag, max_abs, DensityMatrix};
use twotime_core::qrm::{
    build_multi_reservoir, build_qrm, multi_reservoir_ep_closed, multi_reservoir_relaxation_closed, qrm_chain_closed,
    qrm_delta_closed, qrm_expected_closed, qrm_mgf_closed, qrm_propagate_closed, qrm_spectrum, qrm_steady_state,
    resolvent, QrmSpec,
};
use twotime_core::random::{random_commuting_qrm, random_density, random_operator, random_qrm, seeded};
use twotime_core::two_time::{delta_distribution, entropy_observable, expected_delta, mgf, MgfMethod};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_propagator_and_steady_state(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = seeded(seed);
        let spec = random_qrm(dim, &mut rng);
        let l = build_qrm(&spec).unwrap();
        let steady = qrm_steady_state(&spec).unwrap();
        prop_assert!(steady.is_faithful());
        prop_assert!(max_abs(&(steady.matrix() - unique_steady_state(&l).unwrap().matrix())) < 1e-9);
        let rho0 = random_density(dim, &mut rng);
        for t in [0.0, 0.1, 1.0, 10.0] {
            let closed = qrm_propagate_closed(&spec, &rho0, t).unwrap();
            prop_assert!(max_abs(&(closed.matrix() - propagate(&l, &rho0, t).unwrap().matrix())) < 1e-9);
        }
    }

    #[test]
    fn closed_spectrum(seed in any::<u64>(), dim in 2usize..4) {
        let mut rng = seeded(seed);
        let spec = random_qrm(dim, &mut rng);
        let closed = qrm_spectrum(&spec, 1e-9).unwrap();
        let mut numeric = build_qrm(&spec).unwrap().generator_matrix().eigenvalues().unwrap();
        let mut expanded = Vec::new();
        for (z, m) in closed {
            expanded.extend(std::iter::repeat_n(z, m));
        }
        prop_assert_eq!(expanded.len(), numeric.len());
        for z in expanded {
            let (k, dist) = numeric
                .iter()
                .enumerate()
                .map(|(k, w)| (k, (w - z).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            prop_assert!(dist < 1e-8);
            numeric.swap_remove(k);
        }
    }

    #[test]
    fn closed_chain_law_and_mgf(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = seeded(seed);
        let spec = random_commuting_qrm(dim, &mut rng);
        let l = build_qrm(&spec).unwrap();
        let rho0 = random_density(dim, &mut rng);
        let closed = qrm_chain_closed(&spec).unwrap();
        let generic = extract_chain(&l, &spec.target, &rho0).unwrap();
        prop_assert!((closed.rates() - generic.rates()).amax() < 1e-10);
        let s = entropy_observable(&spec.target).unwrap();
        for t in [0.0, 0.3, 2.0] {
            prop_assert!((closed.transition(t) - transition_matrix(&generic, t).unwrap()).amax() < 1e-9);
            let law = qrm_delta_closed(&spec, &rho0, t).unwrap();
            let engine = delta_distribution(&l, &rho0, &s, t).unwrap();
            prop_assert!(law.distance(&engine, 1e-9) < 1e-9);
            prop_assert!((law.total() - 1.0).abs() < 1e-12);
            for alpha in [-0.8, 0.0, 0.5, 1.7] {
                let c = qrm_mgf_closed(&spec, &rho0, t, alpha).unwrap();
                let g = mgf(&l, &rho0, &s, t, alpha, MgfMethod::Direct).unwrap();
                prop_assert!((c - g).abs() < 1e-9 * c.max(1.0));
            }
            let e = qrm_expected_closed(&spec, &rho0, t).unwrap();
            prop_assert!((e - expected_delta(&l, &rho0, &s, t).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn resolvent_map_is_a_channel(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let spec = random_qrm(3, &mut rng);
        let rho = random_density(3, &mut rng);
        let out = resolvent(&spec.hamiltonian, spec.gamma, rho.matrix()).unwrap() * c64(spec.gamma, 0.0);
        let state = DensityMatrix::from_operator(out).unwrap();
        prop_assert!(state.min_eigenvalue() >= -1e-12);
        let x = random_operator(3, &mut rng);
        let y = resolvent(&spec.hamiltonian, spec.gamma, &x).unwrap() * c64(spec.gamma, 0.0);
        prop_assert!((y.trace() - x.trace()).norm() < 1e-12);
    }
}

#[test]
fn qubit_example() {
    let spec = QrmSpec::new(
        diag(&[0.0, 1.0]),
        DensityMatrix::from_diagonal(&[0.75, 0.25]).unwrap(),
        1.0,
    )
    .unwrap();
    let l = build_qrm(&spec).unwrap();
    let chain = extract_chain(&l, &spec.target, &spec.target).unwrap();
    let expect = nalgebra::DMatrix::from_row_slice(2, 2, &[-0.25, 0.25, 0.75, -0.75]);
    assert!((chain.rates() - expect).amax() < 1e-12);
    let rho = random_density(2, &mut seeded(1));
    assert!(max_abs(&l.apply_generator(spec.target.matrix()).unwrap()) < 1e-14);
    assert!(l.apply_generator(rho.matrix()).unwrap().trace().norm() < 1e-14);
}

#[test]
fn multi_reservoir_entropy_production() {
    let mut rng = seeded(5);
    let a = random_commuting_qrm(3, &mut rng).with_lambda(0.4);
    let u_t = a.target.eigen().vectors.clone();
    let t_b = DensityMatrix::from_operator(&u_t * diag(&[0.2, 0.5, 0.3]) * u_t.adjoint()).unwrap();
    let b = QrmSpec::new(a.hamiltonian.clone(), t_b, 0.9).unwrap().with_lambda(0.6);
    let parts = [a, b];
    let decomp = build_multi_reservoir(&parts).unwrap();
    let total = twotime_core::qrm::total_spec(&parts).unwrap();
    let steady = qrm_steady_state(&total).unwrap();
    let ep = twotime_core::entropy::ep_total(&decomp, &steady)
        .unwrap()
        .finite()
        .unwrap();
    let closed = multi_reservoir_ep_closed(&parts).unwrap().finite().unwrap();
    assert!((ep - closed).abs() < 1e-10);
    let mut relax = 0.0;
    for part in decomp.parts() {
        relax += integrated_ep(&part.generator, &part.steady, &total.target, 1e-7)
            .unwrap()
            .finite()
            .unwrap();
    }
    let expect = multi_reservoir_relaxation_closed(&parts).unwrap().finite().unwrap();
    assert!((relax - expect).abs() < 1e-4);
    let direct: f64 = parts
        .iter()
        .map(|p| relative_entropy(&total.target, &p.target).unwrap().finite().unwrap())
        .sum();
    assert!((expect - direct).abs() < 1e-14);
}
