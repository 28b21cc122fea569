//! Property-based checks on random orbitals, rates, and states.

use fermikin::core::{
    hermitize, jacobi_eigenvalues, spectral_bounds, sup_norm_diff, DensityMatrix,
    HamiltonianSpec, HermitianOperator, OrbitalBasis,
};
use fermikin::generators::{fermion_rhs_matrix, transition_bound_m};
use fermikin::integrators::{integrate_picard, integrate_rk4, IntegrationConfig, Method};
use fermikin::reductions::{hole_rhs_matrix, hole_transform};
use fermikin::testkit::{random_density, random_hermitian, random_rates, SplitMix64};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = usize> {
    2usize..=5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhs_is_hermitian(seed in any::<u64>(), n in dims()) {
        let mut rng = SplitMix64::new(seed);
        let h = random_hermitian(&mut rng, n, 1.0);
        let rates = random_rates(&mut rng, n, 2.0);
        let rho = random_density(&mut rng, n, 0.0, 1.0);
        let rhs = fermion_rhs_matrix(rho.matrix(), h.matrix(), &rates);
        let (_, asym) = hermitize(&rhs);
        prop_assert!(asym < 1e-12, "asymmetry {asym}");
    }

    #[test]
    fn hole_duality_holds_pointwise(seed in any::<u64>(), n in dims()) {
        let mut rng = SplitMix64::new(seed);
        let h = random_hermitian(&mut rng, n, 1.0);
        let rates = random_rates(&mut rng, n, 2.0);
        let rho = random_density(&mut rng, n, 0.0, 1.0);
        let hole = hole_transform(&rho);
        let forward = fermion_rhs_matrix(rho.matrix(), h.matrix(), &rates);
        let dual = hole_rhs_matrix(hole.matrix(), h.matrix(), &rates);
        let gap = sup_norm_diff(&dual, &forward.mapv(|z| -z));
        prop_assert!(gap < 1e-12, "gap {gap}");
    }

    #[test]
    fn transition_bound_is_transpose_invariant(seed in any::<u64>(), n in dims()) {
        let mut rng = SplitMix64::new(seed);
        let rates = random_rates(&mut rng, n, 3.0);
        let m = transition_bound_m(&rates);
        let mt = transition_bound_m(&rates.transposed());
        prop_assert!((m - mt).abs() < 1e-15);
        let back = rates.transposed().transposed();
        prop_assert_eq!(back.omega(), rates.omega());
    }

    #[test]
    fn hermitize_is_idempotent_on_hermitian_input(seed in any::<u64>(), n in dims()) {
        let mut rng = SplitMix64::new(seed);
        let h = random_hermitian(&mut rng, n, 2.0);
        let (again, asym) = hermitize(h.matrix());
        prop_assert!(asym < 1e-15);
        prop_assert!(sup_norm_diff(again.matrix(), h.matrix()) < 1e-15);
    }

    #[test]
    fn eigenvalues_bound_trace_and_diagonal(seed in any::<u64>(), n in dims()) {
        let mut rng = SplitMix64::new(seed);
        let h = random_hermitian(&mut rng, n, 1.5);
        let eigs = jacobi_eigenvalues(h.matrix());
        let trace: f64 = h.matrix().diag().iter().map(|z| z.re).sum();
        let eig_sum: f64 = eigs.iter().sum();
        prop_assert!((trace - eig_sum).abs() < 1e-10 * (1.0 + trace.abs()));
        let (lo, hi) = spectral_bounds(&h);
        for d in h.real_diag() {
            prop_assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
        }
    }
}

proptest! {
    // short integrations are costly, so fewer cases
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn short_evolution_preserves_invariants(seed in any::<u64>(), n in dims()) {
        let mut rng = SplitMix64::new(seed);
        let h = random_hermitian(&mut rng, n, 1.0);
        let rates = random_rates(&mut rng, n, 2.0);
        let m = transition_bound_m(&rates);
        let rho0 = random_density(&mut rng, n, 0.05, 0.95);
        let cfg = IntegrationConfig::new(0.0, 0.1 / m.max(1.0), 1e-3 / m.max(1.0)).unwrap();
        let traj = integrate_rk4(
            |_, r| fermion_rhs_matrix(r, h.matrix(), &rates),
            &rho0,
            &cfg,
        )
        .unwrap();

        let trace0 = rho0.trace();
        for d in traj.diagnostics() {
            prop_assert!(d.lambda_min >= -1e-9, "lambda_min {}", d.lambda_min);
            prop_assert!(d.lambda_max <= 1.0 + 1e-9, "lambda_max {}", d.lambda_max);
            prop_assert!((d.trace - trace0).abs() < 1e-9, "drift {}", d.trace - trace0);
        }

        // coherence bound |rho_ij| <= sqrt(rho_ii rho_jj) up to rounding
        let last = traj.states().last().unwrap().matrix();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let bound = (last[[i, i]].re.max(0.0) * last[[j, j]].re.max(0.0)).sqrt();
                    prop_assert!(last[[i, j]].norm() <= bound + 1e-8);
                }
            }
        }
    }

    #[test]
    fn picard_agrees_with_rk4(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = SplitMix64::new(seed);
        let energies: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let hspec = HamiltonianSpec::free(OrbitalBasis::new(energies).unwrap());
        let h = hspec.evaluate(0.0);
        let rates = random_rates(&mut rng, n, 2.0);
        let m = transition_bound_m(&rates);
        let rho0 = random_density(&mut rng, n, 0.1, 0.9);
        let cfg = IntegrationConfig {
            method: Method::Picard,
            ..IntegrationConfig::new(0.0, 0.2 / m.max(1.0), 5e-4 / m.max(1.0)).unwrap()
        };
        let (traj, _) = integrate_picard(&rho0, &hspec, &rates, &cfg).unwrap();
        let rk = integrate_rk4(
            |_, r| fermion_rhs_matrix(r, h.matrix(), &rates),
            &rho0,
            &cfg,
        )
        .unwrap();
        let gap = sup_norm_diff(
            traj.states().last().unwrap().matrix(),
            rk.states().last().unwrap().matrix(),
        );
        prop_assert!(gap < 1e-6, "gap {gap}");
    }
}

#[test]
fn identity_matrix_helpers_are_consistent() {
    let id = HermitianOperator::identity(3);
    let zero = Array2::<C64>::zeros((3, 3));
    assert_eq!(DensityMatrix::new(id.clone()).trace(), 3.0);
    let (h, asym) = hermitize(&zero);
    assert_eq!(asym, 0.0);
    assert_eq!(h.matrix(), &zero);
}
