use gpts::kernels::{chi_gaussian, chi_linear, chi_mdp, feature_map, kernel_eval};
use gpts::spectrum::{closed_form_spectrum, enumerate_paths};
use proptest::prelude::*;

fn arb_shape() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=4, 1usize..=4)
}

proptest! {
    #[test]
    fn chi_sequences_are_valid_profiles(
        (b, d) in arb_shape(),
        s in 0.3f64..6.0,
        gamma in 0.05f64..0.95,
    ) {
        for chi in [
            chi_linear(b, d).unwrap(),
            chi_gaussian(b, d, s).unwrap(),
            chi_mdp(b, d, gamma).unwrap(),
        ] {
            chi.validate().unwrap();
            prop_assert_eq!(chi.values.len(), d + 1);
            prop_assert!(chi.values.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn kernel_is_symmetric_with_chi_zero_diagonal(
        (b, d) in arb_shape(),
        s in 1.0f64..4.0,
        seed in 0usize..1000,
    ) {
        let chi = chi_gaussian(b, d, s).unwrap();
        let paths = enumerate_paths(b, d);
        let x = &paths[seed % paths.len()];
        let y = &paths[(seed * 7 + 3) % paths.len()];
        prop_assert_eq!(
            kernel_eval(&chi, x, y).unwrap(),
            kernel_eval(&chi, y, x).unwrap()
        );
        prop_assert_eq!(kernel_eval(&chi, x, x).unwrap(), chi.chi_zero());
    }

    #[test]
    fn feature_products_match_kernel_values(
        (b, d) in arb_shape(),
        s in 1.0f64..4.0,
        ia in 0usize..10_000,
        ib in 0usize..10_000,
    ) {
        let paths = enumerate_paths(b, d);
        let x = &paths[ia % paths.len()];
        let y = &paths[ib % paths.len()];
        for chi in [chi_linear(b, d).unwrap(), chi_gaussian(b, d, s).unwrap()] {
            let px = feature_map(&chi, x).unwrap();
            let py = feature_map(&chi, y).unwrap();
            let k = kernel_eval(&chi, x, y).unwrap();
            prop_assert!((px.dot(&py) - k).abs() <= 1e-12);
        }
    }

    #[test]
    fn reordered_eigenvalues_are_nonincreasing_and_complete(
        (b, d) in arb_shape(),
        gamma in 0.1f64..0.9,
    ) {
        let chi = chi_mdp(b, d, gamma).unwrap();
        let spectrum = closed_form_spectrum(&chi);
        let eigs = spectrum.reorder();
        let n = eigs.len();
        prop_assert_eq!(n, chi.num_paths().unwrap());
        let seq = eigs.to_vec(4096).unwrap();
        for w in seq.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
        prop_assert!(seq.iter().all(|l| *l >= -1e-12));
        // Trace identity against N chi_0.
        let trace: f64 = seq.iter().sum();
        prop_assert!((trace - chi.num_paths_f64() * chi.chi_zero()).abs() <= 1e-9 * (1.0 + trace.abs()));
    }
}
