//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]` line with its measured numbers (run with `--nocapture` to see
//! them). Tolerances are pinned in the assertions.

use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use gpts::bounds::{
    infogain_bound_kernel_independent, infogain_greedy, infogain_of_arms, regret_bound,
    submodularity_chain, t_star,
};
use gpts::gp::PosteriorState;
use gpts::kernels::{
    chi_gaussian, chi_linear, chi_mdp, feature_map, kernel_eval, ChiSequence, Path,
};
use gpts::planning::{plan, PlanConfig, TabularMdp};
use gpts::search::{run_search, Search, SearchConfig, StoppingRule, Truth};
use gpts::spectrum::{
    build_gram, closed_form_spectrum, enumerate_paths, lambda_hat_bounds, path_index,
    sample_gp_prior, width_constants,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn kernel_grid(branching: usize, depth: usize) -> Vec<ChiSequence> {
    vec![
        chi_linear(branching, depth).unwrap(),
        chi_gaussian(branching, depth, 1.5).unwrap(),
        chi_gaussian(branching, depth, 3.0).unwrap(),
        chi_mdp(branching, depth, 0.3).unwrap(),
        chi_mdp(branching, depth, 0.7).unwrap(),
    ]
}

#[test]
fn criterion_01_spectrum_matches_brute_force_eigendecomposition() {
    let started = Instant::now();
    let mut checked = 0usize;
    for branching in [2usize, 3] {
        for depth in [1usize, 2, 3] {
            for chi in kernel_grid(branching, depth) {
                let spectrum = closed_form_spectrum(&chi);
                // Stated multiplicities.
                for (i, line) in spectrum.lines.iter().enumerate().take(depth) {
                    let expected =
                        (branching as u128 - 1) * (branching as u128).pow((depth - i - 1) as u32);
                    assert_eq!(line.multiplicity, expected);
                }
                assert_eq!(spectrum.lines[depth].multiplicity, 1);

                let mut closed = spectrum.expand(4096).unwrap();
                closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let gram = build_gram(&chi).unwrap();
                let mut numeric: Vec<f64> =
                    gram.symmetric_eigenvalues().iter().copied().collect();
                numeric.sort_by(|a, b| a.partial_cmp(b).unwrap());
                assert_eq!(closed.len(), numeric.len());
                for (a, b) in closed.iter().zip(numeric.iter()) {
                    assert!(
                        (a - b).abs() <= 1e-8,
                        "B={branching} D={depth} kind={:?}: {a} vs {b}",
                        chi.kind
                    );
                }
                let n = chi.num_paths().unwrap() as f64;
                assert!(
                    (spectrum.trace() - n * chi.chi_zero()).abs() <= 1e-9,
                    "trace identity failed for {:?}",
                    chi.kind
                );
                checked += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "criterion 1 took {elapsed:?}");
    println!(
        "[PASS] criterion 1: {checked} spectra match brute-force eigendecomposition \
         (1e-8) with the trace identity (1e-9) in {elapsed:?}"
    );
}

#[test]
fn criterion_02_feature_products_reproduce_kernels_on_all_pairs() {
    let paths = enumerate_paths(2, 3);
    let mut pairs = 0usize;
    for chi in [
        chi_linear(2, 3).unwrap(),
        chi_gaussian(2, 3, 1.5).unwrap(),
        chi_gaussian(2, 3, 3.0).unwrap(),
    ] {
        pairs = 0;
        for i in 0..paths.len() {
            for j in (i + 1)..paths.len() {
                let px = feature_map(&chi, &paths[i]).unwrap();
                let py = feature_map(&chi, &paths[j]).unwrap();
                let expected = kernel_eval(&chi, &paths[i], &paths[j]).unwrap();
                assert!(
                    (px.dot(&py) - expected).abs() <= 1e-12,
                    "kind={:?} pair ({i},{j})",
                    chi.kind
                );
                pairs += 1;
            }
        }
        assert_eq!(pairs, 28);
    }
    println!(
        "[PASS] criterion 2: feature inner products equal kernel values on all \
         {pairs} path pairs (1e-12), linear and Gaussian kernels"
    );
}

#[test]
fn criterion_03_lambda_hat_brackets_hold_everywhere() {
    let mut checked = 0usize;
    for branching in [2usize, 3] {
        for depth in [1usize, 2, 3] {
            let mut kernels = vec![chi_linear(branching, depth).unwrap()];
            for s in [1.5, 3.0] {
                kernels.push(chi_gaussian(branching, depth, s).unwrap());
            }
            for chi in kernels {
                let eigs = closed_form_spectrum(&chi).reorder();
                for t in 2..=eigs.len() {
                    let (lo, hi) = lambda_hat_bounds(&chi, t).unwrap();
                    let actual = eigs.get(t);
                    assert!(
                        lo <= actual + 1e-12 && actual <= hi + 1e-12,
                        "kind={:?} B={branching} D={depth} t={t}: \
                         {lo} <= {actual} <= {hi} violated",
                        chi.kind
                    );
                    checked += 1;
                }
            }
        }
    }
    println!(
        "[PASS] criterion 3: eigenvalue brackets held at all {checked} \
         (kernel, B, D, t) points with zero violations"
    );
}

#[test]
fn criterion_04_dummy_argmax_equals_exhaustive_ucb_search() {
    let chi = chi_linear(3, 3).unwrap();
    let paths = enumerate_paths(3, 3);
    assert_eq!(paths.len(), 27);
    let mut config = SearchConfig::new(chi, 0.25);
    config.seed = 2024;
    let mut search = Search::new(config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let mut reward = move |_: &Path| rng.random_range(-1.0..1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let selected = search.select_arm().unwrap();
        let beta = search.current_beta();
        let exhaustive = paths
            .iter()
            .map(|p| search.state().ucb(p, beta).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = (selected.ucb - exhaustive).abs();
        worst = worst.max(gap);
        assert!(gap <= 1e-9, "selection missed the exhaustive maximum by {gap}");
        search.step(&mut reward).unwrap();
    }
    println!(
        "[PASS] criterion 4: dummy-node argmax matched the exhaustive 27-path \
         maximum for 100 iterations (worst gap {worst:.2e} <= 1e-9)"
    );
}

#[test]
fn criterion_05_factorized_posterior_matches_explicit_inversion() {
    let chi = chi_gaussian(2, 3, 1.5).unwrap();
    let paths = enumerate_paths(2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for noise_var in [0.01, 0.25, 1.0] {
        let mut state = PosteriorState::new(chi.clone(), noise_var).unwrap();
        for _ in 0..12 {
            let x = paths[rng.random_range(0..paths.len())].clone();
            state.push_observation(&x, rng.random_range(-1.0..1.0)).unwrap();
        }
        let t = state.len();
        let c = nalgebra::DMatrix::from_fn(t, t, |i, j| {
            let mut v = kernel_eval(&chi, &state.arms()[i], &state.arms()[j]).unwrap();
            if i == j {
                v += noise_var;
            }
            v
        });
        let c_inv = c.try_inverse().unwrap();
        let y = nalgebra::DVector::from_column_slice(state.rewards());
        for x in &paths {
            let k = nalgebra::DVector::from_vec(state.kernel_vector(x).unwrap());
            let mu_direct = (k.transpose() * &c_inv * &y)[(0, 0)];
            let var_direct = (chi.chi_zero() - (k.transpose() * &c_inv * &k)[(0, 0)]).max(0.0);
            let (mu, var) = state.posterior(x).unwrap();
            worst = worst.max((mu - mu_direct).abs()).max((var - var_direct).abs());
            assert!((mu - mu_direct).abs() <= 1e-8);
            assert!((var - var_direct).abs() <= 1e-8);
        }
    }
    // Noise-free interpolation.
    let mut state = PosteriorState::new(chi_linear(2, 3).unwrap(), 0.0).unwrap();
    let data = [
        (Path::new(vec![0, 0, 0]), 0.4),
        (Path::new(vec![0, 1, 1]), -0.9),
        (Path::new(vec![1, 1, 0]), 0.2),
    ];
    for (x, y) in &data {
        state.push_observation(x, *y).unwrap();
    }
    for (x, y) in &data {
        let (mu, var) = state.posterior(x).unwrap();
        assert!((mu - y).abs() <= 1e-9 && var <= 1e-9);
    }
    println!(
        "[PASS] criterion 5: factorized posterior equals explicit inversion \
         (worst error {worst:.2e} <= 1e-8); noise-free interpolation exact to 1e-9"
    );
}

#[test]
fn criterion_06_infogain_theorem_chain_over_seeded_runs() {
    let noise_var = 0.01; // sigma_noise = 0.1
    let horizon = 60;
    let kernels = [
        chi_linear(2, 3).unwrap(),
        chi_gaussian(2, 3, 1.5).unwrap(),
        chi_mdp(2, 3, 0.7).unwrap(),
    ];
    let mut runs = 0usize;
    for chi in &kernels {
        let eigs = closed_form_spectrum(chi).reorder();
        let num_nodes = chi.num_nodes().unwrap() as f64;
        for seed in 0..50u64 {
            let mut config = SearchConfig::new(chi.clone(), noise_var);
            config.seed = seed;
            config.update = gpts::search::UpdateMode::Incremental;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
            let scale = chi.chi_zero().sqrt();
            let mut reward = move |_: &Path| scale * rng.random_range(-1.0..1.0);
            let trace =
                run_search(config, &StoppingRule::FixedIterations(horizon), None, &mut reward)
                    .unwrap();
            let arms: Vec<&Path> = trace.rows.iter().map(|r| &r.path).collect();
            let actual = infogain_of_arms(chi, &arms, noise_var).unwrap();
            let (bound_t, bound_nn) =
                infogain_bound_kernel_independent(horizon, num_nodes, noise_var).unwrap();
            assert!(actual <= bound_t + 1e-9, "kind={:?} seed={seed}", chi.kind);
            assert!(actual <= bound_nn + 1e-9, "kind={:?} seed={seed}", chi.kind);
            let greedy = infogain_greedy(&eigs, horizon, noise_var).unwrap();
            let chain = submodularity_chain(actual, greedy.value);
            assert!(
                chain.holds,
                "kind={:?} seed={seed}: {} > {}",
                chi.kind, chain.actual, chain.limit
            );
            runs += 1;
        }
    }
    println!(
        "[PASS] criterion 6: information-gain chain (time bound, node bound, \
         submodularity) held on all {runs} seeded runs with zero violations"
    );
}

#[test]
fn criterion_07_regret_falls_and_stays_under_the_theorem_bound() {
    let started = Instant::now();
    let chi = chi_linear(2, 4).unwrap();
    let branching = chi.branching;
    let noise_var: f64 = 0.01; // sigma_noise = 0.1
    let delta = 0.05;
    let horizon = 500usize;
    let replications = 20usize;
    let mut rate_50 = 0.0;
    let mut rate_500 = 0.0;
    let mut within_bound = 0usize;
    for rep in 0..replications {
        let rep_seed = 9000 + rep as u64;
        let mut env = ChaCha8Rng::seed_from_u64(rep_seed ^ 0x5eed);
        let sample = sample_gp_prior(&chi, &mut env).unwrap();
        let values = sample.values.clone();
        let truth = Truth {
            f_star: sample.f_star,
            f: Box::new(move |p: &Path| values[path_index(branching, p)]),
        };
        let values = sample.values.clone();
        let mut reward = move |p: &Path| {
            values[path_index(branching, p)]
                + noise_var.sqrt() * env.sample::<f64, _>(rand_distr::StandardNormal)
        };
        let mut config = SearchConfig::new(chi.clone(), noise_var);
        config.seed = rep_seed;
        config.delta = delta;
        config.update = gpts::search::UpdateMode::Incremental;
        let trace = run_search(
            config,
            &StoppingRule::FixedIterations(horizon),
            Some(truth),
            &mut reward,
        )
        .unwrap();
        assert_eq!(trace.len(), horizon);
        let regret_at = |t: usize| trace.rows[t - 1].cum_regret.unwrap();
        rate_50 += regret_at(50) / 50.0;
        rate_500 += regret_at(500) / 500.0;

        let arms: Vec<&Path> = trace.rows.iter().map(|r| &r.path).collect();
        let infogain = infogain_of_arms(&chi, &arms, noise_var).unwrap();
        let bound =
            regret_bound(horizon, chi.num_paths_f64(), delta, noise_var, infogain).unwrap();
        if regret_at(500) <= bound {
            within_bound += 1;
        }
    }
    rate_50 /= replications as f64;
    rate_500 /= replications as f64;
    let elapsed = started.elapsed();
    assert!(
        rate_500 < 0.5 * rate_50,
        "mean regret rate failed to halve: R/T {rate_500:.4} at 500 vs {rate_50:.4} at 50"
    );
    assert!(
        within_bound >= 19,
        "only {within_bound}/20 replications stayed under the theorem bound"
    );
    assert!(elapsed.as_secs_f64() < 120.0, "criterion 7 took {elapsed:?}");
    println!(
        "[PASS] criterion 7: mean R_T/T fell from {rate_50:.4} (T=50) to {rate_500:.4} \
         (T=500), ratio {:.3} < 0.5; {within_bound}/20 replications under the theorem \
         bound; {elapsed:?} < 2 min",
        rate_500 / rate_50
    );
}

#[test]
fn criterion_08_width_constants_and_split_points_are_monotone() {
    let mut last_product = f64::INFINITY;
    let mut last_t_star = usize::MAX;
    let mut products = Vec::new();
    let mut split_points = Vec::new();
    for i in 0..20 {
        let s = 1.3 + (10.0 - 1.3) * i as f64 / 19.0;
        let w = width_constants(2, s).unwrap();
        assert!(
            w.product < last_product,
            "C_s q_s must strictly decrease along the grid (s = {s})"
        );
        last_product = w.product;
        products.push(w.product);

        let chi = chi_gaussian(2, 3, s).unwrap();
        let ts = t_star(&closed_form_spectrum(&chi).reorder(), 1.0).unwrap();
        assert!(ts.value <= last_t_star, "t_star must be nonincreasing (s = {s})");
        last_t_star = ts.value;
        split_points.push(ts.value);
    }
    println!(
        "[PASS] criterion 8: C_s q_s strictly decreasing over the 20-point grid \
         ({:.4} down to {:.4}); t_star nonincreasing ({} down to {})",
        products[0],
        products[products.len() - 1],
        split_points[0],
        split_points[split_points.len() - 1]
    );
}

fn fixture_path() -> PathBuf {
    FsPath::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/chain_mdp.json")
}

#[test]
fn criterion_09_planner_recovers_the_chain_optimum() {
    let text = std::fs::read_to_string(fixture_path()).unwrap();
    let mdp = TabularMdp::from_json(&text).unwrap();
    let gamma = 0.7f64;
    let horizon = 200usize;
    let depth = 8usize; // ceil(log2 200)

    // Self-kernel of the planning kernel at this depth.
    let chi = chi_mdp(2, depth, gamma).unwrap();
    let expected_self = (1.0 - gamma.powi(2 * depth as i32)) / (1.0 - gamma * gamma);
    let probe = Path::new(vec![0; depth]);
    assert!((kernel_eval(&chi, &probe, &probe).unwrap() - expected_self).abs() <= 1e-12);

    let seeds = 50u64;
    let mut recovered = 0usize;
    for seed in 0..seeds {
        let mut config = PlanConfig::new(horizon);
        config.noise_var = 0.05 * 0.05;
        config.seed = seed;
        let result = plan(&mdp, &config).unwrap();
        assert_eq!(result.horizon_depth, depth);
        let f_star = result.f_star.expect("chain is enumerable");
        let r_prime = result.empirical_cumulative_regret.unwrap();
        assert!(
            f_star - result.best_observed_reward <= r_prime / result.iterations as f64 + 1e-9,
            "empirical simple-regret inequality violated at seed {seed}"
        );
        if result.best_actions.first() == Some(&0) {
            recovered += 1;
        }
    }
    assert!(
        recovered * 10 >= seeds as usize * 9,
        "optimal first action recovered in only {recovered}/{seeds} seeds"
    );
    println!(
        "[PASS] criterion 9: optimal first action recovered in {recovered}/{seeds} seeds \
         (>= 90%); empirical simple-regret inequality held on every run; \
         self-kernel exact to 1e-12"
    );
}

#[test]
fn criterion_10_binary_outputs_are_reproducible_byte_for_byte() {
    let bin = env!("CARGO_BIN_EXE_gpts");
    let mut simulate_outputs = Vec::new();
    let mut plan_outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let status = std::process::Command::new(bin)
            .args([
                "simulate", "--kernel", "gaussian", "--B", "2", "--D", "3", "--s", "1.5",
                "--T", "50", "--noise", "0.01", "--seed", "42", "--replications", "3",
                "--out",
            ])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(status.status.success());
        let mut bundle = Vec::new();
        for name in ["summary.json", "trace_rep000.csv", "trace_rep001.csv", "trace_rep002.csv"]
        {
            bundle.push(std::fs::read(dir.path().join(name)).unwrap());
        }
        simulate_outputs.push(bundle);

        let plan_dir = tempfile::tempdir().unwrap();
        let status = std::process::Command::new(bin)
            .args(["plan", "--mdp"])
            .arg(fixture_path())
            .args(["--T", "60", "--noise", "0.0025", "--seed", "7", "--out"])
            .arg(plan_dir.path())
            .output()
            .unwrap();
        assert!(status.status.success());
        plan_outputs.push((
            std::fs::read(plan_dir.path().join("plan.json")).unwrap(),
            std::fs::read(plan_dir.path().join("plan_trace.csv")).unwrap(),
        ));
    }
    assert_eq!(simulate_outputs[0], simulate_outputs[1]);
    assert_eq!(plan_outputs[0], plan_outputs[1]);
    println!(
        "[PASS] criterion 10: identical (config, seed) produced byte-identical \
         CSV and JSON outputs across two executions of simulate and plan"
    );
}
