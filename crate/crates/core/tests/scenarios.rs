//! End-to-end scenarios on the bundled fixtures and small hand-built games.

mod common;

use common::*;
use graphgame::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn connected_support_tv_shrinks_with_horizon() {
    let g = io::load_graph(&fixture("path5.json")).unwrap();
    let mu = io::load_target(&fixture("uniform5.json"), &g).unwrap();
    let kernel = build_kernel(&mu, &g).unwrap();
    let checkpoints = [1_000, 10_000, 100_000, 1_000_000];
    let decreasing = (0..50u64)
        .filter(|&seed| {
            let trace = run_homogeneous(&kernel, &mu, 1_000_000, seed).unwrap();
            let tv = tv_series(&trace, &mu, &checkpoints).unwrap();
            tv.windows(2).all(|w| w[1].1 < w[0].1)
        })
        .count();
    assert!(decreasing >= 45, "only {decreasing}/50 seeds decrease");
}

#[test]
#[ignore = "rate estimate over 1000 seeds; run with --ignored"]
fn tv_decrease_rate() {
    let g = io::load_graph(&fixture("path5.json")).unwrap();
    let mu = io::load_target(&fixture("uniform5.json"), &g).unwrap();
    let kernel = build_kernel(&mu, &g).unwrap();
    let checkpoints = [1_000, 10_000, 100_000, 1_000_000];
    let mut all = 0;
    let mut pairs = [0; 3];
    for seed in 0..1000u64 {
        let trace = run_homogeneous(&kernel, &mu, 1_000_000, seed).unwrap();
        let tv = tv_series(&trace, &mu, &checkpoints).unwrap();
        for (i, w) in tv.windows(2).enumerate() {
            pairs[i] += (w[1].1 < w[0].1) as usize;
        }
        all += tv.windows(2).all(|w| w[1].1 < w[0].1) as usize;
    }
    println!("all three: {all}/1000, per pair: {pairs:?}");
}

#[test]
fn two_state_chain_reaches_its_target() {
    let g = Graph::path(["a", "b"]).unwrap();
    let mu = Distribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
    let kernel = build_kernel(&mu, &g).unwrap();
    let exact = stationary_oracle(&to_dense(kernel.matrix()));
    assert!((exact[0] - 2.0 / 3.0).abs() < 1e-12);
    let trace = run_homogeneous(&kernel, &mu, 1_000_000, 17).unwrap();
    assert!(empirical_distribution(&trace).unwrap().total_variation(&mu) <= 0.01);
}

#[test]
fn point_mass_chain_is_constant() {
    let g = io::load_graph(&fixture("example_graph.json")).unwrap();
    let mu = Distribution::dirac(4, 2);
    let trace = run_target(&mu, &g, &Schedule::Doubling, None, 1000, 0).unwrap();
    assert_eq!(empirical_distribution(&trace).unwrap(), mu);
}

/// Homogeneous chain on `μ_k`, `k = ⌈1/ε⌉`, for the example target.
fn smoothed_run(epsilon: f64, seed: u64) -> (Distribution, Trace) {
    let g = io::load_graph(&fixture("example_graph.json")).unwrap();
    let mu = io::load_target(&fixture("example_target.json"), &g).unwrap();
    let k = (1.0 / epsilon).ceil() as u64;
    let kernel = build_kernel(&smooth(&mu, k).unwrap().smoothed, &g).unwrap();
    // The two high-mass states talk only through the low-mass pair, so the
    // chain needs a long run before its frequencies settle.
    let trace = run_homogeneous(&kernel, &mu, 10_000_000, seed).unwrap();
    (mu, trace)
}

#[test]
fn smoothed_chain_frequencies_stay_within_epsilon() {
    let epsilon = 0.05;
    let (mu, trace) = smoothed_run(epsilon, 5);
    let freq = empirical_distribution(&trace).unwrap();
    for s in 0..mu.len() {
        assert!((freq.mass(s) - mu.mass(s)).abs() <= epsilon, "state {s}: {}", freq.mass(s));
    }
}

#[test]
fn smoothed_chain_averages_of_nonnegative_functions() {
    let epsilon = 0.05;
    let (mu, trace) = smoothed_run(epsilon, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let f: Vec<f64> = (0..mu.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let max = f.iter().copied().fold(0.0, f64::max);
        let avg = ergodic_average(&trace, |s| f[s]).unwrap();
        assert!((avg - mu.expectation(&f)).abs() <= epsilon * max, "{f:?}");
    }
}

#[test]
fn signed_functions_can_double_the_smoothing_error() {
    // f = +1 on the support, −1 off it: E_{μ_k} f − E_μ f = −2/k exactly.
    let g = io::load_graph(&fixture("example_graph.json")).unwrap();
    let mu = io::load_target(&fixture("example_target.json"), &g).unwrap();
    let k = 20;
    let smoothed = smooth(&mu, k).unwrap().smoothed;
    let f = [1.0, 1.0, -1.0, -1.0];
    let gap = smoothed.expectation(&f) - mu.expectation(&f);
    assert!((gap + 2.0 / k as f64).abs() < 1e-12);
    // The gap stays within ε times the oscillation of f.
    assert!(gap.abs() <= max_minus_min(&f) / k as f64 + 1e-12);
}

fn max_minus_min(f: &[f64]) -> f64 {
    f.iter().copied().fold(f64::NEG_INFINITY, f64::max) - f.iter().copied().fold(f64::INFINITY, f64::min)
}

fn pennies() -> GGame {
    io::load_game(&fixture("matching_pennies.json")).unwrap()
}

fn equilibrium_config(game: &GGame, t_eval: u64) -> RepeatedConfig {
    let dec = factorize(game.graph(), game.strategies()).unwrap();
    let mixed = compute_mixed_equilibrium(game).unwrap();
    let choice = ChainChoice::Schedule(Schedule::PowerGap { c: 1.0, e: 3.0 });
    let policies = equilibrium_policies(game, &dec, &mixed, &choice).unwrap();
    RepeatedConfig::new(
        game.clone(),
        Horizon::Infinite { t_eval },
        Information::Minimal,
        Initialization::Players,
        policies,
    )
    .unwrap()
}

#[test]
fn pennies_long_run_payoff_matches_expectation() {
    let game = pennies();
    let config = equilibrium_config(&game, 1_000_000);
    let run = simulate_repeated(&config, 3).unwrap();
    for (c, p) in run.payoffs.iter().enumerate() {
        let expected = expected_payoff(&game, &compute_mixed_equilibrium(&game).unwrap(), c).unwrap();
        assert!((p.final_average - expected).abs() <= 0.02 * 2.0);
        let joint = run.joint.as_ref().unwrap();
        assert_eq!(p.final_average, ergodic_average(joint, |s| game.payoff_at(c, s)).unwrap());
    }
}

#[test]
fn pennies_dirac_deviation_does_not_improve() {
    let game = pennies();
    let config = equilibrium_config(&game, 100_000);
    let report = deviation_test(&config, 0, &Policy::Constant(0), 100_000, 20, 11).unwrap();
    assert_eq!(report.verdict, Verdict::NotImproved, "{report:?}");
}

#[test]
fn greedy_deviation_at_identical_interest_maximum() {
    // Both coalitions earn the same; (b, b) is the global maximum.
    let text = r#"{
        "players": ["x", "y"],
        "coalitions": [["x"], ["y"]],
        "strategies": [["a", "b"], ["a", "b"]],
        "payoffs": [[1, 0, 0, 3], [1, 0, 0, 3]],
        "graph": {"product": [{"nodes": ["a", "b"], "edges": [["a", "b"]]}, {"nodes": ["a", "b"], "edges": [["a", "b"]]}]}
    }"#;
    let game = io::parse_game(text, std::path::Path::new(".")).unwrap();
    let top = StrategyProfile(vec![1, 1]);
    assert!(pure_in_mixed(&game, &top).unwrap());
    let mixed = MixedProfile::dirac(&game, &top).unwrap();
    let dec = factorize(game.graph(), game.strategies()).unwrap();
    let policies = equilibrium_policies(&game, &dec, &mixed, &ChainChoice::Smoothed { epsilon: 0.01 }).unwrap();
    let config = RepeatedConfig::new(
        game.clone(),
        Horizon::Infinite { t_eval: 10_000 },
        Information::Minimal,
        Initialization::Players,
        policies,
    )
    .unwrap();
    let values = pure_deviation_values(&game, &mixed, 0).unwrap();
    let greedy = Policy::MyopicGreedy { values, start: 0 };
    let report = deviation_test(&config, 0, &greedy, 10_000, 20, 4).unwrap();
    assert_eq!(report.verdict, Verdict::NotImproved, "{report:?}");
    assert!(report.difference_mean < 0.0);
}

#[test]
fn non_decomposable_graph_rejects_any_repeated_play() {
    let game = io::load_game(&fixture("four_cycle.json")).unwrap();
    let jump = Policy::Scripted { steps: vec![0, 1], cyclic: true };
    let result = RepeatedConfig::new(
        game,
        Horizon::Finite(10),
        Information::Maximal,
        Initialization::Players,
        vec![jump.clone(), jump],
    );
    assert!(matches!(result, Err(Error::NotDecomposable)));
}

/// Nash-for-coalitions check straight from the payoff tables.
fn coalition_nash(game: &GGame, s: &[usize]) -> bool {
    let sizes = game.space_sizes().to_vec();
    let here = encode(&sizes, s);
    (0..sizes.len()).all(|h| {
        (0..sizes[h]).all(|x| {
            let mut d = s.to_vec();
            d[h] = x;
            game.payoff_table(h)[encode(&sizes, &d)] <= game.payoff_table(h)[here]
        })
    })
}

#[test]
fn complete_graph_reduces_to_coalition_nash() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let sizes = random_sizes(&mut rng, 3, 3);
        let game = random_game(&mut rng, &sizes, 0.0);
        let game = game.with_graph(Graph::complete(game.graph().labels().to_vec()).unwrap()).unwrap();
        for i in 0..game.profile_count() {
            let s = game.profile(i);
            let expected = coalition_nash(&game, &s.0);
            let pure = is_pure_c_equilibrium(&game, &s).unwrap();
            assert_eq!(pure_in_mixed(&game, &s).unwrap() && pure, expected);
            if pure {
                assert_eq!(two_stage_check(&game, &s).unwrap(), expected);
            } else {
                assert!(matches!(two_stage_check(&game, &s), Err(Error::NotPureEquilibrium)));
            }
        }
    }
}

#[test]
fn coordination_diagonal_passes_two_stage_check() {
    let game = io::load_game(&fixture("coordination.json")).unwrap();
    let top = game.profile_from_labels(&["a", "a"]).unwrap();
    assert!(two_stage_check(&game, &top).unwrap());
}

#[test]
fn team_fixture_equilibria() {
    let game = io::load_game(&fixture("team_path.json")).unwrap();
    let set = pure_c_equilibria(&game);
    assert_eq!(set.profiles(), oracle_pure_equilibria(&game).as_slice());
    for label in [["low", "left"], ["high", "right"]] {
        assert!(set.contains(&game.profile_from_labels(&label).unwrap()));
    }
    let dec = factorize(game.graph(), game.strategies()).unwrap();
    assert_eq!(dec.factor(0).edge_count(), 2);
    assert_eq!(dec.factor(1).edge_count(), 1);
}
