//! Games on graphs: G-games with coalition structures, pure and mixed
//! C-equilibria, graph-consistent Markov chains that reach prescribed
//! target distributions, and repeated play built from those chains.

pub mod chain;
pub mod distribution;
pub mod error;
pub mod game;
pub mod graph;
pub mod io;
pub mod mixed;
pub mod repeated;
pub mod sim;

pub use nalgebra::DMatrix;

pub use chain::{
    build_kernel, classify_case, dobrushin, lemma_bound, matrix_power, min_valid_k, nonhomogeneous_kernel, smooth,
    validity_threshold, CaseLabel, Interval, KernelFamily, Schedule, SmoothedTarget, TransitionKernel,
};
pub use distribution::Distribution;
pub use error::{Error, Result};
pub use game::{
    coalition_payoff_from_players, is_pure_c_equilibrium, pure_c_equilibria, substitute, violations_at,
    CoalitionStructure, EquilibriumSet, GGame, StrategyProfile, Violation,
};
pub use graph::{factorize, strong_product, tuple_label, Decomposition, Graph, GraphDoc, NodeId, NodeSubset};
pub use mixed::{
    best_pure_response, compute_mixed_equilibrium, compute_mixed_equilibrium_with, equilibrium_gap, expected_payoff,
    is_mixed_c_equilibrium, pure_deviation_values, pure_in_mixed, BestResponse, MixedProfile, SolverOptions,
};
pub use repeated::{
    deviation_suite, deviation_test, equilibrium_policies, folk_check, payoff_report, repeated_payoff,
    simulate_repeated, simulate_replicas, stock_deviations, two_stage_check, ChainChoice, CustomPolicy,
    DeviationReport, FolkReport, Horizon, HorizonPayoff, Information, Initialization, PayoffReport, Policy,
    RefereeInit, RepeatedConfig, RepeatedRun, Verdict, View,
};
pub use sim::{
    empirical_distribution, ergodic_average, log_checkpoints, run_homogeneous, run_nonhomogeneous, run_product,
    run_target, stream_rng, tv_series, verify_consistency, write_empirical_csv, write_joint_csv, ChainCursor,
    ChainDriver, ComponentSpec, GapCondition, ProductChainSpec, ProductTrace, Sampler, Trace,
};
