//! Repeated G-games: graph-consistent play over time, information models,
//! payoff functionals and the deviation harness for chain equilibria.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{build_kernel, classify_case, smooth, CaseLabel, Schedule};
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::game::{is_pure_c_equilibrium, GGame, StrategyProfile};
use crate::graph::{factorize, Decomposition, Graph, NodeId};
use crate::mixed::{expected_payoff, is_mixed_c_equilibrium, pure_deviation_values, MixedProfile, DEFAULT_TOL};
use crate::sim::{stream_rng, ChainCursor, ChainDriver, Sampler, Trace};

/// Stream used by the referee for initial draws.
const REFEREE_STREAM: u64 = 0xFFFF_FFFF;

fn replica_stream(replica: u64, component: u64) -> u64 {
    (replica << 32) | component
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(u64),
    /// Infinite play, evaluated on the first `t_eval` stages.
    Infinite {
        t_eval: u64,
    },
}

impl Horizon {
    pub fn stages(&self) -> u64 {
        match *self {
            Horizon::Finite(t) => t,
            Horizon::Infinite { t_eval } => t_eval,
        }
    }
}

/// What a coalition observes when choosing its next strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Information {
    /// The whole past profile sequence.
    Maximal,
    /// Only its own past strategies.
    Minimal,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initialization {
    /// Every coalition picks its own first strategy.
    Players,
    /// A referee assigns the first strategies.
    Referee(RefereeInit),
}

#[derive(Clone, Debug, PartialEq)]
pub enum RefereeInit {
    Profile(StrategyProfile),
    /// Independent draws, one distribution per coalition.
    Distributions(Vec<Distribution>),
}

/// Input to a policy at stage `stage ≥ 1`.
pub struct View<'a> {
    pub stage: u64,
    pub coalition: usize,
    /// Own strategies at stages `0..stage`.
    pub own_history: &'a [usize],
    /// Every coalition's history, only under maximal information.
    pub all: Option<&'a [Vec<usize>]>,
}

type StepFn = dyn Fn(&View<'_>, &mut ChaCha8Rng) -> usize + Send + Sync;

/// A user-supplied policy.
#[derive(Clone)]
pub struct CustomPolicy {
    pub name: String,
    pub init: usize,
    pub step: Arc<StepFn>,
}

impl fmt::Debug for CustomPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPolicy").field("name", &self.name).field("init", &self.init).finish()
    }
}

/// How one coalition plays.
#[derive(Clone, Debug)]
pub enum Policy {
    /// A Markov chain on the factor graph; the first strategy is drawn from
    /// `init`.
    Markov {
        driver: ChainDriver,
        init: Distribution,
    },
    Constant(usize),
    /// Replays `steps`; holds the last entry unless `cyclic`.
    Scripted {
        steps: Vec<usize>,
        cyclic: bool,
    },
    /// Stays with probability `laziness`, else moves to a uniform neighbor.
    LazyRandomWalk {
        laziness: f64,
        start: usize,
    },
    /// Moves to the best-valued strategy among the current one and its
    /// neighbors; ties go to the lowest index.
    MyopicGreedy {
        values: Vec<f64>,
        start: usize,
    },
    Custom(CustomPolicy),
}

impl Policy {
    fn validate(&self, n: usize) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        match self {
            Policy::Markov { init, .. } if init.len() != n => {
                bad(format!("Markov policy init over {} strategies, expected {n}", init.len()))
            }
            Policy::Constant(s) if *s >= n => bad(format!("constant strategy {s} out of range {n}")),
            Policy::Scripted { steps, .. } if steps.is_empty() || steps.iter().any(|&s| s >= n) => {
                bad("scripted policy needs a nonempty list of valid strategies".into())
            }
            Policy::LazyRandomWalk { laziness, start } if !(0.0..=1.0).contains(laziness) || *start >= n => {
                bad("lazy walk needs laziness in [0, 1] and a valid start".into())
            }
            Policy::MyopicGreedy { values, start } if values.len() != n || *start >= n => {
                bad("greedy policy needs one value per strategy and a valid start".into())
            }
            Policy::Custom(c) if c.init >= n => bad(format!("custom policy start {} out of range {n}", c.init)),
            _ => Ok(()),
        }
    }

    fn spawn(&self) -> PolicyRun<'_> {
        PolicyRun {
            policy: self,
            cursor: match self {
                Policy::Markov { driver, .. } => Some(driver.cursor()),
                _ => None,
            },
        }
    }
}

struct PolicyRun<'a> {
    policy: &'a Policy,
    cursor: Option<ChainCursor>,
}

impl PolicyRun<'_> {
    fn init(&mut self, rng: &mut ChaCha8Rng) -> usize {
        match self.policy {
            Policy::Markov { init, .. } => init.sample_with(rng.gen()),
            Policy::Constant(s) => *s,
            Policy::Scripted { steps, .. } => steps[0],
            Policy::LazyRandomWalk { start, .. } | Policy::MyopicGreedy { start, .. } => *start,
            Policy::Custom(c) => c.init,
        }
    }

    fn next(&mut self, view: &View<'_>, factor: &Graph, rng: &mut ChaCha8Rng) -> Result<usize> {
        let cur = *view.own_history.last().expect("history starts at stage 0");
        Ok(match self.policy {
            Policy::Markov { .. } => {
                let u = rng.gen();
                self.cursor.as_mut().expect("markov cursor").step(view.stage - 1, cur, u)?
            }
            Policy::Constant(s) => *s,
            Policy::Scripted { steps, cyclic } => {
                let t = view.stage as usize;
                if *cyclic {
                    steps[t % steps.len()]
                } else {
                    steps[t.min(steps.len() - 1)]
                }
            }
            Policy::LazyRandomWalk { laziness, .. } => {
                let nb = factor.neighbors(cur);
                if nb.is_empty() || rng.gen::<f64>() < *laziness {
                    cur
                } else {
                    nb[rng.gen_range(0..nb.len())]
                }
            }
            Policy::MyopicGreedy { values, .. } => {
                let mut best = cur;
                for &v in factor.neighbors(cur) {
                    if values[v] > values[best] || (values[v] == values[best] && v < best) {
                        best = v;
                    }
                }
                best
            }
            Policy::Custom(c) => (c.step)(view, rng),
        })
    }
}

/// A repeated G-game: the game, its C-decomposition and how play proceeds.
#[derive(Clone, Debug)]
pub struct RepeatedConfig {
    game: GGame,
    decomposition: Decomposition,
    pub horizon: Horizon,
    pub info: Information,
    pub init: Initialization,
    pub policies: Vec<Policy>,
}

impl RepeatedConfig {
    /// Fails with `NotDecomposable` when the game graph is not a strong
    /// product over the coalitions' strategy spaces.
    pub fn new(
        game: GGame,
        horizon: Horizon,
        info: Information,
        init: Initialization,
        policies: Vec<Policy>,
    ) -> Result<Self> {
        let decomposition = factorize(game.graph(), game.strategies())?;
        let config = RepeatedConfig { game, decomposition, horizon, info, init, policies };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let r = self.game.coalitions();
        if self.policies.len() != r {
            return Err(Error::ShapeMismatch(format!("{} policies for {r} coalitions", self.policies.len())));
        }
        for (h, p) in self.policies.iter().enumerate() {
            p.validate(self.game.space_size(h))?;
            if let Policy::Markov { driver, init } = p {
                let starts: Vec<usize> = match &self.init {
                    Initialization::Players => init.support().to_vec(),
                    Initialization::Referee(RefereeInit::Profile(s)) => s.0.get(h).copied().into_iter().collect(),
                    Initialization::Referee(RefereeInit::Distributions(ds)) => {
                        ds.get(h).map(|d| d.support().to_vec()).unwrap_or_default()
                    }
                };
                if let Some(bad) = starts.into_iter().find(|&u| !driver.accepts(u)) {
                    return Err(Error::InvalidInit(format!(
                        "coalition {h} may start at strategy {bad}, outside its chain's state space"
                    )));
                }
            }
        }
        if self.horizon.stages() == 0 {
            return Err(Error::InvalidArgument("horizon must be at least one stage".into()));
        }
        match &self.init {
            Initialization::Players => {}
            Initialization::Referee(RefereeInit::Profile(s)) => {
                self.game.profile_index(s)?;
            }
            Initialization::Referee(RefereeInit::Distributions(ds)) => {
                if ds.len() != r || ds.iter().enumerate().any(|(h, d)| d.len() != self.game.space_size(h)) {
                    return Err(Error::ShapeMismatch("referee distributions do not match the strategy spaces".into()));
                }
            }
        }
        Ok(())
    }

    pub fn game(&self) -> &GGame {
        &self.game
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn with_policy(&self, h: usize, policy: Policy) -> Result<Self> {
        let mut out = self.clone();
        out.policies[h] = policy;
        out.validate()?;
        Ok(out)
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Self {
        let mut out = self.clone();
        out.horizon = horizon;
        out
    }
}

/// Average stage payoff and the tail-window liminf estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HorizonPayoff {
    pub final_average: f64,
    /// Minimum running average over stages `[T/2, T]` (equal to the final
    /// average for finite horizons).
    pub tail_liminf_estimate: f64,
}

/// Running-average accumulator for one coalition.
#[derive(Clone, Debug)]
struct PayoffStream {
    sum: f64,
    tail_from: u64,
    tail_min: f64,
}

impl PayoffStream {
    fn new(stages: u64) -> Self {
        PayoffStream { sum: 0.0, tail_from: (stages / 2).max(1), tail_min: f64::INFINITY }
    }

    /// Add the payoff of stage `t` (zero-based).
    fn push(&mut self, t: u64, v: f64) {
        self.sum += v;
        let n = t + 1;
        if n >= self.tail_from {
            self.tail_min = self.tail_min.min(self.sum / n as f64);
        }
    }

    fn finish(&self, stages: u64, finite: bool) -> HorizonPayoff {
        let avg = self.sum / stages as f64;
        HorizonPayoff { final_average: avg, tail_liminf_estimate: if finite { avg } else { self.tail_min } }
    }
}

/// `Π_c^{(T)}` of a joint trace over the game's profiles.
pub fn repeated_payoff(trace: &Trace, game: &GGame, c: usize, horizon: Horizon) -> Result<HorizonPayoff> {
    let stages = horizon.stages();
    if stages == 0 || (trace.len() as u64) < stages {
        return Err(Error::TraceTooShort { len: trace.len(), needed: stages as usize });
    }
    if c >= game.coalitions() {
        return Err(Error::ShapeMismatch(format!("coalition index {c} out of range")));
    }
    let mut acc = PayoffStream::new(stages);
    for (t, &s) in trace.states[..stages as usize].iter().enumerate() {
        acc.push(t as u64, game.payoff_at(c, s));
    }
    Ok(acc.finish(stages, matches!(horizon, Horizon::Finite(_))))
}

/// One simulated play.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepeatedRun {
    /// Per-coalition strategy sequences, present when recorded.
    pub components: Option<Vec<Trace>>,
    /// Joint profile indices, present when recorded.
    pub joint: Option<Trace>,
    pub payoffs: Vec<HorizonPayoff>,
}

fn run_replica(config: &RepeatedConfig, seed: u64, replica: u64, record: bool) -> Result<RepeatedRun> {
    let game = &config.game;
    let dec = &config.decomposition;
    let r = game.coalitions();
    let stages = config.horizon.stages();
    let finite = matches!(config.horizon, Horizon::Finite(_));

    let mut rngs: Vec<ChaCha8Rng> = (0..r).map(|h| stream_rng(seed, replica_stream(replica, h as u64))).collect();
    let mut runs: Vec<PolicyRun<'_>> = config.policies.iter().map(Policy::spawn).collect();
    let mut current: Vec<usize> = runs.iter_mut().zip(rngs.iter_mut()).map(|(p, rng)| p.init(rng)).collect();
    match &config.init {
        Initialization::Players => {}
        Initialization::Referee(RefereeInit::Profile(s)) => current.clone_from(&s.0),
        Initialization::Referee(RefereeInit::Distributions(ds)) => {
            let mut referee = stream_rng(seed, replica_stream(replica, REFEREE_STREAM));
            for (h, d) in ds.iter().enumerate() {
                current[h] = d.sample_with(referee.gen());
            }
        }
    }

    let keep_history = record || config.policies.iter().any(|p| matches!(p, Policy::Custom(_)));
    let mut history: Vec<Vec<usize>> = current.iter().map(|&x| vec![x]).collect();
    let mut joint_states = Vec::new();
    let mut acc: Vec<PayoffStream> = (0..r).map(|_| PayoffStream::new(stages)).collect();

    let mut account = |t: u64, current: &[usize], joint_states: &mut Vec<NodeId>| {
        let joint = dec.joint(current);
        if record {
            joint_states.push(joint);
        }
        for (h, a) in acc.iter_mut().enumerate() {
            a.push(t, game.payoff_at(h, joint));
        }
    };
    account(0, &current, &mut joint_states);

    let mut next = current.clone();
    for t in 1..stages {
        for h in 0..r {
            // Without recorded history only the current strategy is visible.
            let last = [current[h]];
            let own: &[usize] = if keep_history { &history[h] } else { &last };
            let view = View {
                stage: t,
                coalition: h,
                own_history: own,
                all: match config.info {
                    Information::Maximal if keep_history => Some(&history),
                    _ => None,
                },
            };
            let x = runs[h].next(&view, dec.factor(h), &mut rngs[h])?;
            if x >= game.space_size(h) || !dec.factor(h).are_adjacent(current[h], x)? {
                return Err(Error::ConsistencyViolation {
                    stage: t,
                    coalition: h,
                    from: game.strategies()[h][current[h]].clone(),
                    to: game.strategies()[h].get(x).cloned().unwrap_or_else(|| format!("#{x}")),
                });
            }
            next[h] = x;
        }
        std::mem::swap(&mut current, &mut next);
        if keep_history {
            for (h, hist) in history.iter_mut().enumerate() {
                hist.push(current[h]);
            }
        }
        account(t, &current, &mut joint_states);
    }

    let payoffs = acc.iter().map(|a| a.finish(stages, finite)).collect();
    let (components, joint) = if record {
        let comps = history
            .into_iter()
            .enumerate()
            .map(|(h, states)| Trace::from_states(seed, states, game.space_size(h)))
            .collect();
        (Some(comps), Some(Trace::from_states(seed, joint_states, game.profile_count())))
    } else {
        (None, None)
    };
    Ok(RepeatedRun { components, joint, payoffs })
}

/// Play once (replica 0) and record the traces.
pub fn simulate_repeated(config: &RepeatedConfig, seed: u64) -> Result<RepeatedRun> {
    run_replica(config, seed, 0, true)
}

/// Play `replicas` independent times without recording traces.
pub fn simulate_replicas(config: &RepeatedConfig, seed: u64, replicas: u64) -> Result<Vec<RepeatedRun>> {
    (0..replicas).into_par_iter().map(|i| run_replica(config, seed, i, false)).collect()
}

/// Per-coalition summary over replicas.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoalitionPayoff {
    pub coalition: String,
    pub final_average: f64,
    pub tail_liminf_estimate: f64,
    /// Standard error of the final average across replicas.
    pub stderr: f64,
    pub replicas: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffReport {
    pub horizon: Horizon,
    pub coalitions: Vec<CoalitionPayoff>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn payoff_report(config: &RepeatedConfig, runs: &[RepeatedRun]) -> PayoffReport {
    let coalitions = (0..config.game.coalitions())
        .map(|h| {
            let finals: Vec<f64> = runs.iter().map(|r| r.payoffs[h].final_average).collect();
            let tails: Vec<f64> = runs.iter().map(|r| r.payoffs[h].tail_liminf_estimate).collect();
            let (final_average, stderr) = mean_se(&finals);
            CoalitionPayoff {
                coalition: config.game.structure().names()[h].clone(),
                final_average,
                tail_liminf_estimate: mean_se(&tails).0,
                stderr,
                replicas: runs.len() as u64,
            }
        })
        .collect();
    PayoffReport { horizon: config.horizon, coalitions }
}

/// How to realize a coalition's mixed strategy as a chain when its support
/// does not induce a connected subgraph of the factor graph.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainChoice {
    /// Nonhomogeneous chain with this schedule (exact in the limit).
    Schedule(Schedule),
    /// Homogeneous chain targeting `μ_k` with `k = ⌈1/ε⌉`, within `ε` of the
    /// target in total variation.
    Smoothed { epsilon: f64 },
}

/// Chain policies whose long-run play realizes `mixed`.
pub fn equilibrium_policies(
    game: &GGame,
    decomposition: &Decomposition,
    mixed: &MixedProfile,
    choice: &ChainChoice,
) -> Result<Vec<Policy>> {
    if !is_mixed_c_equilibrium(game, mixed, DEFAULT_TOL)? {
        return Err(Error::InvalidArgument("profile is not a mixed C-equilibrium".into()));
    }
    (0..game.coalitions())
        .map(|h| {
            let g = decomposition.factor(h);
            let target = mixed.component(h);
            let driver = match choice {
                ChainChoice::Schedule(s) => ChainDriver::for_target(target, g, s)?,
                ChainChoice::Smoothed { epsilon } => {
                    if !(*epsilon > 0.0 && *epsilon <= 1.0) {
                        return Err(Error::InvalidArgument(format!("epsilon must be in (0, 1], got {epsilon}")));
                    }
                    match classify_case(g, target)? {
                        CaseLabel::SupportInComponent => smoothed_driver(target, g, (1.0 / epsilon).ceil() as u64)?,
                        _ => ChainDriver::for_target(target, g, &Schedule::PowerGap { c: 1.0, e: 3.0 })?,
                    }
                }
            };
            Ok(Policy::Markov { driver, init: target.clone() })
        })
        .collect()
}

fn smoothed_driver(target: &Distribution, g: &Graph, k: u64) -> Result<ChainDriver> {
    let support = target.support();
    let component = g.connected_components().into_iter().find(|c| support.is_subset(c)).ok_or(Error::SupportSplit)?;
    let sub = g.induced_subgraph(&component)?;
    let local = Distribution::normalized(component.iter().map(|&s| target.mass(s)).collect())?;
    let kernel = build_kernel(&smooth(&local, k)?.smoothed, &sub)?;
    Ok(ChainDriver::Homogeneous(Arc::new(Sampler::new(&kernel, &component.to_vec(), g.len()))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NotImproved,
    Improved,
}

/// Equilibrium versus deviation payoffs of one coalition, paired by replica.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationReport {
    pub coalition: usize,
    pub deviation: String,
    pub equilibrium_mean: f64,
    pub equilibrium_stderr: f64,
    pub deviation_mean: f64,
    pub deviation_stderr: f64,
    /// Mean and standard error of the per-replica difference.
    pub difference_mean: f64,
    pub difference_stderr: f64,
    /// Three standard errors of the difference.
    pub margin: f64,
    pub replicas: u64,
    pub verdict: Verdict,
}

/// Compare each deviation of coalition `coalition` against `config`'s own
/// policy on the same random streams, using tail liminf estimates over
/// `t_eval` stages.
pub fn deviation_suite(
    config: &RepeatedConfig,
    coalition: usize,
    deviations: &[(String, Policy)],
    t_eval: u64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<DeviationReport>> {
    if coalition >= config.game.coalitions() {
        return Err(Error::ShapeMismatch(format!("coalition index {coalition} out of range")));
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("at least one replica is required".into()));
    }
    let base = config.with_horizon(Horizon::Infinite { t_eval });
    let eq: Vec<f64> =
        simulate_replicas(&base, seed, replicas)?.iter().map(|r| r.payoffs[coalition].tail_liminf_estimate).collect();
    deviations
        .iter()
        .map(|(name, policy)| {
            let dev_config = base.with_policy(coalition, policy.clone())?;
            let dev: Vec<f64> = simulate_replicas(&dev_config, seed, replicas)?
                .iter()
                .map(|r| r.payoffs[coalition].tail_liminf_estimate)
                .collect();
            let diff: Vec<f64> = dev.iter().zip(&eq).map(|(d, e)| d - e).collect();
            let (equilibrium_mean, equilibrium_stderr) = mean_se(&eq);
            let (deviation_mean, deviation_stderr) = mean_se(&dev);
            let (difference_mean, difference_stderr) = mean_se(&diff);
            let margin = 3.0 * difference_stderr;
            Ok(DeviationReport {
                coalition,
                deviation: name.clone(),
                equilibrium_mean,
                equilibrium_stderr,
                deviation_mean,
                deviation_stderr,
                difference_mean,
                difference_stderr,
                margin,
                replicas,
                verdict: if difference_mean <= margin { Verdict::NotImproved } else { Verdict::Improved },
            })
        })
        .collect()
}

pub fn deviation_test(
    config: &RepeatedConfig,
    coalition: usize,
    deviation: &Policy,
    t_eval: u64,
    replicas: u64,
    seed: u64,
) -> Result<DeviationReport> {
    let devs = [("deviation".to_string(), deviation.clone())];
    Ok(deviation_suite(config, coalition, &devs, t_eval, replicas, seed)?.remove(0))
}

/// A closed walk from strategy 0 that visits its whole component, going
/// depth-first and walking back along tree edges.
fn sweep_walk(g: &Graph) -> Vec<usize> {
    fn dfs(g: &Graph, u: usize, seen: &mut [bool], walk: &mut Vec<usize>) {
        seen[u] = true;
        for &v in g.neighbors(u) {
            if !seen[v] {
                walk.push(v);
                dfs(g, v, seen, walk);
                walk.push(u);
            }
        }
    }
    let mut seen = vec![false; g.len()];
    let mut walk = vec![0];
    dfs(g, 0, &mut seen, &mut walk);
    if walk.len() > 1 {
        // The walk ends back at 0, which the cycle restarts from.
        walk.pop();
    }
    walk
}

/// The five standard deviations tried against an equilibrium policy:
/// constant at the first and at the last strategy, a lazy random walk, a
/// myopic greedy climber on the equilibrium expected values, and a sweep
/// that cycles through every reachable strategy.
pub fn stock_deviations(
    game: &GGame,
    decomposition: &Decomposition,
    mixed: &MixedProfile,
    coalition: usize,
) -> Result<Vec<(String, Policy)>> {
    let n = game.space_size(coalition);
    let values = pure_deviation_values(game, mixed, coalition)?;
    Ok(vec![
        ("dirac-first".into(), Policy::Constant(0)),
        ("dirac-last".into(), Policy::Constant(n - 1)),
        ("lazy-walk".into(), Policy::LazyRandomWalk { laziness: 0.5, start: 0 }),
        ("myopic-greedy".into(), Policy::MyopicGreedy { values, start: n - 1 }),
        ("sweep".into(), Policy::Scripted { steps: sweep_walk(decomposition.factor(coalition)), cyclic: true }),
    ])
}

/// Long-run payoff of one coalition against its equilibrium value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffMatch {
    pub coalition: String,
    pub expected: f64,
    /// Allowed deviation, `0.02 · (max − min payoff)`.
    pub tolerance: f64,
    pub final_averages: Vec<f64>,
    pub tail_liminf_estimates: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FolkReport {
    pub equilibrium: Vec<Vec<f64>>,
    pub t_eval: u64,
    pub replicas: u64,
    pub seed: u64,
    pub payoffs: Vec<PayoffMatch>,
    pub deviations: Vec<DeviationReport>,
    pub pass: bool,
}

/// Realize `mixed` as chain policies, check that long-run averages match
/// the expected payoffs, and run the stock deviations for every coalition.
pub fn folk_check(
    game: &GGame,
    mixed: &MixedProfile,
    choice: &ChainChoice,
    t_eval: u64,
    replicas: u64,
    seed: u64,
) -> Result<FolkReport> {
    let decomposition = factorize(game.graph(), game.strategies())?;
    let policies = equilibrium_policies(game, &decomposition, mixed, choice)?;
    let config = RepeatedConfig::new(
        game.clone(),
        Horizon::Infinite { t_eval },
        Information::Minimal,
        Initialization::Players,
        policies,
    )?;
    let runs = simulate_replicas(&config, seed, replicas)?;
    let mut payoffs = Vec::new();
    for h in 0..game.coalitions() {
        let table = game.payoff_table(h);
        let range = table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - table.iter().copied().fold(f64::INFINITY, f64::min);
        let expected = expected_payoff(game, mixed, h)?;
        let tolerance = 0.02 * range;
        let final_averages: Vec<f64> = runs.iter().map(|r| r.payoffs[h].final_average).collect();
        let tail_liminf_estimates: Vec<f64> = runs.iter().map(|r| r.payoffs[h].tail_liminf_estimate).collect();
        let pass = final_averages.iter().chain(&tail_liminf_estimates).all(|v| (v - expected).abs() <= tolerance);
        payoffs.push(PayoffMatch {
            coalition: game.structure().names()[h].clone(),
            expected,
            tolerance,
            final_averages,
            tail_liminf_estimates,
            pass,
        });
    }
    let mut deviations = Vec::new();
    for h in 0..game.coalitions() {
        let devs = stock_deviations(game, &decomposition, mixed, h)?;
        deviations.extend(deviation_suite(&config, h, &devs, t_eval, replicas, seed)?);
    }
    let pass = payoffs.iter().all(|p| p.pass) && deviations.iter().all(|d| d.verdict == Verdict::NotImproved);
    Ok(FolkReport {
        equilibrium: mixed.components().iter().map(|d| d.masses().to_vec()).collect(),
        t_eval,
        replicas,
        seed,
        payoffs,
        deviations,
        pass,
    })
}

/// Whether `sbar` is an equilibrium of the one-shot game in which every
/// coalition may only switch to factor-graph neighbors of its own strategy,
/// the others staying at `sbar`.
pub fn two_stage_check(game: &GGame, sbar: &StrategyProfile) -> Result<bool> {
    if !is_pure_c_equilibrium(game, sbar)? {
        return Err(Error::NotPureEquilibrium);
    }
    let decomposition = factorize(game.graph(), game.strategies())?;
    for h in 0..game.coalitions() {
        let current = game.payoff(h, sbar)?;
        for &x in decomposition.factor(h).neighbors(sbar.0[h]) {
            let mut s = sbar.clone();
            s.0[h] = x;
            if game.payoff(h, &s)? > current {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
