//! G-games: coalition structures, payoff tensors over joint profiles, and
//! pure C-equilibria.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{tuple_label, Graph, NodeId, Radix};

/// A partition of the players into coalitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalitionStructure {
    players: Vec<String>,
    coalitions: Vec<Vec<usize>>,
    names: Vec<String>,
}

impl CoalitionStructure {
    /// `coalitions` lists player names per coalition. When `names` is `None`
    /// each coalition is named by its members joined with `+`.
    pub fn new<S: AsRef<str>>(players: Vec<String>, coalitions: &[Vec<S>], names: Option<Vec<String>>) -> Result<Self> {
        if coalitions.is_empty() {
            return Err(Error::InvalidCoalitions("at least one coalition is required".into()));
        }
        let mut seen = vec![false; players.len()];
        let mut blocks = Vec::with_capacity(coalitions.len());
        for c in coalitions {
            if c.is_empty() {
                return Err(Error::InvalidCoalitions("empty coalition".into()));
            }
            let mut block = Vec::with_capacity(c.len());
            for p in c {
                let p = p.as_ref();
                let j = players
                    .iter()
                    .position(|q| q == p)
                    .ok_or_else(|| Error::InvalidCoalitions(format!("unknown player `{p}`")))?;
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidCoalitions(format!("player `{p}` in two coalitions")));
                }
                block.push(j);
            }
            blocks.push(block);
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidCoalitions(format!("player `{}` belongs to no coalition", players[j])));
        }
        let names = match names {
            Some(n) if n.len() != blocks.len() => {
                return Err(Error::InvalidCoalitions(format!(
                    "{} coalition names for {} coalitions",
                    n.len(),
                    blocks.len()
                )))
            }
            Some(n) => n,
            None => {
                blocks.iter().map(|b| b.iter().map(|&j| players[j].as_str()).collect::<Vec<_>>().join("+")).collect()
            }
        };
        if names.iter().collect::<HashSet<_>>().len() != names.len() {
            return Err(Error::InvalidCoalitions("duplicate coalition names".into()));
        }
        Ok(CoalitionStructure { players, coalitions: blocks, names })
    }

    /// One coalition per player, named after the player.
    pub fn singletons(players: &[&str]) -> Self {
        let players: Vec<String> = players.iter().map(|p| p.to_string()).collect();
        let blocks: Vec<Vec<String>> = players.iter().map(|p| vec![p.clone()]).collect();
        Self::new(players, &blocks, None).expect("singletons partition the players")
    }

    /// The grand coalition `{V}`.
    pub fn grand(players: &[&str]) -> Self {
        let players: Vec<String> = players.iter().map(|p| p.to_string()).collect();
        let block = vec![players.clone()];
        Self::new(players, &block, None).expect("grand coalition partitions the players")
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn coalitions(&self) -> &[Vec<usize>] {
        &self.coalitions
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    /// Index of the coalition containing player `j`.
    pub fn coalition_of(&self, j: usize) -> usize {
        self.coalitions.iter().position(|c| c.contains(&j)).expect("coalitions partition the players")
    }
}

/// Per-coalition strategy indices `(s_C1, ..., s_Cr)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrategyProfile(pub Vec<usize>);

impl StrategyProfile {
    pub fn coalitions(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, h: usize) -> usize {
        self.0[h]
    }
}

impl From<Vec<usize>> for StrategyProfile {
    fn from(v: Vec<usize>) -> Self {
        StrategyProfile(v)
    }
}

/// `[s, t; C]`: take the blocks of `t` for the coalitions listed in `c` and
/// the blocks of `s` elsewhere.
pub fn substitute(s: &StrategyProfile, t: &StrategyProfile, c: &[usize]) -> Result<StrategyProfile> {
    if s.0.len() != t.0.len() {
        return Err(Error::ShapeMismatch(format!("profiles over {} and {} coalitions", s.0.len(), t.0.len())));
    }
    let mut out = s.clone();
    for &h in c {
        if h >= out.0.len() {
            return Err(Error::ShapeMismatch(format!("coalition index {h} out of range")));
        }
        out.0[h] = t.0[h];
    }
    Ok(out)
}

/// Coalition payoffs as sums of member payoffs, `Π_C = Σ_{i∈C} π_i`.
pub fn coalition_payoff_from_players(
    player_payoffs: &[Vec<f64>],
    structure: &CoalitionStructure,
) -> Result<Vec<Vec<f64>>> {
    if player_payoffs.len() != structure.players().len() {
        return Err(Error::ShapeMismatch(format!(
            "{} player payoff tables for {} players",
            player_payoffs.len(),
            structure.players().len()
        )));
    }
    let len = player_payoffs.first().map_or(0, Vec::len);
    if let Some(bad) = player_payoffs.iter().position(|t| t.len() != len) {
        return Err(Error::ShapeMismatch(format!(
            "player {bad} payoff table has {} entries, expected {len}",
            player_payoffs[bad].len()
        )));
    }
    Ok(structure
        .coalitions()
        .iter()
        .map(|c| (0..len).map(|i| c.iter().map(|&j| player_payoffs[j][i]).sum()).collect())
        .collect())
}

/// A game whose joint profiles are the nodes of a graph.
///
/// Payoff tables are dense and row-major over coalition order (first
/// coalition slowest). The graph is stored in the same order, so node `i` of
/// [`GGame::graph`] is profile index `i`.
#[derive(Clone, Debug)]
pub struct GGame {
    structure: CoalitionStructure,
    strategies: Vec<Vec<String>>,
    payoffs: Vec<Vec<f64>>,
    graph: Graph,
    radix: Radix,
}

impl GGame {
    /// The graph may list profiles in any order; it is reindexed to the
    /// canonical row-major order. Its labels must be the joint profile labels
    /// (coalition strategy labels joined with `|`).
    pub fn new(
        structure: CoalitionStructure,
        strategies: Vec<Vec<String>>,
        payoffs: Vec<Vec<f64>>,
        graph: Graph,
    ) -> Result<Self> {
        let r = structure.len();
        if strategies.len() != r {
            return Err(Error::ShapeMismatch(format!("{} strategy lists for {r} coalitions", strategies.len())));
        }
        for (h, s) in strategies.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::ShapeMismatch(format!("coalition {h} has no strategies")));
            }
            if s.iter().collect::<HashSet<_>>().len() != s.len() {
                return Err(Error::ShapeMismatch(format!("coalition {h} repeats a strategy label")));
            }
            if s.iter().any(|l| l.contains(crate::graph::TUPLE_SEP)) {
                return Err(Error::ShapeMismatch(format!(
                    "strategy labels of coalition {h} may not contain `{}`",
                    crate::graph::TUPLE_SEP
                )));
            }
        }
        let sizes: Vec<usize> = strategies.iter().map(Vec::len).collect();
        let radix = Radix::new(&sizes);
        if payoffs.len() != r {
            return Err(Error::ShapeMismatch(format!("{} payoff tables for {r} coalitions", payoffs.len())));
        }
        for (h, table) in payoffs.iter().enumerate() {
            if table.len() != radix.total() {
                return Err(Error::ShapeMismatch(format!(
                    "payoff table of coalition {h} has {} entries, expected {} = {:?}",
                    table.len(),
                    radix.total(),
                    sizes
                )));
            }
            if let Some(index) = table.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinitePayoff { coalition: h, index });
            }
        }
        let labels: Vec<String> = (0..radix.total()).map(|i| profile_label_of(&strategies, &radix, i)).collect();
        let graph = if graph.labels() == labels.as_slice() { graph } else { graph.reindexed(&labels)? };
        Ok(GGame { structure, strategies, payoffs, graph, radix })
    }

    /// Build with coalition payoffs summed from per-player tables.
    pub fn from_player_payoffs(
        structure: CoalitionStructure,
        strategies: Vec<Vec<String>>,
        player_payoffs: &[Vec<f64>],
        graph: Graph,
    ) -> Result<Self> {
        let payoffs = coalition_payoff_from_players(player_payoffs, &structure)?;
        Self::new(structure, strategies, payoffs, graph)
    }

    /// All joint profile labels in canonical order.
    pub fn profile_labels_for(strategies: &[Vec<String>]) -> Vec<String> {
        let sizes: Vec<usize> = strategies.iter().map(Vec::len).collect();
        let radix = Radix::new(&sizes);
        (0..radix.total()).map(|i| profile_label_of(strategies, &radix, i)).collect()
    }

    /// Same game with a different strategy graph.
    pub fn with_graph(&self, graph: Graph) -> Result<Self> {
        Self::new(self.structure.clone(), self.strategies.clone(), self.payoffs.clone(), graph)
    }

    /// Same game with different payoff tables.
    pub fn with_payoffs(&self, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.structure.clone(), self.strategies.clone(), payoffs, self.graph.clone())
    }

    pub fn structure(&self) -> &CoalitionStructure {
        &self.structure
    }

    /// Number of coalitions `r`.
    pub fn coalitions(&self) -> usize {
        self.structure.len()
    }

    pub fn strategies(&self) -> &[Vec<String>] {
        &self.strategies
    }

    pub fn space_size(&self, h: usize) -> usize {
        self.strategies[h].len()
    }

    pub fn space_sizes(&self) -> &[usize] {
        self.radix.sizes()
    }

    pub fn profile_count(&self) -> usize {
        self.radix.total()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn payoff_table(&self, h: usize) -> &[f64] {
        &self.payoffs[h]
    }

    pub fn payoff_tables(&self) -> &[Vec<f64>] {
        &self.payoffs
    }

    pub(crate) fn radix(&self) -> &Radix {
        &self.radix
    }

    pub fn profile_index(&self, s: &StrategyProfile) -> Result<NodeId> {
        if s.0.len() != self.coalitions() {
            return Err(Error::ShapeMismatch(format!(
                "profile over {} coalitions, game has {}",
                s.0.len(),
                self.coalitions()
            )));
        }
        for (h, (&x, &n)) in s.0.iter().zip(self.radix.sizes()).enumerate() {
            if x >= n {
                return Err(Error::ShapeMismatch(format!(
                    "strategy {x} of coalition {h} out of range ({n} strategies)"
                )));
            }
        }
        Ok(self.radix.encode(&s.0))
    }

    pub fn profile(&self, index: NodeId) -> StrategyProfile {
        StrategyProfile(self.radix.decode(index))
    }

    pub fn profile_label(&self, index: NodeId) -> &str {
        self.graph.label(index)
    }

    /// Profile from per-coalition strategy labels.
    pub fn profile_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<StrategyProfile> {
        if labels.len() != self.coalitions() {
            return Err(Error::ShapeMismatch(format!("{} labels for {} coalitions", labels.len(), self.coalitions())));
        }
        labels
            .iter()
            .zip(&self.strategies)
            .map(|(l, s)| {
                s.iter().position(|x| x == l.as_ref()).ok_or_else(|| Error::UnknownNode(l.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(StrategyProfile)
    }

    pub fn payoff(&self, h: usize, s: &StrategyProfile) -> Result<f64> {
        Ok(self.payoffs[h][self.profile_index(s)?])
    }

    #[inline]
    pub fn payoff_at(&self, h: usize, index: NodeId) -> f64 {
        self.payoffs[h][index]
    }

    /// Profile index of `[s, t; {C_h}]`.
    #[inline]
    pub(crate) fn substitute_index(&self, s: NodeId, t: NodeId, h: usize) -> NodeId {
        self.radix.with_coord(s, h, self.radix.coord(t, h))
    }
}

fn profile_label_of(strategies: &[Vec<String>], radix: &Radix, index: usize) -> String {
    let coords = radix.decode(index);
    let parts: Vec<&str> = coords.iter().zip(strategies).map(|(&c, s)| s[c].as_str()).collect();
    tuple_label(&parts)
}

/// A profitable graph deviation witnessing that a profile is not a pure
/// C-equilibrium.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub coalition: usize,
    /// Graph neighbor `s` of the candidate profile.
    pub neighbor: NodeId,
    /// The substituted profile `[s̄, s; C]`.
    pub deviation: NodeId,
    pub gain: f64,
}

/// All deviations violating the pure C-equilibrium inequality at profile
/// index `sbar`, in (neighbor, coalition) order.
pub fn violations_at(game: &GGame, sbar: NodeId) -> Vec<Violation> {
    let mut out = Vec::new();
    for &s in game.graph().neighbors(sbar) {
        for h in 0..game.coalitions() {
            let dev = game.substitute_index(sbar, s, h);
            let gain = game.payoff_at(h, dev) - game.payoff_at(h, sbar);
            if gain > 0.0 {
                out.push(Violation { coalition: h, neighbor: s, deviation: dev, gain });
            }
        }
    }
    out
}

fn is_equilibrium_at(game: &GGame, sbar: NodeId) -> bool {
    game.graph().neighbors(sbar).iter().all(|&s| {
        (0..game.coalitions()).all(|h| game.payoff_at(h, sbar) >= game.payoff_at(h, game.substitute_index(sbar, s, h)))
    })
}

/// `Π_C(s̄) >= Π_C([s̄, s; C])` for every coalition `C` and every graph
/// neighbor `s` of `s̄`.
pub fn is_pure_c_equilibrium(game: &GGame, sbar: &StrategyProfile) -> Result<bool> {
    Ok(is_equilibrium_at(game, game.profile_index(sbar)?))
}

/// The set of pure C-equilibria, by exhaustive enumeration. May be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EquilibriumSet {
    profiles: Vec<StrategyProfile>,
}

impl EquilibriumSet {
    pub fn profiles(&self) -> &[StrategyProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn contains(&self, s: &StrategyProfile) -> bool {
        self.profiles.binary_search(s).is_ok()
    }
}

pub fn pure_c_equilibria(game: &GGame) -> EquilibriumSet {
    let profiles = (0..game.profile_count())
        .into_par_iter()
        .filter(|&i| is_equilibrium_at(game, i))
        .map(|i| game.profile(i))
        .collect();
    EquilibriumSet { profiles }
}
