//! JSON input formats for games, graphs, targets and mixed profiles.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::game::{coalition_payoff_from_players, CoalitionStructure, GGame};
use crate::graph::{strong_product, Graph, GraphDoc};
use crate::mixed::MixedProfile;

/// Where a game's strategy graph comes from.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    /// `"complete"` or `"isolated"` over all joint profiles.
    Named(String),
    /// Path to a graph file, relative to the game file.
    File {
        file: String,
    },
    /// Strong product of per-coalition factor graphs.
    Product {
        product: Vec<GraphSpec>,
    },
    Inline(GraphDoc),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDoc {
    pub players: Vec<String>,
    pub coalitions: Vec<Vec<String>>,
    #[serde(default)]
    pub coalition_names: Option<Vec<String>>,
    pub strategies: Vec<Vec<String>>,
    #[serde(default)]
    pub payoffs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub player_payoffs: Option<Vec<Vec<f64>>>,
    pub graph: GraphSpec,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn resolve_graph(spec: &GraphSpec, nodes: Option<&[String]>, base: &Path) -> Result<Graph> {
    match spec {
        GraphSpec::Named(name) => {
            let nodes = nodes.ok_or_else(|| {
                Error::InvalidArgument(format!("graph `{name}` needs a node set; give factor graphs explicitly"))
            })?;
            match name.as_str() {
                "complete" => Graph::complete(nodes.to_vec()),
                "isolated" => Graph::isolated(nodes.to_vec()),
                other => {
                    Err(Error::InvalidArgument(format!("unknown graph name `{other}` (expected complete or isolated)")))
                }
            }
        }
        GraphSpec::File { file } => load_graph(&base.join(file)),
        GraphSpec::Product { product } => {
            let factors = product.iter().map(|f| resolve_graph(f, None, base)).collect::<Result<Vec<_>>>()?;
            if factors.is_empty() {
                return Err(Error::InvalidArgument("product needs at least one factor".into()));
            }
            Ok(strong_product(&factors))
        }
        GraphSpec::Inline(doc) => Graph::try_from(doc.clone()),
    }
}

/// Build a game from its JSON document; graph files resolve against `base`.
pub fn parse_game(text: &str, base: &Path) -> Result<GGame> {
    let doc: GameDoc = serde_json::from_str(text)?;
    let structure = CoalitionStructure::new(doc.players, &doc.coalitions, doc.coalition_names)?;
    let profiles = GGame::profile_labels_for(&doc.strategies);
    let graph = resolve_graph(&doc.graph, Some(&profiles), base)?;
    let payoffs = match (doc.payoffs, doc.player_payoffs) {
        (Some(direct), Some(players)) => {
            let summed = coalition_payoff_from_players(&players, &structure)?;
            let mismatch = direct.len() != summed.len()
                || direct
                    .iter()
                    .zip(&summed)
                    .any(|(a, b)| a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12));
            if mismatch {
                log::warn!("coalition payoffs differ from the sums of player payoffs; using coalition payoffs");
            }
            direct
        }
        (Some(direct), None) => direct,
        (None, Some(players)) => coalition_payoff_from_players(&players, &structure)?,
        (None, None) => {
            return Err(Error::InvalidArgument("game needs `payoffs` or `player_payoffs`".into()));
        }
    };
    GGame::new(structure, doc.strategies, payoffs, graph)
}

pub fn load_game(path: &Path) -> Result<GGame> {
    parse_game(&read(path)?, path.parent().unwrap_or(Path::new(".")))
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    Graph::from_json(&read(path)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TargetDoc {
    Masses(Vec<f64>),
    ByLabel(BTreeMap<String, f64>),
}

/// A distribution over `g`'s nodes: an array in node order, or an object
/// from node label to mass with missing labels at zero.
pub fn parse_target(text: &str, g: &Graph) -> Result<Distribution> {
    match serde_json::from_str(text)? {
        TargetDoc::Masses(m) => {
            if m.len() != g.len() {
                return Err(Error::ShapeMismatch(format!(
                    "target has {} masses, graph has {} nodes",
                    m.len(),
                    g.len()
                )));
            }
            Distribution::new(m)
        }
        TargetDoc::ByLabel(map) => {
            let mut m = vec![0.0; g.len()];
            for (label, mass) in map {
                m[g.id(&label)?] = mass;
            }
            Distribution::new(m)
        }
    }
}

pub fn load_target(path: &Path, g: &Graph) -> Result<Distribution> {
    parse_target(&read(path)?, g)
}

pub fn load_mixed(path: &Path, game: &GGame) -> Result<MixedProfile> {
    MixedProfile::from_json(game, &read(path)?)
}
