//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use graphgame::{CoalitionStructure, Distribution, GGame, Graph, StrategyProfile};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random graph on `n` nodes with edge probability `p`.
pub fn random_graph(rng: &mut ChaCha8Rng, labels: Vec<String>, p: f64) -> Graph {
    let n = labels.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_index_edges(labels, &edges).unwrap()
}

/// Random connected graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra: f64) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = HashSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (a, b) = (order[i], order[j]);
        edges.insert((a.min(b), a.max(b)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(extra) {
                edges.insert((u, v));
            }
        }
    }
    let edges: Vec<(usize, usize)> = edges.into_iter().collect();
    Graph::from_index_edges(names("v", n), &edges).unwrap()
}

pub fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    Distribution::normalized((0..n).map(|_| rng.gen_range(0.01..1.0)).collect()).unwrap()
}

/// Random distribution with some zero entries (at least one positive).
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let mut w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.01..1.0) } else { 0.0 }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    Distribution::normalized(w).unwrap()
}

/// Random game with `r` singleton coalitions, given space sizes and a
/// random graph over the joint profiles.
pub fn random_game(rng: &mut ChaCha8Rng, sizes: &[usize], edge_p: f64) -> GGame {
    let players: Vec<String> = names("p", sizes.len());
    let refs: Vec<&str> = players.iter().map(String::as_str).collect();
    let structure = CoalitionStructure::singletons(&refs);
    let strategies: Vec<Vec<String>> = sizes.iter().map(|&n| names("x", n)).collect();
    let total: usize = sizes.iter().product();
    let payoffs: Vec<Vec<f64>> =
        sizes.iter().map(|_| (0..total).map(|_| rng.gen_range(-5..=5) as f64).collect()).collect();
    let graph = random_graph(rng, GGame::profile_labels_for(&strategies), edge_p);
    GGame::new(structure, strategies, payoffs, graph).unwrap()
}

pub fn random_sizes(rng: &mut ChaCha8Rng, max_r: usize, max_s: usize) -> Vec<usize> {
    let r = rng.gen_range(1..=max_r);
    (0..r).map(|_| rng.gen_range(1..=max_s)).collect()
}

/// Row-major decode, first coordinate slowest.
pub fn decode(sizes: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for h in (0..sizes.len()).rev() {
        out[h] = index % sizes[h];
        index /= sizes[h];
    }
    out
}

pub fn encode(sizes: &[usize], coords: &[usize]) -> usize {
    coords.iter().zip(sizes).fold(0, |acc, (&c, &n)| acc * n + c)
}

fn edge_set(g: &Graph) -> HashSet<(usize, usize)> {
    g.edges().flat_map(|(u, v)| [(u, v), (v, u)]).collect()
}

/// Pure C-equilibria straight from the definition.
pub fn oracle_pure_equilibria(game: &GGame) -> Vec<StrategyProfile> {
    let sizes = game.space_sizes().to_vec();
    let edges = edge_set(game.graph());
    let n = game.profile_count();
    let mut out = Vec::new();
    for sbar in 0..n {
        let bar = decode(&sizes, sbar);
        let mut ok = true;
        'outer: for s in 0..n {
            if !edges.contains(&(sbar, s)) {
                continue;
            }
            let other = decode(&sizes, s);
            for h in 0..sizes.len() {
                let mut dev = bar.clone();
                dev[h] = other[h];
                if game.payoff_table(h)[encode(&sizes, &dev)] > game.payoff_table(h)[sbar] {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            out.push(StrategyProfile(bar));
        }
    }
    out
}

/// Expected payoff by summing over every joint profile.
pub fn oracle_expected(game: &GGame, weights: &[Vec<f64>], c: usize) -> f64 {
    let sizes = game.space_sizes().to_vec();
    (0..game.profile_count())
        .map(|i| {
            let coords = decode(&sizes, i);
            let w: f64 = coords.iter().enumerate().map(|(h, &x)| weights[h][x]).product();
            w * game.payoff_table(c)[i]
        })
        .sum()
}

/// Uniform point on the simplex.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &graphgame::DMatrix<f64>) -> Dense {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn mat_mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn mat_pow(a: &Dense, n: u32) -> Dense {
    let mut out = a.clone();
    for _ in 1..n {
        out = mat_mul(&out, a);
    }
    out
}

/// Left eigenvector for eigenvalue 1 of an irreducible aperiodic stochastic
/// matrix: iterate `v ← v Q` with `Q = P^(2^j)` until consecutive iterates
/// agree to 1e-15 (or 80 squarings), then return `v`.
pub fn stationary_oracle(p: &Dense) -> Vec<f64> {
    let n = p.len();
    let mut q = p.clone();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..80 {
        let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| v[i] * q[i][j]).sum()).collect();
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < 1e-15 {
            break;
        }
        q = mat_mul(&q, &q);
        // Keep rows stochastic; rounding would otherwise compound with each squaring.
        for row in &mut q {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    v
}

/// `1 − min_{i<j} Σ_h min(p_ih, p_jh)`.
pub fn dobrushin_oracle(p: &Dense) -> f64 {
    let n = p.len();
    let mut best: f64 = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            best = best.min(p[i].iter().zip(&p[j]).map(|(a, b)| a.min(*b)).sum());
        }
    }
    1.0 - best
}

/// Nodes reachable from `start` by consistent moves.
pub fn reachable(g: &Graph, start: usize) -> HashSet<usize> {
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen
}
