//! Expected payoffs under product distributions and mixed C-equilibria.
//!
//! A mixed profile assigns each coalition an independent distribution over
//! its own strategy space. Because the expected payoff of coalition `ℓ` is
//! linear in `Λ_ℓ`, the best response over all distributions is attained at
//! a pure strategy, so equilibrium checks only compare against Diracs.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::game::{GGame, StrategyProfile};

/// Default certification tolerance for computed equilibria.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Relative tolerance for reporting ties among best responses.
const TIE_TOL: f64 = 1e-12;

/// One distribution per coalition, `Λ_C1 × ... × Λ_Cr`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixedProfile {
    components: Vec<Distribution>,
}

impl MixedProfile {
    pub fn new(components: Vec<Distribution>) -> Self {
        MixedProfile { components }
    }

    /// Product of Diracs at a pure profile.
    pub fn dirac(game: &GGame, s: &StrategyProfile) -> Result<Self> {
        game.profile_index(s)?;
        Ok(MixedProfile {
            components: s.0.iter().enumerate().map(|(h, &x)| Distribution::dirac(game.space_size(h), x)).collect(),
        })
    }

    pub fn uniform(game: &GGame) -> Self {
        MixedProfile { components: game.space_sizes().iter().map(|&n| Distribution::uniform(n)).collect() }
    }

    pub fn components(&self) -> &[Distribution] {
        &self.components
    }

    pub fn component(&self, h: usize) -> &Distribution {
        &self.components[h]
    }

    /// Replace coalition `h`'s distribution.
    pub fn with_component(&self, h: usize, d: Distribution) -> Self {
        let mut out = self.clone();
        out.components[h] = d;
        out
    }

    fn check(&self, game: &GGame) -> Result<()> {
        if self.components.len() != game.coalitions() {
            return Err(Error::ShapeMismatch(format!(
                "mixed profile over {} coalitions, game has {}",
                self.components.len(),
                game.coalitions()
            )));
        }
        for (h, d) in self.components.iter().enumerate() {
            if d.len() != game.space_size(h) {
                return Err(Error::ShapeMismatch(format!(
                    "coalition {h}: distribution over {} strategies, expected {}",
                    d.len(),
                    game.space_size(h)
                )));
            }
        }
        Ok(())
    }

    /// JSON object mapping coalition name to its masses.
    pub fn to_json(&self, game: &GGame) -> Result<String> {
        self.check(game)?;
        let map: BTreeMap<&str, &[f64]> = game
            .structure()
            .names()
            .iter()
            .map(String::as_str)
            .zip(self.components.iter().map(Distribution::masses))
            .collect();
        Ok(serde_json::to_string_pretty(&map)?)
    }

    pub fn from_json(game: &GGame, s: &str) -> Result<Self> {
        let mut map: BTreeMap<String, Vec<f64>> = serde_json::from_str(s)?;
        let mut components = Vec::with_capacity(game.coalitions());
        for name in game.structure().names() {
            let masses = map
                .remove(name)
                .ok_or_else(|| Error::ShapeMismatch(format!("mixed profile is missing coalition `{name}`")))?;
            components.push(Distribution::new(masses)?);
        }
        if let Some(extra) = map.keys().next() {
            return Err(Error::ShapeMismatch(format!("unknown coalition `{extra}`")));
        }
        let out = MixedProfile { components };
        out.check(game)?;
        Ok(out)
    }
}

/// `Σ_s table[s] Π_h weights[h][s_h]`, skipping zero weights.
fn contract(game: &GGame, table: &[f64], weights: &[&[f64]]) -> f64 {
    let r = weights.len();
    let supports: Vec<Vec<usize>> = weights.iter().map(|w| (0..w.len()).filter(|&i| w[i] != 0.0).collect()).collect();
    let strides: Vec<usize> = (0..r).map(|h| game.radix().stride(h)).collect();

    fn rec(
        h: usize,
        offset: usize,
        weight: f64,
        table: &[f64],
        weights: &[&[f64]],
        supports: &[Vec<usize>],
        strides: &[usize],
    ) -> f64 {
        if h == weights.len() {
            return table[offset] * weight;
        }
        supports[h]
            .iter()
            .map(|&i| rec(h + 1, offset + i * strides[h], weight * weights[h][i], table, weights, supports, strides))
            .sum()
    }
    rec(0, 0, 1.0, table, weights, &supports, &strides)
}

/// Expected payoff of coalition `c` under the product distribution.
pub fn expected_payoff(game: &GGame, profile: &MixedProfile, c: usize) -> Result<f64> {
    profile.check(game)?;
    if c >= game.coalitions() {
        return Err(Error::ShapeMismatch(format!("coalition index {c} out of range")));
    }
    let weights: Vec<&[f64]> = profile.components.iter().map(Distribution::masses).collect();
    Ok(contract(game, game.payoff_table(c), &weights))
}

/// Expected payoff of coalition `c` for each of its pure strategies, the
/// other coalitions playing `profile`.
pub fn pure_deviation_values(game: &GGame, profile: &MixedProfile, c: usize) -> Result<Vec<f64>> {
    profile.check(game)?;
    if c >= game.coalitions() {
        return Err(Error::ShapeMismatch(format!("coalition index {c} out of range")));
    }
    let n = game.space_size(c);
    let mut dirac = vec![0.0; n];
    (0..n)
        .map(|i| {
            dirac.iter_mut().for_each(|x| *x = 0.0);
            dirac[i] = 1.0;
            let weights: Vec<&[f64]> = profile
                .components
                .iter()
                .enumerate()
                .map(|(h, d)| if h == c { dirac.as_slice() } else { d.masses() })
                .collect();
            Ok(contract(game, game.payoff_table(c), &weights))
        })
        .collect()
}

/// Value of the best pure response and every strategy attaining it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestResponse {
    pub value: f64,
    /// Maximizers in increasing strategy order.
    pub argmax: Vec<usize>,
}

pub fn best_pure_response(game: &GGame, profile: &MixedProfile, c: usize) -> Result<BestResponse> {
    let values = pure_deviation_values(game, profile, c)?;
    let value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOL * value.abs().max(1.0);
    let argmax = (0..values.len()).filter(|&i| values[i] >= value - slack).collect();
    Ok(BestResponse { value, argmax })
}

/// Largest gain any coalition can obtain by a unilateral deviation.
pub fn equilibrium_gap(game: &GGame, profile: &MixedProfile) -> Result<f64> {
    let mut gap = f64::NEG_INFINITY;
    for c in 0..game.coalitions() {
        let current = expected_payoff(game, profile, c)?;
        let best = best_pure_response(game, profile, c)?.value;
        gap = gap.max(best - current);
    }
    Ok(gap)
}

pub fn is_mixed_c_equilibrium(game: &GGame, profile: &MixedProfile, tol: f64) -> Result<bool> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be nonnegative, got {tol}")));
    }
    for c in 0..game.coalitions() {
        let current = expected_payoff(game, profile, c)?;
        if current < best_pure_response(game, profile, c)?.value - tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether the Dirac product at `s` is a mixed C-equilibrium (exactly).
pub fn pure_in_mixed(game: &GGame, s: &StrategyProfile) -> Result<bool> {
    is_mixed_c_equilibrium(game, &MixedProfile::dirac(game, s)?, 0.0)
}

/// Solver limits for [`compute_mixed_equilibrium_with`].
#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    /// Fictitious-play iteration cap.
    pub max_iterations: usize,
    /// Largest per-coalition strategy count handled by support enumeration.
    pub enumeration_max_strategies: usize,
    /// Largest coalition count handled by support enumeration.
    pub enumeration_max_coalitions: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iterations: 100_000,
            enumeration_max_strategies: 4,
            enumeration_max_coalitions: 3,
        }
    }
}

pub fn compute_mixed_equilibrium(game: &GGame) -> Result<MixedProfile> {
    compute_mixed_equilibrium_with(game, &SolverOptions::default())
}

/// Find a mixed C-equilibrium certified at `opts.tol`.
///
/// Pure profiles are tried first. Small games then go through support
/// enumeration, solving the indifference conditions on each support tuple
/// with Newton's method (one step when there are two coalitions, where the
/// system is linear). Anything else, or a small game where enumeration finds
/// nothing certifiable, falls back to fictitious play.
pub fn compute_mixed_equilibrium_with(game: &GGame, opts: &SolverOptions) -> Result<MixedProfile> {
    for i in 0..game.profile_count() {
        let p = MixedProfile::dirac(game, &game.profile(i))?;
        if is_mixed_c_equilibrium(game, &p, 0.0)? {
            return Ok(p);
        }
    }
    let small = game.coalitions() <= opts.enumeration_max_coalitions
        && game.space_sizes().iter().all(|&n| n <= opts.enumeration_max_strategies);
    if small {
        if let Some(p) = support_enumeration(game, opts.tol)? {
            return Ok(p);
        }
    }
    fictitious_play(game, opts)
}

fn support_enumeration(game: &GGame, tol: f64) -> Result<Option<MixedProfile>> {
    let sizes = game.space_sizes().to_vec();
    let r = sizes.len();
    // All nonempty supports per coalition.
    let masks: Vec<Vec<Vec<usize>>> = sizes
        .iter()
        .map(|&n| (1u32..(1 << n)).map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect()).collect())
        .collect();
    let mut tuples: Vec<Vec<usize>> = vec![vec![]];
    for mask in &masks {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                (0..mask.len()).map(move |m| {
                    let mut t = t.clone();
                    t.push(m);
                    t
                })
            })
            .collect();
    }
    let total = |t: &Vec<usize>| -> usize { t.iter().enumerate().map(|(h, &m)| masks[h][m].len()).sum() };
    tuples.retain(|t| total(t) > r);
    tuples.sort_by_key(|t| total(t));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let starts = if r <= 2 { 1 } else { 4 };
    for t in &tuples {
        let supports: Vec<&[usize]> = t.iter().enumerate().map(|(h, &m)| masks[h][m].as_slice()).collect();
        for attempt in 0..starts {
            if let Some(p) = solve_indifference(game, &supports, attempt, &mut rng)? {
                if is_mixed_c_equilibrium(game, &p, tol)? {
                    return Ok(Some(p));
                }
            }
        }
    }
    Ok(None)
}

/// Newton iteration on the indifference system of one support tuple:
/// for every coalition `h` and every `i` in its support, the expected payoff
/// of `i` equals a common value `v_h`; masses on each support sum to one.
fn solve_indifference(
    game: &GGame,
    supports: &[&[usize]],
    attempt: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<MixedProfile>> {
    let r = supports.len();
    let sizes = game.space_sizes();
    let offsets: Vec<usize> = supports
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.len();
            Some(o)
        })
        .collect();
    let nx: usize = supports.iter().map(|s| s.len()).sum();
    let dim = nx + r;
    let scale = game.payoff_tables().iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));

    let mut z = DVector::<f64>::zeros(dim);
    for (h, s) in supports.iter().enumerate() {
        let w: Vec<f64> =
            if attempt == 0 { vec![1.0; s.len()] } else { (0..s.len()).map(|_| rng.gen_range(0.05..1.0)).collect() };
        let sum: f64 = w.iter().sum();
        for (j, x) in w.into_iter().enumerate() {
            z[offsets[h] + j] = x / sum;
        }
    }

    let full_weights = |z: &DVector<f64>| -> Vec<Vec<f64>> {
        (0..r)
            .map(|h| {
                let mut w = vec![0.0; sizes[h]];
                for (j, &i) in supports[h].iter().enumerate() {
                    w[i] = z[offsets[h] + j];
                }
                w
            })
            .collect()
    };
    let dirac = |n: usize, i: usize| {
        let mut d = vec![0.0; n];
        d[i] = 1.0;
        d
    };

    for _ in 0..40 {
        let w = full_weights(&z);
        let mut f = DVector::<f64>::zeros(dim);
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        let mut row = 0;
        for h in 0..r {
            for &i in supports[h] {
                let dh = dirac(sizes[h], i);
                let mut ws: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
                ws[h] = &dh;
                f[row] = contract(game, game.payoff_table(h), &ws) - z[nx + h];
                jac[(row, nx + h)] = -1.0;
                for g in (0..r).filter(|&g| g != h) {
                    for (jj, &j) in supports[g].iter().enumerate() {
                        let dg = dirac(sizes[g], j);
                        let mut ws2 = ws.clone();
                        ws2[g] = &dg;
                        jac[(row, offsets[g] + jj)] = contract(game, game.payoff_table(h), &ws2);
                    }
                }
                row += 1;
            }
        }
        for h in 0..r {
            let s: f64 = (0..supports[h].len()).map(|j| z[offsets[h] + j]).sum();
            f[row] = s - 1.0;
            for j in 0..supports[h].len() {
                jac[(row, offsets[h] + j)] = 1.0;
            }
            row += 1;
        }
        let residual = f.amax();
        if residual <= 1e-13 * scale {
            break;
        }
        if !residual.is_finite() || residual > 1e6 * scale {
            return Ok(None);
        }
        let rhs = -&f;
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|x| x.is_finite()) => s,
            _ => match jac.svd(true, true).solve(&rhs, 1e-12) {
                Ok(s) => s,
                Err(_) => return Ok(None),
            },
        };
        z += step;
    }

    let mut components = Vec::with_capacity(r);
    for (h, w) in full_weights(&z).into_iter().enumerate() {
        if w.iter().any(|&x| !x.is_finite() || x < -1e-9) {
            return Ok(None);
        }
        let w: Vec<f64> = w.into_iter().map(|x| x.max(0.0)).collect();
        match Distribution::normalized(w) {
            Ok(d) if d.support().len() == supports[h].len() || d.support().iter().all(|i| supports[h].contains(i)) => {
                components.push(d)
            }
            _ => return Ok(None),
        }
    }
    Ok(Some(MixedProfile { components }))
}

/// Damped fictitious play: every coalition best-responds to the running
/// averages of the others, and averages move by `1/(n+1)`.
fn fictitious_play(game: &GGame, opts: &SolverOptions) -> Result<MixedProfile> {
    let r = game.coalitions();
    let mut avg: Vec<Vec<f64>> = game
        .space_sizes()
        .iter()
        .map(|&n| {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            v
        })
        .collect();
    let snapshot = |avg: &Vec<Vec<f64>>| -> Result<MixedProfile> {
        Ok(MixedProfile { components: avg.iter().map(|v| Distribution::normalized(v.clone())).collect::<Result<_>>()? })
    };
    let mut gap = f64::INFINITY;
    for n in 1..=opts.max_iterations {
        let current = snapshot(&avg)?;
        let responses =
            (0..r).map(|h| best_pure_response(game, &current, h).map(|b| b.argmax[0])).collect::<Result<Vec<_>>>()?;
        let step = 1.0 / (n as f64 + 1.0);
        for (h, &br) in responses.iter().enumerate() {
            for (i, x) in avg[h].iter_mut().enumerate() {
                let target = if i == br { 1.0 } else { 0.0 };
                *x += step * (target - *x);
            }
        }
        if n % 64 == 0 || n == opts.max_iterations {
            let p = snapshot(&avg)?;
            gap = equilibrium_gap(game, &p)?;
            if gap <= opts.tol {
                return Ok(p);
            }
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, gap })
}
