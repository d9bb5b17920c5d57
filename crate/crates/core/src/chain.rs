//! Graph-consistent reversible kernels, the `μ_k` smoothing family, Dobrushin
//! coefficients and the time schedules of nonhomogeneous chains.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_integer::Roots;
use serde::Serialize;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeSubset};
use crate::sim::Sampler;

/// Row sums of stochastic matrices must be within this of one.
const ROW_TOLERANCE: f64 = 1e-9;

/// How a target distribution sits in its graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    /// All mass on a single node.
    PointMass,
    /// Support disconnected as an induced subgraph but inside one component.
    SupportInComponent,
    /// Support meets several connected components.
    SupportSplit,
    /// Support induces a connected subgraph.
    SupportConnected,
}

pub fn classify_case(g: &Graph, mu: &Distribution) -> Result<CaseLabel> {
    if mu.len() != g.len() {
        return Err(Error::ShapeMismatch(format!(
            "distribution over {} states, graph has {} nodes",
            mu.len(),
            g.len()
        )));
    }
    let support = mu.support();
    if support.len() == 1 {
        return Ok(CaseLabel::PointMass);
    }
    if g.induced_subgraph(&support)?.is_connected() {
        return Ok(CaseLabel::SupportConnected);
    }
    let inside_one = g.connected_components().iter().any(|c| support.is_subset(c));
    Ok(if inside_one { CaseLabel::SupportInComponent } else { CaseLabel::SupportSplit })
}

/// `μ_k = (1/k)·η_k + ((k−1)/k)·μ` with `η_k` uniform on `A_k = {μ < 1/k}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothedTarget {
    pub base: Distribution,
    pub k: u64,
    pub smoothed: Distribution,
    pub low_set: NodeSubset,
}

pub fn smooth(mu: &Distribution, k: u64) -> Result<SmoothedTarget> {
    if k == 0 {
        return Err(Error::InvalidArgument("smoothing index k must be at least 1".into()));
    }
    let kf = k as f64;
    let low_set: NodeSubset = (0..mu.len()).filter(|&s| mu.mass(s) < 1.0 / kf).collect();
    if low_set.is_empty() {
        return Err(Error::EmptyLowSet(k));
    }
    let eta = 1.0 / (kf * low_set.len() as f64);
    let keep = (kf - 1.0) / kf;
    let masses: Vec<f64> = (0..mu.len())
        .map(|s| {
            let base = keep * mu.mass(s);
            if low_set.contains(s) {
                base + eta
            } else {
                base
            }
        })
        .collect();
    let smoothed = match Distribution::new(masses.clone()) {
        Ok(d) => d,
        Err(_) => Distribution::normalized(masses)?,
    };
    Ok(SmoothedTarget { base: mu.clone(), k, smoothed, low_set })
}

/// Smallest integer strictly greater than `1 / min{μ(s) : μ(s) > 0}`.
pub fn min_valid_k(mu: &Distribution) -> u64 {
    let min = mu.masses().iter().copied().filter(|&m| m > 0.0).fold(f64::INFINITY, f64::min);
    (1.0 / min).floor() as u64 + 1
}

/// `max(min_valid_k(μ), N − 1)`: from here on `μ_k ≥ 1/((N−1)k)` everywhere.
pub fn validity_threshold(mu: &Distribution) -> u64 {
    min_valid_k(mu).max(mu.len().saturating_sub(1) as u64)
}

/// A row-stochastic matrix over an ordered list of graph nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionKernel {
    matrix: DMatrix<f64>,
    /// Node ids (in the graph the kernel was built on), one per row.
    states: Vec<NodeId>,
    labels: Vec<String>,
    /// Target masses in row order, when built from a target.
    target: Option<Vec<f64>>,
    p: f64,
}

impl TransitionKernel {
    /// Wrap an arbitrary stochastic matrix whose rows are nodes `0..n`.
    pub fn from_matrix(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        check_stochastic(&matrix)?;
        if labels.len() != matrix.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a {}x{} matrix",
                labels.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(TransitionKernel { states: (0..labels.len()).collect(), matrix, labels, target: None, p: 0.0 })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Node id of each row, sorted by target mass descending.
    pub fn states(&self) -> &[NodeId] {
        &self.states
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Row index of node `u`, if it is a state of this kernel.
    pub fn position(&self, u: NodeId) -> Option<usize> {
        self.states.iter().position(|&s| s == u)
    }

    /// The off-diagonal scale `p`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Target masses in row order.
    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    /// Transition probability between nodes `u` and `v`.
    pub fn prob(&self, u: NodeId, v: NodeId) -> Option<f64> {
        Some(self.matrix[(self.position(u)?, self.position(v)?)])
    }

    /// `max |μ(l) p_{l,m} − μ(m) p_{m,l}|`.
    pub fn detailed_balance_residual(&self) -> Option<f64> {
        let mu = self.target.as_ref()?;
        let n = self.len();
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for m in l + 1..n {
                worst = worst.max((mu[l] * self.matrix[(l, m)] - mu[m] * self.matrix[(m, l)]).abs());
            }
        }
        Some(worst)
    }

    /// `P^n` by repeated squaring.
    pub fn power(&self, n: u32) -> DMatrix<f64> {
        matrix_power(&self.matrix, n)
    }

    /// CSV with a header of state labels and one row per state.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.labels)?;
        for l in 0..self.len() {
            w.write_record((0..self.len()).map(|m| format!("{:.16e}", self.matrix[(l, m)])))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn matrix_power(m: &DMatrix<f64>, mut n: u32) -> DMatrix<f64> {
    let mut result = DMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        n >>= 1;
    }
    result
}

fn check_stochastic(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NonStochastic(format!("matrix is {}x{}", m.nrows(), m.ncols())));
    }
    for (i, row) in m.row_iter().enumerate() {
        if row.iter().any(|&x| !(-ROW_TOLERANCE..=1.0 + ROW_TOLERANCE).contains(&x)) {
            return Err(Error::NonStochastic(format!("row {i} has an entry outside [0, 1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::NonStochastic(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// The reversible kernel `P^{(μ,G)}`.
///
/// States are relabeled `s^1, …, s^N` by decreasing target mass (ties keep
/// graph order). With `D_l = #{m > l : s^m ~ s^l} + Σ_{m < l, s^m ~ s^l} μ(s^m)/μ(s^l)`
/// and `p = min_l 1/(2 D_l)`, moves up the order get `p`, moves down get
/// `μ(s^m)/μ(s^l)·p`, and the diagonal takes the rest (at least 1/2).
pub fn build_kernel(target: &Distribution, g: &Graph) -> Result<TransitionKernel> {
    let n = g.len();
    if target.len() != n {
        return Err(Error::ShapeMismatch(format!("target over {} states, graph has {n} nodes", target.len())));
    }
    if let Some(s) = (0..n).find(|&s| target.mass(s).is_nan() || target.mass(s) <= 0.0) {
        return Err(Error::NonPositiveTarget(g.label(s).to_string()));
    }
    if !g.is_connected() {
        return Err(Error::NotConnected);
    }
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_by(|&a, &b| target.mass(b).total_cmp(&target.mass(a)).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (l, &s) in order.iter().enumerate() {
        rank[s] = l;
    }
    let mu: Vec<f64> = order.iter().map(|&s| target.mass(s)).collect();

    let mut p = f64::INFINITY;
    for (l, &s) in order.iter().enumerate() {
        let d: f64 = g
            .neighbors(s)
            .iter()
            .map(|&t| {
                let m = rank[t];
                if m > l {
                    1.0
                } else {
                    mu[m] / mu[l]
                }
            })
            .sum();
        if d > 0.0 {
            p = p.min(1.0 / (2.0 * d));
        }
    }
    if !p.is_finite() {
        // A single state: nothing to move to.
        p = 0.0;
    }

    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for (l, &s) in order.iter().enumerate() {
        let mut off = 0.0;
        for &t in g.neighbors(s) {
            let m = rank[t];
            let v = if l < m { p } else { mu[m] / mu[l] * p };
            matrix[(l, m)] = v;
            off += v;
        }
        // `off ≤ 1/2` exactly; rounding can push it one ulp over.
        matrix[(l, l)] = (1.0 - off).max(0.5);
    }
    Ok(TransitionKernel {
        matrix,
        labels: order.iter().map(|&s| g.label(s).to_string()).collect(),
        states: order,
        target: Some(mu),
        p,
    })
}

/// Dobrushin's ergodic coefficient `1 − min_{i,j} Σ_h min(p_ih, p_jh)`.
pub fn dobrushin(m: &DMatrix<f64>) -> Result<f64> {
    check_stochastic(m)?;
    let n = m.nrows();
    let mut min_overlap: f64 = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            let overlap: f64 = (0..n).map(|h| m[(i, h)].min(m[(j, h)])).sum();
            min_overlap = min_overlap.min(overlap);
        }
    }
    Ok((1.0 - min_overlap).max(0.0))
}

/// `1 − (c_N / k)^{N−1}` with `c_N = 1/(2(N−1)²)`.
///
/// For `k` at least [`validity_threshold`] this bounds
/// `dobrushin(P^{N−1})` for the kernel built from `μ_k` on a connected
/// graph with `N` nodes. The quantity `ĉ_N = c_N^{N−1}` is the constant
/// multiplying `k^{−(N−1)}`.
pub fn lemma_bound(n: usize, k: u64) -> Result<f64> {
    if n < 2 || k == 0 {
        return Err(Error::InvalidArgument(format!("lemma bound needs N >= 2 and k >= 1 (got N={n}, k={k})")));
    }
    let c = 1.0 / (2.0 * ((n - 1) * (n - 1)) as f64);
    Ok(1.0 - (c / k as f64).powi((n - 1) as i32))
}

/// Increasing times `t_1 < t_2 < …` at which a nonhomogeneous chain moves
/// to the next kernel. Time `t ∈ [t_ℓ, t_{ℓ+1})` is at level `ℓ ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `t_ℓ = ℓ^{5N}`.
    Theoretical { n: u32 },
    /// `t_1 = 0`, `t_{ℓ+1} = t_ℓ + max(1, ⌈c·ℓ^e⌉)`.
    PowerGap { c: f64, e: f64 },
    /// Explicit times; the last interval never ends.
    Explicit { times: Vec<u64> },
    /// `t_ℓ = ℓ` with smoothing index `k = 2^ℓ`: a schedule that moves on
    /// too fast for the chain to leave its starting region.
    Doubling,
}

/// Level `ℓ` and the time interval `[start, end)` it covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub level: u64,
    pub start: u64,
    /// `None` when the interval extends past `u64::MAX` or never ends.
    pub end: Option<u64>,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Theoretical { n } if *n == 0 => Err(Error::InvalidSchedule("N must be positive".into())),
            Schedule::PowerGap { c, e } if !(c.is_finite() && *c > 0.0 && e.is_finite() && *e >= 0.0) => {
                Err(Error::InvalidSchedule(format!("power gap needs c > 0 and e >= 0 (got c={c}, e={e})")))
            }
            Schedule::Explicit { times } => {
                if times.is_empty() {
                    return Err(Error::InvalidSchedule("no times given".into()));
                }
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidSchedule("times must be strictly increasing".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `t_ℓ` for `ℓ ≥ 1`; `None` past the end of an explicit list.
    pub fn time(&self, level: u64) -> Option<BigUint> {
        if level == 0 {
            return None;
        }
        match self {
            Schedule::Theoretical { n } => Some(BigUint::from(level).pow(5 * n)),
            Schedule::PowerGap { c, e } => {
                let mut t = BigUint::from(0u32);
                for l in 1..level {
                    t += power_gap(*c, *e, l);
                }
                Some(t)
            }
            Schedule::Explicit { times } => times.get(level as usize - 1).map(|&t| BigUint::from(t)),
            Schedule::Doubling => Some(BigUint::from(level)),
        }
    }

    pub fn first_time(&self) -> u64 {
        match self {
            Schedule::Theoretical { .. } | Schedule::Doubling => 1,
            Schedule::PowerGap { .. } => 0,
            Schedule::Explicit { times } => times[0],
        }
    }

    /// The interval containing time `t`.
    pub fn interval_at(&self, t: u64) -> Result<Interval> {
        let first = self.first_time();
        if t < first {
            return Err(Error::BeforeSchedule { time: t, first });
        }
        Ok(match self {
            Schedule::Theoretical { n } => {
                let level = t.nth_root(5 * n);
                let start = level.checked_pow(5 * n).expect("root power fits");
                let end = (level + 1).checked_pow(5 * n);
                Interval { level, start, end }
            }
            Schedule::PowerGap { c, e } => {
                let (mut level, mut start) = (1u64, 0u64);
                loop {
                    let end = start.checked_add(power_gap(*c, *e, level));
                    match end {
                        Some(end) if end <= t => {
                            level += 1;
                            start = end;
                        }
                        _ => break Interval { level, start, end },
                    }
                }
            }
            Schedule::Explicit { times } => {
                let idx = times.partition_point(|&x| x <= t) - 1;
                Interval { level: idx as u64 + 1, start: times[idx], end: times.get(idx + 1).copied() }
            }
            Schedule::Doubling => Interval { level: t, start: t, end: t.checked_add(1) },
        })
    }

    pub fn level_at(&self, t: u64) -> Result<u64> {
        Ok(self.interval_at(t)?.level)
    }

    /// Smoothing index used at level `ℓ`.
    pub fn smoothing_k(&self, level: u64) -> u64 {
        match self {
            // Saturates at 2^62; beyond that the leaving probability is far
            // below the resolution of a double-precision uniform anyway.
            Schedule::Doubling => 1u64 << level.min(62),
            _ => level,
        }
    }

    /// `t_{ℓ+1} − t_ℓ`, if it is finite and fits in `u64`.
    pub fn gap(&self, level: u64) -> Option<u64> {
        match self {
            Schedule::PowerGap { c, e } => Some(power_gap(*c, *e, level)),
            Schedule::Doubling => Some(1),
            _ => {
                let d = self.time(level + 1)? - self.time(level)?;
                u64::try_from(d).ok()
            }
        }
    }

    /// Check `t_{ℓ+1} − t_ℓ ≥ c·ℓ^e` for `ℓ = 1..=max_level`.
    pub fn check_gap(&self, c: f64, e: f64, max_level: u64) -> Result<()> {
        for level in 1..=max_level {
            let required = c * (level as f64).powf(e);
            match self.gap(level) {
                Some(gap) if (gap as f64) < required => {
                    return Err(Error::GapViolation { level, gap, required });
                }
                // Unbounded or too large to represent: satisfied.
                _ => {}
            }
        }
        Ok(())
    }
}

fn power_gap(c: f64, e: f64, level: u64) -> u64 {
    let g = (c * (level as f64).powf(e)).ceil();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        (g as u64).max(1)
    }
}

type CachedKernel = (Arc<TransitionKernel>, Arc<Sampler>);

/// The time-indexed kernels `P(t) = P^{(μ_k, G)}` of a target whose support
/// is disconnected inside one component, built on the connected component
/// holding its support and cached per smoothing index.
pub struct KernelFamily {
    mu: Distribution,
    component: Vec<NodeId>,
    subgraph: Graph,
    local_mu: Distribution,
    schedule: Schedule,
    graph_len: usize,
    cache: Mutex<HashMap<u64, CachedKernel>>,
}

impl std::fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelFamily")
            .field("component", &self.component)
            .field("schedule", &self.schedule)
            .finish_non_exhaustive()
    }
}

impl KernelFamily {
    pub fn new(mu: &Distribution, g: &Graph, schedule: Schedule) -> Result<Self> {
        schedule.validate()?;
        match classify_case(g, mu)? {
            CaseLabel::SupportInComponent => {}
            CaseLabel::SupportSplit => return Err(Error::SupportSplit),
            found => return Err(Error::WrongCase { expected: CaseLabel::SupportInComponent, found }),
        }
        let support = mu.support();
        let component = g
            .connected_components()
            .into_iter()
            .find(|c| support.is_subset(c))
            .expect("classified inside one component");
        let subgraph = g.induced_subgraph(&component)?;
        let local_mu = Distribution::normalized(component.iter().map(|&s| mu.mass(s)).collect())?;
        Ok(KernelFamily {
            mu: mu.clone(),
            component: component.to_vec(),
            subgraph,
            local_mu,
            schedule,
            graph_len: g.len(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn target(&self) -> &Distribution {
        &self.mu
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Node ids of the component the chain lives on.
    pub fn component(&self) -> &[NodeId] {
        &self.component
    }

    /// The component as a graph; kernel states index into it.
    pub fn subgraph(&self) -> &Graph {
        &self.subgraph
    }

    /// Smoothed target over the component at level `ℓ`.
    pub fn smoothed(&self, level: u64) -> Result<SmoothedTarget> {
        smooth(&self.local_mu, self.schedule.smoothing_k(level))
    }

    pub fn kernel_at_level(&self, level: u64) -> Result<Arc<TransitionKernel>> {
        Ok(self.entry(level)?.0)
    }

    pub fn kernel_at(&self, t: u64) -> Result<Arc<TransitionKernel>> {
        self.kernel_at_level(self.schedule.level_at(t)?)
    }

    pub(crate) fn entry(&self, level: u64) -> Result<(Arc<TransitionKernel>, Arc<Sampler>)> {
        // Levels sharing a smoothing index share a kernel.
        let k = self.schedule.smoothing_k(level);
        if let Some(e) = self.cache.lock().expect("kernel cache poisoned").get(&k) {
            return Ok(e.clone());
        }
        let target = self.smoothed(level)?.smoothed;
        let kernel = Arc::new(build_kernel(&target, &self.subgraph)?);
        let sampler = Arc::new(Sampler::new(&kernel, &self.component, self.graph_len));
        let mut cache = self.cache.lock().expect("kernel cache poisoned");
        Ok(cache.entry(k).or_insert((kernel, sampler)).clone())
    }
}

/// `P(t)` for a target whose support is disconnected inside one component, without caching.
pub fn nonhomogeneous_kernel(t: u64, schedule: &Schedule, mu: &Distribution, g: &Graph) -> Result<TransitionKernel> {
    let family = KernelFamily::new(mu, g, schedule.clone())?;
    Ok((*family.kernel_at(t)?).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_graph() -> Graph {
        Graph::from_labeled_edges(["s1", "s2", "s3", "s4"], &[("s1", "s3"), ("s3", "s4"), ("s2", "s4")]).unwrap()
    }

    fn d(m: &[f64]) -> Distribution {
        Distribution::new(m.to_vec()).unwrap()
    }

    #[test]
    fn cases() {
        let g = example_graph();
        assert_eq!(classify_case(&g, &Distribution::dirac(4, 2)).unwrap(), CaseLabel::PointMass);
        assert_eq!(classify_case(&g, &d(&[0.5, 0.5, 0.0, 0.0])).unwrap(), CaseLabel::SupportInComponent);
        assert_eq!(classify_case(&g, &d(&[0.5, 0.0, 0.5, 0.0])).unwrap(), CaseLabel::SupportConnected);
        let split = Graph::from_labeled_edges(["a", "b", "c", "d"], &[("a", "b"), ("c", "d")]).unwrap();
        assert_eq!(classify_case(&split, &d(&[0.5, 0.0, 0.5, 0.0])).unwrap(), CaseLabel::SupportSplit);
        assert!(classify_case(&g, &d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn smoothing() {
        let s = smooth(&d(&[0.5, 0.5, 0.0]), 4).unwrap();
        assert_eq!(s.low_set.to_vec(), vec![2]);
        assert_eq!(s.smoothed.masses(), &[0.375, 0.375, 0.25]);
        assert!(s.smoothed.total_variation(&s.base) <= 0.25);
        assert!(matches!(smooth(&Distribution::uniform(4), 4), Err(Error::EmptyLowSet(4))));
        assert_eq!(smooth(&Distribution::uniform(4), 3).unwrap().low_set.len(), 4);
    }

    #[test]
    fn thresholds() {
        assert_eq!(min_valid_k(&d(&[0.5, 0.5, 0.0, 0.0])), 3);
        assert_eq!(min_valid_k(&d(&[0.9, 0.1])), 11);
        assert_eq!(min_valid_k(&Distribution::uniform(4)), 5);
        assert_eq!(validity_threshold(&d(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])), 5);
    }

    #[test]
    fn two_state_kernel() {
        let g = Graph::path(["a", "b"]).unwrap();
        let k = build_kernel(&d(&[2.0 / 3.0, 1.0 / 3.0]), &g).unwrap();
        assert_eq!(k.p(), 0.25);
        let m = k.matrix();
        assert!((m[(0, 0)] - 0.75).abs() < 1e-15 && (m[(0, 1)] - 0.25).abs() < 1e-15);
        assert!((m[(1, 0)] - 0.5).abs() < 1e-15 && (m[(1, 1)] - 0.5).abs() < 1e-15);
        assert!(k.detailed_balance_residual().unwrap() < 1e-15);
        assert!((dobrushin(m).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kernel_sorts_states() {
        let g = Graph::path(["a", "b", "c"]).unwrap();
        let k = build_kernel(&d(&[0.2, 0.3, 0.5]), &g).unwrap();
        assert_eq!(k.states(), &[2, 1, 0]);
        assert_eq!(k.labels(), &["c", "b", "a"]);
        assert_eq!(k.prob(0, 2), Some(0.0));
    }

    #[test]
    fn uniform_k3() {
        let g = Graph::complete(["a", "b", "c"]).unwrap();
        let k = build_kernel(&Distribution::uniform(3), &g).unwrap();
        for l in 0..3 {
            for m in 0..3 {
                let want = if l == m { 0.5 } else { 0.25 };
                assert!((k.matrix()[(l, m)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernel_errors() {
        let split = Graph::isolated(["a", "b"]).unwrap();
        assert!(matches!(build_kernel(&Distribution::uniform(2), &split), Err(Error::NotConnected)));
        let g = Graph::path(["a", "b"]).unwrap();
        assert!(matches!(build_kernel(&d(&[1.0, 0.0]), &g), Err(Error::NonPositiveTarget(_))));
        let one = build_kernel(&d(&[1.0]), &Graph::isolated(["a"]).unwrap()).unwrap();
        assert_eq!(one.matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn dobrushin_extremes() {
        assert_eq!(dobrushin(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        assert_eq!(dobrushin(&DMatrix::from_element(3, 3, 1.0 / 3.0)).unwrap(), 0.0);
        assert!(dobrushin(&DMatrix::from_element(2, 2, 0.7)).is_err());
    }

    #[test]
    fn lemma_constants() {
        assert_eq!(lemma_bound(3, 8).unwrap(), 4095.0 / 4096.0);
        let g = Graph::path(["a", "b", "c"]).unwrap();
        let mu = d(&[0.6, 0.4, 0.0]);
        let k = validity_threshold(&mu);
        let kernel = build_kernel(&smooth(&mu, k).unwrap().smoothed, &g).unwrap();
        assert!(dobrushin(&kernel.power(2)).unwrap() <= lemma_bound(3, k).unwrap());
    }

    #[test]
    fn schedules() {
        let th = Schedule::Theoretical { n: 1 };
        assert_eq!(th.time(2).unwrap(), BigUint::from(32u32));
        assert_eq!(th.interval_at(31).unwrap(), Interval { level: 1, start: 1, end: Some(32) });
        assert_eq!(th.interval_at(32).unwrap().level, 2);
        assert!(matches!(th.interval_at(0), Err(Error::BeforeSchedule { time: 0, first: 1 })));
        let big = Schedule::Theoretical { n: 10 };
        assert_eq!(big.interval_at(u64::MAX).unwrap().end, None);

        let pg = Schedule::PowerGap { c: 1.0, e: 3.0 };
        // t = 0, 1, 9, 36, 100
        assert_eq!(pg.time(5).unwrap(), BigUint::from(100u32));
        assert_eq!(pg.interval_at(35).unwrap(), Interval { level: 3, start: 9, end: Some(36) });
        assert_eq!(pg.gap(4), Some(64));
        assert!(pg.check_gap(1.0, 3.0, 50).is_ok());
        assert!(matches!(Schedule::Doubling.check_gap(1.0, 3.0, 5), Err(Error::GapViolation { level: 2, .. })));

        let ex = Schedule::Explicit { times: vec![3, 5, 10] };
        assert_eq!(ex.interval_at(9).unwrap(), Interval { level: 2, start: 5, end: Some(10) });
        assert_eq!(ex.interval_at(1000).unwrap().end, None);
        assert!(Schedule::Explicit { times: vec![3, 3] }.validate().is_err());

        assert_eq!(Schedule::Doubling.smoothing_k(3), 8);
        assert_eq!(Schedule::Doubling.smoothing_k(1000), 1 << 62);
    }

    #[test]
    fn counterexample_self_transition() {
        let g = example_graph();
        let mu = d(&[0.5, 0.5, 0.0, 0.0]);
        for level in 1..=10u64 {
            let k = nonhomogeneous_kernel(level, &Schedule::Doubling, &mu, &g).unwrap();
            assert_eq!(k.states()[0], 0);
            let want = 1.0 - 0.5f64.powi(level as i32 + 1);
            assert!((k.matrix()[(0, 0)] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn family_cases_and_cache() {
        let g = example_graph();
        let mu = d(&[0.5, 0.5, 0.0, 0.0]);
        let fam = KernelFamily::new(&mu, &g, Schedule::PowerGap { c: 1.0, e: 3.0 }).unwrap();
        let a = fam.kernel_at(9).unwrap();
        let b = fam.kernel_at(35).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert!(!Arc::ptr_eq(&a, &fam.kernel_at(36).unwrap()));
        assert!(matches!(
            KernelFamily::new(&Distribution::uniform(4), &g, Schedule::Doubling),
            Err(Error::WrongCase { found: CaseLabel::SupportConnected, .. })
        ));
    }

    #[test]
    fn csv_dump() {
        let g = Graph::path(["a", "b"]).unwrap();
        let k = build_kernel(&d(&[2.0 / 3.0, 1.0 / 3.0]), &g).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("a,b"));
        assert_eq!(s.lines().nth(1), Some("7.5000000000000000e-1,2.5000000000000000e-1"));
    }
}
