//! Seeded simulation of homogeneous, nonhomogeneous and product chains.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{build_kernel, classify_case, CaseLabel, KernelFamily, Schedule, TransitionKernel};
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, Radix};

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Cumulative transition rows indexed by node id, for inverse-CDF draws.
#[derive(Clone, Debug)]
pub struct Sampler {
    rows: Vec<Vec<(NodeId, f64)>>,
}

impl Sampler {
    /// Rows of `kernel`, with kernel state `u` mapped to node `lift[u]` of
    /// a graph with `n` nodes.
    pub fn new(kernel: &TransitionKernel, lift: &[NodeId], n: usize) -> Self {
        let mut rows = vec![Vec::new(); n];
        let m = kernel.matrix();
        for (l, &s) in kernel.states().iter().enumerate() {
            let mut row: Vec<(NodeId, f64)> = kernel
                .states()
                .iter()
                .enumerate()
                .filter(|&(j, _)| m[(l, j)] > 0.0)
                .map(|(j, &t)| (lift[t], m[(l, j)]))
                .collect();
            // Cumulate in node order so draws do not depend on the mass order.
            row.sort_by_key(|&(v, _)| v);
            let mut acc = 0.0;
            for entry in row.iter_mut() {
                acc += entry.1;
                entry.1 = acc;
            }
            rows[lift[s]] = row;
        }
        Sampler { rows }
    }

    /// Sampler for a kernel over its own graph's node ids.
    pub fn for_kernel(kernel: &TransitionKernel) -> Self {
        let n = kernel.states().iter().copied().max().map_or(0, |m| m + 1);
        let lift: Vec<NodeId> = (0..n).collect();
        Sampler::new(kernel, &lift, n)
    }

    pub fn has_state(&self, u: NodeId) -> bool {
        self.rows.get(u).is_some_and(|r| !r.is_empty())
    }

    /// Next state from `u` given a uniform draw in `[0, 1)`.
    pub fn step(&self, u: NodeId, x: f64) -> NodeId {
        let row = &self.rows[u];
        let i = row.partition_point(|&(_, c)| c <= x);
        row[i.min(row.len() - 1)].0
    }
}

/// Transition rule of a single chain, over node ids of a reference graph.
#[derive(Clone, Debug)]
pub enum ChainDriver {
    Constant(NodeId),
    Homogeneous(Arc<Sampler>),
    Nonhomogeneous(Arc<KernelFamily>),
}

impl ChainDriver {
    /// Chain targeting `mu` on `g`, chosen by the case of `mu`: a constant
    /// chain for a point mass, a homogeneous chain on the support when it
    /// induces a connected subgraph, and a nonhomogeneous chain on the
    /// enclosing component otherwise.
    pub fn for_target(mu: &Distribution, g: &Graph, schedule: &Schedule) -> Result<Self> {
        match classify_case(g, mu)? {
            CaseLabel::PointMass => Ok(ChainDriver::Constant(mu.support().to_vec()[0])),
            CaseLabel::SupportConnected => {
                let support = mu.support();
                let sub = g.induced_subgraph(&support)?;
                let local = Distribution::normalized(support.iter().map(|&s| mu.mass(s)).collect())?;
                let kernel = build_kernel(&local, &sub)?;
                Ok(ChainDriver::Homogeneous(Arc::new(Sampler::new(&kernel, &support.to_vec(), g.len()))))
            }
            CaseLabel::SupportInComponent => {
                Ok(ChainDriver::Nonhomogeneous(Arc::new(KernelFamily::new(mu, g, schedule.clone())?)))
            }
            CaseLabel::SupportSplit => Err(Error::SupportSplit),
        }
    }

    pub fn homogeneous(kernel: &TransitionKernel) -> Self {
        ChainDriver::Homogeneous(Arc::new(Sampler::for_kernel(kernel)))
    }

    /// Whether the chain can start at `u`.
    pub fn accepts(&self, u: NodeId) -> bool {
        match self {
            ChainDriver::Constant(s) => *s == u,
            ChainDriver::Homogeneous(s) => s.has_state(u),
            ChainDriver::Nonhomogeneous(f) => f.component().binary_search(&u).is_ok(),
        }
    }

    pub fn is_nonhomogeneous(&self) -> bool {
        matches!(self, ChainDriver::Nonhomogeneous(_))
    }

    pub fn cursor(&self) -> ChainCursor {
        ChainCursor { driver: self.clone(), sampler: None, end: 0 }
    }
}

/// Stepping state for a [`ChainDriver`]: transition `m` (from `X(m)` to
/// `X(m+1)`) uses the kernel in force at schedule time `first_time + m`.
#[derive(Clone, Debug)]
pub struct ChainCursor {
    driver: ChainDriver,
    sampler: Option<Arc<Sampler>>,
    /// First transition index past the cached interval.
    end: u64,
}

impl ChainCursor {
    pub fn step(&mut self, m: u64, x: NodeId, u: f64) -> Result<NodeId> {
        match &self.driver {
            ChainDriver::Constant(s) => Ok(*s),
            ChainDriver::Homogeneous(s) => Ok(s.step(x, u)),
            ChainDriver::Nonhomogeneous(family) => {
                if self.sampler.is_none() || m >= self.end {
                    let schedule = family.schedule();
                    let first = schedule.first_time();
                    let t = first.checked_add(m).ok_or_else(|| Error::InvalidArgument("time overflow".into()))?;
                    let interval = schedule.interval_at(t)?;
                    self.end = interval.end.map_or(u64::MAX, |e| e - first);
                    self.sampler = Some(family.entry(interval.level)?.1);
                }
                Ok(self.sampler.as_ref().expect("sampler cached").step(x, u))
            }
        }
    }
}

/// A realization `X(0), …, X(T−1)` with exact visit counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub seed: u64,
    pub states: Vec<NodeId>,
    pub counts: Vec<u64>,
}

impl Trace {
    pub fn from_states(seed: u64, states: Vec<NodeId>, n: usize) -> Self {
        let mut counts = vec![0; n];
        for &s in &states {
            counts[s] += 1;
        }
        Trace { seed, states, counts }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV with columns `t,state`.
    pub fn write_csv<W: Write>(&self, labels: &[String], stride: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "state"])?;
        for (t, &s) in self.states.iter().enumerate().step_by(stride.max(1)) {
            w.write_record([t.to_string(), labels[s].clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn run_driver(
    driver: &ChainDriver,
    init: &Distribution,
    steps: u64,
    n: usize,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<Trace> {
    if steps == 0 {
        return Err(Error::InvalidArgument("a trace needs at least one step".into()));
    }
    if init.len() != n {
        return Err(Error::InvalidInit(format!("initial distribution over {} states, expected {n}", init.len())));
    }
    if let Some(bad) = init.support().iter().find(|&&u| !driver.accepts(u)) {
        return Err(Error::InvalidInit(format!("initial mass on state {bad} outside the chain's state space")));
    }
    let mut states = Vec::with_capacity(steps as usize);
    let mut x = init.sample_with(rng.gen());
    states.push(x);
    let mut cursor = driver.cursor();
    for m in 0..steps - 1 {
        x = cursor.step(m, x, rng.gen())?;
        states.push(x);
    }
    Ok(Trace::from_states(seed, states, n))
}

/// Run a fixed kernel for `steps` states, over its graph's node ids.
pub fn run_homogeneous(kernel: &TransitionKernel, init: &Distribution, steps: u64, seed: u64) -> Result<Trace> {
    let driver = ChainDriver::homogeneous(kernel);
    run_driver(&driver, init, steps, init.len(), &mut stream_rng(seed, 0), seed)
}

/// Run the scheduled chain of a target whose support is disconnected inside
/// one component. `init` defaults to `mu`.
pub fn run_nonhomogeneous(
    mu: &Distribution,
    g: &Graph,
    schedule: &Schedule,
    init: Option<&Distribution>,
    steps: u64,
    seed: u64,
) -> Result<Trace> {
    let driver = ChainDriver::Nonhomogeneous(Arc::new(KernelFamily::new(mu, g, schedule.clone())?));
    run_driver(&driver, init.unwrap_or(mu), steps, g.len(), &mut stream_rng(seed, 0), seed)
}

/// Run whichever chain [`ChainDriver::for_target`] picks for `mu`; the
/// schedule only matters for `SupportInComponent` targets. `init` defaults to `mu`.
pub fn run_target(
    mu: &Distribution,
    g: &Graph,
    schedule: &Schedule,
    init: Option<&Distribution>,
    steps: u64,
    seed: u64,
) -> Result<Trace> {
    let driver = ChainDriver::for_target(mu, g, schedule)?;
    run_driver(&driver, init.unwrap_or(mu), steps, g.len(), &mut stream_rng(seed, 0), seed)
}

/// Required spacing `t_{ℓ+1} − t_ℓ ≥ c·ℓ^e` of nonhomogeneous schedules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapCondition {
    pub c: f64,
    pub e: f64,
}

/// One coordinate of a product chain.
#[derive(Clone, Debug)]
pub struct ComponentSpec {
    pub target: Distribution,
    pub graph: Graph,
    pub schedule: Schedule,
    /// Defaults to the target.
    pub init: Option<Distribution>,
}

#[derive(Clone, Debug)]
pub struct ProductChainSpec {
    pub components: Vec<ComponentSpec>,
    pub steps: u64,
    pub seed: u64,
    pub gap: Option<GapCondition>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProductTrace {
    pub components: Vec<Trace>,
    /// Joint states indexed row-major with the first component slowest,
    /// matching the node order of the strong product.
    pub joint: Trace,
}

/// Independent chains per component, component `h` on stream `h`.
pub fn run_product(spec: &ProductChainSpec) -> Result<ProductTrace> {
    if spec.components.is_empty() {
        return Err(Error::InvalidArgument("product chain needs at least one component".into()));
    }
    let drivers = spec
        .components
        .iter()
        .map(|c| ChainDriver::for_target(&c.target, &c.graph, &c.schedule))
        .collect::<Result<Vec<_>>>()?;
    if let Some(gap) = spec.gap {
        for (c, d) in spec.components.iter().zip(&drivers) {
            if d.is_nonhomogeneous() {
                let last = c.schedule.first_time().saturating_add(spec.steps);
                c.schedule.check_gap(gap.c, gap.e, c.schedule.level_at(last)?)?;
            }
        }
    }
    let components = spec
        .components
        .par_iter()
        .zip(&drivers)
        .enumerate()
        .map(|(h, (c, d))| {
            let init = c.init.as_ref().unwrap_or(&c.target);
            run_driver(d, init, spec.steps, c.graph.len(), &mut stream_rng(spec.seed, h as u64), spec.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<usize> = spec.components.iter().map(|c| c.graph.len()).collect();
    let radix = Radix::new(&sizes);
    let mut coords = vec![0; sizes.len()];
    let joint_states = (0..spec.steps as usize)
        .map(|t| {
            for (h, tr) in components.iter().enumerate() {
                coords[h] = tr.states[t];
            }
            radix.encode(&coords)
        })
        .collect();
    let joint = Trace::from_states(spec.seed, joint_states, radix.total());
    Ok(ProductTrace { components, joint })
}

/// Visit frequencies `counts / T`.
pub fn empirical_distribution(trace: &Trace) -> Result<Distribution> {
    if trace.is_empty() {
        return Err(Error::TraceTooShort { len: 0, needed: 1 });
    }
    let t = trace.len() as f64;
    Distribution::normalized(trace.counts.iter().map(|&c| c as f64 / t).collect())
}

/// `(1/T) Σ_m f(X(m))`, summed in time order.
pub fn ergodic_average(trace: &Trace, f: impl Fn(NodeId) -> f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::TraceTooShort { len: 0, needed: 1 });
    }
    let sum = trace.states.iter().fold(0.0, |acc, &s| acc + f(s));
    Ok(sum / trace.len() as f64)
}

/// Whether consecutive states are adjacent or equal in `g`.
pub fn verify_consistency(trace: &Trace, g: &Graph) -> bool {
    if trace.states.iter().any(|&s| s >= g.len()) {
        return false;
    }
    trace.states.windows(2).all(|w| g.adjacent_unchecked(w[0], w[1]))
}

/// `TV(empirical of X(0..T), target)` at each `T` in `checkpoints`.
pub fn tv_series(trace: &Trace, target: &Distribution, checkpoints: &[u64]) -> Result<Vec<(u64, f64)>> {
    if target.len() != trace.counts.len() {
        return Err(Error::ShapeMismatch(format!(
            "target over {} states, trace over {}",
            target.len(),
            trace.counts.len()
        )));
    }
    let mut counts = vec![0u64; target.len()];
    let mut done = 0usize;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut sorted: Vec<u64> = checkpoints.iter().copied().filter(|&t| t >= 1 && t as usize <= trace.len()).collect();
    sorted.sort_unstable();
    sorted.dedup();
    for t in sorted {
        for &s in &trace.states[done..t as usize] {
            counts[s] += 1;
        }
        done = t as usize;
        let tv = 0.5 * counts.iter().zip(target.masses()).map(|(&c, &m)| (c as f64 / t as f64 - m).abs()).sum::<f64>();
        out.push((t, tv));
    }
    Ok(out)
}

/// Roughly geometric checkpoints `1, 2, 5, 10, 20, 50, …` up to `steps`,
/// always ending at `steps`.
pub fn log_checkpoints(steps: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut scale = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            match scale.checked_mul(m) {
                Some(t) if t < steps => out.push(t),
                _ => break 'outer,
            }
        }
        scale = match scale.checked_mul(10) {
            Some(s) => s,
            None => break,
        };
    }
    out.push(steps);
    out
}

/// CSV with columns `t` and one state column per trace, all of equal length.
pub fn write_joint_csv<W: Write>(
    traces: &[Trace],
    names: &[String],
    labels: &[Vec<String>],
    stride: usize,
    out: W,
) -> Result<()> {
    let len = traces.first().map_or(0, Trace::len);
    if traces.len() != names.len() || traces.len() != labels.len() || traces.iter().any(|t| t.len() != len) {
        return Err(Error::ShapeMismatch("traces, names and labels must line up".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("t").chain(names.iter().map(String::as_str)))?;
    for t in (0..len).step_by(stride.max(1)) {
        let row = traces.iter().zip(labels).map(|(tr, l)| l[tr.states[t]].clone());
        w.write_record(std::iter::once(t.to_string()).chain(row))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with columns `state,count,frequency`.
pub fn write_empirical_csv<W: Write>(trace: &Trace, labels: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "count", "frequency"])?;
    let t = trace.len() as f64;
    for (s, &c) in trace.counts.iter().enumerate() {
        w.write_record([labels[s].clone(), c.to_string(), format!("{:.16e}", c as f64 / t)])?;
    }
    w.flush()?;
    Ok(())
}
