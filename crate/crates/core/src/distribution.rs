use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSubset};

/// Tolerance on the total mass of a [`Distribution`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A probability vector over a finite space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    masses: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;

    fn try_from(masses: Vec<f64>) -> Result<Self> {
        Distribution::new(masses)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.masses
    }
}

impl Distribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidDistribution("empty support space".into()));
        }
        if let Some(i) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0 && *m <= 1.0)) {
            return Err(Error::InvalidDistribution(format!("mass {} at {i} is outside [0, 1]", masses[i])));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(Distribution { masses })
    }

    /// Normalize nonnegative weights.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dirac(n: usize, at: usize) -> Self {
        assert!(at < n, "dirac index {at} out of range {n}");
        let mut masses = vec![0.0; n];
        masses[at] = 1.0;
        Distribution { masses }
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Distribution { masses: vec![1.0 / n as f64; n] }
    }

    /// Uniform over `subset` within a space of size `n`.
    pub fn uniform_on(n: usize, subset: &NodeSubset) -> Result<Self> {
        let mut w = vec![0.0; n];
        for &u in subset.iter() {
            if u >= n {
                return Err(Error::NodeOutOfRange(u, n));
            }
            w[u] = 1.0;
        }
        Self::normalized(w)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: NodeId) -> f64 {
        self.masses[i]
    }

    pub fn support(&self) -> NodeSubset {
        self.masses.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(i, _)| i).collect()
    }

    /// Total variation distance `sup_A |p(A) - q(A)| = ½ Σ |p - q|`.
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        assert_eq!(self.len(), other.len(), "distributions over different spaces");
        0.5 * self.masses.iter().zip(&other.masses).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Inverse-CDF draw from one uniform `u` in `[0, 1)`; never returns a
    /// zero-mass state.
    pub fn sample_with(&self, u: f64) -> NodeId {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &m) in self.masses.iter().enumerate() {
            if m > 0.0 {
                acc += m;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// `E[f]` for a function given by its values.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.masses.iter().zip(values).map(|(m, v)| m * v).sum()
    }
}
