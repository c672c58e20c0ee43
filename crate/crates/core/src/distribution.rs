//! Momentum distributions and per-kick observables.

use serde::{Deserialize, Serialize};

use crate::params::{EnsembleSpec, SimParams};

/// Fraction of the grid, split evenly over both ends, counted as edge.
pub const EDGE_FRACTION: f64 = 0.10;

/// Where a distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: SimParams,
    pub ensemble: Option<EnsembleSpec>,
}

/// Probability over momentum sites `m ∈ [−N/2, N/2)`, stored with index
/// `i = m + N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumDistribution {
    pub probs: Vec<f64>,
    pub time: usize,
    pub meta: Provenance,
}

impl MomentumDistribution {
    pub fn grid_n(&self) -> usize {
        self.probs.len()
    }

    pub fn half(&self) -> i64 {
        (self.probs.len() / 2) as i64
    }

    /// Lattice site of storage index `i`.
    pub fn site(&self, i: usize) -> i64 {
        i as i64 - self.half()
    }

    /// Probability at site `m`; zero outside the grid.
    pub fn prob(&self, m: i64) -> f64 {
        let i = m + self.half();
        if i < 0 || i >= self.probs.len() as i64 {
            0.0
        } else {
            self.probs[i as usize]
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i as i64 - self.half(), p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn edge_mass(&self) -> f64 {
        edge_mass(&self.probs)
    }
}

/// Number of sites at each end of an `n`-site grid that count as edge.
pub fn edge_width(n: usize) -> usize {
    (((n as f64) * EDGE_FRACTION / 2.0).round() as usize).max(1)
}

pub fn edge_mass(probs: &[f64]) -> f64 {
    let w = edge_width(probs.len());
    let n = probs.len();
    probs[..w].iter().sum::<f64>() + probs[n - w..].iter().sum::<f64>()
}

/// Observables sampled after every kick (and at t = 0).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<usize>,
    /// `⟨(m+β)²⟩`, in units of `(2ħk_L)²`.
    pub p2_mean: Vec<f64>,
    /// Population of the zero-momentum site.
    pub pi0: Vec<f64>,
    pub edge_mass: Vec<f64>,
}

impl ObservableSeries {
    pub fn with_capacity(n: usize) -> Self {
        ObservableSeries {
            times: Vec::with_capacity(n),
            p2_mean: Vec::with_capacity(n),
            pi0: Vec::with_capacity(n),
            edge_mass: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: usize, p2: f64, pi0: f64, edge: f64) {
        self.times.push(t);
        self.p2_mean.push(p2);
        self.pi0.push(pi0);
        self.edge_mass.push(edge);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn index_of(&self, t: usize) -> Option<usize> {
        self.times.binary_search(&t).ok()
    }

    pub fn p2_at(&self, t: usize) -> Option<f64> {
        self.index_of(t).map(|i| self.p2_mean[i])
    }

    /// Kinetic energy `⟨(m+β)²⟩/2` at kick `t`.
    pub fn kinetic_energy_at(&self, t: usize) -> Option<f64> {
        self.p2_at(t).map(|p2| 0.5 * p2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(probs: Vec<f64>) -> MomentumDistribution {
        MomentumDistribution {
            probs,
            time: 0,
            meta: Provenance {
                params: SimParams::new(5.34, 2.89, 0.0),
                ensemble: None,
            },
        }
    }

    #[test]
    fn site_indexing() {
        let mut p = vec![0.0; 16];
        p[8] = 1.0;
        let d = dist(p);
        assert_eq!(d.site(0), -8);
        assert_eq!(d.site(8), 0);
        assert_eq!(d.prob(0), 1.0);
        assert_eq!(d.prob(-9), 0.0);
        assert_eq!(d.prob(8), 0.0);
    }

    #[test]
    fn edge_is_outer_tenth() {
        assert_eq!(edge_width(4096), 205);
        let mut p = vec![0.0; 100];
        p[0] = 0.25;
        p[4] = 0.25;
        p[5] = 0.25;
        p[99] = 0.25;
        assert_eq!(edge_mass(&p), 0.75);
    }
}
