use serde::{Deserialize, Serialize};

use super::PolicyId;
use crate::apomdp::{ObservationVector, NUM_FLAGS};
use crate::error::{config, Error, Result};
use crate::human::HumanType;

pub const DEFAULT_BINS: usize = 20;

/// Per-(type, policy) flag counts. Rates are Laplace-smoothed, so none is
/// ever exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    types: Vec<HumanType>,
    policies: Vec<PolicyId>,
    counts: Vec<[u64; NUM_FLAGS]>,
    totals: Vec<u64>,
}

impl ObservationModel {
    pub fn new(types: Vec<HumanType>, policies: Vec<PolicyId>) -> Result<Self> {
        check_axes(&types, &policies)?;
        let n = types.len() * policies.len();
        Ok(Self { types, policies, counts: vec![[0; NUM_FLAGS]; n], totals: vec![0; n] })
    }

    pub fn types(&self) -> &[HumanType] {
        &self.types
    }

    pub fn policies(&self) -> &[PolicyId] {
        &self.policies
    }

    pub fn record(&mut self, type_index: usize, policy: PolicyId, sigma: &ObservationVector) -> Result<()> {
        let i = pair_index(&self.types, &self.policies, type_index, policy)?;
        for (c, &on) in self.counts[i].iter_mut().zip(sigma.flags()) {
            *c += u64::from(on);
        }
        self.totals[i] += 1;
        Ok(())
    }

    /// Adds another model's counts; both must share the same axes.
    pub fn merge(&mut self, other: &ObservationModel) -> Result<()> {
        if self.types != other.types || self.policies != other.policies {
            return Err(config("observation models have different axes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.totals.iter_mut().zip(&other.totals).for_each(|(x, y)| *x += y);
        Ok(())
    }

    pub fn counts(&self, type_index: usize, policy: PolicyId) -> Result<([u64; NUM_FLAGS], u64)> {
        let i = pair_index(&self.types, &self.policies, type_index, policy)?;
        Ok((self.counts[i], self.totals[i]))
    }

    /// The same counts for a subset of the policies, in `keep` order.
    pub fn restrict(&self, keep: &[PolicyId]) -> Result<Self> {
        let mut out = Self::new(self.types.clone(), keep.to_vec())?;
        for t in 0..self.types.len() {
            for (j, &p) in keep.iter().enumerate() {
                let i = pair_index(&self.types, &self.policies, t, p)?;
                out.counts[t * keep.len() + j] = self.counts[i];
                out.totals[t * keep.len() + j] = self.totals[i];
            }
        }
        Ok(out)
    }

    /// Smoothed rates (c + 1) / (n + 2).
    pub fn rates(&self, type_index: usize, policy: PolicyId) -> Result<[f64; NUM_FLAGS]> {
        let (c, n) = self.counts(type_index, policy)?;
        Ok(c.map(|c| (c as f64 + 1.0) / (n as f64 + 2.0)))
    }

    /// Log-likelihood of an observation sequence as a product of
    /// independent Bernoulli flags.
    pub fn log_likelihood(&self, type_index: usize, policy: PolicyId, seq: &[ObservationVector]) -> Result<f64> {
        let rates = self.rates(type_index, policy)?;
        let (ln_on, ln_off) = (rates.map(f64::ln), rates.map(|p| (1.0 - p).ln()));
        Ok(seq
            .iter()
            .map(|o| (0..NUM_FLAGS).map(|f| if o.flags()[f] { ln_on[f] } else { ln_off[f] }).sum::<f64>())
            .sum())
    }
}

/// Per-(type, policy) histograms of discounted task returns over shared bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceModel {
    types: Vec<HumanType>,
    policies: Vec<PolicyId>,
    edges: Vec<f64>,
    masses: Vec<Vec<f64>>,
}

impl PerformanceModel {
    /// Fits `bins` uniform bins over the range of all returns, with one
    /// pseudo-count per bin. `returns` is indexed type-major, policy-minor.
    pub fn fit(types: Vec<HumanType>, policies: Vec<PolicyId>, returns: &[Vec<f64>], bins: usize) -> Result<Self> {
        check_axes(&types, &policies)?;
        if bins == 0 {
            return Err(config("histogram needs at least one bin"));
        }
        if returns.len() != types.len() * policies.len() {
            return Err(config("returns do not cover every (type, policy) pair"));
        }
        let all = returns.iter().flatten().copied();
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u), hi.max(u)));
        let (lo, hi) = if !lo.is_finite() {
            (-0.5, 0.5)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|k| lo + width * k as f64).collect();
        edges.push(hi);
        let mut model = Self { types, policies, edges, masses: Vec::with_capacity(returns.len()) };
        for r in returns {
            let mut counts = vec![1.0; bins];
            for &u in r {
                counts[model.bin_of(u)] += 1.0;
            }
            let total = r.len() as f64 + bins as f64;
            model.masses.push(counts.into_iter().map(|c| c / total).collect());
        }
        Ok(model)
    }

    /// A model from explicit edges and masses, type-major.
    pub fn from_histograms(
        types: Vec<HumanType>,
        policies: Vec<PolicyId>,
        edges: Vec<f64>,
        masses: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_axes(&types, &policies)?;
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config("bin edges must be strictly increasing"));
        }
        if masses.len() != types.len() * policies.len() {
            return Err(config("histograms do not cover every (type, policy) pair"));
        }
        for m in &masses {
            let sum: f64 = m.iter().sum();
            if m.len() != edges.len() - 1 || m.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(config("histogram masses must be non-negative and sum to 1"));
            }
        }
        Ok(Self { types, policies, edges, masses })
    }

    pub fn types(&self) -> &[HumanType] {
        &self.types
    }

    pub fn policies(&self) -> &[PolicyId] {
        &self.policies
    }

    /// The same histograms for a subset of the policies, in `keep` order.
    pub fn restrict(&self, keep: &[PolicyId]) -> Result<Self> {
        let mut masses = Vec::with_capacity(self.types.len() * keep.len());
        for t in 0..self.types.len() {
            for &p in keep {
                masses.push(self.masses(t, p)?.to_vec());
            }
        }
        Self::from_histograms(self.types.clone(), keep.to_vec(), self.edges.clone(), masses)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn masses(&self, type_index: usize, policy: PolicyId) -> Result<&[f64]> {
        Ok(&self.masses[pair_index(&self.types, &self.policies, type_index, policy)?])
    }

    /// The bin containing `u`; values outside the support go to the
    /// boundary bins.
    pub fn bin_of(&self, u: f64) -> usize {
        let b = self.num_bins();
        self.edges[1..b].iter().take_while(|&&e| u >= e).count()
    }

    pub fn midpoint(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    /// E[U | τ, π] from bin midpoints.
    pub fn expected(&self, type_index: usize, policy: PolicyId) -> Result<f64> {
        let m = self.masses(type_index, policy)?;
        Ok(m.iter().enumerate().map(|(k, p)| p * self.midpoint(k)).sum())
    }

    /// CDF at `u`, linear inside the bin that contains it.
    pub fn cdf(&self, type_index: usize, policy: PolicyId, u: f64) -> Result<f64> {
        let m = self.masses(type_index, policy)?;
        if u <= self.edges[0] {
            return Ok(0.0);
        }
        if u >= self.edges[self.num_bins()] {
            return Ok(1.0);
        }
        let k = self.bin_of(u);
        let below: f64 = m[..k].iter().sum();
        let frac = (u - self.edges[k]) / (self.edges[k + 1] - self.edges[k]);
        Ok(below + m[k] * frac)
    }
}

fn check_axes(types: &[HumanType], policies: &[PolicyId]) -> Result<()> {
    if types.is_empty() || policies.is_empty() {
        return Err(config("models need at least one type and one policy"));
    }
    let mut ids = policies.to_vec();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(config("duplicate policy id"));
    }
    Ok(())
}

fn pair_index(types: &[HumanType], policies: &[PolicyId], type_index: usize, policy: PolicyId) -> Result<usize> {
    match policies.iter().position(|&p| p == policy) {
        Some(p) if type_index < types.len() => Ok(type_index * policies.len() + p),
        _ => Err(Error::MissingPair { type_index, policy }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Indexed `[type][policy][bin]`.
    pub masses: Vec<Vec<Vec<f64>>>,
}

/// On-disk form of both trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainedModels {
    pub types: Vec<HumanType>,
    pub policies: Vec<PolicyId>,
    /// Smoothed flag rates, `[type][policy][flag]`.
    pub bernoulli_rates: Vec<Vec<[f64; NUM_FLAGS]>>,
    pub observation_counts: Vec<Vec<[u64; NUM_FLAGS]>>,
    pub observation_totals: Vec<Vec<u64>>,
    pub histogram: Histogram,
}

impl TrainedModels {
    pub fn new(obs: &ObservationModel, perf: &PerformanceModel) -> Result<Self> {
        if obs.types != perf.types || obs.policies != perf.policies {
            return Err(config("observation and performance models have different axes"));
        }
        let np = obs.policies.len();
        let grid = |f: &dyn Fn(usize) -> Vec<_>| -> Vec<_> { (0..obs.types.len()).map(f).collect() };
        let rates = grid(&|t| obs.policies.iter().map(|&p| obs.rates(t, p).unwrap()).collect());
        Ok(Self {
            types: obs.types.clone(),
            policies: obs.policies.clone(),
            bernoulli_rates: rates,
            observation_counts: obs.counts.chunks(np).map(<[_]>::to_vec).collect(),
            observation_totals: obs.totals.chunks(np).map(<[_]>::to_vec).collect(),
            histogram: Histogram {
                edges: perf.edges.clone(),
                masses: perf.masses.chunks(np).map(<[_]>::to_vec).collect(),
            },
        })
    }

    pub fn observation_model(&self) -> Result<ObservationModel> {
        let mut m = ObservationModel::new(self.types.clone(), self.policies.clone())?;
        let (counts, totals): (Vec<_>, Vec<_>) = (
            self.observation_counts.iter().flatten().copied().collect(),
            self.observation_totals.iter().flatten().copied().collect(),
        );
        if counts.len() != m.counts.len() || totals.len() != m.totals.len() {
            return Err(config("observation counts do not match the axes"));
        }
        m.counts = counts;
        m.totals = totals;
        Ok(m)
    }

    pub fn performance_model(&self) -> Result<PerformanceModel> {
        PerformanceModel::from_histograms(
            self.types.clone(),
            self.policies.clone(),
            self.histogram.edges.clone(),
            self.histogram.masses.iter().flatten().cloned().collect(),
        )
    }
}
