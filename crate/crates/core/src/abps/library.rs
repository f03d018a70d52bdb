use serde::{Deserialize, Serialize};

use crate::apomdp::{perturb_model, ApomdpModel};
use crate::error::{config, Result};
use crate::seed;

pub type PolicyId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyEntry {
    pub id: PolicyId,
    /// Perturbation seed and magnitude; magnitude 0 marks the unperturbed base.
    pub seed: u64,
    pub magnitude: f64,
    /// Number of chained perturbations applied to the base.
    #[serde(default)]
    pub steps: usize,
    pub model: ApomdpModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyLibrary {
    pub entries: Vec<PolicyEntry>,
}

impl PolicyLibrary {
    pub fn new(entries: Vec<PolicyEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(config("policy library is empty"));
        }
        let mut ids: Vec<_> = entries.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(config("duplicate policy id"));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<PolicyId> {
        self.entries.iter().map(|e| e.id).collect()
    }

    pub fn get(&self, id: PolicyId) -> Option<&PolicyEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// The entries whose ids are in `keep`, in library order.
    pub fn subset(&self, keep: &[PolicyId]) -> Result<Self> {
        Self::new(self.entries.iter().filter(|e| keep.contains(&e.id)).cloned().collect())
    }
}

/// Policy 0 is `base` itself; policy k perturbs it with magnitudes cycling
/// through `magnitudes`, each under its own derived seed.
/// Entry 0 is `base`. Entry `k` walks away from it by chained
/// perturbations: magnitudes cycle through `magnitudes` and every full
/// cycle adds one more step, so later entries sit farther from the base.
pub fn generate_library(base: &ApomdpModel, count: usize, magnitudes: &[f64], seed: u64) -> Result<PolicyLibrary> {
    if count == 0 {
        return Err(config("library size must be at least one"));
    }
    if count > 1 && magnitudes.is_empty() {
        return Err(config("no perturbation magnitudes given"));
    }
    let mut entries = vec![PolicyEntry { id: 0, seed, magnitude: 0.0, steps: 0, model: base.clone() }];
    for id in 1..count {
        let magnitude = magnitudes[(id - 1) % magnitudes.len()];
        let steps = 1 + (id - 1) / magnitudes.len();
        let s = seed::derive(seed, &[id as u64]);
        let mut model = base.clone();
        for step in 0..steps {
            model = perturb_model(&model, magnitude, seed::derive(s, &[step as u64]))?;
        }
        entries.push(PolicyEntry { id, seed: s, magnitude, steps, model });
    }
    PolicyLibrary::new(entries)
}
