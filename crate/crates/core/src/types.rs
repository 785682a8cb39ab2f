//! Dyadic type discretization of simplex vectors and the tolerance
//! sequences used by the good-site definition.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{neumaier_sum, MuDistribution, TransitionVector};

/// Multi-index in `{0, ..., 2^N - 1}^{2d}`, one coordinate per direction slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TypeIndex {
    pub coords: Vec<u32>,
    pub resolution: u32,
}

impl TypeIndex {
    /// The type at resolution `coarser` (< current) obtained by halving.
    pub fn coarsen(&self, coarser: u32) -> TypeIndex {
        assert!(coarser <= self.resolution);
        let shift = self.resolution - coarser;
        TypeIndex {
            coords: self.coords.iter().map(|c| c >> shift).collect(),
            resolution: coarser,
        }
    }
}

fn check_resolution(n: u32) -> Result<()> {
    if n == 0 || n > 31 {
        return Err(Error::InvalidInput(format!(
            "type resolution N = {n} must be in 1..=31"
        )));
    }
    Ok(())
}

/// `T_i(s) = max{ j < 2^N : j 2^-N <= s_i }` per coordinate. `s_i = 1` maps
/// to `2^N - 1`.
pub fn type_of(s: &TransitionVector, resolution: u32) -> Result<TypeIndex> {
    check_resolution(resolution)?;
    Ok(type_of_unchecked(s, resolution))
}

pub(crate) fn type_of_unchecked(s: &TransitionVector, resolution: u32) -> TypeIndex {
    let scale = (1u64 << resolution) as f64;
    let top = (1u32 << resolution) - 1;
    let coords = s
        .probs()
        .iter()
        // scaling by a power of two is exact, so floor is exact too
        .map(|p| ((p * scale).floor() as u32).min(top))
        .collect();
    TypeIndex { coords, resolution }
}

/// `p_k = mu(T(s) = k)` for every type `k` with positive mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeProbabilities {
    pub resolution: u32,
    pub probs: BTreeMap<TypeIndex, f64>,
    /// `Some(n)` when estimated from `n` samples.
    pub sample_budget: Option<usize>,
}

impl TypeProbabilities {
    pub fn get(&self, k: &TypeIndex) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        neumaier_sum(self.probs.values().copied())
    }
}

/// Exact aggregation of atom weights by type.
pub fn type_probabilities(mu: &MuDistribution, resolution: u32) -> Result<TypeProbabilities> {
    check_resolution(resolution)?;
    let atoms = mu.atoms().ok_or(Error::NonAtomic)?;
    let mut groups: BTreeMap<TypeIndex, Vec<f64>> = BTreeMap::new();
    for a in atoms {
        groups
            .entry(type_of_unchecked(&a.probs, resolution))
            .or_default()
            .push(a.weight);
    }
    Ok(TypeProbabilities {
        resolution,
        probs: groups
            .into_iter()
            .map(|(k, ws)| (k, neumaier_sum(ws)))
            .collect(),
        sample_budget: None,
    })
}

/// Sampled type frequencies for laws without atoms.
pub fn type_probabilities_sampled<R: Rng + ?Sized>(
    mu: &MuDistribution,
    resolution: u32,
    budget: usize,
    rng: &mut R,
) -> Result<TypeProbabilities> {
    check_resolution(resolution)?;
    if budget == 0 {
        return Err(Error::InvalidInput("sample budget must be positive".into()));
    }
    let mut counts: BTreeMap<TypeIndex, u64> = BTreeMap::new();
    for _ in 0..budget {
        *counts
            .entry(type_of_unchecked(&mu.sample(rng), resolution))
            .or_default() += 1;
    }
    Ok(TypeProbabilities {
        resolution,
        probs: counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / budget as f64))
            .collect(),
        sample_budget: Some(budget),
    })
}

/// `epsilon_L = 1 / (1 + ln L)`.
pub fn epsilon(l: f64) -> f64 {
    assert!(l >= 1.0, "epsilon_L needs L >= 1");
    1.0 / (1.0 + l.ln())
}

/// `phi_L = L^(1/100)`.
pub fn phi(l: f64) -> f64 {
    assert!(l >= 1.0, "phi_L needs L >= 1");
    l.powf(0.01)
}

/// The two tolerance sequences, tabulated on request.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSchedule;

impl ToleranceSchedule {
    pub fn epsilon(&self, l: f64) -> f64 {
        epsilon(l)
    }

    pub fn phi(&self, l: f64) -> f64 {
        phi(l)
    }
}
