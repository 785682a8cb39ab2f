//! Transition-probability vectors and the law they are drawn from.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::direction_axis;

/// Absolute tolerance on the sum of a simplex point.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point of the simplex: one probability per lattice direction, stored in
/// slot order `-d, ..., -1, 1, ..., d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TransitionVector {
    probs: Vec<f64>,
}

impl TransitionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || !probs.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "a transition vector needs 2d entries, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!(
                "transition probability {bad} outside [0, 1]"
            )));
        }
        let sum = neumaier_sum(probs.iter().copied());
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidSimplex { sum });
        }
        Ok(Self { probs })
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn renormalized(weights: Vec<f64>) -> Result<Self> {
        let sum = neumaier_sum(weights.iter().copied());
        if !(sum > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidInput(
                "weights must be nonnegative with a positive sum".into(),
            ));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    /// All mass on the direction with signed label `label`.
    pub fn deterministic(d: usize, label: i32) -> Result<Self> {
        let slot = crate::lattice::direction_slot(d, label)
            .ok_or_else(|| Error::InvalidInput(format!("no direction {label} in d = {d}")))?;
        let mut probs = vec![0.0; 2 * d];
        probs[slot] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            probs: vec![1.0 / (2 * d) as f64; 2 * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.probs.len() / 2
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of the direction with signed label `label`.
    pub fn prob(&self, label: i32) -> f64 {
        crate::lattice::direction_slot(self.dim(), label)
            .map(|s| self.probs[s])
            .unwrap_or(0.0)
    }

    /// Expected displacement of one step.
    pub fn drift(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (slot, p) in self.probs.iter().enumerate() {
            let (axis, sign) = direction_axis(d, slot);
            out[axis] += sign as f64 * p;
        }
        out
    }

    pub(crate) fn bit_pattern(&self) -> impl Iterator<Item = u64> + '_ {
        self.probs.iter().map(|p| p.to_bits())
    }
}

impl TryFrom<Vec<f64>> for TransitionVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TransitionVector> for Vec<f64> {
    fn from(v: TransitionVector) -> Self {
        v.probs
    }
}

/// Drift of `s`: the sum of `s_i e_i` over all directions.
pub fn drift(s: &TransitionVector) -> Vec<f64> {
    s.drift()
}

/// Neumaier-compensated sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub probs: TransitionVector,
    pub weight: f64,
}

/// The single-site law of the environment.
#[derive(Debug, Clone, PartialEq)]
pub enum MuDistribution {
    /// Finitely many transition vectors with positive weights.
    Atomic { d: usize, atoms: Vec<Atom> },
    /// Dirichlet law on the simplex with one concentration per direction slot.
    Dirichlet { d: usize, alpha: Vec<f64> },
}

/// Mean of a sampled quantity with its normal-approximation uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
}

impl MuDistribution {
    pub fn atomic(atoms: Vec<(TransitionVector, f64)>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidInput("at least one atom is required".into()))?;
        let d = first.0.dim();
        let mut out = Vec::with_capacity(atoms.len());
        for (probs, weight) in atoms {
            if probs.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: probs.dim(),
                });
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::InvalidInput(format!("atom weight {weight} must be positive")));
            }
            out.push(Atom { probs, weight });
        }
        let total = neumaier_sum(out.iter().map(|a| a.weight));
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidInput(format!("atom weights sum to {total}, not 1")));
        }
        Ok(Self::Atomic { d, atoms: out })
    }

    pub fn point_mass(s: TransitionVector) -> Self {
        Self::Atomic {
            d: s.dim(),
            atoms: vec![Atom {
                probs: s,
                weight: 1.0,
            }],
        }
    }

    pub fn dirichlet(d: usize, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != 2 * d || alpha.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidInput(
                "dirichlet needs 2d positive concentrations".into(),
            ));
        }
        Ok(Self::Dirichlet { d, alpha })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Atomic { d, .. } | Self::Dirichlet { d, .. } => *d,
        }
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match self {
            Self::Atomic { atoms, .. } => Some(atoms),
            Self::Dirichlet { .. } => None,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Self::Atomic { .. })
    }

    /// Exact annealed drift of an atomic law.
    pub fn annealed_drift(&self) -> Result<Vec<f64>> {
        let atoms = self.atoms().ok_or(Error::NonAtomic)?;
        let d = self.dim();
        let drifts: Vec<Vec<f64>> = atoms.iter().map(|a| a.probs.drift()).collect();
        Ok((0..d)
            .map(|axis| {
                neumaier_sum(
                    atoms
                        .iter()
                        .zip(&drifts)
                        .map(|(a, dr)| a.weight * dr[axis]),
                )
            })
            .collect())
    }

    /// Monte Carlo estimate of the annealed drift with `budget` samples.
    pub fn annealed_drift_estimate<R: Rng + ?Sized>(
        &self,
        budget: usize,
        rng: &mut R,
    ) -> Result<VectorEstimate> {
        if budget < 2 {
            return Err(Error::InvalidInput("sample budget must be at least 2".into()));
        }
        let d = self.dim();
        let mut stats = vec![crate::stats::RunningStats::default(); d];
        for _ in 0..budget {
            let s = self.sample(rng);
            for (st, v) in stats.iter_mut().zip(s.drift()) {
                st.push(v);
            }
        }
        Ok(VectorEstimate {
            mean: stats.iter().map(|s| s.mean()).collect(),
            std_error: stats.iter().map(|s| s.std_error()).collect(),
            samples: budget,
        })
    }

    /// Mean transition vector `E_mu[s]` (exact for atomic laws).
    pub fn mean_vector(&self) -> Vec<f64> {
        match self {
            Self::Atomic { d, atoms } => (0..2 * d)
                .map(|slot| neumaier_sum(atoms.iter().map(|a| a.weight * a.probs.probs()[slot])))
                .collect(),
            Self::Dirichlet { alpha, .. } => {
                let total: f64 = alpha.iter().sum();
                alpha.iter().map(|a| a / total).collect()
            }
        }
    }

    /// Index of a random atom (atomic laws only).
    pub fn sample_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let atoms = self.atoms()?;
        let mut u: f64 = rng.random();
        for (i, a) in atoms.iter().enumerate() {
            if u < a.weight {
                return Some(i);
            }
            u -= a.weight;
        }
        Some(atoms.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TransitionVector {
        match self {
            Self::Atomic { atoms, .. } => {
                let i = self.sample_atom(rng).expect("atomic");
                atoms[i].probs.clone()
            }
            Self::Dirichlet { alpha, .. } => {
                // normalized independent Gamma(alpha_i, 1) draws
                let draw: Vec<f64> = alpha
                    .iter()
                    .map(|a| Gamma::new(*a, 1.0).expect("validated concentrations").sample(rng))
                    .collect();
                if draw.iter().all(|g| *g == 0.0) {
                    let top = (0..alpha.len())
                        .max_by(|i, j| alpha[*i].total_cmp(&alpha[*j]))
                        .unwrap_or(0);
                    let mut e = vec![0.0; alpha.len()];
                    e[top] = 1.0;
                    return TransitionVector::new(e).expect("unit vector");
                }
                TransitionVector::renormalized(draw).expect("gamma draws give a simplex point")
            }
        }
    }
}

/// On-disk form of a law: `{schema_version, d, N, atoms: [{probs, weight}]}`
/// or `{schema_version, d, N, dirichlet: [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSpec {
    #[serde(default = "mu_schema_version")]
    pub schema_version: u32,
    pub d: usize,
    #[serde(rename = "N")]
    pub resolution: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<Vec<f64>>,
}

pub const MU_SCHEMA_VERSION: u32 = 1;

fn mu_schema_version() -> u32 {
    MU_SCHEMA_VERSION
}

impl MuSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        if spec.schema_version != MU_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported mu schema_version {} (expected {MU_SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        spec.distribution()?;
        Ok(spec)
    }

    pub fn from_distribution(mu: &MuDistribution, resolution: u32) -> Self {
        match mu {
            MuDistribution::Atomic { d, atoms } => Self {
                schema_version: MU_SCHEMA_VERSION,
                d: *d,
                resolution,
                atoms: atoms.clone(),
                dirichlet: None,
            },
            MuDistribution::Dirichlet { d, alpha } => Self {
                schema_version: MU_SCHEMA_VERSION,
                d: *d,
                resolution,
                atoms: Vec::new(),
                dirichlet: Some(alpha.clone()),
            },
        }
    }

    pub fn distribution(&self) -> Result<MuDistribution> {
        if self.resolution == 0 {
            return Err(Error::InvalidInput("type resolution N must be >= 1".into()));
        }
        let mu = match (&self.dirichlet, self.atoms.is_empty()) {
            (Some(alpha), true) => MuDistribution::dirichlet(self.d, alpha.clone())?,
            (None, false) => MuDistribution::atomic(
                self.atoms
                    .iter()
                    .map(|a| (a.probs.clone(), a.weight))
                    .collect(),
            )?,
            _ => {
                return Err(Error::InvalidInput(
                    "give exactly one of `atoms` or `dirichlet`".into(),
                ))
            }
        };
        if mu.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: mu.dim(),
            });
        }
        Ok(mu)
    }
}
