//! Replica-parallel experiment drivers and the multiscale builders.

pub mod concentration;
pub mod config;
pub mod output;
pub mod persistence;
pub mod renorm;
pub mod velocity;

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::direction_axis;

pub use concentration::concentration_tail;
pub use config::{ExperimentConfig, ExperimentKind, Overrides, WalkEngine};
pub use output::{ExperimentResult, ResultRow};
pub use persistence::goodsite_persistence;
pub use renorm::{build_dominating_law, build_schedule, zk_law, DominatingLaw, LawSide, RenormSchedule, ZLaw};
pub use velocity::velocity_sweep;

/// Runs the experiment named by `config.kind`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let started = Instant::now();
    let mut result = match config.kind {
        ExperimentKind::Velocity => velocity_sweep(config),
        ExperimentKind::Concentration => concentration_tail(config),
        ExperimentKind::Persistence => goodsite_persistence(config),
    }?;
    result.wall_clock = started.elapsed();
    Ok(result)
}

/// Evaluates `f(replica)` for every replica on a pool of `workers` threads
/// and returns the outputs in replica order. The first failing replica (by
/// index) decides the error.
pub(crate) fn par_replicas<T, F>(replicas: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::ResourceCap(format!("worker pool: {e}")))?;
    let outputs: Vec<Result<T>> = pool.install(|| (0..replicas as u64).into_par_iter().map(&f).collect());
    outputs.into_iter().collect()
}

/// `E_mu[D] = sum_j E_mu[s_j] e_j` from per-slot means.
pub fn drift_from_slot_means(d: usize, means: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (slot, m) in means.iter().enumerate() {
        let (axis, sign) = direction_axis(d, slot);
        out[axis] += sign as f64 * m;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replica_order_and_errors() {
        let v = par_replicas(50, Some(3), |r| Ok(r * r)).unwrap();
        assert_eq!(v, (0..50u64).map(|r| r * r).collect::<Vec<_>>());
        let e = par_replicas(50, Some(3), |r| {
            if r >= 7 {
                Err(Error::Infeasible(format!("{r}")))
            } else {
                Ok(r)
            }
        });
        assert!(matches!(e, Err(Error::Infeasible(s)) if s == "7"));
    }

    #[test]
    fn drift_layout() {
        assert_eq!(drift_from_slot_means(1, &[0.1, 0.9]), vec![0.8]);
        let dr = drift_from_slot_means(2, &[0.1, 0.2, 0.3, 0.4]);
        assert!((dr[0] - 0.1).abs() < 1e-15 && (dr[1] - 0.3).abs() < 1e-15);
    }
}
