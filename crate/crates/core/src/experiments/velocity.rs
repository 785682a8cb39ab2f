use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, ExperimentKind, WalkEngine};
use crate::experiments::output::{ExperimentResult, ResultRow, RESULT_SCHEMA_VERSION};
use crate::experiments::{drift_from_slot_means, par_replicas};
use crate::stats::{derive_seed, RunningStats};
use crate::walker::{run_annealed, run_annealed_revealed, run_infinite_gamma, ProjectionFrame, WalkSample, WalkSeeds};

/// Per-replica observables of one walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityObservation {
    pub distance: f64,
    pub projected: f64,
    pub in_ball: bool,
}

pub fn observe(sample: &WalkSample, drift: &[f64], frame: &ProjectionFrame, epsilon: f64) -> VelocityObservation {
    let t = sample.steps as f64;
    let x = sample.final_position();
    let distance = x
        .iter()
        .zip(drift)
        .map(|(xi, vi)| {
            let e = *xi as f64 / t - vi;
            e * e
        })
        .sum::<f64>()
        .sqrt();
    VelocityObservation {
        distance,
        projected: frame.project_point(x) / t,
        in_ball: distance < epsilon,
    }
}

fn cell_rows(
    cell: &str,
    gamma: f64,
    obs: &[VelocityObservation],
    level: f64,
) -> (Vec<ResultRow>, RunningStats, RunningStats) {
    let mut dist = RunningStats::default();
    let mut proj = RunningStats::default();
    for o in obs {
        dist.push(o.distance);
        proj.push(o.projected);
    }
    let hits = obs.iter().filter(|o| o.in_ball).count() as u64;
    let tag = |r: ResultRow| ResultRow { gamma: Some(gamma), ..r };
    let rows = vec![
        tag(ResultRow::new(cell, "distance").with_moments(&dist, level)),
        tag(ResultRow::new(cell, "projected_velocity").with_moments(&proj, level)),
        tag(ResultRow::new(cell, "in_ball").with_proportion(hits, obs.len() as u64, level)),
    ];
    (rows, dist, proj)
}

/// `|X_T / T - E_mu[D]|`, `X_T^v / T` and membership in `B_eps(E_mu[D])`
/// for every gamma cell and the i.i.d. baseline. All cells share the
/// replica seeds.
pub fn velocity_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.kind != ExperimentKind::Velocity {
        return Err(Error::InvalidInput("config kind is not `velocity`".into()));
    }
    let p = &config.velocity;
    let mu = config.distribution()?;
    let d = mu.dim();
    let drift = drift_from_slot_means(d, &mu.mean_vector());
    if drift.iter().all(|c| c.abs() < 1e-15) {
        return Err(Error::ZeroDrift);
    }
    let frame = match &p.direction {
        Some(dir) => ProjectionFrame::new(dir, &drift)?,
        None => ProjectionFrame::along_drift(&drift)?,
    };
    let level = config.confidence;
    let master = config.seed;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut gammas = p.gammas.clone();
    gammas.sort_by(|a, b| a.total_cmp(b));
    for &gamma in &gammas {
        let obs = par_replicas(config.replicas, config.workers, |r| {
            let seeds = WalkSeeds::for_replica(master, r);
            let sample = match p.engine {
                WalkEngine::Revealed => run_annealed_revealed(&mu, gamma, p.steps, seeds)?,
                WalkEngine::Window => run_annealed(&mu, gamma, p.steps, seeds, p.delta_trunc)?,
            };
            Ok(observe(&sample, &drift, &frame, p.epsilon))
        })?;
        let cell = format!("gamma={gamma}");
        let (r, dist, proj) = cell_rows(&cell, gamma, &obs, level);
        rows.extend(r);
        cells.push((gamma, dist, proj));
    }
    let baseline = if p.include_infinite {
        let obs = par_replicas(config.replicas, config.workers, |r| {
            let sample = run_infinite_gamma(&mu, p.steps, derive_seed(master, &[r, 2]));
            Ok(observe(&sample, &drift, &frame, p.epsilon))
        })?;
        let (r, dist, proj) = cell_rows("gamma=inf", f64::INFINITY, &obs, level);
        rows.extend(r);
        Some((dist, proj))
    } else {
        None
    };

    let decreasing = cells.windows(2).all(|w| w[1].1.mean() < w[0].1.mean());
    let overlap = match (cells.last(), &baseline) {
        (Some((_, _, proj)), Some((_, base))) => {
            Some(proj.mean_interval(level).overlaps(&base.mean_interval(level)))
        }
        _ => None,
    };
    let distance_overlap = match (cells.last(), &baseline) {
        (Some((_, dist, _)), Some((base, _))) => {
            Some(dist.mean_interval(level).overlaps(&base.mean_interval(level)))
        }
        _ => None,
    };
    let summary = json!({
        "drift": drift,
        "projection_direction": frame.direction,
        "v": frame.v,
        "epsilon": p.epsilon,
        "steps": p.steps,
        "engine": p.engine,
        "mean_distance": cells.iter().map(|(g, dist, _)| json!({"gamma": g, "mean": dist.mean()})).collect::<Vec<_>>(),
        "distance_strictly_decreasing": decreasing,
        "largest_gamma_projected_ci_overlaps_infinite": overlap,
        "largest_gamma_distance_ci_overlaps_infinite": distance_overlap,
    });
    Ok(ExperimentResult {
        schema_version: RESULT_SCHEMA_VERSION,
        experiment: ExperimentKind::Velocity,
        config: config.clone(),
        master_seed: master,
        replicas: config.replicas,
        rows,
        summary,
        wall_clock: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{MuDistribution, MuSpec, TransitionVector};

    fn config(mu: MuDistribution, gammas: Vec<f64>, steps: usize, replicas: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Velocity, MuSpec::from_distribution(&mu, 2));
        cfg.velocity.gammas = gammas;
        cfg.velocity.steps = steps;
        cfg.replicas = replicas;
        cfg.seed = 42;
        cfg.workers = Some(2);
        cfg
    }

    #[test]
    fn point_mass_is_exact() {
        let s = TransitionVector::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let cfg = config(MuDistribution::point_mass(s), vec![0.5, 5.0], 100, 20);
        let res = velocity_sweep(&cfg).unwrap();
        for row in res.rows_for("distance") {
            assert_eq!(row.mean, 0.0);
            assert_eq!(row.variance, 0.0);
        }
        for row in res.rows_for("projected_velocity") {
            assert_eq!(row.mean, 1.0);
        }
    }

    #[test]
    fn zero_drift_rejected() {
        let mu = MuDistribution::point_mass(TransitionVector::uniform(1));
        let cfg = config(mu, vec![1.0], 10, 2);
        assert!(matches!(velocity_sweep(&cfg), Err(Error::ZeroDrift)));
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let mu = MuDistribution::atomic(vec![
            (TransitionVector::new(vec![0.1, 0.9]).unwrap(), 0.8),
            (TransitionVector::new(vec![0.9, 0.1]).unwrap(), 0.2),
        ])
        .unwrap();
        let mut cfg = config(mu, vec![0.5, 5.0], 200, 16);
        let a = velocity_sweep(&cfg).unwrap();
        cfg.workers = Some(1);
        let b = velocity_sweep(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let base = a.rows.iter().find(|r| r.cell == "gamma=inf" && r.statistic == "projected_velocity").unwrap();
        assert!((base.mean - 0.48).abs() < 4.0 * base.std_error.max(1e-3));
    }
}
