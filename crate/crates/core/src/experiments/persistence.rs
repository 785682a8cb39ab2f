use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde_json::json;

use crate::environment::{EnvironmentWindow, GoodVerdict};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::output::{ExperimentResult, ResultRow, RESULT_SCHEMA_VERSION};
use crate::experiments::par_replicas;
use crate::lattice::BoxGeometry;
use crate::simplex::MuDistribution;
use crate::stats::derive_seed;
use crate::types::{type_probabilities, type_probabilities_sampled, TypeProbabilities};
use crate::walker::RevealedStirring;

/// Outcome of one replica: rejection attempts used, and whether the origin
/// is bad at time `t` for each `J` (empty when the cap was hit).
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceReplica {
    pub attempts: u64,
    pub bad: Option<Vec<bool>>,
}

/// Samples `eta(0)` on the box of half-width `l_max` conditioned on the
/// origin being good at scale `l`, then reads `eta(t)` on the box of
/// half-width `j_max` by tracing its particles backwards (the stirring
/// process is reversible, so the backward paths are again stirring
/// paths). Sites whose trace leaves the conditioned box get fresh marks.
#[allow(clippy::too_many_arguments)]
pub fn persistence_replica(
    mu: &MuDistribution,
    pk: &TypeProbabilities,
    gamma: f64,
    t: f64,
    l: u32,
    l_max: u32,
    j_grid: &[u32],
    j_max: u32,
    rejection_cap: u64,
    seed: u64,
) -> Result<PersistenceReplica> {
    let d = mu.dim();
    let origin = vec![0i64; d];
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut attempts = 0;
    let env0 = loop {
        if attempts == rejection_cap {
            return Ok(PersistenceReplica { attempts, bad: None });
        }
        attempts += 1;
        let env = EnvironmentWindow::sample_iid(mu, l_max, 0, origin.clone(), &mut rng)?;
        if env.is_good(&origin, l, l_max, pk)? == GoodVerdict::Good {
            break env;
        }
    };

    let target = BoxGeometry::centered(d, j_max)?;
    let mut system = RevealedStirring::with_palette(d, gamma, env0.palette().to_vec())?;
    for i in 0..target.len() {
        system.add(&target.point_of(i), 0)?;
    }
    system.evolve(t, &mut rng);

    let mut palette = env0.palette().to_vec();
    let mut marks = Vec::with_capacity(target.len());
    for id in 0..target.len() {
        let y = system.position(id);
        let mark = match env0.geometry().index_of(y) {
            Some(idx) => env0.marks()[idx],
            None => match mu.atoms() {
                Some(_) => mu.sample_atom(&mut rng).expect("atomic") as u32,
                None => {
                    palette.push(mu.sample(&mut rng));
                    (palette.len() - 1) as u32
                }
            },
        };
        marks.push(mark);
    }
    let env_t = EnvironmentWindow::from_marks(j_max, 0, origin.clone(), palette, marks)?;
    let bad = j_grid
        .iter()
        .map(|&j| Ok(env_t.is_good(&origin, j, j_max, pk)? == GoodVerdict::Bad))
        .collect::<Result<Vec<_>>>()?;
    Ok(PersistenceReplica {
        attempts,
        bad: Some(bad),
    })
}

/// Frequency of the origin being bad at scale `J` at time `t`, given that it
/// was good at scale `L > J` at time 0 and `gamma t > L^3`.
pub fn goodsite_persistence(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.kind != ExperimentKind::Persistence {
        return Err(Error::InvalidInput("config kind is not `persistence`".into()));
    }
    let p = &config.persistence;
    let mu = config.distribution()?;
    let resolution = config.mu.resolution;
    let master = config.seed;
    let level = config.confidence;
    let gamma_t = p.resolved_gamma_t();
    let t = gamma_t / p.gamma;
    let pk = if mu.is_atomic() {
        type_probabilities(&mu, resolution)?
    } else {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(master, &[0x7E]));
        type_probabilities_sampled(&mu, resolution, p.type_budget, &mut rng)?
    };
    let mut j_grid = p.j_grid.clone();
    j_grid.sort_unstable();
    j_grid.dedup();

    let reps = par_replicas(config.replicas, config.workers, |r| {
        persistence_replica(
            &mu,
            &pk,
            p.gamma,
            t,
            p.l,
            p.l_max,
            &j_grid,
            p.j_max,
            p.rejection_cap,
            derive_seed(master, &[r, 4]),
        )
    })?;

    let accepted: Vec<&Vec<bool>> = reps.iter().filter_map(|r| r.bad.as_ref()).collect();
    let capped = reps.len() - accepted.len();
    let attempts: u64 = reps.iter().map(|r| r.attempts).sum();
    let n = accepted.len() as u64;
    let cell_note = if capped > 0 { "infeasible_cell" } else { "" };

    let mut rows = Vec::new();
    let mut acc = ResultRow::new(format!("L={}", p.l), "acceptance_rate").with_proportion(n, attempts, level);
    acc.gamma = Some(p.gamma);
    acc.l = Some(p.l);
    acc.note = cell_note.into();
    rows.push(acc);
    let mut freqs = Vec::new();
    for (ji, &j) in j_grid.iter().enumerate() {
        let hits = accepted.iter().filter(|b| b[ji]).count() as u64;
        let mut row = ResultRow::new(format!("L={},J={j}", p.l), "bad_frequency").with_proportion(hits, n, level);
        row.gamma = Some(p.gamma);
        row.l = Some(p.l);
        row.j = Some(j);
        if capped > 0 {
            row.note = cell_note.into();
        }
        freqs.push(hits as f64 / n.max(1) as f64);
        rows.push(row);
    }
    let nonincreasing = freqs.windows(2).all(|w| w[1] <= w[0]);
    let summary = json!({
        "gamma": p.gamma,
        "gamma_t": gamma_t,
        "t": t,
        "l": p.l,
        "l_max": p.l_max,
        "j_max": p.j_max,
        "type_probabilities": pk.probs.iter().map(|(k, v)| json!({"type": k.coords, "p": v})).collect::<Vec<_>>(),
        "accepted_replicas": n,
        "capped_replicas": capped,
        "infeasible": capped > 0,
        "rejection_attempts": attempts,
        "bad_frequency_nonincreasing_in_j": nonincreasing,
    });
    Ok(ExperimentResult {
        schema_version: RESULT_SCHEMA_VERSION,
        experiment: ExperimentKind::Persistence,
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
    use crate::simplex::{MuSpec, TransitionVector};

    fn small(mu: &MuDistribution) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Persistence, MuSpec::from_distribution(mu, 2));
        cfg.persistence.l = 4;
        cfg.persistence.l_max = 8;
        cfg.persistence.j_grid = vec![2, 3];
        cfg.persistence.j_max = 4;
        cfg.replicas = 40;
        cfg.seed = 3;
        cfg.workers = Some(2);
        cfg
    }

    #[test]
    fn single_type_is_never_bad() {
        let mu = MuDistribution::point_mass(TransitionVector::new(vec![0.3, 0.7]).unwrap());
        let res = goodsite_persistence(&small(&mu)).unwrap();
        for row in res.rows_for("bad_frequency") {
            assert_eq!(row.exceedances, Some(0));
            assert_eq!(row.count, 40);
        }
        assert_eq!(res.rows_for("acceptance_rate").next().unwrap().mean, 1.0);
    }

    #[test]
    fn cap_reports_infeasible() {
        let mu = MuDistribution::atomic(vec![
            (TransitionVector::new(vec![0.1, 0.9]).unwrap(), 0.5),
            (TransitionVector::new(vec![0.9, 0.1]).unwrap(), 0.5),
        ])
        .unwrap();
        let mut cfg = small(&mu);
        cfg.persistence.rejection_cap = 1;
        cfg.replicas = 2000;
        let res = goodsite_persistence(&cfg).unwrap();
        assert_eq!(res.summary["infeasible"], true);
        assert!(res.rows.iter().all(|r| r.note == "infeasible_cell"));
    }

    #[test]
    fn dirichlet_runs() {
        let mu = MuDistribution::dirichlet(1, vec![1.0, 1.0]).unwrap();
        let mut cfg = small(&mu);
        cfg.replicas = 4;
        cfg.persistence.type_budget = 2000;
        let res = goodsite_persistence(&cfg).unwrap();
        assert_eq!(res.rows_for("bad_frequency").count(), 2);
    }
}
