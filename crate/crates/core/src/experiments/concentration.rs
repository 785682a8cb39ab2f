use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde_json::json;

use crate::environment::EnvironmentWindow;
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::output::{ExperimentResult, ResultRow, RESULT_SCHEMA_VERSION};
use crate::experiments::par_replicas;
use crate::heat_kernel::{exact_mean, KernelTable};
use crate::interchange::{required_buffer, EventStream};
use crate::stats::{derive_seed, RunningStats};
use crate::types::{type_of, TypeIndex};

/// Least-squares slope through the origin of `log 2 - log p` against
/// `a^2 L^d`, over cells with at least one exceedance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub c_hat: f64,
    pub rms_residual: f64,
    pub cells_used: usize,
}

pub fn fit_tail(points: &[(f64, f64)]) -> Option<TailFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, p)| *p > 0.0 && *x > 0.0)
        .map(|(x, p)| (*x, 2f64.ln() - p.ln()))
        .collect();
    if used.is_empty() {
        return None;
    }
    let sxx: f64 = used.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = used.iter().map(|(x, y)| x * y).sum();
    let c_hat = sxy / sxx;
    let rss: f64 = used.iter().map(|(x, y)| (y - c_hat * x).powi(2)).sum();
    Some(TailFit {
        c_hat,
        rms_residual: (rss / used.len() as f64).sqrt(),
        cells_used: used.len(),
    })
}

/// Tail of `<eta(t)>^k_L` around its exact quenched mean, for a fixed
/// initial environment. Every `(L, a)` cell counts on the same replicas.
pub fn concentration_tail(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.kind != ExperimentKind::Concentration {
        return Err(Error::InvalidInput("config kind is not `concentration`".into()));
    }
    let p = &config.concentration;
    let mu = config.distribution()?;
    let d = mu.dim();
    let resolution = config.mu.resolution;
    let master = config.seed;
    let level = config.confidence;

    let mut env_rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(master, &[0xE7A0_0000]));
    let k: TypeIndex = match config.type_index()? {
        Some(k) => k,
        None => match mu.atoms() {
            Some(atoms) => type_of(&atoms[0].probs, resolution)?,
            None => type_of(&mu.sample(&mut env_rng), resolution)?,
        },
    };
    let mut radii = p.radii.clone();
    radii.sort_unstable();
    radii.dedup();
    let r_max = *radii.last().expect("validated nonempty");
    let sizing = required_buffer(d, r_max, p.gamma, p.t, p.delta_trunc)?;
    let table = KernelTable::new(d, p.gamma, p.t)?;
    let buffer = sizing.buffer.max(table.r_trunc() as u32);
    let side = 2.0 * (r_max + buffer) as f64 + 1.0;
    if side.powi(d as i32) > 5e7 {
        return Err(Error::ResourceCap(format!("window of side {side} in d = {d}")));
    }
    let origin = vec![0i64; d];
    let env0 = EnvironmentWindow::sample_iid(&mu, r_max, buffer, origin.clone(), &mut env_rng)?;
    let means = radii
        .iter()
        .map(|&l| exact_mean(&env0, p.gamma, p.t, l, &k, p.mass_budget))
        .collect::<Result<Vec<_>>>()?;

    let densities: Vec<Vec<f64>> = par_replicas(config.replicas, config.workers, |r| {
        let mut env = env0.clone();
        let mut stream = EventStream::new(env.geometry(), p.gamma, p.t, derive_seed(master, &[r, 3]))?;
        stream.advance(&mut env, p.t)?;
        radii.iter().map(|&l| env.empirical_density(&origin, l, &k)).collect()
    })?;

    let n = config.replicas as u64;
    let mut rows = Vec::new();
    let mut fit_points = Vec::new();
    let mut nonincreasing = true;
    let mut a_grid = p.a_grid.clone();
    a_grid.sort_by(|x, y| x.total_cmp(y));
    let mut by_a: Vec<Vec<f64>> = vec![Vec::new(); a_grid.len()];
    for (li, &l) in radii.iter().enumerate() {
        let mean = means[li].value;
        let mut stats = RunningStats::default();
        for rep in &densities {
            stats.push(rep[li]);
        }
        let mut row = ResultRow::new(format!("L={l}"), "density").with_moments(&stats, level);
        row.gamma = Some(p.gamma);
        row.l = Some(l);
        rows.push(row);
        let mut row = ResultRow::new(format!("L={l}"), "exact_mean");
        row.gamma = Some(p.gamma);
        row.l = Some(l);
        row.mean = mean;
        row.note = format!("neglected_mass={:e}", means[li].neglected_mass);
        rows.push(row);
        for (ai, &a) in a_grid.iter().enumerate() {
            let hits = densities.iter().filter(|rep| (rep[li] - mean).abs() >= a).count() as u64;
            let mut row = ResultRow::new(format!("L={l},a={a}"), "exceedance").with_proportion(hits, n, level);
            row.gamma = Some(p.gamma);
            row.l = Some(l);
            row.a = Some(a);
            let p_hat = hits as f64 / n as f64;
            fit_points.push((a * a * (l as f64).powi(d as i32), p_hat));
            by_a[ai].push(p_hat);
            rows.push(row);
        }
    }
    for seq in &by_a {
        nonincreasing &= seq.windows(2).all(|w| w[1] <= w[0]);
    }
    let fit = fit_tail(&fit_points);
    let summary = json!({
        "type_index": k.coords,
        "resolution": resolution,
        "gamma": p.gamma,
        "t": p.t,
        "window_radius": r_max,
        "window_buffer": buffer,
        "buffer_failure_bound": sizing.failure_bound,
        "initial_environment_hash": format!("{:016x}", env0.content_hash()),
        "c_hat": fit.map(|f| f.c_hat),
        "fit_rms_residual": fit.map(|f| f.rms_residual),
        "fit_cells_used": fit.map(|f| f.cells_used).unwrap_or(0),
        "tail_nonincreasing_in_volume": nonincreasing,
    });
    Ok(ExperimentResult {
        schema_version: RESULT_SCHEMA_VERSION,
        experiment: ExperimentKind::Concentration,
        config: config.clone(),
        master_seed: master,
        replicas: config.replicas,
        rows,
        summary,
        wall_clock: Default::default(),
    })
}
