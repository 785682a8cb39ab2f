//! Discrete-time walker on top of the evolving environment.
//!
//! At step `k` the walker reads the vector at `X_k` in `eta(k)`, draws a
//! direction by inverse CDF over the slot order `(-d, ..., -1, 1, ..., d)`,
//! and the environment then evolves over `(k, k + 1]`.
//!
//! Three engines are provided:
//! * [`run_quenched`] replays the graphical construction on a buffered window;
//! * [`run_annealed_revealed`] samples the annealed law exactly by tracking
//!   only the particles the walker has read (see [`RevealedStirring`]);
//! * [`run_infinite_gamma`] is the i.i.d. baseline.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::environment::EnvironmentWindow;
use crate::error::{Error, Result};
use crate::interchange::{required_buffer, EventStream};
use crate::lattice::{direction_axis, direction_count};
use crate::simplex::{MuDistribution, TransitionVector};
use crate::stats::derive_seed;

/// Default per-particle truncation probability for window sizing.
pub const DEFAULT_DELTA_TRUNC: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WalkSeeds {
    pub step: u64,
    pub env: u64,
}

impl WalkSeeds {
    /// Seeds of replica `replica` under a master seed.
    pub fn for_replica(master: u64, replica: u64) -> Self {
        Self {
            step: derive_seed(master, &[replica, 1]),
            env: derive_seed(master, &[replica, 0]),
        }
    }
}

/// A walk path `X_0 = 0, ..., X_T`, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkSample {
    pub d: usize,
    pub steps: usize,
    /// `None` for the i.i.d. baseline.
    pub gamma: Option<f64>,
    pub seeds: WalkSeeds,
    positions: Vec<i64>,
}

impl WalkSample {
    fn start(d: usize, steps: usize, gamma: Option<f64>, seeds: WalkSeeds) -> Self {
        let mut positions = Vec::with_capacity((steps + 1) * d);
        positions.resize(d, 0);
        Self {
            d,
            steps,
            gamma,
            seeds,
            positions,
        }
    }

    fn push_step(&mut self, slot: usize) {
        let k = self.positions.len() - self.d;
        self.positions.extend_from_within(k..);
        let (axis, sign) = direction_axis(self.d, slot);
        let last = self.positions.len() - self.d;
        self.positions[last + axis] += sign;
    }

    pub fn position(&self, k: usize) -> &[i64] {
        &self.positions[k * self.d..(k + 1) * self.d]
    }

    pub fn final_position(&self) -> &[i64] {
        self.position(self.steps)
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &[i64]> {
        self.positions.chunks_exact(self.d)
    }

    /// `X_T / T`.
    pub fn velocity(&self) -> Vec<f64> {
        let t = self.steps.max(1) as f64;
        self.final_position().iter().map(|c| *c as f64 / t).collect()
    }

    /// CSV with columns `k, x_1, ..., x_d, X_v` (the last only with a frame).
    pub fn write_csv<W: Write>(&self, mut w: W, frame: Option<&ProjectionFrame>) -> Result<()> {
        let mut header = vec!["k".to_string()];
        header.extend((1..=self.d).map(|i| format!("x_{i}")));
        if frame.is_some() {
            header.push("X_v".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, x) in self.positions().enumerate() {
            write!(w, "{k}")?;
            for c in x {
                write!(w, ",{c}")?;
            }
            if let Some(f) = frame {
                write!(w, ",{}", f.project_point(x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Projection direction `v` and the derived quantities `v = <E[D], v>` and
/// `v_j = <v, e_j>` per slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionFrame {
    pub direction: Vec<f64>,
    pub v: f64,
    pub components: Vec<f64>,
}

impl ProjectionFrame {
    /// `direction` is normalized; `drift` is the annealed drift.
    pub fn new(direction: &[f64], drift: &[f64]) -> Result<Self> {
        if direction.len() != drift.len() {
            return Err(Error::DimensionMismatch {
                expected: drift.len(),
                got: direction.len(),
            });
        }
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("projection direction must be a nonzero finite vector".into()));
        }
        let direction: Vec<f64> = direction.iter().map(|c| c / norm).collect();
        let d = direction.len();
        let components = (0..direction_count(d))
            .map(|slot| {
                let (axis, sign) = direction_axis(d, slot);
                sign as f64 * direction[axis]
            })
            .collect();
        let v = direction.iter().zip(drift).map(|(a, b)| a * b).sum();
        Ok(Self {
            direction,
            v,
            components,
        })
    }

    /// Frame along the drift itself.
    pub fn along_drift(drift: &[f64]) -> Result<Self> {
        if drift.iter().all(|c| *c == 0.0) {
            return Err(Error::ZeroDrift);
        }
        Self::new(drift, drift)
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn project_point(&self, x: &[i64]) -> f64 {
        x.iter().zip(&self.direction).map(|(a, b)| *a as f64 * b).sum()
    }
}

/// `X_k^v = <X_k, v>` along the path.
pub fn project(sample: &WalkSample, frame: &ProjectionFrame) -> Vec<f64> {
    sample.positions().map(|x| frame.project_point(x)).collect()
}

/// Inverse-CDF draw of a direction slot from `s` with `u` in `[0, 1)`.
pub fn step_slot(s: &TransitionVector, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (slot, p) in s.probs().iter().enumerate() {
        if *p > 0.0 {
            last_positive = slot;
            acc += p;
            if u < acc {
                return slot;
            }
        }
    }
    // u above the rounded total
    last_positive
}

/// Direction slot taken from site `x` of the given environment.
pub fn step(env_at_k: &EnvironmentWindow, x: &[i64], u: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidInput(format!("uniform {u} outside [0, 1)")));
    }
    let s = env_at_k.vector_at(x).ok_or_else(|| {
        Error::Precondition(format!("walker at {x:?} is outside the simulated window"))
    })?;
    Ok(step_slot(s, u))
}

/// Quenched walk on a fixed initial window, environment replayed from the
/// per-edge clocks seeded by `seeds.env`. Leaving the radius-`R` region
/// around the window origin is a buffer breach.
pub fn run_quenched(env0: &EnvironmentWindow, gamma: f64, steps: usize, seeds: WalkSeeds) -> Result<WalkSample> {
    let d = env0.dim();
    let horizon = steps.saturating_sub(1) as f64;
    let mut stream = EventStream::new(env0.geometry(), gamma, horizon, seeds.env)?;
    let mut env = env0.clone();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seeds.step);
    let mut sample = WalkSample::start(d, steps, Some(gamma), seeds);
    let radius = env0.radius() as i64;
    let origin = env0.origin().to_vec();
    let mut x = origin.clone();
    let mut max_excursion = 0i64;
    for k in 0..steps {
        if k > 0 {
            stream.advance(&mut env, k as f64)?;
        }
        let excursion = x.iter().zip(&origin).map(|(a, b)| (a - b).abs()).max().unwrap_or(0);
        max_excursion = max_excursion.max(excursion);
        if excursion > radius {
            let sizing = required_buffer(d, radius as u32, gamma, steps as f64, DEFAULT_DELTA_TRUNC)?;
            return Err(Error::BufferBreach {
                step: k,
                max_excursion,
                radius,
                suggested_buffer: sizing.buffer + (max_excursion - radius) as u32,
            });
        }
        let slot = step(&env, &x, rng.random())?;
        let (axis, sign) = direction_axis(d, slot);
        x[axis] += sign;
        sample.push_step(slot);
    }
    Ok(sample)
}

/// Window `R = T`, `W` from [`required_buffer`], filled i.i.d. from `mu`,
/// then [`run_quenched`].
pub fn run_annealed(
    mu: &MuDistribution,
    gamma: f64,
    steps: usize,
    seeds: WalkSeeds,
    delta_trunc: f64,
) -> Result<WalkSample> {
    let d = mu.dim();
    let radius = steps as u32;
    let sizing = required_buffer(d, radius, gamma, steps as f64, delta_trunc)?;
    let side = 2.0 * (radius + sizing.buffer) as f64 + 1.0;
    if side.powi(d as i32) > 2e7 {
        return Err(Error::ResourceCap(format!(
            "window of side {side} in d = {d} is too large; use the revealed-particle engine"
        )));
    }
    let mut env_rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seeds.env, &[0xE7A0]));
    let env0 = EnvironmentWindow::sample_iid(mu, radius, sizing.buffer, vec![0; d], &mut env_rng)?;
    run_quenched(&env0, gamma, steps, seeds)
}

/// The `gamma = infinity` baseline: every step reads a fresh `s ~ mu`.
pub fn run_infinite_gamma(mu: &MuDistribution, steps: usize, seed: u64) -> WalkSample {
    let d = mu.dim();
    let seeds = WalkSeeds { step: seed, env: seed };
    let mut env_rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, &[0]));
    let mut step_rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, &[1]));
    let mut sample = WalkSample::start(d, steps, None, seeds);
    match mu.atoms() {
        Some(atoms) => {
            for _ in 0..steps {
                let i = mu.sample_atom(&mut env_rng).expect("atomic");
                sample.push_step(step_slot(&atoms[i].probs, step_rng.random()));
            }
        }
        None => {
            for _ in 0..steps {
                let s = mu.sample(&mut env_rng);
                sample.push_step(step_slot(&s, step_rng.random()));
            }
        }
    }
    sample
}

const EMPTY: u32 = u32::MAX;

#[derive(Debug, Clone)]
enum Occupancy {
    /// `d = 1`: dense cells covering `[offset, offset + cells.len())`.
    Line { offset: i64, cells: Vec<u32> },
    Sparse(HashMap<Box<[i64]>, u32>),
}

impl Occupancy {
    fn new(d: usize) -> Self {
        if d == 1 {
            Occupancy::Line {
                offset: -64,
                cells: vec![EMPTY; 129],
            }
        } else {
            Occupancy::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn get(&self, x: &[i64]) -> u32 {
        match self {
            Occupancy::Line { offset, cells } => {
                let i = x[0] - offset;
                if i < 0 || i as usize >= cells.len() {
                    EMPTY
                } else {
                    cells[i as usize]
                }
            }
            Occupancy::Sparse(map) => map.get(x).copied().unwrap_or(EMPTY),
        }
    }

    #[inline]
    fn set(&mut self, x: &[i64], id: u32) {
        match self {
            Occupancy::Line { offset, cells } => {
                let mut i = x[0] - *offset;
                while i < 0 || i as usize >= cells.len() {
                    // grow symmetrically
                    let grow = cells.len() as i64;
                    let mut next = vec![EMPTY; cells.len() * 3];
                    next[grow as usize..2 * grow as usize].copy_from_slice(cells);
                    *cells = next;
                    *offset -= grow;
                    i = x[0] - *offset;
                }
                cells[i as usize] = id;
            }
            Occupancy::Sparse(map) => {
                if id == EMPTY {
                    map.remove(x);
                } else if let Some(slot) = map.get_mut(x) {
                    *slot = id;
                } else {
                    map.insert(x.into(), id);
                }
            }
        }
    }
}

/// Exact annealed dynamics of the particles revealed so far.
///
/// Particles that have never been read carry marks that are i.i.d. `mu`
/// and independent of everything observed, so the system only follows the
/// revealed ones. Each revealed particle proposes a jump along each of its
/// `2d` edges at rate `gamma`: onto an unrevealed site it simply moves, and
/// onto a revealed particle the pair swaps, with probability one half since
/// the shared edge is proposed from both ends.
#[derive(Debug, Clone)]
pub struct RevealedStirring {
    d: usize,
    gamma: f64,
    positions: Vec<i64>,
    marks: Vec<u32>,
    palette: Vec<TransitionVector>,
    occupancy: Occupancy,
    events: u64,
}

impl RevealedStirring {
    pub fn new(d: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma = {gamma} must be positive and finite")));
        }
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        Ok(Self {
            d,
            gamma,
            positions: Vec::new(),
            marks: Vec::new(),
            palette: Vec::new(),
            occupancy: Occupancy::new(d),
            events: 0,
        })
    }

    /// Uses `palette` for marks added with [`Self::add`].
    pub fn with_palette(d: usize, gamma: f64, palette: Vec<TransitionVector>) -> Result<Self> {
        let mut s = Self::new(d, gamma)?;
        s.palette = palette;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Number of jump proposals processed so far.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn position(&self, id: usize) -> &[i64] {
        &self.positions[id * self.d..(id + 1) * self.d]
    }

    pub fn mark(&self, id: usize) -> u32 {
        self.marks[id]
    }

    pub fn vector(&self, id: usize) -> &TransitionVector {
        &self.palette[self.marks[id] as usize]
    }

    pub fn palette(&self) -> &[TransitionVector] {
        &self.palette
    }

    pub fn particle_at(&self, x: &[i64]) -> Option<usize> {
        match self.occupancy.get(x) {
            EMPTY => None,
            id => Some(id as usize),
        }
    }

    /// Tracks a particle with palette mark `mark` at the unoccupied site `x`.
    pub fn add(&mut self, x: &[i64], mark: u32) -> Result<usize> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if self.particle_at(x).is_some() {
            return Err(Error::InvalidInput(format!("site {x:?} already holds a revealed particle")));
        }
        if mark as usize >= self.palette.len() {
            return Err(Error::InvalidInput("mark outside the palette".into()));
        }
        let id = self.marks.len();
        if id as u64 >= EMPTY as u64 {
            return Err(Error::ResourceCap("too many revealed particles".into()));
        }
        self.positions.extend_from_slice(x);
        self.marks.push(mark);
        self.occupancy.set(x, id as u32);
        Ok(id)
    }

    /// The particle at `x`, revealing a fresh `mu` mark if none is tracked.
    pub fn read<R: Rng + ?Sized>(&mut self, x: &[i64], mu: &MuDistribution, rng: &mut R) -> Result<usize> {
        if let Some(id) = self.particle_at(x) {
            return Ok(id);
        }
        let mark = match mu.atoms() {
            Some(atoms) => {
                if self.palette.is_empty() {
                    self.palette = atoms.iter().map(|a| a.probs.clone()).collect();
                }
                mu.sample_atom(rng).expect("atomic") as u32
            }
            None => {
                self.palette.push(mu.sample(rng));
                (self.palette.len() - 1) as u32
            }
        };
        self.add(x, mark)
    }

    /// Runs the dynamics for time `dt`.
    pub fn evolve<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let n = self.len();
        if n == 0 || dt <= 0.0 {
            return;
        }
        let dirs = direction_count(self.d) as u64;
        let lambda = dirs as f64 * self.gamma * n as f64 * dt;
        let count = Poisson::new(lambda).expect("positive rate").sample(rng) as u64;
        self.events += count;
        if let Occupancy::Line { .. } = self.occupancy {
            self.evolve_line(count, rng);
            return;
        }
        let d = self.d;
        let mut target = vec![0i64; d];
        for _ in 0..count {
            let id = rng.random_range(0..n);
            let bits = rng.next_u64();
            let slot = (bits % dirs) as usize;
            let (axis, sign) = direction_axis(d, slot);
            target.copy_from_slice(self.position(id));
            target[axis] += sign;
            match self.occupancy.get(&target) {
                EMPTY => {
                    let from = self.position(id).to_vec();
                    self.occupancy.set(&from, EMPTY);
                    self.occupancy.set(&target, id as u32);
                    self.positions[id * d..(id + 1) * d].copy_from_slice(&target);
                }
                other => {
                    if (bits >> 32) & 1 == 0 {
                        let other = other as usize;
                        let from = self.position(id).to_vec();
                        self.occupancy.set(&from, other as u32);
                        self.occupancy.set(&target, id as u32);
                        self.positions[id * d..(id + 1) * d].copy_from_slice(&target);
                        self.positions[other * d..(other + 1) * d].copy_from_slice(&from);
                    }
                }
            }
        }
    }

    fn evolve_line<R: Rng + ?Sized>(&mut self, count: u64, rng: &mut R) {
        let n = self.len();
        for _ in 0..count {
            let id = rng.random_range(0..n);
            let bits = rng.next_u64();
            let from = self.positions[id];
            let to = if bits & 1 == 0 { from - 1 } else { from + 1 };
            match self.occupancy.get(&[to]) {
                EMPTY => {
                    self.occupancy.set(&[from], EMPTY);
                    self.occupancy.set(&[to], id as u32);
                    self.positions[id] = to;
                }
                other => {
                    if (bits >> 32) & 1 == 0 {
                        self.occupancy.set(&[from], other);
                        self.occupancy.set(&[to], id as u32);
                        self.positions[id] = to;
                        self.positions[other as usize] = from;
                    }
                }
            }
        }
    }
}

/// Exact sample of the annealed walk (environment initially i.i.d. `mu` on
/// all of `Z^d`) via [`RevealedStirring`]. No window, no truncation.
pub fn run_annealed_revealed(mu: &MuDistribution, gamma: f64, steps: usize, seeds: WalkSeeds) -> Result<WalkSample> {
    let d = mu.dim();
    let mut system = RevealedStirring::new(d, gamma)?;
    let mut env_rng = Xoshiro256PlusPlus::seed_from_u64(seeds.env);
    let mut step_rng = Xoshiro256PlusPlus::seed_from_u64(seeds.step);
    let mut sample = WalkSample::start(d, steps, Some(gamma), seeds);
    let mut x = vec![0i64; d];
    for k in 0..steps {
        if k > 0 {
            system.evolve(1.0, &mut env_rng);
        }
        let id = system.read(&x, mu, &mut env_rng)?;
        let slot = step_slot(system.vector(id), step_rng.random());
        let (axis, sign) = direction_axis(d, slot);
        x[axis] += sign;
        sample.push_step(slot);
    }
    Ok(sample)
}
