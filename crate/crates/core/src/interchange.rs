//! Graphical construction of the interchange process on a window.
//!
//! Every edge with both endpoints in the window carries a rate-`gamma`
//! Poisson clock; when it rings the two sites exchange their contents.
//! Clocks on edges that cross the window boundary are absent, so the window
//! is reflecting; fidelity to the infinite lattice comes from the buffer.
//!
//! Each edge draws its clock from its own ChaCha stream, keyed by the master
//! seed and the absolute coordinates of the edge. A schedule is therefore a
//! function of `(seed, geometry, gamma, t_max)` only, and two overlapping
//! windows agree on their shared edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::environment::EnvironmentWindow;
use crate::error::{Error, Result};
use crate::lattice::{ball_size, BoxGeometry};
use crate::stats::{derive_seed, mix64};

/// Default cap on materialized schedules.
pub const DEFAULT_EVENT_CAP: u64 = 50_000_000;

/// Unordered nearest-neighbour pair of window sites, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapEvent {
    pub time: f64,
    pub edge: Edge,
}

/// Edges of a box in lexicographic order, with their absolute clock keys.
#[derive(Debug, Clone)]
pub struct EdgeSet {
    edges: Vec<Edge>,
    keys: Vec<u64>,
}

impl EdgeSet {
    pub fn of_box(geometry: &BoxGeometry) -> Self {
        let d = geometry.dim();
        let mut edges = Vec::new();
        let mut keys = Vec::new();
        for a in 0..geometry.len() {
            // positive directions, sorted by increasing b = a + stride
            for axis in (0..d).rev() {
                if let Some(b) = geometry.neighbor(a, d + axis) {
                    edges.push(Edge { a, b });
                    let p = geometry.point_of(a);
                    let mut key = mix64(axis as u64);
                    for c in p {
                        key = mix64(key ^ (c as u64));
                    }
                    keys.push(key);
                }
            }
        }
        Self { edges, keys }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
}

fn edge_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5EED_ED6E]));
    rng.set_stream(key);
    rng
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    edge: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.edge.cmp(&self.edge))
    }
}

/// Lazily generated, time-ordered swap events. Memory is one generator per
/// edge, independent of how many events are drawn.
pub struct EventStream {
    edges: EdgeSet,
    rngs: Vec<ChaCha8Rng>,
    heap: BinaryHeap<Pending>,
    gamma: f64,
    horizon: f64,
}

impl EventStream {
    pub fn new(geometry: &BoxGeometry, gamma: f64, horizon: f64, seed: u64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("swap rate gamma = {gamma} must be positive")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon {horizon} must be >= 0")));
        }
        let edges = EdgeSet::of_box(geometry);
        let mut rngs = Vec::with_capacity(edges.len());
        let mut heap = BinaryHeap::with_capacity(edges.len());
        for (i, key) in edges.keys.iter().enumerate() {
            let mut rng = edge_rng(seed, *key);
            let e: f64 = Exp1.sample(&mut rng);
            let t = e / gamma;
            if t <= horizon {
                heap.push(Pending { time: t, edge: i });
            }
            rngs.push(rng);
        }
        Ok(Self {
            edges,
            rngs,
            heap,
            gamma,
            horizon,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Time of the next event, if any remains before the horizon.
    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|p| p.time)
    }

    /// Applies every pending event with time `<= t` to `env`; returns how
    /// many were applied.
    pub fn advance(&mut self, env: &mut EnvironmentWindow, t: f64) -> Result<usize> {
        if t > self.horizon {
            return Err(Error::HorizonExceeded {
                t,
                horizon: self.horizon,
            });
        }
        let mut applied = 0;
        while self.peek_time().is_some_and(|s| s <= t) {
            let ev = self.next().expect("peeked");
            env.swap_sites(ev.edge.a, ev.edge.b);
            applied += 1;
        }
        Ok(applied)
    }
}

impl Iterator for EventStream {
    type Item = SwapEvent;

    fn next(&mut self) -> Option<SwapEvent> {
        let p = self.heap.pop()?;
        let rng = &mut self.rngs[p.edge];
        let e: f64 = Exp1.sample(rng);
        let next = p.time + e / self.gamma;
        if next <= self.horizon {
            self.heap.push(Pending {
                time: next,
                edge: p.edge,
            });
        }
        Some(SwapEvent {
            time: p.time,
            edge: self.edges.edges[p.edge],
        })
    }
}

/// A fully materialized, time-sorted schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSchedule {
    pub horizon: f64,
    pub gamma: f64,
    pub seed: u64,
    pub events: Vec<SwapEvent>,
}

/// Samples all swap events on the window's edges up to `t_max`. Fails with
/// [`Error::StreamingRequired`] when the expected event count exceeds `cap`.
pub fn sample_schedule(
    geometry: &BoxGeometry,
    gamma: f64,
    t_max: f64,
    seed: u64,
    cap: u64,
) -> Result<EventSchedule> {
    let stream = EventStream::new(geometry, gamma, t_max, seed)?;
    let expected = gamma * stream.edge_count() as f64 * t_max;
    if expected > cap as f64 {
        return Err(Error::StreamingRequired { expected, cap });
    }
    Ok(EventSchedule {
        horizon: t_max,
        gamma,
        seed,
        events: stream.collect(),
    })
}

/// `eta(t)`: applies every event with time `<= t`.
pub fn evolve(env: &EnvironmentWindow, schedule: &EventSchedule, t: f64) -> Result<EnvironmentWindow> {
    if t > schedule.horizon {
        return Err(Error::HorizonExceeded {
            t,
            horizon: schedule.horizon,
        });
    }
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("time {t} must be >= 0")));
    }
    let mut out = env.clone();
    for ev in schedule.events.iter().take_while(|e| e.time <= t) {
        out.swap_sites(ev.edge.a, ev.edge.b);
    }
    Ok(out)
}

/// Configurations at each of the sorted `times`, by incremental replay.
pub fn snapshot_series(
    env: &EnvironmentWindow,
    schedule: &EventSchedule,
    times: &[f64],
) -> Result<Vec<EnvironmentWindow>> {
    if times.first().is_some_and(|t| *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::UnsortedTimes);
    }
    if let Some(last) = times.last() {
        if *last > schedule.horizon {
            return Err(Error::HorizonExceeded {
                t: *last,
                horizon: schedule.horizon,
            });
        }
    }
    let mut current = env.clone();
    let mut cursor = 0usize;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while cursor < schedule.events.len() && schedule.events[cursor].time <= t {
            let e = schedule.events[cursor].edge;
            current.swap_sites(e.a, e.b);
            cursor += 1;
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Space-time path of a tagged particle: `(time, site index)` after each move.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggedPath {
    pub start: usize,
    pub moves: Vec<(f64, usize)>,
}

impl TaggedPath {
    pub fn position(&self) -> usize {
        self.moves.last().map(|m| m.1).unwrap_or(self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryLog {
    pub paths: Vec<TaggedPath>,
}

/// [`evolve`], also recording the paths of the particles that start on `tagged`.
pub fn evolve_logged(
    env: &EnvironmentWindow,
    schedule: &EventSchedule,
    t: f64,
    tagged: &[usize],
) -> Result<(EnvironmentWindow, TrajectoryLog)> {
    let out = evolve(env, schedule, t)?;
    let mut paths: Vec<TaggedPath> = tagged
        .iter()
        .map(|&s| TaggedPath {
            start: s,
            moves: Vec::new(),
        })
        .collect();
    for ev in schedule.events.iter().take_while(|e| e.time <= t) {
        for p in paths.iter_mut() {
            let at = p.position();
            if at == ev.edge.a {
                p.moves.push((ev.time, ev.edge.b));
            } else if at == ev.edge.b {
                p.moves.push((ev.time, ev.edge.a));
            }
        }
    }
    Ok((out, TrajectoryLog { paths }))
}

/// Outcome of [`required_buffer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BufferSizing {
    pub buffer: u32,
    /// `P(Poisson(2 d gamma t_max) > W)`, certified upper bound.
    pub per_particle_tail: f64,
    /// Union bound `|B_{R+W}| * tail` on the event that the restriction to
    /// the radius-`R` region differs from the infinite-volume process.
    pub failure_bound: f64,
}

/// Smallest buffer `W` such that a tagged particle makes more than `W`
/// jumps in `[0, t_max]` with probability at most `delta`.
pub fn required_buffer(d: usize, radius: u32, gamma: f64, t_max: f64, delta: f64) -> Result<BufferSizing> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} must be in (0, 1)")));
    }
    if !(gamma > 0.0) || !(t_max >= 0.0) {
        return Err(Error::InvalidInput("need gamma > 0 and t_max >= 0".into()));
    }
    let lambda = 2.0 * d as f64 * gamma * t_max;
    let (buffer, tail) = poisson_upper_quantile(lambda, delta);
    let w = u32::try_from(buffer).map_err(|_| Error::ResourceCap(format!("buffer {buffer}")))?;
    // the cube of half-width R+W contains the ball; count cube sites
    let side = 2.0 * (radius as f64 + w as f64) + 1.0;
    let sites = side.powi(d as i32).max(ball_size(d, 0) as f64);
    Ok(BufferSizing {
        buffer: w,
        per_particle_tail: tail,
        failure_bound: (sites * tail).min(1.0),
    })
}

/// Smallest `w >= 0` with `P(Poisson(lambda) > w) <= delta`, and that tail.
/// Tail sums run downward from a cutoff past which the remaining mass is
/// bounded by a geometric series.
pub fn poisson_upper_quantile(lambda: f64, delta: f64) -> (u64, f64) {
    if lambda == 0.0 {
        return (0, 0.0);
    }
    let ln_lambda = lambda.ln();
    let mut log_pmf = Vec::new();
    let mut lp = -lambda;
    let mut j = 0u64;
    loop {
        log_pmf.push(lp);
        j += 1;
        lp += ln_lambda - (j as f64).ln();
        if (j as f64) > lambda + 1.0 && lp < delta.ln() - 40.0 {
            break;
        }
    }
    let last = log_pmf.len() - 1;
    let ratio = lambda / (last as f64 + 2.0);
    let last_pmf = (lp).exp();
    // mass strictly above `last`: pmf(last+1) / (1 - ratio) bounds the series
    let mut tail = last_pmf / (1.0 - ratio);
    // tail currently = P(N > last); walk downward
    let mut w = last as u64;
    loop {
        if w == 0 {
            return (0, tail);
        }
        let with_w = tail + log_pmf[w as usize].exp();
        // with_w = P(N > w - 1)
        if with_w > delta {
            return (w, tail);
        }
        tail = with_w;
        w -= 1;
    }
}

/// Rejects a window whose certified failure probability exceeds `delta_max`.
pub fn check_buffer(env: &EnvironmentWindow, gamma: f64, t_max: f64, delta_max: f64) -> Result<()> {
    let need = required_buffer(env.dim(), env.radius(), gamma, t_max, delta_max)?;
    if env.buffer() < need.buffer {
        return Err(Error::Precondition(format!(
            "window buffer {} is below the required {} for gamma = {gamma}, t = {t_max}",
            env.buffer(),
            need.buffer
        )));
    }
    Ok(())
}

/// Draws one uniform in `[0, 1)` from a fresh ChaCha stream. Used by tests
/// and replay tooling that needs the edge clock of a single edge.
pub fn edge_clock_times(seed: u64, key: u64, gamma: f64, horizon: f64) -> Vec<f64> {
    let mut rng = edge_rng(seed, key);
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += rng.sample::<f64, _>(Exp1) / gamma;
        if t > horizon {
            return out;
        }
        out.push(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{MuDistribution, TransitionVector};
    use proptest::prelude::*;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn two_type_mu() -> MuDistribution {
        MuDistribution::atomic(vec![
            (TransitionVector::new(vec![0.1, 0.9]).unwrap(), 0.5),
            (TransitionVector::new(vec![0.9, 0.1]).unwrap(), 0.5),
        ])
        .unwrap()
    }

    fn window(seed: u64, d: usize, half: u32) -> EnvironmentWindow {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mu = if d == 1 {
            two_type_mu()
        } else {
            MuDistribution::atomic(vec![
                (TransitionVector::uniform(d), 0.5),
                (TransitionVector::deterministic(d, 1).unwrap(), 0.5),
            ])
            .unwrap()
        };
        EnvironmentWindow::sample_iid(&mu, half, 0, vec![0; d], &mut rng).unwrap()
    }

    #[test]
    fn edges_are_lexicographic_and_adjacent() {
        let g = BoxGeometry::centered(2, 2).unwrap();
        let es = EdgeSet::of_box(&g);
        // 5x5 grid: 2 * 5 * 4 edges
        assert_eq!(es.len(), 40);
        assert!(es.edges().windows(2).all(|w| w[0] < w[1]));
        for e in es.edges() {
            let pa = g.point_of(e.a);
            let pb = g.point_of(e.b);
            let dist: i64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum();
            assert_eq!(dist, 1);
        }
    }

    #[test]
    fn empty_schedule_at_zero_horizon() {
        let g = BoxGeometry::centered(1, 3).unwrap();
        let s = sample_schedule(&g, 2.0, 0.0, 1, DEFAULT_EVENT_CAP).unwrap();
        assert!(s.events.is_empty());
    }

    #[test]
    fn schedule_is_sorted_and_reproducible() {
        let g = BoxGeometry::centered(2, 3).unwrap();
        let a = sample_schedule(&g, 1.5, 4.0, 99, DEFAULT_EVENT_CAP).unwrap();
        let b = sample_schedule(&g, 1.5, 4.0, 99, DEFAULT_EVENT_CAP).unwrap();
        assert_eq!(a, b);
        assert!(a.events.windows(2).all(|w| w[0].time < w[1].time));
        assert!(a.events.iter().all(|e| e.time > 0.0 && e.time <= 4.0));
        let c = sample_schedule(&g, 1.5, 4.0, 100, DEFAULT_EVENT_CAP).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shared_edges_agree_across_windows() {
        let small = BoxGeometry::centered(1, 2).unwrap();
        let large = BoxGeometry::centered(1, 5).unwrap();
        let s = sample_schedule(&small, 1.0, 10.0, 5, DEFAULT_EVENT_CAP).unwrap();
        let l = sample_schedule(&large, 1.0, 10.0, 5, DEFAULT_EVENT_CAP).unwrap();
        let abs = |g: &BoxGeometry, e: &Edge| (g.point_of(e.a)[0], g.point_of(e.b)[0]);
        let from_small: Vec<_> = s.events.iter().map(|e| (e.time, abs(&small, &e.edge))).collect();
        let from_large: Vec<_> = l
            .events
            .iter()
            .map(|e| (e.time, abs(&large, &e.edge)))
            .filter(|(_, (a, b))| *a >= -2 && *b <= 2)
            .collect();
        assert_eq!(from_small, from_large);
    }

    #[test]
    fn cap_forces_streaming() {
        let g = BoxGeometry::centered(1, 50).unwrap();
        assert!(matches!(
            sample_schedule(&g, 10.0, 100.0, 1, 1000),
            Err(Error::StreamingRequired { .. })
        ));
        // the stream itself still works
        let n = EventStream::new(&g, 10.0, 1.0, 1).unwrap().count();
        assert!(n > 500);
    }

    #[test]
    fn single_edge_event_count_is_poisson() {
        let g = BoxGeometry::new(1, 0, vec![0]).unwrap();
        // two-site window: cube of half-width 0 has no edges, so build one by hand
        assert!(EdgeSet::of_box(&g).is_empty());
        let two = BoxGeometry::new(1, 1, vec![0]).unwrap();
        assert_eq!(EdgeSet::of_box(&two).len(), 2);

        let (gamma, t_max) = (1.3, 2.0);
        let replays = 100_000u64;
        let mut sum = 0.0;
        for seed in 0..replays {
            sum += edge_clock_times(seed, 42, gamma, t_max).len() as f64;
        }
        let mean = sum / replays as f64;
        let lambda = gamma * t_max;
        let sigma = (lambda / replays as f64).sqrt();
        assert!((mean - lambda).abs() < 4.0 * sigma, "mean {mean} vs {lambda}");
    }

    #[test]
    fn evolve_examples() {
        let env = window(1, 1, 10);
        let s = sample_schedule(env.geometry(), 2.0, 3.0, 8, DEFAULT_EVENT_CAP).unwrap();
        assert_eq!(evolve(&env, &s, 0.0).unwrap(), env);
        let later = evolve(&env, &s, 2.5).unwrap();
        assert_eq!(later.content_hash(), env.content_hash());
        assert!(matches!(evolve(&env, &s, 3.5), Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn snapshots_match_direct_evolution() {
        let env = window(3, 2, 4);
        let s = sample_schedule(env.geometry(), 1.0, 5.0, 17, DEFAULT_EVENT_CAP).unwrap();
        assert_eq!(snapshot_series(&env, &s, &[0.0]).unwrap(), vec![env.clone()]);
        let times: Vec<f64> = (0..=5).map(|k| k as f64).collect();
        let snaps = snapshot_series(&env, &s, &times).unwrap();
        for (t, snap) in times.iter().zip(&snaps) {
            assert_eq!(*snap, evolve(&env, &s, *t).unwrap());
        }
        assert!(matches!(
            snapshot_series(&env, &s, &[1.0, 0.5]),
            Err(Error::UnsortedTimes)
        ));
    }

    #[test]
    fn stream_advance_matches_schedule() {
        let env = window(4, 1, 12);
        let s = sample_schedule(env.geometry(), 3.0, 4.0, 2, DEFAULT_EVENT_CAP).unwrap();
        let mut stream = EventStream::new(env.geometry(), 3.0, 4.0, 2).unwrap();
        let mut live = env.clone();
        for k in 1..=4 {
            stream.advance(&mut live, k as f64).unwrap();
            assert_eq!(live, evolve(&env, &s, k as f64).unwrap());
        }
    }

    #[test]
    fn swap_is_an_involution() {
        let mut env = window(5, 1, 6);
        let before = env.clone();
        let s = sample_schedule(env.geometry(), 1.0, 3.0, 3, DEFAULT_EVENT_CAP).unwrap();
        for ev in &s.events {
            env.swap_sites(ev.edge.a, ev.edge.b);
            env.swap_sites(ev.edge.a, ev.edge.b);
            assert_eq!(env, before);
        }
    }

    #[test]
    fn two_site_swap_parity() {
        // sites -1, 0, 1 but only the edge {0, 1} matters for the marks at 0, 1:
        // use the edge clock of that edge directly
        let (gamma, t) = (0.7, 1.0);
        let replays = 100_000u64;
        let swapped = (0..replays)
            .filter(|seed| edge_clock_times(*seed, 7, gamma, t).len() % 2 == 1)
            .count();
        let p = (1.0 - (-2.0 * gamma * t).exp()) / 2.0;
        let sigma = (p * (1.0 - p) / replays as f64).sqrt();
        let emp = swapped as f64 / replays as f64;
        assert!((emp - p).abs() < 4.0 * sigma, "{emp} vs {p}");
    }

    #[test]
    fn tagged_paths_are_nearest_neighbour() {
        let env = window(6, 2, 3);
        let s = sample_schedule(env.geometry(), 2.0, 2.0, 4, DEFAULT_EVENT_CAP).unwrap();
        let centre = env.geometry().index_of(&[0, 0]).unwrap();
        let (out, log) = evolve_logged(&env, &s, 2.0, &[centre, 0]).unwrap();
        for p in &log.paths {
            let mut at = p.start;
            let mut last_t = 0.0;
            for (t, to) in &p.moves {
                assert!(*t >= last_t);
                let a = env.geometry().point_of(at);
                let b = env.geometry().point_of(*to);
                let dist: i64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
                assert_eq!(dist, 1);
                at = *to;
                last_t = *t;
            }
            // the particle that started at `start` now sits at `at`
            assert_eq!(out.marks()[at], env.marks()[p.start]);
        }
    }

    #[test]
    fn buffer_examples() {
        assert_eq!(required_buffer(1, 5, 1.0, 0.0, 1e-6).unwrap().buffer, 0);
        // Poisson(2) upper quantile by direct summation
        let lambda: f64 = 2.0;
        let mut cdf = 0.0;
        let mut pmf = (-lambda).exp();
        let mut w = 0u32;
        loop {
            cdf += pmf;
            if 1.0 - cdf <= 1e-6 {
                break;
            }
            w += 1;
            pmf *= lambda / w as f64;
        }
        let got = required_buffer(1, 0, 1.0, 1.0, 1e-6).unwrap();
        assert_eq!(got.buffer, w);
        assert!(got.per_particle_tail <= 1e-6);
    }

    proptest! {
        #[test]
        fn buffer_monotone_in_time(t in 0.0f64..50.0, gamma in 0.1f64..5.0, d in 1usize..3) {
            let a = required_buffer(d, 3, gamma, t, 1e-9).unwrap().buffer;
            let b = required_buffer(d, 3, gamma, 2.0 * t, 1e-9).unwrap().buffer;
            prop_assert!(b >= a);
        }

        #[test]
        fn evolution_preserves_contents(seed in 0u64..200, t in 0.0f64..3.0) {
            let env = window(seed, 2, 3);
            let s = sample_schedule(env.geometry(), 1.0, 3.0, seed, DEFAULT_EVENT_CAP).unwrap();
            let out = evolve(&env, &s, t).unwrap();
            prop_assert_eq!(out.content_hash(), env.content_hash());
            let mut a = env.marks().to_vec();
            let mut b = out.marks().to_vec();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn flow_property(seed in 0u64..200, s1 in 0.0f64..2.0, extra in 0.0f64..2.0) {
            let env = window(seed, 1, 8);
            let sched = sample_schedule(env.geometry(), 2.0, 4.0, seed, DEFAULT_EVENT_CAP).unwrap();
            let mid = evolve(&env, &sched, s1).unwrap();
            let mut cont = mid.clone();
            for ev in sched.events.iter().filter(|e| e.time > s1 && e.time <= s1 + extra) {
                cont.swap_sites(ev.edge.a, ev.edge.b);
            }
            prop_assert_eq!(cont, evolve(&env, &sched, s1 + extra).unwrap());
        }
    }
}
