//! Finite windows of the environment: one transition vector per site of a
//! buffered cube, plus empirical densities and good-site classification.

use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{squared_norm, BallOffsets, BoxGeometry};
use crate::simplex::{MuDistribution, TransitionVector};
use crate::types::{epsilon, type_of_unchecked, TypeIndex, TypeProbabilities};

/// A cube of L-infinity radius `radius + buffer` around `origin`. Sites hold
/// indices into a shared palette of transition vectors; swaps move indices.
#[derive(Debug, Clone)]
pub struct EnvironmentWindow {
    radius: u32,
    buffer: u32,
    geometry: BoxGeometry,
    palette: Arc<Vec<TransitionVector>>,
    marks: Vec<u32>,
}

impl PartialEq for EnvironmentWindow {
    fn eq(&self, other: &Self) -> bool {
        self.radius == other.radius
            && self.buffer == other.buffer
            && self.geometry == other.geometry
            && self.marks.len() == other.marks.len()
            && self
                .marks
                .iter()
                .zip(&other.marks)
                .all(|(a, b)| self.palette[*a as usize] == other.palette[*b as usize])
    }
}

impl EnvironmentWindow {
    pub fn from_marks(
        radius: u32,
        buffer: u32,
        origin: Vec<i64>,
        palette: Vec<TransitionVector>,
        marks: Vec<u32>,
    ) -> Result<Self> {
        let d = origin.len();
        let geometry = BoxGeometry::new(d, radius + buffer, origin)?;
        if marks.len() != geometry.len() {
            return Err(Error::InvalidInput(format!(
                "window needs {} sites, got {}",
                geometry.len(),
                marks.len()
            )));
        }
        if let Some(v) = palette.iter().find(|v| v.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.dim(),
            });
        }
        if marks.iter().any(|m| *m as usize >= palette.len()) {
            return Err(Error::InvalidInput("mark outside the palette".into()));
        }
        Ok(Self {
            radius,
            buffer,
            geometry,
            palette: Arc::new(palette),
            marks,
        })
    }

    /// Every site carries the same vector.
    pub fn constant(radius: u32, buffer: u32, origin: Vec<i64>, s: TransitionVector) -> Result<Self> {
        let len = BoxGeometry::new(origin.len(), radius + buffer, origin.clone())?.len();
        Self::from_marks(radius, buffer, origin, vec![s], vec![0; len])
    }

    /// Sites filled independently from `mu`.
    pub fn sample_iid<R: Rng + ?Sized>(
        mu: &MuDistribution,
        radius: u32,
        buffer: u32,
        origin: Vec<i64>,
        rng: &mut R,
    ) -> Result<Self> {
        if origin.len() != mu.dim() {
            return Err(Error::DimensionMismatch {
                expected: mu.dim(),
                got: origin.len(),
            });
        }
        let geometry = BoxGeometry::new(mu.dim(), radius + buffer, origin)?;
        let n = geometry.len();
        let (palette, marks) = match mu.atoms() {
            Some(atoms) => {
                let palette = atoms.iter().map(|a| a.probs.clone()).collect();
                let marks = (0..n)
                    .map(|_| mu.sample_atom(rng).expect("atomic") as u32)
                    .collect();
                (palette, marks)
            }
            None => {
                let palette: Vec<_> = (0..n).map(|_| mu.sample(rng)).collect();
                (palette, (0..n as u32).collect())
            }
        };
        Ok(Self {
            radius,
            buffer,
            geometry,
            palette: Arc::new(palette),
            marks,
        })
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn buffer(&self) -> u32 {
        self.buffer
    }

    pub fn origin(&self) -> &[i64] {
        self.geometry.origin()
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn palette(&self) -> &[TransitionVector] {
        &self.palette
    }

    pub fn marks(&self) -> &[u32] {
        &self.marks
    }

    pub fn vector_at_index(&self, index: usize) -> &TransitionVector {
        &self.palette[self.marks[index] as usize]
    }

    pub fn vector_at(&self, x: &[i64]) -> Option<&TransitionVector> {
        self.geometry.index_of(x).map(|i| self.vector_at_index(i))
    }

    /// Exchanges the contents of two sites.
    #[inline]
    pub fn swap_sites(&mut self, a: usize, b: usize) {
        self.marks.swap(a, b);
    }

    /// Order-independent hash of the multiset of vectors held by the window.
    pub fn content_hash(&self) -> u64 {
        let mut counts = vec![0u64; self.palette.len()];
        for m in &self.marks {
            counts[*m as usize] += 1;
        }
        let mut entries: Vec<(Vec<u64>, u64)> = self
            .palette
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .map(|(v, c)| (v.bit_pattern().collect(), c))
            .collect();
        entries.sort();
        // merge equal vectors that appear under several palette slots
        let mut merged: Vec<(Vec<u64>, u64)> = Vec::with_capacity(entries.len());
        for (k, c) in entries {
            match merged.last_mut() {
                Some((pk, pc)) if *pk == k => *pc += c,
                _ => merged.push((k, c)),
            }
        }
        let mut h = std::collections::hash_map::DefaultHasher::new();
        merged.hash(&mut h);
        h.finish()
    }

    /// Dense type label per site, with the label table.
    pub fn site_types(&self, resolution: u32) -> (Vec<u32>, Vec<TypeIndex>) {
        let mut table: Vec<TypeIndex> = Vec::new();
        let mut lookup: HashMap<TypeIndex, u32> = HashMap::new();
        let palette_types: Vec<u32> = self
            .palette
            .iter()
            .map(|v| {
                let t = type_of_unchecked(v, resolution);
                *lookup.entry(t.clone()).or_insert_with(|| {
                    table.push(t);
                    (table.len() - 1) as u32
                })
            })
            .collect();
        (
            self.marks.iter().map(|m| palette_types[*m as usize]).collect(),
            table,
        )
    }

    /// Largest radius `L` with `B_L(x)` inside the window, if `x` is inside.
    pub fn feasible_radius(&self, x: &[i64]) -> Option<u32> {
        if !self.geometry.contains(x) {
            return None;
        }
        Some((self.geometry.half_width() as i64 - self.geometry.sup_distance(x)) as u32)
    }

    /// Fraction of sites of type `k` in the Euclidean ball `B_L(x)`.
    pub fn empirical_density(&self, x: &[i64], radius: u32, k: &TypeIndex) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if self.feasible_radius(x).is_none_or(|f| f < radius) {
            return Err(Error::WindowTruncated {
                site: x.to_vec(),
                radius,
            });
        }
        let matches: Vec<bool> = self
            .palette
            .iter()
            .map(|v| type_of_unchecked(v, k.resolution) == *k)
            .collect();
        let ball = BallOffsets::new(self.dim(), radius);
        let mut y = vec![0i64; self.dim()];
        let mut count = 0usize;
        for off in ball.iter() {
            for (yi, (xi, oi)) in y.iter_mut().zip(x.iter().zip(off)) {
                *yi = xi + oi;
            }
            let idx = self.geometry.index_of(&y).expect("ball inside window");
            if matches[self.marks[idx] as usize] {
                count += 1;
            }
        }
        Ok(count as f64 / ball.len() as f64)
    }

    /// Type counts in `B_L(x)` for every `L` in `radii`, computed in one sweep.
    fn ball_counts_by_radius(
        &self,
        x: &[i64],
        lo: u32,
        hi: u32,
        site_types: &[u32],
        n_types: usize,
    ) -> Vec<(u32, usize, Vec<usize>)> {
        let ball = BallOffsets::new(self.dim(), hi);
        let mut shells: Vec<(i64, u32)> = Vec::with_capacity(ball.len());
        let mut y = vec![0i64; self.dim()];
        for off in ball.iter() {
            for (yi, (xi, oi)) in y.iter_mut().zip(x.iter().zip(off)) {
                *yi = xi + oi;
            }
            let idx = self.geometry.index_of(&y).expect("ball inside window");
            shells.push((squared_norm(off), site_types[idx]));
        }
        shells.sort_unstable_by_key(|s| s.0);
        let mut counts = vec![0usize; n_types];
        let mut total = 0usize;
        let mut cursor = 0usize;
        let mut out = Vec::with_capacity((hi - lo + 1) as usize);
        for l in lo..=hi {
            let l2 = (l as i64) * (l as i64);
            while cursor < shells.len() && shells[cursor].0 <= l2 {
                counts[shells[cursor].1 as usize] += 1;
                total += 1;
                cursor += 1;
            }
            out.push((l, total, counts.clone()));
        }
        out
    }

    /// Good-site test with the default tolerance `epsilon_L`.
    pub fn is_good(
        &self,
        x: &[i64],
        radius: u32,
        max_radius: u32,
        pk: &TypeProbabilities,
    ) -> Result<GoodVerdict> {
        self.is_good_with_tolerance(x, radius, max_radius, pk, epsilon(radius.max(1) as f64))
    }

    /// `x` is good when every type density in `B_{L'}(x)`, `L <= L' <= L_max`,
    /// is within `tolerance` of `p_k`. Radii the window cannot hold are not
    /// checked; if all checked radii pass the verdict is `WindowTruncated`.
    pub fn is_good_with_tolerance(
        &self,
        x: &[i64],
        radius: u32,
        max_radius: u32,
        pk: &TypeProbabilities,
        tolerance: f64,
    ) -> Result<GoodVerdict> {
        if radius > max_radius {
            return Err(Error::InvalidInput(format!(
                "L = {radius} exceeds L_max = {max_radius}"
            )));
        }
        if radius == 0 {
            return Err(Error::InvalidInput("good-site radius must be >= 1".into()));
        }
        let feasible = self.feasible_radius(x).ok_or_else(|| Error::WindowTruncated {
            site: x.to_vec(),
            radius,
        })?;
        let checked_hi = max_radius.min(feasible);
        if checked_hi < radius {
            return Ok(GoodVerdict::WindowTruncated);
        }
        let (site_types, table) = self.site_types(pk.resolution);
        // every type with p_k > 0 or present in the window; all others read 0 = 0
        let mut targets: BTreeMap<TypeIndex, (Option<usize>, f64)> = pk
            .probs
            .iter()
            .map(|(k, p)| (k.clone(), (None, *p)))
            .collect();
        for (i, t) in table.iter().enumerate() {
            targets.entry(t.clone()).or_insert((None, 0.0)).0 = Some(i);
        }
        let counts = self.ball_counts_by_radius(x, radius, checked_hi, &site_types, table.len());
        for (_, total, by_type) in &counts {
            for (slot, p) in targets.values() {
                let c = slot.map(|s| by_type[s]).unwrap_or(0);
                if (c as f64 / *total as f64 - p).abs() > tolerance {
                    return Ok(GoodVerdict::Bad);
                }
            }
        }
        Ok(if checked_hi < max_radius {
            GoodVerdict::WindowTruncated
        } else {
            GoodVerdict::Good
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodVerdict {
    Good,
    Bad,
    WindowTruncated,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{type_of, type_probabilities};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn tv(p: &[f64]) -> TransitionVector {
        TransitionVector::new(p.to_vec()).unwrap()
    }

    fn two_types() -> (TransitionVector, TransitionVector, MuDistribution) {
        let a = tv(&[0.1, 0.9]);
        let b = tv(&[0.9, 0.1]);
        let mu = MuDistribution::atomic(vec![(a.clone(), 0.5), (b.clone(), 0.5)]).unwrap();
        (a, b, mu)
    }

    #[test]
    fn density_examples() {
        let (a, b, _) = two_types();
        let ka = type_of(&a, 2).unwrap();
        let kb = type_of(&b, 2).unwrap();
        let all_a = EnvironmentWindow::constant(3, 0, vec![0], a.clone()).unwrap();
        assert_eq!(all_a.empirical_density(&[0], 2, &ka).unwrap(), 1.0);
        assert_eq!(all_a.empirical_density(&[0], 2, &kb).unwrap(), 0.0);

        // sites -3..=3; ball of radius 2 around 0 is -2..=2 and holds two b's
        let marks = vec![0, 0, 1, 0, 1, 0, 0];
        let w = EnvironmentWindow::from_marks(3, 0, vec![0], vec![a, b], marks).unwrap();
        assert!((w.empirical_density(&[0], 2, &kb).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            w.empirical_density(&[2], 2, &kb),
            Err(Error::WindowTruncated { .. })
        ));
    }

    #[test]
    fn goodness_examples() {
        let (a, b, mu) = two_types();
        let pk = type_probabilities(&mu, 2).unwrap();
        // alternating marks: every ball of radius L' holds L' or L'+1 of each type
        let n = 2 * 40 + 1;
        let alt: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        let w = EnvironmentWindow::from_marks(40, 0, vec![0], vec![a.clone(), b.clone()], alt).unwrap();
        assert_eq!(w.is_good(&[0], 5, 30, &pk).unwrap(), GoodVerdict::Good);
        assert_eq!(w.is_good(&[0], 5, 60, &pk).unwrap(), GoodVerdict::WindowTruncated);

        // a radius-5 ball entirely of type a
        let mut marks: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        for m in marks.iter_mut().skip(40 - 5).take(11) {
            *m = 0;
        }
        let w = EnvironmentWindow::from_marks(40, 0, vec![0], vec![a, b], marks).unwrap();
        assert!(epsilon(5.0) < 0.5);
        assert_eq!(w.is_good(&[0], 5, 30, &pk).unwrap(), GoodVerdict::Bad);
        assert_eq!(w.is_good(&[0], 5, 60, &pk).unwrap(), GoodVerdict::Bad);
    }

    #[test]
    fn iid_windows_are_mostly_good() {
        let (_, _, mu) = two_types();
        let pk = type_probabilities(&mu, 1).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(20);
        let samples = 1000;
        let good = (0..samples)
            .filter(|_| {
                let w = EnvironmentWindow::sample_iid(&mu, 200, 0, vec![0], &mut rng).unwrap();
                w.is_good(&[0], 50, 200, &pk).unwrap() == GoodVerdict::Good
            })
            .count();
        assert!(good as f64 / samples as f64 >= 0.95, "good fraction {good}/{samples}");
    }

    #[test]
    fn content_hash_ignores_palette_layout() {
        let (a, b, _) = two_types();
        let w1 = EnvironmentWindow::from_marks(1, 0, vec![0], vec![a.clone(), b.clone()], vec![0, 1, 0]).unwrap();
        let w2 = EnvironmentWindow::from_marks(1, 0, vec![0], vec![b.clone(), a.clone(), a.clone()], vec![1, 0, 2]).unwrap();
        assert_eq!(w1.content_hash(), w2.content_hash());
        let w3 = EnvironmentWindow::from_marks(1, 0, vec![0], vec![a, b], vec![1, 1, 0]).unwrap();
        assert_ne!(w1.content_hash(), w3.content_hash());
    }

    proptest! {
        #[test]
        fn densities_sum_to_one(seed in 0u64..1000, l in 0u32..6, x in -4i64..=4) {
            let mu = MuDistribution::atomic(vec![
                (tv(&[0.2, 0.3, 0.1, 0.4]), 0.3),
                (tv(&[0.25, 0.25, 0.25, 0.25]), 0.3),
                (tv(&[0.7, 0.1, 0.1, 0.1]), 0.4),
            ]).unwrap();
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let w = EnvironmentWindow::sample_iid(&mu, 6, 4, vec![0, 0], &mut rng).unwrap();
            let (_, table) = w.site_types(2);
            let total: f64 = table.iter().map(|k| w.empirical_density(&[x, 0], l, k).unwrap()).sum();
            let ball = crate::lattice::ball_size(2, l) as f64;
            // integer counting: the sum is exactly (count total) / |B|
            prop_assert!((total * ball - ball).abs() < 1e-9);
        }

        #[test]
        fn goodness_monotone_in_tolerance(seed in 0u64..500, extra in 0.0f64..0.5) {
            let (_, _, mu) = two_types();
            let pk = type_probabilities(&mu, 1).unwrap();
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let w = EnvironmentWindow::sample_iid(&mu, 30, 0, vec![0], &mut rng).unwrap();
            let base = epsilon(4.0);
            let tight = w.is_good_with_tolerance(&[0], 4, 30, &pk, base).unwrap();
            let loose = w.is_good_with_tolerance(&[0], 4, 30, &pk, base + extra).unwrap();
            if tight == GoodVerdict::Good {
                prop_assert_eq!(loose, GoodVerdict::Good);
            }
        }
    }
}
