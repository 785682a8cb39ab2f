//! Transition kernel of the continuous-time simple random walk that jumps
//! across each incident edge at rate `gamma`, together with the ball
//! averages, crown extremes and error functionals built from it.
//!
//! Coordinates of such a walk are independent one-dimensional walks with
//! total jump rate `2 gamma`, so
//! `p(t, x) = prod_i exp(-2 gamma t) I_{|x_i|}(2 gamma t)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::environment::EnvironmentWindow;
use crate::error::{Error, Result};
use crate::lattice::{ball_size, crown_index, direction_count, BallOffsets, BoxGeometry};
use crate::simplex::neumaier_sum;
use crate::types::{type_of_unchecked, TypeIndex};

/// Two-sided per-axis tail below which a table is truncated.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-14;

const RESCALE_AT: f64 = 1e250;

/// `exp(-x) I_k(x)` for `k = 0..=kmax`, by Miller's backward recurrence
/// `I_{k-1} = I_{k+1} + (2k / x) I_k` normalized with
/// `exp(-x) (I_0 + 2 sum_{k>=1} I_k) = 1`.
pub fn scaled_bessel_table(x: f64, kmax: usize) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite());
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let reach = kmax.max(x.ceil() as usize);
    let start = 2 * reach + 50 + (20.0 * x.sqrt()).ceil() as usize;
    let mut above = 0.0f64;
    let mut here = 1.0f64;
    // sum_{k >= 1} of the unnormalized values
    let mut tail_sum = 0.0f64;
    let mut k = start;
    while k > 0 {
        if k <= kmax {
            out[k] = here;
        }
        tail_sum += here;
        let below = above + (2.0 * k as f64 / x) * here;
        above = here;
        here = below;
        k -= 1;
        if here > RESCALE_AT {
            let s = 1.0 / RESCALE_AT;
            here *= s;
            above *= s;
            tail_sum *= s;
            for v in out.iter_mut().skip(k + 1) {
                *v *= s;
            }
        }
    }
    out[0] = here;
    let norm = here + 2.0 * tail_sum;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Upper bound on `I_{k+1}(x) / I_k(x)` valid for `k >= 0`.
fn bessel_ratio_bound(x: f64, k: usize) -> f64 {
    let k = k as f64;
    x / (k + (x * x + k * k).sqrt())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time t = {t} must be finite and >= 0")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gamma = {gamma} must be positive and finite")));
    }
    Ok(())
}

/// `exp(-2 gamma t) I_{|k|}(2 gamma t)`.
pub fn kernel_1d(gamma: f64, t: f64, k: i64) -> Result<f64> {
    check_gamma(gamma)?;
    check_time(t)?;
    let k = k.unsigned_abs() as usize;
    Ok(scaled_bessel_table(2.0 * gamma * t, k)[k])
}

/// `p(t, x)`. Factors are multiplied in sorted order so that the value is
/// bitwise invariant under coordinate permutations and reflections.
pub fn kernel(gamma: f64, t: f64, x: &[i64]) -> Result<f64> {
    check_gamma(gamma)?;
    check_time(t)?;
    let mut abs: Vec<usize> = x.iter().map(|c| c.unsigned_abs() as usize).collect();
    abs.sort_unstable();
    let kmax = abs.last().copied().unwrap_or(0);
    let table = scaled_bessel_table(2.0 * gamma * t, kmax);
    Ok(abs.iter().map(|k| table[*k]).product())
}

/// Tabulated kernel on `||x||_inf <= r_trunc`, where `r_trunc` is the
/// smallest radius whose two-sided per-axis tail is below the bound.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTable {
    d: usize,
    gamma: f64,
    t: f64,
    r_trunc: usize,
    one_d: Vec<f64>,
    axis_tail: f64,
    mass_deficit: f64,
}

impl KernelTable {
    pub fn new(d: usize, gamma: f64, t: f64) -> Result<Self> {
        Self::with_tail_bound(d, gamma, t, DEFAULT_TAIL_BOUND)
    }

    pub fn with_tail_bound(d: usize, gamma: f64, t: f64, tail_bound: f64) -> Result<Self> {
        check_gamma(gamma)?;
        check_time(t)?;
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if !(tail_bound > 0.0 && tail_bound < 1.0) {
            return Err(Error::InvalidInput(format!("tail bound {tail_bound} must be in (0, 1)")));
        }
        let x = 2.0 * gamma * t;
        let mut kmax = (10.0 * x.sqrt()).ceil() as usize + 40;
        loop {
            let values = scaled_bessel_table(x, kmax);
            let r = bessel_ratio_bound(x, kmax);
            let beyond = if x == 0.0 { 0.0 } else { values[kmax] * r / (1.0 - r) };
            if 2.0 * beyond > tail_bound * 1e-3 {
                kmax *= 2;
                continue;
            }
            // tails[k] = sum_{j > k} values[j] (+ certified remainder)
            let mut tails = vec![0.0; kmax + 1];
            let mut acc = beyond;
            for k in (0..=kmax).rev() {
                tails[k] = acc;
                acc += values[k];
            }
            let r_trunc = (0..=kmax).find(|&k| 2.0 * tails[k] < tail_bound).unwrap_or(kmax);
            let axis_tail = 2.0 * tails[r_trunc];
            let mut one_d = values;
            one_d.truncate(r_trunc + 1);
            let mass_deficit = 1.0 - (1.0 - axis_tail).powi(d as i32);
            return Ok(Self {
                d,
                gamma,
                t,
                r_trunc,
                one_d,
                axis_tail,
                mass_deficit: mass_deficit.max(0.0),
            });
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn r_trunc(&self) -> usize {
        self.r_trunc
    }

    /// Certified two-sided tail of one coordinate beyond `r_trunc`.
    pub fn axis_tail(&self) -> f64 {
        self.axis_tail
    }

    /// Bound on `1 - sum_x value(x)`.
    pub fn mass_deficit(&self) -> f64 {
        self.mass_deficit
    }

    pub fn one_d(&self) -> &[f64] {
        &self.one_d
    }

    pub fn value_1d(&self, k: i64) -> f64 {
        self.one_d.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// `p(t, x)`, zero outside the truncation cube.
    pub fn value(&self, x: &[i64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let mut abs = [0usize; 8];
        if x.len() <= abs.len() {
            for (a, c) in abs.iter_mut().zip(x) {
                *a = c.unsigned_abs() as usize;
            }
            let abs = &mut abs[..x.len()];
            abs.sort_unstable();
            return abs
                .iter()
                .map(|k| self.one_d.get(*k).copied().unwrap_or(0.0))
                .product();
        }
        let mut abs: Vec<usize> = x.iter().map(|c| c.unsigned_abs() as usize).collect();
        abs.sort_unstable();
        abs.iter().map(|k| self.one_d.get(*k).copied().unwrap_or(0.0)).product()
    }

    /// Two-sided mass of one coordinate beyond `k` (beyond the table, the
    /// certified remainder).
    pub fn tail_beyond(&self, k: usize) -> f64 {
        if k >= self.r_trunc {
            return self.axis_tail;
        }
        2.0 * neumaier_sum(self.one_d[k + 1..].iter().copied()) + self.axis_tail
    }

    /// CSV dump `x1,...,xd,value` over the truncation cube.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.d).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},value", header.join(","))?;
        let g = BoxGeometry::centered(self.d, self.r_trunc as u32)?;
        for i in 0..g.len() {
            let p = g.point_of(i);
            let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{:e}", coords.join(","), self.value(&p))?;
        }
        Ok(())
    }
}

fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

fn ball_average(table: &KernelTable, offsets: &BallOffsets, x: &[i64], scratch: &mut Vec<f64>, z: &mut [i64]) -> f64 {
    scratch.clear();
    for y in offsets.iter() {
        for ((zi, xi), yi) in z.iter_mut().zip(x).zip(y) {
            *zi = xi + yi;
        }
        scratch.push(table.value(z));
    }
    sorted_sum(scratch) / offsets.len() as f64
}

/// `p_M(t, x) = |B_M|^{-1} sum_{y in B_M} p(t, x + y)`.
pub fn ball_kernel(gamma: f64, t: f64, x: &[i64], m: u32) -> Result<f64> {
    let table = KernelTable::new(x.len(), gamma, t)?;
    let offsets = BallOffsets::new(x.len(), m);
    let mut scratch = Vec::with_capacity(offsets.len());
    let mut z = vec![0i64; x.len()];
    Ok(ball_average(&table, &offsets, x, &mut scratch, &mut z))
}

/// `p_M(t, .)` tabulated on a cube. Terms are summed in sorted order so the
/// grid inherits the exact lattice symmetries of the table.
#[derive(Debug, Clone)]
pub struct BallKernelGrid {
    table: KernelTable,
    offsets: BallOffsets,
    geometry: BoxGeometry,
    values: Vec<f64>,
}

impl BallKernelGrid {
    pub fn new(table: KernelTable, m: u32, half_width: u32) -> Result<Self> {
        let d = table.dim();
        let offsets = BallOffsets::new(d, m);
        let geometry = BoxGeometry::centered(d, half_width)?;
        let values = (0..geometry.len())
            .into_par_iter()
            .map_init(
                || (Vec::with_capacity(offsets.len()), vec![0i64; d]),
                |(scratch, z), i| {
                    let x = geometry.point_of(i);
                    ball_average(&table, &offsets, &x, scratch, z)
                },
            )
            .collect();
        Ok(Self {
            table,
            offsets,
            geometry,
            values,
        })
    }

    /// Grid covering every point where `p_M` is nonzero in the truncated
    /// representation.
    pub fn full(table: KernelTable, m: u32) -> Result<Self> {
        let hw = table.r_trunc() as u32 + m;
        Self::new(table, m, hw)
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn m(&self) -> u32 {
        self.offsets.radius()
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geometry
    }

    pub fn at(&self, x: &[i64]) -> f64 {
        match self.geometry.index_of(x) {
            Some(i) => self.values[i],
            None => {
                let mut scratch = Vec::with_capacity(self.offsets.len());
                let mut z = vec![0i64; x.len()];
                ball_average(&self.table, &self.offsets, x, &mut scratch, &mut z)
            }
        }
    }

    pub fn at_index(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Extremes of `p_M(t, .)` over one crown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrownExtremes {
    pub n: u32,
    pub size: usize,
    pub x_hat: Vec<i64>,
    pub p_plus: f64,
    pub x_check: Vec<i64>,
    pub p_minus: f64,
    pub error: f64,
}

/// Crowns `C_0, ..., C_{n_max}` with their extreme representatives.
#[derive(Debug, Clone, Serialize)]
pub struct CrownDecomposition {
    pub m: u32,
    pub n_max: u32,
    pub crowns: Vec<CrownExtremes>,
}

impl CrownDecomposition {
    pub fn new(grid: &BallKernelGrid, n_max: u32) -> Result<Self> {
        let d = grid.table().dim();
        let g = BoxGeometry::centered(d, n_max)?;
        let mut crowns: Vec<Option<CrownExtremes>> = vec![None; n_max as usize + 1];
        // row-major order is lexicographic, so strict comparisons keep the
        // lexicographically first representative among ties
        for i in 0..g.len() {
            let x = g.point_of(i);
            let n = crown_index(&x);
            if n > n_max {
                continue;
            }
            let v = grid.at(&x);
            match &mut crowns[n as usize] {
                slot @ None => {
                    *slot = Some(CrownExtremes {
                        n,
                        size: 1,
                        x_hat: x.clone(),
                        p_plus: v,
                        x_check: x,
                        p_minus: v,
                        error: 0.0,
                    })
                }
                Some(c) => {
                    c.size += 1;
                    if v > c.p_plus {
                        c.p_plus = v;
                        c.x_hat = x.clone();
                    }
                    if v < c.p_minus {
                        c.p_minus = v;
                        c.x_check = x;
                    }
                }
            }
        }
        let crowns = crowns
            .into_iter()
            .enumerate()
            .map(|(n, c)| {
                let mut c = c.ok_or_else(|| Error::InvalidInput(format!("crown {n} is empty")))?;
                c.error = c.p_plus - c.p_minus;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            m: grid.m(),
            n_max,
            crowns,
        })
    }

    pub fn crown(&self, n: u32) -> &CrownExtremes {
        &self.crowns[n as usize]
    }
}

/// `(x_hat_n, p^+, x_check_n, p^-, E_M(t, n))` for a single crown.
pub fn crown_extremes(d: usize, gamma: f64, t: f64, m: u32, n: u32) -> Result<CrownExtremes> {
    let table = KernelTable::new(d, gamma, t)?;
    let grid = BallKernelGrid::new(table, m, n)?;
    Ok(CrownDecomposition::new(&grid, n)?.crowns.pop().expect("n_max crown"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub d: usize,
    pub gamma: f64,
    pub t: f64,
    pub m: u32,
    pub r_check: u32,
    pub pairs: usize,
    /// `max p_M(t, y + e_i) - p_M(t, y)` over tested pairs.
    pub worst_violation: f64,
    pub worst_pair: Option<(Vec<i64>, usize)>,
}

/// Checks `p_M(t, y) >= p_M(t, y + e_i)` for `<y, e_i> > 0`, `||y|| <= r_check`.
pub fn check_monotonicity(d: usize, gamma: f64, t: f64, m: u32, r_check: u32) -> Result<MonotonicityReport> {
    let table = KernelTable::new(d, gamma, t)?;
    let grid = BallKernelGrid::new(table, m, r_check + 1)?;
    let balls = BallOffsets::new(d, r_check);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pair = None;
    let mut pairs = 0;
    let mut next = vec![0i64; d];
    for y in balls.iter() {
        for axis in 0..d {
            if y[axis] <= 0 {
                continue;
            }
            next.copy_from_slice(y);
            next[axis] += 1;
            let v = grid.at(&next) - grid.at(y);
            pairs += 1;
            if v > worst {
                worst = v;
                worst_pair = Some((y.to_vec(), axis));
            }
        }
    }
    Ok(MonotonicityReport {
        d,
        gamma,
        t,
        m,
        r_check,
        pairs,
        worst_violation: if pairs == 0 { 0.0 } else { worst },
        worst_pair,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrownOrderingReport {
    pub d: usize,
    pub gamma: f64,
    pub t: f64,
    pub m: u32,
    pub n_max: u32,
    /// Largest increase of `p^+` or `p^-` from one crown to the next.
    pub worst_violation: f64,
}

/// Checks that `p^+_M(t, n)` and `p^-_M(t, n)` are nonincreasing in `n`.
pub fn check_crown_ordering(d: usize, gamma: f64, t: f64, m: u32, n_max: u32) -> Result<CrownOrderingReport> {
    let table = KernelTable::new(d, gamma, t)?;
    let grid = BallKernelGrid::new(table, m, n_max)?;
    let crowns = CrownDecomposition::new(&grid, n_max)?;
    let worst = crowns
        .crowns
        .windows(2)
        .map(|w| (w[1].p_plus - w[0].p_plus).max(w[1].p_minus - w[0].p_minus))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CrownOrderingReport {
        d,
        gamma,
        t,
        m,
        n_max,
        worst_violation: if n_max == 0 { 0.0 } else { worst },
    })
}

/// Gaussian density with per-coordinate variance `2 gamma t`, the variance
/// of one coordinate of the lattice walk.
pub fn gaussian_kernel(gamma: f64, t: f64, z: &[f64]) -> Result<f64> {
    check_gamma(gamma)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("Gaussian kernel needs t > 0, got {t}")));
    }
    let var = 2.0 * gamma * t;
    let r2: f64 = z.iter().map(|c| c * c).sum();
    Ok((-r2 / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).powf(z.len() as f64 / 2.0))
}

/// Ball average `G_M(t, x)` over the same offsets as `p_M`.
pub fn gaussian_ball(gamma: f64, t: f64, x: &[i64], m: u32) -> Result<f64> {
    let offsets = BallOffsets::new(x.len(), m);
    let mut terms = Vec::with_capacity(offsets.len());
    let mut z = vec![0.0; x.len()];
    for y in offsets.iter() {
        for ((zi, xi), yi) in z.iter_mut().zip(x).zip(y) {
            *zi = (xi + yi) as f64;
        }
        terms.push(gaussian_kernel(gamma, t, &z)?);
    }
    Ok(sorted_sum(&mut terms) / offsets.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcltReport {
    pub d: usize,
    pub gamma: f64,
    pub t: f64,
    pub r_check: u32,
    pub sup: f64,
    pub argmax: Vec<i64>,
    /// `sup * (gamma t)^(d/2 + 1)`.
    pub scaled: f64,
}

/// `sup_{||z|| <= r_check} |p(t, z) - G(t, z)|`.
pub fn lclt_error(d: usize, gamma: f64, t: f64, r_check: u32) -> Result<LcltReport> {
    let table = KernelTable::new(d, gamma, t)?;
    gaussian_kernel(gamma, t, &vec![0.0; d])?;
    let mut sup = 0.0;
    let mut argmax = vec![0; d];
    let mut zf = vec![0.0; d];
    for z in BallOffsets::new(d, r_check).iter() {
        for (f, c) in zf.iter_mut().zip(z) {
            *f = *c as f64;
        }
        let e = (table.value(z) - gaussian_kernel(gamma, t, &zf)?).abs();
        if e > sup {
            sup = e;
            argmax = z.to_vec();
        }
    }
    let gt = gamma * t;
    Ok(LcltReport {
        d,
        gamma,
        t,
        r_check,
        sup,
        argmax,
        scaled: sup * gt.powf(d as f64 / 2.0 + 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborDifference {
    pub d: usize,
    pub gamma: f64,
    pub t: f64,
    pub sup: f64,
    pub argmax: Vec<i64>,
    pub direction: usize,
    /// `sup * (gamma t)^((d + 1) / 2)`.
    pub scaled: f64,
}

/// `sup_{z, e} |p(t, z) - p(t, z + e)|` over the truncation cube.
pub fn neighbor_difference_decay(d: usize, gamma: f64, t: f64) -> Result<NeighborDifference> {
    let table = KernelTable::new(d, gamma, t)?;
    let g = BoxGeometry::centered(d, table.r_trunc() as u32 + 1)?;
    let mut sup = 0.0;
    let mut argmax = vec![0; d];
    let mut direction = d;
    let mut next = vec![0i64; d];
    for i in 0..g.len() {
        let z = g.point_of(i);
        let here = table.value(&z);
        for axis in 0..d {
            next.copy_from_slice(&z);
            next[axis] += 1;
            let diff = (here - table.value(&next)).abs();
            if diff > sup {
                sup = diff;
                argmax = z.clone();
                // positive direction along `axis`
                direction = d + (d - 1 - axis);
            }
        }
    }
    debug_assert!(direction < direction_count(d) || sup == 0.0);
    Ok(NeighborDifference {
        d,
        gamma,
        t,
        sup,
        argmax,
        direction,
        scaled: sup * (gamma * t).powf((d as f64 + 1.0) / 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrownErrorSums {
    pub d: usize,
    pub gamma: f64,
    pub t: f64,
    pub m: u32,
    pub l: u32,
    pub epsilon: f64,
    pub m_minus: u32,
    pub m_plus: u32,
    pub n_max: u32,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    /// `sum_{n >= L} E_M(t, n) |C_n|`.
    pub total: f64,
    /// `E_M(t, L) |B_{L-1}|`.
    pub boundary: f64,
    /// `total * (gamma t)^(1/2 - epsilon d)`.
    pub scaled_total: f64,
    /// `boundary * (gamma t)^((d + 1) / 2) / L^d`.
    pub scaled_boundary: f64,
}

/// The split `sum_{n >= L} E_M(t,n)|C_n| = H1 + H2 + H3` at
/// `M_-/+ = floor(M -/+ (gamma t)^(1/2 + epsilon)) v L`.
pub fn crown_error_sums(d: usize, gamma: f64, t: f64, m: u32, l: u32, epsilon: f64) -> Result<CrownErrorSums> {
    if !(gamma * t > 0.0) {
        return Err(Error::InvalidInput("crown error sums need gamma t > 0".into()));
    }
    if l == 0 {
        return Err(Error::InvalidInput("L must be >= 1".into()));
    }
    let table = KernelTable::new(d, gamma, t)?;
    let reach = table.r_trunc() as f64 + m as f64;
    // beyond this crown every point lies outside the truncated support
    let n_max = ((d as f64).sqrt() * reach).ceil() as u32 + 1;
    let n_max = n_max.max(l);
    let grid = BallKernelGrid::new(table, m, n_max)?;
    let crowns = CrownDecomposition::new(&grid, n_max)?;
    let gt = gamma * t;
    let spread = gt.powf(0.5 + epsilon);
    let m_minus = ((m as f64 - spread).floor().max(0.0) as u32).max(l);
    let m_plus = ((m as f64 + spread).floor() as u32).max(l);
    let part = |lo: u32, hi: u32| -> f64 {
        // sum over lo <= n < hi, n <= n_max
        neumaier_sum(
            crowns
                .crowns
                .iter()
                .filter(|c| c.n >= lo && c.n < hi)
                .map(|c| c.error * c.size as f64),
        )
    };
    let h1 = part(l, m_minus);
    let h2 = part(m_minus, m_plus);
    let h3 = part(m_plus, u32::MAX);
    let total = part(l, u32::MAX);
    let boundary = if l <= n_max {
        crowns.crown(l).error * ball_size(d, l - 1) as f64
    } else {
        0.0
    };
    Ok(CrownErrorSums {
        d,
        gamma,
        t,
        m,
        l,
        epsilon,
        m_minus,
        m_plus,
        n_max,
        h1,
        h2,
        h3,
        total,
        boundary,
        scaled_total: total * gt.powf(0.5 - epsilon * d as f64),
        scaled_boundary: boundary * gt.powf((d as f64 + 1.0) / 2.0) / (l as f64).powi(d as i32),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMean {
    pub value: f64,
    /// Kernel mass of `p_L(t, .)` falling outside the window.
    pub neglected_mass: f64,
}

/// `E^eta[<eta(t)>^k_L] = sum_z p_L(t, z) 1{T(eta_z) = k}` for the ball
/// centred at the window origin, summed over window sites.
pub fn exact_mean(
    env0: &EnvironmentWindow,
    gamma: f64,
    t: f64,
    l: u32,
    k: &TypeIndex,
    mass_budget: f64,
) -> Result<ExactMean> {
    let d = env0.dim();
    if k.coords.len() != direction_count(d) {
        return Err(Error::DimensionMismatch {
            expected: direction_count(d),
            got: k.coords.len(),
        });
    }
    let table = KernelTable::new(d, gamma, t)?;
    let half = env0.geometry().half_width();
    let outside = if half as usize >= table.r_trunc() + l as usize {
        0.0
    } else if half < l {
        1.0
    } else {
        let per_axis = table.tail_beyond((half - l) as usize);
        1.0 - (1.0 - per_axis).powi(d as i32)
    };
    let neglected = outside + table.mass_deficit();
    if neglected > mass_budget {
        let required = (0..=table.r_trunc())
            .find(|&r| 1.0 - (1.0 - table.tail_beyond(r)).powi(d as i32) + table.mass_deficit() <= mass_budget)
            .unwrap_or(table.r_trunc());
        return Err(Error::MassBudgetExceeded {
            outside: neglected,
            budget: mass_budget,
            required_radius: required as u32 + l,
        });
    }
    let grid = BallKernelGrid::new(table, l, half)?;
    let origin = env0.origin();
    let mut rel = vec![0i64; d];
    let mut terms = Vec::new();
    let palette_hits: Vec<bool> = env0
        .palette()
        .iter()
        .map(|s| type_of_unchecked(s, k.resolution) == *k)
        .collect();
    for (i, &mark) in env0.marks().iter().enumerate() {
        if !palette_hits[mark as usize] {
            continue;
        }
        let z = env0.geometry().point_of(i);
        for ((r, zi), oi) in rel.iter_mut().zip(&z).zip(origin) {
            *r = zi - oi;
        }
        terms.push(grid.at(&rel));
    }
    Ok(ExactMean {
        value: neumaier_sum(terms),
        neglected_mass: neglected,
    })
}

/// One row of a kernel check report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub d: usize,
    pub gamma: f64,
    pub t: f64,
    pub m: u32,
    pub value: f64,
}

/// JSON report of a batch of kernel checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub check: String,
    pub entries: Vec<CheckEntry>,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Monotonicity and crown ordering over a grid of `(gamma t, M)` at
/// `gamma = 1`, all with `||y|| <= r_check`.
pub fn claim_checks(dims: &[usize], times: &[f64], ms: &[u32], r_check: u32, tolerance: f64) -> Result<Vec<CheckReport>> {
    let mut mono = Vec::new();
    let mut order = Vec::new();
    for &d in dims {
        for &t in times {
            for &m in ms {
                let a = check_monotonicity(d, 1.0, t, m, r_check)?;
                mono.push(CheckEntry {
                    d,
                    gamma: 1.0,
                    t,
                    m,
                    value: a.worst_violation,
                });
                let b = check_crown_ordering(d, 1.0, t, m, r_check)?;
                order.push(CheckEntry {
                    d,
                    gamma: 1.0,
                    t,
                    m,
                    value: b.worst_violation,
                });
            }
        }
    }
    let report = |check: &str, entries: Vec<CheckEntry>| {
        let worst = entries.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
        CheckReport {
            schema_version: 1,
            check: check.to_string(),
            passed: worst <= tolerance,
            entries,
            worst,
            tolerance,
        }
    };
    Ok(vec![report("monotonicity", mono), report("crown_ordering", order)])
}
