use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{neumaier_sum, MuDistribution};
use crate::walker::ProjectionFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSide {
    /// `Y`: the `(2d - 1) delta` correction goes to the smallest projection.
    Lower,
    /// `Y~`: the correction goes to the largest projection.
    Upper,
}

/// Law on the projected step values `v_j = <e_j, v>`, slot order
/// `-d, ..., -1, 1, ..., d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominatingLaw {
    pub side: LawSide,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    pub delta: f64,
    /// Slot that receives the correction.
    pub extreme_slot: usize,
    /// `E_mu[<D, v>]`.
    pub v: f64,
    pub v_max: f64,
    pub mean: f64,
    /// `v - 2d v_max delta` (lower) or `v + 2d v_max delta` (upper).
    pub predicted_mean: f64,
    /// False when some `E_mu[s_j] = 0` forced the modified law, which moves
    /// the mean closer to the extreme than the identity predicts.
    pub identity_exact: bool,
    /// Some two slots project to the same value.
    pub ties: bool,
}

impl DominatingLaw {
    /// `E[Y] > v - eps/2` for the lower law, `E[Y~] < v + eps/2` for the upper.
    pub fn within(&self, epsilon: f64) -> bool {
        match self.side {
            LawSide::Lower => self.mean > self.v - epsilon / 2.0,
            LawSide::Upper => self.mean < self.v + epsilon / 2.0,
        }
    }
}

/// Open interval of admissible `delta`: `(2^{-(N-1)} d, min{E_mu[s_i] > 0})`.
pub fn admissible_delta(mu: &MuDistribution, resolution: u32) -> (f64, f64) {
    let lo = mu.dim() as f64 * 0.5f64.powi(resolution as i32 - 1);
    let hi = mu
        .mean_vector()
        .into_iter()
        .filter(|m| *m > 0.0)
        .fold(f64::INFINITY, f64::min);
    (lo, hi)
}

pub fn build_dominating_law(
    mu: &MuDistribution,
    resolution: u32,
    frame: &ProjectionFrame,
    delta: f64,
    side: LawSide,
) -> Result<DominatingLaw> {
    let d = mu.dim();
    if frame.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: frame.dim(),
        });
    }
    let (lo, hi) = admissible_delta(mu, resolution);
    if !(lo < hi) {
        return Err(Error::Precondition(format!(
            "empty admissible delta interval ({lo}, {hi}); increase the type resolution N = {resolution}"
        )));
    }
    if !(delta > lo && delta < hi) {
        return Err(Error::Precondition(format!(
            "delta = {delta} outside the admissible interval ({lo}, {hi})"
        )));
    }
    let means = mu.mean_vector();
    let values = frame.components.clone();
    let v = neumaier_sum(values.iter().zip(&means).map(|(a, b)| a * b));
    let pick = |better: fn(f64, f64) -> bool| {
        (0..values.len()).fold(0, |best, j| if better(values[j], values[best]) { j } else { best })
    };
    let extreme_slot = match side {
        LawSide::Lower => pick(|a, b| a < b),
        LawSide::Upper => pick(|a, b| a > b),
    };
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let ties = sorted.windows(2).any(|w| w[0] == w[1]);
    let mut identity_exact = true;
    let mut probs: Vec<f64> = means
        .iter()
        .enumerate()
        .map(|(j, m)| {
            if j == extreme_slot {
                0.0
            } else if *m == 0.0 {
                identity_exact = false;
                0.0
            } else {
                m - delta
            }
        })
        .collect();
    probs[extreme_slot] = if identity_exact {
        means[extreme_slot] + (2 * d - 1) as f64 * delta
    } else {
        1.0 - neumaier_sum(probs.iter().copied())
    };
    let v_max = values.iter().fold(0.0f64, |a, b| a.max(*b));
    let shift = 2.0 * d as f64 * v_max * delta;
    let predicted_mean = match side {
        LawSide::Lower => v - shift,
        LawSide::Upper => v + shift,
    };
    let mean = neumaier_sum(values.iter().zip(&probs).map(|(a, b)| a * b));
    Ok(DominatingLaw {
        side,
        values,
        probs,
        delta,
        extreme_slot,
        v,
        v_max,
        mean,
        predicted_mean,
        identity_exact,
        ties,
    })
}

/// Times `t_0 < ... < t_n = t` of the multiscale argument and the drift
/// envelopes `c_n` (decreasing from `v`) and `c~_n` (increasing from `v`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormSchedule {
    pub base: u64,
    pub target: u64,
    pub times: Vec<u64>,
    pub c: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub epsilon: f64,
    pub v: f64,
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

fn in_base_interval(x: u64, base: u64) -> bool {
    x <= base && (x as u128).pow(3) >= base as u128
}

/// `c_n = (3 - sum_{k<=n} r^k) v / 2` and `c~_n = (1 + sum_{k<=n} r^k) v / 2`
/// with `r = eps / (1 + eps)`.
pub fn envelopes(n: usize, epsilon: f64, v: f64) -> (Vec<f64>, Vec<f64>) {
    let r = epsilon / (1.0 + epsilon);
    let mut partial = 0.0;
    let mut power = 1.0;
    let mut c = Vec::with_capacity(n);
    let mut ct = Vec::with_capacity(n);
    for _ in 0..n {
        partial += power;
        power *= r;
        c.push(0.5 * (3.0 - partial) * v);
        ct.push(0.5 * (1.0 + partial) * v);
    }
    (c, ct)
}

pub fn build_schedule(base: u64, target: u64, epsilon: f64, v: f64) -> Result<RenormSchedule> {
    if base < 2 || target < base {
        return Err(Error::InvalidInput(format!(
            "schedule needs t >= T >= 2 (T = {base}, t = {target})"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be > 0".into()));
    }
    let mut chain = vec![target];
    while !in_base_interval(*chain.last().expect("nonempty"), base) {
        let next = isqrt(*chain.last().expect("nonempty"));
        if (next as u128).pow(3) < base as u128 {
            return Err(Error::Infeasible(format!(
                "square-root chain from t = {target} skips the interval [T^(1/3), T] for T = {base}"
            )));
        }
        chain.push(next);
    }
    chain.reverse();
    let (c, c_tilde) = envelopes(chain.len(), epsilon, v);
    let schedule = RenormSchedule {
        base,
        target,
        times: chain,
        c,
        c_tilde,
        epsilon,
        v,
    };
    schedule.validate()?;
    Ok(schedule)
}

impl RenormSchedule {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Precondition(format!("schedule invariant violated: {m}")));
        let first = *self.times.first().ok_or(Error::Precondition("empty schedule".into()))?;
        if !in_base_interval(first, self.base) {
            return fail("t_0 outside [T^(1/3), T]");
        }
        if *self.times.last().expect("nonempty") != self.target {
            return fail("last time differs from t");
        }
        for w in self.times.windows(2) {
            let (a, b) = (w[0] as u128, w[1] as u128);
            if !(a * a <= b && b <= (a + 1) * (a + 1)) {
                return fail("t_{n+1} outside [t_n^2, (t_n + 1)^2]");
            }
        }
        if self.c.first() != Some(&self.v) || self.c_tilde.first() != Some(&self.v) {
            return fail("c_0 != v");
        }
        let sign = self.v.signum();
        if self.c.windows(2).any(|w| sign * (w[1] - w[0]) > 0.0)
            || self.c_tilde.windows(2).any(|w| sign * (w[1] - w[0]) < 0.0)
        {
            return fail("envelopes not monotone");
        }
        Ok(())
    }

    /// `lim c_n = v (1 - eps / 2)` and `lim c~_n = v (1 + eps / 2)`.
    pub fn limits(&self) -> (f64, f64) {
        (self.v * (1.0 - self.epsilon / 2.0), self.v * (1.0 + self.epsilon / 2.0))
    }
}

/// Two-point law of the increment over one block of length `t_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZLaw {
    pub side: LawSide,
    pub t_n: f64,
    pub c_n: f64,
    pub phi: f64,
    /// `c_n t_n`.
    pub typical: f64,
    /// `-t_n` (lower) or `+t_n` (upper).
    pub atypical: f64,
    /// `e^{-phi^{1/4}}`.
    pub p_atypical: f64,
    pub mean: f64,
}

pub fn zk_law(t_n: f64, c_n: f64, phi: f64, side: LawSide) -> Result<ZLaw> {
    if !(t_n >= 1.0) {
        return Err(Error::InvalidInput(format!("t_n = {t_n} must be >= 1")));
    }
    let p_atypical = (-phi.powf(0.25)).exp();
    let atypical = match side {
        LawSide::Lower => -t_n,
        LawSide::Upper => t_n,
    };
    let typical = c_n * t_n;
    Ok(ZLaw {
        side,
        t_n,
        c_n,
        phi,
        typical,
        atypical,
        p_atypical,
        mean: typical * (1.0 - p_atypical) + atypical * p_atypical,
    })
}

/// `phi_t = t^{1/100}`.
pub fn phi_of(t: f64) -> f64 {
    t.powf(0.01)
}

/// Outcome of `c_{n+1} t_n - E[Z] <= -t_n^{3/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn zk_inequality(law: &ZLaw, c_next: f64) -> ZInequality {
    let lhs = c_next * law.t_n - law.mean;
    let rhs = -law.t_n.powf(0.75);
    ZInequality {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}
