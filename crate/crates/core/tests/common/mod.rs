//! Reference computations that share no code with the library.
#![allow(dead_code)]

use nalgebra::DMatrix;

/// `P(X_t = k)` for the walk on `Z` with rate `gamma` per edge, as a Poisson
/// mixture of simple random walk step counts.
pub fn uniformized_kernel_1d(gamma: f64, t: f64, k: i64) -> f64 {
    let lambda = 2.0 * gamma * t;
    let k = k.unsigned_abs() as usize;
    let n_max = (lambda + 40.0 * lambda.sqrt() + 60.0) as usize + k;
    // log P(N = n) and log C(n, j) 2^{-n} by recursion
    let mut log_fact = vec![0.0f64; n_max + 2];
    for i in 1..log_fact.len() {
        log_fact[i] = log_fact[i - 1] + (i as f64).ln();
    }
    let mut terms = Vec::new();
    let mut n = k;
    while n <= n_max {
        let j = (n + k) / 2;
        let log_p = -lambda + n as f64 * lambda.ln() - log_fact[n];
        let log_walk = log_fact[n] - log_fact[j] - log_fact[n - j] - n as f64 * std::f64::consts::LN_2;
        terms.push((log_p + log_walk).exp());
        n += 2;
    }
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum()
}

/// `exp(t Q)` applied to the origin, where `Q` is the rate-`gamma`
/// nearest-neighbour generator on the square `[-h, h]^2` with jumps leaving
/// the square removed (killed walk). Returned row-major over `(x, y)`.
pub fn killed_generator_expm_2d(gamma: f64, t: f64, h: i64) -> (usize, Vec<f64>) {
    let side = (2 * h + 1) as usize;
    let n = side * side;
    let idx = |x: i64, y: i64| ((x + h) as usize) * side + (y + h) as usize;
    let mut q = DMatrix::<f64>::zeros(n, n);
    for x in -h..=h {
        for y in -h..=h {
            let i = idx(x, y);
            q[(i, i)] = -4.0 * gamma * t;
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (a, b) = (x + dx, y + dy);
                if a.abs() <= h && b.abs() <= h {
                    q[(i, idx(a, b))] = gamma * t;
                }
            }
        }
    }
    let e = q.exp();
    let o = idx(0, 0);
    (side, (0..n).map(|j| e[(o, j)]).collect())
}
