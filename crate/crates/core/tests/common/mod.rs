//! Reference solutions shared by the integration tests.

#![allow(dead_code)]

/// Exact transient distribution of `A` in the crazy clock `A -> B`
/// (rate `l1`), `A + B -> 2B` (rate `l2`) with `A(0) = n`, `B(0) = 0`,
/// computed by uniformization. Entry `a` is `P(A(t) = a)`.
pub fn crazy_clock_transient(n: usize, l1: f64, l2: f64, t: f64) -> Vec<f64> {
    let nf = n as f64;
    let q: Vec<f64> = (0..=n)
        .map(|a| {
            let a = a as f64;
            l1 * a + l2 * a * (nf - a) / nf
        })
        .collect();
    let lambda = q.iter().cloned().fold(0.0, f64::max) * 1.05;
    let mut p = vec![0.0; n + 1];
    p[n] = 1.0;
    let mut out = vec![0.0; n + 1];
    // Poisson weights computed iteratively in log space.
    let lt = lambda * t;
    let mut log_w = -lt;
    let mut covered = 0.0;
    let mut k = 0u32;
    loop {
        let w = log_w.exp();
        for a in 0..=n {
            out[a] += w * p[a];
        }
        covered += w;
        if covered > 1.0 - 1e-14 || k > 100_000 {
            break;
        }
        let mut next = vec![0.0; n + 1];
        for a in 0..=n {
            let leave = q[a] / lambda;
            next[a] += p[a] * (1.0 - leave);
            if a > 0 {
                next[a - 1] += p[a] * leave;
            }
        }
        p = next;
        k += 1;
        log_w += lt.ln() - (k as f64).ln();
    }
    out
}

/// Empirical probability of each integer level `0..=n`.
pub fn empirical_pmf(values: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    for &v in values {
        let k = v.round().clamp(0.0, n as f64) as usize;
        p[k] += 1.0;
    }
    let total = values.len() as f64;
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Total variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
