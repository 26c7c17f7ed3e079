//! Small numeric helpers shared by the samplers and the descriptive
//! statistics.

use statrs::function::erf::{erfc, erfc_inv};

/// Standard normal CDF.
pub fn pnorm(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
pub fn qnorm(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Two-sided normal tail probability of a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * (1.0 - pnorm(z.abs()))).clamp(0.0, 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn var(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

pub fn sd(xs: &[f64]) -> f64 {
    var(xs).sqrt()
}

/// Sample covariance with the `n - 1` denominator.
pub fn cov(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (n - 1) as f64
}

/// Pearson correlation; NaN when either input is constant.
pub fn cor(xs: &[f64], ys: &[f64]) -> f64 {
    cov(xs, ys) / (sd(xs) * sd(ys))
}

/// Linear-interpolation quantile (R type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Normal scores of ranks, ties sharing their average rank. NaN inputs map
/// to NaN.
pub fn normal_scores(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).filter(|&i| !xs[i].is_nan()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let m = idx.len() as f64;
    let mut out = vec![f64::NAN; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && xs[idx[end + 1]] == xs[idx[start]] {
            end += 1;
        }
        // average 1-based rank of the tie block
        let rank = (start + end) as f64 / 2.0 + 1.0;
        let score = qnorm(rank / (m + 1.0));
        for &i in &idx[start..=end] {
            out[i] = score;
        }
        start = end + 1;
    }
    out
}
