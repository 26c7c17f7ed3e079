//! Exact draws from a normal distribution restricted to an open interval.
//!
//! Interior intervals use plain normal or uniform rejection; tail intervals
//! use the translated-exponential proposal of Robert (1995), so bounds far
//! out in the tail (tens of standard deviations) stay cheap and finite.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};

use crate::error::{Error, Result};

const MAX_RETRIES: usize = 1000;

/// Draw from Normal(`mean`, `sd`²) truncated to the open interval
/// (`lower`, `upper`). Either bound may be infinite.
pub fn rtnorm<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lower < upper) || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
        return Err(Error::EmptyInterval { lower, upper });
    }
    if !(sd > 0.0) || !mean.is_finite() {
        return Err(Error::Degenerate(format!(
            "truncated normal with mean {mean} and sd {sd}"
        )));
    }
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    for _ in 0..MAX_RETRIES {
        let x = mean + sd * standard(a, b, rng);
        // rounding in the back-transform can land on a bound
        if x > lower && x < upper {
            return Ok(x);
        }
    }
    // interval narrower than the floating point grid around `mean`
    let mid = if lower.is_finite() && upper.is_finite() {
        lower + 0.5 * (upper - lower)
    } else if lower.is_finite() {
        next_up(lower)
    } else {
        next_down(upper)
    };
    if mid > lower && mid < upper {
        Ok(mid)
    } else {
        Err(Error::EmptyInterval { lower, upper })
    }
}

fn next_up(x: f64) -> f64 {
    if x >= 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

/// Standard normal restricted to (a, b), a < b.
fn standard<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return rng.sample(StandardNormal);
    }
    if b <= 0.0 {
        return -standard(-b, -a, rng);
    }
    if a < 0.0 {
        // interval straddles zero
        if b - a >= (2.0 * std::f64::consts::PI).sqrt() {
            loop {
                let x: f64 = rng.sample(StandardNormal);
                if x > a && x < b {
                    return x;
                }
            }
        }
        loop {
            let u: f64 = rng.sample(Open01);
            let x = a + (b - a) * u;
            let accept: f64 = rng.sample(Open01);
            if accept <= (-0.5 * x * x).exp() {
                return x;
            }
        }
    }
    // 0 <= a < b
    if b.is_finite() && 0.5 * (b * b - a * a) <= 1.0 {
        loop {
            let u: f64 = rng.sample(Open01);
            let x = a + (b - a) * u;
            let accept: f64 = rng.sample(Open01);
            if accept <= (0.5 * (a * a - x * x)).exp() {
                return x;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / rate;
        if x >= b {
            continue;
        }
        let accept: f64 = rng.sample(Open01);
        if accept <= (-0.5 * (x - rate).powi(2)).exp() {
            return x;
        }
    }
}
