#![allow(dead_code)]

pub mod geweke;

use ame_core::engine::simulate_y;
use ame_core::{CovariateSet, Family, Sociomatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// True parameters of a synthetic directed network.
pub struct Truth {
    pub intercept: f64,
    pub beta_dyad: f64,
    pub va: f64,
    pub vb: f64,
    pub cab: f64,
    pub rho: f64,
    pub s2e: f64,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl Truth {
    pub fn srm(rank: usize, n: usize, rng: &mut ChaCha8Rng) -> Self {
        let f = |rng: &mut ChaCha8Rng| DMatrix::from_fn(n, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u = f(rng);
        let v = f(rng);
        Self {
            intercept: -0.5,
            beta_dyad: 1.0,
            va: 0.5,
            vb: 0.3,
            cab: 0.2,
            rho: 0.5,
            s2e: 1.0,
            u,
            v,
        }
    }
}

pub fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal))
}

/// Draws a directed network of `family` from `truth` with one dyadic
/// covariate; returns the sociomatrix, covariates and latent mean.
pub fn synthetic(
    family: Family,
    n: usize,
    truth: &Truth,
    odmax: Option<&[usize]>,
    seed: u64,
) -> (Sociomatrix, CovariateSet, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, &mut rng);
    let l = nalgebra::Matrix2::new(truth.va, truth.cab, truth.cab, truth.vb).cholesky().unwrap().l();
    let ab: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let z = nalgebra::Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let w = l * z;
            (w[0], w[1])
        })
        .collect();
    let uv = &truth.u * truth.v.transpose();
    let intercept = if family.has_intercept() { truth.intercept } else { 0.0 };
    let mut mean = DMatrix::from_fn(n, n, |i, j| intercept + truth.beta_dyad * x[(i, j)] + ab[i].0 + ab[j].1 + uv[(i, j)]);
    mean.fill_diagonal(0.0);
    let s2 = if family == Family::Nrm { truth.s2e } else { 1.0 };
    // rank families need a reference; a continuous one gives full ranks
    let reference = DMatrix::from_fn(n, n, |i, j| (i * n + j) as f64);
    let y = simulate_y(&mean, truth.rho, s2, family, false, odmax, Some(&reference), &mut rng).unwrap();
    let ord = match family {
        Family::Ord => y.map(|v| (v / (n * n) as f64 * 4.0).floor()),
        Family::Rrl => y.map(|v| (v % n as f64 / n as f64 * 4.0).floor()),
        _ => y,
    };
    let mut c = CovariateSet::new(n);
    c.add_dyadic("x", x).unwrap();
    (Sociomatrix::from_matrix(ord).unwrap(), c, mean)
}

pub fn node_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    ks_two_sample_eff(a, b, a.len() as f64, b.len() as f64)
}

/// As [`ks_two_sample`], with the p-value computed at effective sizes
/// `na_eff` and `nb_eff` (for Markov chain samples).
pub fn ks_two_sample_eff(a: &[f64], b: &[f64], na_eff: f64, nb_eff: f64) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na_eff * nb_eff / (na_eff + nb_eff)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    (d, p.clamp(0.0, 1.0))
}

/// Effective sample size from Geyer's initial positive sequence.
pub fn effective_size(x: &[f64]) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    let acf = |k: usize| (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / n as f64 / c0;
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = acf(k) + acf(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    (n as f64 / tau.max(1.0)).min(n as f64)
}
