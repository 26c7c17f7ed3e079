//! Rank-R multiplicative effects: u_i'v_j for directed data and
//! u_i'Λu_j for undirected data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{inv_gamma, mvn_from_precision};
use crate::error::{Error, Result};

/// Latent factors. Per-draw factors are not identified; only the mean
/// matrix they produce is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LatentFactors {
    Asymmetric { u: DMatrix<f64>, v: DMatrix<f64> },
    Symmetric { u: DMatrix<f64>, lambda: DVector<f64> },
}

impl LatentFactors {
    pub fn zeros(n: usize, rank: usize, symmetric: bool) -> Self {
        if symmetric {
            Self::Symmetric {
                u: DMatrix::zeros(n, rank),
                lambda: DVector::zeros(rank),
            }
        } else {
            Self::Asymmetric {
                u: DMatrix::zeros(n, rank),
                v: DMatrix::zeros(n, rank),
            }
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Self::Asymmetric { u, .. } | Self::Symmetric { u, .. } => u.ncols(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Asymmetric { u, .. } | Self::Symmetric { u, .. } => u.nrows(),
        }
    }

    /// UV' or UΛU'. The diagonal is left as computed.
    pub fn multiplicative_mean(&self) -> DMatrix<f64> {
        match self {
            Self::Asymmetric { u, v } => u * v.transpose(),
            Self::Symmetric { u, lambda } => {
                let ul = u * DMatrix::from_diagonal(lambda);
                let m = ul * u.transpose();
                (&m + m.transpose()) * 0.5
            }
        }
    }
}

/// Hyperparameters of the factor prior: rows ~ N(0, ψ²I) with
/// ψ² ~ inverse-gamma(`shape`, `scale`); Λ entries ~ N(0, `lambda_var`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorPrior {
    pub shape: f64,
    pub scale: f64,
    /// Defaults to n² when unset.
    pub lambda_var: Option<f64>,
}

impl Default for FactorPrior {
    fn default() -> Self {
        Self {
            shape: 2.0,
            scale: 1.0,
            lambda_var: None,
        }
    }
}

/// Row-scale parameters ψ² for U and V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorScales {
    pub u: f64,
    pub v: f64,
}

impl Default for FactorScales {
    fn default() -> Self {
        Self { u: 1.0, v: 1.0 }
    }
}

/// One Gibbs sweep over the rows of U, then V, then the scales ψ².
///
/// `residuals` holds per time point Z minus the regression and additive
/// terms. The pair correlation `rho` enters through the conditional of
/// e_ij given e_ji.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_uv<R: Rng + ?Sized>(
    residuals: &[DMatrix<f64>],
    u: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    s2e: f64,
    rho: f64,
    scales: &mut FactorScales,
    prior: &FactorPrior,
    rng: &mut R,
) -> Result<()> {
    let n = u.nrows();
    let r = u.ncols();
    if r == 0 {
        return Ok(());
    }
    if r > n {
        return Err(Error::RankTooLarge { rank: r, n });
    }
    let k = 1.0 / (s2e * (1.0 - rho * rho));
    let t = residuals.len() as f64;

    // rows of U: e_ij = E_ij - u_i'v_j, paired with e_ji = E_ji - u_j'v_i
    for i in 0..n {
        let mut q = DMatrix::identity(r, r) / scales.u;
        let mut l = DVector::zeros(r);
        for j in (0..n).filter(|&j| j != i) {
            let vj = v.row(j).transpose();
            q += &vj * vj.transpose() * (k * t);
            let uj_vi = u.row(j).dot(&v.row(i));
            for e in residuals {
                l += &vj * (k * (e[(i, j)] - rho * (e[(j, i)] - uj_vi)));
            }
        }
        let draw = mvn_from_precision(q, &l, rng)?;
        u.row_mut(i).copy_from(&draw.transpose());
    }
    // rows of V: e_ij = E_ij - u_i'v_j, paired with e_ji = E_ji - u_j'v_i
    for j in 0..n {
        let mut q = DMatrix::identity(r, r) / scales.v;
        let mut l = DVector::zeros(r);
        for i in (0..n).filter(|&i| i != j) {
            let ui = u.row(i).transpose();
            q += &ui * ui.transpose() * (k * t);
            let uj_vi = u.row(j).dot(&v.row(i));
            for e in residuals {
                l += &ui * (k * (e[(i, j)] - rho * (e[(j, i)] - uj_vi)));
            }
        }
        let draw = mvn_from_precision(q, &l, rng)?;
        v.row_mut(j).copy_from(&draw.transpose());
    }
    let cells = (n * r) as f64;
    scales.u = inv_gamma(prior.shape + cells / 2.0, prior.scale + u.norm_squared() / 2.0, rng);
    scales.v = inv_gamma(prior.shape + cells / 2.0, prior.scale + v.norm_squared() / 2.0, rng);
    Ok(())
}

/// One Gibbs sweep over the rows of U, then Λ, then ψ², for the symmetric
/// model with independent errors on the upper triangle.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_ul_symmetric<R: Rng + ?Sized>(
    residuals: &[DMatrix<f64>],
    u: &mut DMatrix<f64>,
    lambda: &mut DVector<f64>,
    s2e: f64,
    scale: &mut f64,
    prior: &FactorPrior,
    rng: &mut R,
) -> Result<()> {
    let n = u.nrows();
    let r = u.ncols();
    if r == 0 {
        return Ok(());
    }
    if r > n {
        return Err(Error::RankTooLarge { rank: r, n });
    }
    for e in residuals {
        if let Some((i, j)) = asymmetric_cell(e) {
            return Err(Error::Asymmetric(i, j));
        }
    }
    let k = 1.0 / s2e;
    let t = residuals.len() as f64;
    for i in 0..n {
        let draw = draw_symmetric_row(residuals, u, lambda, s2e, *scale, i, rng)?;
        u.row_mut(i).copy_from(&draw.transpose());
    }
    // Λ: regression of e_ij on (u_ik u_jk)_k over i < j
    let lambda_var = prior.lambda_var.unwrap_or((n * n) as f64);
    let mut q = DMatrix::identity(r, r) / lambda_var;
    let mut l = DVector::zeros(r);
    for i in 0..n {
        for j in i + 1..n {
            let x = u.row(i).transpose().component_mul(&u.row(j).transpose());
            q += &x * x.transpose() * (k * t);
            for e in residuals {
                l += &x * (k * e[(i, j)]);
            }
        }
    }
    *lambda = mvn_from_precision(q, &l, rng)?;
    let cells = (n * r) as f64;
    *scale = inv_gamma(prior.shape + cells / 2.0, prior.scale + u.norm_squared() / 2.0, rng);
    Ok(())
}

/// Draw of row `i` of U given the other rows, Λ and ψ².
fn draw_symmetric_row<R: Rng + ?Sized>(
    residuals: &[DMatrix<f64>],
    u: &DMatrix<f64>,
    lambda: &DVector<f64>,
    s2e: f64,
    scale: f64,
    i: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (n, r) = u.shape();
    let k = 1.0 / s2e;
    let t = residuals.len() as f64;
    let mut q = DMatrix::identity(r, r) / scale;
    let mut l = DVector::zeros(r);
    for j in (0..n).filter(|&j| j != i) {
        let x = u.row(j).transpose().component_mul(lambda);
        q += &x * x.transpose() * (k * t);
        for e in residuals {
            l += &x * (k * e[(i, j)]);
        }
    }
    mvn_from_precision(q, &l, rng)
}

fn asymmetric_cell(e: &DMatrix<f64>) -> Option<(usize, usize)> {
    let n = e.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (e[(i, j)], e[(j, i)]);
            if (x - y).abs() > 1e-9 * (1.0 + x.abs().max(y.abs())) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Starting factors from the top-R singular pairs of the residual matrix
/// (diagonal zeroed), split as U = L√D, V = R√D.
pub fn init_asymmetric(residual: &DMatrix<f64>, rank: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = residual.nrows();
    if rank > n {
        return Err(Error::RankTooLarge { rank, n });
    }
    let mut e = residual.clone();
    e.fill_diagonal(0.0);
    Ok(top_singular(&e, rank))
}

/// Starting symmetric factors from the R eigenpairs of largest magnitude.
pub fn init_symmetric(residual: &DMatrix<f64>, rank: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = residual.nrows();
    if rank > n {
        return Err(Error::RankTooLarge { rank, n });
    }
    let mut e = (residual + residual.transpose()) * 0.5;
    e.fill_diagonal(0.0);
    Ok(top_eigen(&e, rank))
}

fn top_singular(m: &DMatrix<f64>, rank: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let left = svd.u.expect("requested");
    let right = svd.v_t.expect("requested").transpose();
    let mut u = DMatrix::zeros(n, rank);
    let mut v = DMatrix::zeros(n, rank);
    for (c, &k) in order.iter().take(rank).enumerate() {
        let s = svd.singular_values[k].sqrt();
        u.set_column(c, &(left.column(k) * s));
        v.set_column(c, &(right.column(k) * s));
    }
    (u, v)
}

fn top_eigen(m: &DMatrix<f64>, rank: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let mut u = DMatrix::zeros(n, rank);
    let mut lambda = DVector::zeros(rank);
    for (c, &k) in order.iter().take(rank).enumerate() {
        let mut col = eig.eigenvectors.column(k).into_owned();
        // fix the sign so the largest-magnitude entry is positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        u.set_column(c, &col);
        lambda[c] = eig.eigenvalues[k];
    }
    (u, lambda)
}

/// Point-estimate factors of a posterior-mean matrix: U = L√D, V = R√D
/// from its SVD.
pub fn posthoc_asymmetric(uvpm: &DMatrix<f64>, rank: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    top_singular(uvpm, rank)
}

/// Unit-norm eigenvectors and eigenvalues of the R largest-magnitude
/// eigenvalues of a posterior-mean matrix.
pub fn posthoc_symmetric(m: &DMatrix<f64>, rank: usize) -> (DMatrix<f64>, DVector<f64>) {
    top_eigen(&((m + m.transpose()) * 0.5), rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random(n: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, r, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn rank_zero_mean_is_zero() {
        assert_eq!(LatentFactors::zeros(5, 0, false).multiplicative_mean(), DMatrix::zeros(5, 5));
        assert_eq!(LatentFactors::zeros(5, 0, true).multiplicative_mean(), DMatrix::zeros(5, 5));
    }

    #[test]
    fn basis_vector_outer_product() {
        let mut e1 = DMatrix::zeros(4, 1);
        e1[(0, 0)] = 1.0;
        let f = LatentFactors::Asymmetric { u: e1.clone(), v: e1.clone() };
        let m = f.multiplicative_mean();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(0, 0)] = 1.0;
        assert_eq!(m, expected);
    }

    #[test]
    fn mean_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (u, v) = (random(6, 2, &mut rng), random(6, 2, &mut rng));
        let m = LatentFactors::Asymmetric { u: u.clone(), v: v.clone() }.multiplicative_mean();
        for i in 0..6 {
            for j in 0..6 {
                let direct: f64 = (0..2).map(|k| u[(i, k)] * v[(j, k)]).sum();
                assert!((m[(i, j)] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for r in 1..=3 {
            let (u, v) = (random(7, r, &mut rng), random(7, r, &mut rng));
            let g = random(r, r, &mut rng).qr().q();
            let m0 = LatentFactors::Asymmetric { u: u.clone(), v: v.clone() }.multiplicative_mean();
            let m1 = LatentFactors::Asymmetric { u: &u * &g, v: &v * &g }.multiplicative_mean();
            let scale = m0.amax().max(1.0);
            assert!((m0 - m1).amax() <= 64.0 * f64::EPSILON * scale);
        }
    }

    #[test]
    fn symmetric_mean_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random(6, 2, &mut rng);
        let lambda = DVector::from_vec(vec![2.5, -1.3]);
        let m = LatentFactors::Symmetric { u, lambda }.multiplicative_mean();
        assert_eq!((&m - m.transpose()).amax(), 0.0);
    }

    #[test]
    fn noiseless_recovery_asymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10;
        let (u0, v0) = (random(n, 2, &mut rng), random(n, 2, &mut rng));
        let e = &u0 * v0.transpose();
        let (mut u, mut v) = init_asymmetric(&e, 2).unwrap();
        let mut scales = FactorScales::default();
        for _ in 0..50 {
            gibbs_uv(&[e.clone()], &mut u, &mut v, 1e-8, 0.0, &mut scales, &FactorPrior::default(), &mut rng)
                .unwrap();
        }
        let mut diff = &u * v.transpose() - &e;
        diff.fill_diagonal(0.0);
        assert!(diff.amax() < 1e-2, "{}", diff.amax());
    }

    #[test]
    fn noiseless_recovery_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10;
        let u0 = random(n, 1, &mut rng);
        let e = &u0 * u0.transpose() * 3.0;
        let (mut u, mut lambda) = init_symmetric(&e, 1).unwrap();
        let mut scale = 1.0;
        for _ in 0..50 {
            gibbs_ul_symmetric(&[e.clone()], &mut u, &mut lambda, 1e-8, &mut scale, &FactorPrior::default(), &mut rng)
                .unwrap();
        }
        let m = LatentFactors::Symmetric { u, lambda }.multiplicative_mean();
        let mut diff = m - &e;
        diff.fill_diagonal(0.0);
        assert!(diff.amax() < 1e-2, "{}", diff.amax());
    }

    #[test]
    fn symmetric_row_conditional_matches_grid() {
        // One row of U with R = 1: the full conditional is Gaussian with
        // precision Σ_j (λu_j)²/s2 + 1/ψ² and mean l/q. Check the sampler's
        // draws against a grid evaluation of the unnormalized log density.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 6;
        let s2 = 0.7;
        let psi2 = 1.3;
        let lambda = DVector::from_vec(vec![1.8]);
        let u = random(n, 1, &mut rng);
        let mut e = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        e = (&e + e.transpose()) * 0.5;
        let logdens = |x: f64| {
            let mut acc = -x * x / (2.0 * psi2);
            for j in 1..n {
                let r = e[(0, j)] - x * lambda[0] * u[(j, 0)];
                acc -= r * r / (2.0 * s2);
            }
            acc
        };
        let grid: Vec<f64> = (0..20001).map(|k| -10.0 + k as f64 * 0.001).collect();
        let w: Vec<f64> = grid.iter().map(|&x| logdens(x)).collect();
        let mx = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ws: Vec<f64> = w.iter().map(|v| (v - mx).exp()).collect();
        let tot: f64 = ws.iter().sum();
        let gm = grid.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / tot;
        let gv = grid.iter().zip(&ws).map(|(x, w)| (x - gm).powi(2) * w).sum::<f64>() / tot;

        let reps = 20_000;
        let draws: Vec<f64> = (0..reps)
            .map(|_| draw_symmetric_row(&[e.clone()], &u, &lambda, s2, psi2, 0, &mut rng).unwrap()[0])
            .collect();
        let m = crate::stats::mean(&draws);
        let v = crate::stats::var(&draws);
        assert!((m - gm).abs() < 4.0 * (gv / reps as f64).sqrt(), "{m} vs {gm}");
        assert!((v / gv - 1.0).abs() < 0.05, "{v} vs {gv}");
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e = random(4, 4, &mut rng);
        let mut u = random(4, 1, &mut rng);
        let mut lambda = DVector::from_vec(vec![1.0]);
        let mut s = 1.0;
        assert!(matches!(
            gibbs_ul_symmetric(&[e], &mut u, &mut lambda, 1.0, &mut s, &FactorPrior::default(), &mut rng),
            Err(Error::Asymmetric(..))
        ));
    }

    #[test]
    fn rank_larger_than_n_is_rejected() {
        assert!(matches!(
            init_asymmetric(&DMatrix::zeros(3, 3), 4),
            Err(Error::RankTooLarge { .. })
        ));
    }

    #[test]
    fn posthoc_factors_reproduce_low_rank_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (u0, v0) = (random(8, 2, &mut rng), random(8, 2, &mut rng));
        let m = &u0 * v0.transpose();
        let (u, v) = posthoc_asymmetric(&m, 2);
        assert!((u * v.transpose() - &m).amax() < 1e-10);
        let s = &u0 * u0.transpose();
        let (us, l) = posthoc_symmetric(&s, 2);
        assert!((&us * DMatrix::from_diagonal(&l) * us.transpose() - &s).amax() < 1e-10);
        for c in 0..2 {
            assert!((us.column(c).norm() - 1.0).abs() < 1e-12);
        }
    }
}
