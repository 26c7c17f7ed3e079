//! Social relations covariance model: the implied covariance map and the
//! conjugate updates for regression coefficients, additive effects, their
//! covariance and the within-dyad error covariance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::DesignTensor;
use crate::dist::{inv_gamma, inv_wishart, mvn_from_precision};
use crate::error::{Error, Result};

/// Variance components of the additive effects and dyadic errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmParams {
    /// [[σ²_a, σ_ab], [σ_ab, σ²_b]]
    pub sigma_ab: DMatrix<f64>,
    pub rho: f64,
    pub s2e: f64,
}

impl SrmParams {
    pub fn new(va: f64, cab: f64, vb: f64, rho: f64, s2e: f64) -> Self {
        Self {
            sigma_ab: DMatrix::from_row_slice(2, 2, &[va, cab, cab, vb]),
            rho,
            s2e,
        }
    }

    pub fn va(&self) -> f64 {
        self.sigma_ab[(0, 0)]
    }

    pub fn cab(&self) -> f64 {
        self.sigma_ab[(0, 1)]
    }

    pub fn vb(&self) -> f64 {
        self.sigma_ab[(1, 1)]
    }
}

/// Sender and receiver effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveEffects {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

impl AdditiveEffects {
    pub fn zeros(n: usize) -> Self {
        Self {
            a: DVector::zeros(n),
            b: DVector::zeros(n),
        }
    }

    /// a_i + b_j with zero diagonal.
    pub fn mean(&self) -> DMatrix<f64> {
        let n = self.a.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { self.a[i] + self.b[j] })
    }
}

/// The covariances of a single relation implied by the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrmCovariances {
    /// Var(y_ij)
    pub var: f64,
    /// Cov(y_ij, y_ik)
    pub within_row: f64,
    /// Cov(y_ij, y_kj)
    pub within_col: f64,
    /// Cov(y_ij, y_ki)
    pub row_col: f64,
    /// Cov(y_ij, y_ji)
    pub reciprocal: f64,
}

pub fn srm_covariances(p: &SrmParams) -> SrmCovariances {
    let (va, cab, vb) = (p.va(), p.cab(), p.vb());
    SrmCovariances {
        // a_i and b_j belong to different nodes, so σ_ab does not enter
        var: va + vb + p.s2e,
        within_row: va,
        within_col: vb,
        row_col: cab,
        reciprocal: 2.0 * cab + p.rho * p.s2e,
    }
}

/// Which additive effects are in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectFlags {
    pub rvar: bool,
    pub cvar: bool,
}

/// Design cross-products that do not change between sweeps.
#[derive(Debug, Clone)]
pub struct DesignGram {
    n: usize,
    t: usize,
    /// Σ x_ij x_ij'
    s0: DMatrix<f64>,
    /// Σ x_ij x_ji'
    s1: DMatrix<f64>,
    /// row k: row sums of slice k, summed over time
    rowsum: DMatrix<f64>,
    colsum: DMatrix<f64>,
    symmetric: bool,
}

impl DesignGram {
    /// Precomputes cross-products over all time points. Symmetric designs
    /// sum over the upper triangle only.
    pub fn new(designs: &[DesignTensor]) -> Self {
        let n = designs[0].n();
        let p = designs[0].p();
        let symmetric = designs[0].is_symmetric();
        let mut s0 = DMatrix::zeros(p, p);
        let mut s1 = DMatrix::zeros(p, p);
        let mut rowsum = DMatrix::zeros(p, n);
        let mut colsum = DMatrix::zeros(p, n);
        for d in designs {
            for k in 0..p {
                let xk = d.slice(k);
                for l in 0..n {
                    rowsum[(k, l)] += xk.row(l).sum();
                    colsum[(k, l)] += xk.column(l).sum();
                }
                for m in k..p {
                    let xm = d.slice(m);
                    let (same, cross) = if symmetric {
                        (xk.upper_triangle().dot(&xm.upper_triangle()) , 0.0)
                    } else {
                        (xk.dot(xm), xk.dot(&xm.transpose()))
                    };
                    s0[(k, m)] += same;
                    s0[(m, k)] = s0[(k, m)];
                    s1[(k, m)] += cross;
                    s1[(m, k)] = s1[(k, m)];
                }
            }
        }
        Self {
            n,
            t: designs.len(),
            s0,
            s1,
            rowsum,
            colsum,
            symmetric,
        }
    }

    pub fn p(&self) -> usize {
        self.s0.nrows()
    }

    /// Fails when the design slices are linearly dependent, naming the
    /// slices involved.
    pub fn check_rank(&self, names: &[String]) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Ok(());
        }
        let scale = DVector::from_fn(p, |k, _| {
            let d = self.s0[(k, k)];
            if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
        });
        if let Some(k) = (0..p).find(|&k| scale[k] == 0.0) {
            return Err(Error::SingularDesign(vec![names[k].clone()]));
        }
        let normed = DMatrix::from_fn(p, p, |i, j| self.s0[(i, j)] * scale[i] * scale[j]);
        let eig = normed.symmetric_eigen();
        let (imin, &lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        if lmin < 1e-10 {
            let v = eig.eigenvectors.column(imin);
            let involved = (0..p)
                .filter(|&k| v[k].abs() > 1e-3)
                .map(|k| names[k].clone())
                .collect();
            return Err(Error::SingularDesign(involved));
        }
        Ok(())
    }
}

/// Draws (β, a, b) jointly from their Gaussian full conditional.
///
/// `targets` holds, per time point, the latent or observed matrix with the
/// multiplicative term already subtracted. Errors within a dyad pair have
/// covariance s2e·[[1, ρ], [ρ, 1]].
#[allow(clippy::too_many_arguments)]
pub fn gibbs_beta_ab<R: Rng + ?Sized>(
    targets: &[DMatrix<f64>],
    designs: &[DesignTensor],
    gram: &DesignGram,
    params: &SrmParams,
    flags: EffectFlags,
    beta_var: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, AdditiveEffects)> {
    let n = gram.n;
    let p = gram.p();
    let t = gram.t as f64;
    let rho = params.rho;
    let k = 1.0 / (params.s2e * (1.0 - rho * rho));
    let ia = flags.rvar.then_some(p);
    let ib = flags.cvar.then_some(p + if flags.rvar { n } else { 0 });
    let dim = p + n * (flags.rvar as usize + flags.cvar as usize);

    let mut q = DMatrix::zeros(dim, dim);
    let mut l = DVector::zeros(dim);

    q.view_mut((0, 0), (p, p))
        .copy_from(&((&gram.s0 - &gram.s1 * rho) * k));
    let nm1 = n as f64 - 1.0;
    // aa = bb = T((n-1)I - ρ(J-I)); ab = T((J-I) - ρ(n-1)I)
    let aa = |i: usize, j: usize| if i == j { t * nm1 } else { -t * rho };
    let ab = |i: usize, j: usize| if i == j { -t * rho * nm1 } else { t };
    for (idx, rs, cs) in [(ia, &gram.rowsum, &gram.colsum), (ib, &gram.colsum, &gram.rowsum)] {
        let Some(o) = idx else { continue };
        for c in 0..p {
            for m in 0..n {
                let v = k * (rs[(c, m)] - rho * cs[(c, m)]);
                q[(c, o + m)] = v;
                q[(o + m, c)] = v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                q[(o + i, o + j)] = k * aa(i, j);
            }
        }
    }
    if let (Some(oa), Some(ob)) = (ia, ib) {
        for i in 0..n {
            for j in 0..n {
                q[(oa + i, ob + j)] = k * ab(i, j);
                q[(ob + j, oa + i)] = k * ab(i, j);
            }
        }
    }

    for (z, d) in targets.iter().zip(designs) {
        let mut w = z - z.transpose() * rho;
        w.fill_diagonal(0.0);
        for c in 0..p {
            l[c] += k * d.slice(c).dot(&w);
        }
        if let Some(o) = ia {
            for i in 0..n {
                l[o + i] += k * w.row(i).sum();
            }
        }
        if let Some(o) = ib {
            for j in 0..n {
                l[o + j] += k * w.column(j).sum();
            }
        }
    }

    for c in 0..p {
        q[(c, c)] += 1.0 / beta_var;
    }
    match (ia, ib) {
        (Some(oa), Some(ob)) => {
            let sinv = params
                .sigma_ab
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Degenerate("Sigma_ab is singular".into()))?;
            for i in 0..n {
                q[(oa + i, oa + i)] += sinv[(0, 0)];
                q[(ob + i, ob + i)] += sinv[(1, 1)];
                q[(oa + i, ob + i)] += sinv[(0, 1)];
                q[(ob + i, oa + i)] += sinv[(1, 0)];
            }
        }
        (Some(oa), None) => {
            for i in 0..n {
                q[(oa + i, oa + i)] += 1.0 / params.va();
            }
        }
        (None, Some(ob)) => {
            for i in 0..n {
                q[(ob + i, ob + i)] += 1.0 / params.vb();
            }
        }
        (None, None) => {}
    }

    let theta = mvn_from_precision(q, &l, rng)?;
    let beta = theta.rows(0, p).into_owned();
    let a = ia.map_or_else(|| DVector::zeros(n), |o| theta.rows(o, n).into_owned());
    let b = ib.map_or_else(|| DVector::zeros(n), |o| theta.rows(o, n).into_owned());
    Ok((beta, AdditiveEffects { a, b }))
}

/// Draws (β, a) for the symmetric model z_ij = β'x_ij + a_i + a_j + e_ij,
/// i < j, with independent errors of variance `s2e`.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_beta_a_symmetric<R: Rng + ?Sized>(
    targets: &[DMatrix<f64>],
    designs: &[DesignTensor],
    gram: &DesignGram,
    va: f64,
    s2e: f64,
    rvar: bool,
    beta_var: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    debug_assert!(gram.symmetric);
    let n = gram.n;
    let p = gram.p();
    let t = gram.t as f64;
    let dim = p + if rvar { n } else { 0 };
    let k = 1.0 / s2e;
    let mut q = DMatrix::zeros(dim, dim);
    let mut l = DVector::zeros(dim);
    q.view_mut((0, 0), (p, p)).copy_from(&(&gram.s0 * k));
    if rvar {
        for c in 0..p {
            for m in 0..n {
                q[(c, p + m)] = k * gram.rowsum[(c, m)];
                q[(p + m, c)] = k * gram.rowsum[(c, m)];
            }
        }
        // Σ_{i<j} (e_i + e_j)(e_i + e_j)' = (n-2)I + J
        for i in 0..n {
            for j in 0..n {
                q[(p + i, p + j)] = k * t * if i == j { n as f64 - 1.0 } else { 1.0 };
            }
            q[(p + i, p + i)] += 1.0 / va;
        }
    }
    for (z, d) in targets.iter().zip(designs) {
        let upper = z.upper_triangle() - DMatrix::from_diagonal(&z.diagonal());
        for c in 0..p {
            l[c] += k * d.slice(c).upper_triangle().dot(&upper);
        }
        if rvar {
            for i in 0..n {
                l[p + i] += k * (0..n).filter(|&j| j != i).map(|j| z[(i, j)]).sum::<f64>();
            }
        }
    }
    for c in 0..p {
        q[(c, c)] += 1.0 / beta_var;
    }
    let theta = mvn_from_precision(q, &l, rng)?;
    let beta = theta.rows(0, p).into_owned();
    let a = if rvar {
        theta.rows(p, n).into_owned()
    } else {
        DVector::zeros(n)
    };
    Ok((beta, a))
}

/// Conjugate prior for Σ_ab: inverse-Wishart(`scale`·I, `df`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariancePrior {
    pub scale: f64,
    pub df: f64,
}

impl Default for CovariancePrior {
    fn default() -> Self {
        Self { scale: 1.0, df: 4.0 }
    }
}

impl CovariancePrior {
    /// The inverse-gamma marginal of one diagonal element.
    fn marginal(&self) -> (f64, f64) {
        ((self.df - 1.0) / 2.0, self.scale / 2.0)
    }
}

/// Draws Σ_ab given the additive effects. With only one of the effects in
/// the model the other variance is returned as zero.
pub fn gibbs_sigma_ab<R: Rng + ?Sized>(
    ab: &AdditiveEffects,
    flags: EffectFlags,
    prior: &CovariancePrior,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = ab.a.len() as f64;
    match (flags.rvar, flags.cvar) {
        (true, true) => {
            let mut s = DMatrix::identity(2, 2) * prior.scale;
            for (a, b) in ab.a.iter().zip(ab.b.iter()) {
                s[(0, 0)] += a * a;
                s[(0, 1)] += a * b;
                s[(1, 0)] += a * b;
                s[(1, 1)] += b * b;
            }
            inv_wishart(&s, prior.df + n, rng)
        }
        (rvar, cvar) => {
            let (shape, scale) = prior.marginal();
            let mut out = DMatrix::zeros(2, 2);
            if rvar {
                out[(0, 0)] = inv_gamma(shape + n / 2.0, scale + ab.a.norm_squared() / 2.0, rng);
            }
            if cvar {
                out[(1, 1)] = inv_gamma(shape + n / 2.0, scale + ab.b.norm_squared() / 2.0, rng);
            }
            Ok(out)
        }
    }
}

/// Draws the variance of symmetric-model node effects.
pub fn gibbs_va_symmetric<R: Rng + ?Sized>(
    a: &DVector<f64>,
    prior: &CovariancePrior,
    rng: &mut R,
) -> f64 {
    let (shape, scale) = prior.marginal();
    inv_gamma(shape + a.len() as f64 / 2.0, scale + a.norm_squared() / 2.0, rng)
}

/// Prior on the within-dyad error covariance: the sum and difference
/// variances s2e(1 ± ρ) are independent inverse-gamma(`shape`, `scale`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for PairPrior {
    fn default() -> Self {
        Self { shape: 1.5, scale: 0.5 }
    }
}

/// Sufficient statistics of residual pairs (e_ij, e_ji), i < j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub pairs: f64,
    /// Σ (e_ij² + e_ji²)
    pub sum_sq: f64,
    /// Σ e_ij e_ji
    pub cross: f64,
}

impl PairStats {
    pub fn new(residuals: &[DMatrix<f64>]) -> Self {
        let mut out = Self { pairs: 0.0, sum_sq: 0.0, cross: 0.0 };
        for e in residuals {
            let n = e.nrows();
            for i in 0..n {
                for j in i + 1..n {
                    let (x, y) = (e[(i, j)], e[(j, i)]);
                    out.pairs += 1.0;
                    out.sum_sq += x * x + y * y;
                    out.cross += x * y;
                }
            }
        }
        out
    }

    /// Σ s² and Σ d² for s, d = (e_ij ± e_ji)/√2.
    pub fn sum_and_difference(&self) -> (f64, f64) {
        (
            0.5 * self.sum_sq + self.cross,
            0.5 * self.sum_sq - self.cross,
        )
    }

    /// Log-likelihood of the pairs at correlation `rho` and variance `s2e`.
    pub fn log_lik(&self, rho: f64, s2e: f64) -> f64 {
        let det = 1.0 - rho * rho;
        -self.pairs * (det.ln() + 2.0 * s2e.ln()) / 2.0
            - (self.sum_sq - 2.0 * rho * self.cross) / (2.0 * s2e * det)
    }
}

/// Conjugate draw of (ρ, s2e) for Gaussian outcomes. When `dcor` is off ρ
/// is fixed at zero and only s2e is drawn.
pub fn gibbs_dyadic_cov<R: Rng + ?Sized>(
    residuals: &[DMatrix<f64>],
    dcor: bool,
    prior: &PairPrior,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let stats = PairStats::new(residuals);
    if stats.pairs < 2.0 {
        return Err(Error::Degenerate("fewer than two complete dyads".into()));
    }
    if !dcor {
        let cells = 2.0 * stats.pairs;
        let s2 = inv_gamma(
            prior.shape + cells / 2.0,
            prior.scale + stats.sum_sq / 2.0,
            rng,
        );
        return Ok((0.0, s2));
    }
    let (ss, dd) = stats.sum_and_difference();
    let vp = inv_gamma(prior.shape + stats.pairs / 2.0, prior.scale + ss / 2.0, rng);
    let vm = inv_gamma(prior.shape + stats.pairs / 2.0, prior.scale + dd / 2.0, rng);
    let s2 = (vp + vm) / 2.0;
    let rho = ((vp - vm) / (vp + vm)).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
    Ok((rho, s2))
}

/// Draws the error variance of the symmetric Gaussian model.
pub fn gibbs_s2_symmetric<R: Rng + ?Sized>(
    residuals: &[DMatrix<f64>],
    prior: &PairPrior,
    rng: &mut R,
) -> f64 {
    let mut cells = 0.0;
    let mut ss = 0.0;
    for e in residuals {
        let n = e.nrows();
        for i in 0..n {
            for j in i + 1..n {
                cells += 1.0;
                ss += e[(i, j)] * e[(i, j)];
            }
        }
    }
    inv_gamma(prior.shape + cells / 2.0, prior.scale + ss / 2.0, rng)
}

/// Random-walk Metropolis update of ρ for unit-variance latent errors,
/// uniform prior on (−1, 1). Proposals are reflected at ±1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSampler {
    pub step: f64,
    accepted: usize,
    proposed: usize,
}

impl Default for RhoSampler {
    fn default() -> Self {
        Self {
            step: 0.1,
            accepted: 0,
            proposed: 0,
        }
    }
}

impl RhoSampler {
    pub fn draw<R: Rng + ?Sized>(
        &mut self,
        rho: f64,
        residuals: &[DMatrix<f64>],
        steps: usize,
        rng: &mut R,
    ) -> f64 {
        let stats = PairStats::new(residuals);
        let mut rho = rho;
        let mut current = stats.log_lik(rho, 1.0);
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            let prop = reflect(rho + self.step * z);
            let ll = stats.log_lik(prop, 1.0);
            self.proposed += 1;
            if rng.random::<f64>().ln() < ll - current {
                rho = prop;
                current = ll;
                self.accepted += 1;
            }
        }
        rho
    }

    /// Rescales the step toward a 0.3–0.5 acceptance rate and resets the
    /// counters. Called during burn-in only.
    pub fn adapt(&mut self) {
        if self.proposed == 0 {
            return;
        }
        let rate = self.accepted as f64 / self.proposed as f64;
        if rate < 0.3 {
            self.step *= 0.8;
        } else if rate > 0.5 {
            self.step = (self.step * 1.25).min(1.0);
        }
        self.accepted = 0;
        self.proposed = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }
}

fn reflect(mut x: f64) -> f64 {
    const EDGE: f64 = 1.0 - 1e-9;
    loop {
        if x > EDGE {
            x = 2.0 * EDGE - x;
        } else if x < -EDGE {
            x = -2.0 * EDGE - x;
        } else {
            return x;
        }
    }
}
