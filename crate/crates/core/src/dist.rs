//! Multivariate draws used by the conjugate updates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Draw from N(Q⁻¹ l, Q⁻¹) given the precision `q` and linear term `l`.
pub fn mvn_from_precision<R: Rng + ?Sized>(
    q: DMatrix<f64>,
    l: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let dim = l.len();
    let chol = q
        .cholesky()
        .ok_or_else(|| Error::Degenerate("precision matrix is not positive definite".into()))?;
    let mean = chol.solve(l);
    let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    // L' x = z  =>  x ~ N(0, (LL')⁻¹)
    let lt = chol.l().transpose();
    let x = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    Ok(mean + x)
}

/// Wishart(`scale`, `df`) draw via the Bartlett decomposition.
pub fn wishart<R: Rng + ?Sized>(scale: &DMatrix<f64>, df: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if df <= (p as f64) - 1.0 {
        return Err(Error::Degenerate(format!(
            "Wishart degrees of freedom {df} too small for dimension {p}"
        )));
    }
    let l = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("Wishart scale is not positive definite".into()))?
        .l();
    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).expect("positive degrees of freedom");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = &l * a;
    Ok(&la * la.transpose())
}

/// Inverse-Wishart draw with scale matrix `scale` (so that the mean is
/// `scale / (df - p - 1)`).
pub fn inv_wishart<R: Rng + ?Sized>(
    scale: &DMatrix<f64>,
    df: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let scale_inv = scale
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("inverse-Wishart scale is singular".into()))?;
    let w = wishart(&symmetrize(scale_inv), df, rng)?;
    let sigma = w
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("Wishart draw is singular".into()))?;
    Ok(symmetrize(sigma))
}

/// Inverse-gamma draw with density ∝ x^(-shape-1) exp(-scale/x).
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("positive inverse-gamma parameters");
    1.0 / g.sample(rng)
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
