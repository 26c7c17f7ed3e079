//! Posterior predictive draws of the observed outcome.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::latent::Family;

/// Draws Z = `mean` + ε and maps it through the family link.
///
/// Directed errors have variance `s2` and within-dyad correlation `rho`;
/// symmetric errors are drawn on the upper triangle and mirrored. ord and
/// rrl match the ranks of Z to the observed values of `reference` (over the
/// whole matrix, or within each row), so they need it; cells missing in
/// `reference` come back missing. frn keeps the top min(d⁺, odmax_i)
/// positive cells of each row coded odmax_i, odmax_i − 1, …; cbin keeps the
/// same cells coded 1. The diagonal is `NaN`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_y<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    rho: f64,
    s2: f64,
    family: Family,
    symmetric: bool,
    odmax: Option<&[usize]>,
    reference: Option<&DMatrix<f64>>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let z = simulate_z(mean, rho, s2, symmetric, rng);
    link(&z, family, symmetric, odmax, reference)
}

/// Draws the latent matrix only.
pub fn simulate_z<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    rho: f64,
    s2: f64,
    symmetric: bool,
    rng: &mut R,
) -> DMatrix<f64> {
    let n = mean.nrows();
    let sd = s2.sqrt();
    let tail = (1.0 - rho * rho).max(0.0).sqrt();
    let mut z = mean.clone();
    for i in 0..n {
        for j in i + 1..n {
            let e1: f64 = rng.sample(StandardNormal);
            if symmetric {
                z[(i, j)] += sd * e1;
                z[(j, i)] = z[(i, j)];
            } else {
                let e2: f64 = rng.sample(StandardNormal);
                z[(i, j)] += sd * e1;
                z[(j, i)] += sd * (rho * e1 + tail * e2);
            }
        }
    }
    z.fill_diagonal(f64::NAN);
    z
}

/// Maps a latent matrix to an outcome of `family`.
pub fn link(
    z: &DMatrix<f64>,
    family: Family,
    symmetric: bool,
    odmax: Option<&[usize]>,
    reference: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    let mut y = DMatrix::from_element(n, n, f64::NAN);
    match family {
        Family::Nrm => {
            y.copy_from(z);
        }
        Family::Bin => {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    y[(i, j)] = if z[(i, j)] > 0.0 { 1.0 } else { 0.0 };
                }
            }
        }
        Family::Frn | Family::Cbin => {
            let odmax = odmax.ok_or_else(|| Error::Spec(format!("{family} simulation needs odmax")))?;
            if odmax.len() != n {
                return Err(Error::Dimension(format!("odmax has length {}, expected {n}", odmax.len())));
            }
            for i in 0..n {
                let mut pos: Vec<usize> = (0..n).filter(|&j| j != i && z[(i, j)] > 0.0).collect();
                pos.sort_by(|&a, &b| z[(i, b)].total_cmp(&z[(i, a)]));
                for j in (0..n).filter(|&j| j != i) {
                    y[(i, j)] = 0.0;
                }
                for (rank, &j) in pos.iter().take(odmax[i]).enumerate() {
                    y[(i, j)] = match family {
                        Family::Frn => (odmax[i] - rank) as f64,
                        _ => 1.0,
                    };
                }
            }
        }
        Family::Ord => {
            let reference = reference.ok_or_else(|| Error::Spec("ord simulation needs observed values".into()))?;
            let cells: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| if symmetric { i < j } else { i != j })
                .filter(|&(i, j)| reference[(i, j)].is_finite())
                .collect();
            rank_match(z, reference, &cells, &mut y);
            if symmetric {
                for i in 0..n {
                    for j in i + 1..n {
                        y[(j, i)] = y[(i, j)];
                    }
                }
            }
        }
        Family::Rrl => {
            let reference = reference.ok_or_else(|| Error::Spec("rrl simulation needs observed values".into()))?;
            for i in 0..n {
                let cells: Vec<(usize, usize)> = (0..n)
                    .filter(|&j| j != i && reference[(i, j)].is_finite())
                    .map(|j| (i, j))
                    .collect();
                rank_match(z, reference, &cells, &mut y);
            }
        }
    }
    Ok(y)
}

fn rank_match(z: &DMatrix<f64>, reference: &DMatrix<f64>, cells: &[(usize, usize)], y: &mut DMatrix<f64>) {
    let mut values: Vec<f64> = cells.iter().map(|&c| reference[c]).collect();
    values.sort_by(f64::total_cmp);
    let mut order = cells.to_vec();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
    for (c, v) in order.into_iter().zip(values) {
        y[c] = v;
    }
}

/// Copy of `y` with the cells missing in `reference` set to `NaN`.
pub fn mask_like(y: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    y.zip_map(reference, |a, r| if r.is_finite() { a } else { f64::NAN })
}
