//! Regression design for the dyadic linear predictor
//! β_d'x_{d,ij} + β_r'x_{r,i} + β_c'x_{c,j}, plus covariate builders.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::data::{CovariateSet, LongitudinalData, Sociomatrix};
use crate::error::{Error, Result};

/// An n×n×p design array stored as p slices.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignTensor {
    n: usize,
    names: Vec<String>,
    slices: Vec<DMatrix<f64>>,
    /// Cells whose design row could not be formed (missing lag values).
    incomplete: DMatrix<bool>,
    symmetric: bool,
}

impl DesignTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.slices.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &DMatrix<f64> {
        &self.slices[k]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_incomplete(&self, i: usize, j: usize) -> bool {
        self.incomplete[(i, j)]
    }

    pub fn has_incomplete(&self) -> bool {
        self.incomplete.iter().any(|&b| b)
    }

    /// Design row for cell (i, j).
    pub fn row(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.p(), self.slices.iter().map(|s| s[(i, j)]))
    }

    /// Σ_k β_k X_k; zero diagonal.
    pub fn linear_predictor(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(beta.len(), self.p(), "coefficient length");
        let mut out = DMatrix::zeros(self.n, self.n);
        for (b, s) in beta.iter().zip(&self.slices) {
            out += s * *b;
        }
        out.fill_diagonal(0.0);
        out
    }

    /// Copy of `y` with cells of incomplete design rows marked missing.
    pub fn mask_outcome(&self, y: &Sociomatrix) -> Sociomatrix {
        let mut out = y.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.incomplete[(i, j)] {
                    out.set(i, j, None);
                }
            }
        }
        out
    }
}

/// Builds the design for `y` from covariates `c`.
///
/// Asymmetric slices are ordered intercept, `*.row`, `*.col`, `*.dyad`.
/// Symmetric designs use `*.node` slices holding x_i + x_j (from the row
/// covariates) and average each directed dyadic covariate with its
/// transpose.
pub fn build_design(
    y: &Sociomatrix,
    c: &CovariateSet,
    intercept: bool,
    symmetric: bool,
) -> Result<DesignTensor> {
    let n = y.n();
    if c.n() != n && !c.is_empty() {
        return Err(Error::Dimension(format!(
            "covariates for {} nodes, sociomatrix has {n}",
            c.n()
        )));
    }
    let mut names = Vec::new();
    let mut slices = Vec::new();
    let mut incomplete = DMatrix::from_element(n, n, false);

    if intercept {
        names.push("intercept".to_string());
        slices.push(off_diagonal(DMatrix::from_element(n, n, 1.0)));
    }
    if symmetric {
        for cov in c.row() {
            names.push(format!("{}.node", cov.name));
            let x = &cov.values;
            slices.push(off_diagonal(DMatrix::from_fn(n, n, |i, j| x[i] + x[j])));
        }
    } else {
        for cov in c.row() {
            names.push(format!("{}.row", cov.name));
            let x = &cov.values;
            slices.push(off_diagonal(DMatrix::from_fn(n, n, |i, _| x[i])));
        }
        for cov in c.col() {
            names.push(format!("{}.col", cov.name));
            let x = &cov.values;
            slices.push(off_diagonal(DMatrix::from_fn(n, n, |_, j| x[j])));
        }
    }
    for cov in c.dyadic() {
        names.push(format!("{}.dyad", cov.name));
        let mut x = if symmetric {
            (&cov.values + cov.values.transpose()) * 0.5
        } else {
            cov.values.clone()
        };
        for i in 0..n {
            for j in 0..n {
                if i != j && x[(i, j)].is_nan() {
                    incomplete[(i, j)] = true;
                    x[(i, j)] = 0.0;
                }
            }
        }
        slices.push(off_diagonal(x));
    }

    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(Error::NameCollision(name.clone()));
        }
    }
    Ok(DesignTensor {
        n,
        names,
        slices,
        incomplete,
        symmetric,
    })
}

fn off_diagonal(mut m: DMatrix<f64>) -> DMatrix<f64> {
    m.fill_diagonal(0.0);
    m
}

/// out[i][j] = xr[i]·xc[j].
pub fn nodal_product(xr: &[f64], xc: &[f64]) -> Result<DMatrix<f64>> {
    if xr.len() != xc.len() {
        return Err(Error::Dimension(format!(
            "nodal vectors of length {} and {}",
            xr.len(),
            xc.len()
        )));
    }
    let n = xr.len();
    Ok(DMatrix::from_fn(n, n, |i, j| xr[i] * xc[j]))
}

/// out[i][j] = 1 if x[i] == x[j], else 0.
pub fn same_category<T: PartialEq>(x: &[T]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| if x[i] == x[j] { 1.0 } else { 0.0 })
}

/// Lagged outcomes: element `t - 1` of the result holds Y_{t-1} (or its
/// transpose) as the covariate for time `t`, for t = 1..T-1. Missing
/// outcome cells stay `NaN`.
pub fn lag_dyadic(data: &LongitudinalData, transpose: bool) -> Result<Vec<DMatrix<f64>>> {
    let t = data.t();
    if t < 2 {
        return Err(Error::TooFewTimePoints { needed: 2, got: t });
    }
    Ok(data.slices()[..t - 1]
        .iter()
        .map(|y| {
            let v = y.values();
            if transpose {
                v.transpose()
            } else {
                v.clone()
            }
        })
        .collect())
}
