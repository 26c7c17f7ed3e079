//! Sociomatrices, covariate arrays and longitudinal stacks.
//!
//! Missing cells are stored as `NaN`; the diagonal of a [`Sociomatrix`] is
//! always missing.

pub mod bundled;
mod io;

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

pub use io::{
    load_dyadic_covariates, load_nodal_covariates, load_sociomatrix, load_sociomatrix_path,
    write_nodal_csv, Format,
};

/// An n×n dyadic outcome matrix with undefined diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Sociomatrix {
    labels: Vec<String>,
    values: DMatrix<f64>,
}

impl Sociomatrix {
    /// Builds a sociomatrix, forcing the diagonal to missing.
    pub fn new(labels: Vec<String>, mut values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::NotSquare {
                rows: values.nrows(),
                cols: values.ncols(),
            });
        }
        if labels.len() != values.nrows() {
            return Err(Error::Dimension(format!(
                "{} labels for a {}-node matrix",
                labels.len(),
                values.nrows()
            )));
        }
        check_unique(&labels)?;
        for i in 0..values.nrows() {
            values[(i, i)] = f64::NAN;
        }
        Ok(Self { labels, values })
    }

    /// Sociomatrix with labels "1", "2", ….
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let labels = (1..=values.nrows()).map(|i| i.to_string()).collect();
        Self::new(labels, values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Raw values; missing cells (and the diagonal) are `NaN`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[(i, j)];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        !self.values[(i, j)].is_nan()
    }

    /// Sets a cell; `None` marks it missing. Diagonal writes are ignored.
    pub fn set(&mut self, i: usize, j: usize, value: Option<f64>) {
        if i != j {
            self.values[(i, j)] = value.unwrap_or(f64::NAN);
        }
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    /// Fraction of off-diagonal cells that are missing.
    pub fn missing_fraction(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let total = n * (n - 1);
        (total - self.observed_count()) as f64 / total as f64
    }

    pub fn observed_values(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|v| !v.is_nan()).collect()
    }

    /// First pair of mutually observed cells with different values, if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (self.values[(i, j)], self.values[(j, i)]);
                if !a.is_nan() && !b.is_nan() && a != b {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry().is_none()
    }

    pub fn transpose(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            values: self.values.transpose(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.apply(|v| {
            if !v.is_nan() {
                *v = f(*v)
            }
        });
        out
    }

    /// Observed entries restricted to the given node indices, in that order.
    pub fn select(&self, nodes: &[usize]) -> Self {
        let labels = nodes.iter().map(|&i| self.labels[i].clone()).collect();
        let values = DMatrix::from_fn(nodes.len(), nodes.len(), |r, c| {
            self.values[(nodes[r], nodes[c])]
        });
        Self { labels, values }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_sociomatrix_csv(self, out)
    }

    pub fn write_json<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_sociomatrix_json(self, out)
    }
}

pub(crate) fn check_unique(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// A named covariate slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate<T> {
    pub name: String,
    pub values: T,
}

/// Dyadic, row-nodal and column-nodal covariates for one sociomatrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovariateSet {
    n: usize,
    dyadic: Vec<Covariate<DMatrix<f64>>>,
    row: Vec<Covariate<DVector<f64>>>,
    col: Vec<Covariate<DVector<f64>>>,
}

impl CovariateSet {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Self::default()
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dyadic(&self) -> &[Covariate<DMatrix<f64>>] {
        &self.dyadic
    }

    pub fn row(&self) -> &[Covariate<DVector<f64>>] {
        &self.row
    }

    pub fn col(&self) -> &[Covariate<DVector<f64>>] {
        &self.col
    }

    pub fn is_empty(&self) -> bool {
        self.dyadic.is_empty() && self.row.is_empty() && self.col.is_empty()
    }

    /// Adds a dyadic slice. Off-diagonal entries must be present; the
    /// diagonal is ignored and stored as zero.
    pub fn add_dyadic(&mut self, name: impl Into<String>, values: DMatrix<f64>) -> Result<()> {
        let name = name.into();
        let values = self.check_dyadic(&name, values)?;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && !values[(i, j)].is_finite() {
                    return Err(Error::MissingCovariate(format!(
                        "{name} at ({i}, {j})"
                    )));
                }
            }
        }
        self.dyadic.push(Covariate { name, values });
        Ok(())
    }

    /// Adds a dyadic slice whose missing (`NaN`) entries mark design rows
    /// that cannot be formed, as happens for lagged outcomes.
    pub fn add_dyadic_with_missing(
        &mut self,
        name: impl Into<String>,
        values: DMatrix<f64>,
    ) -> Result<()> {
        let name = name.into();
        let values = self.check_dyadic(&name, values)?;
        self.dyadic.push(Covariate { name, values });
        Ok(())
    }

    fn check_dyadic(&self, name: &str, mut values: DMatrix<f64>) -> Result<DMatrix<f64>> {
        if values.nrows() != self.n || values.ncols() != self.n {
            return Err(Error::Dimension(format!(
                "dyadic covariate {name} is {}x{}, expected {n}x{n}",
                values.nrows(),
                values.ncols(),
                n = self.n
            )));
        }
        for i in 0..self.n {
            values[(i, i)] = 0.0;
        }
        Ok(values)
    }

    pub fn add_row(&mut self, name: impl Into<String>, values: DVector<f64>) -> Result<()> {
        let cov = self.check_nodal(name.into(), values)?;
        self.row.push(cov);
        Ok(())
    }

    pub fn add_col(&mut self, name: impl Into<String>, values: DVector<f64>) -> Result<()> {
        let cov = self.check_nodal(name.into(), values)?;
        self.col.push(cov);
        Ok(())
    }

    /// Adds the same nodal covariate as both a row and a column covariate.
    pub fn add_nodal(&mut self, name: impl Into<String>, values: DVector<f64>) -> Result<()> {
        let name = name.into();
        self.add_row(name.clone(), values.clone())?;
        self.add_col(name, values)
    }

    fn check_nodal(&self, name: String, values: DVector<f64>) -> Result<Covariate<DVector<f64>>> {
        if values.len() != self.n {
            return Err(Error::Dimension(format!(
                "nodal covariate {name} has {} rows, expected {}",
                values.len(),
                self.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingCovariate(format!("{name} at node {i}")));
        }
        Ok(Covariate { name, values })
    }

    /// Keeps only the named dyadic slices, in the given order.
    pub fn with_dyadic_subset(&self, names: &[&str]) -> Result<Self> {
        let mut out = Self {
            n: self.n,
            dyadic: Vec::new(),
            row: self.row.clone(),
            col: self.col.clone(),
        };
        for name in names {
            let c = self
                .dyadic
                .iter()
                .find(|c| c.name == *name)
                .ok_or_else(|| Error::Dimension(format!("no dyadic covariate named {name}")))?;
            out.dyadic.push(c.clone());
        }
        Ok(out)
    }

    /// Names of the dyadic, row and column slices.
    pub fn names(&self) -> (Vec<&str>, Vec<&str>, Vec<&str>) {
        (
            self.dyadic.iter().map(|c| c.name.as_str()).collect(),
            self.row.iter().map(|c| c.name.as_str()).collect(),
            self.col.iter().map(|c| c.name.as_str()).collect(),
        )
    }
}

/// Repeated sociomatrices on a common node set.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalData {
    slices: Vec<Sociomatrix>,
    covariates: Vec<CovariateSet>,
}

impl LongitudinalData {
    pub fn t(&self) -> usize {
        self.slices.len()
    }

    pub fn n(&self) -> usize {
        self.slices[0].n()
    }

    pub fn labels(&self) -> &[String] {
        self.slices[0].labels()
    }

    pub fn slices(&self) -> &[Sociomatrix] {
        &self.slices
    }

    pub fn covariates(&self) -> &[CovariateSet] {
        &self.covariates
    }

    pub fn into_parts(self) -> (Vec<Sociomatrix>, Vec<CovariateSet>) {
        (self.slices, self.covariates)
    }
}

/// Stacks time slices, checking they share labels and covariate names.
pub fn assemble_longitudinal(slices: Vec<(Sociomatrix, CovariateSet)>) -> Result<LongitudinalData> {
    if slices.is_empty() {
        return Err(Error::TooFewTimePoints { needed: 1, got: 0 });
    }
    let first_labels = slices[0].0.labels().to_vec();
    let first_names = {
        let (d, r, c) = slices[0].1.names();
        (
            d.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            r.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            c.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        )
    };
    for (t, (y, x)) in slices.iter().enumerate().skip(1) {
        if y.labels() != first_labels.as_slice() {
            return Err(Error::NodesetMismatch { first: 0, second: t });
        }
        let (d, r, c) = x.names();
        if d != first_names.0 || r != first_names.1 || c != first_names.2 {
            return Err(Error::Dimension(format!(
                "covariate names at time {t} differ from time 0"
            )));
        }
    }
    for (y, x) in &slices {
        if x.n() != y.n() {
            return Err(Error::Dimension(format!(
                "covariates for {} nodes, sociomatrix has {}",
                x.n(),
                y.n()
            )));
        }
    }
    let (slices, covariates) = slices.into_iter().unzip();
    Ok(LongitudinalData { slices, covariates })
}

/// Egocentric link-tracing sample: `n_egos` random egos have their rows
/// observed, and relations among the alters of each ego are observed.
/// Returns the masked sociomatrix and the sorted ego indices.
pub fn egocentric_sample<R: Rng + ?Sized>(
    y: &Sociomatrix,
    n_egos: usize,
    rng: &mut R,
) -> (Sociomatrix, Vec<usize>) {
    let n = y.n();
    let mut egos = sample(rng, n, n_egos.min(n)).into_vec();
    egos.sort_unstable();
    let mut masked = DMatrix::from_element(n, n, f64::NAN);
    for &i in &egos {
        for j in 0..n {
            masked[(i, j)] = y.values[(i, j)];
        }
    }
    for &i in &egos {
        let alters: Vec<usize> = (0..n).filter(|&j| masked[(i, j)] == 1.0).collect();
        for &k in &alters {
            for &l in &alters {
                masked[(k, l)] = y.values[(k, l)];
            }
        }
    }
    let out = Sociomatrix::new(y.labels.clone(), masked).expect("same shape as input");
    (out, egos)
}
