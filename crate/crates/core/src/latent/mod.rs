//! Latent-scale representations of the outcome for each likelihood family,
//! their constrained full-conditional updates and constraint audits.

mod rtnorm;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_scores;

pub use rtnorm::rtnorm;

/// Likelihood family linking the observed outcome to the latent matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Gaussian
    Nrm,
    /// binary probit
    Bin,
    /// ordinal, rank likelihood over the whole matrix
    Ord,
    /// binary with censoring at a per-row maximum outdegree
    Cbin,
    /// fixed-rank nomination
    Frn,
    /// ranks compared within rows only
    Rrl,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Nrm,
        Family::Bin,
        Family::Ord,
        Family::Cbin,
        Family::Frn,
        Family::Rrl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Nrm => "nrm",
            Family::Bin => "bin",
            Family::Ord => "ord",
            Family::Cbin => "cbin",
            Family::Frn => "frn",
            Family::Rrl => "rrl",
        }
    }

    /// Whether the intercept is identified.
    pub fn has_intercept(self) -> bool {
        !matches!(self, Family::Ord | Family::Rrl)
    }

    /// Whether the error variance is fixed at one.
    pub fn unit_variance(self) -> bool {
        self != Family::Nrm
    }

    pub fn uses_odmax(self) -> bool {
        matches!(self, Family::Frn | Family::Cbin)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown model family {s:?}")))
    }
}

/// Cells sharing one observed value within a block, with the sign bounds
/// every such cell must respect.
#[derive(Debug, Clone)]
struct Level {
    cells: Vec<(usize, usize)>,
    floor: f64,
    ceil: f64,
}

/// A set of levels whose latent values are ordered against each other
/// (`ordered`), or only subject to their own sign bounds.
#[derive(Debug, Clone)]
struct Block {
    levels: Vec<Level>,
    ordered: bool,
}

/// Latent matrix Z for one sociomatrix, with the constraint structure the
/// observed values impose on it.
#[derive(Debug, Clone)]
pub struct LatentMatrix {
    z: DMatrix<f64>,
    family: Family,
    symmetric: bool,
    blocks: Vec<Block>,
    missing: Vec<(usize, usize)>,
    odmax: Vec<usize>,
    outdegree: Vec<usize>,
}

impl LatentMatrix {
    /// Validates `y` for `family` and builds the constraint structure and
    /// a starting Z that satisfies it. `y` uses `NaN` for missing cells.
    /// `odmax` is required for frn and cbin and ignored otherwise.
    pub fn new(
        y: &DMatrix<f64>,
        family: Family,
        symmetric: bool,
        odmax: Option<&[usize]>,
    ) -> Result<Self> {
        let n = y.nrows();
        if symmetric && matches!(family, Family::Frn | Family::Cbin | Family::Rrl) {
            return Err(Error::Spec(format!(
                "the {family} family is not defined for symmetric data"
            )));
        }
        let cells: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| if symmetric { i < j } else { i != j })
            .collect();
        let observed = |c: &(usize, usize)| !y[*c].is_nan();
        let missing: Vec<_> = cells.iter().copied().filter(|c| !observed(c)).collect();
        for &(i, j) in cells.iter().filter(|c| observed(c)) {
            check_value(y[(i, j)], family).map_err(|_| Error::InvalidOutcome {
                row: i,
                col: j,
                value: y[(i, j)],
                family: family.name(),
            })?;
        }
        let outdegree: Vec<usize> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && y[(i, j)] > 0.0).count())
            .collect();
        let odmax = if family.uses_odmax() {
            let od = odmax
                .ok_or_else(|| Error::Spec(format!("the {family} family requires odmax")))?
                .to_vec();
            if od.len() != n {
                return Err(Error::Dimension(format!("odmax has length {}, expected {n}", od.len())));
            }
            for i in 0..n {
                if outdegree[i] > od[i] {
                    return Err(Error::OdmaxExceeded {
                        row: i,
                        nominations: outdegree[i],
                        odmax: od[i],
                    });
                }
            }
            od
        } else {
            Vec::new()
        };

        let blocks = match family {
            Family::Nrm => Vec::new(),
            Family::Bin => {
                let obs: Vec<_> = cells.iter().copied().filter(|c| observed(c)).collect();
                vec![binary_block(y, &obs)]
            }
            Family::Ord => {
                let obs: Vec<_> = cells.iter().copied().filter(|c| observed(c)).collect();
                vec![level_block(y, &obs, |_| (f64::NEG_INFINITY, f64::INFINITY))]
            }
            Family::Rrl => (0..n)
                .map(|i| {
                    let row: Vec<_> = (0..n).filter(|&j| j != i).map(|j| (i, j)).filter(|c| observed(c)).collect();
                    level_block(y, &row, |_| (f64::NEG_INFINITY, f64::INFINITY))
                })
                .collect(),
            Family::Frn | Family::Cbin => (0..n)
                .map(|i| {
                    let row: Vec<_> = (0..n).filter(|&j| j != i).map(|j| (i, j)).filter(|c| observed(c)).collect();
                    let censored = outdegree[i] >= odmax[i];
                    level_block(y, &row, |v| {
                        if v > 0.0 {
                            (0.0, f64::INFINITY)
                        } else if censored {
                            (f64::NEG_INFINITY, f64::INFINITY)
                        } else {
                            (f64::NEG_INFINITY, 0.0)
                        }
                    })
                })
                .collect(),
        };

        let z = initial_z(y, family, symmetric);
        Ok(Self {
            z,
            family,
            symmetric,
            blocks,
            missing,
            odmax,
            outdegree,
        })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn odmax(&self) -> &[usize] {
        &self.odmax
    }

    pub fn outdegree(&self) -> &[usize] {
        &self.outdegree
    }

    pub fn missing_cells(&self) -> &[(usize, usize)] {
        &self.missing
    }

    /// Replaces Z, e.g. with observed Gaussian outcomes.
    pub fn set_z(&mut self, z: DMatrix<f64>) {
        self.z = z;
    }

    /// One sweep: every constrained cell is redrawn from its conditional
    /// given the rest of Z, then missing cells are imputed.
    ///
    /// For directed data z_ij | z_ji ~ N(m_ij + ρ(z_ji − m_ji), s2(1 − ρ²));
    /// symmetric data use N(m_ij, s2) on the upper triangle.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        mean: &DMatrix<f64>,
        rho: f64,
        s2: f64,
        rng: &mut R,
    ) -> Result<()> {
        let sd = if self.symmetric {
            s2.sqrt()
        } else {
            (s2 * (1.0 - rho * rho)).sqrt()
        };
        let rho = if self.symmetric { 0.0 } else { rho };
        for b in 0..self.blocks.len() {
            let block = &self.blocks[b];
            let nl = block.levels.len();
            let mut lo: Vec<f64> = block.levels.iter().map(|l| extreme(&self.z, &l.cells, f64::min)).collect();
            let mut hi: Vec<f64> = block.levels.iter().map(|l| extreme(&self.z, &l.cells, f64::max)).collect();
            for k in 0..nl {
                let level = &self.blocks[b].levels[k];
                let mut lb = level.floor;
                let mut ub = level.ceil;
                if self.blocks[b].ordered {
                    lb = hi[..k].iter().copied().fold(lb, f64::max);
                    ub = lo[k + 1..].iter().copied().fold(ub, f64::min);
                }
                for c in 0..level.cells.len() {
                    let (i, j) = self.blocks[b].levels[k].cells[c];
                    let m = conditional_mean(&self.z, mean, rho, i, j);
                    let x = rtnorm(m, sd, lb, ub, rng)?;
                    self.set_cell(i, j, x);
                }
                let cells = &self.blocks[b].levels[k].cells;
                lo[k] = extreme(&self.z, cells, f64::min);
                hi[k] = extreme(&self.z, cells, f64::max);
            }
        }
        self.impute_missing(mean, rho, s2, rng);
        Ok(())
    }

    /// Draws every missing cell from its unconstrained conditional.
    pub fn impute_missing<R: Rng + ?Sized>(&mut self, mean: &DMatrix<f64>, rho: f64, s2: f64, rng: &mut R) {
        let rho = if self.symmetric { 0.0 } else { rho };
        let sd = (s2 * (1.0 - rho * rho)).sqrt();
        for c in 0..self.missing.len() {
            let (i, j) = self.missing[c];
            let m = conditional_mean(&self.z, mean, rho, i, j);
            let x = m + sd * rng.sample::<f64, _>(StandardNormal);
            self.set_cell(i, j, x);
        }
    }

    fn set_cell(&mut self, i: usize, j: usize, x: f64) {
        self.z[(i, j)] = x;
        if self.symmetric {
            self.z[(j, i)] = x;
        }
    }

    /// Number of violated constraints in the current Z.
    pub fn audit(&self) -> usize {
        let mut bad = 0;
        for block in &self.blocks {
            for level in &block.levels {
                bad += level
                    .cells
                    .iter()
                    .filter(|&&c| !(self.z[c] > level.floor && self.z[c] < level.ceil))
                    .count();
            }
            if block.ordered {
                let mut running = f64::NEG_INFINITY;
                for level in &block.levels {
                    let lo = extreme(&self.z, &level.cells, f64::min);
                    if !(lo > running) && running > f64::NEG_INFINITY {
                        bad += 1;
                    }
                    running = running.max(extreme(&self.z, &level.cells, f64::max));
                }
            }
        }
        bad
    }
}

fn check_value(v: f64, family: Family) -> std::result::Result<(), ()> {
    let ok = match family {
        Family::Nrm | Family::Ord | Family::Rrl => v.is_finite(),
        Family::Bin | Family::Cbin => v == 0.0 || v == 1.0,
        Family::Frn => v >= 0.0 && v.fract() == 0.0 && v.is_finite(),
    };
    if ok { Ok(()) } else { Err(()) }
}

fn conditional_mean(z: &DMatrix<f64>, mean: &DMatrix<f64>, rho: f64, i: usize, j: usize) -> f64 {
    if rho == 0.0 {
        mean[(i, j)]
    } else {
        mean[(i, j)] + rho * (z[(j, i)] - mean[(j, i)])
    }
}

fn extreme(z: &DMatrix<f64>, cells: &[(usize, usize)], f: fn(f64, f64) -> f64) -> f64 {
    let init = if f(0.0, 1.0) == 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    cells.iter().fold(init, |acc, &c| f(acc, z[c]))
}

/// Sign-only block: ones above zero, zeros below.
fn binary_block(y: &DMatrix<f64>, cells: &[(usize, usize)]) -> Block {
    let (ones, zeros): (Vec<_>, Vec<_>) = cells.iter().partition(|&&c| y[c] > 0.0);
    Block {
        levels: vec![
            Level {
                cells: zeros,
                floor: f64::NEG_INFINITY,
                ceil: 0.0,
            },
            Level {
                cells: ones,
                floor: 0.0,
                ceil: f64::INFINITY,
            },
        ],
        ordered: false,
    }
}

/// Ordered block: cells grouped by distinct value in ascending order.
fn level_block(
    y: &DMatrix<f64>,
    cells: &[(usize, usize)],
    bounds: impl Fn(f64) -> (f64, f64),
) -> Block {
    let mut sorted = cells.to_vec();
    sorted.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut levels: Vec<Level> = Vec::new();
    let mut last = f64::NAN;
    for c in sorted {
        if y[c] != last {
            let (floor, ceil) = bounds(y[c]);
            levels.push(Level { cells: Vec::new(), floor, ceil });
            last = y[c];
        }
        levels.last_mut().expect("pushed").cells.push(c);
    }
    Block { levels, ordered: true }
}

/// Starting Z satisfying the constraints: normal scores over the matrix
/// (ord) or within rows (rrl); for frn the rank itself for ranked cells
/// and −1 otherwise; ±1 for bin and cbin; missing cells 0. Gaussian
/// outcomes start at Y with missing cells at the observed mean.
fn initial_z(y: &DMatrix<f64>, family: Family, symmetric: bool) -> DMatrix<f64> {
    let n = y.nrows();
    let mut z = DMatrix::zeros(n, n);
    let off = |i: usize, j: usize| i != j;
    match family {
        Family::Nrm => {
            let obs: Vec<f64> = y.iter().copied().filter(|v| !v.is_nan()).collect();
            let m = if obs.is_empty() { 0.0 } else { obs.iter().sum::<f64>() / obs.len() as f64 };
            z = y.map(|v| if v.is_nan() { m } else { v });
        }
        Family::Bin | Family::Cbin => {
            z = y.map(|v| if v.is_nan() { 0.0 } else if v > 0.0 { 1.0 } else { -1.0 });
        }
        Family::Frn => {
            z = y.map(|v| if v.is_nan() { 0.0 } else if v > 0.0 { v } else { -1.0 });
        }
        Family::Ord => {
            let cells: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| if symmetric { i < j } else { off(i, j) })
                .collect();
            let vals: Vec<f64> = cells.iter().map(|&c| y[c]).collect();
            let scores = normal_scores(&vals);
            for (c, s) in cells.iter().zip(scores) {
                z[*c] = if s.is_nan() { 0.0 } else { s };
            }
        }
        Family::Rrl => {
            for i in 0..n {
                let cols: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let vals: Vec<f64> = cols.iter().map(|&j| y[(i, j)]).collect();
                for (j, s) in cols.into_iter().zip(normal_scores(&vals)) {
                    z[(i, j)] = if s.is_nan() { 0.0 } else { s };
                }
            }
        }
    }
    if symmetric {
        for i in 0..n {
            for j in 0..i {
                z[(i, j)] = z[(j, i)];
            }
        }
    }
    z.fill_diagonal(0.0);
    z
}

/// Per-row maximum observed outdegree, the default nomination cap.
pub fn default_odmax(y: &DMatrix<f64>) -> Vec<usize> {
    let n = y.nrows();
    let d: Vec<usize> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && y[(i, j)] > 0.0).count())
        .collect();
    let max = d.iter().copied().max().unwrap_or(0);
    vec![max; n]
}
