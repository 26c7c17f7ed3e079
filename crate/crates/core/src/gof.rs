//! Descriptive row/column decompositions and the four goodness-of-fit
//! statistics used for posterior predictive checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::stats::{cor, cov, mean, quantile, sd};

pub const GOF_NAMES: [&str; 4] = ["sd.rowmean", "sd.colmean", "dyad.dep", "triad.dep"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofStats {
    pub sd_rowmean: f64,
    pub sd_colmean: f64,
    pub dyad_dep: f64,
    pub triad_dep: f64,
}

impl GofStats {
    pub fn to_array(self) -> [f64; 4] {
        [self.sd_rowmean, self.sd_colmean, self.dyad_dep, self.triad_dep]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            sd_rowmean: a[0],
            sd_colmean: a[1],
            dyad_dep: a[2],
            triad_dep: a[3],
        }
    }

    /// Componentwise mean, used to summarize longitudinal slices.
    pub fn average(stats: &[GofStats]) -> Self {
        let mut acc = [0.0; 4];
        for s in stats {
            for (a, v) in acc.iter_mut().zip(s.to_array()) {
                *a += v;
            }
        }
        Self::from_array(acc.map(|a| a / stats.len() as f64))
    }
}

fn row_means(y: &DMatrix<f64>) -> Vec<f64> {
    (0..y.nrows())
        .map(|i| mean(&y.row(i).iter().copied().filter(|v| !v.is_nan()).collect::<Vec<_>>()))
        .collect()
}

fn col_means(y: &DMatrix<f64>) -> Vec<f64> {
    (0..y.ncols())
        .map(|j| mean(&y.column(j).iter().copied().filter(|v| !v.is_nan()).collect::<Vec<_>>()))
        .collect()
}

fn finite(xs: Vec<f64>) -> Vec<f64> {
    xs.into_iter().filter(|v| !v.is_nan()).collect()
}

/// The four statistics for a sociomatrix with `NaN` marking missing cells
/// (including the diagonal).
///
/// With E = Y − mean(Y) zero-filled at missing cells and D the indicator
/// of observed cells: sd of row means, sd of column means,
/// cor(vec Y, vec Y') over cells observed in both, and
/// tr(E³) / (tr(D³) sd(Y)³).
pub fn gofstats(y: &DMatrix<f64>) -> GofStats {
    let n = y.nrows();
    let sd_rowmean = sd(&finite(row_means(y)));
    let sd_colmean = sd(&finite(col_means(y)));

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (y[(i, j)], y[(j, i)]);
            if !a.is_nan() && !b.is_nan() {
                xs.push(a);
                ys.push(b);
            }
        }
    }
    let dyad_dep = cor(&xs, &ys);

    let obs: Vec<f64> = y.iter().copied().filter(|v| !v.is_nan()).collect();
    let m = mean(&obs);
    let e = y.map(|v| if v.is_nan() { 0.0 } else { v - m });
    let d = y.map(|v| if v.is_nan() { 0.0 } else { 1.0 });
    let e3 = (&e * &e * &e).trace();
    let d3 = (&d * &d * &d).trace();
    let triad_dep = e3 / (d3 * sd(&obs).powi(3));

    let zero_if_nan = |v: f64| if v.is_finite() { v } else { 0.0 };
    GofStats {
        sd_rowmean: zero_if_nan(sd_rowmean),
        sd_colmean: zero_if_nan(sd_colmean),
        dyad_dep: zero_if_nan(dyad_dep),
        triad_dep: zero_if_nan(triad_dep),
    }
}

/// One line of a sequential ANOVA table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub df: f64,
    pub sum_sq: f64,
    pub mean_sq: f64,
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub row: AnovaRow,
    pub col: AnovaRow,
    pub residual: AnovaRow,
}

/// Grand mean, row and column effects, and the two-way ANOVA table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaDecomposition {
    pub muhat: f64,
    pub ahat: DVector<f64>,
    pub bhat: DVector<f64>,
    pub table: AnovaTable,
}

/// Row and column effects as deviations of the NA-aware row and column
/// means from the grand mean, with a sequential (row factor, then column
/// factor) least-squares ANOVA on the observed off-diagonal cells.
pub fn anova_decompose(y: &DMatrix<f64>) -> Result<AnovaDecomposition> {
    let n = y.nrows();
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !y[(i, j)].is_nan())
        .collect();
    if cells.is_empty() {
        return Err(Error::Degenerate("sociomatrix has no observed cells".into()));
    }
    let obs: Vec<f64> = cells.iter().map(|&c| y[c]).collect();
    let muhat = mean(&obs);
    let ahat = DVector::from_iterator(n, row_means(y).into_iter().map(|v| v - muhat));
    let bhat = DVector::from_iterator(n, col_means(y).into_iter().map(|v| v - muhat));

    let total: f64 = obs.iter().map(|v| (v - muhat).powi(2)).sum();
    let rss_row = residual_ss(y, &cells, n, false);
    let rss_full = residual_ss(y, &cells, n, true);
    let df_factor = (n - 1) as f64;
    let df_res = cells.len() as f64 - 2.0 * df_factor - 1.0;
    let ms_res = rss_full / df_res;
    let factor = |ss: f64| {
        let ms = ss / df_factor;
        let f = ms / ms_res;
        let p = FisherSnedecor::new(df_factor, df_res).ok().map(|d| 1.0 - d.cdf(f));
        AnovaRow {
            df: df_factor,
            sum_sq: ss,
            mean_sq: ms,
            f: Some(f),
            p,
        }
    };
    Ok(AnovaDecomposition {
        muhat,
        ahat,
        bhat,
        table: AnovaTable {
            row: factor(total - rss_row),
            col: factor(rss_row - rss_full),
            residual: AnovaRow {
                df: df_res,
                sum_sq: rss_full,
                mean_sq: ms_res,
                f: None,
                p: None,
            },
        },
    })
}

/// Residual sum of squares of the least-squares fit of the observed cells
/// on row dummies (and column dummies when `with_col`).
fn residual_ss(y: &DMatrix<f64>, cells: &[(usize, usize)], n: usize, with_col: bool) -> f64 {
    // intercept, rows 1..n, optionally cols 1..n (first level dropped)
    let p = 1 + (n - 1) + if with_col { n - 1 } else { 0 };
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut idx = Vec::with_capacity(3);
    for &(i, j) in cells {
        idx.clear();
        idx.push(0);
        if i > 0 {
            idx.push(i);
        }
        if with_col && j > 0 {
            idx.push(n - 1 + j);
        }
        let v = y[(i, j)];
        for &a in &idx {
            xty[a] += v;
            for &b in &idx {
                xtx[(a, b)] += 1.0;
            }
        }
    }
    let coef = xtx
        .clone()
        .cholesky()
        .map(|c| c.solve(&xty))
        .unwrap_or_else(|| xtx.pseudo_inverse(1e-10).expect("finite") * &xty);
    cells
        .iter()
        .map(|&(i, j)| {
            let mut fit: f64 = coef[0];
            if i > 0 {
                fit += coef[i];
            }
            if with_col && j > 0 {
                fit += coef[n - 1 + j];
            }
            (y[(i, j)] - fit).powi(2)
        })
        .sum()
}

/// Sample covariance matrix and correlation of paired effects.
pub fn effect_covariance(ahat: &DVector<f64>, bhat: &DVector<f64>) -> (DMatrix<f64>, f64) {
    let a: Vec<f64> = ahat.iter().copied().collect();
    let b: Vec<f64> = bhat.iter().copied().collect();
    let c = DMatrix::from_row_slice(2, 2, &[cov(&a, &a), cov(&a, &b), cov(&a, &b), cov(&b, &b)]);
    (c, cor(&a, &b))
}

/// Covariance matrix and correlation of (vec R, vec R') where
/// R = Y − (μ + a_i + b_j), over cells with both entries observed.
pub fn dyadic_residual_stats(
    y: &DMatrix<f64>,
    muhat: f64,
    ahat: &DVector<f64>,
    bhat: &DVector<f64>,
) -> (DMatrix<f64>, f64) {
    let n = y.nrows();
    let r = DMatrix::from_fn(n, n, |i, j| y[(i, j)] - (muhat + ahat[i] + bhat[j]));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && !r[(i, j)].is_nan() && !r[(j, i)].is_nan() {
                xs.push(r[(i, j)]);
                ys.push(r[(j, i)]);
            }
        }
    }
    let c = DMatrix::from_row_slice(2, 2, &[cov(&xs, &xs), cov(&xs, &ys), cov(&xs, &ys), cov(&ys, &ys)]);
    (c, cor(&xs, &ys))
}

/// Posterior predictive comparison for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofComparison {
    pub statistic: String,
    pub observed: f64,
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
    /// Two-sided predictive tail probability,
    /// 2·min(P(T_sim ≥ T_obs), P(T_sim ≤ T_obs)), capped at one.
    pub tail_prob: f64,
}

impl GofComparison {
    pub fn covers(&self) -> bool {
        self.observed >= self.lo95 && self.observed <= self.hi95
    }
}

/// One histogram bin of simulated statistic values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub statistic: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Compares observed statistics with simulated ones and bins the simulated
/// values for plotting.
pub fn gof_compare(observed: &GofStats, simulated: &[GofStats], bins: usize) -> (Vec<GofComparison>, Vec<HistogramBin>) {
    let obs = observed.to_array();
    let mut report = Vec::with_capacity(4);
    let mut hist = Vec::new();
    for (k, name) in GOF_NAMES.iter().enumerate() {
        let mut sims: Vec<f64> = simulated.iter().map(|s| s.to_array()[k]).collect();
        sims.sort_by(f64::total_cmp);
        let m = sims.len() as f64;
        let ge = sims.iter().filter(|&&v| v >= obs[k]).count() as f64 / m;
        let le = sims.iter().filter(|&&v| v <= obs[k]).count() as f64 / m;
        report.push(GofComparison {
            statistic: name.to_string(),
            observed: obs[k],
            mean: mean(&sims),
            lo95: quantile(&sims, 0.025),
            hi95: quantile(&sims, 0.975),
            tail_prob: (2.0 * ge.min(le)).min(1.0),
        });
        if sims.is_empty() || bins == 0 {
            continue;
        }
        let lo = sims[0].min(obs[k]);
        let hi = sims[sims.len() - 1].max(obs[k]);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &v in &sims {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, count) in counts.into_iter().enumerate() {
            hist.push(HistogramBin {
                statistic: name.to_string(),
                lo: lo + b as f64 * width,
                hi: lo + (b + 1) as f64 * width,
                count,
            });
        }
    }
    (report, hist)
}

/// Writes a comparison report as CSV.
pub fn write_gof_report<W: std::io::Write>(report: &[GofComparison], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "observed", "mean", "lo95", "hi95", "tailprob"])?;
    for r in report {
        w.write_record([
            r.statistic.clone(),
            r.observed.to_string(),
            r.mean.to_string(),
            r.lo95.to_string(),
            r.hi95.to_string(),
            r.tail_prob.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("gof report", e))?;
    Ok(())
}

/// Writes histogram bins as CSV.
pub fn write_histogram<W: std::io::Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "lo", "hi", "count"])?;
    for b in bins {
        w.write_record([b.statistic.clone(), b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("histogram", e))?;
    Ok(())
}
