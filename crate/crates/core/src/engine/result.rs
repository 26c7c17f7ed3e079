use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{gof_compare, GofComparison, GofStats, HistogramBin, GOF_NAMES};
use crate::stats::{mean, sd, two_sided_p};

use super::spec::ModelSpec;

/// Constraint audit and sampler diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sweeps: usize,
    /// Total latent-constraint violations over all audited sweeps.
    pub violations: usize,
    /// Metropolis acceptance rate for ρ after burn-in, probit families
    /// with dyadic correlation only.
    pub rho_acceptance: Option<f64>,
}

/// Output of a fit. Trace matrices have one row per saved draw; chains
/// are stacked in order.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub labels: Vec<String>,
    pub beta_names: Vec<String>,
    pub beta: DMatrix<f64>,
    pub vc_names: Vec<String>,
    pub vc: DMatrix<f64>,
    /// Row 0 holds the observed statistics, the rest one row per draw.
    pub gof: DMatrix<f64>,
    pub apm: DVector<f64>,
    pub bpm: DVector<f64>,
    /// Posterior mean of the multiplicative term.
    pub uvpm: DMatrix<f64>,
    /// Point-estimate factors of `uvpm`.
    pub u: DMatrix<f64>,
    /// Directed models only.
    pub v: Option<DMatrix<f64>>,
    /// Symmetric models only.
    pub l: Option<DVector<f64>>,
    /// Posterior predictive mean per time point.
    pub ypm: Vec<DMatrix<f64>>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub fn draws(&self) -> usize {
        self.beta.nrows().max(self.vc.nrows())
    }

    pub fn observed_gof(&self) -> GofStats {
        GofStats::from_array(row4(&self.gof, 0))
    }

    pub fn simulated_gof(&self) -> Vec<GofStats> {
        (1..self.gof.nrows()).map(|r| GofStats::from_array(row4(&self.gof, r))).collect()
    }

    pub fn gof_report(&self, bins: usize) -> (Vec<GofComparison>, Vec<HistogramBin>) {
        gof_compare(&self.observed_gof(), &self.simulated_gof(), bins)
    }

    pub fn summary(&self) -> Summary {
        summarize(self)
    }

    /// Posterior mean of column `name` of BETA or VC.
    pub fn posterior_mean(&self, name: &str) -> Option<f64> {
        let col = |names: &[String], m: &DMatrix<f64>| {
            names.iter().position(|n| n == name).map(|k| m.column(k).mean())
        };
        col(&self.beta_names, &self.beta).or_else(|| col(&self.vc_names, &self.vc))
    }

    /// Writes BETA, VC, GOF, APM, BPM, UVPM, U, V or L, YPM, spec.json,
    /// diagnostics.json and summary.txt into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_trace(&dir.join("BETA.csv"), &self.beta_names, &self.beta)?;
        write_trace(&dir.join("VC.csv"), &self.vc_names, &self.vc)?;
        write_gof(&dir.join("GOF.csv"), &self.gof)?;
        write_vector(&dir.join("APM.csv"), &self.labels, &self.apm)?;
        write_vector(&dir.join("BPM.csv"), &self.labels, &self.bpm)?;
        write_square(&dir.join("UVPM.csv"), &self.labels, &self.uvpm)?;
        write_factor(&dir.join("U.csv"), &self.labels, &self.u)?;
        if let Some(v) = &self.v {
            write_factor(&dir.join("V.csv"), &self.labels, v)?;
        }
        if let Some(l) = &self.l {
            let names: Vec<String> = (1..=l.len()).map(|k| format!("L{k}")).collect();
            write_vector(&dir.join("L.csv"), &names, l)?;
        }
        if let Some(last) = self.ypm.last() {
            write_square(&dir.join("YPM.csv"), &self.labels, last)?;
        }
        if self.ypm.len() > 1 {
            for (t, y) in self.ypm.iter().enumerate() {
                write_square(&dir.join(format!("YPM_{}.csv", t + 1)), &self.labels, y)?;
            }
        }
        write_json(&dir.join("spec.json"), &self.spec)?;
        write_json(&dir.join("diagnostics.json"), &self.diagnostics)?;
        let path = dir.join("summary.txt");
        fs::write(&path, self.summary().to_string()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a directory written by [`FitResult::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let spec: ModelSpec = read_json(&dir.join("spec.json"))?;
        let diagnostics: Diagnostics = read_json(&dir.join("diagnostics.json"))?;
        let (beta_names, beta) = read_trace(&dir.join("BETA.csv"))?;
        let (vc_names, vc) = read_trace(&dir.join("VC.csv"))?;
        let (_, gof) = read_trace(&dir.join("GOF.csv"))?;
        let (labels, apm) = read_vector(&dir.join("APM.csv"))?;
        let (_, bpm) = read_vector(&dir.join("BPM.csv"))?;
        let (_, uvpm) = read_square(&dir.join("UVPM.csv"))?;
        let (_, u) = read_factor(&dir.join("U.csv"))?;
        let v = optional(&dir.join("V.csv"), read_factor)?.map(|(_, m)| m);
        let l = optional(&dir.join("L.csv"), read_vector)?.map(|(_, m)| m);
        let mut ypm = Vec::new();
        for t in 1.. {
            match optional(&dir.join(format!("YPM_{t}.csv")), read_square)? {
                Some((_, m)) => ypm.push(m),
                None => break,
            }
        }
        if ypm.is_empty() {
            ypm.push(read_square(&dir.join("YPM.csv"))?.1);
        }
        Ok(Self {
            spec,
            labels,
            beta_names,
            beta,
            vc_names,
            vc,
            gof,
            apm,
            bpm,
            uvpm,
            u,
            v,
            l,
            ypm,
            diagnostics,
        })
    }
}

fn row4(m: &DMatrix<f64>, r: usize) -> [f64; 4] {
    [m[(r, 0)], m[(r, 1)], m[(r, 2)], m[(r, 3)]]
}

/// Posterior summary of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub pmean: f64,
    pub psd: f64,
}

impl SummaryRow {
    pub fn z(&self) -> f64 {
        self.pmean / self.psd
    }

    pub fn p_value(&self) -> f64 {
        two_sided_p(self.z())
    }
}

/// Posterior means and standard deviations of the regression
/// coefficients and variance components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub beta: Vec<SummaryRow>,
    pub vc: Vec<SummaryRow>,
}

impl Summary {
    pub fn coefficient(&self, name: &str) -> Option<&SummaryRow> {
        self.beta.iter().find(|r| r.name == name)
    }

    pub fn variance(&self, name: &str) -> Option<&SummaryRow> {
        self.vc.iter().find(|r| r.name == name)
    }
}

pub fn summarize(fit: &FitResult) -> Summary {
    let rows = |names: &[String], m: &DMatrix<f64>| {
        names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let xs: Vec<f64> = m.column(k).iter().copied().collect();
                SummaryRow {
                    name: name.clone(),
                    pmean: mean(&xs),
                    psd: sd(&xs),
                }
            })
            .collect()
    };
    Summary {
        beta: rows(&fit.beta_names, &fit.beta),
        vc: rows(&fit.vc_names, &fit.vc),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Regression coefficients:")?;
        let beta: Vec<(String, Vec<f64>)> = self
            .beta
            .iter()
            .map(|r| (r.name.clone(), vec![r.pmean, r.psd, r.z(), r.p_value()]))
            .collect();
        write_table(f, &["pmean", "psd", "z-stat", "p-val"], &beta)?;
        writeln!(f)?;
        writeln!(f, "Variance parameters:")?;
        let vc: Vec<(String, Vec<f64>)> = self.vc.iter().map(|r| (r.name.clone(), vec![r.pmean, r.psd])).collect();
        write_table(f, &["pmean", "psd"], &vc)
    }
}

// Row names left-aligned, columns right-aligned, three decimals.
fn write_table(f: &mut fmt::Formatter<'_>, header: &[&str], rows: &[(String, Vec<f64>)]) -> fmt::Result {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(_, v)| v.iter().map(|x| format!("{x:.3}")).collect())
        .collect();
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    let widths: Vec<usize> = header
        .iter()
        .enumerate()
        .map(|(k, h)| cells.iter().map(|c| c[k].len()).chain([h.len()]).max().unwrap_or(0))
        .collect();
    write!(f, "{:name_w$}", "")?;
    for (h, w) in header.iter().zip(&widths) {
        write!(f, " {h:>w$}")?;
    }
    writeln!(f)?;
    for ((name, _), c) in rows.iter().zip(&cells) {
        write!(f, "{name:<name_w$}")?;
        for (x, w) in c.iter().zip(&widths) {
            write!(f, " {x:>w$}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn optional<T>(path: &Path, read: impl Fn(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

fn cell(x: f64) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else {
        x.to_string()
    }
}

fn parse(s: &str, row: usize, col: usize) -> Result<f64> {
    let s = s.trim();
    if s == "NA" || s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| Error::BadCell {
        row,
        col,
        cell: s.to_string(),
    })
}

fn write_trace(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(names)?;
    for r in 0..m.nrows() {
        w.write_record(m.row(r).iter().map(|&x| cell(x)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_gof(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(std::iter::once("draw").chain(GOF_NAMES))?;
    for r in 0..m.nrows() {
        let label = if r == 0 { "obs".to_string() } else { r.to_string() };
        w.write_record(std::iter::once(label).chain(m.row(r).iter().map(|&x| cell(x))))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_trace(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = open(path)?;
    let mut names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let skip = usize::from(names.first().is_some_and(|n| n == "draw"));
    names.drain(..skip);
    let mut data = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, s) in rec.iter().enumerate().skip(skip) {
            data.push(parse(s, r + 1, c + 1)?);
        }
        rows += 1;
    }
    Ok((names.clone(), DMatrix::from_row_slice(rows, names.len(), &data)))
}

fn write_vector(path: &Path, labels: &[String], v: &DVector<f64>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["node", "value"])?;
    for (l, x) in labels.iter().zip(v.iter()) {
        w.write_record([l.clone(), cell(*x)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_vector(path: &Path) -> Result<(Vec<String>, DVector<f64>)> {
    let mut rdr = open(path)?;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        labels.push(rec.get(0).unwrap_or_default().to_string());
        values.push(parse(rec.get(1).unwrap_or_default(), r + 1, 2)?);
    }
    Ok((labels, DVector::from_vec(values)))
}

fn write_square(path: &Path, labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(std::iter::once(String::new()).chain(labels.iter().cloned()))?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record(std::iter::once(l.clone()).chain(m.row(i).iter().map(|&x| cell(x))))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_factor(path: &Path, labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(std::iter::once("node".to_string()).chain((1..=m.ncols()).map(|k| format!("F{k}"))))?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record(std::iter::once(l.clone()).chain(m.row(i).iter().map(|&x| cell(x))))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// Labeled matrix: header of column names, first field of each row a label.
fn read_labeled(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = open(path)?;
    let cols = rdr.headers()?.len().saturating_sub(1);
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        labels.push(rec.get(0).unwrap_or_default().to_string());
        for (c, s) in rec.iter().enumerate().skip(1) {
            data.push(parse(s, r + 1, c + 1)?);
        }
    }
    let rows = labels.len();
    Ok((labels, DMatrix::from_row_slice(rows, cols, &data)))
}

/// Reads a labeled square matrix such as YPM.csv.
pub fn read_square(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let (labels, m) = read_labeled(path)?;
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok((labels, m))
}

fn read_factor(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    read_labeled(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::Family;

    #[test]
    fn table_layout() {
        let s = Summary {
            beta: vec![
                SummaryRow { name: "intercept".into(), pmean: -6.407, psd: 1.255 },
                SummaryRow { name: "x.dyad".into(), pmean: 0.5, psd: 0.1 },
            ],
            vc: vec![SummaryRow { name: "va".into(), pmean: 0.264, psd: 0.104 }],
        };
        let text = s.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Regression coefficients:");
        assert_eq!(lines[1], "           pmean   psd z-stat p-val");
        assert_eq!(lines[2], "intercept -6.407 1.255 -5.105 0.000");
        assert_eq!(lines[3], "x.dyad     0.500 0.100  5.000 0.000");
        assert_eq!(lines[5], "Variance parameters:");
        assert_eq!(lines[6], "   pmean   psd");
        assert_eq!(lines[7], "va 0.264 0.104");
    }

    #[test]
    fn p_values_match_printed_rows() {
        let row = |pmean: f64, psd: f64| SummaryRow { name: String::new(), pmean, psd };
        let conflicts = row(0.076, 0.076 / 1.822);
        assert_eq!(format!("{:.3}", conflicts.p_value()), "0.068");
        assert_eq!(row(0.0, 1.0).p_value(), 1.0);
        let distance = row(-6.129, 1.0);
        assert_eq!(format!("{:.3}", distance.p_value()), "0.000");
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut ypm = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 / 7.0);
        ypm.fill_diagonal(f64::NAN);
        let fit = FitResult {
            spec: ModelSpec::new(Family::Bin),
            labels: labels.clone(),
            beta_names: vec!["intercept".into()],
            beta: DMatrix::from_row_slice(2, 1, &[0.1, 0.2]),
            vc_names: super::super::sampler::variance_names(false),
            vc: DMatrix::from_fn(2, 5, |i, j| (i + j) as f64 * 0.3),
            gof: DMatrix::from_fn(3, 4, |i, j| (i * j) as f64 + 0.25),
            apm: DVector::from_vec(vec![1.0, 2.0, 3.0]),
            bpm: DVector::from_vec(vec![-1.0, 0.0, 1.0]),
            uvpm: DMatrix::from_fn(3, 3, |i, j| i as f64 - j as f64 / 3.0),
            u: DMatrix::from_fn(3, 1, |i, _| i as f64),
            v: Some(DMatrix::from_fn(3, 1, |i, _| -(i as f64))),
            l: None,
            ypm: vec![ypm],
            diagnostics: Diagnostics { sweeps: 10, violations: 0, rho_acceptance: Some(0.4) },
        };
        fit.write_dir(dir.path()).unwrap();
        let back = FitResult::read_dir(dir.path()).unwrap();
        assert_eq!(back.spec, fit.spec);
        assert_eq!(back.beta, fit.beta);
        assert_eq!(back.vc, fit.vc);
        assert_eq!(back.gof, fit.gof);
        assert_eq!(back.labels, labels);
        assert_eq!(back.uvpm, fit.uvpm);
        assert_eq!(back.v, fit.v);
        assert_eq!(back.ypm[0][(0, 1)], fit.ypm[0][(0, 1)]);
        assert!(back.ypm[0][(1, 1)].is_nan());
        assert!(dir.path().join("summary.txt").exists());
    }
}
