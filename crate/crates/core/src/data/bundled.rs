//! Recipes for the example datasets.
//!
//! The raw arrays live under a data directory (`AME_DATA_DIR`, or `data/`
//! at the repository root) in the layout listed by `manifest.json`. Square
//! arrays are long-form CSV (`i,j,name,value`); node tables carry the node
//! labels in their first column, and those labels index the dyadic files.
//! Each recipe applies the transformations used in the worked examples and
//! returns ready-to-fit outcomes and covariates.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    assemble_longitudinal, load_dyadic_covariates, load_nodal_covariates, Covariate, CovariateSet,
    Format, LongitudinalData, Sociomatrix,
};
use crate::error::{Error, Result};

/// One file of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    /// `nodal` or `dyadic`.
    pub kind: String,
    /// Rows × columns for nodal tables, n × n × slices for dyadic arrays.
    pub shape: Vec<usize>,
    #[serde(default)]
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub source: String,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub datasets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(file)?)
    }

    pub fn entry(&self, name: &str) -> Option<&ManifestEntry> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

/// A directory holding exported datasets.
#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `AME_DATA_DIR` if set, otherwise `data/` at the repository root.
    pub fn locate() -> Self {
        match std::env::var_os("AME_DATA_DIR") {
            Some(dir) => Self::new(dir),
            None => Self::new(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn file(&self, dataset: &str, name: &str) -> Result<PathBuf> {
        let path = self.root.join(dataset).join(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::DatasetUnavailable {
                name: dataset.to_string(),
                path,
            })
        }
    }

    /// Node labels and the columns of a node table.
    fn nodal(&self, dataset: &str, name: &str) -> Result<(Vec<String>, Vec<Covariate<DVector<f64>>>)> {
        let path = self.file(dataset, name)?;
        let labels = first_column(&path)?;
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let cols = load_nodal_covariates(file, Format::Csv, &labels)?;
        Ok((labels, cols))
    }

    fn dyadic(&self, dataset: &str, name: &str, labels: &[String]) -> Result<Vec<Covariate<DMatrix<f64>>>> {
        let path = self.file(dataset, name)?;
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        load_dyadic_covariates(file, Format::Csv, labels)
    }

    /// True when every file listed for `dataset` in the manifest exists.
    pub fn has(&self, dataset: &str) -> bool {
        let Ok(manifest) = Manifest::load(self.root.join("manifest.json")) else {
            return false;
        };
        manifest
            .entry(dataset)
            .is_some_and(|e| e.files.iter().all(|f| self.root.join(&f.path).is_file()))
    }
}

fn first_column(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if let Some(l) = rec.get(0) {
            labels.push(l.trim().to_string());
        }
    }
    Ok(labels)
}

fn column<'a, T>(cols: &'a [Covariate<T>], name: &str) -> Result<&'a T> {
    cols.iter()
        .find(|c| c.name == name)
        .map(|c| &c.values)
        .ok_or_else(|| Error::Dimension(format!("column {name:?} not found")))
}

fn slice_at<T>(cols: &[Covariate<T>], k: usize) -> Result<&Covariate<T>> {
    cols.get(k)
        .ok_or_else(|| Error::Dimension(format!("expected at least {} slices, got {}", k + 1, cols.len())))
}

fn outer(x: &DVector<f64>, y: &DVector<f64>, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), y.len(), |i, j| f(x[i], y[j]))
}

fn sub_matrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

fn sub_vector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Nodes whose value is at least the `k`-th largest, in file order.
pub fn top_k(values: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let Some(&cut) = sorted.get(k.saturating_sub(1)) else {
        return (0..values.len()).collect();
    };
    (0..values.len()).filter(|&i| values[i] >= cut).collect()
}

/// International trade among the 30 largest economies: log(exports + 1),
/// with logged population and GDP, polity, and conflicts, log distance,
/// shared IGO memberships and the polity interaction as covariates.
pub fn trade(dir: &DataDir) -> Result<(Sociomatrix, CovariateSet)> {
    let (labels, nodevars) = dir.nodal("IR90s", "nodevars.csv")?;
    let dyadvars = dir.dyadic("IR90s", "dyadvars.csv", &labels)?;
    let top = top_k(column(&nodevars, "gdp")?, 30);
    let exports = sub_matrix(column(&dyadvars, "exports")?, &top);
    let y = Sociomatrix::new(pick(&labels, &top), exports.map(|v| (v + 1.0).ln()))?;

    let mut x = CovariateSet::new(top.len());
    let nodal: Vec<(&str, DVector<f64>)> = vec![
        ("pop", sub_vector(column(&nodevars, "pop")?, &top).map(f64::ln)),
        ("gdp", sub_vector(column(&nodevars, "gdp")?, &top).map(f64::ln)),
        ("polity", sub_vector(column(&nodevars, "polity")?, &top)),
    ];
    for (name, v) in &nodal {
        x.add_row(*name, v.clone())?;
    }
    for (name, v) in nodal {
        x.add_col(name, v)?;
    }
    for name in ["conflicts", "distance", "shared_igos", "polity_int"] {
        let mut m = sub_matrix(column(&dyadvars, name)?, &top);
        if name == "distance" {
            m = m.map(f64::ln);
        }
        m.fill_diagonal(0.0);
        x.add_dyadic(name, m)?;
    }
    Ok((y, x))
}

/// Friendship among law firm partners, with the other two relations as
/// dyadic covariates and five partner attributes as row and column
/// covariates.
pub fn lazega(dir: &DataDir) -> Result<(Sociomatrix, CovariateSet)> {
    let (labels, attrs) = dir.nodal("lazegalaw", "X.csv")?;
    let relations = dir.dyadic("lazegalaw", "Y.csv", &labels)?;
    let y = Sociomatrix::new(labels.clone(), slice_at(&relations, 1)?.values.clone())?;
    let mut x = CovariateSet::new(labels.len());
    let kept: Vec<&Covariate<DVector<f64>>> = [0, 1, 3, 4, 5]
        .iter()
        .map(|&k| slice_at(&attrs, k))
        .collect::<Result<_>>()?;
    for c in &kept {
        x.add_row(c.name.clone(), c.values.clone())?;
    }
    for c in &kept {
        x.add_col(c.name.clone(), c.values.clone())?;
    }
    for rel in relations.iter().enumerate().filter(|(k, _)| *k != 1).map(|(_, r)| r) {
        let mut m = rel.values.clone();
        m.fill_diagonal(0.0);
        x.add_dyadic(rel.name.clone(), m)?;
    }
    Ok((y, x))
}

/// Dominance counts among bighorn sheep with centered age and its square as
/// nodal covariates and the age product as an unnamed dyadic covariate.
pub fn sheep(dir: &DataDir) -> Result<(Sociomatrix, CovariateSet)> {
    let (labels, attrs) = dir.nodal("sheep", "age.csv")?;
    let dom = dir.dyadic("sheep", "dom.csv", &labels)?;
    let y = Sociomatrix::new(labels.clone(), slice_at(&dom, 0)?.values.clone())?;
    let age = column(&attrs, "age")?;
    let centered = age.add_scalar(-age.mean());
    let mut x = CovariateSet::new(labels.len());
    let squared = centered.map(|v| v * v);
    x.add_row("age", centered.clone())?;
    x.add_row("age2", squared.clone())?;
    x.add_col("age", centered.clone())?;
    x.add_col("age2", squared)?;
    x.add_dyadic("", outer(&centered, &centered, |a, b| a * b))?;
    Ok((y, x))
}

/// Ranked nominations among monks (the third relation) and the per-monk
/// nomination limit: 3, or the observed count where a monk named more.
pub fn sampson(dir: &DataDir) -> Result<(Sociomatrix, Vec<usize>)> {
    let (labels, _) = dir.nodal("sampsonmonks", "nodes.csv")?;
    let relations = dir.dyadic("sampsonmonks", "Y.csv", &labels)?;
    let y = Sociomatrix::new(labels, slice_at(&relations, 2)?.values.clone())?;
    let n = y.n();
    let odmax = (0..n)
        .map(|i| {
            let d = (0..n).filter(|&j| y.get(i, j).is_some_and(|v| v > 0.0)).count();
            d.max(3)
        })
        .collect();
    Ok((y, odmax))
}

struct Dutch {
    labels: Vec<String>,
    waves: Vec<DMatrix<f64>>,
    male: DVector<f64>,
    smoker: DVector<f64>,
    program: DVector<f64>,
}

fn dutch(dir: &DataDir) -> Result<Dutch> {
    let (labels, attrs) = dir.nodal("dutchcollege", "X.csv")?;
    let waves = dir.dyadic("dutchcollege", "Y.csv", &labels)?;
    if waves.len() < 2 {
        return Err(Error::TooFewTimePoints {
            needed: 2,
            got: waves.len(),
        });
    }
    Ok(Dutch {
        male: slice_at(&attrs, 0)?.values.clone(),
        smoker: slice_at(&attrs, 1)?.values.clone(),
        program: slice_at(&attrs, 2)?.values.clone(),
        waves: waves.into_iter().map(|c| c.values).collect(),
        labels,
    })
}

fn positive(m: &DMatrix<f64>, cut: f64) -> DMatrix<f64> {
    m.map(|v| if v.is_nan() { v } else if v >= cut { 1.0 } else { 0.0 })
}

fn dutch_slices(d: &Dutch, interaction: bool) -> Result<LongitudinalData> {
    let n = d.labels.len();
    let binary: Vec<DMatrix<f64>> = d.waves.iter().map(|w| positive(w, 2.0)).collect();
    let both_male = outer(&d.male, &d.male, |a, b| a * b);
    let both_smoke = outer(&d.smoker, &d.smoker, |a, b| a * b);
    let same_prog = outer(&d.program, &d.program, |a, b| if a == b { 1.0 } else { 0.0 });
    let mut slices = Vec::with_capacity(binary.len() - 1);
    for t in 1..binary.len() {
        let y = Sociomatrix::new(d.labels.clone(), binary[t].clone())?;
        // missing lag cells stay NaN and drop those dyads from the fit
        let lag = binary[t - 1].clone();
        let dyads = vec![
            ("Ylag", lag.clone()),
            ("tYlag", lag.transpose()),
            ("bothmale", both_male.clone()),
            ("bothsmoke", both_smoke.clone()),
            ("sameprog", same_prog.clone()),
        ];
        let nodes = vec![("male", d.male.clone()), ("smoker", d.smoker.clone())];
        // weights are zero for the first three transitions
        let w = if t > 3 { 1.0 } else { 0.0 };
        let mut x = CovariateSet::new(n);
        for (name, v) in &nodes {
            x.add_row(*name, v.clone())?;
        }
        if interaction {
            for (name, v) in &nodes {
                x.add_row(format!("{name}.w"), v * w)?;
            }
        }
        for (name, v) in &nodes {
            x.add_col(*name, v.clone())?;
        }
        if interaction {
            for (name, v) in &nodes {
                x.add_col(format!("{name}.w"), v * w)?;
            }
        }
        for (name, m) in &dyads {
            x.add_dyadic_with_missing(*name, m.clone())?;
        }
        if interaction {
            for (name, m) in &dyads {
                x.add_dyadic_with_missing(format!("{name}.w"), m * w)?;
            }
        }
        slices.push((y, x));
    }
    assemble_longitudinal(slices)
}

/// Friendship among college students over waves 2..7 coded as relation
/// level ≥ 2, with the lagged relation, its transpose, both-male,
/// both-smoker and same-program dyadic covariates and sex and smoking as
/// row and column covariates.
pub fn dutch_ar(dir: &DataDir) -> Result<LongitudinalData> {
    dutch_slices(&dutch(dir)?, false)
}

/// As [`dutch_ar`], adding `.w` copies of every covariate that are zero
/// for the first three transitions.
pub fn dutch_interaction(dir: &DataDir) -> Result<LongitudinalData> {
    dutch_slices(&dutch(dir)?, true)
}

/// The last wave coded as relation level > 1 with a male row and column
/// covariate and a same-sex dyadic covariate.
pub fn dutch_last_wave(dir: &DataDir) -> Result<(Sociomatrix, CovariateSet)> {
    let d = dutch(dir)?;
    let last = d.waves.last().expect("at least two waves");
    let y = Sociomatrix::new(d.labels.clone(), last.map(|v| if v.is_nan() { v } else if v > 1.0 { 1.0 } else { 0.0 }))?;
    let mut x = CovariateSet::new(d.labels.len());
    x.add_nodal("male", d.male.clone())?;
    let mut same = outer(&d.male, &d.male, |a, b| if a == b { 1.0 } else { 0.0 });
    same.fill_diagonal(0.0);
    x.add_dyadic("samesex", same)?;
    Ok((y, x))
}

/// Cold war cooperation and conflict: the sign of the time-averaged
/// relation, with centered mean log GDP and the sign of mean polity as node
/// covariates and their products and log distance as dyadic covariates.
pub fn coldwar(dir: &DataDir) -> Result<(Sociomatrix, CovariateSet)> {
    let (labels, gdp) = dir.nodal("coldwar", "gdp.csv")?;
    let (_, polity) = dir.nodal("coldwar", "polity.csv")?;
    let cc = dir.dyadic("coldwar", "cc.csv", &labels)?;
    let distance = dir.dyadic("coldwar", "distance.csv", &labels)?;
    let n = labels.len();
    if cc.is_empty() {
        return Err(Error::TooFewTimePoints { needed: 1, got: 0 });
    }
    let mut avg = DMatrix::zeros(n, n);
    for c in &cc {
        avg += &c.values;
    }
    let y = Sociomatrix::new(labels.clone(), avg.map(|v| if v.is_nan() { v } else { sign(v) }))?;

    let row_mean = |cols: &[Covariate<DVector<f64>>], f: &dyn Fn(f64) -> f64| {
        DVector::from_fn(n, |i, _| mean(&cols.iter().map(|c| f(c.values[i])).collect::<Vec<_>>()))
    };
    let lgdp = row_mean(&gdp, &f64::ln);
    let lgdp = lgdp.add_scalar(-lgdp.mean());
    let pol = row_mean(&polity, &|v| v).map(sign);
    let mut ldist = slice_at(&distance, 0)?.values.map(f64::ln);
    ldist.fill_diagonal(0.0);

    let mut x = CovariateSet::new(n);
    x.add_row("lgdp", lgdp.clone())?;
    x.add_row("polity", pol.clone())?;
    x.add_dyadic("igdp", outer(&lgdp, &lgdp, |a, b| a * b))?;
    x.add_dyadic("ipol", outer(&pol, &pol, |a, b| a * b))?;
    x.add_dyadic("ldist", ldist)?;
    Ok((y, x))
}

/// Every dataset name with the files a recipe reads.
pub fn layout() -> HashMap<&'static str, &'static [&'static str]> {
    HashMap::from([
        ("IR90s", &["nodevars.csv", "dyadvars.csv"][..]),
        ("lazegalaw", &["X.csv", "Y.csv"][..]),
        ("sheep", &["age.csv", "dom.csv"][..]),
        ("sampsonmonks", &["nodes.csv", "Y.csv"][..]),
        ("dutchcollege", &["X.csv", "Y.csv"][..]),
        ("coldwar", &["gdp.csv", "polity.csv", "cc.csv", "distance.csv"][..]),
    ])
}
