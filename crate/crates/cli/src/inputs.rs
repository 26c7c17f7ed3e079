//! Reading command-line inputs and the exit-code error type.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use ame_core::data::{
    assemble_longitudinal, load_dyadic_covariates, load_nodal_covariates, load_sociomatrix_path, Covariate, Format,
    LongitudinalData,
};
use ame_core::{CovariateSet, Error, Sociomatrix};
use nalgebra::{DMatrix, DVector};

/// A failure with its exit code: 1 for bad input, 2 for failures while running.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Degenerate(_) | Error::EmptyInterval { .. } | Error::Io { .. } | Error::Json(_) | Error::Csv(_) => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Input-side errors are validation failures whatever their cause.
pub fn input<T>(r: ame_core::Result<T>, path: &Path) -> CliResult<T> {
    r.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn load_y(path: &Path) -> CliResult<Sociomatrix> {
    input(load_sociomatrix_path(path), path)
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn load_nodal(path: &Path, labels: &[String]) -> CliResult<Vec<Covariate<DVector<f64>>>> {
    input(load_nodal_covariates(open(path)?, Format::from_path(path), labels), path)
}

pub fn load_dyadic(path: &Path, labels: &[String]) -> CliResult<Vec<Covariate<DMatrix<f64>>>> {
    input(load_dyadic_covariates(open(path)?, Format::from_path(path), labels), path)
}

/// Node labels from the first column of a node table.
pub fn table_labels(path: &Path) -> CliResult<Vec<String>> {
    if Format::from_path(path) == Format::Json {
        #[derive(serde::Deserialize)]
        struct Labels {
            labels: Vec<String>,
        }
        let parsed: Labels = serde_json::from_reader(open(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        return Ok(parsed.labels);
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(open(path)?);
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if let Some(l) = rec.get(0) {
            if !l.trim().is_empty() {
                labels.push(l.trim().to_string());
            }
        }
    }
    Ok(labels)
}

/// Where the covariates of one fit come from.
#[derive(Debug, Default, Clone)]
pub struct CovariateFiles {
    /// Fully observed dyadic tables.
    pub dyadic: Vec<PathBuf>,
    /// Dyadic tables whose missing entries drop the dyad (lagged outcomes).
    pub dyadic_with_missing: Vec<PathBuf>,
    pub row: Vec<PathBuf>,
    pub col: Vec<PathBuf>,
}

pub fn covariates(labels: &[String], files: &CovariateFiles) -> CliResult<CovariateSet> {
    let mut x = CovariateSet::new(labels.len());
    for path in &files.row {
        for c in load_nodal(path, labels)? {
            input(x.add_row(c.name, c.values), path)?;
        }
    }
    for path in &files.col {
        for c in load_nodal(path, labels)? {
            input(x.add_col(c.name, c.values), path)?;
        }
    }
    for path in &files.dyadic {
        for c in load_dyadic(path, labels)? {
            input(x.add_dyadic(c.name, c.values), path)?;
        }
    }
    for path in &files.dyadic_with_missing {
        for c in load_dyadic(path, labels)? {
            input(x.add_dyadic_with_missing(c.name, c.values), path)?;
        }
    }
    Ok(x)
}

/// `--odmax`: a count for every node, or a node table whose first column
/// holds each node's count.
pub fn odmax(value: &str, labels: &[String]) -> CliResult<Vec<usize>> {
    if let Ok(k) = value.trim().parse::<usize>() {
        return Ok(vec![k; labels.len()]);
    }
    let path = Path::new(value);
    if !path.is_file() {
        return Err(CliError::Validation(format!(
            "--odmax {value:?} is neither a non-negative integer nor a file"
        )));
    }
    let cols = load_nodal(path, labels)?;
    let col = cols
        .first()
        .ok_or_else(|| CliError::Validation(format!("{}: no odmax column", path.display())))?;
    col.values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Validation(format!("odmax for {} is {v}, not a count", labels[i])))
            }
        })
        .collect()
}

/// The files of one time point in a longitudinal directory.
#[derive(Debug, Clone)]
pub struct Slice {
    pub t: usize,
    pub y: PathBuf,
    pub files: CovariateFiles,
}

/// Splits `stem_<t>` into the stem and t.
fn time_suffix(stem: &str) -> Option<(&str, usize)> {
    let (head, tail) = stem.rsplit_once('_')?;
    Some((head, tail.parse().ok()?))
}

fn is_table(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "json"))
}

/// Lists a longitudinal directory: `Y_<t>` slices, shared `Xd`, `Xr`, `Xc`
/// tables, and per-time `Xd_<t>`, `Xd-<tag>_<t>`, `Xr_<t>`, `Xc_<t>` tables.
/// Per-time dyadic tables may have missing entries.
pub fn scan_longitudinal(dir: &Path) -> CliResult<Vec<Slice>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_table(p))
        .collect();
    entries.sort();
    let stem = |p: &Path| p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();

    let mut slices: Vec<Slice> = entries
        .iter()
        .filter_map(|p| match time_suffix(&stem(p)) {
            Some(("Y", t)) => Some(Slice {
                t,
                y: p.clone(),
                files: CovariateFiles::default(),
            }),
            _ => None,
        })
        .collect();
    if slices.is_empty() {
        return Err(CliError::Validation(format!("{}: no Y_<t> files", dir.display())));
    }
    slices.sort_by_key(|s| s.t);
    if let Some(w) = slices.windows(2).find(|w| w[0].t == w[1].t) {
        return Err(CliError::Validation(format!("{}: time {} appears twice", dir.display(), w[0].t)));
    }

    for s in &mut slices {
        for p in &entries {
            match stem(p).as_str() {
                "Xd" => s.files.dyadic.push(p.clone()),
                "Xr" => s.files.row.push(p.clone()),
                "Xc" => s.files.col.push(p.clone()),
                _ => {}
            }
        }
    }
    for p in &entries {
        let name = stem(p);
        let Some((head, t)) = time_suffix(&name) else {
            continue;
        };
        if head == "Y" {
            continue;
        }
        let Some(s) = slices.iter_mut().find(|s| s.t == t) else {
            return Err(CliError::Validation(format!("{}: no Y_{t} for this covariate file", p.display())));
        };
        match head {
            "Xr" => s.files.row.push(p.clone()),
            "Xc" => s.files.col.push(p.clone()),
            h if h == "Xd" || h.starts_with("Xd-") => s.files.dyadic_with_missing.push(p.clone()),
            _ => {}
        }
    }
    Ok(slices)
}

pub fn longitudinal(dir: &Path) -> CliResult<LongitudinalData> {
    let slices = scan_longitudinal(dir)?;
    let mut parts = Vec::with_capacity(slices.len());
    for s in &slices {
        let y = load_y(&s.y)?;
        let x = covariates(y.labels(), &s.files)?;
        parts.push((y, x));
    }
    assemble_longitudinal(parts).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        v.to_string()
    }
}

/// Writes dyadic slices as long-form CSV `i,j,name,value`.
pub fn write_dyadic(path: &Path, labels: &[String], slices: &[(&str, &DMatrix<f64>)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    w.write_record(["i", "j", "name", "value"]).map_err(runtime)?;
    for (name, m) in slices {
        for i in 0..labels.len() {
            for j in (0..labels.len()).filter(|&j| j != i) {
                w.write_record([labels[i].as_str(), labels[j].as_str(), name, &fmt(m[(i, j)])])
                    .map_err(runtime)?;
            }
        }
    }
    w.flush().map_err(runtime)?;
    Ok(())
}

pub fn write_sociomatrix(path: &Path, y: &Sociomatrix) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    if Format::from_path(path) == Format::Json {
        y.write_json(&mut out)?;
    } else {
        y.write_csv(&mut out)?;
    }
    out.flush().map_err(runtime)?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}
