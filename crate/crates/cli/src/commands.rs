use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ame_core::data::assemble_longitudinal;
use ame_core::design::{lag_dyadic, nodal_product as product, same_category as same};
use ame_core::engine::{simulate_y, FitResult, ModelSpec};
use ame_core::gof::{gof_compare, write_gof_report, write_histogram, GOF_NAMES};
use ame_core::latent::default_odmax;
use ame_core::{fit_ame, fit_ame_rep, gofstats, CovariateSet, Family, Sociomatrix};
use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::inputs::{
    covariates, create_dir, input, load_nodal, load_y, longitudinal, odmax, runtime, scan_longitudinal, table_labels,
    write_dyadic, write_sociomatrix, CliError, CliResult, CovariateFiles,
};
use crate::{FitArgs, GofArgs, LagArgs, ModelArgs, NodalProductArgs, PredictArgs, SameCategoryArgs, SimulateArgs};

/// Iterations the undirected sampler needs to mix over the eigenmodel.
const SYMMETRIC_NSCAN: usize = 100_000;

fn family(model: &ModelArgs) -> CliResult<Family> {
    Family::from_str(&model.model).map_err(|e| CliError::Validation(e.to_string()))
}

fn write_file(path: &Path, write: impl FnOnce(&mut fs::File) -> ame_core::Result<()>) -> CliResult<()> {
    let mut file = fs::File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    write(&mut file).map_err(runtime)
}

fn write_gof_files(dir: &Path, observed: &ame_core::GofStats, fit: &FitResult, bins: usize) -> CliResult<()> {
    let (report, hist) = gof_compare(observed, &fit.simulated_gof(), bins);
    write_file(&dir.join("gof.csv"), |f| write_gof_report(&report, f))?;
    write_file(&dir.join("gof_hist.csv"), |f| write_histogram(&hist, f))
}

pub fn fit(a: FitArgs) -> CliResult<()> {
    let family = family(&a.model)?;
    let mut spec = if a.model.symmetric {
        ModelSpec::symmetric(family)
    } else {
        ModelSpec::new(family)
    };
    spec.rank = a.rank;
    spec.rvar = !a.no_rvar;
    spec.cvar = !a.no_cvar;
    spec.dcor = !a.no_dcor && !a.model.symmetric;
    spec.burn = a.burn.unwrap_or(spec.burn);
    spec.nscan = a.nscan.unwrap_or(spec.nscan);
    spec.odens = a.odens.unwrap_or(spec.odens);
    spec.seed = a.seed;
    spec.chains = a.chains;
    if a.model.symmetric && spec.nscan < SYMMETRIC_NSCAN {
        warn!(
            "symmetric models mix slowly; nscan {} is below the recommended {SYMMETRIC_NSCAN}",
            spec.nscan
        );
    }
    if a.model.symmetric && a.xc.is_some() {
        return Err(CliError::Validation(
            "symmetric models take node covariates through --xr only".into(),
        ));
    }

    let result = match &a.longitudinal {
        Some(dir) => {
            if !a.xd.is_empty() || a.xr.is_some() || a.xc.is_some() {
                return Err(CliError::Validation(
                    "with --longitudinal, covariates come from the directory, not --xd/--xr/--xc".into(),
                ));
            }
            let data = longitudinal(dir)?;
            set_odmax(&mut spec, &a.model, data.labels())?;
            fit_ame_rep(&data, &spec)?
        }
        None => {
            let path = a.y.as_deref().expect("clap requires --y without --longitudinal");
            let y = load_y(path)?;
            let files = CovariateFiles {
                dyadic: a.xd.clone(),
                row: a.xr.iter().cloned().collect(),
                col: a.xc.iter().cloned().collect(),
                ..Default::default()
            };
            let x = covariates(y.labels(), &files)?;
            set_odmax(&mut spec, &a.model, y.labels())?;
            fit_ame(&y, &x, &spec)?
        }
    };
    result.write_dir(&a.out)?;
    write_gof_files(&a.out, &result.observed_gof(), &result, 20)?;
    print!("{}", result.summary());
    Ok(())
}

fn set_odmax(spec: &mut ModelSpec, model: &ModelArgs, labels: &[String]) -> CliResult<()> {
    match &model.odmax {
        Some(v) => spec.odmax = Some(odmax(v, labels)?),
        None if spec.family.uses_odmax() => {
            warn!("no --odmax given; using each row's largest observed outdegree");
        }
        None => {}
    }
    Ok(())
}

pub fn gof(a: GofArgs) -> CliResult<()> {
    let y = load_y(&a.y)?;
    let observed = y.observed_values();
    if observed.windows(2).all(|w| w[0] == w[1]) {
        warn!("{} is constant; its statistics are zero", a.y.display());
    }
    let stats = gofstats(y.values());
    let mut out = std::io::stdout().lock();
    let header: Vec<String> = GOF_NAMES.iter().map(|n| format!("{n:>12}")).collect();
    let values: Vec<String> = stats.to_array().iter().map(|v| format!("{v:>12.8}")).collect();
    writeln!(out, "{}", header.join("")).map_err(runtime)?;
    writeln!(out, "{}", values.join("")).map_err(runtime)?;

    if let Some(dir) = &a.fit {
        let fit = input(FitResult::read_dir(dir), dir)?;
        let target = a.out.as_deref().unwrap_or(dir);
        create_dir(target)?;
        write_gof_files(target, &stats, &fit, a.bins)?;
        writeln!(out, "comparison written to {}", target.join("gof.csv").display()).map_err(runtime)?;
    }
    Ok(())
}

/// Parameters for `simulate`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimParams {
    n: Option<usize>,
    labels: Option<Vec<String>>,
    #[serde(default)]
    intercept: f64,
    #[serde(default)]
    va: f64,
    #[serde(default)]
    cab: f64,
    #[serde(default)]
    vb: f64,
    #[serde(default)]
    rho: f64,
    #[serde(default = "one")]
    s2e: f64,
    /// Added to the latent mean (regression and multiplicative terms).
    mean: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

/// Row and column effects with covariance [[va, cab], [cab, vb]].
fn draw_effects(p: &SimParams, n: usize, symmetric: bool, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>) {
    let sa = p.va.sqrt();
    let (slope, rest) = if p.va > 0.0 {
        (p.cab / sa, (p.vb - p.cab * p.cab / p.va).max(0.0).sqrt())
    } else {
        (0.0, p.vb.sqrt())
    };
    let mut a = DVector::zeros(n);
    let mut b = DVector::zeros(n);
    for i in 0..n {
        let (z1, z2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        a[i] = sa * z1;
        b[i] = if symmetric { a[i] } else { slope * z1 + rest * z2 };
    }
    (a, b)
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let family = family(&a.model)?;
    let text = fs::read_to_string(&a.params).map_err(|e| CliError::Validation(format!("{}: {e}", a.params.display())))?;
    let p: SimParams =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", a.params.display())))?;
    if p.va < 0.0 || p.vb < 0.0 || p.s2e < 0.0 || p.rho.abs() > 1.0 || p.cab * p.cab > p.va * p.vb + 1e-12 {
        return Err(CliError::Validation(
            "need va, vb, s2e ≥ 0, |rho| ≤ 1 and cab² ≤ va·vb".into(),
        ));
    }
    let reference = a.reference.as_deref().map(load_y).transpose()?;
    let n = p
        .n
        .or(p.labels.as_ref().map(Vec::len))
        .or(p.mean.as_ref().map(Vec::len))
        .or(reference.as_ref().map(Sociomatrix::n))
        .ok_or_else(|| CliError::Validation("give n, labels, mean or --reference to fix the node count".into()))?;
    let labels = match (&p.labels, &reference) {
        (Some(l), _) => l.clone(),
        (None, Some(r)) => r.labels().to_vec(),
        (None, None) => (1..=n).map(|i| format!("n{i}")).collect(),
    };
    if labels.len() != n || reference.as_ref().is_some_and(|r| r.n() != n) {
        return Err(CliError::Validation("labels, mean and reference disagree on n".into()));
    }
    let offset = match &p.mean {
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Validation(format!("mean must be {n}x{n}")));
            }
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        }
        None => DMatrix::zeros(n, n),
    };
    let od = match (&a.model.odmax, &reference) {
        (Some(v), _) => Some(odmax(v, &labels)?),
        (None, Some(r)) if family.uses_odmax() => {
            warn!("no --odmax given; using each row's largest outdegree in the reference");
            Some(default_odmax(r.values()))
        }
        (None, None) if family.uses_odmax() => {
            return Err(CliError::Validation(format!("{family} simulation needs --odmax or --reference")));
        }
        _ => None,
    };
    if matches!(family, Family::Ord | Family::Rrl) && reference.is_none() {
        return Err(CliError::Validation(format!("{family} simulation needs --reference")));
    }
    let s2 = if family == Family::Nrm {
        p.s2e
    } else {
        if p.s2e != 1.0 {
            warn!("{family} uses unit error variance; ignoring s2e = {}", p.s2e);
        }
        1.0
    };

    create_dir(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for k in 1..=a.reps {
        let (ra, rb) = draw_effects(&p, n, a.model.symmetric, &mut rng);
        let mut mean = DMatrix::from_fn(n, n, |i, j| p.intercept + ra[i] + rb[j] + offset[(i, j)]);
        if a.model.symmetric {
            mean = (&mean + mean.transpose()) / 2.0;
        }
        let y = simulate_y(
            &mean,
            p.rho,
            s2,
            family,
            a.model.symmetric,
            od.as_deref(),
            reference.as_ref().map(Sociomatrix::values),
            &mut rng,
        )?;
        let y = Sociomatrix::new(labels.clone(), y)?;
        write_sociomatrix(&a.out.join(format!("Y_{k}.csv")), &y)?;
    }
    Ok(())
}

pub fn predict(a: PredictArgs) -> CliResult<()> {
    let fit = input(FitResult::read_dir(&a.fit), &a.fit)?;
    let y = load_y(&a.y)?;
    if y.labels() != fit.labels.as_slice() {
        return Err(CliError::Validation(format!(
            "{} has different nodes from the fit",
            a.y.display()
        )));
    }
    let ypm = a
        .time
        .checked_sub(1)
        .and_then(|t| fit.ypm.get(t))
        .ok_or_else(|| CliError::Validation(format!("--time {} outside 1..={}", a.time, fit.ypm.len())))?;
    let truth = a.truth.as_deref().map(load_y).transpose()?;
    if truth.as_ref().is_some_and(|t| t.labels() != y.labels()) {
        return Err(CliError::Validation("truth has different nodes from the fit".into()));
    }
    let n = y.n();
    let missing: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !y.is_observed(i, j))
        .collect();
    if missing.is_empty() {
        warn!("{} has no missing cells; writing an empty prediction file", a.y.display());
    }

    let mut w = csv::Writer::from_path(&a.out).map_err(runtime)?;
    let mut header = vec!["i", "j", "prediction"];
    if truth.is_some() {
        header.push("truth");
    }
    w.write_record(&header).map_err(runtime)?;
    let (mut sse, mut scored) = (0.0, 0usize);
    let labels = y.labels();
    for &(i, j) in &missing {
        let pred = ypm[(i, j)];
        let mut rec = vec![labels[i].clone(), labels[j].clone(), pred.to_string()];
        if let Some(t) = &truth {
            match t.get(i, j) {
                Some(v) => {
                    sse += (pred - v).powi(2);
                    scored += 1;
                    rec.push(v.to_string());
                }
                None => rec.push("NA".into()),
            }
        }
        w.write_record(&rec).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    println!("predicted {} missing cells", missing.len());
    if truth.is_some() {
        if scored == 0 {
            warn!("no predicted cell is observed in the truth file");
        } else {
            println!("MSE: {:.4} over {scored} cells", sse / scored as f64);
        }
    }
    Ok(())
}

fn nodal_column(path: &Path, name: &str) -> CliResult<(Vec<String>, DVector<f64>)> {
    let labels = table_labels(path)?;
    let cols = load_nodal(path, &labels)?;
    let col = cols
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| CliError::Validation(format!("{}: no column {name:?}", path.display())))?;
    if let Some(i) = col.values.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Validation(format!("{name} is missing for {}", labels[i])));
    }
    Ok((labels, col.values))
}

pub fn nodal_product(a: NodalProductArgs) -> CliResult<()> {
    let col_name = a.col.clone().unwrap_or_else(|| a.row.clone());
    let (labels, xr) = nodal_column(&a.x, &a.row)?;
    let (_, xc) = nodal_column(&a.x, &col_name)?;
    let m = product(xr.as_slice(), xc.as_slice())?;
    let name = a.name.unwrap_or_else(|| format!("{}.{}", a.row, col_name));
    write_dyadic(&a.out, &labels, &[(&name, &m)])
}

pub fn same_category(a: SameCategoryArgs) -> CliResult<()> {
    let (labels, x) = nodal_column(&a.x, &a.column)?;
    let m = same(x.as_slice());
    let name = a.name.unwrap_or_else(|| format!("same_{}", a.column));
    write_dyadic(&a.out, &labels, &[(&name, &m)])
}

pub fn lag(a: LagArgs) -> CliResult<()> {
    let slices = scan_longitudinal(&a.longitudinal)?;
    if slices.len() < 2 {
        return Err(CliError::Validation(format!(
            "lagging needs at least 2 time points, {} has {}",
            a.longitudinal.display(),
            slices.len()
        )));
    }
    let ys: Vec<Sociomatrix> = slices.iter().map(|s| load_y(&s.y)).collect::<CliResult<_>>()?;
    let labels = ys[0].labels().to_vec();
    let data = assemble_longitudinal(ys.iter().map(|y| (y.clone(), CovariateSet::new(y.n()))).collect())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let lags = lag_dyadic(&data, false)?;
    let tlags = if a.transpose { Some(lag_dyadic(&data, true)?) } else { None };
    let tname = format!("t{}", a.name);

    create_dir(&a.out)?;
    let copy = |from: &Path, to: &Path| -> CliResult<()> {
        fs::copy(from, to)
            .map(|_| ())
            .map_err(|e| CliError::Runtime(format!("{} -> {}: {e}", from.display(), to.display())))
    };
    let renamed = |p: &Path, k: usize| -> Option<String> {
        let stem = p.file_stem()?.to_str()?;
        let ext = p.extension()?.to_str()?;
        let (head, _) = stem.rsplit_once('_').filter(|(_, t)| t.parse::<usize>().is_ok())?;
        Some(format!("{head}_{k}.{ext}"))
    };
    let mut shared_done = false;
    for (k, s) in slices.iter().enumerate().skip(1) {
        let ext = s.y.extension().and_then(|e| e.to_str()).unwrap_or("csv");
        copy(&s.y, &a.out.join(format!("Y_{k}.{ext}")))?;
        let f = &s.files;
        for p in f.dyadic.iter().chain(&f.dyadic_with_missing).chain(&f.row).chain(&f.col) {
            match renamed(p, k) {
                Some(name) => copy(p, &a.out.join(name))?,
                None if !shared_done => copy(p, &a.out.join(p.file_name().expect("listed file")))?,
                None => {}
            }
        }
        shared_done = true;
        write_dyadic(&a.out.join(format!("Xd-{}_{k}.csv", a.name)), &labels, &[(&a.name, &lags[k - 1])])?;
        if let Some(t) = &tlags {
            write_dyadic(&a.out.join(format!("Xd-{tname}_{k}.csv")), &labels, &[(&tname, &t[k - 1])])?;
        }
    }
    Ok(())
}
