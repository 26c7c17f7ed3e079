use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ame_core::data::load_sociomatrix_path;
use ame_core::{gofstats, Sociomatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

macro_rules! sv {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

fn ame(args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ame")).args(args).output().expect("run ame")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("v{i}")).collect()
}

fn write_y(path: &Path, m: DMatrix<f64>) {
    let y = Sociomatrix::new(labels(m.nrows()), m).unwrap();
    y.write_csv(fs::File::create(path).unwrap()).unwrap();
}

/// Node table with `cols` standard normal columns.
fn write_nodes(path: &Path, n: usize, cols: &[&str], rng: &mut ChaCha8Rng) {
    let mut s = format!("node,{}\n", cols.join(","));
    for l in labels(n) {
        let vals: Vec<String> = cols.iter().map(|_| rng.sample::<f64, _>(StandardNormal).to_string()).collect();
        s.push_str(&format!("{l},{}\n", vals.join(",")));
    }
    fs::write(path, s).unwrap();
}

fn write_dyads(path: &Path, n: usize, names: &[&str], rng: &mut ChaCha8Rng) {
    let l = labels(n);
    let mut s = String::from("i,j,name,value\n");
    for name in names {
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                s.push_str(&format!("{},{},{name},{}\n", l[i], l[j], rng.sample::<f64, _>(StandardNormal)));
            }
        }
    }
    fs::write(path, s).unwrap();
}

fn gaussian_y(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_fn(n, n, |i, j| a[i] - a[j] / 2.0 + rng.sample::<f64, _>(StandardNormal))
}

fn binary_y(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian_y(n, rng).map(|v| if v > 0.3 { 1.0 } else { 0.0 })
}

const SHORT: [&str; 6] = ["--burn", "20", "--nscan", "200", "--odens", "5"];

fn path(p: impl AsRef<Path>) -> String {
    p.as_ref().to_str().unwrap().to_string()
}

fn coefficient_rows(summary: &str) -> Vec<String> {
    summary
        .lines()
        .skip_while(|l| !l.starts_with("Regression coefficients:"))
        .skip(2)
        .take_while(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn srrm_fit_writes_eleven_coefficient_rows() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 15;
    write_y(&f.p("y.csv"), gaussian_y(n, &mut rng));
    write_nodes(&f.p("xn.csv"), n, &["pop", "gdp", "polity"], &mut rng);
    write_dyads(&f.p("xd.csv"), n, &["conflicts", "distance", "shared_igos", "polity_int"], &mut rng);
    let out = f.p("fit");
    let mut args = sv![
        "fit", "--y", path(&f.p("y.csv")), "--xd", path(&f.p("xd.csv")), "--xr", path(&f.p("xn.csv")),
        "--xc", path(&f.p("xn.csv")), "--model", "nrm", "--out", path(&out),
    ];
    args.extend(SHORT.map(String::from));
    let o = ame(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let rows = coefficient_rows(&summary);
    assert_eq!(rows.len(), 11, "{summary}");
    assert_eq!(rows[0], "intercept");
    assert_eq!(rows[10], "polity_int.dyad");
    assert!(summary.contains("Variance parameters:"));
    for file in ["BETA.csv", "VC.csv", "GOF.csv", "gof.csv", "gof_hist.csv", "spec.json", "YPM.csv", "U.csv"] {
        assert!(out.join(file).is_file(), "{file}");
    }
    assert_eq!(stdout(&o), summary);
}

#[test]
fn spec_json_reproduces_a_run() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    write_y(&f.p("y.csv"), binary_y(10, &mut rng));
    let run = |out: &str| {
        let mut args = sv!["fit", "--y", path(&f.p("y.csv")), "--model", "bin", "--rank", "1", "--chains", "2", "--seed", "9", "--out", out];
        args.extend(SHORT.map(String::from));
        assert!(ame(&args).status.success());
        fs::read(Path::new(out).join("BETA.csv")).unwrap()
    };
    let a = run(&path(&f.p("a")));
    let b = run(&path(&f.p("b")));
    assert_eq!(a, b);
    let spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.p("a").join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["seed"], 9);
    assert_eq!(spec["chains"], 2);
    assert_eq!(spec["family"], "bin");
}

#[test]
fn frn_without_odmax_warns_and_defaults() {
    let f = Fixture::new();
    let n = 10;
    let mut y = DMatrix::zeros(n, n);
    for i in 0..n {
        y[(i, (i + 1) % n)] = 2.0;
        y[(i, (i + 2) % n)] = 1.0;
    }
    write_y(&f.p("y.csv"), y);
    let out = f.p("fit");
    let mut args = sv!["fit", "--y", path(&f.p("y.csv")), "--model", "frn", "--out", path(&out)];
    args.extend(SHORT.map(String::from));
    let o = ame(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("odmax"), "{}", stderr(&o));
    let spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["odmax"], serde_json::json!(vec![2; n]));
}

#[test]
fn ordinal_summary_has_no_intercept() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 12;
    write_y(&f.p("y.csv"), gaussian_y(n, &mut rng).map(|v| v.round().clamp(-1.0, 2.0)));
    write_nodes(&f.p("xn.csv"), n, &["age"], &mut rng);
    let out = f.p("fit");
    let mut args = sv![
        "fit", "--y", path(&f.p("y.csv")), "--xr", path(&f.p("xn.csv")), "--xc", path(&f.p("xn.csv")),
        "--model", "ord", "--out", path(&out),
    ];
    args.extend(SHORT.map(String::from));
    let o = ame(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = coefficient_rows(&fs::read_to_string(out.join("summary.txt")).unwrap());
    assert_eq!(rows, ["age.row", "age.col"]);
}

#[test]
fn validation_errors_exit_with_one() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    write_y(&f.p("y.csv"), gaussian_y(8, &mut rng));
    let y = path(&f.p("y.csv")).to_string();
    let out = path(&f.p("fit")).to_string();
    let cases: Vec<Vec<String>> = vec![
        sv!["fit", "--y", &y, "--model", "poisson", "--out", &out],
        sv!["fit", "--y", "/no/such/file.csv", "--out", &out],
        sv!["fit", "--y", &y, "--out", &out, "--bogus"],
        sv!["fit", "--y", &y, "--out", &out, "--nscan", "100", "--odens", "7"],
        sv!["fit", "--y", &y, "--out", &out, "--symmetric", "--nscan", "100", "--odens", "10"],
        sv!["fit", "--y", &y, "--out", &out, "--rank", "9"],
        sv!["fit", "--y", &y, "--out", &out, "--odmax", "2"],
    ];
    for args in cases {
        let o = ame(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("error"), "{args:?}");
    }
}

#[test]
fn short_symmetric_runs_warn() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = gaussian_y(10, &mut rng);
    write_y(&f.p("y.csv"), (&g + g.transpose()) / 2.0);
    let mut args = sv!["fit", "--y", path(&f.p("y.csv")), "--symmetric", "--out", path(&f.p("fit"))];
    args.extend(SHORT.map(String::from));
    let o = ame(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("100000"), "{}", stderr(&o));
    assert!(f.p("fit").join("L.csv").is_file());
}

#[test]
fn gof_prints_statistics_and_compares_with_a_fit() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = gaussian_y(10, &mut rng);
    write_y(&f.p("y.csv"), m);
    let o = ame(&sv!["gof", "--y", path(&f.p("y.csv"))]);
    assert!(o.status.success());
    let text = stdout(&o);
    let printed: Vec<f64> = text.lines().nth(1).unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
    let expected = gofstats(load_sociomatrix_path(f.p("y.csv")).unwrap().values()).to_array();
    for k in 0..4 {
        assert!((printed[k] - expected[k]).abs() < 1e-8);
    }

    let mut args = sv!["fit", "--y", path(&f.p("y.csv")), "--out", path(&f.p("fit"))];
    args.extend(SHORT.map(String::from));
    assert!(ame(&args).status.success());
    let o = ame(&sv!["gof", "--y", path(&f.p("y.csv")), "--fit", path(&f.p("fit")), "--out", path(&f.p("cmp"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(f.p("cmp").join("gof.csv")).unwrap();
    assert_eq!(report.lines().count(), 5, "{report}");
}

#[test]
fn gof_on_constant_matrix_warns_and_prints_zeros() {
    let f = Fixture::new();
    write_y(&f.p("y.csv"), DMatrix::from_element(6, 6, 1.0));
    let o = ame(&sv!["gof", "--y", path(&f.p("y.csv"))]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("constant"));
    let values: Vec<f64> = stdout(&o).lines().nth(1).unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(values, vec![0.0; 4]);
}

#[test]
fn simulate_respects_odmax_and_seed() {
    let f = Fixture::new();
    fs::write(f.p("params.json"), r#"{"n": 12, "intercept": 1.0, "va": 0.5, "cab": 0.1, "vb": 0.5, "rho": 0.3}"#).unwrap();
    let run = |out: &str| {
        let o = ame(&sv!["simulate", "--params", path(&f.p("params.json")), "--model", "frn", "--odmax", "3", "--reps", "3", "--seed", "4", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run(&path(&f.p("a")));
    run(&path(&f.p("b")));
    for k in 1..=3 {
        let file = format!("Y_{k}.csv");
        assert_eq!(fs::read(f.p("a").join(&file)).unwrap(), fs::read(f.p("b").join(&file)).unwrap());
        let y = load_sociomatrix_path(f.p("a").join(&file)).unwrap();
        for i in 0..y.n() {
            let d = (0..y.n()).filter(|&j| y.get(i, j).is_some_and(|v| v > 0.0)).count();
            assert!(d <= 3);
        }
    }
}

#[test]
fn zero_variance_gaussian_simulation_is_constant() {
    let f = Fixture::new();
    fs::write(f.p("params.json"), r#"{"n": 7, "intercept": 2.5, "s2e": 0.0}"#).unwrap();
    let o = ame(&sv!["simulate", "--params", path(&f.p("params.json")), "--out", path(&f.p("sim"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let y = load_sociomatrix_path(f.p("sim").join("Y_1.csv")).unwrap();
    assert!(y.observed_values().iter().all(|&v| v == 2.5));
}

#[test]
fn predict_scores_masked_binary_cells() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 14;
    let truth = binary_y(n, &mut rng);
    let mut masked = truth.clone();
    for i in 0..4 {
        for j in 0..n {
            masked[(i, j)] = f64::NAN;
        }
    }
    write_y(&f.p("truth.csv"), truth);
    write_y(&f.p("y.csv"), masked);
    let mut args = sv!["fit", "--y", path(&f.p("y.csv")), "--model", "bin", "--out", path(&f.p("fit"))];
    args.extend(SHORT.map(String::from));
    assert!(ame(&args).status.success());
    let o = ame(&sv![
        "predict", "--fit", path(&f.p("fit")), "--y", path(&f.p("y.csv")), "--truth", path(&f.p("truth.csv")),
        "--out", path(&f.p("pred.csv")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mse_line = text.lines().find(|l| l.starts_with("MSE: ")).expect("MSE line");
    let mse = mse_line.split_whitespace().nth(1).unwrap();
    assert_eq!(mse.split('.').nth(1).unwrap().len(), 4, "{mse_line}");
    assert!(mse.parse::<f64>().unwrap().is_finite());

    let pred = fs::read_to_string(f.p("pred.csv")).unwrap();
    let rows: Vec<&str> = pred.lines().skip(1).collect();
    assert_eq!(rows.len(), 4 * (n - 1));
    for r in rows {
        let p: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn predict_without_missing_cells_writes_empty_file() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    write_y(&f.p("y.csv"), gaussian_y(8, &mut rng));
    let mut args = sv!["fit", "--y", path(&f.p("y.csv")), "--out", path(&f.p("fit"))];
    args.extend(SHORT.map(String::from));
    assert!(ame(&args).status.success());
    let o = ame(&sv!["predict", "--fit", path(&f.p("fit")), "--y", path(&f.p("y.csv")), "--out", path(&f.p("pred.csv"))]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("no missing cells"));
    assert_eq!(fs::read_to_string(f.p("pred.csv")).unwrap().lines().count(), 1);
}

#[test]
fn covariate_builders_write_long_form() {
    let f = Fixture::new();
    fs::write(f.p("x.csv"), "node,age,prog\nv1,1,1\nv2,2,2\nv3,3,1\n").unwrap();
    let o = ame(&sv!["nodal-product", "--x", path(&f.p("x.csv")), "--row", "age", "--out", path(&f.p("prod.csv"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(f.p("prod.csv")).unwrap();
    assert!(text.starts_with("i,j,name,value\n"));
    assert!(text.contains("v2,v3,age.age,6\n"));
    assert_eq!(text.lines().count(), 7);

    let o = ame(&sv!["same-category", "--x", path(&f.p("x.csv")), "--column", "prog", "--out", path(&f.p("same.csv"))]);
    assert!(o.status.success());
    let text = fs::read_to_string(f.p("same.csv")).unwrap();
    assert!(text.contains("v1,v3,same_prog,1\n"));
    assert!(text.contains("v1,v2,same_prog,0\n"));
}

#[test]
fn lagged_longitudinal_fit() {
    let f = Fixture::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 10;
    let series = f.p("series");
    fs::create_dir(&series).unwrap();
    let mut waves = Vec::new();
    for t in 1..=4 {
        let mut y = binary_y(n, &mut rng);
        y[(0, 1)] = if t == 2 { f64::NAN } else { y[(0, 1)] };
        write_y(&series.join(format!("Y_{t}.csv")), y.clone());
        waves.push(y);
    }
    write_nodes(&series.join("Xr.csv"), n, &["male"], &mut rng);
    let lagged = f.p("lagged");
    let o = ame(&sv!["lag", "--longitudinal", path(&series), "--transpose", "--out", path(&lagged)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 1..=3 {
        assert!(lagged.join(format!("Y_{k}.csv")).is_file());
        assert!(lagged.join(format!("Xd-Ylag_{k}.csv")).is_file());
        assert!(lagged.join(format!("Xd-tYlag_{k}.csv")).is_file());
    }
    assert!(lagged.join("Xr.csv").is_file());
    assert_eq!(
        load_sociomatrix_path(lagged.join("Y_1.csv")).unwrap().get(2, 3),
        Some(waves[1][(2, 3)])
    );
    let lag1 = fs::read_to_string(lagged.join("Xd-Ylag_2.csv")).unwrap();
    assert!(lag1.contains("v1,v2,Ylag,NA\n"), "missing lag cells stay missing");

    let mut args = sv!["fit", "--longitudinal", path(&lagged), "--model", "bin", "--out", path(&f.p("fit"))];
    args.extend(SHORT.map(String::from));
    let o = ame(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = coefficient_rows(&fs::read_to_string(f.p("fit").join("summary.txt")).unwrap());
    assert_eq!(rows, ["intercept", "male.row", "Ylag.dyad", "tYlag.dyad"]);
    assert!(f.p("fit").join("YPM_3.csv").is_file());
}
