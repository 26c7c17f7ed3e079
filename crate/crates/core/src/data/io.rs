use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_unique, Covariate, Sociomatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() || cell == "NA" {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>().map_err(|_| Error::BadCell {
        row,
        col,
        cell: cell.to_string(),
    })
}

fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

fn read_records<R: Read>(src: R) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(src);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
    }
    Ok(rows)
}

#[derive(Serialize, Deserialize)]
struct SociomatrixJson {
    labels: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

/// Reads a labeled square matrix. The header row and first column carry the
/// node labels; `NA` or an empty cell is missing. The diagonal is always
/// treated as undefined.
pub fn load_sociomatrix<R: Read>(src: R, format: Format) -> Result<Sociomatrix> {
    match format {
        Format::Csv => {
            let rows = read_records(src)?;
            let Some((header, body)) = rows.split_first() else {
                return Err(Error::NotSquare { rows: 0, cols: 0 });
            };
            let col_labels: Vec<String> = header.iter().skip(1).cloned().collect();
            let ncol = col_labels.len();
            if body.len() != ncol {
                return Err(Error::NotSquare {
                    rows: body.len(),
                    cols: ncol,
                });
            }
            let mut values = DMatrix::from_element(ncol, ncol, f64::NAN);
            let mut row_labels = Vec::with_capacity(ncol);
            for (i, rec) in body.iter().enumerate() {
                if rec.len() != ncol + 1 {
                    return Err(Error::NotSquare {
                        rows: body.len(),
                        cols: rec.len().saturating_sub(1),
                    });
                }
                row_labels.push(rec[0].clone());
                for j in 0..ncol {
                    values[(i, j)] = parse_cell(&rec[j + 1], i, j)?;
                }
            }
            check_unique(&row_labels)?;
            check_unique(&col_labels)?;
            if let Some(pos) = (0..ncol).find(|&k| row_labels[k] != col_labels[k]) {
                return Err(Error::LabelMismatch {
                    position: pos,
                    row: row_labels[pos].clone(),
                    col: col_labels[pos].clone(),
                });
            }
            Sociomatrix::new(row_labels, values)
        }
        Format::Json => {
            let parsed: SociomatrixJson = serde_json::from_reader(src)?;
            let n = parsed.labels.len();
            if parsed.values.len() != n || parsed.values.iter().any(|r| r.len() != n) {
                return Err(Error::NotSquare {
                    rows: parsed.values.len(),
                    cols: parsed.values.first().map_or(0, |r| r.len()),
                });
            }
            let values = DMatrix::from_fn(n, n, |i, j| parsed.values[i][j].unwrap_or(f64::NAN));
            Sociomatrix::new(parsed.labels, values)
        }
    }
}

pub fn load_sociomatrix_path(path: impl AsRef<Path>) -> Result<Sociomatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_sociomatrix(file, Format::from_path(path))
}

pub(super) fn write_sociomatrix_csv<W: Write>(y: &Sociomatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(y.labels().iter().cloned());
    w.write_record(&header)?;
    for i in 0..y.n() {
        let mut rec = vec![y.labels()[i].clone()];
        rec.extend((0..y.n()).map(|j| fmt_cell(y.values()[(i, j)])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub(super) fn write_sociomatrix_json<W: Write>(y: &Sociomatrix, out: W) -> Result<()> {
    let n = y.n();
    let doc = SociomatrixJson {
        labels: y.labels().to_vec(),
        values: (0..n)
            .map(|i| (0..n).map(|j| y.get(i, j)).collect())
            .collect(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct NodalJson {
    labels: Vec<String>,
    names: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

#[derive(Deserialize)]
struct DyadicJson {
    labels: Vec<String>,
    names: Vec<String>,
    slices: Vec<Vec<Vec<Option<f64>>>>,
}

fn node_index(labels: &[String]) -> HashMap<&str, usize> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect()
}

fn lookup(index: &HashMap<&str, usize>, label: &str, position: usize) -> Result<usize> {
    index
        .get(label)
        .copied()
        .ok_or_else(|| Error::LabelMismatch {
            position,
            row: label.to_string(),
            col: String::from("<not a node of the sociomatrix>"),
        })
}

/// Reads a labeled nodal table (one row per node, one column per
/// covariate), reordering rows to match `labels`. Missing entries are
/// returned as `NaN` and rejected when the covariate is added to a
/// [`super::CovariateSet`].
pub fn load_nodal_covariates<R: Read>(
    src: R,
    format: Format,
    labels: &[String],
) -> Result<Vec<Covariate<DVector<f64>>>> {
    let (row_labels, names, table) = match format {
        Format::Csv => {
            let rows = read_records(src)?;
            let Some((header, body)) = rows.split_first() else {
                return Ok(Vec::new());
            };
            let names: Vec<String> = header.iter().skip(1).cloned().collect();
            let mut row_labels = Vec::new();
            let mut table = Vec::new();
            for (i, rec) in body.iter().enumerate() {
                if rec.len() != names.len() + 1 {
                    return Err(Error::Dimension(format!(
                        "nodal table row {i} has {} cells, expected {}",
                        rec.len(),
                        names.len() + 1
                    )));
                }
                row_labels.push(rec[0].clone());
                table.push(
                    rec[1..]
                        .iter()
                        .enumerate()
                        .map(|(j, c)| parse_cell(c, i, j))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            (row_labels, names, table)
        }
        Format::Json => {
            let parsed: NodalJson = serde_json::from_reader(src)?;
            let table = parsed
                .values
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
                .collect();
            (parsed.labels, parsed.names, table)
        }
    };
    let n = labels.len();
    if row_labels.len() != n {
        return Err(Error::Dimension(format!(
            "nodal table has {} rows, sociomatrix has {n} nodes",
            row_labels.len()
        )));
    }
    check_unique(&row_labels)?;
    let index = node_index(labels);
    let mut out: Vec<Covariate<DVector<f64>>> = names
        .iter()
        .map(|name| Covariate {
            name: name.clone(),
            values: DVector::from_element(n, f64::NAN),
        })
        .collect();
    for (r, label) in row_labels.iter().enumerate() {
        let i = lookup(&index, label, r)?;
        if table[r].len() != names.len() {
            return Err(Error::Dimension(format!("nodal row {label} is ragged")));
        }
        for (k, cov) in out.iter_mut().enumerate() {
            cov.values[i] = table[r][k];
        }
    }
    Ok(out)
}

/// Reads dyadic covariates, either long-form CSV with header
/// `i,j,name,value` or JSON `{labels, names, slices}`.
pub fn load_dyadic_covariates<R: Read>(
    src: R,
    format: Format,
    labels: &[String],
) -> Result<Vec<Covariate<DMatrix<f64>>>> {
    let n = labels.len();
    let index = node_index(labels);
    match format {
        Format::Csv => {
            let rows = read_records(src)?;
            let Some((header, body)) = rows.split_first() else {
                return Ok(Vec::new());
            };
            let expected = ["i", "j", "name", "value"];
            if header.len() != 4
                || header
                    .iter()
                    .zip(expected)
                    .any(|(h, e)| !h.eq_ignore_ascii_case(e))
            {
                return Err(Error::Dimension(format!(
                    "long-form dyadic header must be i,j,name,value, got {}",
                    header.join(",")
                )));
            }
            let mut out: Vec<Covariate<DMatrix<f64>>> = Vec::new();
            for (r, rec) in body.iter().enumerate() {
                if rec.len() != 4 {
                    return Err(Error::Dimension(format!("long-form row {r} has {} cells", rec.len())));
                }
                let i = lookup(&index, &rec[0], r)?;
                let j = lookup(&index, &rec[1], r)?;
                let v = parse_cell(&rec[3], r, 3)?;
                let slot = match out.iter().position(|c| c.name == rec[2]) {
                    Some(k) => k,
                    None => {
                        out.push(Covariate {
                            name: rec[2].clone(),
                            values: DMatrix::from_element(n, n, f64::NAN),
                        });
                        out.len() - 1
                    }
                };
                out[slot].values[(i, j)] = v;
            }
            Ok(out)
        }
        Format::Json => {
            let parsed: DyadicJson = serde_json::from_reader(src)?;
            if parsed.names.len() != parsed.slices.len() {
                return Err(Error::Dimension(format!(
                    "{} names for {} dyadic slices",
                    parsed.names.len(),
                    parsed.slices.len()
                )));
            }
            let m = parsed.labels.len();
            if m != n {
                return Err(Error::Dimension(format!(
                    "dyadic file has {m} nodes, sociomatrix has {n}"
                )));
            }
            let order: Vec<usize> = parsed
                .labels
                .iter()
                .enumerate()
                .map(|(r, l)| lookup(&index, l, r))
                .collect::<Result<_>>()?;
            parsed
                .names
                .into_iter()
                .zip(parsed.slices)
                .map(|(name, slice)| {
                    if slice.len() != m || slice.iter().any(|r| r.len() != m) {
                        return Err(Error::Dimension(format!("dyadic slice {name} is not {m}x{m}")));
                    }
                    let mut values = DMatrix::from_element(n, n, f64::NAN);
                    for (a, row) in slice.iter().enumerate() {
                        for (b, v) in row.iter().enumerate() {
                            values[(order[a], order[b])] = v.unwrap_or(f64::NAN);
                        }
                    }
                    Ok(Covariate { name, values })
                })
                .collect()
        }
    }
}

/// Writes a labeled nodal table.
pub fn write_nodal_csv<W: Write>(
    labels: &[String],
    columns: &[Covariate<DVector<f64>>],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(columns.iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for (i, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(columns.iter().map(|c| fmt_cell(c.values[i])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_two_by_two() {
        let src = ",a,b\na,NA,3\nb,1,NA\n";
        let y = load_sociomatrix(src.as_bytes(), Format::Csv).unwrap();
        assert_eq!(y.n(), 2);
        assert_eq!(y.get(0, 1), Some(3.0));
        assert_eq!(y.get(1, 0), Some(1.0));
    }

    #[test]
    fn reads_trade_corner() {
        let src = "\
,ARG,AUL,BEL,BNG,BRA
ARG,NA,0.05826891,0.2468601,0.03922071,1.76473080
AUL,0.0861777,NA,0.3784364,0.10436002,0.21511138
BEL,0.2700271,0.35065687,NA,0.01980263,0.39877612
BNG,0.0000000,0.01980263,0.1222176,NA,0.01980263
BRA,1.6937791,0.23901690,0.6205765,0.03922071,NA
";
        let y = load_sociomatrix(src.as_bytes(), Format::Csv).unwrap();
        assert_eq!(y.get(0, 1), Some(0.05826891));
        assert_eq!(y.labels()[4], "BRA");
    }

    #[test]
    fn diagonal_values_in_file_are_dropped() {
        let src = ",a,b\na,5,3\nb,,7\n";
        let y = load_sociomatrix(src.as_bytes(), Format::Csv).unwrap();
        assert_eq!(y.get(0, 0), None);
        assert_eq!(y.get(1, 0), None);
        assert_eq!(y.get(1, 1), None);
    }

    #[test]
    fn csv_errors() {
        let non_square = ",a,b\na,NA,1\n";
        assert!(matches!(
            load_sociomatrix(non_square.as_bytes(), Format::Csv),
            Err(Error::NotSquare { .. })
        ));
        let dup = ",a,a\na,NA,1\na,2,NA\n";
        assert!(matches!(
            load_sociomatrix(dup.as_bytes(), Format::Csv),
            Err(Error::DuplicateLabel(_))
        ));
        let bad = ",a,b\na,NA,x\nb,2,NA\n";
        assert!(matches!(
            load_sociomatrix(bad.as_bytes(), Format::Csv),
            Err(Error::BadCell { .. })
        ));
        let order = ",a,b\nb,NA,1\na,2,NA\n";
        assert!(matches!(
            load_sociomatrix(order.as_bytes(), Format::Csv),
            Err(Error::LabelMismatch { .. })
        ));
        let comma_decimal = ",a,b\na,NA,\"1,5\"\nb,2,NA\n";
        assert!(load_sociomatrix(comma_decimal.as_bytes(), Format::Csv).is_err());
    }

    #[test]
    fn nodal_table_is_reordered_by_label() {
        let labels = vec!["x".to_string(), "y".to_string()];
        let src = ",pop,gdp,polity\ny,1,2,3\nx,4,5,6\n";
        let cols = load_nodal_covariates(src.as_bytes(), Format::Csv, &labels).unwrap();
        let names: Vec<_> = cols.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["pop", "gdp", "polity"]);
        assert_eq!(cols[0].values.as_slice(), &[4.0, 1.0]);
    }

    #[test]
    fn nodal_row_count_mismatch() {
        let labels: Vec<String> = (0..30).map(|i| i.to_string()).collect();
        let mut src = String::from(",pop\n");
        for i in 0..31 {
            src.push_str(&format!("{i},1\n"));
        }
        assert!(matches!(
            load_nodal_covariates(src.as_bytes(), Format::Csv, &labels),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn long_form_dyadic() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let src = "i,j,name,value\na,b,dist,2.5\nb,a,dist,2.5\na,b,igo,1\nb,a,igo,0\n";
        let cols = load_dyadic_covariates(src.as_bytes(), Format::Csv, &labels).unwrap();
        assert_eq!(cols.len(), 2);
        assert_eq!(cols[1].name, "igo");
        assert_eq!(cols[1].values[(1, 0)], 0.0);
        let empty = load_dyadic_covariates("".as_bytes(), Format::Csv, &labels).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn dyadic_json() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let src = r#"{"labels":["b","a"],"names":["d"],"slices":[[[null,1],[2,null]]]}"#;
        let cols = load_dyadic_covariates(src.as_bytes(), Format::Json, &labels).unwrap();
        // file row "b" col "a" = 1  ->  (1, 0)
        assert_eq!(cols[0].values[(1, 0)], 1.0);
        assert_eq!(cols[0].values[(0, 1)], 2.0);
    }

    fn arb_sociomatrix() -> impl Strategy<Value = Sociomatrix> {
        (2usize..7).prop_flat_map(|n| {
            proptest::collection::vec(
                prop_oneof![Just(f64::NAN), -1e6f64..1e6, (-20i32..20).prop_map(f64::from)],
                n * n,
            )
            .prop_map(move |cells| {
                Sociomatrix::from_matrix(DMatrix::from_vec(n, n, cells)).unwrap()
            })
        })
    }

    fn same(a: &Sociomatrix, b: &Sociomatrix) -> bool {
        a.labels() == b.labels()
            && a.values()
                .iter()
                .zip(b.values().iter())
                .all(|(x, y)| (x.is_nan() && y.is_nan()) || x == y)
    }

    proptest! {
        #[test]
        fn csv_and_json_round_trip(y in arb_sociomatrix()) {
            let mut buf = Vec::new();
            y.write_csv(&mut buf).unwrap();
            let back = load_sociomatrix(buf.as_slice(), Format::Csv).unwrap();
            prop_assert!(same(&y, &back));

            let mut buf = Vec::new();
            y.write_json(&mut buf).unwrap();
            let back = load_sociomatrix(buf.as_slice(), Format::Json).unwrap();
            prop_assert!(same(&y, &back));
            prop_assert!(back.observed_count() <= y.n() * (y.n() - 1));
        }
    }
}
