//! CSV data ingestion and emission.
//!
//! The data schema is `series_id,t,y,<covariate columns...>`: one row per
//! observation, multiple series allowed (grouped by `series_id` in order of
//! first appearance), `t` strictly increasing within a series. An empty `y`
//! cell marks a missing response to be imputed; covariate cells must always
//! be present. All structural errors report the offending line number.

use std::path::Path;

use ndarray::{Array1, Array2};
use tvgarch_core::model::TimeSeriesData;

use crate::error::CliError;

/// Parsed data file: the series plus the covariate column names.
#[derive(Debug)]
pub struct IngestedData {
    pub series: Vec<TimeSeriesData>,
    pub covariate_names: Vec<String>,
}

struct SeriesBuilder {
    id: String,
    t: Vec<f64>,
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    mask: Vec<bool>,
}

/// Reads a data CSV into per-series containers.
pub fn read_data_csv(path: &Path) -> Result<IngestedData, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .clone();
    let cols: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if cols.len() < 3 || cols[0] != "series_id" || cols[1] != "t" || cols[2] != "y" {
        return Err(CliError::Validation(format!(
            "{}: header must start with `series_id,t,y` (got `{}`)",
            path.display(),
            cols.join(",")
        )));
    }
    let covariate_names: Vec<String> = cols[3..].to_vec();
    let n_cov = covariate_names.len();

    let mut order: Vec<String> = Vec::new();
    let mut builders: std::collections::HashMap<String, SeriesBuilder> =
        std::collections::HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".into());
            CliError::Validation(format!("{}:{line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fail = |msg: String| CliError::Validation(format!("{}:{line}: {msg}", path.display()));

        if record.len() != cols.len() {
            return Err(fail(format!(
                "expected {} fields, got {}",
                cols.len(),
                record.len()
            )));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(fail("empty series_id".into()));
        }
        let t: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| fail(format!("column `t` is not numeric: `{}`", &record[1])))?;
        if !t.is_finite() {
            return Err(fail(format!("column `t` is not finite: `{}`", &record[1])));
        }
        let y_raw = record[2].trim();
        let (y, missing) = if y_raw.is_empty() {
            // placeholder; masked values are imputed before fitting
            (1.0, true)
        } else {
            let y: f64 = y_raw
                .parse()
                .map_err(|_| fail(format!("column `y` is not numeric: `{y_raw}`")))?;
            if !(y > 0.0 && y.is_finite()) {
                return Err(fail(format!("y must be positive and finite (got {y_raw})")));
            }
            (y, false)
        };
        let mut xs = Vec::with_capacity(n_cov);
        for (j, name) in covariate_names.iter().enumerate() {
            let cell = record[3 + j].trim();
            if cell.is_empty() {
                return Err(fail(format!(
                    "covariate `{name}` is empty; covariate columns must be complete"
                )));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| fail(format!("covariate `{name}` is not numeric: `{cell}`")))?;
            if !v.is_finite() {
                return Err(fail(format!("covariate `{name}` is not finite: `{cell}`")));
            }
            xs.push(v);
        }

        let builder = builders.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            SeriesBuilder {
                id,
                t: Vec::new(),
                y: Vec::new(),
                x: Vec::new(),
                mask: Vec::new(),
            }
        });
        if let Some(&last) = builder.t.last() {
            if t == last {
                return Err(fail(format!(
                    "duplicate time t = {t} for series `{}`",
                    builder.id
                )));
            }
            if t < last {
                return Err(fail(format!(
                    "time index decreases for series `{}` ({last} then {t})",
                    builder.id
                )));
            }
        }
        builder.t.push(t);
        builder.y.push(y);
        builder.x.push(xs);
        builder.mask.push(missing);
    }

    if order.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    let mut series = Vec::with_capacity(order.len());
    for id in order {
        let b = builders.remove(&id).expect("builder exists for ordered id");
        let n = b.y.len();
        let mut x = Array2::zeros((n, n_cov));
        for (i, row) in b.x.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        let data = TimeSeriesData::new(b.id, b.t, Array1::from_vec(b.y), x, b.mask)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        series.push(data);
    }
    Ok(IngestedData {
        series,
        covariate_names,
    })
}

/// Writes series to the ingestion schema. Covariate columns are labelled
/// `x0..` unless names are supplied; masked responses become empty cells.
pub fn write_data_csv(
    path: &Path,
    series: &[TimeSeriesData],
    covariate_names: Option<&[String]>,
) -> Result<(), CliError> {
    let n_cov = series.first().map_or(0, |s| s.n_covariates());
    let names: Vec<String> = match covariate_names {
        Some(names) => names.to_vec(),
        None => (0..n_cov).map(|j| format!("x{j}")).collect(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header = vec!["series_id".to_string(), "t".to_string(), "y".to_string()];
    header.extend(names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| CliError::io(path, e))?;
    for s in series {
        for i in 0..s.n() {
            let mut row = vec![
                s.series_id.clone(),
                format!("{}", s.t[i]),
                if s.missing_mask[i] {
                    String::new()
                } else {
                    format!("{}", s.y[i])
                },
            ];
            for j in 0..s.n_covariates() {
                row.push(format!("{}", s.x[(i, j)]));
            }
            writer.write_record(&row).map_err(|e| CliError::io(path, e))?;
        }
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_a_minimal_single_series_file() {
        let f = write_tmp("series_id,t,y\ns,1,2.5\ns,2,3.5\n");
        let got = read_data_csv(f.path()).unwrap();
        assert_eq!(got.series.len(), 1);
        assert_eq!(got.series[0].series_id, "s");
        assert_eq!(got.series[0].t, vec![1.0, 2.0]);
        assert_eq!(got.series[0].y.to_vec(), vec![2.5, 3.5]);
        assert!(got.covariate_names.is_empty());
    }

    #[test]
    fn empty_y_cell_sets_the_missing_mask() {
        let f = write_tmp("series_id,t,y\ns,1,2.5\ns,2,\ns,3,4.0\n");
        let got = read_data_csv(f.path()).unwrap();
        assert_eq!(got.series[0].missing_mask, vec![false, true, false]);
    }

    #[test]
    fn groups_multiple_series_in_first_appearance_order() {
        let f = write_tmp("series_id,t,y,rain\nb,1,2,0.1\na,1,3,0.2\nb,2,4,0.3\na,2,5,0.4\n");
        let got = read_data_csv(f.path()).unwrap();
        assert_eq!(got.series.len(), 2);
        assert_eq!(got.series[0].series_id, "b");
        assert_eq!(got.series[1].series_id, "a");
        assert_eq!(got.series[0].y.to_vec(), vec![2.0, 4.0]);
        assert_eq!(got.covariate_names, vec!["rain".to_string()]);
        assert_eq!(got.series[1].x[(1, 0)], 0.4);
    }

    #[test]
    fn duplicate_timestamp_names_the_line() {
        let f = write_tmp("series_id,t,y\ns,1,2.5\ns,1,3.5\n");
        let err = read_data_csv(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "missing line number: {msg}");
        assert!(msg.contains("duplicate time"), "wrong message: {msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn decreasing_time_names_the_line() {
        let f = write_tmp("series_id,t,y\ns,2,2.5\ns,1,3.5\n");
        let err = read_data_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains(":3:"));
        assert!(err.to_string().contains("decreases"));
    }

    #[test]
    fn non_numeric_cells_name_the_line_and_column() {
        let f = write_tmp("series_id,t,y\ns,1,oops\n");
        let err = read_data_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains(":2:"));
        assert!(err.to_string().contains("column `y`"));

        let f = write_tmp("series_id,t,y\ns,huh,1.0\n");
        let err = read_data_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("column `t`"));
    }

    #[test]
    fn non_positive_y_names_the_line() {
        let f = write_tmp("series_id,t,y\ns,1,2.0\ns,2,-3.0\n");
        let err = read_data_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains(":3:"));
        assert!(err.to_string().contains("positive"));
    }

    #[test]
    fn incomplete_covariates_are_rejected() {
        let f = write_tmp("series_id,t,y,rain\ns,1,2.0,0.5\ns,2,3.0,\n");
        let err = read_data_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("covariate `rain`"));
        assert!(err.to_string().contains(":3:"));
    }

    #[test]
    fn bad_header_is_rejected() {
        let f = write_tmp("id,time,value\na,1,2\n");
        let err = read_data_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("header"));
    }

    #[test]
    fn round_trips_through_write_and_read() {
        let x = Array2::from_shape_vec((3, 1), vec![0.25, 0.5, 0.125]).unwrap();
        let data = TimeSeriesData::new(
            "s".into(),
            vec![1.0, 2.5, 4.0],
            Array1::from_vec(vec![2.0, 1.0, 0.75]),
            x,
            vec![false, true, false],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_data_csv(&path, std::slice::from_ref(&data), Some(&["rain".into()])).unwrap();
        let got = read_data_csv(&path).unwrap();
        assert_eq!(got.covariate_names, vec!["rain".to_string()]);
        let s = &got.series[0];
        assert_eq!(s.t, data.t);
        assert_eq!(s.missing_mask, data.missing_mask);
        assert_eq!(s.y[0], data.y[0]);
        assert_eq!(s.y[2], data.y[2]);
        assert_eq!(s.x, data.x);
    }
}
