//! `tvgarch plotdata` — reshape fitted bands (and optional simulation truth)
//! into one tidy overlay table.
//!
//! The output has one row per (series, t, trajectory) with the 10/50/90%
//! band columns and, when a truth file is given, the matching ground-truth
//! value — ready for truth-vs-band overlay plots in any plotting tool.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::output::read_trajectories_csv;

#[derive(Debug, clap::Args)]
pub struct PlotdataArgs {
    /// Fit output directory (reads trajectories.csv).
    pub dir: PathBuf,
    /// Simulation truth.csv to overlay.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output CSV; defaults to plot.csv inside the fit directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps a fitted trajectory name to its truth.csv column.
fn truth_column(name: &str) -> Option<&'static str> {
    match name {
        "a_t" => Some("a"),
        "b_t" => Some("b"),
        "c_t" => Some("c"),
        "mu_t" => Some("mu"),
        "sigma2_t" => Some("sigma2"),
        _ => None,
    }
}

pub fn run(args: PlotdataArgs) -> Result<(), CliError> {
    let rows = read_trajectories_csv(&args.dir.join("trajectories.csv"))?;
    let truth = match &args.truth {
        Some(path) => Some(read_truth_csv(path)?),
        None => None,
    };
    let out = args.out.unwrap_or_else(|| args.dir.join("plot.csv"));

    let mut writer = csv::Writer::from_path(&out).map_err(|e| CliError::io(&out, e))?;
    writer
        .write_record(["series_id", "t", "name", "q10", "q50", "q90", "truth"])
        .map_err(|e| CliError::io(&out, e))?;
    for row in &rows {
        // join on the printed form of t: both files were written by this
        // tool, so identical times have identical shortest representations
        let truth_cell = truth
            .as_ref()
            .and_then(|tbl| {
                truth_column(&row.name)
                    .and_then(|col| tbl.get(&(format!("{}", row.t), col.to_string())))
            })
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        writer
            .write_record([
                row.series_id.clone(),
                format!("{}", row.t),
                row.name.clone(),
                format!("{}", row.q10),
                format!("{}", row.q50),
                format!("{}", row.q90),
                truth_cell,
            ])
            .map_err(|e| CliError::io(&out, e))?;
    }
    writer.flush().map_err(|e| CliError::io(&out, e))?;
    println!("plotdata: {} rows → {}", rows.len(), out.display());
    Ok(())
}

/// Reads truth.csv into a (t, column) → value map.
fn read_truth_csv(path: &Path) -> Result<HashMap<(String, String), f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .clone();
    let cols: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if cols.first().map(String::as_str) != Some("t") {
        return Err(CliError::Validation(format!(
            "{}: truth file must start with a `t` column",
            path.display()
        )));
    }
    let mut table = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let t_key = record[0].trim().to_string();
        for (j, col) in cols.iter().enumerate().skip(1) {
            let v: f64 = record[j].trim().parse().map_err(|_| {
                CliError::Validation(format!(
                    "{}: column `{col}` is not numeric: `{}`",
                    path.display(),
                    &record[j]
                ))
            })?;
            table.insert((t_key.clone(), col.clone()), v);
        }
    }
    Ok(table)
}
