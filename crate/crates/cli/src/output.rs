//! Artefact readers and writers shared by the subcommands.
//!
//! Draws and trajectories are CSV (plot-ready anywhere); scalar summaries are
//! JSON. Floating-point values are written with the shortest representation
//! that round-trips exactly, which makes fixed-seed reruns byte-identical.

use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tvgarch_core::sampler::PosteriorDraws;

use crate::error::CliError;

/// Hex-encoded SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex-encoded SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(path, format!("serialising: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("parsing: {e}")))
}

// ---------------------------------------------------------------------------
// Draws
// ---------------------------------------------------------------------------

/// Writes posterior draws as `chain,draw,<parameter...>` rows.
pub fn write_draws_csv(path: &Path, draws: &PosteriorDraws) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(draws.names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| CliError::io(path, e))?;
    for (chain_idx, chain) in draws.values.iter().enumerate() {
        for r in 0..chain.nrows() {
            let mut row = Vec::with_capacity(2 + chain.ncols());
            row.push(chain_idx.to_string());
            row.push(r.to_string());
            for c in 0..chain.ncols() {
                row.push(format!("{}", chain[(r, c)]));
            }
            writer.write_record(&row).map_err(|e| CliError::io(path, e))?;
        }
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Reads a draws CSV back into parameter names and per-chain matrices.
pub fn read_draws_csv(path: &Path) -> Result<(Vec<String>, Vec<Array2<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "chain" || cols[1] != "draw" {
        return Err(CliError::Validation(format!(
            "{}: expected header `chain,draw,<parameters...>`",
            path.display()
        )));
    }
    let names: Vec<String> = cols[2..].iter().map(|s| s.to_string()).collect();
    let dim = names.len();
    let mut chains: std::collections::BTreeMap<usize, Vec<Vec<f64>>> =
        std::collections::BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::io(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let fail = |msg: String| CliError::Validation(format!("{}:{line}: {msg}", path.display()));
        if record.len() != dim + 2 {
            return Err(fail(format!(
                "expected {} fields, got {}",
                dim + 2,
                record.len()
            )));
        }
        let chain: usize = record[0]
            .parse()
            .map_err(|_| fail(format!("bad chain index `{}`", &record[0])))?;
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            let v: f64 = record[2 + j]
                .parse()
                .map_err(|_| fail(format!("column `{}` is not numeric", names[j])))?;
            row.push(v);
        }
        chains.entry(chain).or_default().push(row);
    }
    if chains.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no draws",
            path.display()
        )));
    }
    let mut values = Vec::with_capacity(chains.len());
    for (_, rows) in chains {
        let n = rows.len();
        let mut m = Array2::zeros((n, dim));
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        values.push(m);
    }
    Ok((names, values))
}

// ---------------------------------------------------------------------------
// Trajectory bands
// ---------------------------------------------------------------------------

/// One row of `trajectories.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub series_id: String,
    pub t: f64,
    pub name: String,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

pub fn write_trajectories_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::io(path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_trajectories_csv(path: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(|e| CliError::io(path, e))?);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// JSON artefact schemas
// ---------------------------------------------------------------------------

/// Per-parameter convergence diagnostics.
#[derive(Debug, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

/// Sampler-stage summary (`summary.json` has one per step).
#[derive(Debug, Serialize, Deserialize)]
pub struct StepSummary {
    pub parameters: Vec<ParamSummary>,
    pub divergences: Vec<usize>,
    pub step_sizes: Vec<f64>,
    pub accept_rates: Vec<f64>,
    pub divergence_flagged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryJson {
    pub step1: StepSummary,
    pub step2: StepSummary,
    /// Largest split-R̂ across both steps (null with a single chain).
    pub max_rhat: Option<f64>,
    /// True when every R̂ ≤ 1.1.
    pub converged: bool,
}

/// `loo.json`: PSIS-LOO summary plus the pointwise pieces comparisons need.
#[derive(Debug, Serialize, Deserialize)]
pub struct LooJson {
    pub n: usize,
    pub elpd_loo: f64,
    pub looic: f64,
    pub se: f64,
    pub n_high_k: usize,
    pub pareto_k: Vec<f64>,
    pub pointwise: Vec<f64>,
}

/// `meta.json` written by `fit`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitMeta {
    pub command: String,
    pub data_path: String,
    pub data_sha256: String,
    pub n_series: usize,
    pub n_obs: usize,
    pub covariates: Vec<String>,
    pub imputed: bool,
    pub prior: String,
    pub m: usize,
    pub m_mu: usize,
    pub width_factor: f64,
    pub tau_mode: String,
    pub arch_feed: String,
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub seed: u64,
}

/// `meta.json` written by `simulate`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SimMeta {
    pub command: String,
    pub kind: String,
    pub n: usize,
    pub seed: u64,
    pub mu0: f64,
    pub tau0: f64,
    pub time_scale: f64,
    pub data_sha256: String,
}

/// `compare.json` schema.
#[derive(Debug, Serialize, Deserialize)]
pub struct CompareJson {
    pub runs: Vec<CompareRun>,
    pub pairwise: Vec<ComparePair>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompareRun {
    pub dir: String,
    pub prior: String,
    pub elpd_loo: f64,
    pub looic: f64,
    pub se: f64,
    pub n_high_k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComparePair {
    pub a: String,
    pub b: String,
    pub elpd_diff: f64,
    pub diff_se: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvgarch_core::sampler::PosteriorDraws;

    fn fake_draws() -> PosteriorDraws {
        PosteriorDraws {
            names: vec!["alpha".into(), "beta[0]".into()],
            values: vec![
                Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.5, 4.25, 5.0, 6.0]).unwrap(),
                Array2::from_shape_vec((3, 2), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.625]).unwrap(),
            ],
            divergences: vec![0, 0],
            step_sizes: vec![0.1, 0.1],
            accept_rates: vec![0.9, 0.9],
            divergence_flagged: false,
            derived: None,
            pointwise_loglik: None,
        }
    }

    #[test]
    fn draws_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("draws.csv");
        let draws = fake_draws();
        write_draws_csv(&path, &draws).unwrap();
        let (names, values) = read_draws_csv(&path).unwrap();
        assert_eq!(names, draws.names);
        assert_eq!(values, draws.values);
    }

    #[test]
    fn sha256_matches_known_vector() {
        // SHA-256("abc"), a standard published test vector
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn trajectories_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectories.csv");
        let rows = vec![TrajectoryRow {
            series_id: "s".into(),
            t: 1.0,
            name: "a_t".into(),
            q10: -0.5,
            q50: 0.0,
            q90: 0.5,
        }];
        write_trajectories_csv(&path, &rows).unwrap();
        let got = read_trajectories_csv(&path).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].name, "a_t");
        assert_eq!(got[0].q90, 0.5);
    }

    #[test]
    fn json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loo.json");
        let loo = LooJson {
            n: 2,
            elpd_loo: -3.25,
            looic: 6.5,
            se: 0.5,
            n_high_k: 0,
            pareto_k: vec![0.1, 0.2],
            pointwise: vec![-1.5, -1.75],
        };
        write_json(&path, &loo).unwrap();
        let got: LooJson = read_json(&path).unwrap();
        assert_eq!(got.looic, 6.5);
        assert_eq!(got.pointwise, vec![-1.5, -1.75]);
    }
}
