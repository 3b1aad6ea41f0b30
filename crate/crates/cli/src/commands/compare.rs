//! `tvgarch compare` — LOOIC comparison of fits on identical data.

use std::path::PathBuf;

use crate::error::CliError;
use crate::output::{read_json, write_json, CompareJson, ComparePair, CompareRun, FitMeta, LooJson};

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    /// Two or more fit output directories (each with meta.json and loo.json).
    #[arg(required = true, num_args = 2..)]
    pub dirs: Vec<PathBuf>,
    /// Output JSON file.
    #[arg(long, default_value = "compare.json")]
    pub out: PathBuf,
}

pub fn run(args: CompareArgs) -> Result<(), CliError> {
    let mut runs = Vec::new();
    let mut loos: Vec<LooJson> = Vec::new();
    let mut checksum: Option<(String, String)> = None;
    for dir in &args.dirs {
        let meta: FitMeta = read_json(&dir.join("meta.json"))?;
        let loo: LooJson = read_json(&dir.join("loo.json"))?;
        match &checksum {
            None => checksum = Some((dir.display().to_string(), meta.data_sha256.clone())),
            Some((first_dir, first_sum)) => {
                if *first_sum != meta.data_sha256 {
                    return Err(CliError::Validation(format!(
                        "refusing to compare fits on different data: {} and {} have different \
                         data checksums",
                        first_dir,
                        dir.display()
                    )));
                }
            }
        }
        runs.push(CompareRun {
            dir: dir.display().to_string(),
            prior: meta.prior,
            elpd_loo: loo.elpd_loo,
            looic: loo.looic,
            se: loo.se,
            n_high_k: loo.n_high_k,
        });
        loos.push(loo);
    }

    let mut pairwise = Vec::new();
    for i in 0..loos.len() {
        for j in (i + 1)..loos.len() {
            let (a, b) = (&loos[i], &loos[j]);
            if a.pointwise.len() != b.pointwise.len() {
                return Err(CliError::Validation(format!(
                    "pointwise lengths differ between {} and {} ({} vs {})",
                    runs[i].dir,
                    runs[j].dir,
                    a.pointwise.len(),
                    b.pointwise.len()
                )));
            }
            let n = a.pointwise.len() as f64;
            let diffs: Vec<f64> = a
                .pointwise
                .iter()
                .zip(&b.pointwise)
                .map(|(x, y)| x - y)
                .collect();
            let mean = diffs.iter().sum::<f64>() / n;
            let var = if diffs.len() > 1 {
                diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            pairwise.push(ComparePair {
                a: runs[i].dir.clone(),
                b: runs[j].dir.clone(),
                elpd_diff: a.elpd_loo - b.elpd_loo,
                diff_se: (n * var).sqrt(),
            });
        }
    }

    write_json(&args.out, &CompareJson { runs, pairwise })?;
    println!(
        "compare: {} runs → {}",
        args.dirs.len(),
        args.out.display()
    );
    Ok(())
}
