//! Content-addressed campaign directories and the audit that rescores them.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::campaign::{save_results_csv, summarize, write_summary_csv, CellFailure, ResultRow};
use super::spec::{ExperimentSpec, MethodKind};
use crate::error::Result;
use crate::grid::{ComplexField, GridIndex};
use crate::io::{load_cvf, save_cvf, write_mask_csv};
use crate::metrics::rmse;

/// Length of the hash prefix naming a campaign directory.
const HASH_PREFIX: usize = 16;

#[derive(Debug, Clone)]
pub struct ArtifactStore {
    dir: PathBuf,
}

pub fn truth_path(dir: &Path, h: f64, seed: u64) -> PathBuf {
    dir.join("fields").join(format!("truth_h{h}_s{seed}.cvf"))
}

pub fn mask_path(dir: &Path, h: f64, n_sub: usize, seed: u64) -> PathBuf {
    dir.join("masks").join(format!("mask_h{h}_n{n_sub}_s{seed}.csv"))
}

pub fn recon_path(dir: &Path, method: MethodKind, h: f64, n_sub: usize, seed: u64) -> PathBuf {
    dir.join("recon").join(format!("{method}_h{h}_n{n_sub}_s{seed}.cvf"))
}

impl ArtifactStore {
    /// `root/<spec hash prefix>/` with the spec written as `spec.json`.
    pub fn create(root: &Path, spec: &ExperimentSpec) -> Result<Self> {
        let dir = root.join(&spec.content_hash()[..HASH_PREFIX]);
        for sub in ["fields", "masks", "recon"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        fs::write(dir.join("spec.json"), spec.to_json())?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn save_truth(&self, h: f64, seed: u64, field: &ComplexField) -> Result<()> {
        save_cvf(truth_path(&self.dir, h, seed), field)
    }

    pub fn save_mask(&self, h: f64, n_sub: usize, seed: u64, mask: &[GridIndex]) -> Result<()> {
        let f = fs::File::create(mask_path(&self.dir, h, n_sub, seed))?;
        write_mask_csv(BufWriter::new(f), mask)
    }

    pub fn save_recon(&self, method: MethodKind, h: f64, n_sub: usize, seed: u64, field: &ComplexField) -> Result<()> {
        save_cvf(recon_path(&self.dir, method, h, n_sub, seed), field)
    }

    /// Writes `results.csv`, `summary.csv`, `timings.csv` and `failures.csv`.
    pub fn finish(&self, rows: &[ResultRow], failures: &[CellFailure]) -> Result<()> {
        save_results_csv(self.dir.join("results.csv"), rows)?;
        write_summary_csv(
            BufWriter::new(fs::File::create(self.dir.join("summary.csv"))?),
            &summarize(rows),
        )?;
        #[derive(Serialize)]
        struct Timing {
            method: MethodKind,
            h: f64,
            n_sub: usize,
            seed: u64,
            wall_time_s: f64,
        }
        let mut wr = csv::Writer::from_path(self.dir.join("timings.csv"))?;
        for r in rows {
            wr.serialize(Timing {
                method: r.method,
                h: r.h,
                n_sub: r.n_sub,
                seed: r.seed,
                wall_time_s: r.measured_wall_time_s,
            })?;
        }
        wr.flush()?;
        let mut wr = csv::Writer::from_path(self.dir.join("failures.csv"))?;
        wr.write_record(["method", "h", "n_sub", "seed", "error"])?;
        for f in failures {
            wr.serialize(f)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub method: MethodKind,
    pub h: f64,
    pub n_sub: usize,
    pub seed: u64,
    pub stored_rmse: f64,
    pub recomputed_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub checked: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &AuditEntry> {
        self.checked.iter().filter(|e| e.stored_rmse != e.recomputed_rmse)
    }

    pub fn passed(&self) -> bool {
        self.mismatches().next().is_none()
    }
}

/// Recomputes the RMSE of `count` randomly chosen rows from the stored
/// truth and reconstruction files.
pub fn audit_artifacts(dir: &Path, rows: &[ResultRow], count: usize, seed: u64) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = sample(&mut rng, rows.len(), count.min(rows.len())).into_vec();
    picks.sort_unstable();
    let mut checked = Vec::with_capacity(picks.len());
    for i in picks {
        let r = &rows[i];
        let truth = load_cvf(truth_path(dir, r.h, r.seed))?;
        let est = load_cvf(recon_path(dir, r.method, r.h, r.n_sub, r.seed))?;
        checked.push(AuditEntry {
            method: r.method,
            h: r.h,
            n_sub: r.n_sub,
            seed: r.seed,
            stored_rmse: r.rmse,
            recomputed_rmse: rmse(&truth, &est)?,
        });
    }
    Ok(AuditReport { checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::HurstParam;
    use crate::harness::campaign::{read_results_csv, run_campaign, RunOptions};

    #[test]
    fn persisted_campaign_audits_clean() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            grid: [10, 10],
            hurst_values: vec![HurstParam::new(0.6).unwrap(), HurstParam::new(0.9).unwrap()],
            sample_counts: vec![20, 40],
            methods: vec![MethodKind::Box, MethodKind::ThinPlate, MethodKind::CsTwist],
            repeats: 2,
            ..ExperimentSpec::table2_default()
        };
        let opts = RunOptions {
            artifact_root: Some(tmp.path().to_path_buf()),
            threads: None,
        };
        let res = run_campaign(&spec, &opts).unwrap();
        let dir = res.artifact_dir.clone().unwrap();
        assert!(dir.ends_with(&spec.content_hash()[..16]));
        for f in ["spec.json", "results.csv", "summary.csv", "timings.csv", "failures.csv"] {
            assert!(dir.join(f).is_file(), "{f}");
        }
        let stored = read_results_csv(fs::File::open(dir.join("results.csv")).unwrap()).unwrap();
        let report = audit_artifacts(&dir, &stored, 10, 3).unwrap();
        assert_eq!(report.checked.len(), 10);
        assert!(report.passed(), "{:?}", report.mismatches().collect::<Vec<_>>());
        let back = ExperimentSpec::from_json(&fs::read_to_string(dir.join("spec.json")).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
