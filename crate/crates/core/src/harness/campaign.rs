use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifacts::ArtifactStore;
use super::spec::{field_seed, mask_seed, ExperimentSpec, MethodKind, SamplePlan};
use crate::baselines::{boxcar_reconstruct, thin_plate_reconstruct};
use crate::cs::{bp_solve, tv_equality_solve, twist_reconstruct};
use crate::error::{Error, Result};
use crate::fbm::{normalize_dynamic_range, synthesize_cvfbm_with};
use crate::grid::ComplexField;
use crate::metrics::evaluate;
use crate::sampling::{random_mask, subsample, SampleSet};

pub const RESULTS_HEADER: &str = "method,h,n_sub,seed,rmse,snr_db,wall_time_s,iterations";

/// One reconstruction of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: MethodKind,
    pub h: f64,
    pub n_sub: usize,
    /// Truth-field seed; the mask seed follows from it and the sample-count index.
    pub seed: u64,
    pub rmse: f64,
    pub snr_db: f64,
    /// Zero unless the spec asks for timings in the results file.
    pub wall_time_s: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub measured_wall_time_s: f64,
    #[serde(skip)]
    pub converged: bool,
}

/// A cell whose reconstruction failed; failures do not stop the campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: MethodKind,
    pub h: f64,
    pub n_sub: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Root under which a content-addressed directory receives every artifact.
    pub artifact_root: Option<PathBuf>,
    /// Worker count; the rayon default when unset.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CellFailure>,
    pub artifact_dir: Option<PathBuf>,
}

struct Task {
    h_index: usize,
    repeat: usize,
    plan: SamplePlan,
}

struct TaskOutput {
    rows: Vec<ResultRow>,
    failures: Vec<CellFailure>,
}

/// Reconstruction by one method plus its iteration count and convergence flag.
pub fn reconstruct(
    method: MethodKind,
    samples: &SampleSet,
    spec: &ExperimentSpec,
) -> Result<(ComplexField, usize, bool)> {
    Ok(match method {
        MethodKind::Box => (boxcar_reconstruct(samples, &spec.boxcar)?, 0, true),
        MethodKind::ThinPlate => (thin_plate_reconstruct(samples, &spec.thin_plate)?, 0, true),
        MethodKind::CsTwist => {
            let o = twist_reconstruct(samples, &spec.twist)?;
            (o.field, o.diagnostics.iterations, o.diagnostics.converged)
        }
        MethodKind::CsTv => {
            let o = tv_equality_solve(samples, &spec.equality)?;
            (o.field, o.diagnostics.iterations, o.diagnostics.converged)
        }
        MethodKind::CsBp => {
            let o = bp_solve(samples, &spec.equality)?;
            (o.field, o.diagnostics.iterations, o.diagnostics.converged)
        }
    })
}

/// Truth field of a cell, normalized to the spec's target RMS.
pub fn truth_field(spec: &ExperimentSpec, h_index: usize, repeat: usize) -> Result<ComplexField> {
    let [rows, cols] = spec.grid;
    let seed = field_seed(spec.base_seed, h_index, repeat);
    let raw = synthesize_cvfbm_with(spec.hurst_values[h_index], rows, cols, seed, spec.synthesis)?;
    normalize_dynamic_range(&raw, spec.target_rms)
}

fn run_task(spec: &ExperimentSpec, task: &Task, store: Option<&ArtifactStore>) -> Result<TaskOutput> {
    let [rows, cols] = spec.grid;
    let h = spec.hurst_values[task.h_index].value();
    let seed = field_seed(spec.base_seed, task.h_index, task.repeat);
    let truth = truth_field(spec, task.h_index, task.repeat)?;
    let mask = random_mask(rows, cols, task.plan.n_sub, mask_seed(seed, task.plan.index))?;
    let samples = subsample(&truth, &mask)?;
    if let Some(store) = store {
        if task.plan.index == 0 {
            store.save_truth(h, seed, &truth)?;
        }
        store.save_mask(h, task.plan.n_sub, seed, &mask)?;
    }
    let mut out = TaskOutput {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for &method in &spec.methods {
        let start = Instant::now();
        let result = reconstruct(method, &samples, spec)
            .and_then(|(est, iters, conv)| evaluate(&truth, &est).map(|r| (est, iters, conv, r)));
        let elapsed = start.elapsed().as_secs_f64();
        match result {
            Ok((est, iterations, converged, report)) => {
                if let Some(store) = store {
                    store.save_recon(method, h, task.plan.n_sub, seed, &est)?;
                }
                out.rows.push(ResultRow {
                    method,
                    h,
                    n_sub: task.plan.n_sub,
                    seed,
                    rmse: report.rmse,
                    snr_db: report.snr_db,
                    wall_time_s: if spec.record_wall_time { elapsed } else { 0.0 },
                    iterations,
                    measured_wall_time_s: elapsed,
                    converged,
                });
            }
            Err(e) => out.failures.push(CellFailure {
                method,
                h,
                n_sub: task.plan.n_sub,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

fn method_rank(spec: &ExperimentSpec, m: MethodKind) -> usize {
    spec.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

/// Runs every cell of `spec`; rows come back in canonical order
/// (H, sample count, seed, method as listed in the spec).
pub fn run_campaign(spec: &ExperimentSpec, opts: &RunOptions) -> Result<CampaignResult> {
    spec.validate()?;
    let store = match &opts.artifact_root {
        Some(root) => Some(ArtifactStore::create(root, spec)?),
        None => None,
    };
    let tasks: Vec<Task> = (0..spec.hurst_values.len())
        .flat_map(|h_index| {
            spec.sample_plan().into_iter().flat_map(move |plan| {
                (0..spec.repeats).map(move |repeat| Task {
                    h_index,
                    repeat,
                    plan,
                })
            })
        })
        .collect();
    let work = || -> Result<Vec<TaskOutput>> {
        tasks
            .par_iter()
            .map(|t| run_task(spec, t, store.as_ref()))
            .collect()
    };
    let outputs = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outputs {
        rows.extend(o.rows);
        failures.extend(o.failures);
    }
    rows.sort_by(|a, b| {
        a.h.total_cmp(&b.h)
            .then(a.n_sub.cmp(&b.n_sub))
            .then(a.seed.cmp(&b.seed))
            .then(method_rank(spec, a.method).cmp(&method_rank(spec, b.method)))
    });
    failures.sort_by(|a, b| {
        a.h.total_cmp(&b.h)
            .then(a.n_sub.cmp(&b.n_sub))
            .then(a.seed.cmp(&b.seed))
            .then(method_rank(spec, a.method).cmp(&method_rank(spec, b.method)))
    });
    let artifact_dir = match store {
        Some(store) => {
            store.finish(&rows, &failures)?;
            Some(store.dir().to_path_buf())
        }
        None => None,
    };
    Ok(CampaignResult {
        spec: spec.clone(),
        rows,
        failures,
        artifact_dir,
    })
}

/// Table 1 campaign: CS-TV only, over subsampling factors.
pub fn run_table1(spec: &ExperimentSpec, opts: &RunOptions) -> Result<CampaignResult> {
    if spec.methods != [MethodKind::CsTv] {
        return Err(Error::InvalidParameter("table 1 runs the cs-tv method only".into()));
    }
    if spec.subsampling_factors.is_empty() {
        return Err(Error::InvalidParameter("table 1 needs subsampling_factors".into()));
    }
    run_campaign(spec, opts)
}

/// Table 2 campaign: baselines against CS over absolute sample counts.
pub fn run_table2(spec: &ExperimentSpec, opts: &RunOptions) -> Result<CampaignResult> {
    if spec.sample_counts.is_empty() {
        return Err(Error::InvalidParameter("table 2 needs sample_counts".into()));
    }
    run_campaign(spec, opts)
}

pub fn write_results_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(RESULTS_HEADER.split(','))?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_results_csv<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::Format {
            format: "results CSV",
            message: format!("unexpected header '{}'", header.join(",")),
        });
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn save_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    write_results_csv(std::io::BufWriter::new(std::fs::File::create(path)?), rows)
}

/// Mean and sample standard deviation of one (method, H, sample count) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub method: MethodKind,
    pub h: f64,
    pub n_sub: usize,
    pub count: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub snr_db_mean: f64,
    pub snr_db_std: f64,
    pub converged: usize,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct CellKey(u64, usize, MethodKind);

/// Cells in order of H, sample count and method.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryCell> {
    let mut groups: BTreeMap<CellKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        // H values are positive, so their bit patterns sort like the numbers
        groups.entry(CellKey(r.h.to_bits(), r.n_sub, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(CellKey(h, n_sub, method), rs)| {
            let (rmse_mean, rmse_std) = mean_std(&rs.iter().map(|r| r.rmse).collect::<Vec<_>>());
            let (snr_db_mean, snr_db_std) = mean_std(&rs.iter().map(|r| r.snr_db).collect::<Vec<_>>());
            SummaryCell {
                method,
                h: f64::from_bits(h),
                n_sub,
                count: rs.len(),
                rmse_mean,
                rmse_std,
                snr_db_mean,
                snr_db_std,
                converged: rs.iter().filter(|r| r.converged).count(),
            }
        })
        .collect()
}

pub fn find_cell(cells: &[SummaryCell], method: MethodKind, h: f64, n_sub: usize) -> Option<&SummaryCell> {
    cells
        .iter()
        .find(|c| c.method == method && (c.h - h).abs() < 1e-9 && c.n_sub == n_sub)
}

pub fn write_summary_csv<W: Write>(w: W, cells: &[SummaryCell]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for c in cells {
        wr.serialize(c)?;
    }
    wr.flush()?;
    Ok(())
}

/// Mean SNR per (factor, H), factors in spec order and H descending.
pub fn write_table1_layout<W: Write>(w: W, spec: &ExperimentSpec, rows: &[ResultRow]) -> Result<()> {
    let cells = summarize(rows);
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["factor", "h", "n_sub", "snr_db_mean", "snr_db_std", "count"])?;
    for plan in spec.sample_plan() {
        let mut hs: Vec<f64> = spec.hurst_values.iter().map(|h| h.value()).collect();
        hs.sort_by(|a, b| b.total_cmp(a));
        for h in hs {
            for &m in &spec.methods {
                if let Some(c) = find_cell(&cells, m, h, plan.n_sub) {
                    wr.write_record([
                        plan.factor.map(|f| f.to_string()).unwrap_or_default(),
                        h.to_string(),
                        plan.n_sub.to_string(),
                        c.snr_db_mean.to_string(),
                        c.snr_db_std.to_string(),
                        c.count.to_string(),
                    ])?;
                }
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Mean RMSE grid: one row per H (descending), one column per (sample count, method).
pub fn write_table2_layout<W: Write>(w: W, spec: &ExperimentSpec, rows: &[ResultRow]) -> Result<usize> {
    let cells = summarize(rows);
    let plan = spec.sample_plan();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["h".to_string()];
    for p in &plan {
        for m in &spec.methods {
            header.push(format!("{m}_{}", p.n_sub));
        }
    }
    wr.write_record(&header)?;
    let mut hs: Vec<f64> = spec.hurst_values.iter().map(|h| h.value()).collect();
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut filled = 0;
    for h in hs {
        let mut rec = vec![h.to_string()];
        for p in &plan {
            for &m in &spec.methods {
                rec.push(match find_cell(&cells, m, h, p.n_sub) {
                    Some(c) => {
                        filled += 1;
                        format!("{:e}", c.rmse_mean)
                    }
                    None => String::new(),
                });
            }
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::HurstParam;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            grid: [12, 12],
            hurst_values: vec![HurstParam::new(0.5).unwrap(), HurstParam::new(0.8).unwrap()],
            sample_counts: vec![30, 60],
            subsampling_factors: vec![],
            methods: vec![MethodKind::Box, MethodKind::ThinPlate, MethodKind::CsTwist, MethodKind::CsTv, MethodKind::CsBp],
            repeats: 2,
            base_seed: 9,
            ..ExperimentSpec::table2_default()
        }
    }

    #[test]
    fn campaign_rows_are_complete_and_sorted() {
        let spec = tiny_spec();
        let res = run_campaign(&spec, &RunOptions::default()).unwrap();
        assert!(res.failures.is_empty(), "{:?}", res.failures);
        assert_eq!(res.rows.len(), 2 * 2 * 2 * 5);
        let keys: std::collections::BTreeSet<_> = res
            .rows
            .iter()
            .map(|r| (r.method, r.h.to_bits(), r.n_sub, r.seed))
            .collect();
        assert_eq!(keys.len(), res.rows.len());
        assert!(res.rows.iter().all(|r| r.rmse.is_finite() && r.snr_db.is_finite() && r.wall_time_s == 0.0));
        let cells = summarize(&res.rows);
        assert_eq!(cells.len(), 2 * 2 * 5);
        assert!(cells.iter().all(|c| c.count == 2));
    }

    #[test]
    fn results_csv_round_trip_and_determinism() {
        let spec = ExperimentSpec {
            methods: vec![MethodKind::Box, MethodKind::CsTwist],
            ..tiny_spec()
        };
        let a = run_campaign(&spec, &RunOptions { threads: Some(2), ..Default::default() }).unwrap();
        let b = run_campaign(&spec, &RunOptions { threads: Some(1), ..Default::default() }).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_results_csv(&mut ca, &a.rows).unwrap();
        write_results_csv(&mut cb, &b.rows).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca.clone()).unwrap();
        assert!(text.starts_with(RESULTS_HEADER));
        let back = read_results_csv(&ca[..]).unwrap();
        assert_eq!(back.len(), a.rows.len());
        for (x, y) in back.iter().zip(&a.rows) {
            assert_eq!((x.method, x.h, x.n_sub, x.seed, x.rmse, x.snr_db), (y.method, y.h, y.n_sub, y.seed, y.rmse, y.snr_db));
        }
    }

    #[test]
    fn table_preconditions() {
        let spec = tiny_spec();
        assert!(run_table1(&spec, &RunOptions::default()).is_err());
        let t1 = ExperimentSpec {
            methods: vec![MethodKind::CsTv],
            sample_counts: vec![],
            subsampling_factors: vec![2],
            ..tiny_spec()
        };
        assert!(run_table2(&t1, &RunOptions::default()).is_err());
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let spec = ExperimentSpec {
            grid: [70, 4],
            hurst_values: vec![HurstParam::new(0.5).unwrap()],
            sample_counts: vec![40],
            methods: vec![MethodKind::Box, MethodKind::CsBp],
            repeats: 1,
            ..tiny_spec()
        };
        let res = run_campaign(&spec, &RunOptions::default()).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.failures.len(), 1);
        assert_eq!(res.failures[0].method, MethodKind::CsBp);
    }

    #[test]
    fn table2_layout_counts_cells() {
        let spec = ExperimentSpec {
            methods: vec![MethodKind::Box, MethodKind::ThinPlate],
            ..tiny_spec()
        };
        let res = run_campaign(&spec, &RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        let filled = write_table2_layout(&mut buf, &spec, &res.rows).unwrap();
        assert_eq!(filled, 2 * 2 * 2);
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "h,box_30,tp_30,box_60,tp_60");
        assert!(lines[1].starts_with("0.8,"));
        assert_eq!(lines.len(), 3);
    }
}
