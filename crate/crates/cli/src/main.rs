//! `cvfbm` command-line front end.
//!
//! Exit status: 0 on success, 2 for usage or input errors, 1 for numerical
//! failures (with a JSON diagnostic on stderr).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cvfbm::baselines::{boxcar_reconstruct, thin_plate_reconstruct, BoxcarConfig, RangeAdjust, ThinPlateConfig};
use cvfbm::cs::{
    bp_solve, compressibility_diagnostics, tv_equality_solve, twist_reconstruct, CsOutput,
    EqualitySolverConfig, TwistConfig,
};
use cvfbm::fbm::{normalize_dynamic_range, synthesize_cvfbm_with, EnvelopeMode, HurstParam, SynthOptions};
use cvfbm::harness::{
    run_table1, run_table2, save_results_csv, summarize, write_field_images, write_spectrum_csv,
    write_table1_layout, write_table2_layout, write_trace_csv, ExperimentSpec, FigureKind, MethodKind,
    RunOptions,
};
use cvfbm::io::{load_cvf, read_mask_csv, read_samples_csv, save_cvf, write_mask_csv, write_samples_csv, SampleHeader};
use cvfbm::metrics::{evaluate, radial_spectrum_slope};
use cvfbm::psf::{
    brightness_moments, ellipticity_from_moments, psf_radius, render_star, Ellipticity, EllipticityForm,
    RadialProfile,
};
use cvfbm::sampling::{random_mask, subsample};
use cvfbm::{ComplexField, Error};

#[derive(Parser)]
#[command(name = "cvfbm", version, about = "Complex fBm synthesis and sparse-sample reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a CV-fBm field and write it as CVF1.
    Synth(SynthArgs),
    /// Draw samples from a field at random or given positions.
    Sample(SampleArgs),
    /// Reconstruct a full field from a sample CSV.
    Recon(ReconArgs),
    /// Compare an estimate with the truth and print an evaluation report.
    Eval(EvalArgs),
    /// Run an experiment campaign.
    Bench(BenchArgs),
    /// Print the spectral slope and compressibility of a field.
    Profile(ProfileArgs),
    /// Render a sheared star and measure its ellipticity back.
    Star(StarArgs),
    /// Emit plot-ready data: field-images, spectrum or trace.
    Figure(FigureArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    h: f64,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Envelope::Amplitude)]
    envelope: Envelope,
    /// Rescale to this RMS magnitude.
    #[arg(long)]
    target_rms: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Envelope {
    Amplitude,
    Power,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    field: PathBuf,
    /// Number of random positions.
    #[arg(long, conflicts_with = "mask", required_unless_present = "mask")]
    n: Option<usize>,
    /// `row,col` CSV of positions.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the `row,col,e1,e2` catalog header instead of `row,col,re,im`.
    #[arg(long)]
    ellipticity_header: bool,
    /// Also write the drawn positions as a mask CSV.
    #[arg(long)]
    mask_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, value_parser = parse_method)]
    method: MethodKind,
    /// JSON file with the method configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Boxcar window width (odd).
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum)]
    range_adjust: Option<RangeArg>,
    /// Thin-plate smoothing weight in (0, 1].
    #[arg(long)]
    p: Option<f64>,
    /// Absolute TwIST regularization weight.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_factor: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// TwIST objective tolerance, or both residual tolerances for cs-tv and cs-bp.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    allow_large: bool,
    #[arg(long)]
    out: PathBuf,
    /// Solver diagnostics as JSON.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RangeArg {
    None,
    Affine,
}

#[derive(Args)]
struct EvalArgs {
    truth: PathBuf,
    estimate: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(value_enum)]
    table: Table,
    /// Experiment spec JSON; the table defaults are used when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Per-run results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Mean table in the layout of the published table.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Root directory for persisted fields, masks and reconstructions.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Table1,
    Table2,
}

#[derive(Args)]
struct ProfileArgs {
    field: PathBuf,
}

#[derive(Args)]
struct StarArgs {
    #[arg(long, value_enum, default_value_t = ProfileKind::Gaussian)]
    profile: ProfileKind,
    #[arg(long, default_value_t = 3.0)]
    scale: f64,
    #[arg(long, default_value_t = RadialProfile::DEFAULT_MOFFAT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    e1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    e2: f64,
    #[arg(long, default_value_t = 65)]
    size: usize,
    #[arg(long, value_enum, default_value_t = FormArg::Standard)]
    form: FormArg,
    /// Weight the moments with the rendering profile.
    #[arg(long)]
    weighted: bool,
    /// Write the rendered star as a PGM image.
    #[arg(long)]
    image: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileKind {
    Gaussian,
    Moffat,
    Airy,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Paper,
    Standard,
}

#[derive(Args)]
struct FigureArgs {
    /// field-images, spectrum or trace.
    kind: String,
    #[arg(long)]
    truth: PathBuf,
    /// Reconstruction as `label=path`; repeatable.
    #[arg(long = "recon", value_parser = parse_labelled)]
    recons: Vec<(String, PathBuf)>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<MethodKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_labelled(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((l, p)) if !l.is_empty() && !p.is_empty() => Ok((l.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected label=path, got '{s}'")),
    }
}

enum Failure {
    Input(String),
    Numerical { message: String, diagnostics: Value },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical {
                message: e.to_string(),
                diagnostics: Value::Null,
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Sample(a) => sample(a),
        Command::Recon(a) => recon(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Profile(a) => profile(a),
        Command::Star(a) => star(a),
        Command::Figure(a) => figure(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical { message, diagnostics }) => {
            eprintln!("{}", json!({ "error": message, "diagnostics": diagnostics }));
            ExitCode::from(1)
        }
    }
}

fn print_json(v: &impl serde::Serialize) -> CliResult {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_field(path: &Path) -> Result<ComplexField, Failure> {
    load_cvf(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn synth(a: SynthArgs) -> CliResult {
    let opts = SynthOptions {
        envelope: match a.envelope {
            Envelope::Amplitude => EnvelopeMode::Amplitude,
            Envelope::Power => EnvelopeMode::Power,
        },
    };
    let mut field = synthesize_cvfbm_with(HurstParam::new(a.h)?, a.rows, a.cols, a.seed, opts)?;
    if let Some(t) = a.target_rms {
        field = normalize_dynamic_range(&field, t)?;
    }
    save_cvf(&a.out, &field)?;
    Ok(())
}

fn sample(a: SampleArgs) -> CliResult {
    let field = load_field(&a.field)?;
    let mask = match (a.n, &a.mask) {
        (_, Some(path)) => read_mask_csv(open(path)?)?,
        (Some(n), None) => random_mask(field.rows(), field.cols(), n, a.seed)?,
        (None, None) => unreachable!("clap requires --n or --mask"),
    };
    let samples = subsample(&field, &mask)?;
    let header = if a.ellipticity_header {
        SampleHeader::Ellipticity
    } else {
        SampleHeader::ReIm
    };
    write_samples_csv(create(&a.out)?, &samples, header)?;
    if let Some(path) = &a.mask_out {
        write_mask_csv(create(path)?, &mask)?;
    }
    Ok(())
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    match path {
        Some(p) => Ok(serde_json::from_reader(open(p)?)?),
        None => Ok(T::default()),
    }
}

fn recon(a: ReconArgs) -> CliResult {
    let samples = read_samples_csv(open(&a.samples)?, a.rows, a.cols)?;
    let cfg_path = a.config.as_deref();
    let (field, diagnostics) = match a.method {
        MethodKind::Box => {
            let mut cfg: BoxcarConfig = read_config(cfg_path)?;
            if let Some(w) = a.window {
                cfg.window = w;
            }
            if let Some(r) = a.range_adjust {
                cfg.range_adjust = match r {
                    RangeArg::None => RangeAdjust::None,
                    RangeArg::Affine => RangeAdjust::Affine,
                };
            }
            (boxcar_reconstruct(&samples, &cfg)?, json!({ "method": "box", "config": cfg }))
        }
        MethodKind::ThinPlate => {
            let mut cfg: ThinPlateConfig = read_config(cfg_path)?;
            if a.p.is_some() {
                cfg.p = a.p;
            }
            (thin_plate_reconstruct(&samples, &cfg)?, json!({ "method": "tp", "config": cfg }))
        }
        MethodKind::CsTwist => {
            let mut cfg: TwistConfig = read_config(cfg_path)?;
            if a.lambda.is_some() {
                cfg.lambda = a.lambda;
            }
            if let Some(f) = a.lambda_factor {
                cfg.lambda_factor = f;
            }
            if let Some(n) = a.max_iters {
                cfg.max_iters = n;
            }
            if let Some(t) = a.tol {
                cfg.tol = t;
            }
            let out = twist_reconstruct(&samples, &cfg)?;
            (out.field, json!({ "method": "cs-twist", "config": cfg, "solver": out.diagnostics }))
        }
        MethodKind::CsTv | MethodKind::CsBp => {
            let mut cfg: EqualitySolverConfig = read_config(cfg_path)?;
            if let Some(n) = a.max_iters {
                cfg.max_iters = n;
            }
            if let Some(t) = a.tol {
                cfg.primal_tol = t;
                cfg.dual_tol = t;
            }
            cfg.allow_large |= a.allow_large;
            let out: CsOutput = if a.method == MethodKind::CsTv {
                tv_equality_solve(&samples, &cfg)?
            } else {
                bp_solve(&samples, &cfg)?
            };
            let diag = json!({ "method": a.method.name(), "config": cfg, "solver": out.diagnostics });
            if !out.diagnostics.converged {
                return Err(Failure::Numerical {
                    message: format!("{} did not converge", a.method),
                    diagnostics: diag,
                });
            }
            (out.field, diag)
        }
    };
    save_cvf(&a.out, &field)?;
    if let Some(path) = &a.diagnostics {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &diagnostics)?;
        w.flush()?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let truth = load_field(&a.truth)?;
    let est = load_field(&a.estimate)?;
    let report = evaluate(&truth, &est)?;
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.flush()?;
    }
    print_json(&report)
}

fn bench(a: BenchArgs) -> CliResult {
    let spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_json(&text)?
        }
        None => match a.table {
            Table::Table1 => ExperimentSpec::table1_default(),
            Table::Table2 => ExperimentSpec::table2_default(),
        },
    };
    let opts = RunOptions {
        artifact_root: a.artifacts.clone(),
        threads: a.threads,
    };
    let res = match a.table {
        Table::Table1 => run_table1(&spec, &opts)?,
        Table::Table2 => run_table2(&spec, &opts)?,
    };
    save_results_csv(&a.out, &res.rows)?;
    let cells = summarize(&res.rows);
    if let Some(path) = &a.layout {
        let mut w = create(path)?;
        match a.table {
            Table::Table1 => write_table1_layout(&mut w, &spec, &res.rows)?,
            Table::Table2 => {
                write_table2_layout(&mut w, &spec, &res.rows)?;
            }
        }
        w.flush()?;
    }
    for f in &res.failures {
        eprintln!("cell failed: {} h={} n_sub={} seed={}: {}", f.method, f.h, f.n_sub, f.seed, f.error);
    }
    print_json(&json!({
        "rows": res.rows.len(),
        "mean_cells": cells.len(),
        "failures": res.failures.len(),
        "artifact_dir": res.artifact_dir,
    }))
}

fn profile(a: ProfileArgs) -> CliResult {
    let field = load_field(&a.field)?;
    print_json(&json!({
        "rows": field.rows(),
        "cols": field.cols(),
        "rms": field.rms(),
        "radial_spectrum_slope": radial_spectrum_slope(&field)?,
        "compressibility": compressibility_diagnostics(&field)?,
    }))
}

fn star(a: StarArgs) -> CliResult {
    let profile = match a.profile {
        ProfileKind::Gaussian => RadialProfile::Gaussian { scale: a.scale },
        ProfileKind::Moffat => RadialProfile::Moffat { scale: a.scale, beta: a.beta },
        ProfileKind::Airy => RadialProfile::Airy { scale: a.scale },
    };
    let form = match a.form {
        FormArg::Paper => EllipticityForm::Paper,
        FormArg::Standard => EllipticityForm::Standard,
    };
    let e = Ellipticity::new(a.e1, a.e2)?;
    let img = render_star(profile, e, a.size, 1.0)?;
    let q = brightness_moments(&img, a.weighted.then_some(profile))?;
    let measured = ellipticity_from_moments(&q, form)?;
    if let Some(path) = &a.image {
        cvfbm::harness::write_pgm(create(path)?, a.size, a.size, img.intensities())?;
    }
    print_json(&json!({
        "input": { "e1": a.e1, "e2": a.e2 },
        "measured": { "e1": measured.re, "e2": measured.im },
        "moments": { "q11": q.q11, "q12": q.q12, "q22": q.q22 },
        "radius": psf_radius(&q),
    }))
}

fn figure(a: FigureArgs) -> CliResult {
    let kind: FigureKind = a.kind.parse()?;
    let truth = load_field(&a.truth)?;
    let mut recons = Vec::with_capacity(a.recons.len());
    for (label, path) in &a.recons {
        recons.push((label.clone(), load_field(path)?));
    }
    std::fs::create_dir_all(&a.out)?;
    match kind {
        FigureKind::FieldImages => {
            write_field_images(&truth, &a.out, "truth")?;
            for (label, f) in &recons {
                write_field_images(f, &a.out, label)?;
            }
        }
        FigureKind::Spectrum => {
            let mut fields = vec![("truth".to_string(), truth)];
            fields.extend(recons);
            let mut w = create(&a.out.join("spectrum.csv"))?;
            write_spectrum_csv(&mut w, &fields)?;
            w.flush()?;
        }
        FigureKind::Trace => {
            let mut w = create(&a.out.join("trace.csv"))?;
            write_trace_csv(&mut w, &truth, &recons)?;
            w.flush()?;
        }
    }
    Ok(())
}
