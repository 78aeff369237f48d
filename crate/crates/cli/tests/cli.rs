use std::path::Path;
use std::process::{Command, Output};

use cvfbm::io::{load_cvf, read_samples_csv};
use serde_json::Value;

fn cvfbm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvfbm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn cvfbm")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = cvfbm(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    if text.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap()
    }
}

#[test]
fn synth_then_self_eval_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--h", "0.8", "--rows", "100", "--cols", "100", "--seed", "7", "--out", "f.cvf"]);
    let report = ok(d, &["eval", "f.cvf", "f.cvf", "--out", "report.json"]);
    assert_eq!(report["rmse"].as_f64(), Some(0.0));
    assert_eq!(report["n_points"].as_u64(), Some(10000));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(saved, report);

    ok(d, &["synth", "--h", "0.8", "--rows", "100", "--cols", "100", "--seed", "7", "--out", "g.cvf"]);
    assert_eq!(std::fs::read(d.join("f.cvf")).unwrap(), std::fs::read(d.join("g.cvf")).unwrap());
}

#[test]
fn full_sampling_thin_plate_interpolates() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--h", "0.6", "--rows", "30", "--cols", "30", "--seed", "3", "--target-rms", "0.05", "--out", "f.cvf"]);
    ok(d, &["sample", "--field", "f.cvf", "--n", "900", "--seed", "1", "--out", "s.csv"]);
    ok(d, &["recon", "--samples", "s.csv", "--rows", "30", "--cols", "30", "--method", "tp", "--p", "1", "--out", "r.cvf"]);
    let samples = read_samples_csv(std::fs::File::open(d.join("s.csv")).unwrap(), 30, 30).unwrap();
    let recon = load_cvf(d.join("r.cvf")).unwrap();
    assert_eq!(samples.len(), 900);
    for s in samples.entries() {
        let v = recon.get(s.index).unwrap();
        assert!((v - s.value).norm() < 1e-8, "{:?}", s.index);
    }
}

#[test]
fn mask_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--h", "0.5", "--rows", "12", "--cols", "9", "--out", "f.cvf"]);
    ok(d, &["sample", "--field", "f.cvf", "--n", "20", "--seed", "4", "--out", "a.csv", "--mask-out", "m.csv"]);
    ok(d, &["sample", "--field", "f.cvf", "--mask", "m.csv", "--out", "b.csv"]);
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
    ok(d, &["sample", "--field", "f.cvf", "--mask", "m.csv", "--ellipticity-header", "--out", "c.csv"]);
    let text = std::fs::read_to_string(d.join("c.csv")).unwrap();
    assert!(text.starts_with("row,col,e1,e2\n"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn recon_methods_write_fields_and_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--h", "0.7", "--rows", "16", "--cols", "16", "--seed", "2", "--out", "f.cvf"]);
    ok(d, &["sample", "--field", "f.cvf", "--n", "128", "--seed", "5", "--out", "s.csv"]);
    for method in ["box", "tp", "cs-twist", "cs-tv", "cs-bp"] {
        let out = format!("{method}.cvf");
        let diag = format!("{method}.json");
        ok(d, &["recon", "--samples", "s.csv", "--rows", "16", "--cols", "16", "--method", method, "--out", &out, "--diagnostics", &diag]);
        let field = load_cvf(d.join(&out)).unwrap();
        assert_eq!(field.dims(), (16, 16));
        let v: Value = serde_json::from_str(&std::fs::read_to_string(d.join(&diag)).unwrap()).unwrap();
        assert_eq!(v["method"], method);
    }
    let report = ok(d, &["eval", "f.cvf", "cs-tv.cvf"]);
    assert!(report["snr_db"].as_f64().unwrap() > 0.0);
}

#[test]
fn bench_table2_layout_has_every_mean_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let spec = r#"{
        "grid": [16, 16],
        "hurst_values": [0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        "sample_counts": [30, 60, 100],
        "methods": ["box", "tp", "cs-twist"],
        "repeats": 1,
        "base_seed": 11,
        "twist": { "max_iters": 20 }
    }"#;
    std::fs::write(d.join("t2.json"), spec).unwrap();
    let summary = ok(d, &["bench", "table2", "--spec", "t2.json", "--out", "results.csv", "--layout", "layout.csv", "--threads", "2"]);
    assert_eq!(summary["mean_cells"].as_u64(), Some(54));
    assert_eq!(summary["failures"].as_u64(), Some(0));
    let layout = std::fs::read_to_string(d.join("layout.csv")).unwrap();
    let lines: Vec<&str> = layout.lines().collect();
    assert_eq!(lines.len(), 7);
    let filled: usize = lines[1..]
        .iter()
        .map(|l| l.split(',').skip(1).filter(|c| c.parse::<f64>().is_ok()).count())
        .sum();
    assert_eq!(filled, 54);
    let results = std::fs::read_to_string(d.join("results.csv")).unwrap();
    assert!(results.starts_with("method,h,n_sub,seed,rmse,snr_db,wall_time_s,iterations\n"));
    assert_eq!(results.lines().count(), 55);

    ok(d, &["bench", "table2", "--spec", "t2.json", "--out", "again.csv"]);
    assert_eq!(results, std::fs::read_to_string(d.join("again.csv")).unwrap());
}

#[test]
fn profile_and_star_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--h", "0.8", "--rows", "64", "--cols", "64", "--seed", "1", "--out", "f.cvf"]);
    let p = ok(d, &["profile", "f.cvf"]);
    assert!(p["radial_spectrum_slope"].as_f64().unwrap() < -1.5);
    assert_eq!(p["compressibility"]["best_k"].as_array().unwrap().len(), 4);

    let s = ok(d, &["star", "--e1", "0.2", "--e2", "-0.1", "--image", "star.pgm"]);
    assert!((s["measured"]["e1"].as_f64().unwrap() - 0.2).abs() < 0.005);
    assert!((s["measured"]["e2"].as_f64().unwrap() + 0.1).abs() < 0.005);
    assert!(std::fs::read(d.join("star.pgm")).unwrap().starts_with(b"P5\n65 65\n255\n"));
}

#[test]
fn figure_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--h", "0.8", "--rows", "20", "--cols", "20", "--out", "f.cvf"]);
    ok(d, &["sample", "--field", "f.cvf", "--n", "100", "--out", "s.csv"]);
    ok(d, &["recon", "--samples", "s.csv", "--rows", "20", "--cols", "20", "--method", "box", "--out", "b.cvf"]);
    ok(d, &["recon", "--samples", "s.csv", "--rows", "20", "--cols", "20", "--method", "tp", "--out", "t.cvf"]);
    let recons = ["--recon", "box=b.cvf", "--recon", "tp=t.cvf"];

    let mut args = vec!["figure", "trace", "--truth", "f.cvf", "--out", "fig"];
    args.extend(recons);
    ok(d, &args);
    let trace = std::fs::read_to_string(d.join("fig/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 101);
    assert!(trace.starts_with("sample,truth_re,truth_im,box_re,box_im,tp_re,tp_im\n101,"));

    args[1] = "spectrum";
    ok(d, &args);
    assert!(std::fs::read_to_string(d.join("fig/spectrum.csv")).unwrap().starts_with("bin,truth,box,tp\n"));

    args[1] = "field-images";
    ok(d, &args);
    for stem in ["truth", "box", "tp"] {
        for part in ["re", "im"] {
            assert!(d.join(format!("fig/{stem}_{part}.pgm")).is_file());
        }
    }
}

#[test]
fn bad_input_exits_with_usage_status() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("junk.cvf"), b"not a field").unwrap();
    ok(d, &["synth", "--h", "0.5", "--rows", "8", "--cols", "8", "--out", "f.cvf"]);
    let cases: [&[&str]; 6] = [
        &["synth", "--h", "0.5", "--rows", "8", "--cols", "8", "--out", "x.cvf", "--colour"],
        &["synth", "--h", "1.5", "--rows", "8", "--cols", "8", "--out", "x.cvf"],
        &["eval", "junk.cvf", "f.cvf"],
        &["eval", "missing.cvf", "f.cvf"],
        &["figure", "histogram", "--truth", "f.cvf", "--out", "fig"],
        &["recon", "--samples", "f.cvf", "--rows", "8", "--cols", "8", "--method", "kriging", "--out", "r.cvf"],
    ];
    for args in cases {
        let out = cvfbm(d, args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn solver_failure_exits_one_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--h", "0.5", "--rows", "16", "--cols", "16", "--out", "f.cvf"]);
    ok(d, &["sample", "--field", "f.cvf", "--n", "60", "--out", "s.csv"]);
    let out = cvfbm(d, &["recon", "--samples", "s.csv", "--rows", "16", "--cols", "16", "--method", "cs-bp", "--max-iters", "2", "--out", "r.cvf"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["diagnostics"]["solver"]["converged"], Value::Bool(false));
    assert!(!d.join("r.cvf").exists());
}
