//! End-to-end tests of the `offsim` binary: artifact schemas, golden
//! predictions, exit codes, and output determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_offsim"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("offsim-cli-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(args: &[&str], out: &Path) -> Output {
    let output = bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn offsim");
    assert!(
        output.status.success(),
        "offsim {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn predict_reports_critical_configurations() {
    let dir = tmp_dir("predict");
    for (model, real, rounded) in [
        ("wanvideo", 119.2, "121"),
        ("flux", 11.5, "12"),
        ("hunyuanvideo", 34.5, "33"),
    ] {
        let out = run_ok(&["predict", model], &dir);
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(
            stdout.contains(&format!("(rounded: {rounded})")),
            "{stdout}"
        );
        let rows = csv_rows(&dir.join("predict.csv"));
        assert_eq!(
            rows[0],
            vec![
                "model",
                "f_star_flops",
                "i_star_flops_per_byte",
                "t_pref_s",
                "critical_real",
                "critical_rounded",
                "min_residency"
            ]
        );
        let got: f64 = rows[1][4].parse().unwrap();
        assert!((got - real).abs() <= 1.0, "{model}: {got}");
        assert_eq!(rows[1][5], rounded);
    }
}

#[test]
fn sweep_emits_ordered_rows_and_is_deterministic() {
    let dir = tmp_dir("sweep");
    run_ok(&["sweep", "wanvideo"], &dir);
    let first = fs::read(dir.join("sweep.csv")).unwrap();
    let rows = csv_rows(&dir.join("sweep.csv"));
    // Header plus 4 values x 3 policies.
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0][0], "model");
    let step_col = rows[0].iter().position(|c| c == "step_time_s").unwrap();
    for chunk in rows[1..].chunks(3) {
        let no: f64 = chunk[0][step_col].parse().unwrap();
        let ch: f64 = chunk[1][step_col].parse().unwrap();
        let wl: f64 = chunk[2][step_col].parse().unwrap();
        assert_eq!(chunk[0][3], "no-offload");
        assert_eq!(chunk[1][3], "chunked");
        assert_eq!(chunk[2][3], "whole-layer");
        assert!(no <= ch && ch <= wl, "{no} {ch} {wl}");
    }
    // Residency column is zero for every non-chunked row.
    let res_col = rows[0].iter().position(|c| c == "residency").unwrap();
    for row in &rows[1..] {
        if row[3] != "chunked" {
            assert_eq!(row[res_col], "0.00");
        }
    }

    // Byte-identical rerun, and --svg must not alter the CSV.
    run_ok(&["sweep", "wanvideo"], &dir);
    assert_eq!(first, fs::read(dir.join("sweep.csv")).unwrap());
    run_ok(&["sweep", "wanvideo", "--svg"], &dir);
    assert_eq!(first, fs::read(dir.join("sweep.csv")).unwrap());
    let svg = fs::read_to_string(dir.join("sweep_step_time.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
    assert!(!svg.contains("href"));
    assert!(fs::read_to_string(dir.join("sweep_memory.svg"))
        .unwrap()
        .contains("polyline"));
}

#[test]
fn single_value_sweep_gives_one_row_per_policy() {
    let dir = tmp_dir("sweep-single");
    run_ok(&["sweep", "flux", "--values", "8"], &dir);
    let rows = csv_rows(&dir.join("sweep.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn breakdown_categories_sum_to_step_time() {
    let dir = tmp_dir("breakdown");
    run_ok(
        &[
            "breakdown",
            "wanvideo",
            "--value",
            "41",
            "--policy",
            "chunked",
            "--validate",
        ],
        &dir,
    );
    let rows = csv_rows(&dir.join("breakdown.csv"));
    let mut sum = 0.0;
    let mut step = 0.0;
    for row in &rows[1..] {
        let seconds: f64 = row[4].parse().unwrap();
        if row[3] == "step_time" {
            step = seconds;
        } else {
            sum += seconds;
        }
    }
    assert!((sum - step).abs() < 1e-9, "{sum} vs {step}");

    // No-offload decomposes to compute + collective only.
    run_ok(
        &[
            "breakdown",
            "wanvideo",
            "--value",
            "41",
            "--policy",
            "no-offload",
        ],
        &dir,
    );
    let rows = csv_rows(&dir.join("breakdown.csv"));
    for row in &rows[1..] {
        if ["prefetch_stall", "contention_stall", "overhead"].contains(&row[3].as_str()) {
            assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn chunk_sweep_covers_the_grid() {
    let dir = tmp_dir("chunks");
    run_ok(&["chunk-sweep", "wanvideo", "--value", "81"], &dir);
    let rows = csv_rows(&dir.join("chunk_sweep.csv"));
    assert_eq!(rows.len(), 5);
    let sizes: Vec<&str> = rows[1..].iter().map(|r| r[2].as_str()).collect();
    assert_eq!(sizes, vec!["4000000", "16000000", "64000000", "256000000"]);
    // Whole-layer degeneracy: a single chunk spanning the layer stays within
    // one DMA startup per layer of the whole-layer policy.
    run_ok(
        &[
            "chunk-sweep",
            "wanvideo",
            "--value",
            "81",
            "--chunks",
            "520000000",
        ],
        &dir,
    );
    let big = csv_rows(&dir.join("chunk_sweep.csv"))[1][3]
        .parse::<f64>()
        .unwrap();
    run_ok(
        &[
            "sweep",
            "wanvideo",
            "--values",
            "81",
            "--policies",
            "whole-layer",
        ],
        &dir,
    );
    let rows = csv_rows(&dir.join("sweep.csv"));
    let step_col = rows[0].iter().position(|c| c == "step_time_s").unwrap();
    let wl: f64 = rows[1][step_col].parse().unwrap();
    assert!((big - wl).abs() <= 30.0 * 40e-6 + 1e-9, "{big} vs {wl}");
}

#[test]
fn residency_sweep_trends_are_opposed() {
    let dir = tmp_dir("residency");
    run_ok(&["residency-sweep", "wanvideo", "--value", "41"], &dir);
    let rows = csv_rows(&dir.join("residency_sweep.csv"));
    assert_eq!(rows.len(), 6);
    let step_col = rows[0].iter().position(|c| c == "step_time_s").unwrap();
    let mem_col = rows[0]
        .iter()
        .position(|c| c == "peak_param_bytes")
        .unwrap();
    let steps: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r[step_col].parse().unwrap())
        .collect();
    let mems: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r[mem_col].parse().unwrap())
        .collect();
    assert!(steps.windows(2).all(|w| w[1] < w[0]), "{steps:?}");
    assert!(mems.windows(2).all(|w| w[1] > w[0]), "{mems:?}");

    // r = 1.0 equals the no-offload step exactly.
    run_ok(
        &[
            "sweep",
            "wanvideo",
            "--values",
            "41",
            "--policies",
            "no-offload",
        ],
        &dir,
    );
    let no = csv_rows(&dir.join("sweep.csv"))[1][5]
        .parse::<f64>()
        .unwrap();
    assert_eq!(*steps.last().unwrap(), no);
}

#[test]
fn roofline_markers_flank_the_turning_point() {
    let dir = tmp_dir("roofline");
    run_ok(&["roofline", "wanvideo"], &dir);
    let rows = csv_rows(&dir.join("roofline.csv"));
    let markers: Vec<&Vec<String>> = rows[1..].iter().filter(|r| r[1] == "marker").collect();
    assert_eq!(markers.len(), 4);
    let i_star = 16_179.775;
    let at = |label: &str| -> (f64, bool) {
        let m = markers.iter().find(|r| r[2] == label).unwrap();
        (m[3].parse().unwrap(), m[5] == "true")
    };
    let (i41, h41) = at("frames=41");
    assert!(i41 < i_star && !h41);
    let (i121, h121) = at("frames=121");
    assert!(i121 > i_star && h121);
    assert!(
        i121 < 1.03 * i_star,
        "marker within 3% of the turning point"
    );
    // The arm row at the turning point attains the compute roof.
    let kink = rows[1..]
        .iter()
        .find(|r| r[2] == "i_star")
        .expect("turning-point row");
    let attain: f64 = kink[4].parse().unwrap();
    assert!((attain - 0.60 * 756e12).abs() / (0.60 * 756e12) < 1e-9);
}

#[test]
fn json_trace_lines_parse_with_nanosecond_timestamps() {
    let dir = tmp_dir("trace");
    let trace = dir.join("trace.jsonl");
    bin()
        .args([
            "breakdown",
            "wanvideo",
            "--value",
            "41",
            "--policy",
            "chunked",
        ])
        .arg("--out")
        .arg(&dir)
        .arg("--json-trace")
        .arg(&trace)
        .output()
        .unwrap();
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.lines().count() > 100);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["t_start", "t_end", "category", "layer", "label"] {
            assert!(v.get(key).is_some(), "missing {key} in {line}");
        }
        // Nine decimal digits on timestamps.
        let raw = line.split(r#""t_start":"#).nth(1).unwrap();
        let digits = raw.split('.').nth(1).unwrap();
        assert!(digits.chars().take_while(|c| c.is_ascii_digit()).count() >= 9);
    }
}

#[test]
fn config_file_overrides_are_honored() {
    let dir = tmp_dir("config");
    let cfg = dir.join("config.json");
    fs::write(
        &cfg,
        r#"{"hardware": {"preset": "wanvideo", "bw_h2d": 6.3e10},
            "models": [{"preset": "wanvideo"}],
            "defaults": {"chunk_bytes": 8000000, "residency": 0.2}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["predict", "wanvideo"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    // Doubling the shared bandwidth halves the prefetch time.
    let rows = csv_rows(&dir.join("predict.csv"));
    let tp: f64 = rows[1][3].parse().unwrap();
    assert!((tp - 0.009274).abs() < 1e-5, "{tp}");

    // breakdown with no --policy falls back to the configured default.
    fs::write(
        &cfg,
        r#"{"hardware": {"preset": "wanvideo"},
            "models": [{"preset": "wanvideo"}],
            "defaults": {"policy": "whole-layer"}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["breakdown", "wanvideo", "--value", "41"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = csv_rows(&dir.join("breakdown.csv"));
    assert_eq!(rows[1][2], "whole-layer");
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tmp_dir("exit");
    // Unknown model: config error.
    let out = bin()
        .args(["predict", "nosuch"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Malformed config file: config error.
    let cfg = dir.join("bad.json");
    fs::write(&cfg, "{").unwrap();
    let out = bin()
        .args(["predict", "wanvideo"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Invariant violation in the config: config error with a field path.
    fs::write(
        &cfg,
        r#"{"hardware": {"preset": "wanvideo", "eta_pref": 0.0}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["predict", "wanvideo"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hardware.eta_pref"));

    // Simulation error: zero chunk size.
    let out = bin()
        .args(["sweep", "wanvideo", "--chunk-bytes", "0"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Non-increasing sweep values: config error.
    let out = bin()
        .args(["sweep", "wanvideo", "--values", "81,41"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
