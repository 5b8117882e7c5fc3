use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use retime_core::optimizer::default_lambda;
use retime_core::signals::normalize_signal;
use serde_json::Value;
use tempfile::TempDir;

fn retime(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retime")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "exit {:?}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    out
}

fn json(text: &[u8]) -> Value {
    serde_json::from_slice(text).expect("valid JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn signal_values(text: &str) -> Vec<f64> {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect()
}

fn write_one_hot(path: &Path, rows: usize, class: usize) {
    let mut text = String::from("# slowness k=2\n");
    for _ in 0..rows {
        let mut row = ["0"; 3];
        row[class] = "1";
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn synth_writes_case_of_expected_size() {
    let dir = TempDir::new().unwrap();
    ok(retime(dir.path(), &["synth", "--duration-seconds", "20", "--fps", "30", "--seed", "7"]));
    let case = json(&fs::read(dir.path().join("case.json")).unwrap());
    assert_eq!(case["n"], 600);
    let skips = case["skips"].as_array().unwrap();
    assert_eq!(case["l"].as_u64().unwrap() as usize, skips.len());
    assert_eq!(skips.iter().map(|s| s.as_u64().unwrap()).sum::<u64>(), 600);
    let slowness = fs::read_to_string(dir.path().join("slowness.csv")).unwrap();
    assert!(slowness.starts_with("# slowness k=2\n"));
    assert_eq!(slowness.lines().count(), 600 + 1);
}

#[test]
fn synth_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str| {
        let case = format!("case_{tag}.json");
        let p = format!("p_{tag}.csv");
        ok(retime(
            dir.path(),
            &["synth", "--duration-seconds", "10", "--seed", "11", "--case-output", &case, "--slowness-output", &p],
        ));
        (fs::read(dir.path().join(case)).unwrap(), fs::read(dir.path().join(p)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn synth_sigma_zero_gives_constant_skips() {
    let dir = TempDir::new().unwrap();
    ok(retime(dir.path(), &["synth", "--duration-seconds", "30", "--seed", "2", "--sigma", "0"]));
    let case = json(&fs::read(dir.path().join("case.json")).unwrap());
    let skips: Vec<u64> = case["skips"].as_array().unwrap().iter().map(|s| s.as_u64().unwrap()).collect();
    // Only the remainder fill at the very end may differ from the chain's skip.
    let body = &skips[..skips.len() - 3];
    assert!(body.iter().all(|&s| s == body[0]), "{skips:?}");
}

#[test]
fn synth_rejects_bad_parameters() {
    let dir = TempDir::new().unwrap();
    assert_eq!(retime(dir.path(), &["synth", "--duration-seconds", "-1"]).status.code(), Some(2));
    assert_eq!(retime(dir.path(), &["synth", "--duration-seconds", "5", "--sigma", "1.5"]).status.code(), Some(2));
}

#[test]
fn retime_recovers_forced_optimum() {
    let dir = TempDir::new().unwrap();
    write_one_hot(&dir.path().join("p.csv"), 127, 0);
    let out =
        ok(retime(dir.path(), &["retime", "--slowness", "p.csv", "--source-frames", "128", "--target-frames", "32"]));
    let result = json(&out.stdout);
    for key in ["d", "nu", "frame_indices", "duration_error", "loss_trace"] {
        assert!(result.get(key).is_some(), "missing {key}");
    }
    assert!(result["duration_error"].as_f64().unwrap() < 0.5);
    assert!(floats(&result["d"]).iter().all(|d| (d - 4.0).abs() < 0.05));
    let idx: Vec<i64> = result["frame_indices"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
    // One index per position including the terminal one, clamped to n - 1.
    assert_eq!(idx.len(), 33);
    for (i, &f) in idx[..32].iter().enumerate() {
        assert!((f - 4 * i as i64).abs() <= 1, "index {i} -> {f}");
    }
    assert_eq!(idx[32], 127);
}

#[test]
fn retime_signal_auto_lambda_is_echoed() {
    let dir = TempDir::new().unwrap();
    let raw: Vec<f64> = (0..99).map(|i| ((i as f64) * 0.3).sin()).collect();
    let text: String = raw.iter().map(|v| format!("{v}\n")).collect();
    fs::write(dir.path().join("s.csv"), text).unwrap();
    let out = ok(retime(
        dir.path(),
        &[
            "retime",
            "--mode",
            "signal",
            "--signal",
            "s.csv",
            "--lambda",
            "auto",
            "--source-frames",
            "100",
            "--target-frames",
            "40",
            "--steps",
            "300",
            "-o",
            "r.json",
        ],
    ));
    assert!(out.stdout.is_empty());
    let result = json(&fs::read(dir.path().join("r.json")).unwrap());
    let expected = default_lambda(100, 40, &normalize_signal(&raw).unwrap()).unwrap();
    let got = result["metadata"]["lambda"].as_f64().unwrap();
    assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    assert_eq!(result["metadata"]["mode"], "signal");
}

#[test]
fn retime_missing_file_exits_2_naming_path() {
    let dir = TempDir::new().unwrap();
    let out =
        retime(dir.path(), &["retime", "--slowness", "absent.csv", "--source-frames", "10", "--target-frames", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("absent.csv"), "{}", stderr(&out));
}

#[test]
fn retime_malformed_file_exits_2() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("p.csv"), "# slowness k=2\n0.5,0.5\n").unwrap();
    let out = retime(dir.path(), &["retime", "--slowness", "p.csv", "--source-frames", "10", "--target-frames", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn retime_infeasible_target_exits_3() {
    let dir = TempDir::new().unwrap();
    write_one_hot(&dir.path().join("p.csv"), 9, 2);
    for l in ["10", "12"] {
        let out = retime(dir.path(), &["retime", "--slowness", "p.csv", "--source-frames", "10", "--target-frames", l]);
        assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    }
}

#[test]
fn synth_output_round_trips_through_retime_and_eval() {
    let dir = TempDir::new().unwrap();
    ok(retime(dir.path(), &["synth", "--duration-seconds", "6", "--seed", "5"]));
    let out =
        ok(retime(dir.path(), &["retime", "--slowness", "slowness.csv", "--case", "case.json", "--steps", "500"]));
    let case = json(&fs::read(dir.path().join("case.json")).unwrap());
    let result = json(&out.stdout);
    assert_eq!(result["d"].as_array().unwrap().len() as u64, case["l"].as_u64().unwrap());

    let out = ok(retime(dir.path(), &["eval", "--case", "case.json", "--steps", "200"]));
    let report = json(&out.stdout);
    assert_eq!(report["cases"].as_array().unwrap().len(), 3);
    assert!(report["cases"].as_array().unwrap().iter().all(|c| c["n"] == 180));
}

#[test]
fn eval_default_shape_and_aggregates() {
    let dir = TempDir::new().unwrap();
    ok(retime(dir.path(), &["eval", "--cases", "2", "--steps", "50", "-o", "report.json", "--csv", "summary.csv"]));
    let report = json(&fs::read(dir.path().join("report.json")).unwrap());
    let summaries = report["summaries"].as_array().unwrap();
    assert_eq!(summaries.len(), 9);
    for s in summaries {
        let maes: Vec<f64> = report["cases"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["method"] == s["method"] && c["duration_seconds"] == s["duration_seconds"])
            .map(|c| c["mae"].as_f64().unwrap())
            .collect();
        assert_eq!(maes.len(), 2);
        let mean = maes.iter().sum::<f64>() / maes.len() as f64;
        assert!((s["mean_mae"].as_f64().unwrap() - mean).abs() < 1e-9);
    }
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn eval_method_filter() {
    let dir = TempDir::new().unwrap();
    let out = ok(retime(dir.path(), &["eval", "--methods", "uniform", "--durations", "5,10", "--cases", "3"]));
    let report = json(&out.stdout);
    for c in report["cases"].as_array().unwrap() {
        assert_eq!(c["method"], "uniform");
    }
    assert_eq!(report["summaries"].as_array().unwrap().len(), 2);
}

#[test]
fn eval_config_file_and_errors() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("good.json"),
        r#"{"durations_seconds": [4], "cases_per_duration": 2, "methods": ["uniform"]}"#,
    )
    .unwrap();
    let report = json(&ok(retime(dir.path(), &["eval", "--config", "good.json"])).stdout);
    assert_eq!(report["cases"].as_array().unwrap().len(), 2);

    fs::write(dir.path().join("bad.json"), r#"{"cases_per_duration": "many"}"#).unwrap();
    assert_eq!(retime(dir.path(), &["eval", "--config", "bad.json"]).status.code(), Some(2));
    fs::write(dir.path().join("unknown.json"), r#"{"casez": 1}"#).unwrap();
    assert_eq!(retime(dir.path(), &["eval", "--config", "unknown.json"]).status.code(), Some(2));
    assert_eq!(retime(dir.path(), &["eval", "--cases", "0"]).status.code(), Some(2));
}

#[test]
fn signal_identical_features_are_degenerate() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("f.csv"), "1,2,3\n1,2,3\n1,2,3\n1,2,3\n").unwrap();
    let out = ok(retime(dir.path(), &["signal", "--type", "cosine", "--features", "f.csv"]));
    assert!(stderr(&out).contains("degenerate"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# orientation=zero_slow\n"));
    let vals = signal_values(&text);
    assert_eq!(vals.len(), 3);
    assert!(vals.iter().all(|&v| v == 0.0));
}

#[test]
fn signal_zero_norm_features_exit_2() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("f.csv"), "1,0\n0,0\n0,1\n").unwrap();
    let out = retime(dir.path(), &["signal", "--type", "cosine", "--features", "f.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("norm"));
}

#[test]
fn signal_from_one_hot_slowness_is_degenerate() {
    let dir = TempDir::new().unwrap();
    write_one_hot(&dir.path().join("p.csv"), 12, 0);
    let out = ok(retime(dir.path(), &["signal", "--type", "speediness", "--slowness", "p.csv"]));
    assert!(stderr(&out).contains("degenerate"));
    assert!(signal_values(&String::from_utf8_lossy(&out.stdout)).iter().all(|&v| v == 0.0));
}

#[test]
fn signal_from_mixed_slowness_spans_unit_interval() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("p.csv"), "# slowness k=2\n1,0,0\n0.2,0.5,0.3\n0,0,1\n0,1,0\n").unwrap();
    let out = ok(retime(
        dir.path(),
        &["signal", "--type", "speediness", "--slowness", "p.csv", "--orientation", "one-slow", "-o", "s.csv"],
    ));
    assert!(!stderr(&out).contains("degenerate"));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(text.starts_with("# orientation=one_slow\n"));
    let vals = signal_values(&text);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((lo, hi), (0.0, 1.0));
    // Raw expected skips: 4, 2.1, 1, 2.
    let expect = [1.0, 1.1 / 3.0, 0.0, 1.0 / 3.0];
    for (v, e) in vals.iter().zip(expect) {
        assert!((v - e).abs() < 1e-12, "{vals:?}");
    }
}

#[test]
fn help_lists_defaults_and_unknown_flags_fail() {
    let dir = TempDir::new().unwrap();
    let help = String::from_utf8(ok(retime(dir.path(), &["retime", "--help"])).stdout).unwrap();
    for needle in ["[default: 4000]", "[default: 0.01]", "[default: 10]", "[default: auto]", "[default: stop]"] {
        assert!(help.contains(needle), "help lacks {needle}");
    }
    let help = String::from_utf8(ok(retime(dir.path(), &["eval", "--help"])).stdout).unwrap();
    assert!(help.contains("[default: 20,60,180]"));
    assert_eq!(retime(dir.path(), &["retime", "--frobnicate"]).status.code(), Some(2));
}
