use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn roadchar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadchar"))
        .args(args)
        .env_remove("ROADCHAR_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = roadchar(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn synth(dir: &Path, count: &str) {
    ok(&[
        "synth",
        "--out",
        p(dir),
        "--count",
        count,
        "--width",
        "96",
        "--height",
        "72",
    ]);
}

#[test]
fn synthetic_labels_score_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    synth(&data, "4");
    let out = tmp.path().join("eval");
    ok(&[
        "evaluate",
        "--labels",
        p(&data.join("labels")),
        "--preds",
        p(&data.join("preds")),
        "--frames",
        p(&data.join("rgb")),
        "--out",
        p(&out),
    ]);
    let metrics = read_json(&out.join("metrics.json"));
    for kind in ["box", "mask"] {
        let mean = &metrics[kind]["mean"];
        assert_eq!(mean["ap50"], 1.0, "{kind}: {mean}");
        assert_eq!(mean["recall"], 1.0);
    }
    for name in ["box_confidence_curve.csv", "mask_pr_curve.csv"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn characterize_is_deterministic_and_reports_every_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    synth(&data, "3");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "characterize",
            "--frames",
            p(&data.join("rgb")),
            "--preds",
            p(&data.join("masks")),
            "--depths",
            p(&data.join("depth")),
            "--out",
            p(&out),
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(files_under(&a), files_under(&b));
    for i in 0..3 {
        let id = format!("synth_{i:04}");
        let report = read_json(&a.join("reports").join(format!("{id}.json")));
        let expected = read_json(&data.join("expected").join(format!("{id}.json")));
        assert_eq!(report["frame_id"], id.as_str());
        assert_eq!(
            report["pothole_count"].as_u64().unwrap() as usize,
            expected["instances"].as_array().unwrap().len()
        );
        assert!(a.join("overlays").join(format!("{id}.png")).is_file());
    }
    let csv = std::fs::read_to_string(a.join("potholes.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("frame_id"));
}

#[test]
fn prep_is_seeded_and_splits_by_family() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    synth(&data, "6");
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "--seed",
            seed,
            "prep",
            "--input",
            p(&data),
            "--out",
            p(&out),
            "--test-count",
            "2",
            "--size",
            "48x36",
        ]);
        out
    };
    let (a, b) = (run("a", "3"), run("b", "3"));
    assert_eq!(files_under(&a), files_under(&b));
    let manifest = read_json(&a.join("manifest.json"));
    let families = manifest["split"]["test_families"].as_array().unwrap();
    assert_eq!(families.len(), 2);
    let test_ids = manifest["split"]["test_ids"].as_array().unwrap();
    assert_eq!(test_ids.len(), 2 * 5);
    assert_eq!(manifest["counts"]["output"], 30);

    let too_many = roadchar(&[
        "prep",
        "--input",
        p(&data),
        "--out",
        p(&tmp.path().join("c")),
        "--test-count",
        "6",
    ]);
    assert_eq!(too_many.status.code(), Some(1));
}

#[test]
fn depth_eval_of_identical_sets_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    synth(&data, "2");
    let depth = data.join("depth");
    let stdout = ok(&["depth-eval", "--pred", p(&depth), "--gt", p(&depth)]);
    let result: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(result["mean_rmse"], 0.0);
    assert_eq!(result["per_frame"].as_array().unwrap().len(), 2);
}

fn effective_config(args: &[&str], env: Option<&Path>) -> BTreeMap<String, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_roadchar"));
    cmd.args(args).arg("config").env_remove("ROADCHAR_CONFIG");
    if let Some(path) = env {
        cmd.env("ROADCHAR_CONFIG", path);
    }
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.trim_matches('"').to_string()))
        .collect()
}

#[test]
fn config_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let env_file = tmp.path().join("env.toml");
    std::fs::write(&env_file, "band_radius = 9\nrpd_mode = \"ratio\"\n").unwrap();
    let flag_file = tmp.path().join("flag.toml");
    std::fs::write(&flag_file, "band_radius = 11\n").unwrap();

    let defaults = effective_config(&[], None);
    assert_eq!(defaults["band_radius"], "15");
    assert_eq!(defaults["rpd_mode"], "difference");

    let env = effective_config(&[], Some(&env_file));
    assert_eq!(env["band_radius"], "9");
    assert_eq!(env["rpd_mode"], "ratio");

    // an explicit file replaces the environment one entirely
    let explicit = effective_config(&["--config", p(&flag_file)], Some(&env_file));
    assert_eq!(explicit["band_radius"], "11");
    assert_eq!(explicit["rpd_mode"], "difference");

    let flags = effective_config(
        &["--band-radius", "4", "--rpd-mode", "ratio"],
        Some(&env_file),
    );
    assert_eq!(flags["band_radius"], "4");
    assert_eq!(flags["rpd_mode"], "ratio");
}

fn error_kind(out: &Output) -> String {
    let err: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|_| {
        panic!(
            "stderr is not JSON: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    });
    assert!(err["error"]["message"].is_string());
    err["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn exit_codes_and_error_shape() {
    let tmp = tempfile::tempdir().unwrap();

    let bad_value = roadchar(&["--iou-threshold", "1.5", "config"]);
    assert_eq!(bad_value.status.code(), Some(2));
    assert_eq!(error_kind(&bad_value), "usage");

    let bad_file = tmp.path().join("bad.toml");
    std::fs::write(&bad_file, "no_such_key = 1\n").unwrap();
    let unknown_key = roadchar(&["--config", p(&bad_file), "config"]);
    assert_eq!(unknown_key.status.code(), Some(2));

    let no_dims = roadchar(&[
        "evaluate",
        "--labels",
        p(tmp.path()),
        "--preds",
        p(tmp.path()),
    ]);
    assert_eq!(no_dims.status.code(), Some(2));
    assert_eq!(error_kind(&no_dims), "usage");

    let missing = tmp.path().join("missing");
    let missing_dir = roadchar(&[
        "characterize",
        "--frames",
        p(&missing),
        "--preds",
        p(&missing),
        "--out",
        p(&tmp.path().join("out")),
    ]);
    assert_eq!(missing_dir.status.code(), Some(1));
    assert_eq!(error_kind(&missing_dir), "data");

    assert_eq!(roadchar(&["no-such-command"]).status.code(), Some(2));
}
