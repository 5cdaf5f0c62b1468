use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aemodem::bench::plot::polyline_count;
use aemodem::bench::table;

fn aemodem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aemodem")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains a tiny model and returns its bundle path.
fn tiny(root: &Path, seed: &str) -> PathBuf {
    tiny_model(root, "AE-4/8", seed)
}

fn tiny_model(root: &Path, model: &str, seed: &str) -> PathBuf {
    let stem = model.replace('/', "_");
    let out = root.join(format!("train-{stem}-{seed}"));
    let o = aemodem(&["train", "--model", model, "--steps", "30", "--seed", seed, "--out-dir", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join(format!("{stem}.weights"))
}

#[test]
fn train_writes_bundle_log_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = tiny(dir.path(), "1");
    assert!(bundle.exists());
    let out = bundle.parent().unwrap();
    let log = table::read(out.join("train_log.csv")).unwrap();
    assert_eq!(log.rows.len(), 1);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn replay_reproduces_outputs_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = tiny(dir.path(), "1");
    let st = dir.path().join("stream");
    let o = aemodem(&[
        "streamsim", "--bundle", s(&bundle), "--num-symbols", "3000", "--drift-ppm", "400",
        "--es-n0-db", "10", "--start-offset", "3", "--seed", "5", "--out-dir", s(&st),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = st.join("manifest.json");
    let o = aemodem(&["replay", s(&manifest)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["decoded.txt", "rx.cf32", "stream_report.csv"] {
        assert_eq!(fs::read(st.join(f)).unwrap(), fs::read(st.join("replay").join(f)).unwrap(), "{f}");
    }

    let train_manifest = bundle.parent().unwrap().join("manifest.json");
    let o = aemodem(&["replay", s(&train_manifest)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    for a in m["artifacts"].as_array_mut().unwrap() {
        if a["path"] == "decoded.txt" {
            a["sha256"] = "00".repeat(32).into();
        }
    }
    fs::write(&manifest, m.to_string()).unwrap();
    let o = aemodem(&["replay", s(&manifest), "--out-dir", s(&dir.path().join("again"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("decoded.txt"), "{}", stderr(&o));
}

#[test]
fn sweep_and_report_draw_one_curve_per_input_plus_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let a = tiny(dir.path(), "1");
    let b = tiny_model(dir.path(), "AE-4/8-2", "2");
    let mut inputs = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(format!("sweep-{seed}"));
        let o = aemodem(&[
            "sweep", "--bundle", s(&a), "--bundle", s(&b), "--eb-n0-db", "0,4,8,8",
            "--num-symbols", "1000", "--seed", seed, "--out-dir", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stderr(&o).contains("warning"), "duplicate point is reported");
        for f in ["sweep_AE-4_8.csv", "sweep_AE-4_8-2.csv"] {
            let t = table::read(out.join(f)).unwrap();
            assert_eq!(t.rows.len(), 3);
            inputs.push(out.join(f));
        }
    }
    let rep = dir.path().join("report");
    let mut args = vec!["report", "--bpsk", "--out-dir", s(&rep)];
    for i in &inputs {
        args.extend(["--input", s(i)]);
    }
    let o = aemodem(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(rep.join("report.svg")).unwrap();
    assert_eq!(polyline_count(&svg), 5);
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = aemodem(&["report", "--input", s(&empty), "--out-dir", s(&dir.path().join("r2"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn tx_and_rx_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = tiny(dir.path(), "1");
    let syms = dir.path().join("syms.txt");
    fs::write(&syms, "3\n0\n15\n7\n7\n1\n").unwrap();
    let tx = dir.path().join("tx");
    let o = aemodem(&["tx", "--bundle", s(&bundle), "--symbols", s(&syms), "--out-dir", s(&tx)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::metadata(tx.join("tx.cf32")).unwrap().len(), 6 * 16 * 8);
    let meta = fs::read_to_string(tx.join("tx.cf32.meta")).unwrap();
    assert!(meta.contains("format = cf32_le"));
    let rx = dir.path().join("rx");
    let o = aemodem(&[
        "rx", "--bundle", s(&bundle), "--iq", s(&tx.join("tx.cf32")), "--reference", s(&syms), "--out-dir", s(&rx),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let decoded = fs::read_to_string(rx.join("decoded.txt")).unwrap();
    assert_eq!(decoded.lines().count(), 5);
    assert!(rx.join("rx_report.csv").exists());

    fs::write(&syms, "3\n16\n").unwrap();
    let o = aemodem(&["tx", "--bundle", s(&bundle), "--symbols", s(&syms), "--out-dir", s(&tx)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn gradcheck_passes_and_names_a_corrupted_layer() {
    let dir = tempfile::tempdir().unwrap();
    let o = aemodem(&["gradcheck", "--instances", "2", "--out-dir", s(&dir.path().join("ok"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = table::read(dir.path().join("ok").join("gradcheck.csv")).unwrap();
    assert_eq!(t.rows.len(), 13);

    let o = aemodem(&["gradcheck", "--instances", "2", "--corrupt", "conv1d", "--out-dir", s(&dir.path().join("bad"))]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("conv1d"), "{}", stderr(&o));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "total_steps = 10\nbatch_sise = 4\n").unwrap();
    let o = aemodem(&["train", "--config", s(&cfg), "--out-dir", s(&dir.path().join("a"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("batch_sise"), "{}", stderr(&o));

    let o = aemodem(&["train", "--model", "AE-4/4", "--out-dir", s(&dir.path().join("b"))]);
    assert_eq!(code(&o), 1);
    let o = aemodem(&["eval", "--bundle", s(&dir.path().join("missing.weights")), "--out-dir", s(&dir.path().join("c"))]);
    assert_eq!(code(&o), 1);

    fs::write(&cfg, "total_steps = 12\nlog_interval = 4\n[model]\nk = 4\nn = 8\nsfe_enabled = false\n").unwrap();
    let out = dir.path().join("d");
    let o = aemodem(&["train", "--config", s(&cfg), "--steps", "8", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(table::read(out.join("train_log.csv")).unwrap().rows.len(), 2);
    assert!(out.join("AE-4_8-2.weights").exists());
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "total_steps = 50\n[optimizer]\nlearning_rate = 1e30\n").unwrap();
    let o = aemodem(&["train", "--model", "AE-4/8", "--config", s(&cfg), "--out-dir", s(&dir.path().join("a"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}
