use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bearing_crnn::training::ConfusionReport;

fn crnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crnn"))
        .args(args)
        .output()
        .expect("spawn crnn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// synth + prepare at T=64, returning the archive directory.
fn desk_archive(root: &Path) -> PathBuf {
    let raw = root.join("raw");
    let o = crnn(&["synth", "--out", s(&raw)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let archive = root.join("archive");
    let mut args = vec!["prepare".to_string(), "--window".into(), "64".into()];
    for name in ["healthy", "outer_race", "inner_race", "rolling_element"] {
        args.push("--class".into());
        args.push(format!(
            "{name}={}",
            raw.join(format!("{name}.vib1")).display()
        ));
    }
    args.push("--out".into());
    args.push(s(&archive).into());
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = crnn(&refs);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("512 windows of 64x2"), "{}", stdout(&o));
    archive
}

fn write_config(root: &Path, archive: &Path, epochs: usize, lr: f64) -> PathBuf {
    let cfg = serde_json::json!({
        "archive": archive,
        "model": {"conv_filters": 16, "conv_kernel": 16, "pool_size": 4, "lstm_units": 12},
        "train": {"epochs": epochs, "batch_size": 16, "learning_rate": lr},
        "split": {"train_fraction": 0.5}
    });
    let path = root.join(format!("run_{epochs}_{lr}.json"));
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn synth_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = crnn(&["synth", "--out", s(dir.path())]);
    assert!(o.status.success());
    let files: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "vib1"))
        .collect();
    assert_eq!(files.len(), 4);
    assert!(stdout(&o).contains("8192 rows x 2 channels"));
    // no lock file is left behind
    assert!(!dir.path().join(".crnn.lock").exists());
}

#[test]
fn train_eval_predict_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let archive = desk_archive(root.path());
    let config = write_config(root.path(), &archive, 8, 0.05);

    let run = |name: &str| {
        let out = root.path().join(name);
        let o = crnn(&[
            "train",
            "--config",
            s(&config),
            "--seed",
            "3",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (out, stdout(&o))
    };
    let (a, text) = run("a");
    assert!(text.contains("final train_acc="), "{text}");

    let csv = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9);
    assert_eq!(
        lines[0],
        "epoch,train_loss,train_acc,test_loss,test_acc,seconds"
    );

    // determinism: identical CSV and checkpoint bytes
    let (b, _) = run("b");
    for f in ["metrics.csv", "model.crn1", "confusion.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }

    let confusion: ConfusionReport =
        serde_json::from_str(&fs::read_to_string(a.join("confusion.json")).unwrap()).unwrap();
    assert_eq!(confusion.classes.len(), 4);
    let total: u64 = confusion.counts.iter().flatten().sum();
    let trace: u64 = (0..4).map(|i| confusion.counts[i][i]).sum();
    assert_eq!(total, 256);
    assert_eq!(trace as f64 / total as f64, confusion.accuracy);

    // eval on the whole archive
    let ckpt = a.join("model.crn1");
    let eval_out = root.path().join("eval");
    let o = crnn(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--archive",
        s(&archive),
        "--out",
        s(&eval_out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let printed: f64 = text
        .split("accuracy=")
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(printed >= 0.99, "{text}");
    let report: ConfusionReport =
        serde_json::from_str(&fs::read_to_string(eval_out.join("confusion.json")).unwrap())
            .unwrap();
    assert!((report.accuracy - printed).abs() < 5e-7);

    // predict on a raw recording
    let raw = root.path().join("raw").join("inner_race.vib1");
    let o = crnn(&["predict", "--checkpoint", s(&ckpt), "--input", s(&raw)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(
        rows[0],
        "window,class,score_healthy,score_outer_race,score_inner_race,score_rolling_element"
    );
    assert_eq!(rows.len(), 129);
    let hits = rows[1..]
        .iter()
        .filter(|r| r.split(',').nth(1) == Some("inner_race"))
        .count();
    assert!(hits >= 120, "{hits} of 128");
}

#[test]
fn zero_learning_rate_keeps_train_accuracy() {
    let root = tempfile::tempdir().unwrap();
    let archive = desk_archive(root.path());
    let config = write_config(root.path(), &archive, 3, 0.0);
    let out = root.path().join("run");
    let o = crnn(&["train", "--config", s(&config), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let accs: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(accs.len(), 3);
    assert!(accs.iter().all(|a| *a == accs[0]), "{accs:?}");
}

#[test]
fn resume_continues_epoch_count() {
    let root = tempfile::tempdir().unwrap();
    let archive = desk_archive(root.path());
    let one = write_config(root.path(), &archive, 1, 0.01);
    let two = write_config(root.path(), &archive, 2, 0.01);
    let first = root.path().join("first");
    assert!(crnn(&["train", "--config", s(&one), "--out", s(&first)])
        .status
        .success());
    let second = root.path().join("second");
    let o = crnn(&[
        "train",
        "--config",
        s(&two),
        "--out",
        s(&second),
        "--resume",
        s(&first.join("model.crn1")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(second.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("2,"));
}

#[test]
fn error_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let archive = desk_archive(root.path());

    // batch 100 does not divide the 256-window partitions
    let out = root.path().join("bad");
    let config = write_config(root.path(), &archive, 1, 0.01);
    let o = crnn(&[
        "train",
        "--config",
        s(&config),
        "--batch-size",
        "100",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nearest feasible"), "{err}");

    // the default 84-wide kernel does not fit a 64-step window
    let o = crnn(&[
        "train",
        "--archive",
        s(&archive),
        "--batch-size",
        "16",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conv1d stage"));

    // missing archive is an I/O failure
    let o = crnn(&[
        "train",
        "--archive",
        s(&root.path().join("nope")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));

    // unknown config key
    let cfg = root.path().join("typo.json");
    fs::write(&cfg, r#"{"train": {"epoch": 2}}"#).unwrap();
    let o = crnn(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    // empty class directory names the class
    let empty = root.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = crnn(&[
        "prepare",
        "--class",
        &format!("outer={}", empty.display()),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("\"outer\""));

    // a lock file blocks a second writer
    let locked = root.path().join("locked");
    fs::create_dir(&locked).unwrap();
    fs::write(locked.join(".crnn.lock"), "").unwrap();
    let o = crnn(&["synth", "--out", s(&locked)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn predict_rejects_short_and_mismatched_input() {
    let root = tempfile::tempdir().unwrap();
    let archive = desk_archive(root.path());
    let config = write_config(root.path(), &archive, 1, 0.01);
    let out = root.path().join("run");
    assert!(crnn(&["train", "--config", s(&config), "--out", s(&out)])
        .status
        .success());
    let ckpt = out.join("model.crn1");

    let short = root.path().join("short.txt");
    fs::write(&short, "0.1 0.2\n0.3 0.4\n").unwrap();
    let o = crnn(&["predict", "--checkpoint", s(&ckpt), "--input", s(&short)]);
    assert_eq!(o.status.code(), Some(2));

    let wide = root.path().join("wide.txt");
    fs::write(&wide, "0.1 0.2 0.3\n".repeat(70)).unwrap();
    let o = crnn(&["predict", "--checkpoint", s(&ckpt), "--input", s(&wide)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("channels"));
}

#[test]
fn gradcheck_passes_and_tight_tolerance_fails() {
    let o = crnn(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("model.lstm.w_f"));
    assert!(text.contains("gradcheck passed"));

    let o = crnn(&["gradcheck", "--tolerance", "1e-12"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILED"));
}

#[test]
fn prepare_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let x = desk_archive(a.path());
    let y = desk_archive(b.path());
    let manifest = fs::read_to_string(x.join("manifest.json")).unwrap();
    assert_eq!(
        manifest,
        fs::read_to_string(y.join("manifest.json")).unwrap()
    );
    for i in 0..4 {
        let f = format!("class_{i:02}.vib1");
        assert_eq!(fs::read(x.join(&f)).unwrap(), fs::read(y.join(&f)).unwrap());
    }
}
