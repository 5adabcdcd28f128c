use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affectkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn count(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == ext)
        })
        .count()
}

#[test]
fn synth_eval_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "synth",
            "--task",
            "gaze9",
            "--subjects",
            "9",
            "--seed",
            "1",
            "--out",
            "d/",
        ],
    );
    assert!(d.join("d/manifest.json").is_file());
    assert_eq!(count(&d.join("d/eeg"), "csv"), 405);

    fs::write(d.join("gaze.cfg"), "task = gaze9\nfeatures = qpca(A,15)\n").unwrap();
    let first = ok(
        d,
        &[
            "eval",
            "--config",
            "gaze.cfg",
            "--data",
            "d",
            "--out",
            "r1",
            "--save-model",
        ],
    );
    assert!(String::from_utf8_lossy(&first.stdout).contains("macro F1"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("r1/report.json")).unwrap()).unwrap();
    let f1 = json["macro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    assert_eq!(json["dataset"]["instances"], 405);
    for f in ["report.csv", "report.txt", "config.cfg", "model.json"] {
        assert!(d.join("r1").join(f).is_file(), "{f}");
    }

    ok(
        d,
        &[
            "eval",
            "--config",
            "gaze.cfg",
            "--data",
            "d",
            "--out",
            "r2",
            "--save-model",
            "--jobs",
            "1",
        ],
    );
    for f in [
        "report.json",
        "report.csv",
        "report.txt",
        "config.cfg",
        "model.json",
    ] {
        assert_eq!(
            fs::read(d.join("r1").join(f)).unwrap(),
            fs::read(d.join("r2").join(f)).unwrap(),
            "{f} differs"
        );
    }

    ok(
        d,
        &[
            "extract", "--config", "gaze.cfg", "--data", "d", "--out", "x.csv",
        ],
    );
    let text = fs::read_to_string(d.join("x.csv")).unwrap();
    assert_eq!(text.lines().count(), 406);
    assert!(text.starts_with("subject,label,"));
}

#[test]
fn rejected_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "synth",
            "--task",
            "sem_pair1",
            "--subjects",
            "3",
            "--reps",
            "2",
            "--out",
            "f",
        ],
    );

    fs::write(
        d.join("bad.cfg"),
        "task = sem_pair1\nfeatures = dtnnp\nknn.kk = 2\n",
    )
    .unwrap();
    let out = run(d, &["eval", "--config", "bad.cfg", "--data", "f"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("knn.kk"));

    // EEG features on a landmark-only dataset.
    fs::write(
        d.join("eeg.cfg"),
        "task = sem_pair1\nfeatures = vector(60)\n",
    )
    .unwrap();
    let out = run(d, &["eval", "--config", "eeg.cfg", "--data", "f"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(d.join("task.cfg"), "task = gaze9\n").unwrap();
    let out = run(d, &["eval", "--config", "task.cfg", "--data", "f"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(d, &["eval", "--config", "missing.cfg", "--data", "f"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(d, &["synth", "--task", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(d, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("report").exists());
}

#[test]
fn render_from_landmarks_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "synth",
            "--task",
            "ck_emotion7",
            "--subjects",
            "2",
            "--reps",
            "1",
            "--out",
            "f",
        ],
    );
    let lm = fs::read_dir(d.join("f/landmarks"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let lm = lm.to_str().unwrap();
    ok(d, &["render", "--input", lm, "--out", "a.svg"]);
    let svg = fs::read_to_string(d.join("a.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<line"));
    assert!(svg.contains("<polygon"));
    assert!(d.join("a.json").is_file());

    ok(d, &["render", "--input", "a.json", "--out", "b.svg"]);
    let again = fs::read_to_string(d.join("b.svg")).unwrap();
    assert!(again.contains("<line") && !again.contains("<polygon"));

    let out = run(
        d,
        &[
            "render", "--input", lm, "--frame", "100000", "--out", "c.svg",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}
