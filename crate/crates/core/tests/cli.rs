use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn csda(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csda"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path) {
    let o = csda(
        &[
            "synth",
            "--dim",
            "20",
            "--positive",
            "12:0:1",
            "--negative",
            "15:3:1",
            "--negative",
            "15:-3:1",
            "--seed",
            "5",
            "--out",
            "d.csv",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_then_eval_reproduces_training_ap() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let o = csda(
        &[
            "fit",
            "--data",
            "d.csv",
            "--positive-class",
            "0",
            "--method",
            "rocsda:svdn",
            "--kernel",
            "rbf",
            "--sigma",
            "6",
            "--dim",
            "4",
            "--model-out",
            "m.txt",
        ],
        dir,
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("method rocsda-svdn+qr"), "{out}");
    assert!(out.contains("dims 41 -> 4"), "{out}");
    let train_ap: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("train AP "))
        .unwrap()
        .parse()
        .unwrap();

    let o = csda(&["eval", "--model", "m.txt", "--data", "d.csv"], dir);
    assert!(o.status.success());
    let ap: f64 = stdout(&o).trim().parse().unwrap();
    assert!((ap - train_ap).abs() < 1e-6, "{ap} vs {train_ap}");
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let first = fs::read(tmp.path().join("d.csv")).unwrap();
    synth(tmp.path());
    assert_eq!(first, fs::read(tmp.path().join("d.csv")).unwrap());
}

#[test]
fn diagnose_lists_every_method_and_split() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let o = csda(
        &[
            "diagnose",
            "--data",
            "d.csv",
            "--positive-class",
            "1",
            "--kernel",
            "none",
            "--dim",
            "5",
        ],
        tmp.path(),
    );
    assert!(o.status.success());
    let out = stdout(&o);
    for m in [
        "csda",
        "ncsda:EA+s4+qr",
        "ucsda:svdn",
        "ocsda:svdn",
        "rocsda:svdn",
        "hncsda",
        "hocsda",
    ] {
        let rows = out
            .lines()
            .filter(|l| l.split_whitespace().next() == Some(m))
            .count();
        assert_eq!(rows, 2, "{m}\n{out}");
    }
}

#[test]
fn experiment_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("exp.cfg"),
        "synth_dim = 15\nsynth_positive = 12:rand(0,1):0.3\nsynth_negatives = 12:rand(0,1):0.3; 12:rand(0,1):0.3\n\
         methods = csda; hocsda\nrepetitions = 2\nseed = 3\nk_grid = 1,2\nclasses = 0,2\noutput_dir = out\n",
    )
    .unwrap();
    let o = csda(&["experiment", "--config", "exp.cfg"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.join("out/results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("class,rep,method,dim,k,split,ap,a_sum,a_frob,b")
    );
    // 2 classes x 2 repetitions x 2 methods x 2 splits.
    assert_eq!(lines.count(), 16);
    assert!(fs::read_to_string(dir.join("out/summary.md"))
        .unwrap()
        .contains("| hocsda |"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let code = |args: &[&str]| csda(args, dir).status.code().unwrap();

    // Usage and configuration errors.
    assert_eq!(code(&["fit", "--bogus"]), 2);
    assert_eq!(
        code(&[
            "fit",
            "--data",
            "d.csv",
            "--positive-class",
            "0",
            "--method",
            "lda"
        ]),
        2
    );
    fs::write(dir.join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(code(&["experiment", "--config", "bad.cfg"]), 2);
    assert_eq!(code(&["experiment", "--config", "missing.cfg"]), 2);

    // Data errors.
    assert_eq!(
        code(&["fit", "--data", "missing.csv", "--positive-class", "0"]),
        3
    );
    fs::write(dir.join("ragged.csv"), "1,2,0\n3,1\n").unwrap();
    let o = csda(
        &["fit", "--data", "ragged.csv", "--positive-class", "0"],
        dir,
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(
        code(&["fit", "--data", "d.csv", "--positive-class", "9"]),
        3
    );

    // Numeric: two features cannot leave a null space for ten positives.
    let rows: String = (0..20)
        .map(|i| format!("{},{},{}\n", (i * 7 % 5) as f64, (i * 3 % 7) as f64, i % 2))
        .collect();
    fs::write(dir.join("low.csv"), rows).unwrap();
    assert_eq!(
        code(&[
            "fit",
            "--data",
            "low.csv",
            "--positive-class",
            "0",
            "--kernel",
            "none"
        ]),
        4
    );
}
