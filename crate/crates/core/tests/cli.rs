mod common;

use std::path::Path;
use std::process::{Command, Output};

fn wdsgnn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdsgnn"))
        .args(args)
        .current_dir(cwd)
        .env("WDSGNN_ARTIFACTS", cwd.join("artifacts"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn parse_and_diameter() {
    let dir = tempfile::tempdir().unwrap();
    let net = common::network_path("anytown");
    let net = net.to_str().unwrap();
    let out = wdsgnn(&["parse", net], dir.path());
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(summary.is_object());
    let out = wdsgnn(&["diameter", net], dir.path());
    assert_eq!(stdout(&out).trim().parse::<usize>().unwrap(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wdsgnn(&["no-such-command"], dir.path()).status.code(), Some(1));
    assert_eq!(wdsgnn(&["parse", "missing.inp"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.inp"), "[JUNCTIONS]\nj 1 x\n").unwrap();
    assert_eq!(wdsgnn(&["parse", "bad.inp"], dir.path()).status.code(), Some(2));
}

#[test]
fn scenes_train_evaluate_export() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let net = common::network_path("anytown");
    let net = net.to_str().unwrap();
    std::fs::write(d.join("scenes.toml"), "n_scenes = 30\nseed = 4\n").unwrap();
    std::fs::write(d.join("train.toml"), "max_epochs = 2\npatience = 1\n").unwrap();

    let out = wdsgnn(&["genscenes", net, "--config", "scenes.toml", "--out", "scenes"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("scenes/pressures.csv").exists());

    let train = [
        "train", "--net", net, "--scenes", "scenes", "--ratio", "0.4", "--topology", "3:4,2:3", "--config",
        "train.toml", "--out", "run",
    ];
    let out = wdsgnn(&train, d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.ckpt", "history.csv", "report.json"] {
        assert!(d.join("run").join(f).exists());
    }

    let out = wdsgnn(
        &["evaluate", "--checkpoint", "run/model.ckpt", "--scenes", "scenes", "--out", "eval.json"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = wdsgnn::eval::EvalReport::load(&d.join("eval.json")).unwrap();
    let b = wdsgnn::eval::EvalReport::load(&d.join("run/report.json")).unwrap();
    assert_eq!(a, b);

    let out = wdsgnn(&["laplacian", net, "--scheme", "logarithmic", "--export", "lap"], d);
    assert!(out.status.success());
    assert!(d.join("lap/logarithmic.csv").exists());

    let out = wdsgnn(&["export-plots", "--net", net, "--out", "plots"], d);
    assert!(out.status.success());
    assert!(d.join("plots/manifest.json").exists());

    let bad = ["train", "--net", net, "--scenes", "scenes", "--ratio", "1.5", "--out", "x"];
    assert_eq!(wdsgnn(&bad, d).status.code(), Some(1));
}
