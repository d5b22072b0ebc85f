use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pomh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pomh")).args(args).output().expect("spawn pomh")
}

fn ok(args: &[&str]) -> String {
    let out = pomh(args);
    assert!(
        out.status.success(),
        "pomh {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        ok(&["gen", "--out", d.to_str().unwrap(), "--children", "30", "--seed", "4"]);
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.len() > 30);
    assert_eq!(fa, fb);
}

#[test]
fn sweep_report_train_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--out", data.to_str().unwrap(), "--children", "100", "--seed", "2"]);
    let manifest = data.join("manifest.json");
    assert!(manifest.exists());
    let config = tmp.path().join("run.cfg");
    fs::write(
        &config,
        format!("# GLM then Counting over the default grids\nmanifest = {}\npairs = glm-counting\nseed = 3\n", manifest.display()),
    )
    .unwrap();
    let cfg = config.to_str().unwrap();

    let runs: Vec<PathBuf> = ["s1", "s2"].iter().map(|d| tmp.path().join(d)).collect();
    for r in &runs {
        let stdout = ok(&["--config", cfg, "--jobs", "1", "sweep", "--out", r.to_str().unwrap()]);
        assert!(stdout.contains("ty_dist"));
    }
    assert_eq!(files(&runs[0]), files(&runs[1]));
    let cells = fs::read_to_string(runs[0].join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count() - 1, 9 * 3 * 8);
    let best = fs::read_to_string(runs[0].join("best_glm-counting.csv")).unwrap();
    assert_eq!(best.lines().next().unwrap(), "ty_dist,w_max,alpha,auc_train,auc_test");
    assert_eq!(best.lines().count(), 4);
    let roc = fs::read_to_string(runs[0].join("roc").join("glm-counting_distinf.csv")).unwrap();
    assert!(roc.starts_with("fold,cutoff,fpr,tpr\n"));

    let table = ok(&["report", "--report", runs[0].to_str().unwrap()]);
    let header: Vec<&str> = table.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(header, ["ty_dist", "w_max", "alpha", "auc_train", "auc_test"]);
    let first: Vec<&str> = table.lines().nth(2).unwrap().split_whitespace().take(2).collect();
    assert_eq!(first, ["1", "dist1"]);

    let features = tmp.path().join("features.csv");
    ok(&["--config", cfg, "features", "--w-max", "31", "--dist", "l2", "--out", features.to_str().unwrap()]);
    let ft = fs::read_to_string(&features).unwrap();
    assert!(ft.starts_with("child_id,symbol,w_hat_x,dist,total_time,section,dysgraphia"));

    let model = tmp.path().join("model.json");
    ok(&[
        "--config", cfg, "train", "--w-max", "31", "--dist", "linf", "--alpha", "0.89", "--out", model.to_str().unwrap(),
    ]);
    let scores = tmp.path().join("scores.csv");
    ok(&["--config", cfg, "evaluate", "--model", model.to_str().unwrap(), "--out", scores.to_str().unwrap()]);
    let sc = fs::read_to_string(&scores).unwrap();
    assert_eq!(sc.lines().count(), 101);
}

#[test]
fn invalid_configuration_fails_with_message() {
    let out = pomh(&["sweep", "--pairs", "svm-rf", "--manifest", "nowhere.json", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Table 4"));

    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.cfg");
    fs::write(&config, "colour = blue\n").unwrap();
    let out = pomh(&["--config", config.to_str().unwrap(), "sweep"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    let out = pomh(&["sweep", "--manifest", "missing/manifest.json", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let out = pomh(&["train", "--manifest", "m.json", "--out", "x.json"]);
    assert!(!out.status.success());
}
