use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kaufs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kaufs"))
        .args(args)
        .current_dir(dir)
        .env_remove("KAUFS_WORKERS")
        .env_remove("KAUFS_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn config(dir: &Path, name: &str, alpha: f64, beta: f64) -> String {
    let text = format!(
        "k_grid = [2, 3]\nalpha_grid = [{alpha:?}]\nbeta_grid = [{beta:?}]\nrepeats = 2\n\
         [dataset]\npath = \"d.csv\"\nlabel_column = \"label\"\n\
         [[kernel_bank]]\nfamily = \"linear\"\n"
    );
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn generate_evaluate_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = kaufs(
        &["generate", "--planted", "n=30,d_informative=2,d_noise=4,c=3,seed=2", "--out", "d.csv"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = fs::read_to_string(dir.join("d.csv")).unwrap();
    assert!(header.lines().next().unwrap().ends_with(",label"));

    let out = kaufs(&["evaluate", "--data", "d.csv", "--features", "0,1", "--repeats", "3"], dir);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("acc_mean,acc_std,nmi_mean,nmi_std,red\n"));

    let cfg = config(dir, "ok.toml", 10.0, 10.0);
    let out = Command::new(env!("CARGO_BIN_EXE_kaufs"))
        .args(["run", "--config", &cfg])
        .current_dir(dir)
        .env("KAUFS_WORKERS", "2")
        .env("KAUFS_OUTPUT_DIR", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "best.csv", "run.json", "trace_0.csv", "trace_1.csv"] {
        assert!(dir.join("from_env").join(f).exists(), "{f}");
    }

    let out = kaufs(&["replay", "--record", "from_env/run.json", "--out", "again"], dir);
    assert!(out.status.success());
    assert_eq!(
        fs::read(dir.join("from_env/summary.csv")).unwrap(),
        fs::read(dir.join("again/summary.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = kaufs(&["generate", "--planted", "n=20,d_informative=2,d_noise=3", "--out", "d.csv"], dir);
    assert!(out.status.success());

    fs::write(dir.join("bad.toml"), "k_grid = [2]\nnot_a_key = 1\n").unwrap();
    assert_eq!(kaufs(&["run", "--config", "bad.toml"], dir).status.code(), Some(1));
    assert_eq!(kaufs(&["run", "--config", "missing.toml"], dir).status.code(), Some(1));
    assert_eq!(kaufs(&["generate", "--planted", "n=-3", "--out", "x.csv"], dir).status.code(), Some(1));

    // With no regularization the objective is unbounded below and every fit diverges.
    let cfg = config(dir, "diverge.toml", 0.0, 0.0);
    let out = kaufs(&["run", "--config", &cfg, "--out", "o"], dir);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
