use std::path::Path;
use std::process::{Command, Output};

fn mia(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mia"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("run mia")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
seed = 4
shadows = 4
[data]
n = 40
classes = 2
p_in = 0.2
p_out = 0.02
dim = 6
[target]
epochs = 30
hidden = 6
[attack.base]
mode = "both"
[attack.rmia]
"#;

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "colour = \"blue\"\n");
    let out = mia(&["audit"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));

    let missing = mia(&["audit"], &dir.path().join("absent.toml"));
    assert_eq!(missing.status.code(), Some(2));

    let no_attacks = write(dir.path(), "empty.toml", "");
    assert_eq!(mia(&["audit"], &no_attacks).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let signals = write(dir.path(), "signals.csv", "sample_id,member,target_loss,shadow_0\n0,1,oops,0.5\n");
    let cfg = write(
        dir.path(),
        "sig.toml",
        &format!("signal_file = {:?}\nout = {:?}\n[attack.base]\n", signals, dir.path().join("o")),
    );
    let out = mia(&["attack-signals"], &cfg);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_writes_graph_and_membership() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out_dir = dir.path().join("gen");
    let out = mia(&["gen", "--out", out_dir.to_str().unwrap()], &cfg);
    assert!(out.status.success());
    let graph = std::fs::read_to_string(out_dir.join("graph.txt")).unwrap();
    let g = mia_core::graph::Graph::parse_text(&graph).unwrap();
    assert_eq!(g.n(), 40);
    let bits = std::fs::read_to_string(out_dir.join("membership.txt")).unwrap();
    assert_eq!(bits.trim().chars().filter(|&c| c == '1').count(), 20);
}

#[test]
fn audit_outputs_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(mia(&["audit", "--out", a.to_str().unwrap()], &cfg).status.success());
    assert!(mia(&["audit", "--out", b.to_str().unwrap(), "--seed", "5"], &cfg).status.success());
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("attack,mode,auc,tpr_at_1pct,tpr_at_0.1pct,n,k,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ends_with(",40,4,4")));
    let scores = std::fs::read_to_string(a.join("scores_base_online_r0.csv")).unwrap();
    assert!(scores.starts_with("sample_id,member,score,method,mode\n"));
    assert_eq!(scores.lines().count(), 41);
    let roc = std::fs::read_to_string(a.join("roc_rmia_online_r0.csv")).unwrap();
    assert!(roc.starts_with("fpr,tpr\n"));
    assert_ne!(summary, std::fs::read_to_string(b.join("summary.csv")).unwrap());
}

#[test]
fn attack_signals_on_exported_matrix() {
    use mia_core::attacks::{attack_base, AttackConfig};
    use mia_core::signals::{SignalMatrix, SignalMode};

    let dir = tempfile::tempdir().unwrap();
    let sm = SignalMatrix {
        sample_ids: vec![0, 1, 2, 3],
        members: vec![true, false, true, false],
        target_loss: vec![0.1, 2.0, 0.3, 1.5],
        shadow_loss: vec![vec![1.0, 1.1], vec![1.0, 0.9], vec![0.8, 1.2], vec![1.0, 1.0]],
        in_bits: vec![vec![true, false], vec![false, true], vec![true, false], vec![false, true]],
        mode: SignalMode::External,
    };
    let signals = write(dir.path(), "signals.csv", &sm.to_csv());
    let out_dir = dir.path().join("o");
    let cfg = write(
        dir.path(),
        "sig.toml",
        &format!(
            "signal_file = {:?}\nout = {:?}\n[attack.base]\n[attack.rmia]\n",
            signals.file_name().unwrap(),
            out_dir
        ),
    );
    let out = mia(&["attack-signals"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scores = std::fs::read_to_string(out_dir.join("scores_base_online.csv")).unwrap();
    let expect = attack_base(&sm, &AttackConfig::new("base")).unwrap().to_csv();
    assert_eq!(scores, expect);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.contains("base,online,1.0000000000000000e0"));
}

#[test]
fn mcmc_check_reports_total_variation() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("m");
    let cfg = write(
        dir.path(),
        "m.toml",
        &format!(
            "out = {out_dir:?}\n[data]\nclasses = 2\ndim = 3\np_in = 0.5\np_out = 0.1\n[target]\nepochs = 20\nhidden = 4\n[mcmc]\nn = 6\nsamples = 400\nburn_in = 200\nthinning = 20\n"
        ),
    );
    let out = mia(&["mcmc-check"], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("mcmc_check.txt")).unwrap();
    assert!(report.contains("total_variation"));
    let table = std::fs::read_to_string(out_dir.join("mcmc_distribution.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 32);
}
