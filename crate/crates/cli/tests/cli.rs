use std::path::Path;
use std::process::Command;

const TINY: &str = r#"
[params]
mx = 2
my = 2

[data]
n = 3000
eval_n = 400
eve_n = 3000
angle_splits = 10
dist_splits = 30

[train]
max_epochs = 300
eval_every = 50
generator_hidden = [8]
adversary_hidden = [16]
adversary_reset_every = 100

[eve]
max_epochs = 200
eval_every = 50
hidden = [16]

[sweep]
sigma2_dbw_min = -130
sigma2_dbw_max = -90
sigma2_steps = 3
lambdas = [0.2, 0.8]
mse_ablation = true

[run]
schemes = ["crossmult", "nn", "poly"]
"#;

fn ris_skg(dir: &Path, args: &[&str]) -> std::process::Output {
    let cfg = dir.join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ris-skg"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .env("RIS_SKG_WORKERS", "2")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = ris_skg(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest "), "{}", p.display());
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

#[test]
fn run_is_reproducible_and_trends_hold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = d.join("a");
    let b = d.join("b");
    ok(d, &["run", "--out", a.to_str().unwrap(), "--seed", "5"]);
    ok(d, &["run", "--out", b.to_str().unwrap(), "--seed", "5"]);
    for f in ["features.csv", "rho_vs_sigma2.csv", "keys.csv", "heldout.csv", "model/validation.csv"] {
        let x = std::fs::read(a.join("seed-5").join(f)).unwrap();
        let y = std::fs::read(b.join("seed-5").join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
    let rows = csv_rows(&a.join("seed-5/rho_vs_sigma2.csv"));
    assert_eq!(rows[0], ["scheme", "sigma2_dbw", "rho_ab", "rho_ae", "rho_be"]);
    let cm: Vec<&Vec<String>> = rows[1..].iter().filter(|r| r[0] == "crossmult").collect();
    assert_eq!(cm.len(), 3);
    let rho: Vec<f64> = cm.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(rho[0] > rho[1] && rho[1] > rho[2], "crossmult rho_ab not decreasing with noise: {rho:?}");
    let eve: f64 = cm[0][3].parse().unwrap();
    assert!(eve > 0.9, "crossmult eve correlation at low noise {eve}");
    let keys = csv_rows(&a.join("seed-5/keys.csv"));
    assert_eq!(keys.len(), 1 + 3 * 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("seed-5/manifest.json")).unwrap()).unwrap();
    let id = manifest["id"].as_str().unwrap();
    let first = std::fs::read_to_string(a.join("seed-5/keys.csv")).unwrap();
    assert_eq!(first.lines().next().unwrap(), format!("# manifest {id}"));
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |p: &str| d.join(p).to_str().unwrap().to_string();
    ok(d, &["gen-data", "--out", &s("data.bin"), "--seed", "1"]);
    assert!(std::fs::read(d.join("data.bin")).unwrap().starts_with(b"RISSKGDS"));
    ok(d, &["train", "--out", &s("model"), "--data", &s("data.bin"), "--seed", "1"]);
    ok(d, &["train", "--out", &s("model2"), "--seed", "1"]);
    assert_eq!(
        std::fs::read(d.join("model/alice.mlp")).unwrap(),
        std::fs::read(d.join("model2/alice.mlp")).unwrap(),
        "a saved dataset and the seed-derived one must train identically"
    );
    ok(d, &["train-eve", "--out", &s("eve"), "--scheme", "nn", "--model", &s("model"), "--seed", "1"]);
    ok(d, &["train-eve", "--out", &s("eve-cm"), "--scheme", "crossmult", "--seed", "1"]);
    assert_eq!(csv_rows(&d.join("eve/eve_heldout.csv")).len(), 2);
    ok(d, &["distill", "--out", &s("distill"), "--model", &s("model"), "--seed", "1"]);
    assert!(std::fs::read_to_string(d.join("distill/alice.poly")).unwrap().starts_with("polyv1 81"));
    let hist = csv_rows(&d.join("distill/term_histogram.csv"));
    assert_eq!(column(&hist, "category"), ["polynomial", "exponential", "logarithmic", "other"]);
    ok(d, &["attack-report", "--out", &s("attack.csv")]);
    let att = csv_rows(&d.join("attack.csv"));
    assert_eq!(att.len(), 1 + 3 * 2 * 2);
    ok(d, &["skr", "--out", &s("skr.csv"), "--sweep", "sigma2=-115:-90:6"]);
    let skr = csv_rows(&d.join("skr.csv"));
    assert_eq!(skr[0], ["sigma2_dbw", "h_yb", "h_yra", "h_cond_joint", "h_cond_pair", "gap_bits", "condition_ok"]);
    assert_eq!(skr.len(), 7);

    std::fs::write(
        d.join("feats.csv"),
        "# manifest none\nscheme,sigma2_dbw,f_a,f_b,f_e\nx,-110,1,1,-1\nx,-110,-1,-1,1\nx,-110,1,1,1\nx,-110,-1,-1,-1\n",
    )
    .unwrap();
    ok(d, &["keys", "--out", &s("keys.csv"), "--features", &s("feats.csv")]);
    let k = csv_rows(&d.join("keys.csv"));
    assert_eq!(k[1], ["x", "-110", "1.0", "0.5", "0.5", "0.5"]);
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["sweep", "--out", d.join("sw").to_str().unwrap(), "--seed", "2"]);
    let rows = csv_rows(&d.join("sw/sweep_summary.csv"));
    assert_eq!(column(&rows, "loss"), ["corr_adversarial", "corr_adversarial", "mse_adversarial"]);
    assert!(column(&rows, "error").iter().all(String::is_empty));
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ris_skg(d, &["train-eve", "--out", d.join("e").to_str().unwrap(), "--scheme", "nn"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
    let out = ris_skg(d, &["skr", "--out", d.join("s.csv").to_str().unwrap(), "--sweep", "sigma2=1:2"]);
    assert!(!out.status.success());
}
