use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_multicharge");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("MULTICHARGE_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("MULTICHARGE_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn trade_writes_step_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("trade.toml");
    let o = run(&["trade", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("trade.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "dn1,dn2,delta_q[prob],d_a_b[A],d_b_b[B],d_f_b[nat],ln_repetitions[nat]");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..2], &["2048", "-1365"]);
    assert!(first[2].contains('e') && first[2].split('e').next().unwrap().len() == 18 + first[2].starts_with('-') as usize);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("trade.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["bath"]["betas"][1], "1.5");
    assert!(json["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn farey_robust_select_prints_pair() {
    let o = run(&["farey", "robust-select", "0.7", "--delta", "1e-3", "--eps", "0.3", "--y", "1"], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next().unwrap(), "(3, -2)");

    let o = run(&["farey", "robust-select", "0.5", "--delta", "1e-3", "--eps", "0.3", "--y", "1"], None);
    assert_eq!(o.status.code(), Some(3));

    let o = run(&["farey", "bezout", "7", "10"], None);
    assert_eq!(stdout(&o).trim(), "(3, -2)");
}

#[test]
fn malformed_config_exits_4_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (name, text) in [
        ("unknown.toml", "kind = \"trade\"\nbogus = 1\n"),
        ("syntax.toml", "kind = \"trade\n"),
        ("missing.toml", "kind = \"trade\"\n[protocol]\neta = 1.0\n"),
        ("nonfinite.toml", "kind = \"thermal\"\nbetas = [nan]\n[[charges]]\npreset = \"sigma_z\"\n"),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let kind = if name == "nonfinite.toml" { "thermal" } else { "trade" };
        let o = run(&[kind, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(4), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.exists());
    let o = run(&["trade", "--config", tmp.path().join("absent.toml").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(run(&["trade", "--format", "xml"], None).status.code(), Some(4));
}

#[test]
fn randomized_runs_need_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("audit.toml")).unwrap().replace("seed = 11\n", "");
    let cfg = write_config(tmp.path(), "audit.toml", &text);
    let out = tmp.path().join("out");
    let o = run(&["audit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["audit", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 3);
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("battery.toml")).unwrap().replace("[8.0, 16.0, 32.0]", "[3.0, 6.0]");
    let cfg = write_config(tmp.path(), "battery.toml", &text);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = run(&["battery", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["battery.json", "battery.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let leftovers: Vec<_> = fs::read_dir(&a).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().ends_with(".tmp")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("thermal.toml");
    let env_dir = tmp.path().join("env");
    let flag_dir = tmp.path().join("flag");
    let o = run(&["thermal", "--config", cfg.to_str().unwrap()], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("thermal.json").exists());
    let o = run(&["thermal", "--config", cfg.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("thermal.csv").exists());
}

#[test]
fn extraction_sweep_deficit_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep_extract.toml");
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--format", "csv"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(csv, stdout(&o));
    let deficits: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(deficits.len(), 3);
    assert!(deficits.windows(2).all(|w| w[1] < w[0]), "{deficits:?}");
}

#[test]
fn battery_sweep_gap_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("sweep_battery.toml")).unwrap().replace("[8.0, 16.0, 32.0]", "[2.0, 4.0, 8.0]");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let gaps: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(gaps.len() == 3 && gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn empty_grid_gives_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("sweep_extract.toml")).unwrap().replace("values = [1e-2, 5e-3, 2.5e-3]", "values = []");
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(csv, "delta_p,deficit[nat],first_step_d_f_b[nat],steps[count]\n");
}

#[test]
fn excluded_ratio_exits_3() {
    // Bath ratio x/y = 2/3 is rational with a step too coarse for the target.
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("extract.toml")).unwrap().replace("\"1.4142135623730951\"", "\"1.5\"");
    let cfg = write_config(tmp.path(), "extract.toml", &text);
    let o = run(&["extract", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn noncommuting_battery_is_unsupported() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("battery.toml"))
        .unwrap()
        .replace("diag = [0.0, 1.0]", "preset = \"sigma_x\"")
        .replace("diag = [0.0, -1.0]", "preset = \"sigma_z\"");
    let cfg = write_config(tmp.path(), "battery.toml", &text);
    let o = run(&["battery", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported"));
}

#[test]
fn every_sample_config_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for (kind, file) in [
        ("thermal", "thermal.toml"),
        ("solve-betas", "solve_betas.toml"),
        ("extract", "extract.toml"),
        ("audit", "audit.toml"),
        ("farey", "farey_robust.toml"),
    ] {
        let cfg = configs().join(file);
        let o = run(&[kind, "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(tmp.path().join(format!("{kind}.json")).exists());
    }
}
