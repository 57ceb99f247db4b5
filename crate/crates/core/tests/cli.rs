use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fisher-brl"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_config(cmd: &str, config: &Path, out: &Path) -> Output {
    run(&[cmd, config.to_str().unwrap(), "-o", out.to_str().unwrap()])
}

#[test]
fn sample_configs_succeed() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("equilibrium", "equilibrium.toml"),
        ("simulate", "simulate_sync.toml"),
        ("simulate", "simulate_async.toml"),
        ("contraction", "contraction.toml"),
        ("generate", "generate.toml"),
    ] {
        let out = dir.path().join("out");
        let result = run_config(cmd, &configs().join(file), &out);
        assert!(result.status.success(), "{cmd} {file}: {}", String::from_utf8_lossy(&result.stderr));
        assert!(std::fs::metadata(&out).unwrap().len() > 0);
    }
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let config = configs().join("simulate_async.toml");
    assert!(run_config("simulate", &config, &a).status.success());
    assert!(run_config("simulate", &config, &b).status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn generated_market_solves() {
    let dir = tempfile::tempdir().unwrap();
    let market = dir.path().join("market.json");
    assert!(run_config("generate", &configs().join("generate.toml"), &market).status.success());
    let config = dir.path().join("eq.toml");
    std::fs::write(&config, "[market]\nfile = \"market.json\"\n").unwrap();
    let report = dir.path().join("eq.json");
    let result = run_config("equilibrium", &config, &report);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    let residual = json["report"]["residual"].as_f64().unwrap();
    assert!(residual <= 1e-8, "residual {residual}");
    assert_eq!(json["tatonnement"]["agree"], serde_json::Value::Bool(true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };

    let missing = run(&["equilibrium", "/nonexistent/config.toml"]);
    assert_ne!(missing.status.code(), Some(0));

    let bad_toml = write("bad.toml", "[market\n");
    assert_eq!(run(&["equilibrium", bad_toml.to_str().unwrap()]).status.code(), Some(2));

    let non_wgs = write(
        "rho.toml",
        "[market.generate]\nnum_goods = 2\nnum_buyers = 2\nrho = 1.5\nseed = 1\n",
    );
    let out = run(&["equilibrium", non_wgs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weak-gross-substitutes"));

    let out_of_box = write(
        "p0.toml",
        "[market.generate]\nnum_goods = 2\nnum_buyers = 2\nrho = 0.5\nseed = 1\n\
         [dynamics]\nmode = \"sync\"\nsteps = 5\np0 = [1000.0, 1.0]\n",
    );
    assert_eq!(run(&["simulate", out_of_box.to_str().unwrap()]).status.code(), Some(3));

    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}
