//! End-to-end tests of the `auctionlab` binary: exit codes, file outputs,
//! schemas, and byte determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_auctionlab"))
}

fn write_config(dir: &Path, name: &str, horizon: usize) -> PathBuf {
    let path = dir.join(name);
    fs::write(
        &path,
        format!(
            r#"
[auction]
format = "SecondPrice"
epsilon = 0.01

[agents.1]
algorithm = "MWLinear"
declared_value = 1.0

[agents.2]
algorithm = "MWLinear"
declared_value = 0.5

[run]
horizon = {horizon}
true_values = [1.0, 0.5]
seed = 7
"#
        ),
    )
    .unwrap();
    path
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn missing_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["simulate", "--config", "/nonexistent/config.toml", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "no partial outputs on config errors");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[auction]\nformat = \"SecondPrice\"\n").unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&path)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn simulate_writes_all_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", 3000);

    let run = |out_dir: &Path| {
        let out = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out_dir)
            .args(["--threads", "1"])
            .output()
            .unwrap();
        assert_success(&out);
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run(&out_a);
    run(&out_b);

    for name in [
        "bid_log.csv",
        "joint_empirical.csv",
        "summary.json",
        "dynamics.svg",
        "marginals.svg",
        "joint_heatmap.svg",
        "manifest.json",
    ] {
        assert!(out_a.join(name).exists(), "{name} missing");
    }
    for name in ["bid_log.csv", "joint_empirical.csv", "dynamics.svg", "marginals.svg", "joint_heatmap.svg"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} not byte-identical across reruns");
    }

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], "auctionlab-run-summary/1");
    assert!(summary["winner_price_mean_all"].as_f64().unwrap() > 0.0);

    let bid_log = fs::read_to_string(out_a.join("bid_log.csv")).unwrap();
    let header = bid_log.lines().next().unwrap();
    assert_eq!(
        header,
        "t,bid_1,bid_2,winner,price_1,price_2,u_agent_1,u_agent_2,u_user_1,u_user_2"
    );
    assert_eq!(bid_log.lines().count(), 3001);

    // The manifest lists every produced file.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).unwrap()).unwrap();
    let outputs: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(outputs.contains(&"bid_log.csv".to_string()));
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn seed_flag_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", 2000);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out_dir, seed) in [(&out_a, "7"), (&out_b, "8")] {
        let out = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out_dir)
            .args(["--seed", seed, "--format", "csv"])
            .output()
            .unwrap();
        assert_success(&out);
    }
    assert_ne!(
        fs::read(out_a.join("bid_log.csv")).unwrap(),
        fs::read(out_b.join("bid_log.csv")).unwrap()
    );
    // format selection: no SVGs requested
    assert!(!out_a.join("dynamics.svg").exists());
}

#[test]
fn verify_four_point_cce_passes_and_dominated_fails() {
    let dir = tempfile::tempdir().unwrap();

    // The four-point diagonal CCE.
    let mut csv = String::new();
    csv.push_str("# epsilon_1 = 0.01\n# max_bid_1 = 1\n# epsilon_2 = 0.01\n# max_bid_2 = 1\n");
    csv.push_str("i,j,prob\n");
    for k in [0, 46, 64, 73] {
        csv.push_str(&format!("{k},{k},0.25\n"));
    }
    let good = dir.path().join("four_point.csv");
    fs::write(&good, csv).unwrap();
    let out = bin()
        .args(["verify", "--dist"])
        .arg(&good)
        .args(["--rule", "FirstPrice", "--values", "1.0,1.0", "--delta", "1e-9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("CCE verdict (delta 1.0e-9): yes"), "{stdout}");
    assert!(stdout.contains("verdict: PASS"), "{stdout}");
    // A scripted-only CCE: fine as an equilibrium, not co-undominated.
    assert!(stdout.contains("co-undominated: NO"), "{stdout}");

    // A dominated-support distribution: mass on a strictly dominated low
    // bid (0 against an opponent at 0) in a second-price auction.
    let bad = dir.path().join("dominated.csv");
    fs::write(
        &bad,
        "# epsilon_1 = 0.1\n# max_bid_1 = 1\n# epsilon_2 = 0.1\n# max_bid_2 = 0.5\ni,j,prob\n2,3,0.5\n6,1,0.5\n",
    )
    .unwrap();
    let out = bin()
        .args(["verify", "--dist"])
        .arg(&bad)
        .args(["--rule", "SecondPrice", "--values", "1.0,0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict: FAIL"), "{stdout}");
    assert!(stdout.contains("weakly dominated"), "{stdout}");
}

#[test]
fn verify_malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "# epsilon_1 = 0.01\n# max_bid_1 = 1\n# epsilon_2 = 0.01\n# max_bid_2 = 1\ni,j,prob\n0,0,oops\n",
    )
    .unwrap();
    let out = bin()
        .args(["verify", "--dist"])
        .arg(&bad)
        .args(["--rule", "FirstPrice", "--values", "1.0,1.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
}

#[test]
fn verify_run_directory_with_audit() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", 20_000);
    let run_dir = dir.path().join("run-out");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert_success(&out);

    let out = bin()
        .args(["verify", "--run"])
        .arg(&run_dir)
        .args(["--delta", "0.05"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean-based audit"), "{stdout}");
    assert_eq!(out.status.code(), Some(0), "{stdout}");
}

#[test]
fn sweep_writes_surface_with_exact_schema() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep.toml");
    fs::write(
        &config_path,
        r#"
[auction]
format = "GeneralizedFirstPrice"
epsilon = 0.05
ctrs = [1.0, 0.5]

[agents.1]
algorithm = "MWLinear"
declared_value = 2.0

[agents.2]
algorithm = "MWLinear"
declared_value = 1.0

[run]
horizon = 2000
true_values = [1.0, 1.0]
seed = 3

[sweep]
vary_player = 2
fixed_declaration = 2.0
values = [0.5, 0.6]
seeds_per_cell = 2
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_success(&out);
    let surface = fs::read_to_string(out_dir.join("surface.csv")).unwrap();
    assert_eq!(
        surface.lines().next().unwrap(),
        "v_declared,w_declared,seed_count,u1_mean,u1_se,u2_mean,u2_se,revenue_mean,high_win_rate,nonzero_low_rate"
    );
    assert_eq!(surface.lines().count(), 3);
    assert!(out_dir.join("payoffs.svg").exists());

    // Determinism of the surface across reruns.
    let out_dir2 = dir.path().join("out2");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out_dir2)
        .args(["--threads", "2"])
        .output()
        .unwrap();
    assert_success(&out);
    assert_eq!(
        fs::read(out_dir.join("surface.csv")).unwrap(),
        fs::read(out_dir2.join("surface.csv")).unwrap()
    );

    // Empty sweep grid is a config error.
    let bad = fs::read_to_string(&config_path).unwrap().replace(
        "values = [0.5, 0.6]",
        "values = []",
    );
    fs::write(&config_path, bad).unwrap();
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path().join("out3"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reference_sp_config_reproduces_the_price_band() {
    // The bundled reference config (v=1, w=0.5, MWLinear, T=5e4, seed 7).
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sp_v1_w05.toml");
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_success(&out);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let price = summary["winner_price_mean_all"].as_f64().unwrap();
    assert!(
        (0.25..=0.29).contains(&price),
        "reference run price {price} outside [0.25, 0.29]"
    );
    let win = summary["win_rate"][0].as_f64().unwrap();
    assert!(win >= 0.99, "high win rate {win}");
}

#[test]
fn analytic_queries_print_reference_values() {
    let out = bin()
        .args(["analytic", "gfp-nash", "--v", "1.0", "--w", "1.0"])
        .output()
        .unwrap();
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("u_high = 0.500000"), "{stdout}");
    assert!(stdout.contains("u_low  = 0.500000"), "{stdout}");

    let out = bin()
        .args(["analytic", "metagame", "--max-declaration", "100"])
        .output()
        .unwrap();
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("w* = 1/(6(1-ln2)) = 0.543149"), "{stdout}");
    assert!(stdout.contains("high 0.832202"), "{stdout}");

    let out = bin()
        .args(["analytic", "sp-limit", "--v", "1.0", "--w", "0.5", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    // five-point uniform law
    assert_eq!(stdout.matches(": 0.2").count(), 5, "{stdout}");

    // metagame below the cap threshold is a config error
    let out = bin()
        .args(["analytic", "metagame", "--max-declaration", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytic_csv_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["analytic", "gfp-nash", "--v", "2.0", "--w", "1.0", "--format", "csv", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_success(&out);
    let csv = fs::read_to_string(dir.path().join("gfp_nash_curves.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,F,G");
    assert_eq!(csv.lines().count(), 502);
}
