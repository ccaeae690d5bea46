//! Binary-level checks: determinism of file outputs, report re-rendering,
//! graph dumps, and structured refusals.

use std::path::Path;
use std::process::Command;

fn netsa() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netsa"))
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Criterion 13: identical config and seed produce byte-identical CSVs.
#[test]
fn acceptance_13_repeated_runs_are_byte_identical() {
    let base = std::env::temp_dir().join(format!("netsa_det_{}", std::process::id()));
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    for (dir, workers) in [(&dir_a, "1"), (&dir_b, "2")] {
        let status = netsa()
            .args([
                "run",
                "--config",
                "preset:doubly_stochastic_baseline",
                "--trials",
                "4",
                "--seed",
                "12345",
                "--workers",
                workers,
                "--out",
            ])
            .arg(dir)
            .status()
            .expect("binary runs");
        assert!(status.success());
    }
    for file in ["trajectory.csv", "errors.csv", "aps.csv"] {
        assert_eq!(
            read(&dir_a, file),
            read(&dir_b, file),
            "{file} differs between runs"
        );
    }

    // push engine outputs too (includes the mass CSV)
    let dir_c = base.join("c");
    let dir_d = base.join("d");
    for dir in [&dir_c, &dir_d] {
        let status = netsa()
            .args([
                "run",
                "--config",
                "preset:push_directed_n4",
                "--trials",
                "2",
                "--seed",
                "9",
                "--stride",
                "97",
                "--out",
            ])
            .arg(dir)
            .status()
            .expect("binary runs");
        assert!(status.success());
    }
    for file in ["trajectory.csv", "errors.csv", "push_y.csv"] {
        assert_eq!(
            read(&dir_c, file),
            read(&dir_d, file),
            "{file} differs between push runs"
        );
    }
    println!("ACCEPTANCE 13 (determinism, binary): PASS — byte-identical CSVs for consensus and push runs");
    let _ = std::fs::remove_dir_all(&base);
}

#[test]
fn report_rerenders_identical_verdict_from_csv() {
    let dir = std::env::temp_dir().join(format!("netsa_rerender_{}", std::process::id()));
    let status = netsa()
        .args([
            "run",
            "--config",
            "preset:fixed_left_eigenvector",
            "--trials",
            "4",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let original: serde_json::Value = serde_json::from_slice(&read(&dir, "report.json")).unwrap();
    assert_eq!(
        original["dominance"]["fraction"].as_f64(),
        Some(1.0),
        "healthy bound run must dominate everywhere"
    );
    let status = netsa()
        .args(["report", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let rerendered: serde_json::Value = serde_json::from_slice(&read(&dir, "report.json")).unwrap();
    assert_eq!(original["dominance"], rerendered["dominance"]);
    assert_eq!(original["table"], rerendered["table"]);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn dump_graph_writes_one_based_edge_list() {
    let dir = std::env::temp_dir().join(format!("netsa_dump_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.txt");
    let status = netsa()
        .args([
            "dump-graph",
            "--config",
            "preset:push_directed_n4",
            "--t",
            "5",
            "--weights",
            "--out",
        ])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let n = 4usize;
    let mut has_self = vec![false; n];
    for line in text.lines() {
        let mut it = line.split_whitespace();
        let j: usize = it.next().unwrap().parse().unwrap();
        let i: usize = it.next().unwrap().parse().unwrap();
        assert!((1..=n).contains(&j) && (1..=n).contains(&i));
        if i == j {
            has_self[i - 1] = true;
        }
    }
    assert!(has_self.iter().all(|&s| s), "all vertices carry self-arcs");
    assert!(dir.join("weights_t5.csv").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn validation_refusal_names_assumptions_and_exits_2() {
    // a config violating step shape and horizon positivity
    let dir = std::env::temp_dir().join(format!("netsa_refuse_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("bad.json");
    let mut cfg = netsa_cli::presets::preset("doubly_stochastic_baseline").unwrap();
    cfg.steps = netsa_cli::config::StepsCfg::Table {
        values: vec![0.1, 0.5],
    };
    cfg.trials = 0;
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let output = netsa()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    let names: Vec<String> = err["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["assumption"].as_str().unwrap().to_string())
        .collect();
    assert!(
        names.contains(&"assumption_5_step_shape".to_string()),
        "{names:?}"
    );
    assert!(names.contains(&"trials_positive".to_string()), "{names:?}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn bounds_refuses_adversarial_periodic_with_diagnostic() {
    let output = netsa()
        .args([
            "bounds",
            "--config",
            "preset:adversarial_periodic",
            "--trials",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    let names: Vec<&str> = err["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["assumption"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"assumption_6_pi_limit"), "{names:?}");
}

#[test]
fn infeasible_fixed_alpha_is_refused_with_measured_cap() {
    let dir = std::env::temp_dir().join(format!("netsa_alpha_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut cfg = netsa_cli::presets::preset("fixed_left_eigenvector").unwrap();
    cfg.steps = netsa_cli::config::StepsCfg::Fixed { alpha: 0.01 }; // far above the cap
    cfg.trials = 2;
    cfg.horizon = 1000;
    let cfg_path = dir.join("alpha.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let output = netsa()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("alpha_feasibility"), "{err}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn kushner_run_reports_na_bounds_instead_of_refusing() {
    let dir = std::env::temp_dir().join(format!("netsa_kushner_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut cfg = netsa_cli::presets::preset("fixed_left_eigenvector").unwrap();
    cfg.engine = netsa_cli::config::EngineCfg::Kushner;
    cfg.steps = netsa_cli::config::StepsCfg::Harmonic { alpha0: 1.0 };
    cfg.horizon = 2000;
    cfg.trials = 4;
    let cfg_path = dir.join("kushner.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let output = netsa()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&read(&dir, "report.json")).unwrap();
    assert!(report["ledger"].is_null(), "kushner ledger must be n/a");
    assert!(report["dominance"].is_null(), "kushner verdict must be n/a");
    assert!(report["table"][0]["bound_rhs"].is_null());
    let warned = report["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w.as_str().unwrap().contains("bound_regime"));
    assert!(warned, "report must flag the n/a bound columns");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn single_agent_run_has_trivially_zero_consensus_error() {
    let dir = std::env::temp_dir().join(format!("netsa_single_{}", std::process::id()));
    let status = netsa()
        .args(["run", "--config", "preset:single_agent_fixed", "--trials", "2", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value = serde_json::from_slice(&read(&dir, "summary.json")).unwrap();
    assert_eq!(summary["final_errors"]["consensus_error_mean"].as_f64(), Some(0.0));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_passes_cleanly_on_the_doubly_stochastic_baseline() {
    let output = netsa()
        .args(["verify", "--config", "preset:doubly_stochastic_baseline"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(!text.contains("FAIL"), "{text}");
    // the doubly stochastic instance satisfies the identities exactly
    assert!(text.contains("PASS push_product_relation"), "{text}");
}

#[test]
fn verify_subcommand_flags_adversarial_assumption_6() {
    let output = netsa()
        .args(["verify", "--config", "preset:adversarial_periodic"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "failures are report content, not errors"
    );
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("FAIL assumption_6_pi_limit"), "{text}");
    assert!(text.contains("PASS consensus_error_decay"), "{text}");
    assert!(text.contains("PASS push_mass_conservation"), "{text}");
}
