//! `netsa`: configuration-driven harness for consensus- and push-sum-based
//! distributed linear stochastic approximation over time-varying digraphs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use netsa_cli::bounds::Failure;
use netsa_cli::config::{build, fingerprint, Config};
use netsa_cli::{bounds, config, output, presets, report, verify};

#[derive(Parser)]
#[command(
    name = "netsa",
    version,
    about = "distributed stochastic approximation simulator and bound harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo ensemble and write trajectories, error series, and
    /// the report.
    Run {
        /// Path to a config JSON, or `preset:<name>`.
        #[arg(long)]
        config: String,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Trial count override.
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker thread cap.
        #[arg(long, default_value_t = 2)]
        workers: usize,
        /// Recording stride override (0 = auto).
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Compute the bound-constant ledger for a config (runs the ensemble the
    /// anchors need).
    Bounds {
        #[arg(long)]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
    /// Run the property suite (APS recursion, push identities, conservation
    /// laws, recursion replays) and report residuals.
    Verify {
        #[arg(long)]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render report.json from a stored errors.csv.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the graph emitted at time t as an edge list (`j i` per line);
    /// optionally dump the weight matrix as sparse triplets.
    DumpGraph {
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 0)]
        t: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `weights_t<t>.csv` next to the edge list.
        #[arg(long)]
        weights: bool,
    },
}

fn load_config(spec: &str) -> Result<Config, String> {
    if let Some(name) = spec.strip_prefix("preset:") {
        return presets::preset(name).ok_or_else(|| {
            format!(
                "unknown preset `{name}`; available: {}",
                presets::PRESET_NAMES.join(", ")
            )
        });
    }
    let text = std::fs::read_to_string(spec).map_err(|e| format!("cannot read {spec}: {e}"))?;
    config::parse(&text).map_err(|e| format!("cannot parse {spec}: {e}"))
}

fn refuse(violations: &[config::Violation]) -> ExitCode {
    let payload = json!({
        "error": "validation_failed",
        "violations": violations.iter().map(|v| json!({
            "assumption": v.assumption,
            "detail": v.detail,
        })).collect::<Vec<_>>(),
    });
    eprintln!("{}", serde_json::to_string_pretty(&payload).unwrap());
    ExitCode::from(2)
}

fn fail(message: String) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::to_string_pretty(&json!({ "error": message })).unwrap()
    );
    ExitCode::from(1)
}

fn out_dir(cfg: &Config, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn apply_overrides(
    cfg: &mut Config,
    seed: Option<u64>,
    trials: Option<usize>,
    stride: Option<u64>,
) {
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = stride {
        cfg.record_stride = s;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            out,
            workers,
            stride,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            apply_overrides(&mut cfg, seed, trials, stride);
            let built = match build(&cfg) {
                Ok(b) => b,
                Err(v) => return refuse(&v),
            };
            let started = Instant::now();
            let artifacts = match bounds::execute(&cfg, &built, workers) {
                Ok(a) => a,
                Err(Failure::Refusal(v)) => return refuse(&v),
                Err(Failure::Engine { trial, error }) => {
                    return fail(format!("trial {trial}: {error}"))
                }
                Err(Failure::Internal(m)) => return fail(m),
            };
            let dir = out_dir(&cfg, out);
            if let Err(e) = write_run_outputs(&cfg, &built, &artifacts, &dir, started) {
                return fail(format!("writing outputs: {e}"));
            }
            println!(
                "run complete: {} trials over horizon {} -> {}",
                cfg.trials,
                cfg.horizon,
                dir.display()
            );
            if let Some(b) = &artifacts.bounds {
                let table = report::build_table(&artifacts.series, Some(b));
                if let Some(v) = report::dominance_verdict(&table) {
                    println!(
                        "bound dominance: {}/{} recorded times from t = {} (fraction {:.3})",
                        v.dominated, v.checked, v.anchor_t, v.fraction
                    );
                }
            }
            ExitCode::SUCCESS
        }
        Command::Bounds {
            config,
            seed,
            trials,
            out,
            workers,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            apply_overrides(&mut cfg, seed, trials, None);
            // ledger computation presumes bounds are wanted
            let mut bounds_cfg = cfg.bounds.clone().unwrap_or_default();
            bounds_cfg.enabled = true;
            cfg.bounds = Some(bounds_cfg);
            let built = match build(&cfg) {
                Ok(b) => b,
                Err(v) => return refuse(&v),
            };
            let artifacts = match bounds::execute(&cfg, &built, workers) {
                Ok(a) => a,
                Err(Failure::Refusal(v)) => return refuse(&v),
                Err(Failure::Engine { trial, error }) => {
                    return fail(format!("trial {trial}: {error}"))
                }
                Err(Failure::Internal(m)) => return fail(m),
            };
            let ledger =
                match artifacts.bounds.as_ref() {
                    Some(b) => b.ledger.clone(),
                    None => return fail(
                        "no finite-time bound covers this engine/step combination (ledger is n/a)"
                            .into(),
                    ),
                };
            let dir = out_dir(&cfg, out);
            if let Err(e) = output::ensure_dir(&dir)
                .and_then(|_| output::write_json(&dir.join("ledger.json"), &ledger))
            {
                return fail(format!("writing ledger: {e}"));
            }
            println!("{}", serde_json::to_string_pretty(&ledger).unwrap());
            ExitCode::SUCCESS
        }
        Command::Verify { config, seed, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let built = match build(&cfg) {
                Ok(b) => b,
                Err(v) => return refuse(&v),
            };
            let results = verify::run_suite(&cfg, &built, seed.unwrap_or(cfg.master_seed));
            for r in &results {
                println!(
                    "{} {:<32} measured = {:>12.3e}  threshold = {:>8.1e}  ({})",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    r.measured,
                    r.threshold,
                    r.note
                );
            }
            let payload = verify::to_json(&results);
            if let Some(dir) = out {
                if let Err(e) = output::ensure_dir(&dir)
                    .and_then(|_| output::write_json(&dir.join("verify.json"), &payload))
                {
                    return fail(format!("writing verify report: {e}"));
                }
            }
            ExitCode::SUCCESS
        }
        Command::Report { out } => match report::rerender_from_csv(&out) {
            Ok(value) => {
                if let Err(e) = output::write_json(&out.join("report.json"), &value) {
                    return fail(format!("writing report: {e}"));
                }
                println!(
                    "report re-rendered from {}",
                    out.join("errors.csv").display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(format!("re-render: {e}")),
        },
        Command::DumpGraph {
            config,
            t,
            out,
            weights,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let built = match build(&cfg) {
                Ok(b) => b,
                Err(v) => return refuse(&v),
            };
            let graph = built.graphs.graph_at(t);
            let path = out.unwrap_or_else(|| PathBuf::from(format!("graph_t{t}.txt")));
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    if let Err(e) = output::ensure_dir(parent) {
                        return fail(format!("creating {}: {e}", parent.display()));
                    }
                }
            }
            if let Err(e) = output::write_edge_list(&path, &graph) {
                return fail(format!("writing edge list: {e}"));
            }
            println!(
                "graph at t = {t}: {} arcs -> {}",
                graph.n_arcs(),
                path.display()
            );
            if weights {
                let w = built.weights.weight_at(t);
                let wpath = path.with_file_name(format!("weights_t{t}.csv"));
                if let Err(e) = output::write_matrix_triplets(&wpath, w.mat()) {
                    return fail(format!("writing weights: {e}"));
                }
                println!("weights at t = {t} -> {}", wpath.display());
            }
            ExitCode::SUCCESS
        }
    }
}

fn write_run_outputs(
    cfg: &Config,
    built: &config::BuiltInstance,
    artifacts: &bounds::Artifacts,
    dir: &Path,
    started: Instant,
) -> std::io::Result<()> {
    output::ensure_dir(dir)?;
    output::write_trajectories(dir, &artifacts.ensemble.trajectories)?;
    output::write_push_mass(dir, &artifacts.ensemble.trajectories)?;
    let has_target = artifacts.prepared.theta_star.is_some();
    output::write_error_series(
        dir,
        &artifacts.series,
        artifacts.prepared.eta.as_ref(),
        artifacts.bounds.as_ref(),
        has_target,
    )?;
    if let Some(aps) = &artifacts.prepared.aps {
        output::write_aps(dir, aps)?;
    }
    if let Some(b) = &artifacts.bounds {
        output::write_json(&dir.join("ledger.json"), &b.ledger)?;
    }

    let fp = fingerprint(cfg);
    let engine = format!("{:?}", built.engine).to_lowercase();
    let mut warnings = artifacts.prepared.warnings.clone();
    if built.assumption5_unverified {
        warnings.push("assumption_5_unverified: step table not certified for summability".into());
    }
    let table = report::build_table(&artifacts.series, artifacts.bounds.as_ref());
    let wall = started.elapsed().as_secs_f64();
    let report_value = report::report_json(
        &fp,
        &engine,
        &table,
        artifacts.bounds.as_ref(),
        &warnings,
        wall,
    );
    output::write_json(&dir.join("report.json"), &report_value)?;

    let final_idx = artifacts.series.times.len().saturating_sub(1);
    let summary = json!({
        "schema_version": 1,
        "fingerprint": fp,
        "engine": engine,
        "trials": cfg.trials,
        "horizon": cfg.horizon,
        "diverged": false,
        "final_errors": {
            "t": artifacts.series.times.get(final_idx),
            "weighted_mse_mean": artifacts.series.weighted_mse.get(final_idx).map(|s| s.mean),
            "consensus_error_mean": artifacts.series.consensus_error.get(final_idx).map(|s| s.mean),
        },
        "warnings": warnings,
        "wall_clock_s": wall,
    });
    output::write_json(&dir.join("summary.json"), &summary)
}
