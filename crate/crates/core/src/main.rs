use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use uassoc::config::{load_config, SimConfig};
use uassoc::env::TrafficMode;
use uassoc::harness::eval::EvalOverrides;
use uassoc::harness::{self, outputs, ExperimentManifest};
use uassoc::learner;
use uassoc::policy::PolicyNetwork;

#[derive(Parser)]
#[command(
    name = "uassoc",
    version,
    about = "mmWave user-association simulator with a transferable attention policy"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the shared policy and stream per-episode metrics to CSV.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default: $UASSOC_OUT_DIR or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a numbered checkpoint every N episodes.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Score a trained checkpoint against both baselines.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Uniform per-SBS beam budget override.
        #[arg(long)]
        beams: Option<usize>,
        #[arg(long)]
        deployments: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Traffic mode: poisson | infinite.
        #[arg(long)]
        traffic: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero-shot transfer sweep over the UE count.
    SweepK {
        #[arg(long)]
        checkpoint: PathBuf,
        /// UE counts to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 15, 20, 25, 30])]
        k_values: Vec<usize>,
        #[arg(long)]
        deployments: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero-shot sweep over the per-SBS beam budget at fixed K.
    SweepBeams {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3, 4, 5, 10, 15])]
        beam_values: Vec<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        deployments: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the baselines alone on fresh deployments.
    Baseline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        deployments: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tiny-instance sandwich check: max_snr <= heuristic <= oracle.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference check of the full policy loss gradient.
    Gradcheck {
        #[arg(long, default_value_t = 250)]
        coords: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a metrics CSV into an SVG reward curve.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| {
        std::env::var_os("UASSOC_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
    })
}

fn load_or_default(config: Option<&Path>) -> anyhow::Result<SimConfig> {
    match config {
        Some(path) => Ok(load_config(path)?),
        None => Ok(SimConfig::default().validated()?),
    }
}

fn parse_traffic(s: &str) -> anyhow::Result<TrafficMode> {
    match s {
        "poisson" | "on" => Ok(TrafficMode::Poisson),
        "infinite" | "off" => Ok(TrafficMode::Infinite),
        other => bail!("unknown traffic mode '{other}' (poisson | infinite)"),
    }
}

fn run_train(
    config: Option<PathBuf>,
    episodes: usize,
    seed: u64,
    out: Option<PathBuf>,
    checkpoint_every: Option<usize>,
) -> anyhow::Result<()> {
    let cfg = load_or_default(config.as_deref())?;
    let dir = out_dir(out);
    std::fs::create_dir_all(&dir)?;

    let mut manifest = ExperimentManifest::new("train", &cfg, vec![seed], Some(episodes));
    let csv_path = dir.join("metrics.csv");
    let ckpt_path = dir.join("checkpoint.bin");
    manifest.outputs = vec![
        csv_path.display().to_string(),
        ckpt_path.display().to_string(),
    ];
    let hash = manifest.hash();
    manifest.write(&dir.join("manifest.json"))?;

    let mut writer = outputs::MetricsWriter::create(&csv_path, &hash)?;
    let outcome = learner::train(&cfg, episodes, seed, |row, policy| {
        writer.push(row)?;
        if let Some(every) = checkpoint_every {
            if every > 0 && (row.episode + 1) % every == 0 {
                policy.save(
                    &dir.join(format!("checkpoint_ep{}.bin", row.episode + 1)),
                    &cfg,
                    vec![seed, row.episode as u64],
                    Some(hash.clone()),
                )?;
            }
        }
        if row.episode % 100 == 0 {
            eprintln!(
                "episode {:>6}  r_d {:+.4e}  reward {:.4e}  entropy {:.3}",
                row.episode, row.r_d, row.mean_reward, row.policy_entropy
            );
        }
        Ok(())
    })?;

    outcome
        .policy
        .save(&ckpt_path, &cfg, vec![seed], Some(hash.clone()))?;
    let csv_text = std::fs::read_to_string(&csv_path)?;
    std::fs::write(
        dir.join("reward_curve.svg"),
        outputs::reward_curve_svg(&outcome.metrics, &csv_text),
    )?;
    eprintln!(
        "trained {} episodes; outputs in {}",
        outcome.metrics.len(),
        dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    checkpoint: PathBuf,
    k: Option<usize>,
    beams: Option<usize>,
    deployments: Option<usize>,
    alpha: Option<f64>,
    traffic: Option<String>,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let traffic = traffic.as_deref().map(parse_traffic).transpose()?;
    let overrides = EvalOverrides {
        beams,
        alpha,
        traffic,
        deployments,
        seed,
    };
    let (_, embedded_cfg, _) = PolicyNetwork::load(&checkpoint)?;
    let k = k.unwrap_or(embedded_cfg.k0);

    let dir = out_dir(out);
    std::fs::create_dir_all(&dir)?;
    let mut eval_cfg = embedded_cfg.clone();
    overrides.apply(&mut eval_cfg)?;
    let mut manifest = ExperimentManifest::new("eval", &eval_cfg, vec![seed], None);
    let summary_path = dir.join("eval_summary.json");
    manifest.outputs = vec![summary_path.display().to_string()];
    let hash = manifest.hash();
    manifest.write(&dir.join("manifest.json"))?;

    let summary = harness::run_transfer_eval(&checkpoint, &[k], &overrides, hash)?;
    outputs::write_eval_summary(&summary_path, &summary)?;
    for p in &summary.points {
        println!(
            "{:<10} K={:<3} N_i={:<3} mean utility {:.6e} +- {:.2e} over {} deployments",
            p.method, p.k, p.n_i, p.mean_utility_bps, p.ci95, p.deployments
        );
    }
    Ok(())
}

fn run_sweep_k(
    checkpoint: PathBuf,
    k_values: Vec<usize>,
    deployments: Option<usize>,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let overrides = EvalOverrides {
        deployments,
        seed,
        ..Default::default()
    };
    let (_, cfg, _) = PolicyNetwork::load(&checkpoint)?;
    let dir = out_dir(out);
    std::fs::create_dir_all(&dir)?;
    let mut manifest = ExperimentManifest::new("sweep-k", &cfg, vec![seed], None);
    let json_path = dir.join("sweep_k.json");
    let svg_path = dir.join("sweep_k.svg");
    manifest.outputs = vec![
        json_path.display().to_string(),
        svg_path.display().to_string(),
    ];
    let hash = manifest.hash();
    manifest.write(&dir.join("manifest.json"))?;

    let summary = harness::run_transfer_eval(&checkpoint, &k_values, &overrides, hash)?;
    outputs::write_eval_summary(&json_path, &summary)?;
    std::fs::write(&svg_path, outputs::eval_bars_svg(&summary))?;
    for p in &summary.points {
        println!(
            "{:<10} K={:<3} mean utility {:.6e} +- {:.2e}",
            p.method, p.k, p.mean_utility_bps, p.ci95
        );
    }
    Ok(())
}

fn run_sweep_beams(
    checkpoint: PathBuf,
    beam_values: Vec<usize>,
    k: Option<usize>,
    deployments: Option<usize>,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let (_, cfg, _) = PolicyNetwork::load(&checkpoint)?;
    let k = k.unwrap_or(cfg.k0);
    let dir = out_dir(out);
    std::fs::create_dir_all(&dir)?;
    let mut manifest = ExperimentManifest::new("sweep-beams", &cfg, vec![seed], None);
    let json_path = dir.join("sweep_beams.json");
    let svg_path = dir.join("sweep_beams.svg");
    manifest.outputs = vec![
        json_path.display().to_string(),
        svg_path.display().to_string(),
    ];
    let hash = manifest.hash();
    manifest.write(&dir.join("manifest.json"))?;

    let mut points = Vec::new();
    for &n_i in &beam_values {
        let overrides = EvalOverrides {
            beams: Some(n_i),
            deployments,
            seed,
            ..Default::default()
        };
        let summary = harness::run_transfer_eval(&checkpoint, &[k], &overrides, hash.clone())?;
        points.extend(summary.points);
    }
    let summary = harness::EvalSummary {
        points,
        manifest_hash: hash,
    };
    outputs::write_eval_summary(&json_path, &summary)?;
    std::fs::write(&svg_path, outputs::beam_bars_svg(&summary))?;
    for p in &summary.points {
        println!(
            "{:<10} N_i={:<3} mean utility {:.6e} +- {:.2e}",
            p.method, p.n_i, p.mean_utility_bps, p.ci95
        );
    }
    Ok(())
}

fn run_baseline(
    config: Option<PathBuf>,
    k: Option<usize>,
    deployments: Option<usize>,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut cfg = load_or_default(config.as_deref())?;
    if let Some(d) = deployments {
        cfg.eval.deployments = d;
    }
    let k = k.unwrap_or(cfg.k0);
    let dir = out_dir(out);
    std::fs::create_dir_all(&dir)?;
    let mut manifest = ExperimentManifest::new("baseline", &cfg, vec![seed], None);
    let json_path = dir.join("baseline.json");
    manifest.outputs = vec![json_path.display().to_string()];
    let hash = manifest.hash();
    manifest.write(&dir.join("manifest.json"))?;

    let points = harness::evaluate_methods(&cfg, None, k, cfg.eval.deployments, seed)?;
    let summary = harness::EvalSummary {
        points,
        manifest_hash: hash,
    };
    outputs::write_eval_summary(&json_path, &summary)?;
    for p in &summary.points {
        println!(
            "{:<10} K={:<3} mean utility {:.6e} +- {:.2e}",
            p.method, p.k, p.mean_utility_bps, p.ci95
        );
    }
    Ok(())
}

fn run_plot(input: PathBuf, out: PathBuf) -> anyhow::Result<()> {
    let rows = outputs::read_metrics_csv(&input)
        .with_context(|| format!("reading {}", input.display()))?;
    if rows.is_empty() {
        bail!("no rows in {}", input.display());
    }
    let csv_text = std::fs::read_to_string(&input)?;
    std::fs::write(&out, outputs::reward_curve_svg(&rows, &csv_text))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Train {
            config,
            episodes,
            seed,
            out,
            checkpoint_every,
        } => run_train(config, episodes, seed, out, checkpoint_every),
        Cmd::Eval {
            checkpoint,
            k,
            beams,
            deployments,
            alpha,
            traffic,
            seed,
            out,
        } => run_eval(checkpoint, k, beams, deployments, alpha, traffic, seed, out),
        Cmd::SweepK {
            checkpoint,
            k_values,
            deployments,
            seed,
            out,
        } => run_sweep_k(checkpoint, k_values, deployments, seed, out),
        Cmd::SweepBeams {
            checkpoint,
            beam_values,
            k,
            deployments,
            seed,
            out,
        } => run_sweep_beams(checkpoint, beam_values, k, deployments, seed, out),
        Cmd::Baseline {
            config,
            k,
            deployments,
            seed,
            out,
        } => run_baseline(config, k, deployments, seed, out),
        Cmd::OracleCheck { instances, seed } => {
            let report = harness::oracle_check(instances, seed)?;
            println!("{report}");
            if !report.pass() {
                bail!("oracle sandwich violated");
            }
            Ok(())
        }
        Cmd::Gradcheck {
            coords,
            tolerance,
            seed,
        } => {
            let report = harness::policy_gradcheck(coords, tolerance, seed)?;
            println!("{report}");
            if !report.pass {
                bail!("gradient check failed");
            }
            Ok(())
        }
        Cmd::Plot { input, out } => run_plot(input, out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
