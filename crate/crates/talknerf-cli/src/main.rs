//! `talknerf` command line: dataset generation, training, rendering,
//! evaluation, ablation sweeps, and gradient checking.
//!
//! Exit codes: 0 success, 1 validation/acceptance failure, 2 usage or
//! I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use talknerf_core::config::{fnv1a64, AblationRow, RunConfig};
use talknerf_core::diffcore::GradCheckSettings;
use talknerf_core::error::Error as CoreError;
use talknerf_core::metrics::evaluate_frames;
use talknerf_core::renderer::{render_image, FrameCond, RenderSettings};
use talknerf_core::synth::{gen_dataset, load_dataset, LoadedDataset, SceneParams};
use talknerf_core::trainer::train::{restore_state, train};
use talknerf_core::trainer::{load_checkpoint, TrainSummary};
use talknerf_core::verify::run_gradchecks;
use talknerf_core::FieldModel;

mod model_io;
mod render_cmd;

use model_io::load_model_for_eval;

#[derive(Parser)]
#[command(
    name = "talknerf",
    version,
    about = "Audio-driven talking-head radiance fields on a synthetic scene (CPU)"
)]
struct Cli {
    /// Worker threads (0 = all logical cores); also TALKNERF_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset (images, masks, manifest).
    GenData {
        /// JSON run config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model coarse-to-fine on a generated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Resume from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Ablation row: full, no-transformer, no-fusion,
        /// no-transformer-no-finetune, no-fusion-no-finetune.
        #[arg(long)]
        ablate: Option<String>,
    },
    /// Render frames from a checkpoint.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Frame selection: "3", "0..5", or "1,4,9".
        #[arg(long)]
        frames: String,
        #[arg(long)]
        out: PathBuf,
        /// Emit GT|prediction|abs-difference triptychs.
        #[arg(long)]
        side_by_side: bool,
        /// Config path; defaults to config.json beside the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the holdout split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output directory; defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train and compare the ablation grid on one dataset and seed.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of rows (default: all five).
        #[arg(long)]
        rows: Option<String>,
    },
    /// Finite-difference verification of every registered operation.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write a JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sampled coordinates per operation.
        #[arg(long, default_value_t = 220)]
        n_samples: usize,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<CoreError>() {
        return match core {
            CoreError::Io(_)
            | CoreError::Json(_)
            | CoreError::Image(_)
            | CoreError::Dataset(_)
            | CoreError::Config(_)
            | CoreError::Checkpoint(_) => 2,
            _ => 1,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    Ok(cfg)
}

fn effective_threads(cli_threads: Option<usize>, cfg: &RunConfig) -> usize {
    cli_threads
        .or_else(|| {
            std::env::var("TALKNERF_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(cfg.threads)
}

fn install_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let n = if threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        threads
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
    Ok(pool.install(f))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenData { config, out, seed } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let threads = effective_threads(cli.threads, &cfg);
            let t0 = Instant::now();
            let manifest = install_pool(threads, || {
                gen_dataset(
                    &SceneParams::default(),
                    &cfg.dataset,
                    cfg.seed,
                    cfg.renderer.background,
                    &out,
                )
            })??;
            println!(
                "wrote {} frames ({} train / {} holdout) to {} in {:.1}s",
                manifest.frames.len(),
                manifest.split.train.len(),
                manifest.split.holdout.len(),
                out.display(),
                t0.elapsed().as_secs_f64()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            config,
            data,
            out,
            resume,
            ablate,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.threads = effective_threads(cli.threads, &cfg);
            let row = match ablate.as_deref() {
                None => None,
                Some(s) => Some(
                    AblationRow::parse(s)
                        .ok_or_else(|| CoreError::Config(format!("unknown ablation row '{s}'")))?,
                ),
            };
            if let Some(row) = row {
                cfg = cfg.with_ablation(row);
                log::info!("ablation row: {}", row.label());
            }
            let dataset = load_dataset(&data)?;
            let summary = train(&cfg, &dataset, &out, resume.as_deref())?;
            if let Some(row) = row {
                std::fs::write(out.join("ablation.txt"), row.label())?;
            }
            print_summary(&summary);
            Ok(ExitCode::SUCCESS)
        }
        Command::Render {
            checkpoint,
            data,
            frames,
            out,
            side_by_side,
            config,
        } => {
            let dataset = load_dataset(&data)?;
            let (model, cfg) = load_model_for_eval(&checkpoint, config.as_deref(), &dataset)?;
            let threads = effective_threads(cli.threads, &cfg);
            install_pool(threads, || {
                render_cmd::render_frames(&model, &cfg, &dataset, &frames, &out, side_by_side)
            })??;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            checkpoint,
            data,
            out,
            config,
        } => {
            let dataset = load_dataset(&data)?;
            let (model, cfg) = load_model_for_eval(&checkpoint, config.as_deref(), &dataset)?;
            let threads = effective_threads(cli.threads, &cfg);
            let settings = RenderSettings::<f32>::from_config(&cfg, false);
            let holdout = dataset.holdout_frames();
            let report = install_pool(threads, || evaluate_frames(&model, &holdout, &settings))??;
            let out_dir = out.unwrap_or_else(|| {
                checkpoint
                    .parent()
                    .map(|p| p.to_path_buf())
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            std::fs::create_dir_all(&out_dir)?;
            report.write_csv(&out_dir.join("eval.csv"))?;
            report.write_json_summary(cfg.hash(), &out_dir.join("summary.json"))?;
            println!(
                "holdout: psnr {:.2} dB | mouth {:.2} dB | lmd {:.3} px over {} frames",
                report.mean_psnr,
                report.mean_mouth_psnr,
                report.mean_lmd,
                report.frames.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate {
            config,
            data,
            out,
            rows,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.threads = effective_threads(cli.threads, &cfg);
            let rows = parse_rows(rows.as_deref())?;
            let dataset = load_dataset(&data)?;
            run_ablation(&cfg, &dataset, &rows, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck {
            config,
            out,
            n_samples,
            eps,
            tol,
        } => {
            // Config only carries the thread override here; checks are
            // self-seeded for reproducibility.
            let cfg = load_config(config.as_deref())?;
            let threads = effective_threads(cli.threads, &cfg);
            let settings = GradCheckSettings {
                n_samples,
                eps,
                tol,
                seed: 0,
            };
            let reports = install_pool(threads, || run_gradchecks(None, &settings))?;
            let mut all_pass = true;
            let mut json_rows = Vec::new();
            for rep in &reports {
                let pass = rep.passed(tol);
                all_pass &= pass;
                println!(
                    "{:18} n={:4} max_rel_err={:.3e} failures={:3} {}",
                    rep.op_name,
                    rep.n_checked,
                    rep.max_rel_err,
                    rep.failures.len(),
                    if pass { "PASS" } else { "FAIL" }
                );
                json_rows.push(serde_json::json!({
                    "op": rep.op_name,
                    "n_checked": rep.n_checked,
                    "max_rel_err": rep.max_rel_err,
                    "failures": rep.failures.iter().map(|f| {
                        serde_json::json!({"index": f.index, "analytic": f.analytic, "numeric": f.numeric})
                    }).collect::<Vec<_>>(),
                    "pass": pass,
                }));
            }
            if let Some(path) = out {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::write(&path, serde_json::to_string_pretty(&json_rows)?)?;
            }
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn print_summary(summary: &TrainSummary) {
    println!(
        "trained {} steps in {:.1}s | holdout psnr {:.2} dB mouth {:.2} dB lmd {:.3} px | checkpoint {}",
        summary.steps_run,
        summary.wall_secs,
        summary.final_eval.mean_psnr,
        summary.final_eval.mean_mouth_psnr,
        summary.final_eval.mean_lmd,
        summary.checkpoint.display()
    );
}

fn parse_rows(spec: Option<&str>) -> anyhow::Result<Vec<AblationRow>> {
    match spec {
        None => Ok(AblationRow::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|part| {
                AblationRow::parse(part.trim()).ok_or_else(|| {
                    CoreError::Config(format!("unknown ablation row '{part}'")).into()
                })
            })
            .collect(),
    }
}

fn run_ablation(
    cfg: &RunConfig,
    dataset: &LoadedDataset,
    rows: &[AblationRow],
    out: &Path,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let dataset_hash = fnv1a64(&std::fs::read(dataset.dir.join("dataset.json"))?);

    struct RowResult {
        label: &'static str,
        psnr: f64,
        mouth: f64,
        lmd: f64,
        secs: f64,
    }
    let mut results = Vec::new();
    for row in rows {
        let row_cfg = cfg.clone().with_ablation(*row);
        let slug = row
            .label()
            .replace("w/o ", "no_")
            .replace(' ', "_")
            .to_lowercase();
        let run_dir = out.join(&slug);
        log::info!("ablation row '{}' -> {}", row.label(), run_dir.display());
        let summary = train(&row_cfg, dataset, &run_dir, None)?;
        std::fs::write(run_dir.join("ablation.txt"), row.label())?;
        results.push(RowResult {
            label: row.label(),
            psnr: summary.final_eval.mean_psnr,
            mouth: summary.final_eval.mean_mouth_psnr,
            lmd: summary.final_eval.mean_lmd,
            secs: summary.wall_secs,
        });
    }

    let mut csv = String::from("method,psnr,mouth_psnr,lmd,wall_secs,dataset_hash\n");
    let mut md = String::new();
    md.push_str(&format!("dataset hash: `{dataset_hash:016x}`\n\n"));
    md.push_str("| Method | PSNR (dB) | Mouth PSNR (dB) | LMD (px) | Wall (s) |\n");
    md.push_str("|---|---|---|---|---|\n");
    for r in &results {
        csv.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.1},{:016x}\n",
            r.label, r.psnr, r.mouth, r.lmd, r.secs, dataset_hash
        ));
        md.push_str(&format!(
            "| {} | {:.2} | {:.2} | {:.3} | {:.1} |\n",
            r.label, r.psnr, r.mouth, r.lmd, r.secs
        ));
    }
    std::fs::write(out.join("ablation.csv"), csv)?;
    std::fs::write(out.join("ablation.md"), &md)?;
    println!("{md}");
    Ok(())
}
