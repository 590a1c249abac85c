//! `lumos`: dataset generation, ground-truth rendering, training,
//! evaluation, ablations and gradient checks for coded TDM light field
//! displays.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use lumos_core::data::synth::write_dataset;
use lumos_core::data::{load_light_field, write_stack};
use lumos_core::display::{ground_truth_stack, ApertureMode};
use lumos_core::exec::{with_jobs, Exec};
use lumos_core::optics::export::write_aperture;
use lumos_core::trainer::{
    ablate, ablation_csv, evaluate, load_dataset, parse_grid, pipeline_grad_check, Checkpoint, TrainConfig, Trainer,
};
use manifest::{hash_bytes, RunManifest};

/// Gradient checks above this relative error fail the command.
const GRADCHECK_LIMIT: f64 = 1e-3;

#[derive(Parser, Debug)]
#[command(name = "lumos", version, about = "Coded time-division multiplexing light field display simulator")]
struct Cli {
    /// Worker threads for scene and slice rendering; 1 runs sequentially.
    #[arg(long, global = true, default_value_t = default_jobs())]
    jobs: usize,
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true, env = "LUMOS_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset of layered scenes.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Views per axis.
        #[arg(long, default_value_t = 9)]
        grid: usize,
        /// View side in pixels.
        #[arg(long, default_value_t = 96)]
        size: usize,
        /// Largest per-view disparity in pixels.
        #[arg(long, default_value_t = 1.0)]
        max_disparity: f64,
    },
    /// Render the dense-field focal stack of one scene.
    RenderGt {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an encoder and coded apertures.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint and the TDM baselines on the test scenes.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score the base config and every variant of a grid file.
    Ablate {
        /// Lines of `name key=value ...`.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare backpropagated and finite-difference gradients of the full pipeline.
    Gradcheck {
        #[arg(long, default_value_t = 8)]
        size: usize,
    },
    /// Write the apertures of a checkpoint as CSV and PNG.
    ExportApertures {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let jobs = cli.jobs.max(1);
    match with_jobs(jobs, move || run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for usage and configuration errors, 2 for data errors, 3 for numerical failures.
fn exit_code(e: &anyhow::Error) -> u8 {
    let Some(core) = e.chain().find_map(|c| c.downcast_ref::<lumos_core::Error>()) else {
        return 2;
    };
    use lumos_core::Error as E;
    if core.is_numerical() {
        3
    } else if matches!(
        core,
        E::InvalidConfig(_) | E::UnknownKey(_) | E::BadMode(_) | E::NonNegativeBetaRequired(_) | E::BadCount { .. }
    ) {
        1
    } else {
        2
    }
}

fn read_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let mut cfg = TrainConfig::default();
            cfg.apply_text(&text).with_context(|| format!("in config {}", p.display()))?;
            cfg
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let jobs = cli.jobs.max(1);
    let exec = Exec::from_jobs(jobs);
    match cli.command {
        Command::Synth { out, count, grid, size, max_disparity } => {
            let seed = cli.seed.unwrap_or(0);
            let names = write_dataset(&out, count, grid, size, max_disparity, seed)?;
            RunManifest::new("synth", String::new())
                .setting("seed", seed)
                .setting("count", count)
                .setting("grid", grid)
                .setting("size", size)
                .setting("max_disparity", max_disparity)
                .write(&out)?;
            println!("wrote {} scenes to {}", names.len(), out.display());
        }
        Command::RenderGt { scene, config, out } => {
            let lf = load_light_field(&scene).with_context(|| format!("loading scene {}", scene.display()))?;
            let mut cfg = read_config(config.as_deref(), cli.seed)?;
            cfg.grid = lf.angular_resolution();
            cfg.validate()?;
            let plan = cfg.plan()?;
            let stack = ground_truth_stack(&lf, &plan, exec)?;
            let text = cfg.to_string();
            let meta = vec![
                ("grid".to_string(), cfg.grid.to_string()),
                ("config_sha256".to_string(), hash_bytes(text.as_bytes())),
            ];
            write_stack(&out, &stack.slices, &plan.spec.psi, &meta)?;
            RunManifest::new("render-gt", text).setting("jobs", jobs).input(&scene)?.write(&out)?;
            println!("wrote {} slices to {}", stack.slices.len(), out.display());
        }
        Command::Train { dataset, config, out, resume } => {
            let resumed = resume.as_deref().map(Checkpoint::load).transpose().context("loading checkpoint")?;
            let cfg = match (&config, &resumed) {
                (None, Some(c)) => {
                    let mut cfg = c.config.clone();
                    if let Some(s) = cli.seed {
                        cfg.seed = s;
                    }
                    cfg
                }
                _ => read_config(config.as_deref(), cli.seed)?,
            };
            cfg.validate()?;
            let (train_set, _) = load_dataset(&dataset, &cfg)?;
            let trainer = Trainer::new(&cfg, train_set, exec)?;
            let mut ckpt = match resumed {
                Some(c) => c,
                None => Checkpoint::initial(&cfg)?,
            };
            if ckpt.config != cfg {
                bail!(lumos_core::Error::ConfigMismatch("the resumed checkpoint was trained with another config".into()));
            }
            fs::create_dir_all(&out)?;
            let mut manifest = RunManifest::new("train", cfg.to_string()).setting("jobs", jobs).input(&dataset)?;
            if let Some(r) = &resume {
                manifest = manifest.input(r)?;
            }
            manifest.write(&out)?;
            let every = cfg.checkpoint_every;
            trainer.run(&mut ckpt, cfg.epochs, |c| {
                if every > 0 && c.epoch % every == 0 && c.epoch < cfg.epochs {
                    c.save(&out.join(format!("checkpoint_{:06}.bin", c.epoch)))?;
                }
                Ok(())
            })?;
            ckpt.save(&out.join("checkpoint.bin"))?;
            let mut csv = String::from("epoch,loss\n");
            for (e, l) in ckpt.loss_history.iter().enumerate() {
                csv.push_str(&format!("{},{l}\n", e + 1));
            }
            fs::write(out.join("loss.csv"), csv)?;
            println!(
                "trained {} epochs; final loss {}",
                ckpt.epoch,
                ckpt.loss_history.last().map_or("n/a".into(), |l| l.to_string())
            );
        }
        Command::Eval { ckpt, dataset, out } => {
            let c = Checkpoint::load(&ckpt).context("loading checkpoint")?;
            let (_, test) = load_dataset(&dataset, &c.config)?;
            let trainer = Trainer::new(&c.config, test, exec)?;
            let report = evaluate(&trainer, &c, exec)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("report.txt"), report.to_text())?;
            fs::write(out.join("report.csv"), report.to_csv())?;
            RunManifest::new("eval", c.config.to_string())
                .setting("jobs", jobs)
                .input(&ckpt)?
                .input(&dataset)?
                .write(&out)?;
            print!("{}", report.to_text().lines().filter(|l| l.starts_with("overall")).map(|l| format!("{l}\n")).collect::<String>());
        }
        Command::Ablate { grid, dataset, config, out } => {
            let base = read_config(config.as_deref(), cli.seed)?;
            base.validate()?;
            let text = fs::read_to_string(&grid).with_context(|| format!("reading grid {}", grid.display()))?;
            let variants = parse_grid(&text)?;
            let (train_set, test_set) = load_dataset(&dataset, &base)?;
            let rows = ablate(&base, &variants, &train_set, &test_set, exec)?;
            fs::create_dir_all(&out)?;
            let csv = ablation_csv(&rows);
            fs::write(out.join("ablation.csv"), &csv)?;
            RunManifest::new("ablate", base.to_string())
                .setting("jobs", jobs)
                .input(&grid)?
                .input(&dataset)?
                .write(&out)?;
            print!("{csv}");
        }
        Command::Gradcheck { size } => {
            let seed = cli.seed.unwrap_or(0);
            let r = pipeline_grad_check(size, seed)?;
            println!("max relative error = {:e} over {} coordinates", r.max_rel_error, r.checked);
            if !(r.max_rel_error <= GRADCHECK_LIMIT) {
                eprintln!("error: gradient check failed (limit {GRADCHECK_LIMIT:e})");
                return Ok(ExitCode::from(3));
            }
        }
        Command::ExportApertures { ckpt, out } => {
            let c = Checkpoint::load(&ckpt).context("loading checkpoint")?;
            let bank = match c.apertures.mode {
                ApertureMode::BinaryRelaxed => c.apertures.with_mode(ApertureMode::BinaryFrozen),
                _ => c.apertures.clone(),
            };
            fs::create_dir_all(&out)?;
            let apertures = bank.effective_apertures()?;
            for (i, a) in apertures.iter().enumerate() {
                write_aperture(&out.join(format!("aperture_{i}")), a.view())?;
            }
            RunManifest::new("export-apertures", c.config.to_string()).input(&ckpt)?.write(&out)?;
            println!("wrote {} apertures to {}", apertures.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
