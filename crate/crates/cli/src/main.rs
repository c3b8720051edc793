use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use shelfpick::sim::{generate_scene, run_pick, NoiseConfig, Scene, ShelfChoice, TrialOutcome, TrialResult};
use shelfpick_cli::batch::{write_csv, BatchConfig};
use shelfpick_cli::plan::plan_scene;
use shelfpick_cli::render::{render_scene, render_trial, DEFAULT_PX_PER_M};
use shelfpick_cli::{read_scene, Failure, Tuning};

#[derive(Parser)]
#[command(name = "shelfpick", version, about = "Bimanual shelf picking: grasp and declutter planning and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random scene as JSON.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "center")]
        shelf: ShelfChoice,
        #[arg(long)]
        clutter: bool,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Plan grasps and declutter moves for a scene and print the ranking.
    Plan {
        scene: PathBuf,
        /// Target item; defaults to the scene's target.
        #[arg(long)]
        target: Option<u32>,
        #[command(flatten)]
        tuning: TuningArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 20)]
        top: usize,
        #[arg(long)]
        render: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PX_PER_M)]
        px_per_m: f64,
    },
    /// Run one picking trial.
    Simulate {
        /// Scene file; a scene is generated from --seed/--shelf/--clutter when omitted.
        scene: Option<PathBuf>,
        #[arg(long, default_value = "center")]
        shelf: ShelfChoice,
        #[arg(long)]
        clutter: bool,
        #[arg(long, default_value_t = 3)]
        i_max: usize,
        /// Grasp the best candidate without decluttering.
        #[arg(long)]
        no_declutter: bool,
        #[command(flatten)]
        tuning: TuningArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Write the trial log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write frames as <stem>_NN.svg next to this path.
        #[arg(long)]
        render: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PX_PER_M)]
        px_per_m: f64,
    },
    /// Run a batch of seeded trials described by a TOML file.
    Batch {
        config: PathBuf,
        /// Per-trial CSV; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a scene file or a trial log to SVG.
    Render {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PX_PER_M)]
        px_per_m: f64,
    },
}

#[derive(Args)]
struct TuningArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    n_max: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    sigma_samples: Option<f64>,
}

impl TuningArgs {
    fn tuning(&self) -> Tuning {
        Tuning {
            mu: self.mu,
            n_max: self.n_max,
            tau_max: self.tau_max,
            sigma_samples: self.sigma_samples,
        }
    }
}

#[derive(Args)]
struct NoiseArgs {
    /// Seeds scene generation and observation noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
}

impl NoiseArgs {
    fn config(&self) -> NoiseConfig {
        NoiseConfig {
            point_sigma: self.noise_sigma,
            dropout_prob: 0.0,
            seed: self.seed,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn frame_paths(base: &Path, n: usize) -> Vec<PathBuf> {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    (0..n).map(|k| base.with_file_name(format!("{stem}_{k:02}.svg"))).collect()
}

fn write_frames(base: &Path, frames: &[String]) -> anyhow::Result<()> {
    for (path, svg) in frame_paths(base, frames.len()).iter().zip(frames) {
        write_file(path, svg)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            seed,
            shelf,
            clutter,
            out,
        } => {
            let scene = generate_scene(seed, shelf, clutter).map_err(anyhow::Error::from)?;
            match out {
                Some(p) => write_file(&p, &scene.to_json())?,
                None => println!("{}", scene.to_json()),
            }
        }
        Command::Plan {
            scene,
            target,
            tuning,
            noise,
            top,
            render,
            px_per_m,
        } => {
            let scene = read_scene(&scene)?;
            let cfg = tuning.tuning().config(noise.config(), true)?;
            let report = plan_scene(&scene, target.unwrap_or(scene.target_id), &cfg)?;
            print!("{}", report.table(top));
            if let Some(path) = render {
                let best = report.ranked.first().map(|c| &c.grasp.pair);
                write_file(&path, &render_scene(&scene, Some(&report.search), best, px_per_m))?;
                println!("wrote {}", path.display());
            }
            let best = report.feasible()?;
            match &best.declutter {
                Some(d) if !d.is_noop => println!("best plan: declutter (l_d {:.6}) then grasp", d.cost),
                _ => println!("best plan: grasp without decluttering"),
            }
        }
        Command::Simulate {
            scene,
            shelf,
            clutter,
            i_max,
            no_declutter,
            tuning,
            noise,
            log,
            render,
            px_per_m,
        } => {
            let scene: Scene = match scene {
                Some(p) => read_scene(&p)?,
                None => generate_scene(noise.seed, shelf, clutter).map_err(anyhow::Error::from)?,
            };
            let cfg = tuning.tuning().config(noise.config(), !no_declutter)?;
            let result = run_pick(&scene, scene.target_id, i_max, &cfg);
            println!(
                "outcome {}{} nudges {} retries {}",
                result.outcome.name(),
                match result.outcome {
                    TrialOutcome::GraspFailed { stage } => format!(" ({})", stage.name()),
                    _ => String::new(),
                },
                result.nudges_executed,
                result.retries
            );
            if let Some(p) = log {
                let text = serde_json::to_string_pretty(&result).context("serializing trial log")?;
                write_file(&p, &text)?;
            }
            if let Some(p) = render {
                write_frames(&p, &render_trial(&result, px_per_m))?;
            }
            if result.outcome == TrialOutcome::Infeasible {
                return Err(Failure::Infeasible("no grasp candidates".into()));
            }
        }
        Command::Batch { config, csv, report } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = BatchConfig::from_toml(&text).with_context(|| format!("{}: invalid batch config", config.display()))?;
            let interrupt = Arc::new(AtomicBool::new(false));
            let flag = interrupt.clone();
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
                log::warn!("cannot install interrupt handler: {e}");
            }
            let result = match &csv {
                Some(p) => {
                    let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
                    write_csv(&cfg, &interrupt, std::io::BufWriter::new(f))?
                }
                None => write_csv(&cfg, &interrupt, std::io::stdout().lock())?,
            };
            let summary = result.summary();
            if csv.is_some() {
                print!("{summary}");
            } else {
                eprint!("{summary}");
            }
            if let Some(p) = report {
                let text = serde_json::to_string_pretty(&result).context("serializing report")?;
                write_file(&p, &text)?;
            }
            std::io::stdout().flush().ok();
            if result.truncated {
                return Err(Failure::Input(anyhow::anyhow!("interrupted; partial results written")));
            }
        }
        Command::Render { input, out, px_per_m } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            if text.trim().is_empty() {
                return Err(Failure::Input(anyhow::anyhow!("{}: empty input", input.display())));
            }
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON", input.display()))?;
            if value.get("outcome").is_some() {
                let trial: TrialResult =
                    serde_json::from_value(value).with_context(|| format!("{}: invalid trial log", input.display()))?;
                write_frames(&out, &render_trial(&trial, px_per_m))?;
            } else {
                let scene = Scene::from_json(&text).with_context(|| format!("{}: invalid scene", input.display()))?;
                write_file(&out, &render_scene(&scene, None, None, px_per_m))?;
                println!("wrote {}", out.display());
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHELFPICK_LOG", "error")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
