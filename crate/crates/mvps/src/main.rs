//! Command-line driver: `synth`, `solve`, `eval` and `sweep`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mvpsr_core::solver::{solve, SolveResult, SolverConfig, SolverInput};

use mvps::scene::{generate, read_scene_config, SceneConfig};
use mvps::{fmt_full, manifest, metrics, results};

#[derive(Parser)]
#[command(
    name = "mvps",
    about = "Joint depth super-resolution and uncalibrated multi-view photometric stereo"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scene configuration file.
    Synth {
        /// Scene/trajectory configuration (plain-text key-value).
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Depth-noise RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the solver on a dataset manifest.
    Solve {
        /// Dataset manifest path.
        #[arg(long)]
        dataset: PathBuf,
        /// Output result directory.
        #[arg(long)]
        out: PathBuf,
        /// Depth-prior strength before normalization.
        #[arg(long = "tau-tilde", default_value_t = 10.0)]
        tau_tilde: f64,
        /// Cauchy robustifier scale.
        #[arg(long, default_value_t = 0.04)]
        lambda: f64,
        /// Pyramid levels.
        #[arg(long, default_value_t = 5)]
        levels: usize,
        /// Use only the first N frames.
        #[arg(long)]
        frames: Option<usize>,
        /// Relative energy-change stopping tolerance.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Compare an estimated result directory against ground truth.
    Eval {
        /// Result directory holding the estimate.
        #[arg(long)]
        est: PathBuf,
        /// Directory holding ground-truth depth (same layout).
        #[arg(long)]
        gt: PathBuf,
        /// Report file to write.
        #[arg(long)]
        report: PathBuf,
    },
    /// Parameter study: solve the spec's scene across values of one
    /// parameter and emit a CSV of (value, MAE, RMSE).
    Sweep {
        /// Which parameter to sweep.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Scene configuration; defaults to the built-in scene.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Depth-noise RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    /// Frame count.
    N,
    /// Depth-prior strength tau-tilde.
    Tau,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Command::Synth { spec, out, seed } => run_synth(&spec, &out, seed),
        Command::Solve {
            dataset,
            out,
            tau_tilde,
            lambda,
            levels,
            frames,
            tol,
        } => run_solve(&dataset, &out, tau_tilde, lambda, levels, frames, tol),
        Command::Eval { est, gt, report } => run_eval(&est, &gt, &report),
        Command::Sweep {
            param,
            values,
            spec,
            out,
            seed,
        } => run_sweep(param, &values, spec.as_deref(), &out, seed),
    }
}

fn run_synth(spec: &Path, out: &Path, seed: u64) -> Result<()> {
    let cfg = read_scene_config(spec)?;
    let dataset = generate(&cfg, seed, Default::default())?;
    let manifest_path = results::write_dataset(out, &dataset)?;
    println!(
        "wrote {} frames, {}x{} LR depth and ground truth; manifest at {}",
        dataset.frames.len(),
        dataset.depth_lr.width(),
        dataset.depth_lr.height(),
        manifest_path.display()
    );
    Ok(())
}

fn solve_input(input: &SolverInput, config: &SolverConfig, out: &Path) -> Result<SolveResult> {
    match solve(input, config) {
        Ok(result) => Ok(result),
        Err(e) => {
            let diag = out.join("diagnostics.txt");
            let _ = std::fs::create_dir_all(out);
            let _ = std::fs::write(&diag, format!("solver failed: {e}\n"));
            bail!("solver failed: {e} (diagnostics at {})", diag.display());
        }
    }
}

fn run_solve(
    dataset: &Path,
    out: &Path,
    tau_tilde: f64,
    lambda: f64,
    levels: usize,
    frames: Option<usize>,
    tol: f64,
) -> Result<()> {
    let mut ds = manifest::load_dataset(dataset)?;
    if let Some(n) = frames {
        if n < 3 || n > ds.input.frames.len() {
            bail!(
                "--frames {n} out of range; dataset has {} frames and solving needs at least 3",
                ds.input.frames.len()
            );
        }
        ds.input.frames.truncate(n);
    }
    let config = SolverConfig {
        tau_tilde,
        lambda,
        levels,
        tol,
        ..SolverConfig::default()
    };
    let result = solve_input(&ds.input, &config, out)?;
    results::save_results(out, &result.estimate, &ds.input.intrinsics, &result.records)?;
    for level in (0..levels).rev() {
        let sweeps = result.records.iter().filter(|r| r.level == level).count();
        if sweeps > 0 {
            println!("level {level}: {sweeps} sweeps");
        }
    }
    if let Some(last) = result.records.last() {
        println!("final energy {}", fmt_full(last.energy));
    }
    println!("results in {}", out.display());
    Ok(())
}

fn run_eval(est: &Path, gt: &Path, report: &Path) -> Result<()> {
    let z_est = manifest::read_depth(&est.join("depth.pfm"), 1.0)?;
    let z_gt = manifest::read_depth(&gt.join("depth.pfm"), 1.0)?;
    let k = results::read_intrinsics(&gt.join("intrinsics.txt"))
        .or_else(|_| results::read_intrinsics(&est.join("intrinsics.txt")))
        .context("no readable intrinsics.txt in either directory")?;
    let r = metrics::evaluate(&z_est, &z_gt, &k)?;
    std::fs::write(report, r.to_text())
        .with_context(|| format!("cannot write report {}", report.display()))?;
    print!("{}", r.to_text());
    Ok(())
}

fn run_sweep(
    param: SweepParam,
    values: &[f64],
    spec: Option<&Path>,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let cfg = match spec {
        Some(p) => read_scene_config(p)?,
        None => SceneConfig::default(),
    };
    let mut csv = String::from("value,mae_deg,rmse\n");
    for &value in values {
        let (input, gt_depth, k) = match param {
            SweepParam::Tau => {
                let d = generate(&cfg, seed, Default::default())?;
                (to_input(&d), d.gt_depth.clone(), d.intrinsics)
            }
            SweepParam::N => {
                let n = value as usize;
                if n < 3 {
                    bail!("sweep over n needs n >= 3, got {value}");
                }
                let mut c = cfg.clone();
                c.trajectory.frames = n;
                let d = generate(&c, seed, Default::default())?;
                (to_input(&d), d.gt_depth.clone(), d.intrinsics)
            }
        };
        let config = match param {
            SweepParam::Tau => SolverConfig {
                tau_tilde: value,
                ..SolverConfig::default()
            },
            SweepParam::N => SolverConfig::default(),
        };
        let result = solve_input(&input, &config, out.parent().unwrap_or(Path::new(".")))?;
        let r = metrics::evaluate(&result.estimate.depth, &gt_depth, &k)?;
        println!(
            "value {} -> MAE {:.4} deg, RMSE {:.6}",
            value, r.mae_deg, r.rmse
        );
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_full(value),
            fmt_full(r.mae_deg),
            fmt_full(r.rmse)
        ));
    }
    std::fs::write(out, csv).with_context(|| format!("cannot write CSV {}", out.display()))?;
    Ok(())
}

fn to_input(d: &mvps::scene::GeneratedDataset) -> SolverInput {
    SolverInput {
        frames: d.frames.clone(),
        depth_lr: d.depth_lr.clone(),
        mask: d.mask.clone(),
        intrinsics: d.intrinsics,
        sf: d.sf,
    }
}
