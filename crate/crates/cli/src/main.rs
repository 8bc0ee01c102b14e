//! `cfpft`: track sequences, evaluate under OPE/TRE/SRE, and render synthetic test sequences.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cfpft::eval::{self, EvalRun, SrePerturbations};
use cfpft::imagery::ImageSequence;
use cfpft::tracker;
use cfpft::{BoundingBox, FrameSource, GroundTruth, KcfParams, RedetectParams, Synthetic, SyntheticSpec, TrackerConfig};

const GT_FILE: &str = "groundtruth_rect.txt";

#[derive(Parser)]
#[command(name = "cfpft", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one sequence and write per-frame boxes and diagnostics.
    Track(TrackArgs),
    /// Evaluate one sequence under a benchmark protocol.
    Eval(EvalArgs),
    /// Render a synthetic sequence with OTB-format ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrackerFlags {
    /// Number of re-detection particles.
    #[arg(long, default_value_t = 100)]
    particles: usize,
    /// Peak response below which re-detection runs.
    #[arg(long, default_value_t = 0.05)]
    theta: f64,
    /// Seed of the re-detection particle sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Filter learning rate.
    #[arg(long, default_value_t = 0.02)]
    gamma: f64,
    /// Ridge regularization.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Gaussian kernel bandwidth.
    #[arg(long, default_value_t = 0.5)]
    kernel_sigma: f64,
    /// HOG cell size in pixels.
    #[arg(long, default_value_t = 4)]
    cell_size: usize,
    /// Search window side relative to the target side.
    #[arg(long, default_value_t = 2.0)]
    window_factor: f64,
    /// Scale direction above which the target shrinks.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    phi: f64,
    /// Scale direction below which the target grows.
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    psi: f64,
    /// Disable particle re-detection.
    #[arg(long)]
    no_redetect: bool,
    /// Disable scale estimation.
    #[arg(long)]
    no_scale: bool,
}

impl TrackerFlags {
    fn config(&self) -> Result<TrackerConfig> {
        let config = TrackerConfig {
            kcf: KcfParams {
                lambda: self.lambda,
                kernel_sigma: self.kernel_sigma,
                gamma: self.gamma,
                cell_size: self.cell_size,
                ..KcfParams::default()
            },
            redetect: RedetectParams {
                particle_count: self.particles,
                threshold: self.theta,
                rng_seed: self.seed,
                ..RedetectParams::default()
            },
            phi: self.phi,
            psi: self.psi,
            window_factor: self.window_factor,
            redetect_enabled: !self.no_redetect,
            scale_enabled: !self.no_scale,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Directory of frames (or an OTB sequence directory with an `img/` subdirectory).
    sequence: PathBuf,
    /// Ground-truth file whose first box initializes the tracker [default: <sequence>/groundtruth_rect.txt].
    #[arg(long, conflicts_with = "init")]
    gt: Option<PathBuf>,
    /// Initial box as `x,y,w,h` (corner form, 1-based).
    #[arg(long)]
    init: Option<String>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    #[command(flatten)]
    tracker: TrackerFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    Ope,
    Tre,
    Sre,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of frames (or an OTB sequence directory with an `img/` subdirectory).
    sequence: PathBuf,
    #[arg(long, value_enum, default_value = "ope")]
    protocol: Protocol,
    /// Ground-truth file [default: <sequence>/groundtruth_rect.txt].
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Number of TRE restarts.
    #[arg(long, default_value_t = eval::DEFAULT_TRE_SEGMENTS)]
    segments: usize,
    /// SRE center shift as a fraction of the box size.
    #[arg(long, default_value_t = 0.1)]
    sre_shift: f64,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    #[command(flatten)]
    tracker: TrackerFlags,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 320)]
    width: usize,
    #[arg(long, default_value_t = 240)]
    height: usize,
    /// Side of the square on frame 1, in pixels.
    #[arg(long, default_value_t = 40.0)]
    side: f64,
    /// Center on frame 1 as `cx,cy` [default: canvas center].
    #[arg(long)]
    start: Option<String>,
    /// Per-frame motion as `dx,dy`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    motion: String,
    /// Hidden frames as `first-last` (1-based, inclusive).
    #[arg(long)]
    occlusion: Option<String>,
    /// Trajectory jump at the start of the occlusion, as `dx,dy`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    jump: String,
    /// Per-frame size multiplier.
    #[arg(long)]
    zoom: Option<f64>,
    /// Background noise standard deviation, in [0, 1] intensity units.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 8)]
    texture_cells: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_floats<const N: usize>(text: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != N {
        bail!("{what} needs {N} comma-separated numbers, got {text:?}");
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part.parse().with_context(|| format!("invalid number {part:?} in {what}"))?;
    }
    Ok(out)
}

fn parse_interval(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once('-')
        .with_context(|| format!("occlusion needs first-last, got {text:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn gt_path(sequence: &Path, gt: Option<&PathBuf>) -> PathBuf {
    gt.cloned().unwrap_or_else(|| sequence.join(GT_FILE))
}

fn load_gt(path: &Path) -> Result<GroundTruth> {
    if !path.is_file() {
        bail!("ground-truth file not found: {}", path.display());
    }
    Ok(GroundTruth::load(path)?)
}

fn open_sequence(dir: &Path) -> Result<ImageSequence> {
    if !dir.is_dir() {
        bail!("sequence directory not found: {}", dir.display());
    }
    Ok(ImageSequence::open(dir)?)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_track(args: &TrackArgs) -> Result<()> {
    let config = args.tracker.config()?;
    let seq = open_sequence(&args.sequence)?;
    let init = match &args.init {
        Some(text) => {
            let [x, y, w, h] = parse_floats::<4>(text, "--init")?;
            BoundingBox::from_corner(x, y, w, h)?
        }
        None => load_gt(&gt_path(&args.sequence, args.gt.as_ref()))?.boxes[0],
    };
    let started = Instant::now();
    let traj = tracker::run(&seq, init, config)?;
    let elapsed = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    write(&args.out_dir.join("results.csv"), &eval::boxes_csv(&traj.boxes, 1))?;
    write(&args.out_dir.join("diagnostics.csv"), &traj.diagnostics_csv())?;
    println!(
        "tracked {} frames in {elapsed:.2} s ({:.1} fps)",
        traj.boxes.len(),
        traj.boxes.len() as f64 / elapsed.max(1e-9)
    );
    Ok(())
}

fn report(run: &EvalRun) {
    let s = run.result.summary();
    println!(
        "{}: precision@20 {:.3}  auc {:.3}  mean VOR {:.3}  mean CLE {:.2}  ({:.1} fps)",
        run.label,
        s.precision_at_20,
        s.auc,
        s.mean_vor,
        s.mean_cle,
        run.fps()
    );
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let config = args.tracker.config()?;
    let seq = open_sequence(&args.sequence)?;
    let gt = load_gt(&gt_path(&args.sequence, args.gt.as_ref()))?;
    let out = &args.out_dir;
    match args.protocol {
        Protocol::Ope => {
            let run = eval::run_ope(config, &seq, &gt)?;
            eval::write_run_files(out, &run)?;
            report(&run);
        }
        Protocol::Tre => {
            let tre = eval::run_tre(config, &seq, &gt, args.segments)?;
            for run in &tre.runs {
                eval::write_run_files(out, run)?;
                report(run);
            }
            eval::write_result_files(out, "tre_average", &tre.average)?;
            let s = tre.average.summary();
            println!(
                "tre_average: precision@20 {:.3}  auc {:.3}  mean VOR {:.3}  mean CLE {:.2}",
                s.precision_at_20, s.auc, s.mean_vor, s.mean_cle
            );
        }
        Protocol::Sre => {
            let set = SrePerturbations {
                shift_fraction: args.sre_shift,
                ..SrePerturbations::default()
            };
            let runs = eval::run_sre(config, &seq, &gt, &set)?;
            for run in &runs {
                eval::write_run_files(out, run)?;
                report(run);
            }
            let results: Vec<_> = runs.iter().map(|r| r.result.clone()).collect();
            eval::write_result_files(out, "sre_average", &cfpft::EvalResult::pooled(&results)?)?;
        }
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let start = match &args.start {
        Some(text) => {
            let [x, y] = parse_floats::<2>(text, "--start")?;
            (x, y)
        }
        None => (args.width as f64 / 2.0, args.height as f64 / 2.0),
    };
    let [mx, my] = parse_floats::<2>(&args.motion, "--motion")?;
    let [jx, jy] = parse_floats::<2>(&args.jump, "--jump")?;
    let spec = SyntheticSpec {
        frames: args.frames,
        canvas: (args.width, args.height),
        side: args.side,
        start_center: start,
        motion: (mx, my),
        occlusion: args.occlusion.as_deref().map(parse_interval).transpose()?,
        occlusion_jump: (jx, jy),
        zoom: args.zoom,
        noise_sigma: args.noise,
        texture_cells: args.texture_cells,
        seed: args.seed,
    };
    let synth = Synthetic::new(spec)?;
    synth.write(&args.out_dir)?;
    println!("wrote {} frames to {}", synth.len(), args.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    let outcome = match &cli.command {
        Command::Track(args) => cmd_track(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
