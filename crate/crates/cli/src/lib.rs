//! File handling and argument parsing for the `cvxseg` binary.

pub mod config;
pub mod io;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cvxseg::phantom::{gen_phantom, random_convex_polygon, PhantomSpec, Shape};
use cvxseg::{Solver, SolverConfig};

use crate::report::{report_json, CsvLog};

/// Convex-prior segmentation of an image from object and background label masks.
///
/// The output mask marks the object with 0 and the background with 255.
#[derive(Debug, Parser)]
#[command(name = "cvxseg", version, subcommand_negates_reqs = true, args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(flatten)]
    pub segment: SegmentArgs,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Input image (8-bit PGM, PPM or PNG).
    #[arg(long, required = true)]
    pub image: Option<PathBuf>,
    /// Object labels: nonzero pixels.
    #[arg(long, required = true)]
    pub fg_mask: Option<PathBuf>,
    /// Background labels: nonzero pixels.
    #[arg(long)]
    pub bg_mask: Option<PathBuf>,
    #[arg(long, required = true)]
    pub out_mask: Option<PathBuf>,
    /// `key = value` overrides of the solver parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// RGB copy of the input with the object perimeter in red.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    #[arg(long)]
    pub log_csv: Option<PathBuf>,
    /// Seed for the mixture-model initialization.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report_json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic test image with label masks and ground truth.
    Phantom(PhantomArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeArg {
    Disc,
    Rectangle,
    LShape,
    RandomConvex,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, value_enum, default_value = "disc")]
    pub shape: ShapeArg,
    /// Canvas side length.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Disc radius, rectangle half-side, or L arm length.
    #[arg(long, default_value_t = 15.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 200.0)]
    pub fg: f64,
    #[arg(long, default_value_t = 50.0)]
    pub bg: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_image: PathBuf,
    #[arg(long)]
    pub out_fg: PathBuf,
    #[arg(long)]
    pub out_bg: PathBuf,
    /// Ground truth in the output-mask convention.
    #[arg(long)]
    pub out_truth: Option<PathBuf>,
}

fn segment(args: SegmentArgs) -> anyhow::Result<()> {
    let (Some(image_path), Some(fg_path), Some(out_path)) = (args.image, args.fg_mask, args.out_mask) else {
        bail!("--image, --fg-mask and --out-mask are required");
    };
    let mut cfg = SolverConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg = config::parse_config(&text, cfg).with_context(|| format!("in {}", path.display()))?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let image = io::load_image(&image_path)?;
    let (r_ob, r_bg) = io::load_labels(&fg_path, args.bg_mask.as_deref(), image.dims())?;

    let mut solver = Solver::new(&image, &r_ob, &r_bg, &cfg)?;
    let mut log = args.log_csv.as_ref().map(|_| CsvLog::new(&cfg.radii));
    solver.run_with(|rec, _| {
        if let Some(log) = log.as_mut() {
            log.push(rec);
        }
    })?;
    let (u, report) = solver.into_result()?;
    log::info!(
        "{} iterations, stop {:?}, convexity score {:.4}",
        report.iterations,
        report.stop_reason,
        report.convexity_score
    );

    io::write_mask(&out_path, &u)?;
    if let Some(path) = &args.overlay {
        io::write_overlay(path, &image, &u)?;
    }
    if let (Some(path), Some(log)) = (&args.log_csv, &log) {
        fs::write(path, log.as_str()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.report_json {
        fs::write(path, report_json(&report) + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn phantom(args: PhantomArgs) -> anyhow::Result<()> {
    let n = args.size;
    let c = (n as f64 - 1.0) / 2.0;
    let e = args.extent;
    let shape = match args.shape {
        ShapeArg::Disc => Shape::Disc { center: (c, c), radius: e },
        ShapeArg::Rectangle => {
            let half = e.round() as usize;
            Shape::Rectangle {
                x0: (n / 2).saturating_sub(half),
                y0: (n / 2).saturating_sub(half),
                width: 2 * half,
                height: 2 * half,
            }
        }
        ShapeArg::LShape => {
            let arm = e.round() as usize;
            Shape::LShape {
                x0: (n / 2).saturating_sub(arm),
                y0: (n / 2).saturating_sub(arm),
                arm,
            }
        }
        ShapeArg::RandomConvex => Shape::Polygon(random_convex_polygon(&mut ChaCha8Rng::seed_from_u64(args.seed), n, 8.0)),
    };
    let mut spec = PhantomSpec::new(n, n, shape).with_noise(args.noise, args.seed);
    spec.fg_intensity = args.fg;
    spec.bg_intensity = args.bg;
    let p = gen_phantom::<f64>(&spec)?;
    io::write_image(&args.out_image, &p.image)?;
    io::write_labels(&args.out_fg, &p.fg)?;
    io::write_labels(&args.out_bg, &p.bg)?;
    if let Some(path) = &args.out_truth {
        io::write_mask(path, &p.truth)?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs. Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let res = match cli.command {
        Some(Command::Phantom(p)) => phantom(p),
        None => segment(cli.segment),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
