//! `hpcs` command-line frontend.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hpcs::color::rgb_to_lab_normalized_with;
use hpcs::gridgraph::Connectivity;
use hpcs::hierarchy::{self, Bounds, Gamma, LevelConfig, LevelOutput, PipelineOptions};
use hpcs::imgio::{self, LabelMap};
use hpcs::metrics;
use hpcs::{Error, Parallelism, Rag, RgbImage};
use serde_json::Value;

use crate::manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "hpcs", version, about = "Hierarchical piecewise-constant super-regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Superpixels (or supervoxels) of one image or slice directory.
    Segment(SegmentArgs),
    /// Several levels of super-regions, each built on the previous one.
    Hierarchy(HierarchyArgs),
    /// Coarsen a foreign label map with one super-region level.
    Coarsen(CoarsenArgs),
    /// Boundary recall, corrected under-segmentation error and achievable accuracy.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Palette size.
    #[arg(long, default_value_t = 16)]
    k: usize,
    /// Smoothness weight.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Edge contrast: `auto` or a non-negative number.
    #[arg(long, default_value = "auto", value_parser = parse_gamma)]
    gamma: Gamma,
    /// Neighborhood: 4 or 8 for images, 6, 18 or 26 for volumes.
    #[arg(long, value_parser = parse_connectivity)]
    connectivity: Option<Connectivity>,
    /// Features sampled for k-means.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// k-means++ restarts; the lowest inertia wins.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, env = "HPCS_SEED", default_value_t = 0)]
    seed: u64,
    /// Alpha-expansion sweeps at most.
    #[arg(long, default_value_t = hpcs::mrf::DEFAULT_MAX_CYCLES)]
    max_cycles: usize,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug, Clone)]
struct BoundsArgs {
    /// Target region count.
    #[arg(long, conflicts_with_all = ["no_size_constraint", "s_min", "s_max"])]
    n: Option<usize>,
    /// Plain connected components: no splitting, no merging.
    #[arg(long)]
    no_size_constraint: bool,
    /// Explicit minimum region size in pixels.
    #[arg(long, requires = "s_max", conflicts_with = "no_size_constraint")]
    s_min: Option<f64>,
    /// Explicit maximum region size in pixels.
    #[arg(long, requires = "s_min", conflicts_with = "no_size_constraint")]
    s_max: Option<f64>,
}

impl BoundsArgs {
    fn bounds(&self) -> Bounds {
        match (self.n, self.s_min, self.s_max) {
            (Some(n), _, _) => Bounds::Target(n),
            (None, Some(s_min), Some(s_max)) => Bounds::Explicit { s_min, s_max },
            _ => Bounds::Unconstrained,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
struct OutputArgs {
    /// Overlay PNG with boundaries painted red.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Black/white boundary PNG.
    #[arg(long)]
    boundary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// PNG or P6 PPM image, or a directory of slices.
    input: PathBuf,
    /// Label map, `.png` (16-bit) or `.csv`.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    bounds: BoundsArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct HierarchyArgs {
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// One level as `k,lambda,n`; `n` may be `-` for no size constraint.
    /// Repeat per level. Without it a single level uses --k, --lambda, --n.
    #[arg(long = "levels", value_parser = parse_level)]
    levels: Vec<LevelSpec>,
    /// Label map format.
    #[arg(long, default_value = "png", value_parser = ["png", "csv"])]
    format: String,
    /// Also write an overlay per level.
    #[arg(long)]
    overlays: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    bounds: BoundsArgs,
}

#[derive(Args, Debug)]
struct CoarsenArgs {
    /// Foreign label map (`.png` or `.csv`).
    labels: PathBuf,
    image: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    bounds: BoundsArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Segmentation label map.
    seg: PathBuf,
    /// One or more ground-truth label maps.
    #[arg(required = true)]
    gt: Vec<PathBuf>,
    /// Boundary tolerance in pixels (Chebyshev).
    #[arg(long, default_value_t = metrics::DEFAULT_TOLERANCE)]
    tol: usize,
}

#[derive(Debug, Clone, Copy)]
struct LevelSpec {
    k: usize,
    lambda: f64,
    n: Option<usize>,
}

fn parse_gamma(s: &str) -> Result<Gamma, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Gamma::Auto);
    }
    match s.parse::<f64>() {
        Ok(g) if g >= 0.0 && g.is_finite() => Ok(Gamma::Fixed(g)),
        _ => Err(format!("expected `auto` or a non-negative number, got {s:?}")),
    }
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u32 = s.parse().map_err(|_| format!("expected 4, 8, 6, 18 or 26, got {s:?}"))?;
    Connectivity::from_count(n).map_err(|e| e.to_string())
}

fn parse_level(s: &str) -> Result<LevelSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [k, lambda, n] = parts[..] else {
        return Err(format!("expected `k,lambda,n`, got {s:?}"));
    };
    let k = k.parse().map_err(|_| format!("bad k {k:?}"))?;
    let lambda = lambda.parse().map_err(|_| format!("bad lambda {lambda:?}"))?;
    let n = match n {
        "-" => None,
        n => Some(n.parse().map_err(|_| format!("bad n {n:?}"))?),
    };
    Ok(LevelSpec { k, lambda, n })
}

/// Failure with its exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Decode { .. } => 2,
            Error::Invariant(_) | Error::NotSubmodular { .. } => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Hierarchy(a) => cmd_hierarchy(a),
        Command::Coarsen(a) => cmd_coarsen(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

impl PipelineArgs {
    fn mode(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        }
    }

    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            connectivity: self.connectivity,
            samples: self.samples,
            restarts: self.restarts,
            seed: self.seed,
            max_cycles: self.max_cycles,
            parallelism: self.mode(),
            ..PipelineOptions::default()
        }
    }

    fn level(&self, bounds: Bounds) -> LevelConfig {
        LevelConfig {
            k: self.k,
            lambda: self.lambda,
            bounds,
            gamma: self.gamma,
        }
    }
}

fn read_input(path: &Path) -> Result<RgbImage, Failure> {
    if path.is_dir() {
        Ok(imgio::read_volume(path)?)
    } else {
        Ok(imgio::read_image(path)?)
    }
}

fn record_options(m: &mut Manifest, opts: &PipelineOptions, img: &RgbImage) -> Result<(), Failure> {
    let s = img.shape();
    m.set("width", s.width);
    m.set("height", s.height);
    m.set("depth", s.depth);
    m.set("connectivity", opts.connectivity_for(s)?.count());
    m.set("samples", opts.samples);
    m.set("restarts", opts.restarts);
    m.set("seed", opts.seed);
    m.set("max_cycles", opts.max_cycles);
    m.set("size_weighted_unary", opts.size_weighted_unary);
    m.set("parallel", opts.parallelism.is_parallel());
    Ok(())
}

fn record_level(m: &mut Manifest, out: &LevelOutput) {
    let c = &out.config;
    m.set("k", c.k);
    m.set("k_effective", out.palette.k());
    m.set("lambda", c.lambda);
    m.set(
        "gamma_mode",
        match c.gamma {
            Gamma::Auto => "auto",
            Gamma::Fixed(_) => "fixed",
        },
    );
    m.set("gamma", out.gamma);
    m.set("n_target", out.bounds.n_target.map_or(Value::Null, Value::from));
    m.set("s_min", out.bounds.s_min);
    m.set("s_max", out.bounds.s_max);
    m.set("palette_inertia", out.palette.inertia());
    m.set("energy_initial", out.initial_energy);
    m.set("energy", out.energy);
    m.set("sweeps", out.sweeps);
    m.set("regions", out.rag.region_count());
}

fn write_outputs(img: &RgbImage, rag: &Rag, output: &Path, out: &OutputArgs) -> CmdResult {
    imgio::write_rag_label_map(rag, output)?;
    if let Some(ov) = &out.overlay {
        imgio::write_overlay(img, rag, ov, None)?;
    }
    if let Some(bd) = &out.boundary {
        imgio::write_boundary_map(rag, bd)?;
    }
    Ok(())
}

fn finish_manifest(m: &mut Manifest, output: &Path, started: Instant) -> CmdResult {
    m.set("output", output.display().to_string());
    m.set("wall_time_s", started.elapsed().as_secs_f64());
    m.write_beside(output).map_err(|e| io_failure(output, e))?;
    print!("{}", m.to_key_value());
    Ok(())
}

fn cmd_segment(a: SegmentArgs) -> CmdResult {
    let started = Instant::now();
    let img = read_input(&a.input)?;
    let opts = a.pipeline.options();
    let lab = rgb_to_lab_normalized_with(&img, opts.parallelism);
    let out = hierarchy::run_pixel_level(&lab, &a.pipeline.level(a.bounds.bounds()), &opts)?;
    out.rag.check_invariants(Some(&lab.flat_features()))?;
    write_outputs(&img, &out.rag, &a.output, &a.out)?;

    let mut m = Manifest::new("segment");
    m.set("input", a.input.display().to_string());
    record_options(&mut m, &opts, &img)?;
    record_level(&mut m, &out);
    finish_manifest(&mut m, &a.output, started)
}

fn cmd_hierarchy(a: HierarchyArgs) -> CmdResult {
    let started = Instant::now();
    let configs: Vec<LevelConfig> = if a.levels.is_empty() {
        vec![a.pipeline.level(a.bounds.bounds())]
    } else {
        if a.bounds.n.is_some() || a.bounds.s_min.is_some() || a.bounds.no_size_constraint {
            return Err(usage("--levels carries its own n; drop --n/--s-min/--s-max/--no-size-constraint"));
        }
        a.levels
            .iter()
            .map(|l| LevelConfig {
                k: l.k,
                lambda: l.lambda,
                bounds: l.n.map_or(Bounds::Unconstrained, Bounds::Target),
                gamma: a.pipeline.gamma,
            })
            .collect()
    };
    let img = read_input(&a.input)?;
    let opts = a.pipeline.options();
    let lab = rgb_to_lab_normalized_with(&img, opts.parallelism);
    let res = hierarchy::run_hierarchy(&lab, &configs, &opts)?;
    res.check_refinement()?;

    fs::create_dir_all(&a.out_dir).map_err(|e| io_failure(&a.out_dir, e))?;
    for (i, level) in res.levels.iter().enumerate() {
        let n = i + 1;
        let output = a.out_dir.join(format!("level_{n}.{}", a.format));
        let extra = OutputArgs {
            overlay: a.overlays.then(|| a.out_dir.join(format!("level_{n}_overlay.png"))),
            boundary: None,
        };
        write_outputs(&img, &level.rag, &output, &extra)?;
        let mut m = Manifest::new("hierarchy");
        m.set("input", a.input.display().to_string());
        m.set("level", n);
        m.set("levels", res.levels.len());
        record_options(&mut m, &opts, &img)?;
        record_level(&mut m, level);
        finish_manifest(&mut m, &output, started)?;
    }
    Ok(())
}

fn cmd_coarsen(a: CoarsenArgs) -> CmdResult {
    let started = Instant::now();
    let img = read_input(&a.image)?;
    let map = imgio::read_label_map(&a.labels)?;
    let s = img.shape();
    if (map.width, map.height) != (s.width, s.height * s.depth) {
        return Err(Error::dims(format!("{}x{}", s.width, s.height * s.depth), format!("{}x{}", map.width, map.height)).into());
    }
    let opts = a.pipeline.options();
    let lab = rgb_to_lab_normalized_with(&img, opts.parallelism);
    let (base, out) = hierarchy::coarsen(&map.ids, &lab, &a.pipeline.level(a.bounds.bounds()), &opts)?;
    write_outputs(&img, &out.rag, &a.output, &a.out)?;

    let mut m = Manifest::new("coarsen");
    m.set("input", a.image.display().to_string());
    m.set("labels", a.labels.display().to_string());
    m.set("input_regions", base.region_count());
    record_options(&mut m, &opts, &img)?;
    record_level(&mut m, &out);
    finish_manifest(&mut m, &a.output, started)
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let seg = imgio::read_label_map(&a.seg)?;
    let gts = a
        .gt
        .iter()
        .map(imgio::read_label_map)
        .collect::<hpcs::Result<Vec<LabelMap>>>()?;
    let rep = metrics::evaluate(&seg, &gts, a.tol)?;

    println!("{:<32} {:>8} {:>8} {:>8}", "ground truth", "BR", "CUE", "ASA");
    for (path, s) in a.gt.iter().zip(&rep.per_annotation) {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        println!("{name:<32} {:>8.4} {:>8.4} {:>8.4}", s.br, s.cue, s.asa);
    }
    println!("{:<32} {:>8.4} {:>8.4} {:>8.4}", "mean", rep.br, rep.cue, rep.asa);
    println!();
    println!("regions={}", rep.region_count);
    println!("annotations={}", rep.per_annotation.len());
    println!("tol={}", a.tol);
    println!("br={}", rep.br);
    println!("cue={}", rep.cue);
    println!("asa={}", rep.asa);
    Ok(())
}
