//! Argument parsing and command implementations.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trd_core::diffusion::{infer_stages, Observation};
use trd_core::imgproc::psnr;
use trd_core::influence::{RbfConfig, RbfKind};
use trd_core::jpegsim::jpeg_degrade;
use trd_core::model::{init_model, ModelConfig, Task, TrainedMode, TrdModel};
use trd_core::training::{
    add_noise, greedy_train, joint_train, LbfgsConfig, ParamGroups, TrainConfig, TrainSample, WARM_START_NOTE,
};
use trd_core::{BoundaryMode, Image};

use crate::dataset::{load_dir, make_samples, noise_seeds, sample_patches};
use crate::error::CliError;
use crate::instances::{self, Problem};
use crate::manifest::{manifest_path, Manifest};
use crate::modelfile::{load_model, save_model};
use crate::pgm::{load_pgm, save_pgm};

#[derive(Debug, Parser)]
#[command(name = "trd", version, about = "Trainable nonlinear reaction diffusion for image restoration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a directory of clean PGM images
    Train(TrainArgs),
    /// Denoise one PGM image
    Denoise(ApplyArgs),
    /// Remove JPEG blocking artifacts from one decoded image
    Deblock(DeblockArgs),
    /// Add Gaussian noise or simulate JPEG compression
    Degrade(DegradeArgs),
    /// Report PSNR of a model on a directory of clean images
    Eval(EvalArgs),
    /// Certify analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Write the learned influence and penalty functions as CSV
    ExportInfluence(ExportArgs),
    /// Time inference on synthetic images
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Denoise,
    Deblock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RbfArg {
    Gaussian,
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Greedy,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    DenoiseStage,
    DeblockStage,
    JointDenoise,
    JointDeblock,
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Noise standard deviation (denoising)
    #[arg(long, default_value_t = 25.0)]
    pub sigma: f64,
    /// JPEG quality 1..=100 (deblocking)
    #[arg(long, default_value_t = 10)]
    pub quality: u8,
    #[arg(long, default_value_t = 5)]
    pub stages: usize,
    #[arg(long, default_value_t = 5)]
    pub filter_size: usize,
    /// Filters per stage [default: filter-size² - 1]
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long, value_enum, default_value_t = RbfArg::Gaussian)]
    pub rbf: RbfArg,
    #[arg(long, default_value_t = 63)]
    pub rbf_count: usize,
    #[arg(long, default_value_t = 310.0)]
    pub rbf_radius: f64,
    /// RBF scale [default: center spacing]
    #[arg(long)]
    pub rbf_gamma: Option<f64>,
}

impl ShapeArgs {
    pub fn model_config(&self) -> Result<ModelConfig, CliError> {
        let task = match self.task {
            TaskArg::Denoise => {
                if !(self.sigma.is_finite() && self.sigma >= 0.0) {
                    return Err(CliError::Usage(format!("--sigma must be >= 0, got {}", self.sigma)));
                }
                Task::Denoise { sigma: self.sigma }
            }
            TaskArg::Deblock => {
                if !(1..=100).contains(&self.quality) {
                    return Err(CliError::Usage(format!("--quality must be in 1..=100, got {}", self.quality)));
                }
                Task::Deblock { quality: self.quality }
            }
        };
        let kind = match self.rbf {
            RbfArg::Gaussian => RbfKind::Gaussian,
            RbfArg::Triangular => RbfKind::Triangular,
        };
        let rbf = match self.rbf_gamma {
            Some(g) => RbfConfig::with_gamma(kind, self.rbf_count, self.rbf_radius, g)?,
            None => RbfConfig::new(kind, self.rbf_count, self.rbf_radius)?,
        };
        if self.stages == 0 {
            return Err(CliError::Usage("--stages must be at least 1".into()));
        }
        Ok(ModelConfig {
            task,
            stages: self.stages,
            filter_size: self.filter_size,
            filters: self
                .filters
                .unwrap_or_else(|| (self.filter_size * self.filter_size).saturating_sub(1)),
            rbf,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Greedy)]
    pub mode: ModeArg,
    /// L-BFGS iterations per greedy stage and for the joint pass
    #[arg(long, default_value_t = 200)]
    pub lbfgs_iters: usize,
    /// Directory of clean training images
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of clean held-out images
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Train on random square patches of this side instead of whole images
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Number of patches [default: one per image]
    #[arg(long, requires = "patch_size")]
    pub patches: Option<usize>,
    /// Keep influence functions at their plain initialization
    #[arg(long)]
    pub freeze_influence: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Stop after this many stages (greedy models only)
    #[arg(long)]
    pub stages: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DeblockArgs {
    #[command(flatten)]
    pub apply: ApplyArgs,
    /// Accept a .jpg input: it is decoded to gray and re-quantized with the
    /// simulator's table for the model's quality
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, conflicts_with = "quality", required_unless_present = "quality")]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub quality: Option<u8>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of clean images, degraded on the fly
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub stages: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = ProblemArg::DenoiseStage)]
    pub problem: ProblemArg,
    #[arg(long, default_value_t = 20)]
    pub instances: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Model to time [default: plain init, T=5, 5x5, 24 filters, 63 RBFs]
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TRD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("TRD_THREADS must be a positive integer, got `{v}`")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(a) => train(&a),
        Command::Denoise(a) => denoise(&a),
        Command::Deblock(a) => deblock(&a),
        Command::Degrade(a) => degrade(&a),
        Command::Eval(a) => eval(&a),
        Command::Gradcheck(a) => gradcheck(&a),
        Command::ExportInfluence(a) => export_influence(&a),
        Command::Bench(a) => bench(&a),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean PSNR of the degraded inputs and of the restored outputs.
pub fn evaluate(model: &TrdModel, samples: &[TrainSample], stages: usize) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut before = Vec::with_capacity(samples.len());
    let mut after = Vec::with_capacity(samples.len());
    for s in samples {
        let obs = match &s.qbox {
            Some(q) => Observation::Jpeg(q),
            None => Observation::Noisy,
        };
        let (out, _) = infer_stages(model, &s.input, obs, stages, false)?;
        before.push(psnr(&s.input, &s.target)?);
        after.push(psnr(&out, &s.target)?);
    }
    Ok((before, after))
}

fn train(a: &TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let config = a.shape.model_config()?;
    init_model(&config)?;
    let images = load_dir(&a.data)?;
    let clean = match a.patch_size {
        Some(size) => sample_patches(&images, size, a.patches.unwrap_or(images.len()), a.seed)?,
        None => images,
    };
    let samples = make_samples(&clean, config.task, a.seed)?;
    let groups = if a.freeze_influence {
        ParamGroups::FILTERS_ONLY
    } else {
        ParamGroups::ALL
    };
    let tc = TrainConfig {
        lbfgs: LbfgsConfig::with_max_iters(a.lbfgs_iters),
        groups,
        boundary: BoundaryMode::Symmetric,
    };

    let mut manifest = Manifest::new();
    manifest.section("config");
    manifest.entry("task", format!("{:?}", config.task));
    manifest.entry("stages", config.stages);
    manifest.entry("filter_size", config.filter_size);
    manifest.entry("filters", config.filters);
    manifest.entry("rbf_kind", config.rbf.kind().name());
    manifest.entry("rbf_count", config.rbf.count());
    manifest.entry("rbf_radius", config.rbf.radius());
    manifest.entry("rbf_gamma", config.rbf.gamma());
    manifest.entry("mode", format!("{:?}", a.mode).to_lowercase());
    manifest.entry("lbfgs_iters", a.lbfgs_iters);
    manifest.entry("lbfgs_memory", tc.lbfgs.memory);
    manifest.entry("wolfe_c1", tc.lbfgs.c1);
    manifest.entry("wolfe_c2", tc.lbfgs.c2);
    manifest.entry("grad_tol", tc.lbfgs.grad_tol);
    manifest.entry("boundary", "symmetric");
    manifest.entry("freeze_influence", a.freeze_influence);
    manifest.entry("data", a.data.display());
    manifest.entry(
        "holdout",
        a.holdout.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string()),
    );
    manifest.entry("patch_size", a.patch_size.map_or_else(|| "none".into(), |v| v.to_string()));
    manifest.entry("samples", samples.len());
    manifest.entry("seed", a.seed);
    manifest.entry("warm_start", WARM_START_NOTE);

    let (greedy, report) = greedy_train(&samples, &config, &tc)?;
    manifest.greedy(&report);
    for (t, r) in report.stages.iter().enumerate() {
        println!("stage {}: cost {:.6e} -> {:.6e} ({} iterations)", t + 1, r.history[0], r.final_cost(), r.iterations);
    }
    let model = match a.mode {
        ModeArg::Greedy => greedy,
        ModeArg::Joint => {
            let (joint, jr) = joint_train(&samples, &greedy, &tc)?;
            println!("joint: cost {:.6e} -> {:.6e} ({} iterations)", jr.history[0], jr.final_cost(), jr.iterations);
            manifest.joint(&jr);
            joint
        }
    };
    save_model(&model, &a.out)?;
    manifest.parameter_norms(&model);

    if let Some(dir) = &a.holdout {
        let held = make_samples(&load_dir(dir)?, config.task, a.seed.wrapping_add(1))?;
        let (before, after) = evaluate(&model, &held, model.num_stages())?;
        manifest.section("holdout");
        manifest.entry("input_psnr", format!("{:.2}", mean(&before)));
        manifest.entry("output_psnr", format!("{:.2}", mean(&after)));
        println!("holdout: {:.2} dB -> {:.2} dB", mean(&before), mean(&after));
    }
    manifest.section("run");
    manifest.entry("wall_time_s", format!("{:.3}", started.elapsed().as_secs_f64()));
    manifest.write(&manifest_path(&a.out))?;
    Ok(())
}

fn stage_count(model: &TrdModel, requested: Option<usize>) -> Result<usize, CliError> {
    match requested {
        None => Ok(model.num_stages()),
        Some(t) if t == model.num_stages() => Ok(t),
        Some(_) if model.trained_mode == TrainedMode::Joint => Err(CliError::Usage(
            "jointly trained models must run all of their stages".into(),
        )),
        Some(t) if t == 0 || t > model.num_stages() => Err(CliError::Usage(format!(
            "--stages must be in 1..={}",
            model.num_stages()
        ))),
        Some(t) => Ok(t),
    }
}

fn denoise(a: &ApplyArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    if !matches!(model.task, Task::Denoise { .. }) {
        return Err(CliError::Usage("model was trained for deblocking; use `trd deblock`".into()));
    }
    let stages = stage_count(&model, a.stages)?;
    let input = load_pgm(&a.input)?;
    let (out, _) = infer_stages(&model, &input, Observation::Noisy, stages, false)?;
    save_pgm(&out, &a.output)?;
    Ok(())
}

fn load_gray(path: &Path, strict: bool) -> Result<Image, CliError> {
    let is_jpeg = path
        .extension()
        .is_some_and(|x| x.eq_ignore_ascii_case("jpg") || x.eq_ignore_ascii_case("jpeg"));
    if !is_jpeg {
        return Ok(load_pgm(path)?);
    }
    if !strict {
        return Err(CliError::Usage("JPEG input requires --strict".into()));
    }
    let gray = image::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .into_luma8();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(f64::from).collect();
    Ok(Image::new(h as usize, w as usize, data)?)
}

fn deblock(a: &DeblockArgs) -> Result<(), CliError> {
    let model = load_model(&a.apply.model)?;
    let Task::Deblock { quality } = model.task else {
        return Err(CliError::Usage("model was trained for denoising; use `trd denoise`".into()));
    };
    let stages = stage_count(&model, a.apply.stages)?;
    let input = load_gray(&a.apply.input, a.strict)?;
    // re-quantizing a decoded image recovers its indices, hence the box
    let obs = jpeg_degrade(&input, quality)?;
    let (out, _) = infer_stages(&model, &obs.decoded, Observation::Jpeg(&obs.qbox), stages, false)?;
    save_pgm(&out, &a.apply.output)?;
    Ok(())
}

fn degrade(a: &DegradeArgs) -> Result<(), CliError> {
    let img = load_pgm(&a.input)?;
    let out = match (a.sigma, a.quality) {
        (Some(sigma), None) => add_noise(&img, sigma, a.seed)?,
        (None, Some(q)) => jpeg_degrade(&img, q)?.decoded,
        _ => return Err(CliError::Usage("give exactly one of --sigma or --quality".into())),
    };
    save_pgm(&out, &a.output)?;
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let stages = stage_count(&model, a.stages)?;
    let clean = load_dir(&a.data)?;
    let samples = make_samples(&clean, model.task, a.seed)?;
    let (before, after) = evaluate(&model, &samples, stages)?;
    println!("{:<32} {:>8} {:>8}", "image", "input", "output");
    for ((c, b), o) in clean.iter().zip(&before).zip(&after) {
        println!("{:<32} {b:>8.2} {o:>8.2}", c.name);
    }
    println!("{:<32} {:>8.2} {:>8.2}", "average", mean(&before), mean(&after));
    Ok(())
}

fn gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    let problem = match a.problem {
        ProblemArg::DenoiseStage => Problem::DenoiseStage,
        ProblemArg::DeblockStage => Problem::DeblockStage,
        ProblemArg::JointDenoise => Problem::JointDenoise,
        ProblemArg::JointDeblock => Problem::JointDeblock,
    };
    let mut worst: f64 = 0.0;
    for k in 0..a.instances {
        let seed = a.seed.wrapping_add(k);
        let r = instances::check(problem, seed, a.step)?;
        println!(
            "{} seed {seed}: max rel error {:.3e} over {} coordinates, {} excluded",
            problem.name(),
            r.max_rel_error,
            r.checked,
            r.excluded.len()
        );
        worst = worst.max(r.max_rel_error);
    }
    println!("worst {worst:.3e} (tolerance {:.1e})", a.tolerance);
    if worst < a.tolerance {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("gradient check failed: {worst:.3e} >= {:.1e}", a.tolerance)))
    }
}

fn export_influence(a: &ExportArgs) -> Result<(), CliError> {
    use std::fmt::Write as _;
    let model = load_model(&a.model)?;
    if a.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    std::fs::create_dir_all(&a.out_dir)?;
    let r = model.rbf.radius();
    for (t, stage) in model.stages.iter().enumerate() {
        for (i, m) in stage.mixtures.iter().enumerate() {
            let mut csv = String::from("z,phi,rho\n");
            for k in 0..a.samples {
                let z = -r + 2.0 * r * k as f64 / (a.samples - 1) as f64;
                let _ = writeln!(csv, "{z},{},{}", m.phi_eval(z), m.rho_eval(z));
            }
            let path = a.out_dir.join(format!("stage{}_filter{}.csv", t + 1, i + 1));
            std::fs::write(&path, csv)?;
        }
    }
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<(), CliError> {
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => init_model(&ModelConfig {
            task: Task::Denoise { sigma: 25.0 },
            stages: 5,
            filter_size: 5,
            filters: 24,
            rbf: RbfConfig::new(RbfKind::Gaussian, 63, 310.0)?,
        })?,
    };
    let repeats = a.repeats.max(1);
    for side in [256, 512, 1024] {
        let clean = Image::from_fn(side, side, |y, x| {
            128.0 + 60.0 * ((x as f64) * 0.05).sin() * ((y as f64) * 0.031).cos()
        });
        let seed = noise_seeds(side as u64, 1)[0];
        let input = add_noise(&clean, 25.0, seed)?;
        let obs = jpeg_degrade(&clean, 10)?;
        let started = Instant::now();
        for _ in 0..repeats {
            match model.task {
                Task::Denoise { .. } => {
                    infer_stages(&model, &input, Observation::Noisy, model.num_stages(), false)?;
                }
                Task::Deblock { .. } => {
                    infer_stages(&model, &obs.decoded, Observation::Jpeg(&obs.qbox), model.num_stages(), false)?;
                }
            }
        }
        let secs = started.elapsed().as_secs_f64() / repeats as f64;
        println!("{side}x{side}: {secs:.4} s");
    }
    Ok(())
}
