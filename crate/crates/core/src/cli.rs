//! Command-line front end.
//!
//! [`run`] parses arguments and dispatches. Every command writes to
//! caller-supplied streams, so the binary is a thin shell and tests can drive
//! commands in-process. Exit codes: 0 success, 1 usage error, 2 data error.

use crate::density::{render_density, DensityMap};
use crate::eval::{aggregate_report, ImageResult};
use crate::geometry::{Label, Point, PointSet};
use crate::io::{read_coord_file, read_manifest, serialize_coords, ManifestEntry};
use crate::kernel::{
    kernel_gradients, run_gradcheck, run_gradcheck_with, synthesize_kernel, GradCheckConfig, GradCheckReport,
    KernelGradients, KernelParams, Normalization,
};
use crate::khm::{khm_match, MatchConfig, MatchResult, OutOfRadiusMode, SigmaPolicy};
use crate::mdgc::{multiscale_forward, predict_params, FeatureMap, MdgcBlock, DEFAULT_SCALES};
use crate::rng::SeededRng;
use crate::synth::{perturb_points, sample_points, DensityProfile, PerturbConfig, SceneConfig};
use crate::Error;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cellcount", version, about = "Density-adaptive point matching and counting tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match predicted points to ground truth with adaptive radii.
    Match(MatchArgs),
    /// Count and localization metrics over one or more image pairs.
    Eval(EvalArgs),
    /// Dump an anisotropic Gaussian kernel (and gradients) as CSV.
    Kernel(KernelArgs),
    /// Finite-difference check of the analytic kernel gradients.
    Gradcheck(GradcheckArgs),
    /// Generate synthetic ground-truth scenes.
    Synth(SynthArgs),
    /// Time a fixed workload.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Forbid,
    LinearPenalty,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Predicted coordinate file.
    pub pred: PathBuf,
    /// Ground-truth coordinate file.
    pub gt: PathBuf,
    /// Neighbours averaged into each adaptive radius.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Kernel width as a multiple of each prediction's radius.
    #[arg(long, default_value_t = 0.5, conflicts_with = "sigma_fixed")]
    pub sigma_scale: f64,
    /// Fixed kernel width in pixels, shared by all predictions.
    #[arg(long)]
    pub sigma_fixed: Option<f64>,
    /// Lower bound on every radius, in pixels.
    #[arg(long, default_value_t = 1e-3)]
    pub radius_floor: f64,
    /// Treatment of pairs beyond the radius.
    #[arg(long, value_enum, default_value_t = ModeArg::Forbid)]
    pub mode: ModeArg,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl MatchArgs {
    pub fn config(&self) -> MatchConfig {
        MatchConfig {
            k: self.k,
            sigma_policy: match self.sigma_fixed {
                Some(s) => SigmaPolicy::Fixed(s),
                None => SigmaPolicy::RadiusScaled(self.sigma_scale),
            },
            radius_floor: self.radius_floor,
            out_of_radius_mode: match self.mode {
                ModeArg::Forbid => OutOfRadiusMode::Forbid,
                ModeArg::LinearPenalty => OutOfRadiusMode::LinearPenalty,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted coordinate file; repeat, paired in order with --gt.
    #[arg(long, required_unless_present = "manifest")]
    pub pred: Vec<PathBuf>,
    /// Ground-truth coordinate file; repeat, paired in order with --pred.
    #[arg(long, required_unless_present = "manifest")]
    pub gt: Vec<PathBuf>,
    /// Case list, one `pred<TAB>gt` line per image.
    #[arg(long, conflicts_with_all = ["pred", "gt"])]
    pub manifest: Option<PathBuf>,
    /// Largest matched distance counted as a true positive, in pixels.
    #[arg(long, default_value_t = 5.0)]
    pub tolerance: f64,
    /// Neighbours averaged into each adaptive radius.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Also write the report as `key: value` lines.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Evaluate the readable cases instead of aborting on the first bad one.
    #[arg(long)]
    pub skip_unreadable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Raw,
    UnitSum,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Raw => Normalization::Raw,
            NormArg::UnitSum => Normalization::UnitSum,
        }
    }
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dy: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sx: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sy: f64,
    /// Odd kernel side length.
    #[arg(long, default_value_t = 9)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = NormArg::Raw)]
    pub normalize: NormArg,
    /// Append the five gradient grids (always of the raw kernel).
    #[arg(long)]
    pub gradients: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 9)]
    pub size: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = GradCheckConfig::default().seed)]
    pub seed: u64,
    /// Perturb the analytic σ gradient by 1% (negative control).
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Uniform,
    TwoCluster,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityFormat {
    Csv,
    Binary,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for the generated files; created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    /// Points per scene.
    #[arg(long, short, default_value_t = 100)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = ProfileArg::Uniform)]
    pub profile: ProfileArg,
    #[arg(long, default_value_t = 4.0)]
    pub spacing_dense: f64,
    #[arg(long, default_value_t = 16.0)]
    pub spacing_sparse: f64,
    /// Half-width of the uniform position jitter, in pixels.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write perturbed predictions and a manifest. Predictions keep
    /// sub-pixel noise until serialization rounds them.
    #[arg(long)]
    pub predictions: bool,
    #[arg(long, default_value_t = 0.1)]
    pub drop_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub spurious_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    /// Render a density map with this Gaussian width.
    #[arg(long)]
    pub density_sigma: Option<f64>,
    #[arg(long, value_enum, default_value_t = DensityFormat::Binary)]
    pub density_format: DensityFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 200 predictions against 200 ground-truth points.
    MatchSmall,
    /// 2000 predictions against 2000 ground-truth points.
    MatchLarge,
    /// 8×64×64 feature map through the multi-scale block.
    Conv,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub preset: Preset,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// A failed command: the message and the exit code to report.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidK(_) | Error::InvalidSigma(_) | Error::InvalidParameter { .. } | Error::InvalidKernelSize(_) => {
                EXIT_USAGE
            }
            _ => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Match(a) => cmd_match(a, out, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Kernel(a) => cmd_kernel(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::Synth(a) => cmd_synth(a, out, err),
        Command::Bench(a) => cmd_bench(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_points(path: &Path, label: Label) -> std::result::Result<PointSet, Failure> {
    read_coord_file(path, label).map_err(|e| match e {
        Error::Io(io) => Failure::data(format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn write_or_print(path: Option<&Path>, text: &str, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::data(format!("{}: {e}", p.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

/// Writes coordinates, warning on `err` when any had to be rounded.
pub fn write_points(path: &Path, points: &PointSet, err: &mut dyn Write) -> std::result::Result<(), Failure> {
    let text = serialize_coords(points)?;
    if text.rounded > 0 {
        let _ = writeln!(
            err,
            "warning: rounded {} of {} points to integers in {}",
            text.rounded,
            points.len(),
            path.display()
        );
    }
    fs::write(path, text.text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// `key: value` match report. Floats use shortest round-trip formatting, so
/// parsing a value back gives the exact library result.
pub fn match_report(n_pred: usize, n_gt: usize, m: &MatchResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pred_count: {n_pred}");
    let _ = writeln!(s, "gt_count: {n_gt}");
    let _ = writeln!(s, "matched: {}", m.pairs.len());
    let _ = writeln!(s, "total_weight: {}", m.total_weight);
    let list = |v: &[usize]| v.iter().map(|i| format!(" {i}")).collect::<String>();
    let _ = writeln!(s, "unmatched_pred:{}", list(&m.unmatched_pred));
    let _ = writeln!(s, "unmatched_gt:{}", list(&m.unmatched_gt));
    for (i, p) in m.pairs.iter().enumerate() {
        let _ = writeln!(s, "pair.{i}: {} {} {} {}", p.pred, p.gt, p.distance, p.weight);
    }
    s
}

pub fn cmd_match(a: &MatchArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CmdResult {
    let cfg = a.config();
    cfg.validate()?;
    let pred = read_points(&a.pred, Label::Predicted)?;
    let gt = read_points(&a.gt, Label::GroundTruth)?;
    let m = khm_match(&pred, &gt, &cfg)?;
    let report = match_report(pred.len(), gt.len(), &m);
    write_or_print(a.output.as_deref(), &report, out)?;
    if a.output.is_some() {
        writeln!(out, "matched {} of {} predictions to {} ground-truth points", m.pairs.len(), pred.len(), gt.len())?;
    }
    Ok(EXIT_OK)
}

fn eval_case(entry: &ManifestEntry, cfg: &MatchConfig, tolerance: f64) -> std::result::Result<ImageResult, Failure> {
    let pred = read_points(&entry.pred, Label::Predicted)?;
    let gt = read_points(&entry.gt, Label::GroundTruth)?;
    let m = khm_match(&pred, &gt, cfg)?;
    Ok(ImageResult::from_match(entry.id(), &m, tolerance)?)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if !(a.tolerance > 0.0 && a.tolerance.is_finite()) {
        return Err(Failure::usage(format!("--tolerance must be positive, got {}", a.tolerance)));
    }
    let cfg = MatchConfig { k: a.k, ..MatchConfig::default() };
    cfg.validate()?;
    let cases = match &a.manifest {
        Some(path) => read_manifest(path).map_err(|e| match e {
            Error::Io(io) => Failure::data(format!("{}: {io}", path.display())),
            other => other.into(),
        })?,
        None => {
            if a.pred.len() != a.gt.len() {
                return Err(Failure::usage(format!(
                    "{} --pred files but {} --gt files",
                    a.pred.len(),
                    a.gt.len()
                )));
            }
            a.pred
                .iter()
                .zip(&a.gt)
                .enumerate()
                .map(|(i, (p, g))| ManifestEntry { line: i + 1, pred: p.clone(), gt: g.clone() })
                .collect()
        }
    };
    if cases.is_empty() {
        return Err(Failure::data("no cases to evaluate"));
    }
    // Indexed parallel collect keeps manifest order.
    let results: Vec<_> = cases.par_iter().map(|c| eval_case(c, &cfg, a.tolerance)).collect();
    let mut images = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (case, r) in cases.iter().zip(results) {
        match r {
            Ok(img) => images.push(img),
            Err(f) => {
                failed += 1;
                writeln!(err, "unreadable case {} (line {}): {}", case.id(), case.line, f.message)?;
            }
        }
    }
    if failed > 0 && !a.skip_unreadable {
        return Err(Failure::data(format!("{failed} unreadable case(s); pass --skip-unreadable to continue")));
    }
    if images.is_empty() {
        return Err(Failure::data("no readable cases"));
    }
    let report = aggregate_report(&images)?;
    out.write_all(report.to_table().as_bytes())?;
    if let Some(path) = &a.report {
        fs::write(path, report.to_key_values()).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    }
    Ok(EXIT_OK)
}

fn push_grid(csv: &mut String, name: &str, size: usize, values: &[f64]) {
    for (idx, v) in values.iter().enumerate() {
        let _ = writeln!(csv, "{name},{},{},{v}", idx / size, idx % size);
    }
}

/// Long-format CSV: `grid,row,col,value`, kernel first, then gradients.
pub fn kernel_csv(params: &KernelParams, size: usize, norm: Normalization, gradients: bool) -> crate::Result<String> {
    let k = synthesize_kernel(params, size, norm)?;
    let mut csv = String::from("grid,row,col,value\n");
    push_grid(&mut csv, "kernel", size, k.values());
    if gradients {
        let g = kernel_gradients(params, size)?;
        for (name, grid) in KernelGradients::NAMES.iter().zip(g.grids()) {
            push_grid(&mut csv, &format!("d_{name}"), size, grid);
        }
    }
    Ok(csv)
}

pub fn cmd_kernel(a: &KernelArgs, out: &mut dyn Write) -> CmdResult {
    let params = KernelParams::new(a.sigma, a.dx, a.dy, a.sx, a.sy)?;
    let csv = kernel_csv(&params, a.size, a.normalize.into(), a.gradients)?;
    write_or_print(a.output.as_deref(), &csv, out)?;
    Ok(EXIT_OK)
}

/// Gradient routine with the σ derivative scaled by 1.01.
pub fn corrupted_gradients(p: &KernelParams, size: usize) -> crate::Result<KernelGradients> {
    let mut g = kernel_gradients(p, size)?;
    g.d_sigma.iter_mut().for_each(|v| *v *= 1.01);
    Ok(g)
}

fn gradcheck_text(cfg: &GradCheckConfig, r: &GradCheckReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "trials: {}", cfg.trials);
    let _ = writeln!(s, "size: {}", cfg.size);
    let _ = writeln!(s, "entries_checked: {}", r.entries_checked);
    for (name, e) in KernelGradients::NAMES.iter().zip(r.max_rel_error) {
        let _ = writeln!(s, "max_rel_error.{name}: {e:.3e}");
    }
    let _ = writeln!(s, "max_rel_error: {:.3e}", r.overall());
    if let Some(w) = &r.worst {
        let _ = writeln!(
            s,
            "worst: {} trial {} at ({}, {}), analytic {:e}, numeric {:e}",
            w.param, w.trial, w.u, w.v, w.analytic, w.numeric
        );
        let p = w.params;
        let _ = writeln!(
            s,
            "worst_params: sigma {} dx {} dy {} sx {} sy {}",
            p.sigma, p.dx, p.dy, p.sx, p.sy
        );
    }
    let _ = writeln!(s, "tolerance: {:e}", cfg.tolerance);
    let _ = writeln!(s, "status: {}", if r.passed { "pass" } else { "FAIL" });
    s
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    if !(a.tolerance >= 0.0 && a.tolerance.is_finite()) {
        return Err(Failure::usage(format!("--tolerance must be non-negative, got {}", a.tolerance)));
    }
    let cfg = GradCheckConfig {
        trials: a.trials,
        size: a.size,
        epsilon: a.epsilon,
        tolerance: a.tolerance,
        seed: a.seed,
        ..GradCheckConfig::default()
    };
    let report = if a.corrupt { run_gradcheck_with(&cfg, corrupted_gradients)? } else { run_gradcheck(&cfg)? };
    out.write_all(gradcheck_text(&cfg, &report).as_bytes())?;
    Ok(if report.passed { EXIT_OK } else { EXIT_DATA })
}

/// Rounds to the pixel grid and keeps every coordinate inside the image.
fn to_pixels(points: &PointSet, width: usize, height: usize) -> crate::Result<PointSet> {
    let pts = points
        .iter()
        .map(|p| Point {
            x: p.x.round().min(width as f64 - 1.0),
            y: p.y.round().min(height as f64 - 1.0),
        })
        .collect();
    PointSet::new(pts, points.label)
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let profile = match a.profile {
        ProfileArg::Uniform => DensityProfile::Uniform,
        ProfileArg::Gradient => DensityProfile::Gradient,
        ProfileArg::TwoCluster => {
            DensityProfile::TwoCluster { spacing_dense: a.spacing_dense, spacing_sparse: a.spacing_sparse }
        }
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::data(format!("{}: {e}", a.out_dir.display())))?;
    let mut manifest = String::new();
    for i in 0..a.scenes {
        let seed = a.seed.wrapping_add(i as u64);
        let cfg = SceneConfig {
            width: a.width,
            height: a.height,
            n_points: a.n,
            density_profile: profile,
            jitter: a.jitter,
            seed,
        };
        let gt = to_pixels(&sample_points(&cfg)?, a.width, a.height)?;
        let stem = format!("scene_{i:03}");
        let gt_name = format!("{stem}_gt.txt");
        fs::write(a.out_dir.join(&gt_name), serialize_coords(&gt)?.text)?;
        if a.predictions {
            let pcfg = PerturbConfig {
                drop_rate: a.drop_rate,
                spurious_rate: a.spurious_rate,
                noise_sigma: a.noise_sigma,
                width: a.width,
                height: a.height,
                seed: seed ^ 0x9e37_79b9_7f4a_7c15,
            };
            let pred = perturb_points(&gt, &pcfg)?;
            let pred_name = format!("{stem}_pred.txt");
            write_points(&a.out_dir.join(&pred_name), &pred, err)?;
            let _ = writeln!(manifest, "{pred_name}\t{gt_name}");
        }
        if let Some(sigma) = a.density_sigma {
            let map = render_density(&gt, sigma, a.height, a.width)?;
            write_density(&a.out_dir, &stem, &map, a.density_format)?;
        }
    }
    if a.predictions {
        fs::write(a.out_dir.join("manifest.tsv"), manifest)?;
    }
    writeln!(out, "wrote {} scene(s) to {}", a.scenes, a.out_dir.display())?;
    Ok(EXIT_OK)
}

fn write_density(dir: &Path, stem: &str, map: &DensityMap, format: DensityFormat) -> std::result::Result<(), Failure> {
    let (name, csv) = match format {
        DensityFormat::Csv => (format!("{stem}_density.csv"), true),
        DensityFormat::Binary => (format!("{stem}_density.dmap"), false),
    };
    let mut file = std::io::BufWriter::new(fs::File::create(dir.join(name))?);
    if csv { map.write_csv(&mut file)? } else { map.write_binary(&mut file)? }
    Ok(file.flush()?)
}

fn bench_match(n: usize, seed: u64, s: &mut String) -> crate::Result<()> {
    let side = 1024;
    let cfg = SceneConfig {
        width: side,
        height: side,
        n_points: n,
        density_profile: DensityProfile::Uniform,
        jitter: 0.0,
        seed,
    };
    let gt = sample_points(&cfg)?;
    let pcfg = PerturbConfig {
        drop_rate: 0.0,
        spurious_rate: 0.0,
        noise_sigma: 1.0,
        width: side,
        height: side,
        seed: seed + 1,
    };
    let pred = perturb_points(&gt, &pcfg)?;
    let start = Instant::now();
    let m = khm_match(&pred, &gt, &MatchConfig::default())?;
    let secs = start.elapsed().as_secs_f64();
    let _ = writeln!(s, "pred_points: {}", pred.len());
    let _ = writeln!(s, "gt_points: {}", gt.len());
    let _ = writeln!(s, "matched: {}", m.pairs.len());
    let _ = writeln!(s, "seconds: {secs:.6}");
    Ok(())
}

fn bench_conv(seed: u64, s: &mut String) -> crate::Result<()> {
    let (c, h, w) = (8, 64, 64);
    let mut rng = SeededRng::new(seed);
    let input = FeatureMap::from_fn(c, h, w, |_, _, _| rng.range(-1.0, 1.0))?;
    let block = MdgcBlock::new(c, DEFAULT_SCALES.to_vec());
    let field = predict_params(&input, &block.head)?;
    let _ = writeln!(s, "input: {c}x{h}x{w}");
    for &k in &DEFAULT_SCALES {
        let start = Instant::now();
        multiscale_forward(&input, &field, &[k], block.norm)?;
        let _ = writeln!(s, "scale.{k}.seconds: {:.6}", start.elapsed().as_secs_f64());
    }
    let start = Instant::now();
    let (y, _) = block.forward(&input)?;
    let _ = writeln!(s, "output: {}x{}x{}", y.channels(), y.height(), y.width());
    let _ = writeln!(s, "block.seconds: {:.6}", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    let mut s = String::new();
    let name = a.preset.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
    let _ = writeln!(s, "preset: {name}");
    match a.preset {
        Preset::MatchSmall => bench_match(200, a.seed, &mut s)?,
        Preset::MatchLarge => bench_match(2000, a.seed, &mut s)?,
        Preset::Conv => bench_conv(a.seed, &mut s)?,
    }
    out.write_all(s.as_bytes())?;
    Ok(EXIT_OK)
}
