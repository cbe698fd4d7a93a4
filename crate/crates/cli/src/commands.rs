//! Subcommand implementations. Each returns its results as values and writes
//! files only after all work has succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use fmd_core::cnn::checkpoint;
use fmd_core::cnn::train::synth_sample;
use fmd_core::cnn::{train, EpochStats, Network};
use fmd_core::{
    add_noise, correlation, decompose, error_stats, preprocess_frame, render, residual, rng, sample_coefficients, BeamImage,
    ErrorReport, ModeBasis, ModeCoefficients,
};

use crate::config::RunConfig;
use crate::dataset::{DatasetFile, DatasetHeader, Sample};
use crate::error::{io_err, CliError, Result};
use crate::pgm;

const GEN_STREAM: u64 = 3;
const EVAL_STREAM: u64 = 4;
const EVAL_NOISE_STREAM: u64 = 5;
const BENCH_STREAM: u64 = 6;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Sibling path with `suffix` appended to the full file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn generate_dataset(cfg: &RunConfig, count: usize) -> Result<DatasetFile> {
    let basis = cfg.basis()?;
    let samples = fmd_core::par::map_range(count, |i| -> Result<Sample> {
        let mut r = rng::stream(cfg.seed, &[GEN_STREAM, i as u64]);
        let (image, label) = synth_sample(&basis, cfg.noise_sigma, &mut r)?;
        let image = if cfg.quantize { image.quantized_8bit() } else { image };
        Ok(Sample {
            label: label.iter().map(|&v| v as f32).collect(),
            image: image.data().iter().map(|&v| v as f32).collect(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let grid = basis.grid();
    let fiber = basis.fiber();
    let res = u32::try_from(grid.resolution()).map_err(|_| CliError::Usage("resolution too large".into()))?;
    Ok(DatasetFile {
        header: DatasetHeader {
            core_radius_um: fiber.core_radius(),
            numerical_aperture: fiber.numerical_aperture(),
            wavelength_um: fiber.wavelength(),
            grid_resolution: res,
            window_half_width_um: grid.window_half_width(),
            modes: basis.len() as u32,
            count: u32::try_from(count).map_err(|_| CliError::Usage("count too large".into()))?,
            resolution: res,
        },
        samples,
    })
}

pub fn cmd_gen(cfg: &RunConfig, count: usize, out: &Path) -> Result<DatasetFile> {
    let data = generate_dataset(cfg, count)?;
    data.write(out)?;
    Ok(data)
}

pub fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,loss,holdout_correlation\n");
    for h in history {
        let _ = writeln!(s, "{},{},{}", h.epoch, h.loss, h.holdout_correlation);
    }
    s
}

/// Trains, then writes the checkpoint to `out` and the history to
/// `<out>.history.csv`.
pub fn cmd_train(
    cfg: &RunConfig,
    out: &Path,
    progress: impl FnMut(&EpochStats),
) -> Result<(Network<f32>, Vec<EpochStats>)> {
    let basis = cfg.basis()?;
    let (net, history) = train(&basis, cfg.network()?, &cfg.train, progress)?;
    checkpoint::save(out, &net).map_err(|e| match e {
        fmd_core::Error::Io(source) => CliError::Io {
            path: out.to_path_buf(),
            source,
        },
        other => other.into(),
    })?;
    write_file(&with_suffix(out, ".history.csv"), history_csv(&history))?;
    Ok((net, history))
}

pub fn load_checkpoint(path: &Path) -> Result<Network<f32>> {
    checkpoint::load(path).map_err(|e| match e {
        fmd_core::Error::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other.into(),
    })
}

/// Basis matching a checkpoint's mode count and input resolution.
pub fn basis_for(cfg: &RunConfig, net: &Network<f32>) -> Result<ModeBasis> {
    let n = net.config().n_modes();
    let cfg = RunConfig {
        modes: n,
        ..cfg.clone()
    };
    cfg.basis_at(net.config().input_resolution)
}

#[derive(Debug, Clone)]
pub struct DecomposeRow {
    pub name: String,
    pub coefficients: ModeCoefficients,
    pub correlation: f64,
    pub latency_ms: f64,
}

fn frame_paths(input: &Path) -> Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(input).map_err(io_err(input))?;
    if !meta.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(io_err(input))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(input)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn decompose_csv(rows: &[DecomposeRow]) -> String {
    let n = rows.first().map_or(0, |r| r.coefficients.n_modes());
    let mut s = String::from("file");
    for k in 1..=n {
        let _ = write!(s, ",w_{k}");
    }
    for k in 2..=n {
        let _ = write!(s, ",theta_{k}");
    }
    s.push_str(",correlation,latency_ms\n");
    for r in rows {
        s.push_str(&r.name.replace(',', "_"));
        for v in r.coefficients.weights().iter().chain(r.coefficients.phases()) {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{},{}", r.correlation, r.latency_ms);
    }
    s
}

/// Decomposes a PGM frame or every `.pgm` in a directory. Frames whose size
/// differs from the network input go through centroid cropping and
/// resampling first. With `write_recon`, reconstructions and residuals are
/// written to `<out>.recon/`.
pub fn cmd_decompose(
    cfg: &RunConfig,
    checkpoint: &Path,
    input: &Path,
    out: &Path,
    write_recon: bool,
) -> Result<Vec<DecomposeRow>> {
    let net = load_checkpoint(checkpoint)?;
    let basis = basis_for(cfg, &net)?;
    let res = net.config().input_resolution;
    let paths = frame_paths(input)?;
    if paths.is_empty() {
        return Err(CliError::Usage(format!("{}: no .pgm frames found", input.display())));
    }
    let mut rows = Vec::with_capacity(paths.len());
    let mut recon = Vec::new();
    for path in &paths {
        let raw = pgm::read_pgm(path)?;
        let frame = if raw.height() == res && raw.width() == res {
            raw
        } else {
            preprocess_frame(&raw, res)?
        };
        let r = decompose(&net, &basis, &frame)?;
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        if write_recon {
            recon.push((name.clone(), residual(&frame, &r.reconstructed)?, r.reconstructed.clone()));
        }
        let latency_ms = r.elapsed_ms();
        rows.push(DecomposeRow {
            name,
            coefficients: r.coefficients,
            correlation: r.correlation,
            latency_ms,
        });
    }
    write_file(out, decompose_csv(&rows))?;
    if write_recon {
        let dir = with_suffix(out, ".recon");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (name, res_img, rec) in &recon {
            let stem = Path::new(name).file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            pgm::write_pgm(&dir.join(format!("{stem}_recon.pgm")), rec)?;
            pgm::write_pgm(&dir.join(format!("{stem}_residual.pgm")), res_img)?;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    ModeCount,
    Noise,
    Resolution,
}

impl std::str::FromStr for Sweep {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode_count" => Ok(Self::ModeCount),
            "noise" => Ok(Self::Noise),
            "resolution" => Ok(Self::Resolution),
            other => Err(CliError::Usage(format!(
                "unknown sweep '{other}', expected mode_count, noise or resolution"
            ))),
        }
    }
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Self::ModeCount => "mode_count",
            Self::Noise => "noise",
            Self::Resolution => "resolution",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalRow {
    pub value: f64,
    pub mean_correlation: f64,
    pub errors: ErrorReport,
}

/// Mean correlation and coefficient errors over `count` fresh samples
/// rendered at `render_res`, noised with `sigma`, and brought to network
/// resolution. The network sees only the degraded frame; correlation is
/// scored against the clean pattern at network resolution. Sample `i` uses
/// the same coefficients at every sweep point.
pub fn evaluate_point(
    net: &Network<f32>,
    cfg: &RunConfig,
    render_res: usize,
    sigma: f64,
    count: usize,
    point: u64,
) -> Result<EvalRow> {
    let basis = basis_for(cfg, net)?;
    let n = basis.len();
    let render_basis = if render_res == basis.grid().resolution() {
        basis.clone()
    } else {
        RunConfig { modes: n, ..cfg.clone() }.basis_at(render_res)?
    };
    let res = net.config().input_resolution;
    let results = fmd_core::par::map_range(count, |i| -> Result<(ModeCoefficients, ModeCoefficients, f64)> {
        let truth = sample_coefficients(&mut rng::stream(cfg.seed, &[EVAL_STREAM, i as u64]), n);
        let clean = render(&render_basis, &truth)?;
        let mut noise_rng = rng::stream(cfg.seed, &[EVAL_NOISE_STREAM, point, i as u64]);
        let noisy = add_noise(&clean, sigma, &mut noise_rng);
        let frame = if render_res == res { noisy.normalized() } else { preprocess_frame(&noisy, res)? };
        let r = decompose(net, &basis, &frame)?;
        let ground_truth = if render_res == res && sigma == 0.0 { frame } else { render(&basis, &truth)? };
        let c = correlation(&ground_truth, &r.reconstructed)?;
        Ok((r.coefficients, truth, c))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mean_correlation = results.iter().map(|r| r.2).sum::<f64>() / count.max(1) as f64;
    let (pred, truth): (Vec<_>, Vec<_>) = results.into_iter().map(|(p, t, _)| (p, t)).unzip();
    Ok(EvalRow {
        value: 0.0,
        mean_correlation,
        errors: error_stats(&pred, &truth)?,
    })
}

pub fn eval_csv(sweep: Sweep, rows: &[EvalRow]) -> String {
    let n = rows.iter().map(|r| r.errors.per_mode_weight_error.len()).max().unwrap_or(0);
    let mut s = String::from("sweep,value,samples,mean_correlation,weight_error,phase_error");
    for k in 1..=n {
        let _ = write!(s, ",weight_error_{k}");
    }
    for k in 2..=n {
        let _ = write!(s, ",phase_error_{k}");
    }
    s.push('\n');
    for r in rows {
        let e = &r.errors;
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            sweep.name(),
            r.value,
            e.samples,
            r.mean_correlation,
            e.mean_weight_error,
            e.mean_phase_error
        );
        let cells = |v: &[f64], len: usize| (0..len).map(|k| v.get(k).map_or_else(String::new, |x| x.to_string())).collect::<Vec<_>>();
        for c in cells(&e.per_mode_weight_error, n).into_iter().chain(cells(&e.per_mode_phase_error, n.saturating_sub(1))) {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
    }
    s
}

/// One row per sweep point. The mode-count sweep takes one checkpoint per
/// mode count; the other sweeps use exactly one checkpoint.
pub fn cmd_eval(
    cfg: &RunConfig,
    checkpoints: &[PathBuf],
    sweep: Sweep,
    count: Option<usize>,
    out: &Path,
) -> Result<Vec<EvalRow>> {
    let count = count.unwrap_or(cfg.eval_samples);
    if checkpoints.is_empty() {
        return Err(CliError::Usage("eval needs at least one checkpoint".into()));
    }
    if sweep != Sweep::ModeCount && checkpoints.len() != 1 {
        return Err(CliError::Usage(format!("the {} sweep takes exactly one checkpoint", sweep.name())));
    }
    let nets = checkpoints
        .iter()
        .map(|p| load_checkpoint(p))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    match sweep {
        Sweep::ModeCount => {
            for (i, net) in nets.iter().enumerate() {
                let res = net.config().input_resolution;
                let mut row = evaluate_point(net, cfg, res, cfg.noise_sigma, count, i as u64)?;
                row.value = net.config().n_modes() as f64;
                rows.push(row);
            }
        }
        Sweep::Noise => {
            let net = &nets[0];
            for (i, &sigma) in cfg.sweep_noise.iter().enumerate() {
                let mut row = evaluate_point(net, cfg, net.config().input_resolution, sigma, count, i as u64)?;
                row.value = sigma;
                rows.push(row);
            }
        }
        Sweep::Resolution => {
            let net = &nets[0];
            for (i, &res) in cfg.sweep_resolution.iter().enumerate() {
                let mut row = evaluate_point(net, cfg, res, cfg.noise_sigma, count, i as u64)?;
                row.value = res as f64;
                rows.push(row);
            }
        }
    }
    write_file(out, eval_csv(sweep, &rows))?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub count: usize,
    pub total_ms: f64,
    pub mean_ms: f64,
    /// mean per frame
    pub forward_ms: f64,
    /// mean per frame
    pub disambiguation_ms: f64,
}

impl BenchReport {
    pub fn csv(&self) -> String {
        format!(
            "count,total_ms,mean_ms,forward_ms,disambiguation_ms\n{},{},{},{},{}\n",
            self.count, self.total_ms, self.mean_ms, self.forward_ms, self.disambiguation_ms
        )
    }
}

/// Decomposes `count` synthetic frames one at a time. Frame synthesis is
/// excluded from the timings.
pub fn cmd_bench(cfg: &RunConfig, checkpoint: &Path, count: usize, out: Option<&Path>) -> Result<BenchReport> {
    if count == 0 {
        return Err(CliError::Usage("bench needs --count of at least 1".into()));
    }
    let net = load_checkpoint(checkpoint)?;
    let basis = basis_for(cfg, &net)?;
    let frames: Vec<BeamImage> = fmd_core::par::map_range(count, |i| {
        let mut r = rng::stream(cfg.seed, &[BENCH_STREAM, i as u64]);
        synth_sample(&basis, cfg.noise_sigma, &mut r).map(|s| s.0)
    })
    .into_iter()
    .collect::<fmd_core::Result<Vec<_>>>()?;
    let (mut total, mut forward, mut disamb) = (Duration::ZERO, Duration::ZERO, Duration::ZERO);
    for f in &frames {
        let r = decompose(&net, &basis, f)?;
        total += r.elapsed;
        forward += r.forward_time;
        disamb += r.disambiguation_time;
    }
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let report = BenchReport {
        count,
        total_ms: ms(total),
        mean_ms: ms(total) / count as f64,
        forward_ms: ms(forward) / count as f64,
        disambiguation_ms: ms(disamb) / count as f64,
    };
    if let Some(out) = out {
        write_file(out, report.csv())?;
    }
    Ok(report)
}
