use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use msglance::glance::{glance_im_images, GlanceConfig, GlanceScope, Kernel};
use msglance::image::{normalize_unit, psnr};
use msglance::inr::{fit_image, fitted_ssim, synthetic_scene, AuxLoss, LogRow};
use msglance::mri::{magnitude, make_mask, make_phantom, undersample, ColumnMask, PhantomKind};
use msglance::pnm::{load_image, save_image};
use msglance::rng::seeded;
use msglance::ssim::{s3im_loss, ssim, SsimConfig};
use msglance::Image;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Psnr,
    Ssim,
    GlanceLocal,
    GlanceGlobal,
    MsGlance,
    S3im,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::GlanceLocal => "glance-local",
            Metric::GlanceGlobal => "glance-global",
            Metric::MsGlance => "msglance",
            Metric::S3im => "s3im",
        }
    }
}

impl FromStr for Metric {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "psnr" => Metric::Psnr,
            "ssim" => Metric::Ssim,
            "glance-local" => Metric::GlanceLocal,
            "glance-global" => Metric::GlanceGlobal,
            "msglance" => Metric::MsGlance,
            "s3im" => Metric::S3im,
            _ => return Err(CliError::Usage(format!("unknown metric {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernel,
    Lc,
    Shuffles,
    Nm,
    NgMg,
    AirPrior,
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "kernel" => Suite::Kernel,
            "lc" => Suite::Lc,
            "shuffles" => Suite::Shuffles,
            "nm" => Suite::Nm,
            "ngmg" => Suite::NgMg,
            "air-prior" => Suite::AirPrior,
            _ => return Err(CliError::Usage(format!("unknown suite {s:?}"))),
        })
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernel => "kernel",
            Suite::Lc => "lc",
            Suite::Shuffles => "shuffles",
            Suite::Nm => "nm",
            Suite::NgMg => "ngmg",
            Suite::AirPrior => "air-prior",
        }
    }
}

/// Float formatting shared by every CSV: shortest round-trip form, `inf` for infinity.
fn num(v: f64) -> String {
    v.to_string()
}

fn load(path: &Path) -> Result<Image, CliError> {
    load_image(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

fn image_name(stem: &str, img: &Image) -> String {
    format!("{stem}.{}", if img.channels() == 1 { "pgm" } else { "ppm" })
}

fn metric_value(metric: Metric, reference: &Image, pred: &Image, cfg: &RunConfig) -> Result<f64, CliError> {
    if !reference.same_shape(pred) {
        return Err(CliError::Input(format!(
            "shape mismatch: {}x{}x{} vs {}x{}x{}",
            reference.height(),
            reference.width(),
            reference.channels(),
            pred.height(),
            pred.width(),
            pred.channels()
        )));
    }
    let t = &cfg.train;
    let glance = |scope| GlanceConfig {
        scope,
        seed: cfg.seed,
        ..t.glance.clone()
    };
    let mut rng = seeded(cfg.seed);
    Ok(match metric {
        Metric::Psnr => psnr(reference, pred)?,
        Metric::Ssim => ssim(reference, pred, &fitted_ssim(&t.ssim, reference.height(), reference.width()))?.mean,
        Metric::GlanceLocal => glance_im_images(reference, pred, &glance(GlanceScope::Local), &mut rng)?,
        Metric::GlanceGlobal => glance_im_images(reference, pred, &glance(GlanceScope::Global), &mut rng)?,
        Metric::MsGlance => glance_im_images(reference, pred, &glance(GlanceScope::Multi), &mut rng)?,
        Metric::S3im => {
            let s3 = SsimConfig {
                window: t.ssim.window.min(t.glance.n).min(t.glance.m),
                ..t.ssim.clone()
            };
            1.0 - s3im_loss(reference, pred, &t.glance, &s3, &mut rng)?.loss
        }
    })
}

/// Compares two images; writes `metric.csv` with one `{metric, value, seed, config_hash}` row.
pub fn cmd_metric(
    reference: &Path,
    pred: &Path,
    metric: Metric,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<String, CliError> {
    let a = load(reference)?;
    let b = load(pred)?;
    let value = metric_value(metric, &a, &b, cfg)?;
    let mut w = csv::Writer::from_path(out_file(out_dir, "metric.csv")?)?;
    w.write_record(["metric", "value", "seed", "config_hash"])?;
    w.write_record([metric.name(), &num(value), &cfg.seed.to_string(), &cfg.hash()])?;
    w.flush()?;
    Ok(format!("{} {}", metric.name(), num(value)))
}

const LOG_HEADER: [&str; 7] = ["step", "total_loss", "l2_loss", "aux_loss", "psnr", "ssim", "nan_fallbacks"];

fn log_record(r: &LogRow) -> [String; 7] {
    [
        r.step.to_string(),
        num(r.total_loss),
        num(r.l2_loss),
        num(r.aux_loss),
        num(r.psnr),
        num(r.ssim),
        r.nan_fallbacks.to_string(),
    ]
}

/// Fits a SIREN to `target`. Writes `fit_log.csv` (flushed row by row, so a
/// numerical abort leaves the partial log), the clamped reconstruction and
/// `fit_summary.csv`.
pub fn cmd_fit(target: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let img = load(target)?;
    let train = msglance::inr::TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let mut log = csv::Writer::from_path(out_file(out_dir, "fit_log.csv")?)?;
    log.write_record(LOG_HEADER)?;
    log.flush()?;
    let mut write_err = None;
    let result = fit_image(&img, &train, |row| {
        let res = log.write_record(log_record(row)).and_then(|_| log.flush().map_err(csv::Error::from));
        if let Err(e) = res {
            write_err.get_or_insert(e);
        }
    });
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let fit = result?;
    let recon_name = image_name("reconstruction", &fit.reconstruction);
    save_image(&fit.reconstruction, out_dir.join(&recon_name))?;

    let last = fit.log.last().copied().expect("log holds at least step 0");
    let mut summary = csv::Writer::from_path(out_dir.join("fit_summary.csv"))?;
    summary.write_record(["steps", "loss_kind", "final_psnr", "final_ssim", "nan_fallbacks", "seed", "config_hash"])?;
    summary.write_record([
        train.steps.to_string(),
        train.aux.name().to_string(),
        num(last.psnr),
        num(last.ssim),
        fit.nan_fallbacks.to_string(),
        cfg.seed.to_string(),
        cfg.hash(),
    ])?;
    summary.flush()?;
    Ok(format!(
        "fit {} steps={} psnr={} ssim={} nan_fallbacks={} -> {}",
        train.aux.name(),
        train.steps,
        num(last.psnr),
        num(last.ssim),
        fit.nan_fallbacks,
        recon_name
    ))
}

fn build_mask(width: usize, cfg: &RunConfig) -> Result<ColumnMask, CliError> {
    Ok(make_mask(width, cfg.accel, cfg.acs, cfg.mask_kind, &mut seeded(cfg.seed))?)
}

fn mask_stats(mask: &ColumnMask) -> String {
    format!(
        "kept {} of {} effective_acceleration {:.4} acs_columns {}{}",
        mask.kept(),
        mask.width,
        mask.effective_acceleration(),
        mask.acs_columns,
        if mask.acs_exceeds_budget {
            " (calibration block exceeds budget; only it is kept)"
        } else {
            ""
        }
    )
}

/// Generates a column mask; writes `mask.csv` as a single line of 0/1 flags.
pub fn cmd_mask(width: usize, cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let mask = build_mask(width, cfg)?;
    fs::write(out_file(out_dir, "mask.csv")?, mask.to_csv_line() + "\n")?;
    Ok(mask_stats(&mask))
}

/// Zero-filled reconstruction of a grayscale image. An acceleration of
/// exactly 1 keeps every column and bypasses the transform, so the
/// reconstruction equals the (normalized) input.
pub fn cmd_undersample(image: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let img = load(image)?;
    if img.channels() != 1 {
        return Err(CliError::Input("undersampling needs a grayscale image".into()));
    }
    let truth = normalize_unit(&img);
    let (mask, recon) = if cfg.accel == 1.0 {
        (ColumnMask::full(img.width()), truth.clone())
    } else {
        let mask = build_mask(img.width(), cfg)?;
        let out = undersample(&img, &mask)?;
        (mask, magnitude(&out.zero_filled))
    };
    save_image(&recon, out_file(out_dir, "zero_filled.pgm")?)?;
    fs::write(out_dir.join("mask.csv"), mask.to_csv_line() + "\n")?;

    let mut rows = Vec::new();
    for metric in [Metric::Psnr, Metric::Ssim, Metric::MsGlance] {
        rows.push((metric, metric_value(metric, &truth, &recon, cfg)?));
    }
    let mut w = csv::Writer::from_path(out_dir.join("undersample.csv"))?;
    w.write_record(["metric", "value", "seed", "config_hash"])?;
    for (metric, value) in &rows {
        let name = if *metric == Metric::MsGlance { "glance_im" } else { metric.name() };
        w.write_record([name, &num(*value), &cfg.seed.to_string(), &cfg.hash()])?;
    }
    w.flush()?;
    Ok(format!(
        "{}; psnr {} ssim {} glance_im {}",
        mask_stats(&mask),
        num(rows[0].1),
        num(rows[1].1),
        num(rows[2].1)
    ))
}

fn suite_cells(suite: Suite, base: &RunConfig, h: usize, w: usize) -> Vec<(String, RunConfig)> {
    let with = |label: String, f: &dyn Fn(&mut GlanceConfig)| {
        let mut cfg = base.clone();
        f(&mut cfg.train.glance);
        (label, cfg)
    };
    match suite {
        Suite::Kernel => vec![
            with("uniform".into(), &|g| g.kernel = Kernel::Uniform),
            with(format!("gaussian:{}", base.kernel_sigma), &|g| {
                g.kernel = Kernel::Gaussian { sigma: base.kernel_sigma }
            }),
        ],
        Suite::Lc => vec![
            with("glance".into(), &|g| g.lc_augment = false),
            with("lc+glance".into(), &|g| g.lc_augment = true),
        ],
        Suite::Shuffles => [1, 5, 10]
            .into_iter()
            .map(|k| with(k.to_string(), &move |g| g.shuffles = k))
            .collect(),
        Suite::Nm => [(32, 32), (96, 96), (128, 128), (h, w)]
            .into_iter()
            .enumerate()
            .map(|(i, (n, m))| {
                let label = if i == 3 { format!("whole:{n}x{m}") } else { format!("{n}x{m}") };
                with(label, &move |g| {
                    g.n = n;
                    g.m = m;
                })
            })
            .collect(),
        Suite::NgMg => [4, 8, 16, 32]
            .into_iter()
            .map(|k| {
                with(format!("{k}x{k}"), &move |g| {
                    g.n_g = k;
                    g.m_g = k;
                })
            })
            .collect(),
        Suite::AirPrior => vec![
            with("unset".into(), &|g| g.air_threshold = None),
            with("0.01".into(), &|g| g.air_threshold = Some(0.01)),
        ],
    }
}

/// Runs an MS-Glance fit for every cell of an ablation grid. Cell `i` uses
/// seed `seed + i`. Writes the deterministic table `ablate_<suite>.csv` and
/// the wall-clock runtimes separately in `ablate_<suite>_timing.csv`.
///
/// Without `input`, the air-prior suite fits a phantom (it needs a true zero
/// background) and every other suite a synthetic scene.
pub fn cmd_ablate(suite: Suite, input: Option<&Path>, cfg: &RunConfig, out_dir: &Path) -> Result<String, CliError> {
    let img = match input {
        Some(p) => load(p)?,
        None => {
            let s = cfg.ablate_size;
            let mut rng = seeded(cfg.seed);
            match suite {
                Suite::AirPrior => make_phantom(s, s, PhantomKind::Ellipses, &mut rng)?,
                _ => synthetic_scene(s, s, 1, &mut rng)?,
            }
        }
    };
    let mut base = cfg.clone();
    if base.train.aux == AuxLoss::None {
        base.train.aux = AuxLoss::MsGlance;
    }
    let cells = suite_cells(suite, &base, img.height(), img.width());

    let name = suite.name();
    let mut table = csv::Writer::from_path(out_file(out_dir, &format!("ablate_{name}.csv"))?)?;
    let mut timing = csv::Writer::from_path(out_dir.join(format!("ablate_{name}_timing.csv")))?;
    table.write_record(["suite", "cell", "setting", "psnr", "ssim", "nan_fallbacks", "seed", "config_hash"])?;
    timing.write_record(["suite", "cell", "setting", "runtime_s", "seed", "config_hash"])?;
    let mut lines = Vec::new();
    for (i, (label, mut cell)) in cells.into_iter().enumerate() {
        cell.seed = cfg.seed + i as u64;
        let train = msglance::inr::TrainConfig {
            seed: cell.seed,
            ..cell.train.clone()
        };
        let start = Instant::now();
        let fit = fit_image(&img, &train, |_| {})?;
        let secs = start.elapsed().as_secs_f64();
        let last = fit.log.last().copied().expect("log holds at least step 0");
        let hash = cell.hash();
        table.write_record([
            name,
            &i.to_string(),
            &label,
            &num(last.psnr),
            &num(last.ssim),
            &fit.nan_fallbacks.to_string(),
            &cell.seed.to_string(),
            &hash,
        ])?;
        timing.write_record([name, &i.to_string(), &label, &format!("{secs:.3}"), &cell.seed.to_string(), &hash])?;
        lines.push(format!(
            "{name} {label}: psnr {:.3} ssim {:.4} ({secs:.1}s)",
            last.psnr, last.ssim
        ));
    }
    table.flush()?;
    timing.flush()?;
    Ok(lines.join("\n"))
}
