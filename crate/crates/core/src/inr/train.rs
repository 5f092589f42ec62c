use ndarray::Array2;
use rand::Rng;

use super::adam::AdamState;
use super::siren::{coord_grid, encode_coords, siren_init, SirenConfig, SirenGrads, SirenNetwork};
use crate::error::{Error, Result};
use crate::glance::{ms_glance_loss, GlanceConfig, GlanceScope, NanGuard};
use crate::image::{psnr, Image};
use crate::loss::{l1_loss, l2_loss, LossGrad};
use crate::rng::seeded;
use crate::ssim::{s3im_loss, ssim, ssim_loss_grad, SsimConfig};

/// Auxiliary term added to the L2 fitting loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxLoss {
    None,
    GlanceLocal,
    GlanceGlobal,
    MsGlance,
    Ssim,
    S3im,
}

impl AuxLoss {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "l2" => Self::None,
            "l2+glance_local" => Self::GlanceLocal,
            "l2+glance_global" => Self::GlanceGlobal,
            "l2+msglance" => Self::MsGlance,
            "l2+ssim" => Self::Ssim,
            "l2+s3im" => Self::S3im,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "l2",
            Self::GlanceLocal => "l2+glance_local",
            Self::GlanceGlobal => "l2+glance_global",
            Self::MsGlance => "l2+msglance",
            Self::Ssim => "l2+ssim",
            Self::S3im => "l2+s3im",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub aux: AuxLoss,
    pub aux_coeff: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub log_every: usize,
    pub siren: SirenConfig,
    /// Sampling and window settings for the glance terms and S3IM; the scope is set by `aux`.
    pub glance: GlanceConfig,
    pub ssim: SsimConfig,
    /// Steps at which the auxiliary gradient is poisoned with a NaN (exercises the fallback).
    pub inject_nan_at: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 1e-4,
            aux: AuxLoss::None,
            aux_coeff: 0.01,
            grad_clip: 1.0,
            seed: 0,
            log_every: 10,
            siren: SirenConfig::default(),
            glance: GlanceConfig::default(),
            ssim: SsimConfig::default(),
            inject_nan_at: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} is not positive", self.lr)));
        }
        if !(self.aux_coeff >= 0.0 && self.aux_coeff.is_finite()) {
            return Err(Error::InvalidArgument(format!("aux_coeff {} is invalid", self.aux_coeff)));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::InvalidArgument(format!("grad_clip {} is not positive", self.grad_clip)));
        }
        Ok(())
    }

    /// With a zero coefficient the auxiliary term is not evaluated at all.
    fn active_aux(&self) -> AuxLoss {
        if self.aux_coeff == 0.0 {
            AuxLoss::None
        } else {
            self.aux
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub total_loss: f64,
    pub l2_loss: f64,
    pub aux_loss: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub nan_fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub network: SirenNetwork,
    /// Network output after the last step, clamped to `[0, 1]`.
    pub reconstruction: Image,
    pub log: Vec<LogRow>,
    pub nan_fallbacks: usize,
}

/// Loss terms of one evaluation of the fitting objective.
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub total: f64,
    pub l2: f64,
    pub aux: f64,
    /// Gradient of `total` with respect to the network output.
    pub grad: Vec<f64>,
}

/// SSIM settings shrunk to fit images smaller than the window.
pub fn fitted_ssim(cfg: &SsimConfig, h: usize, w: usize) -> SsimConfig {
    SsimConfig {
        window: cfg.window.min(h).min(w),
        ..cfg.clone()
    }
}

fn aux_term<R: Rng + ?Sized>(
    aux: AuxLoss,
    target: &Image,
    pred: &Image,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Option<LossGrad>> {
    let glance = |scope| GlanceConfig {
        scope,
        ..cfg.glance.clone()
    };
    let ssim_cfg = fitted_ssim(&cfg.ssim, target.height(), target.width());
    Ok(Some(match aux {
        AuxLoss::None => return Ok(None),
        AuxLoss::GlanceLocal => ms_glance_loss(target, pred, &glance(GlanceScope::Local), rng)?,
        AuxLoss::GlanceGlobal => ms_glance_loss(target, pred, &glance(GlanceScope::Global), rng)?,
        AuxLoss::MsGlance => ms_glance_loss(target, pred, &glance(GlanceScope::Multi), rng)?,
        AuxLoss::Ssim => ssim_loss_grad(target, pred, &ssim_cfg)?,
        AuxLoss::S3im => {
            let s3 = SsimConfig {
                window: cfg.ssim.window.min(cfg.glance.n).min(cfg.glance.m),
                ..cfg.ssim.clone()
            };
            s3im_loss(target, pred, &cfg.glance, &s3, rng)?
        }
    }))
}

/// `L2 + aux_coeff * aux` at the prediction `pred`. A non-finite auxiliary
/// term is replaced by L1 through `guard`.
pub fn objective<R: Rng + ?Sized>(
    target: &Image,
    pred: &Image,
    cfg: &TrainConfig,
    rng: &mut R,
    guard: &mut NanGuard,
    poison: bool,
) -> Result<ObjectiveValue> {
    let l2 = l2_loss(target, pred)?;
    let Some(mut aux) = aux_term(cfg.active_aux(), target, pred, cfg, rng)? else {
        return Ok(ObjectiveValue {
            total: l2.loss,
            l2: l2.loss,
            aux: 0.0,
            grad: l2.grad,
        });
    };
    if poison {
        if let Some(g) = aux.grad.first_mut() {
            *g = f64::NAN;
        }
    }
    let aux = guard.guard(aux, || l1_loss(target, pred))?;
    let k = cfg.aux_coeff;
    Ok(ObjectiveValue {
        total: l2.loss + k * aux.loss,
        l2: l2.loss,
        aux: aux.loss,
        grad: l2.grad.iter().zip(&aux.grad).map(|(a, b)| a + k * b).collect(),
    })
}

fn output_image(out: &Array2<f64>, h: usize, w: usize) -> Result<Image> {
    Image::new(h, w, out.ncols(), out.iter().copied().collect())
}

/// Objective value and parameter gradients for `net` on `target`.
pub fn loss_and_grads<R: Rng + ?Sized>(
    net: &SirenNetwork,
    target: &Image,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(ObjectiveValue, SirenGrads)> {
    let coords = encode_coords(&coord_grid(target.height(), target.width()), net.config.encoding_octaves);
    let (out, cache) = net.forward(&coords)?;
    let pred = output_image(&out, target.height(), target.width())?;
    let value = objective(target, &pred, cfg, rng, &mut NanGuard::new(), false)?;
    let grad_out = Array2::from_shape_vec(out.dim(), value.grad.clone())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let grads = net.backward(&cache, &grad_out)?;
    Ok((value, grads))
}

/// Fits a SIREN to `target` with Adam. `on_log` sees each log row as it is
/// produced (step 0 and every `log_every` steps), so a caller keeps the
/// partial log if training aborts on a non-finite loss.
pub fn fit_image<F: FnMut(&LogRow)>(target: &Image, cfg: &TrainConfig, mut on_log: F) -> Result<FitResult> {
    cfg.validate()?;
    let (h, w) = (target.height(), target.width());
    let siren = SirenConfig {
        out_channels: target.channels(),
        ..cfg.siren.clone()
    };
    let mut rng = seeded(cfg.seed);
    let mut net = siren_init(&siren, &mut rng)?;
    let coords = encode_coords(&coord_grid(h, w), siren.encoding_octaves);
    let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(&shapes, cfg.lr);
    let mut guard = NanGuard::new();
    let metric_ssim = fitted_ssim(&cfg.ssim, h, w);
    let mut log = Vec::with_capacity(cfg.steps / cfg.log_every + 1);

    for step in 0..=cfg.steps {
        let (out, cache) = net.forward(&coords)?;
        let pred = output_image(&out, h, w)?;
        let value = objective(target, &pred, cfg, &mut rng, &mut guard, cfg.inject_nan_at.contains(&step))?;
        if !value.total.is_finite() || value.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        if step % cfg.log_every == 0 {
            let shown = pred.clamped();
            let row = LogRow {
                step,
                total_loss: value.total,
                l2_loss: value.l2,
                aux_loss: value.aux,
                psnr: psnr(target, &shown)?,
                ssim: ssim(target, &shown, &metric_ssim)?.mean,
                nan_fallbacks: guard.fallbacks(),
            };
            on_log(&row);
            log.push(row);
        }
        if step == cfg.steps {
            return Ok(FitResult {
                network: net,
                reconstruction: pred.clamped(),
                log,
                nan_fallbacks: guard.fallbacks(),
            });
        }
        let grad_out = Array2::from_shape_vec(out.dim(), value.grad)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let mut grads = net.backward(&cache, &grad_out)?;
        grads.clip_global_norm(cfg.grad_clip);
        adam.update(&mut net.params_mut(), &grads.slices())?;
    }
    unreachable!("loop returns at the final step")
}
