//! SSIM and the shuffled-patch SSIM loss used for comparison.

use rand::Rng;

use crate::error::{Error, Result};
use crate::glance::{scatter, select_pixels, GlanceConfig};
use crate::image::Image;
use crate::loss::LossGrad;
use crate::window::{self, gaussian_weights, ChannelMode, Moments, PairGrid, Partials, WindowShape};

#[derive(Debug, Clone, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub stride: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 16,
            stride: 1,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidArgument(format!(
                "ssim window must be at least 2, got {}",
                self.window
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("ssim stride must be at least 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ssim sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.peak).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.peak).powi(2)
    }

    fn shape(&self) -> WindowShape {
        WindowShape {
            rows: self.window,
            cols: self.window,
            stride: self.stride,
        }
    }
}

/// Square Gaussian window, row-major, summing to one.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    gaussian_weights(size, size, sigma)
}

/// Luminance, contrast and structure terms of one window pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimTerms {
    pub luminance: f64,
    pub contrast: f64,
    pub structure: f64,
}

impl SsimTerms {
    pub fn from_moments(m: &Moments, c1: f64, c2: f64, c3: f64) -> Self {
        let sx = m.std_x();
        let sy = m.std_y();
        Self {
            luminance: (2.0 * m.mean_x * m.mean_y + c1)
                / (m.mean_x * m.mean_x + m.mean_y * m.mean_y + c1),
            contrast: (2.0 * sx * sy + c2) / (m.var_x.max(0.0) + m.var_y.max(0.0) + c2),
            structure: (m.cov + c3) / (sx * sy + c3),
        }
    }

    pub fn product(&self) -> f64 {
        self.luminance * self.contrast * self.structure
    }
}

/// SSIM terms of two vectors under optional weights (`None` = uniform).
pub fn ssim_terms(x: &[f64], y: &[f64], weights: Option<&[f64]>, c1: f64, c2: f64, c3: f64) -> Result<SsimTerms> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::ShapeMismatch(format!("vector lengths {} and {}", x.len(), y.len())));
    }
    Ok(SsimTerms::from_moments(&window::moments(x, y, weights), c1, c2, c3))
}

/// Two-term SSIM (the l·c·s product with `c3 = c2 / 2`) and its partials.
fn ssim_score(m: &Moments, c1: f64, c2: f64) -> (f64, Partials) {
    let a1 = 2.0 * m.mean_x * m.mean_y + c1;
    let a2 = 2.0 * m.cov + c2;
    let b1 = m.mean_x * m.mean_x + m.mean_y * m.mean_y + c1;
    let b2 = m.var_x + m.var_y + c2;
    let value = (a1 * a2) / (b1 * b2);
    (
        value,
        Partials {
            d_mean_y: (a2 / b2) * (2.0 * m.mean_x * b1 - 2.0 * m.mean_y * a1) / (b1 * b1),
            d_var_y: -(a1 * a2) / (b1 * b2 * b2),
            d_cov: 2.0 * a1 / (b1 * b2),
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsimResult {
    pub mean: f64,
    /// Per-window values, row-major over window positions, channel-minor.
    pub map: Vec<f64>,
}

fn check_fits(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<()> {
    cfg.validate()?;
    a.check_same_shape(b)?;
    if a.height() < cfg.window || a.width() < cfg.window {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} is smaller than the ssim window {}",
            a.height(),
            a.width(),
            cfg.window
        )));
    }
    Ok(())
}

fn image_grid<'a>(a: &'a Image, b: &'a Image) -> PairGrid<'a> {
    PairGrid {
        rows: a.height(),
        cols: a.width(),
        channels: a.channels(),
        x: a.data(),
        y: b.data(),
    }
}

/// Gaussian-weighted SSIM. Color images are scored per channel.
pub fn ssim(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<SsimResult> {
    check_fits(a, b, cfg)?;
    let weights = gaussian_window(cfg.window, cfg.sigma);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let map = window::evaluate(
        &image_grid(a, b),
        cfg.shape(),
        Some(&weights),
        ChannelMode::Separate,
        None,
        |m| ssim_score(m, c1, c2),
    );
    let mean = map.iter().sum::<f64>() / map.len() as f64;
    Ok(SsimResult { mean, map })
}

/// `1 - SSIM(reference, pred)` and its gradient with respect to `pred`.
pub fn ssim_loss_grad(reference: &Image, pred: &Image, cfg: &SsimConfig) -> Result<LossGrad> {
    check_fits(reference, pred, cfg)?;
    let weights = gaussian_window(cfg.window, cfg.sigma);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let count = cfg.shape().count(pred.height(), pred.width()) * pred.channels();
    let mut grad = vec![0.0; pred.data().len()];
    let map = window::evaluate(
        &image_grid(reference, pred),
        cfg.shape(),
        Some(&weights),
        ChannelMode::Separate,
        Some((&mut grad, -1.0 / count as f64)),
        |m| ssim_score(m, c1, c2),
    );
    let mean = map.iter().sum::<f64>() / map.len() as f64;
    Ok(LossGrad {
        loss: 1.0 - mean,
        grad,
    })
}

/// Shuffled-patch SSIM loss: SSIM over `n x m` grids of randomly selected
/// pixels, averaged over `shuffles` orderings of one selection.
pub fn s3im_loss<R: Rng + ?Sized>(
    reference: &Image,
    pred: &Image,
    glance_cfg: &GlanceConfig,
    ssim_cfg: &SsimConfig,
    rng: &mut R,
) -> Result<LossGrad> {
    ssim_cfg.validate()?;
    reference.check_same_shape(pred)?;
    if glance_cfg.n < ssim_cfg.window || glance_cfg.m < ssim_cfg.window || glance_cfg.shuffles == 0 {
        return Err(Error::InvalidArgument(format!(
            "sample grid {}x{} cannot hold the ssim window {}",
            glance_cfg.n, glance_cfg.m, ssim_cfg.window
        )));
    }
    let sampling = GlanceConfig {
        air_threshold: None,
        ..glance_cfg.clone()
    };
    let selection = select_pixels(reference, &sampling, rng)?;
    let weights = gaussian_window(ssim_cfg.window, ssim_cfg.sigma);
    let (c1, c2) = (ssim_cfg.c1(), ssim_cfg.c2());
    let ch = pred.channels();
    let count = ssim_cfg.shape().count(glance_cfg.n, glance_cfg.m) * ch * glance_cfg.shuffles;
    let scale = -1.0 / count as f64;

    let mut grad = vec![0.0; pred.data().len()];
    let mut cell_grad = vec![0.0; glance_cfg.n * glance_cfg.m * ch];
    let mut total = 0.0;
    for _ in 0..glance_cfg.shuffles {
        let grid_coords = selection.reshuffled(rng);
        let xs = grid_coords.values(reference);
        let ys = grid_coords.values(pred);
        let grid = PairGrid {
            rows: glance_cfg.n,
            cols: glance_cfg.m,
            channels: ch,
            x: &xs,
            y: &ys,
        };
        cell_grad.iter_mut().for_each(|g| *g = 0.0);
        let map = window::evaluate(
            &grid,
            ssim_cfg.shape(),
            Some(&weights),
            ChannelMode::Separate,
            Some((&mut cell_grad, scale)),
            |m| ssim_score(m, c1, c2),
        );
        total += map.iter().sum::<f64>();
        scatter(&mut grad, &cell_grad, &grid_coords.coords, pred.width(), ch);
    }
    Ok(LossGrad {
        loss: 1.0 - total / count as f64,
        grad,
    })
}
