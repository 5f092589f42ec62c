//! Glance vectors, the Glance index and the MS-Glance loss.
//!
//! A Glance vector is a flattened `n_g x m_g` window. Local vectors slide over
//! the image lattice itself; global vectors slide over an `n x m` matrix built
//! from randomly chosen pixels, so each window mixes pixels from anywhere in
//! the image. Two images are compared by pairing vectors extracted the same
//! way and averaging the stabilized correlation
//!
//! ```text
//! S(v0, v1) = (cov(v0, v1) + c_s) / (std(v0) * std(v1) + c_s)
//! ```
//!
//! over all pairs (GlanceIM). The loss is `1 - GlanceIM`.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::image::{Image, PixelCoord};
use crate::loss::LossGrad;
use crate::window::{
    self, gaussian_weights, std_to_var_partial, ChannelMode, Moments, PairGrid, Partials,
    WindowShape,
};

/// Luminance constant `(0.01 * peak)^2` with unit peak.
pub const SSIM_C1: f64 = 0.01 * 0.01;
/// Contrast constant `(0.03 * peak)^2` with unit peak.
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Uniform,
    Gaussian { sigma: f64 },
}

/// Which Glance vector sets enter the measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlanceScope {
    Local,
    Global,
    Multi,
}

/// How local and global indices are averaged when both are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// One mean over the union of all pairs.
    Union,
    /// Mean of the local mean and the global mean.
    Separate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlanceConfig {
    pub n: usize,
    pub m: usize,
    pub n_g: usize,
    pub m_g: usize,
    pub stride: usize,
    pub c_s: f64,
    pub shuffles: usize,
    /// Air prior: only pixels whose reference intensity exceeds this are sampled.
    pub air_threshold: Option<f64>,
    pub kernel: Kernel,
    pub lc_augment: bool,
    pub scope: GlanceScope,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for GlanceConfig {
    fn default() -> Self {
        Self {
            n: 96,
            m: 96,
            n_g: 16,
            m_g: 16,
            stride: 1,
            c_s: 0.03,
            shuffles: 10,
            air_threshold: None,
            kernel: Kernel::Uniform,
            lc_augment: false,
            scope: GlanceScope::Multi,
            aggregation: Aggregation::Union,
            seed: 0,
        }
    }
}

impl GlanceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_g == 0 || self.m_g == 0 || self.n_g > self.n || self.m_g > self.m {
            return bad(format!(
                "window {}x{} must fit the sample grid {}x{}",
                self.n_g, self.m_g, self.n, self.m
            ));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.c_s > 0.0) {
            return bad(format!("c_s must be positive, got {}", self.c_s));
        }
        if self.shuffles == 0 {
            return bad("shuffles must be at least 1".into());
        }
        if let Some(t) = self.air_threshold {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("air threshold {t} outside [0, 1]"));
            }
        }
        if let Kernel::Gaussian { sigma } = self.kernel {
            if !(sigma > 0.0) {
                return bad(format!("gaussian sigma must be positive, got {sigma}"));
            }
        }
        Ok(())
    }

    pub fn window_shape(&self) -> WindowShape {
        WindowShape {
            rows: self.n_g,
            cols: self.m_g,
            stride: self.stride,
        }
    }

    /// Per-cell window weights; `None` for the uniform kernel.
    pub fn cell_weights(&self) -> Option<Vec<f64>> {
        match self.kernel {
            Kernel::Uniform => None,
            Kernel::Gaussian { sigma } => Some(gaussian_weights(self.n_g, self.m_g, sigma)),
        }
    }

    fn score(&self) -> impl Fn(&Moments) -> (f64, Partials) {
        let c_s = self.c_s;
        let lc = self.lc_augment;
        move |m: &Moments| {
            if lc {
                lc_score(m, c_s)
            } else {
                glance_score(m, c_s)
            }
        }
    }
}

pub(crate) fn glance_score(m: &Moments, c_s: f64) -> (f64, Partials) {
    let sx = m.std_x();
    let sy = m.std_y();
    let num = m.cov + c_s;
    // sqrt of the variance product keeps S(v, v) == 1 exactly
    let den = (m.var_x.max(0.0) * m.var_y.max(0.0)).sqrt() + c_s;
    let s = num / den;
    if s > 1.0 {
        // perfectly correlated up to rounding: 1 is the maximum, so the slope is zero
        return (1.0, Partials::default());
    }
    let d_std_y = -num * sx / (den * den);
    (
        s,
        Partials {
            d_mean_y: 0.0,
            d_var_y: std_to_var_partial(d_std_y, sy),
            d_cov: 1.0 / den,
        },
    )
}

pub(crate) fn lc_score(m: &Moments, c_s: f64) -> (f64, Partials) {
    let (s, ps) = glance_score(m, c_s);
    let sx = m.std_x();
    let sy = m.std_y();

    let l_num = 2.0 * m.mean_x * m.mean_y + SSIM_C1;
    let l_den = m.mean_x * m.mean_x + m.mean_y * m.mean_y + SSIM_C1;
    let l = l_num / l_den;
    let dl_dmean = (2.0 * m.mean_x * l_den - 2.0 * m.mean_y * l_num) / (l_den * l_den);

    let c_num = 2.0 * sx * sy + SSIM_C2;
    let c_den = m.var_x.max(0.0) + m.var_y.max(0.0) + SSIM_C2;
    let (c, dc_dvar) = if c_num > c_den {
        // equal spreads up to rounding; same reasoning as the clamp in `glance_score`
        (1.0, 0.0)
    } else {
        (
            c_num / c_den,
            std_to_var_partial(2.0 * sx / c_den, sy) - c_num / (c_den * c_den),
        )
    };

    (
        l * c * s,
        Partials {
            d_mean_y: dl_dmean * c * s,
            d_var_y: l * (dc_dvar * s + c * ps.d_var_y),
            d_cov: l * c * ps.d_cov,
        },
    )
}

fn check_pair(v0: &[f64], v1: &[f64]) -> Result<()> {
    if v0.len() != v1.len() {
        return Err(Error::ShapeMismatch(format!(
            "vector lengths {} and {}",
            v0.len(),
            v1.len()
        )));
    }
    if v0.len() < 2 {
        return Err(Error::InvalidArgument("glance vectors need at least two elements".into()));
    }
    Ok(())
}

/// Stabilized Pearson correlation of two vectors. `weights`, when given, must
/// sum to one and match the vector length.
pub fn glance_index(v0: &[f64], v1: &[f64], c_s: f64, weights: Option<&[f64]>) -> Result<f64> {
    check_pair(v0, v1)?;
    Ok(glance_score(&window::moments(v0, v1, weights), c_s).0)
}

/// Glance index multiplied by SSIM's luminance and contrast terms.
pub fn glance_index_lc(v0: &[f64], v1: &[f64], c_s: f64, weights: Option<&[f64]>) -> Result<f64> {
    check_pair(v0, v1)?;
    Ok(lc_score(&window::moments(v0, v1, weights), c_s).0)
}

/// The ordered pixel selection behind global Glance vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` arrangement of sampled pixels.
    pub coords: Vec<PixelCoord>,
    /// Set when there were fewer eligible pixels than cells and sampling fell
    /// back to drawing with replacement.
    pub degenerate: bool,
}

impl SampleGrid {
    /// Intensities of `img` at the grid cells, channel-interleaved.
    pub fn values(&self, img: &Image) -> Vec<f64> {
        gather(img, &self.coords)
    }

    /// Same pixels in a fresh random order.
    pub fn reshuffled<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleGrid {
        let mut coords = self.coords.clone();
        coords.shuffle(rng);
        SampleGrid {
            coords,
            ..self.clone()
        }
    }
}

fn gather(img: &Image, coords: &[PixelCoord]) -> Vec<f64> {
    let ch = img.channels();
    let mut out = Vec::with_capacity(coords.len() * ch);
    for c in coords {
        let base = (c.row * img.width() + c.col) * ch;
        out.extend_from_slice(&img.data()[base..base + ch]);
    }
    out
}

/// Draws `n * m` pixels of `reference` uniformly without replacement. With an
/// air threshold only pixels brighter than it are eligible.
pub fn select_pixels<R: Rng + ?Sized>(
    reference: &Image,
    cfg: &GlanceConfig,
    rng: &mut R,
) -> Result<SampleGrid> {
    let w = reference.width();
    let want = cfg.n * cfg.m;
    let eligible: Vec<PixelCoord> = match cfg.air_threshold {
        None => (0..reference.pixel_count())
            .map(|i| PixelCoord::new(i / w, i % w))
            .collect(),
        Some(t) => (0..reference.pixel_count())
            .map(|i| PixelCoord::new(i / w, i % w))
            .filter(|&p| reference.pixel_intensity(p) > t)
            .collect(),
    };
    if eligible.is_empty() {
        return Err(Error::NoEligiblePixels(cfg.air_threshold.unwrap_or(0.0)));
    }
    let (coords, degenerate) = if eligible.len() >= want {
        let picks = index::sample(rng, eligible.len(), want);
        (picks.iter().map(|i| eligible[i]).collect(), false)
    } else {
        let coords = (0..want)
            .map(|_| eligible[rng.gen_range(0..eligible.len())])
            .collect();
        (coords, true)
    };
    Ok(SampleGrid {
        rows: cfg.n,
        cols: cfg.m,
        coords,
        degenerate,
    })
}

/// Flattened window vectors with the pixel each element came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GlanceVectorSet {
    pub window_rows: usize,
    pub window_cols: usize,
    pub channels: usize,
    /// Each vector is channel-major: all of channel 0's window, then channel 1's, ...
    pub vectors: Vec<Vec<f64>>,
    pub provenance: Vec<Vec<PixelCoord>>,
}

impl GlanceVectorSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Element weights matching the vector layout, or `None` for uniform.
    fn element_weights(&self, kernel: Kernel) -> Option<Vec<f64>> {
        match kernel {
            Kernel::Uniform => None,
            Kernel::Gaussian { sigma } => {
                let cell = gaussian_weights(self.window_rows, self.window_cols, sigma);
                let ch = self.channels as f64;
                Some(
                    (0..self.channels)
                        .flat_map(|_| cell.iter().map(move |w| w / ch))
                        .collect(),
                )
            }
        }
    }
}

fn windows_over(
    img: &Image,
    cells: &[PixelCoord],
    grid_rows: usize,
    grid_cols: usize,
    cfg: &GlanceConfig,
) -> GlanceVectorSet {
    let shape = cfg.window_shape();
    let ch = img.channels();
    let mut vectors = Vec::with_capacity(shape.count(grid_rows, grid_cols));
    let mut provenance = Vec::with_capacity(vectors.capacity());
    let mut r0 = 0;
    while r0 + shape.rows <= grid_rows {
        let mut c0 = 0;
        while c0 + shape.cols <= grid_cols {
            let mut v = Vec::with_capacity(ch * shape.rows * shape.cols);
            let mut p = Vec::with_capacity(v.capacity());
            for channel in 0..ch {
                for r in r0..r0 + shape.rows {
                    for c in c0..c0 + shape.cols {
                        let coord = cells[r * grid_cols + c];
                        v.push(img.get(coord.row, coord.col, channel));
                        p.push(coord);
                    }
                }
            }
            vectors.push(v);
            provenance.push(p);
            c0 += shape.stride;
        }
        r0 += shape.stride;
    }
    GlanceVectorSet {
        window_rows: shape.rows,
        window_cols: shape.cols,
        channels: ch,
        vectors,
        provenance,
    }
}

/// Global Glance vectors of `img` over the sample grid.
pub fn build_global_vectors(grid: &SampleGrid, img: &Image, cfg: &GlanceConfig) -> Result<GlanceVectorSet> {
    cfg.validate()?;
    if grid.rows != cfg.n || grid.cols != cfg.m || grid.coords.len() != cfg.n * cfg.m {
        return Err(Error::ShapeMismatch(format!(
            "sample grid {}x{} does not match n x m = {}x{}",
            grid.rows, grid.cols, cfg.n, cfg.m
        )));
    }
    Ok(windows_over(img, &grid.coords, grid.rows, grid.cols, cfg))
}

/// Local Glance vectors: dense windows over the image lattice.
pub fn build_local_vectors(img: &Image, cfg: &GlanceConfig) -> Result<GlanceVectorSet> {
    if img.height() < cfg.n_g || img.width() < cfg.m_g {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} is smaller than the {}x{} window",
            img.height(),
            img.width(),
            cfg.n_g,
            cfg.m_g
        )));
    }
    if cfg.stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let cells: Vec<PixelCoord> = (0..img.pixel_count())
        .map(|i| PixelCoord::new(i / img.width(), i % img.width()))
        .collect();
    Ok(windows_over(img, &cells, img.height(), img.width(), cfg))
}

/// Mean Glance index over two vector sets paired by position.
pub fn glance_im(v0: &GlanceVectorSet, v1: &GlanceVectorSet, cfg: &GlanceConfig) -> Result<f64> {
    if v0.len() != v1.len() || v0.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "vector sets of size {} and {}",
            v0.len(),
            v1.len()
        )));
    }
    let weights = v0.element_weights(cfg.kernel);
    let mut total = 0.0;
    for (a, b) in v0.vectors.iter().zip(&v1.vectors) {
        total += if cfg.lc_augment {
            glance_index_lc(a, b, cfg.c_s, weights.as_deref())?
        } else {
            glance_index(a, b, cfg.c_s, weights.as_deref())?
        };
    }
    Ok(total / v0.len() as f64)
}

/// MS-Glance loss `1 - GlanceIM(reference, pred)` and its gradient with
/// respect to `pred`. Each call draws a fresh pixel selection from `rng`.
pub fn ms_glance_loss<R: Rng + ?Sized>(
    reference: &Image,
    pred: &Image,
    cfg: &GlanceConfig,
    rng: &mut R,
) -> Result<LossGrad> {
    cfg.validate()?;
    reference.check_same_shape(pred)?;
    let shape = cfg.window_shape();
    let weights = cfg.cell_weights();
    let score = cfg.score();
    let ch = pred.channels();
    let use_local = cfg.scope != GlanceScope::Global;
    let use_global = cfg.scope != GlanceScope::Local;

    let local_count = if use_local {
        let count = shape.count(pred.height(), pred.width());
        if count == 0 {
            return Err(Error::InvalidArgument(format!(
                "image {}x{} is smaller than the {}x{} window",
                pred.height(),
                pred.width(),
                cfg.n_g,
                cfg.m_g
            )));
        }
        count
    } else {
        0
    };
    let global_count = if use_global {
        cfg.shuffles * shape.count(cfg.n, cfg.m)
    } else {
        0
    };

    let (local_scale, global_scale) = match (cfg.aggregation, use_local && use_global) {
        (Aggregation::Separate, true) => (
            -0.5 / local_count as f64,
            -0.5 / global_count as f64,
        ),
        _ => {
            let total = (local_count + global_count) as f64;
            (-1.0 / total, -1.0 / total)
        }
    };

    let mut grad = vec![0.0; pred.data().len()];
    let mut local_sum = 0.0;
    let mut global_sum = 0.0;

    if use_local {
        let grid = PairGrid {
            rows: pred.height(),
            cols: pred.width(),
            channels: ch,
            x: reference.data(),
            y: pred.data(),
        };
        let scores = window::evaluate(
            &grid,
            shape,
            weights.as_deref(),
            ChannelMode::Joint,
            Some((&mut grad, local_scale)),
            &score,
        );
        local_sum = scores.iter().sum();
    }

    if use_global {
        let selection = select_pixels(reference, cfg, rng)?;
        let mut cell_grad = vec![0.0; cfg.n * cfg.m * ch];
        for _ in 0..cfg.shuffles {
            let grid_coords = selection.reshuffled(rng);
            let xs = grid_coords.values(reference);
            let ys = grid_coords.values(pred);
            let grid = PairGrid {
                rows: cfg.n,
                cols: cfg.m,
                channels: ch,
                x: &xs,
                y: &ys,
            };
            cell_grad.iter_mut().for_each(|g| *g = 0.0);
            let scores = window::evaluate(
                &grid,
                shape,
                weights.as_deref(),
                ChannelMode::Joint,
                Some((&mut cell_grad, global_scale)),
                &score,
            );
            global_sum += scores.iter().sum::<f64>();
            scatter(&mut grad, &cell_grad, &grid_coords.coords, pred.width(), ch);
        }
    }

    let im = match (cfg.aggregation, use_local && use_global) {
        (Aggregation::Separate, true) => {
            0.5 * (local_sum / local_count as f64 + global_sum / global_count as f64)
        }
        _ => (local_sum + global_sum) / (local_count + global_count) as f64,
    };
    Ok(LossGrad {
        loss: 1.0 - im,
        grad,
    })
}

/// GlanceIM between two images, extracted as in [`ms_glance_loss`].
pub fn glance_im_images<R: Rng + ?Sized>(
    reference: &Image,
    pred: &Image,
    cfg: &GlanceConfig,
    rng: &mut R,
) -> Result<f64> {
    Ok(1.0 - ms_glance_loss(reference, pred, cfg, rng)?.loss)
}

pub(crate) fn scatter(
    grad: &mut [f64],
    cell_grad: &[f64],
    coords: &[PixelCoord],
    width: usize,
    channels: usize,
) {
    for (cell, c) in coords.iter().enumerate() {
        let dst = (c.row * width + c.col) * channels;
        for k in 0..channels {
            grad[dst + k] += cell_grad[cell * channels + k];
        }
    }
}

/// Replaces non-finite auxiliary losses with an L1 fallback and counts how
/// often that happened.
#[derive(Debug, Clone, Default)]
pub struct NanGuard {
    fallbacks: usize,
}

impl NanGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn guard<F>(&mut self, primary: LossGrad, fallback: F) -> Result<LossGrad>
    where
        F: FnOnce() -> Result<LossGrad>,
    {
        if primary.is_finite() {
            Ok(primary)
        } else {
            self.fallbacks += 1;
            fallback()
        }
    }
}
