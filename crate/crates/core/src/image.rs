//! Dense floating-point images and the scalar fidelity metrics.

use crate::error::{Error, Result};

/// A row-major image with interleaved channels and `f64` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("image must be nonempty".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + channel] = value;
    }

    /// Per-pixel magnitude used for thresholding: the channel mean.
    pub fn pixel_intensity(&self, coord: PixelCoord) -> f64 {
        let base = (coord.row * self.width + coord.col) * self.channels;
        let px = &self.data[base..base + self.channels];
        px.iter().sum::<f64>() / self.channels as f64
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    /// Copy with every sample clamped into `[0, 1]`.
    pub fn clamped(&self) -> Image {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out
    }
}

/// Min-max rescale into `[0, 1]`; a constant image maps to all zeros.
pub fn normalize_unit(img: &Image) -> Image {
    let (lo, hi) = img
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut out = img.clone();
    let span = hi - lo;
    if span > 0.0 {
        out.data.iter_mut().for_each(|v| *v = (*v - lo) / span);
    } else {
        out.data.iter_mut().for_each(|v| *v = 0.0);
    }
    out
}

/// Centered crop. Odd margins drop the extra row/column from the bottom/right.
pub fn center_crop(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h > img.height || out_w > img.width || out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot crop {out_h}x{out_w} from {}x{}",
            img.height, img.width
        )));
    }
    let top = (img.height - out_h) / 2;
    let left = (img.width - out_w) / 2;
    Image::from_fn(out_h, out_w, img.channels, |r, c, ch| {
        img.get(r + top, c + left, ch)
    })
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data.len() as f64)
}

/// PSNR with unit peak. Identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / err).log10())
    }
}
