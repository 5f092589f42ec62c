//! Centered, orthonormal 2-D discrete Fourier transform.
//!
//! Each axis is transformed as `fftshift(fft(ifftshift(x))) / sqrt(n)`, so the
//! zero frequency sits at index `n / 2` and the inverse is exact up to
//! rounding. Power-of-two lengths use an iterative radix-2 FFT; other lengths
//! fall back to a direct O(n^2) sum over a precomputed twiddle table.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::Image;

/// Row-major complex samples. Used both for images and for k-space.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

pub type KspaceGrid = ComplexGrid;

impl ComplexGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    /// Real-valued grid from a single-channel image.
    pub fn from_image(img: &Image) -> Result<Self> {
        if img.channels() != 1 {
            return Err(Error::InvalidArgument(
                "complex grids are built from single-channel images".into(),
            ));
        }
        Ok(Self {
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        })
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

struct Plan {
    len: usize,
    // e^{sign * 2 pi i k / n} for k in 0..n
    twiddles: Vec<Complex64>,
}

impl Plan {
    fn new(len: usize, direction: Direction) -> Self {
        let sign = match direction {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        };
        let twiddles = (0..len)
            .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64))
            .collect();
        Self { len, twiddles }
    }

    /// Unnormalized transform in place.
    fn run(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let n = self.len;
        if n <= 1 {
            return;
        }
        if n.is_power_of_two() {
            self.radix2(buf);
        } else {
            scratch.clear();
            scratch.extend_from_slice(buf);
            for (k, out) in buf.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, v) in scratch.iter().enumerate() {
                    acc += v * self.twiddles[(j * k) % n];
                }
                *out = acc;
            }
        }
    }

    fn radix2(&self, buf: &mut [Complex64]) {
        let n = self.len;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let step = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let t = self.twiddles[k * step] * buf[start + k + half];
                    let u = buf[start + k];
                    buf[start + k] = u + t;
                    buf[start + k + half] = u - t;
                }
            }
            size *= 2;
        }
    }

    /// Centered, orthonormal transform of one line.
    fn centered(&self, line: &mut [Complex64], tmp: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let n = self.len;
        // ifftshift
        tmp.clear();
        tmp.extend((0..n).map(|i| line[(i + n / 2) % n]));
        self.run(tmp, scratch);
        let norm = 1.0 / (n as f64).sqrt();
        // fftshift
        for (i, v) in tmp.iter().enumerate() {
            line[(i + n / 2) % n] = v * norm;
        }
    }
}

fn transform(grid: &ComplexGrid, direction: Direction) -> ComplexGrid {
    let (h, w) = (grid.height, grid.width);
    let mut out = grid.clone();
    let mut tmp = Vec::new();
    let mut scratch = Vec::new();

    let row_plan = Plan::new(w, direction);
    for row in out.data.chunks_mut(w) {
        row_plan.centered(row, &mut tmp, &mut scratch);
    }

    let col_plan = Plan::new(h, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = out.data[r * w + c];
        }
        col_plan.centered(&mut column, &mut tmp, &mut scratch);
        for r in 0..h {
            out.data[r * w + c] = column[r];
        }
    }
    out
}

/// Forward transform into centered k-space.
pub fn dft2(grid: &ComplexGrid) -> KspaceGrid {
    transform(grid, Direction::Forward)
}

/// Exact inverse of [`dft2`].
pub fn idft2(k: &KspaceGrid) -> ComplexGrid {
    transform(k, Direction::Inverse)
}
