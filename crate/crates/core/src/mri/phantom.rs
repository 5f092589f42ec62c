//! Synthetic anatomy-like test images with a true zero background.

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// Head-shaped ellipse holding several smaller ellipses of varying intensity.
    Ellipses,
    /// Head-shaped ellipse filled with a smooth intensity ramp.
    SmoothGradient,
}

struct Ellipse {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    angle: f64,
}

impl Ellipse {
    fn contains(&self, y: f64, x: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dy = y - self.cy;
        let dx = x - self.cx;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.rx).powi(2) + (v / self.ry).powi(2) <= 1.0
    }
}

/// Builds an `h x w` single-channel phantom. Pixels outside the head ellipse
/// are exactly zero; pixels inside are at least 0.1.
pub fn make_phantom<R: Rng + ?Sized>(h: usize, w: usize, kind: PhantomKind, rng: &mut R) -> Result<Image> {
    if h < 16 || w < 16 {
        return Err(Error::InvalidArgument(format!(
            "phantoms need at least 16x16 pixels, got {h}x{w}"
        )));
    }
    // normalized coordinates in [-1, 1]; head area ~ pi * 0.8 * 0.65 / 4 of the frame
    let head = Ellipse {
        cy: rng.gen_range(-0.05..0.05),
        cx: rng.gen_range(-0.05..0.05),
        ry: rng.gen_range(0.75..0.85),
        rx: rng.gen_range(0.6..0.7),
        angle: rng.gen_range(-0.2..0.2),
    };
    let inner: Vec<(Ellipse, f64)> = (0..rng.gen_range(3..7))
        .map(|_| {
            let e = Ellipse {
                cy: head.cy + rng.gen_range(-0.4..0.4),
                cx: head.cx + rng.gen_range(-0.3..0.3),
                ry: rng.gen_range(0.08..0.3),
                rx: rng.gen_range(0.05..0.2),
                angle: rng.gen_range(0.0..std::f64::consts::PI),
            };
            (e, rng.gen_range(-0.35..0.35))
        })
        .collect();
    let base = rng.gen_range(0.45..0.65);
    let tilt = rng.gen_range(-0.3..0.3);

    Image::from_fn(h, w, 1, |r, c, _| {
        let y = 2.0 * (r as f64 + 0.5) / h as f64 - 1.0;
        let x = 2.0 * (c as f64 + 0.5) / w as f64 - 1.0;
        if !head.contains(y, x) {
            return 0.0;
        }
        let value = match kind {
            PhantomKind::Ellipses => {
                let mut v = base;
                for (e, delta) in &inner {
                    if e.contains(y, x) {
                        v += delta;
                    }
                }
                v
            }
            PhantomKind::SmoothGradient => {
                let dy = (y - head.cy) / head.ry;
                let dx = (x - head.cx) / head.rx;
                base + tilt * dx + 0.3 * (1.0 - (dx * dx + dy * dy)).max(0.0)
            }
        };
        value.clamp(0.1, 1.0)
    })
}
