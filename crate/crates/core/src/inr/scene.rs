use rand::Rng;

use crate::error::Result;
use crate::image::Image;

/// Piecewise-smooth test picture: a sky-like gradient, a few soft discs and
/// hard-edged rectangles, plus a low-amplitude sinusoidal texture. Values
/// lie in `[0, 1]`.
pub fn synthetic_scene<R: Rng + ?Sized>(h: usize, w: usize, channels: usize, rng: &mut R) -> Result<Image> {
    let tint: Vec<f64> = (0..channels).map(|_| rng.gen_range(0.7..1.0)).collect();
    let top = rng.gen_range(0.55..0.8);
    let bottom = rng.gen_range(0.15..0.35);
    let discs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(2..5))
        .map(|_| {
            (
                rng.gen_range(0.15..0.85),
                rng.gen_range(0.15..0.85),
                rng.gen_range(0.08..0.25),
                rng.gen_range(-0.35..0.35),
            )
        })
        .collect();
    let boxes: Vec<(f64, f64, f64, f64, f64)> = (0..rng.gen_range(1..4))
        .map(|_| {
            let r0 = rng.gen_range(0.0..0.7);
            let c0 = rng.gen_range(0.0..0.7);
            (
                r0,
                c0,
                r0 + rng.gen_range(0.1..0.3),
                c0 + rng.gen_range(0.1..0.3),
                rng.gen_range(-0.3..0.3),
            )
        })
        .collect();
    let (fy, fx, phase) = (
        rng.gen_range(8.0..20.0),
        rng.gen_range(8.0..20.0),
        rng.gen_range(0.0..std::f64::consts::TAU),
    );

    Image::from_fn(h, w, channels, |r, c, ch| {
        let y = (r as f64 + 0.5) / h as f64;
        let x = (c as f64 + 0.5) / w as f64;
        let mut v = top + (bottom - top) * y;
        for &(cy, cx, rad, amp) in &discs {
            let d2 = ((y - cy).powi(2) + (x - cx).powi(2)) / (rad * rad);
            v += amp * (-d2).exp();
        }
        for &(r0, c0, r1, c1, amp) in &boxes {
            if y >= r0 && y < r1 && x >= c0 && x < c1 {
                v += amp;
            }
        }
        v += 0.04 * (fy * y + phase).sin() * (fx * x).cos();
        (v * tint[ch]).clamp(0.0, 1.0)
    })
}
