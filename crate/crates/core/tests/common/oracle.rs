//! Straight-line reference implementations used to check the library.
//!
//! Nothing here calls into the library's statistics or gradient code: windows
//! are enumerated explicitly, every score is evaluated from its textbook
//! formula in double-double arithmetic, and gradients come from central
//! finite differences.

#![allow(dead_code)]

use std::collections::HashMap;

use twofloat::TwoFloat;

#[derive(Debug, Clone, Copy)]
pub enum Score {
    Glance { c_s: f64 },
    GlanceLc { c_s: f64 },
    /// l * c * s with c3 = c2 / 2, evaluated as three separate factors.
    Ssim { c1: f64, c2: f64 },
}

#[derive(Debug, Clone)]
pub struct Window {
    /// Indices into the flat sample buffer.
    pub elems: Vec<usize>,
    pub weights: Vec<f64>,
}

struct Stats {
    mx: TwoFloat,
    my: TwoFloat,
    vx: TwoFloat,
    vy: TwoFloat,
    cxy: TwoFloat,
}

/// Two-pass window statistics in double-double arithmetic.
fn stats(x: &[f64], y: &[f64], w: &Window) -> Stats {
    let yv = |e: usize| TwoFloat::from(y[e]);
    let zero = TwoFloat::from(0.0);
    let (mut mx, mut my) = (zero, zero);
    for (k, &e) in w.elems.iter().enumerate() {
        mx += TwoFloat::from(x[e]) * w.weights[k];
        my += yv(e) * w.weights[k];
    }
    let (mut vx, mut vy, mut cxy) = (zero, zero, zero);
    for (k, &e) in w.elems.iter().enumerate() {
        let dx = TwoFloat::from(x[e]) - mx;
        let dy = yv(e) - my;
        vx += dx * dx * w.weights[k];
        vy += dy * dy * w.weights[k];
        cxy += dx * dy * w.weights[k];
    }
    Stats { mx, my, vx, vy, cxy }
}

fn score_stats(st: &Stats, s: Score) -> TwoFloat {
    let sx = st.vx.sqrt();
    let sy = st.vy.sqrt();
    let l = |c1: f64| (st.mx * st.my * 2.0 + c1) / (st.mx * st.mx + st.my * st.my + c1);
    let c = |c2: f64| (sx * sy * 2.0 + c2) / (st.vx + st.vy + c2);
    let structure = |c3: f64| (st.cxy + c3) / (sx * sy + c3);
    match s {
        Score::Glance { c_s } => structure(c_s),
        Score::GlanceLc { c_s } => l(1e-4) * c(9e-4) * structure(c_s),
        Score::Ssim { c1, c2 } => l(c1) * c(c2) * structure(c2 / 2.0),
    }
}

pub fn score(x: &[f64], y: &[f64], w: &Window, s: Score) -> f64 {
    f64::from(score_stats(&stats(x, y, w), s))
}

/// Windows of a `rows x cols` arrangement of cells; `cells[k]` is the pixel
/// index shown at grid cell `k`. With `joint` one window spans all channels,
/// otherwise each channel forms its own window.
#[allow(clippy::too_many_arguments)]
pub fn grid_windows(
    cells: &[usize],
    rows: usize,
    cols: usize,
    channels: usize,
    win_rows: usize,
    win_cols: usize,
    stride: usize,
    cell_weights: &[f64],
    joint: bool,
) -> Vec<Window> {
    let mut out = Vec::new();
    let mut r0 = 0;
    while r0 + win_rows <= rows {
        let mut c0 = 0;
        while c0 + win_cols <= cols {
            let groups: Vec<Vec<usize>> = if joint {
                vec![(0..channels).collect()]
            } else {
                (0..channels).map(|c| vec![c]).collect()
            };
            for group in groups {
                let mut elems = Vec::new();
                let mut weights = Vec::new();
                for dr in 0..win_rows {
                    for dc in 0..win_cols {
                        let pixel = cells[(r0 + dr) * cols + c0 + dc];
                        for &ch in &group {
                            elems.push(pixel * channels + ch);
                            weights.push(cell_weights[dr * win_cols + dc] / group.len() as f64);
                        }
                    }
                }
                out.push(Window { elems, weights });
            }
            c0 += stride;
        }
        r0 += stride;
    }
    out
}

pub fn uniform_weights(rows: usize, cols: usize) -> Vec<f64> {
    vec![1.0 / (rows * cols) as f64; rows * cols]
}

pub fn gaussian_weights(rows: usize, cols: usize, sigma: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(rows * cols);
    let cr = (rows as f64 - 1.0) / 2.0;
    let cc = (cols as f64 - 1.0) / 2.0;
    for r in 0..rows {
        for c in 0..cols {
            let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
            w.push((-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// `1 - sum_k weight_k * score(window_k)`.
pub struct Objective {
    pub terms: Vec<(Window, f64)>,
    pub score: Score,
}

impl Objective {
    pub fn loss(&self, x: &[f64], y: &[f64]) -> f64 {
        1.0 - self
            .terms
            .iter()
            .map(|(w, k)| k * score(x, y, w, self.score))
            .sum::<f64>()
    }

    /// Central differences of the loss with step `h`. Only windows containing
    /// the perturbed element are re-scored (all other terms cancel exactly),
    /// from double-double raw sums updated for the perturbation.
    pub fn fd_grad(&self, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
        // element -> (term, summed weight of its occurrences in that window)
        let mut touching: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for (t, (w, _)) in self.terms.iter().enumerate() {
            for (k, &e) in w.elems.iter().enumerate() {
                let list = touching.entry(e).or_default();
                match list.last_mut() {
                    Some((last, acc)) if *last == t => *acc += w.weights[k],
                    _ => list.push((t, w.weights[k])),
                }
            }
        }
        let sums: Vec<RawSums> = self.terms.iter().map(|(w, _)| RawSums::new(x, y, w)).collect();
        (0..y.len())
            .map(|e| {
                let Some(list) = touching.get(&e) else {
                    return 0.0;
                };
                let ye = TwoFloat::from(y[e]);
                let mut diff = TwoFloat::from(0.0);
                for &(t, weight) in list {
                    let plus = sums[t].perturbed(x[e], ye, ye + h, weight);
                    let minus = sums[t].perturbed(x[e], ye, ye - h, weight);
                    diff += (score_from(&plus, self.score) - score_from(&minus, self.score)) * self.terms[t].1;
                }
                -f64::from(diff) / (2.0 * h)
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
struct RawSums {
    w: TwoFloat,
    x: TwoFloat,
    y: TwoFloat,
    xx: TwoFloat,
    yy: TwoFloat,
    xy: TwoFloat,
}

impl RawSums {
    fn new(x: &[f64], y: &[f64], win: &Window) -> Self {
        let zero = TwoFloat::from(0.0);
        let mut s = RawSums { w: zero, x: zero, y: zero, xx: zero, yy: zero, xy: zero };
        for (k, &e) in win.elems.iter().enumerate() {
            let wk = win.weights[k];
            let xe = TwoFloat::from(x[e]);
            let ye = TwoFloat::from(y[e]);
            s.w += TwoFloat::from(wk);
            s.x += xe * wk;
            s.y += ye * wk;
            s.xx += xe * xe * wk;
            s.yy += ye * ye * wk;
            s.xy += xe * ye * wk;
        }
        s
    }

    fn perturbed(&self, x: f64, old: TwoFloat, new: TwoFloat, weight: f64) -> RawSums {
        let mut s = *self;
        s.y += (new - old) * weight;
        s.yy += (new * new - old * old) * weight;
        s.xy += (new - old) * x * weight;
        s
    }
}

fn score_from(s: &RawSums, kind: Score) -> TwoFloat {
    let mx = s.x / s.w;
    let my = s.y / s.w;
    let st = Stats {
        mx,
        my,
        vx: s.xx / s.w - mx * mx,
        vy: s.yy / s.w - my * my,
        cxy: s.xy / s.w - mx * my,
    };
    score_stats(&st, kind)
}

/// Largest `|a - f| / max(|a|, |f|)` over entries whose analytic magnitude exceeds `floor`.
pub fn max_rel_err(analytic: &[f64], fd: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .filter(|(a, _)| a.abs() > floor)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()))
        .fold(0.0, f64::max)
}

/// Independent Pearson correlation (sample form; the 1/(n-1) factors cancel).
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let dx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let dy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    num / (dx * dy)
}

/// Small deterministic generator so oracle inputs do not depend on the library.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.unit()).collect()
    }
}

