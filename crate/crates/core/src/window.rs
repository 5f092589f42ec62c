//! Sliding-window second-order statistics over a pair of grids.
//!
//! Every windowed similarity in this crate (Glance index, its l·c variant,
//! SSIM) is a function of the five weighted moments of a window pair. The
//! engine here computes those moments, evaluates a score per window and,
//! when asked, pushes `d score / d y` back onto the grid cells using
//!
//! ```text
//! d/dy_i = w_i * (d_mean_y + d_cov * (x_i - mean_x) + 2 * d_var_y * (y_i - mean_y))
//! ```
//!
//! `x` is always the reference and `y` the prediction.

/// Weighted population moments of a window pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
}

impl Moments {
    pub fn std_x(&self) -> f64 {
        self.var_x.max(0.0).sqrt()
    }

    pub fn std_y(&self) -> f64 {
        self.var_y.max(0.0).sqrt()
    }
}

/// Partial derivatives of a window score with respect to the prediction's moments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Partials {
    pub d_mean_y: f64,
    pub d_var_y: f64,
    pub d_cov: f64,
}

/// Two-pass weighted moments. `weights` must sum to one; `None` means uniform.
pub fn moments(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Moments {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    match weights {
        Some(w) => {
            for i in 0..x.len() {
                mx += w[i] * x[i];
                my += w[i] * y[i];
            }
        }
        None => {
            for i in 0..x.len() {
                mx += x[i];
                my += y[i];
            }
            mx /= n;
            my /= n;
        }
    }
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        let wi = weights.map_or(1.0, |w| w[i]);
        vx += wi * dx * dx;
        vy += wi * dy * dy;
        cxy += wi * dx * dy;
    }
    if weights.is_none() {
        vx /= n;
        vy /= n;
        cxy /= n;
    }
    // a constant window can still show a variance of order (eps * mean)^2 from
    // the rounded weighted mean; treat that as exactly zero
    let snap = |v: f64, m: f64| if v <= (16.0 * f64::EPSILON * m).powi(2) { 0.0 } else { v };
    vx = snap(vx, mx);
    vy = snap(vy, my);
    if vx == 0.0 || vy == 0.0 {
        cxy = 0.0;
    }
    Moments {
        mean_x: mx,
        mean_y: my,
        var_x: vx,
        var_y: vy,
        cov: cxy,
    }
}

/// Converts a derivative with respect to `std_y` into one with respect to `var_y`.
/// A window with zero spread contributes no gradient through its deviation.
pub(crate) fn std_to_var_partial(d_std_y: f64, std_y: f64) -> f64 {
    if std_y > 0.0 {
        d_std_y / (2.0 * std_y)
    } else {
        0.0
    }
}

/// Two aligned grids of `rows x cols` cells, each cell holding `channels` samples.
#[derive(Debug, Clone)]
pub struct PairGrid<'a> {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// One window vector spans all channels (length `channels * rows * cols`).
    Joint,
    /// Each channel is scored as its own window.
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowShape {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
}

impl WindowShape {
    pub fn count(&self, grid_rows: usize, grid_cols: usize) -> usize {
        if grid_rows < self.rows || grid_cols < self.cols || self.stride == 0 {
            return 0;
        }
        ((grid_rows - self.rows) / self.stride + 1) * ((grid_cols - self.cols) / self.stride + 1)
    }
}

/// Scores every window of `grid` and returns the scores in row-major window order
/// (channel-minor under [`ChannelMode::Separate`]).
///
/// When `grad` is given, `scale * d score / d y` is accumulated into it for every
/// window; it must have the same layout as `grid.y`.
pub fn evaluate<F>(
    grid: &PairGrid<'_>,
    shape: WindowShape,
    cell_weights: Option<&[f64]>,
    mode: ChannelMode,
    mut grad: Option<(&mut [f64], f64)>,
    score: F,
) -> Vec<f64>
where
    F: Fn(&Moments) -> (f64, Partials),
{
    if cell_weights.is_none() && shape.stride == 1 {
        return evaluate_box(grid, shape, mode, grad, score);
    }
    let (gr, gc, ch) = (grid.rows, grid.cols, grid.channels);
    let count = shape.count(gr, gc);
    let groups = match mode {
        ChannelMode::Joint => 1,
        ChannelMode::Separate => ch,
    };
    let per_group = match mode {
        ChannelMode::Joint => ch,
        ChannelMode::Separate => 1,
    };
    let len = shape.rows * shape.cols * per_group;

    // element weights for one window vector, cell-major then channel
    let weights: Option<Vec<f64>> = cell_weights.map(|w| {
        debug_assert_eq!(w.len(), shape.rows * shape.cols);
        w.iter()
            .flat_map(|&v| std::iter::repeat_n(v / per_group as f64, per_group))
            .collect()
    });
    let uniform = 1.0 / len as f64;

    let mut idx = vec![0usize; len];
    let mut xs = vec![0.0; len];
    let mut ys = vec![0.0; len];
    let mut scores = Vec::with_capacity(count * groups);

    let mut r0 = 0;
    while r0 + shape.rows <= gr {
        let mut c0 = 0;
        while c0 + shape.cols <= gc {
            for g in 0..groups {
                let mut k = 0;
                for r in r0..r0 + shape.rows {
                    let row_base = r * gc;
                    for c in c0..c0 + shape.cols {
                        let base = (row_base + c) * ch;
                        match mode {
                            ChannelMode::Joint => {
                                for off in 0..ch {
                                    idx[k] = base + off;
                                    k += 1;
                                }
                            }
                            ChannelMode::Separate => {
                                idx[k] = base + g;
                                k += 1;
                            }
                        }
                    }
                }
                for k in 0..len {
                    xs[k] = grid.x[idx[k]];
                    ys[k] = grid.y[idx[k]];
                }
                let m = moments(&xs, &ys, weights.as_deref());
                let (value, p) = score(&m);
                scores.push(value);
                if let Some((buf, scale)) = grad.as_mut() {
                    let a = p.d_mean_y - p.d_cov * m.mean_x - 2.0 * p.d_var_y * m.mean_y;
                    let bx = p.d_cov;
                    let by = 2.0 * p.d_var_y;
                    for k in 0..len {
                        let wk = weights.as_ref().map_or(uniform, |w| w[k]);
                        buf[idx[k]] += *scale * wk * (a + bx * xs[k] + by * ys[k]);
                    }
                }
            }
            c0 += shape.stride;
        }
        r0 += shape.stride;
    }
    scores
}

/// Sums of every `rows x cols` window of an `h x w` map (valid positions only).
fn box_sum(src: &[f64], h: usize, w: usize, rows: usize, cols: usize) -> Vec<f64> {
    let (oh, ow) = (h - rows + 1, w - cols + 1);
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for c in 0..ow {
            horiz[r * ow + c] = row[c..c + cols].iter().sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for k in 0..rows {
            let src_row = &horiz[(r + k) * ow..(r + k + 1) * ow];
            for (o, v) in out[r * ow..(r + 1) * ow].iter_mut().zip(src_row) {
                *o += v;
            }
        }
    }
    out
}

/// Adjoint of [`box_sum`]: every cell of the `h x w` map receives the sum of
/// `coef` over the window positions that cover it.
fn box_spread(coef: &[f64], h: usize, w: usize, rows: usize, cols: usize) -> Vec<f64> {
    let (oh, ow) = (h - rows + 1, w - cols + 1);
    let mut vert = vec![0.0; h * ow];
    for r in 0..oh {
        let src = &coef[r * ow..(r + 1) * ow];
        for k in 0..rows {
            for (o, v) in vert[(r + k) * ow..(r + k + 1) * ow].iter_mut().zip(src) {
                *o += v;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let row = &vert[r * ow..(r + 1) * ow];
        let dst = &mut out[r * w..(r + 1) * w];
        for (c, v) in row.iter().enumerate() {
            for d in &mut dst[c..c + cols] {
                *d += v;
            }
        }
    }
    out
}

/// Uniform-kernel, unit-stride path of [`evaluate`]: window moments come from
/// separable box sums of centered data, and gradients are pushed back through
/// the adjoint box filter. Variances within rounding of zero are snapped to
/// zero so constant windows behave as in the direct path.
fn evaluate_box<F>(
    grid: &PairGrid<'_>,
    shape: WindowShape,
    mode: ChannelMode,
    mut grad: Option<(&mut [f64], f64)>,
    score: F,
) -> Vec<f64>
where
    F: Fn(&Moments) -> (f64, Partials),
{
    let (gr, gc, ch) = (grid.rows, grid.cols, grid.channels);
    let count = shape.count(gr, gc);
    if count == 0 {
        return Vec::new();
    }
    let (groups, per_group) = match mode {
        ChannelMode::Joint => (1, ch),
        ChannelMode::Separate => (ch, 1),
    };
    let (rows, cols) = (shape.rows, shape.cols);
    let len = (rows * cols * per_group) as f64;
    let cells = gr * gc;
    let mut scores = vec![0.0; count * groups];

    for g in 0..groups {
        let channel_range = match mode {
            ChannelMode::Joint => 0..ch,
            ChannelMode::Separate => g..g + 1,
        };
        let samples = |v: &[f64]| -> f64 {
            (0..cells)
                .flat_map(|cell| channel_range.clone().map(move |k| cell * ch + k))
                .map(|i| v[i])
                .sum::<f64>()
                / (cells * per_group) as f64
        };
        let (ox, oy) = (samples(grid.x), samples(grid.y));
        let mut maps = vec![vec![0.0; cells]; 5];
        for cell in 0..cells {
            for k in channel_range.clone() {
                let i = cell * ch + k;
                let x = grid.x[i] - ox;
                let y = grid.y[i] - oy;
                maps[0][cell] += x;
                maps[1][cell] += y;
                maps[2][cell] += x * x;
                maps[3][cell] += y * y;
                maps[4][cell] += x * y;
            }
        }
        let sums: Vec<Vec<f64>> = maps.iter().map(|m| box_sum(m, gr, gc, rows, cols)).collect();

        let mut coef = grad.as_ref().map(|_| [vec![0.0; count], vec![0.0; count], vec![0.0; count]]);
        for wi in 0..count {
            let mx = sums[0][wi] / len;
            let my = sums[1][wi] / len;
            let exx = sums[2][wi] / len;
            let eyy = sums[3][wi] / len;
            let snap = |e: f64, m: f64| {
                let v = e - m * m;
                if v <= 64.0 * f64::EPSILON * e {
                    0.0
                } else {
                    v
                }
            };
            let var_x = snap(exx, mx);
            let var_y = snap(eyy, my);
            let cov = if var_x == 0.0 || var_y == 0.0 {
                0.0
            } else {
                sums[4][wi] / len - mx * my
            };
            let m = Moments {
                mean_x: mx + ox,
                mean_y: my + oy,
                var_x,
                var_y,
                cov,
            };
            let (value, p) = score(&m);
            scores[wi * groups + g] = value;
            if let Some(c) = coef.as_mut() {
                // centered form of w * (d_mean_y + d_cov (x - mx) + 2 d_var_y (y - my))
                c[0][wi] = (p.d_mean_y - p.d_cov * mx - 2.0 * p.d_var_y * my) / len;
                c[1][wi] = p.d_cov / len;
                c[2][wi] = 2.0 * p.d_var_y / len;
            }
        }

        if let (Some((buf, scale)), Some(c)) = (grad.as_mut(), coef) {
            let spread: Vec<Vec<f64>> = c.iter().map(|m| box_spread(m, gr, gc, rows, cols)).collect();
            for cell in 0..cells {
                for k in channel_range.clone() {
                    let i = cell * ch + k;
                    let x = grid.x[i] - ox;
                    let y = grid.y[i] - oy;
                    buf[i] += *scale * (spread[0][cell] + spread[1][cell] * x + spread[2][cell] * y);
                }
            }
        }
    }
    scores
}

/// Separable Gaussian weights over a `rows x cols` window, sampled at integer
/// offsets from the window center and normalized to sum to one.
pub fn gaussian_weights(rows: usize, cols: usize, sigma: f64) -> Vec<f64> {
    let axis = |n: usize| -> Vec<f64> {
        let center = (n as f64 - 1.0) / 2.0;
        (0..n)
            .map(|i| {
                let d = i as f64 - center;
                (-(d * d) / (2.0 * sigma * sigma)).exp()
            })
            .collect()
    };
    let wr = axis(rows);
    let wc = axis(cols);
    let mut w: Vec<f64> = wr
        .iter()
        .flat_map(|a| wc.iter().map(move |b| a * b))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}
