use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SirenConfig {
    pub hidden_width: usize,
    /// Number of sine layers.
    pub depth: usize,
    /// Frequency scale of the first sine layer.
    pub omega0: f64,
    /// Frequency scale of the remaining sine layers.
    pub hidden_omega: f64,
    pub out_channels: usize,
    /// Number of octaves of sin/cos features added to the raw coordinates; 0 disables the encoding.
    pub encoding_octaves: usize,
}

impl Default for SirenConfig {
    fn default() -> Self {
        Self {
            hidden_width: 256,
            depth: 3,
            omega0: 30.0,
            hidden_omega: 30.0,
            out_channels: 1,
            encoding_octaves: 0,
        }
    }
}

impl SirenConfig {
    pub fn input_features(&self) -> usize {
        2 + 4 * self.encoding_octaves
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirenNetwork {
    pub config: SirenConfig,
    /// `depth` sine layers followed by one linear output layer.
    pub layers: Vec<Layer>,
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenGrads {
    pub layers: Vec<Layer>,
}

/// Activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the (encoded) coordinate batch.
    inputs: Vec<Array2<f64>>,
    /// `omega * (x W^T + b)` for every sine layer.
    phases: Vec<Array2<f64>>,
}

/// `(row, col)` coordinates spaced linearly over `[-1, 1]`, row-major.
pub fn coord_grid(h: usize, w: usize) -> Array2<f64> {
    let axis = |n: usize, i: usize| {
        if n == 1 {
            0.0
        } else {
            -1.0 + 2.0 * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Array2::zeros((h * w, 2));
    for r in 0..h {
        for c in 0..w {
            out[[r * w + c, 0]] = axis(h, r);
            out[[r * w + c, 1]] = axis(w, c);
        }
    }
    out
}

/// Appends `sin(2^k pi x)`, `cos(2^k pi x)` features for `octaves` octaves.
pub fn encode_coords(coords: &Array2<f64>, octaves: usize) -> Array2<f64> {
    if octaves == 0 {
        return coords.clone();
    }
    let n = coords.nrows();
    let mut out = Array2::zeros((n, 2 + 4 * octaves));
    out.slice_mut(s![.., 0..2]).assign(coords);
    for k in 0..octaves {
        let f = (1u64 << k) as f64 * std::f64::consts::PI;
        for i in 0..n {
            for d in 0..2 {
                let phase = f * coords[[i, d]];
                out[[i, 2 + 4 * k + 2 * d]] = phase.sin();
                out[[i, 2 + 4 * k + 2 * d + 1]] = phase.cos();
            }
        }
    }
    out
}

impl SirenNetwork {
    /// Network with every weight and bias set to zero.
    pub fn zeros(config: SirenConfig) -> Self {
        let mut layers = Vec::with_capacity(config.depth + 1);
        let mut fan_in = config.input_features();
        for _ in 0..config.depth {
            layers.push(Layer::zeros(fan_in, config.hidden_width));
            fan_in = config.hidden_width;
        }
        layers.push(Layer::zeros(fan_in, config.out_channels));
        Self { config, layers }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn omega(&self, layer: usize) -> f64 {
        if layer == 0 {
            self.config.omega0
        } else {
            self.config.hidden_omega
        }
    }

    fn check_input(&self, coords: &Array2<f64>) -> Result<()> {
        if coords.ncols() != self.config.input_features() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} input features, got {}",
                self.config.input_features(),
                coords.ncols()
            )));
        }
        Ok(())
    }

    /// Output batch `N x out_channels` (unclamped).
    pub fn forward(&self, coords: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(coords)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut phases = Vec::with_capacity(self.config.depth);
        let mut x = coords.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            inputs.push(x);
            if i + 1 == self.layers.len() {
                return Ok((z, ForwardCache { inputs, phases }));
            }
            z *= self.omega(i);
            x = z.mapv(f64::sin);
            phases.push(z);
        }
        unreachable!("network always has an output layer")
    }

    pub fn predict(&self, coords: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(coords)?.0)
    }

    /// Reverse-mode parameter gradients given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> Result<SirenGrads> {
        let batch = cache.inputs.first().map_or(0, |x| x.nrows());
        if cache.inputs.len() != self.layers.len()
            || cache.phases.len() != self.config.depth
            || grad_out.dim() != (batch, self.config.out_channels)
        {
            return Err(Error::ShapeMismatch(
                "forward cache does not match this network or output gradient".into(),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                // through sin(omega * z): multiply by omega * cos(phase)
                let omega = self.omega(i);
                Zip::from(&mut delta)
                    .and(&cache.phases[i])
                    .for_each(|d, &p| *d *= omega * p.cos());
            }
            let weight = delta.t().dot(&cache.inputs[i]);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                delta = delta.dot(&self.layers[i].weight);
            }
            grads.push(Layer { weight, bias });
        }
        grads.reverse();
        Ok(SirenGrads { layers: grads })
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }
}

impl SirenGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn global_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for s in self.slices_mut() {
                s.iter_mut().for_each(|g| *g *= scale);
            }
        }
        norm
    }
}

/// SIREN initialization: the first layer is uniform in `±1/fan_in`, later
/// layers in `±sqrt(6/fan_in)/omega0`; biases start at zero.
pub fn siren_init<R: Rng + ?Sized>(config: &SirenConfig, rng: &mut R) -> Result<SirenNetwork> {
    if config.depth == 0 || config.hidden_width == 0 {
        return Err(Error::InvalidArgument("siren needs at least one hidden layer".into()));
    }
    if config.out_channels != 1 && config.out_channels != 3 {
        return Err(Error::InvalidArgument(format!(
            "output channels must be 1 or 3, got {}",
            config.out_channels
        )));
    }
    let mut net = SirenNetwork::zeros(config.clone());
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let fan_in = layer.weight.ncols() as f64;
        let bound = if i == 0 {
            1.0 / fan_in
        } else {
            (6.0 / fan_in).sqrt() / config.omega0
        };
        layer.weight.mapv_inplace(|_| rng.gen_range(-bound..=bound));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn coord_grid_layout() {
        let g = coord_grid(2, 2);
        assert_eq!(
            g.as_slice().unwrap(),
            &[-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0]
        );
        let g = coord_grid(3, 3);
        assert_eq!((g[[4, 0]], g[[4, 1]]), (0.0, 0.0));
        assert_eq!(coord_grid(5, 7).nrows(), 35);
    }

    #[test]
    fn init_bounds_shapes_and_determinism() {
        let cfg = SirenConfig::default();
        let net = siren_init(&cfg, &mut seeded(1)).unwrap();
        let shapes: Vec<(usize, usize)> = net.layers.iter().map(|l| l.weight.dim()).collect();
        assert_eq!(shapes, vec![(256, 2), (256, 256), (256, 256), (1, 256)]);
        assert!(net.layers[0].weight.iter().all(|w| w.abs() <= 0.5));
        let hidden = (6.0f64 / 256.0).sqrt() / 30.0;
        for l in &net.layers[1..] {
            assert!(l.weight.iter().all(|w| w.abs() <= hidden));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
        assert_eq!(net, siren_init(&cfg, &mut seeded(1)).unwrap());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = SirenNetwork::zeros(SirenConfig::default());
        let out = net.predict(&coord_grid(4, 5)).unwrap();
        assert_eq!(out.dim(), (20, 1));
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_built_single_unit() {
        let cfg = SirenConfig {
            hidden_width: 1,
            depth: 1,
            omega0: 2.0,
            ..SirenConfig::default()
        };
        let mut net = SirenNetwork::zeros(cfg);
        net.layers[0].weight[[0, 0]] = 0.5;
        net.layers[0].weight[[0, 1]] = -0.25;
        net.layers[0].bias[0] = 0.1;
        net.layers[1].weight[[0, 0]] = 3.0;
        net.layers[1].bias[0] = -0.2;
        let coords = ndarray::arr2(&[[0.4, 0.8]]);
        let out = net.predict(&coords).unwrap();
        let expected = 3.0 * (2.0f64 * (0.5 * 0.4 - 0.25 * 0.8 + 0.1)).sin() - 0.2;
        assert!((out[[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_output_gradient_gives_zero_grads() {
        let net = siren_init(&SirenConfig { hidden_width: 8, ..SirenConfig::default() }, &mut seeded(2)).unwrap();
        let coords = coord_grid(3, 3);
        let (out, cache) = net.forward(&coords).unwrap();
        let grads = net.backward(&cache, &Array2::zeros(out.dim())).unwrap();
        assert_eq!(grads.global_norm(), 0.0);
        assert!(net.backward(&cache, &Array2::zeros((2, 1))).is_err());
    }

    #[test]
    fn clipping_caps_the_norm() {
        let net = siren_init(&SirenConfig { hidden_width: 8, ..SirenConfig::default() }, &mut seeded(3)).unwrap();
        let coords = coord_grid(4, 4);
        let (out, cache) = net.forward(&coords).unwrap();
        let mut grads = net.backward(&cache, &Array2::ones(out.dim())).unwrap();
        let before = grads.clip_global_norm(1e-3);
        assert!(before > 1e-3);
        assert!((grads.global_norm() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn encoding_width() {
        let enc = encode_coords(&coord_grid(2, 3), 4);
        assert_eq!(enc.dim(), (6, 18));
        assert_eq!(SirenConfig { encoding_octaves: 4, ..SirenConfig::default() }.input_features(), 18);
    }
}
