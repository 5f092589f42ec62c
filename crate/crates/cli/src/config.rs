//! Flat `key = value` run configuration.
//!
//! Every key has a default; a config file only lists what it changes. Blank
//! lines and `#` comments are ignored, unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use msglance::glance::{Aggregation, Kernel};
use msglance::inr::{AuxLoss, TrainConfig};
use msglance::mri::MaskKind;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Glance, SSIM, SIREN and optimizer settings.
    pub train: TrainConfig,
    pub accel: f64,
    pub acs: f64,
    pub mask_kind: MaskKind,
    /// Side of the square synthetic input used by ablations when no image is given.
    pub ablate_size: usize,
    /// Spread of the Gaussian kernel when `kernel = gaussian`.
    pub kernel_sigma: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train: TrainConfig::default(),
            accel: 5.0,
            acs: 0.125,
            mask_kind: MaskKind::Random,
            ablate_size: 64,
            kernel_sigma: 1.5,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{key}: expected true/false, got {value:?}")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(CliError::Usage)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        let g = &mut t.glance;
        let s = &mut t.ssim;
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "n" => g.n = parse_num(key, value)?,
            "m" => g.m = parse_num(key, value)?,
            "n_g" => g.n_g = parse_num(key, value)?,
            "m_g" => g.m_g = parse_num(key, value)?,
            "stride" => g.stride = parse_num(key, value)?,
            "c_s" => g.c_s = parse_num(key, value)?,
            "shuffles" => g.shuffles = parse_num(key, value)?,
            "air_threshold" => {
                g.air_threshold = match value {
                    "none" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "kernel" => {
                g.kernel = match value {
                    "uniform" => Kernel::Uniform,
                    "gaussian" => Kernel::Gaussian { sigma: self.kernel_sigma },
                    _ => return Err(format!("kernel: expected uniform or gaussian, got {value:?}")),
                }
            }
            "kernel_sigma" => {
                self.kernel_sigma = parse_num(key, value)?;
                if let Kernel::Gaussian { .. } = g.kernel {
                    g.kernel = Kernel::Gaussian { sigma: self.kernel_sigma };
                }
            }
            "lc_augment" => g.lc_augment = parse_bool(key, value)?,
            "aggregation" => {
                g.aggregation = match value {
                    "union" => Aggregation::Union,
                    "separate" => Aggregation::Separate,
                    _ => return Err(format!("aggregation: expected union or separate, got {value:?}")),
                }
            }
            "ssim_window" => s.window = parse_num(key, value)?,
            "ssim_stride" => s.stride = parse_num(key, value)?,
            "ssim_sigma" => s.sigma = parse_num(key, value)?,
            "ssim_k1" => s.k1 = parse_num(key, value)?,
            "ssim_k2" => s.k2 = parse_num(key, value)?,
            "ssim_peak" => s.peak = parse_num(key, value)?,
            "steps" => t.steps = parse_num(key, value)?,
            "lr" => t.lr = parse_num(key, value)?,
            "loss_kind" => {
                t.aux = AuxLoss::parse(value).ok_or_else(|| format!("loss_kind: unknown {value:?}"))?
            }
            "aux_coeff" => t.aux_coeff = parse_num(key, value)?,
            "grad_clip" => t.grad_clip = parse_num(key, value)?,
            "log_every" => t.log_every = parse_num(key, value)?,
            "hidden_width" => t.siren.hidden_width = parse_num(key, value)?,
            "depth" => t.siren.depth = parse_num(key, value)?,
            "omega0" => t.siren.omega0 = parse_num(key, value)?,
            "hidden_omega" => t.siren.hidden_omega = parse_num(key, value)?,
            "encoding_octaves" => t.siren.encoding_octaves = parse_num(key, value)?,
            "inject_nan_at" => {
                t.inject_nan_at = if value == "none" || value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|v| parse_num(key, v.trim()))
                        .collect::<Result<_, _>>()?
                }
            }
            "accel" => self.accel = parse_num(key, value)?,
            "acs" => self.acs = parse_num(key, value)?,
            "mask_kind" => {
                self.mask_kind = match value {
                    "random" => MaskKind::Random,
                    "equispaced" => MaskKind::Equispaced,
                    _ => return Err(format!("mask_kind: expected random or equispaced, got {value:?}")),
                }
            }
            "ablate_size" => self.ablate_size = parse_num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Every resolved setting except the seed, one `key=value` per line in a fixed order.
    pub fn canonical(&self) -> String {
        let t = &self.train;
        let g = &t.glance;
        let s = &t.ssim;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("n", g.n.to_string());
        put("m", g.m.to_string());
        put("n_g", g.n_g.to_string());
        put("m_g", g.m_g.to_string());
        put("stride", g.stride.to_string());
        put("c_s", g.c_s.to_string());
        put("shuffles", g.shuffles.to_string());
        put("air_threshold", g.air_threshold.map_or("none".into(), |v| v.to_string()));
        put(
            "kernel",
            match g.kernel {
                Kernel::Uniform => "uniform".into(),
                Kernel::Gaussian { sigma } => format!("gaussian:{sigma}"),
            },
        );
        put("lc_augment", g.lc_augment.to_string());
        put(
            "aggregation",
            match g.aggregation {
                Aggregation::Union => "union",
                Aggregation::Separate => "separate",
            }
            .into(),
        );
        put("ssim_window", s.window.to_string());
        put("ssim_stride", s.stride.to_string());
        put("ssim_sigma", s.sigma.to_string());
        put("ssim_k1", s.k1.to_string());
        put("ssim_k2", s.k2.to_string());
        put("ssim_peak", s.peak.to_string());
        put("steps", t.steps.to_string());
        put("lr", t.lr.to_string());
        put("loss_kind", t.aux.name().into());
        put("aux_coeff", t.aux_coeff.to_string());
        put("grad_clip", t.grad_clip.to_string());
        put("log_every", t.log_every.to_string());
        put("hidden_width", t.siren.hidden_width.to_string());
        put("depth", t.siren.depth.to_string());
        put("omega0", t.siren.omega0.to_string());
        put("hidden_omega", t.siren.hidden_omega.to_string());
        put("encoding_octaves", t.siren.encoding_octaves.to_string());
        put(
            "inject_nan_at",
            if t.inject_nan_at.is_empty() {
                "none".into()
            } else {
                t.inject_nan_at.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
            },
        );
        put("accel", self.accel.to_string());
        put("acs", self.acs.to_string());
        put(
            "mask_kind",
            match self.mask_kind {
                MaskKind::Random => "random",
                MaskKind::Equispaced => "equispaced",
            }
            .into(),
        );
        put("ablate_size", self.ablate_size.to_string());
        out
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
