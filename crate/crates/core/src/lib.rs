//! Glance-vector image similarity, SSIM baselines, a SIREN image fitter and a
//! Cartesian MRI undersampling simulator.

pub mod error;
pub mod glance;
pub mod image;
pub mod inr;
pub mod loss;
pub mod mri;
pub mod pnm;
pub mod rng;
pub mod ssim;
pub mod window;

pub use error::{Error, Result};
pub use glance::{GlanceConfig, GlanceScope, Kernel, NanGuard};
pub use image::{Image, PixelCoord};
pub use loss::LossGrad;
pub use ssim::SsimConfig;
