//! Sine-activated coordinate networks fitted to a single image.

mod adam;
mod scene;
mod siren;
mod train;

pub use adam::AdamState;
pub use scene::synthetic_scene;
pub use siren::{
    coord_grid, encode_coords, siren_init, ForwardCache, Layer, SirenConfig, SirenGrads, SirenNetwork,
};
pub use train::{
    fit_image, fitted_ssim, loss_and_grads, objective, AuxLoss, FitResult, LogRow, ObjectiveValue,
    TrainConfig,
};
