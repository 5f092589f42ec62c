//! Single-coil Cartesian undersampling: k-space transform, column masks,
//! zero-filled reconstruction and magnitude images.

mod dft;
mod mask;
mod phantom;

pub use dft::{dft2, idft2, ComplexGrid, KspaceGrid};
pub use mask::{make_mask, make_uniform_mask, ColumnMask, MaskKind};
pub use phantom::{make_phantom, PhantomKind};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{normalize_unit, Image};

#[derive(Debug, Clone)]
pub struct Undersampled {
    pub zero_filled: ComplexGrid,
    pub kspace: KspaceGrid,
}

/// Transforms `img`, zeroes every dropped column and transforms back.
pub fn undersample(img: &Image, mask: &ColumnMask) -> Result<Undersampled> {
    if mask.width != img.width() {
        return Err(Error::ShapeMismatch(format!(
            "mask width {} vs image width {}",
            mask.width,
            img.width()
        )));
    }
    let mut k = dft2(&ComplexGrid::from_image(img)?);
    for row in k.data.chunks_mut(k.width) {
        for (v, &keep) in row.iter_mut().zip(&mask.keep) {
            if !keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(Undersampled {
        zero_filled: idft2(&k),
        kspace: k,
    })
}

/// Per-pixel modulus, min-max normalized into `[0, 1]`.
pub fn magnitude(grid: &ComplexGrid) -> Image {
    let raw = Image::new(
        grid.height,
        grid.width,
        1,
        grid.data.iter().map(|z| z.norm()).collect(),
    )
    .expect("grid dimensions are consistent");
    normalize_unit(&raw)
}

/// Per-pixel modulus without normalization.
pub fn modulus(grid: &ComplexGrid) -> Vec<f64> {
    grid.data.iter().map(|z| z.norm()).collect()
}
