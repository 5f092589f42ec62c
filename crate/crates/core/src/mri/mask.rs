//! Cartesian column masks with a fully sampled auto-calibration block.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Non-calibration columns drawn uniformly without replacement.
    Random,
    /// Non-calibration columns spread evenly with a random offset.
    Equispaced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMask {
    pub width: usize,
    pub keep: Vec<bool>,
    pub accel: f64,
    pub acs_fraction: f64,
    /// Width of the centered calibration block, `round(acs_fraction * width)`.
    pub acs_columns: usize,
    /// Set when the calibration block alone exceeds the `round(width / accel)` budget.
    pub acs_exceeds_budget: bool,
}

impl ColumnMask {
    /// Keeps every column.
    pub fn full(width: usize) -> Self {
        Self {
            width,
            keep: vec![true; width],
            accel: 1.0,
            acs_fraction: 1.0,
            acs_columns: width,
            acs_exceeds_budget: false,
        }
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// `width / kept`.
    pub fn effective_acceleration(&self) -> f64 {
        self.width as f64 / self.kept() as f64
    }

    /// First column of the centered calibration block.
    pub fn acs_start(&self) -> usize {
        acs_start(self.width, self.acs_columns)
    }

    /// Single CSV line of 0/1 flags.
    pub fn to_csv_line(&self) -> String {
        self.keep
            .iter()
            .map(|&k| if k { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn acs_start(width: usize, acs: usize) -> usize {
    (width - acs).div_ceil(2)
}

pub fn make_uniform_mask<R: Rng + ?Sized>(
    width: usize,
    accel: f64,
    acs_fraction: f64,
    rng: &mut R,
) -> Result<ColumnMask> {
    make_mask(width, accel, acs_fraction, MaskKind::Random, rng)
}

pub fn make_mask<R: Rng + ?Sized>(
    width: usize,
    accel: f64,
    acs_fraction: f64,
    kind: MaskKind,
    rng: &mut R,
) -> Result<ColumnMask> {
    if !(accel > 1.0) || !accel.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "acceleration must be greater than 1, got {accel}"
        )));
    }
    if !(acs_fraction > 0.0 && acs_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "calibration fraction must be in (0, 1], got {acs_fraction}"
        )));
    }
    let acs = (acs_fraction * width as f64).round() as usize;
    if acs == 0 {
        return Err(Error::InvalidArgument(format!(
            "calibration block rounds to zero columns for width {width}"
        )));
    }
    let budget = (width as f64 / accel).round() as usize;
    let start = acs_start(width, acs);

    let mut keep = vec![false; width];
    keep[start..start + acs].iter_mut().for_each(|k| *k = true);

    let extra = budget.saturating_sub(acs);
    let outside: Vec<usize> = (0..width).filter(|&c| !keep[c]).collect();
    let extra = extra.min(outside.len());
    if extra > 0 {
        match kind {
            MaskKind::Random => {
                for i in index::sample(rng, outside.len(), extra).iter() {
                    keep[outside[i]] = true;
                }
            }
            MaskKind::Equispaced => {
                let spacing = outside.len() as f64 / extra as f64;
                let offset = rng.gen::<f64>() * spacing;
                for i in 0..extra {
                    let pos = ((offset + i as f64 * spacing) as usize).min(outside.len() - 1);
                    keep[outside[pos]] = true;
                }
            }
        }
    }

    Ok(ColumnMask {
        width,
        keep,
        accel,
        acs_fraction,
        acs_columns: acs,
        acs_exceeds_budget: acs > budget,
    })
}
