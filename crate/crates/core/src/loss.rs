//! Pixelwise losses and the common loss/gradient pair.

use crate::error::Result;
use crate::image::Image;

/// A scalar loss and its gradient with respect to the prediction, laid out
/// like the prediction's sample buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl LossGrad {
    pub fn is_finite(&self) -> bool {
        self.loss.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

/// Mean squared error and its gradient.
pub fn l2_loss(reference: &Image, pred: &Image) -> Result<LossGrad> {
    reference.check_same_shape(pred)?;
    let n = pred.data().len() as f64;
    let mut loss = 0.0;
    let grad = reference
        .data()
        .iter()
        .zip(pred.data())
        .map(|(r, p)| {
            let d = p - r;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok(LossGrad {
        loss: loss / n,
        grad,
    })
}

/// Mean absolute error; the subgradient at zero difference is zero.
pub fn l1_loss(reference: &Image, pred: &Image) -> Result<LossGrad> {
    reference.check_same_shape(pred)?;
    let n = pred.data().len() as f64;
    let mut loss = 0.0;
    let grad = reference
        .data()
        .iter()
        .zip(pred.data())
        .map(|(r, p)| {
            let d = p - r;
            loss += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok(LossGrad {
        loss: loss / n,
        grad,
    })
}
