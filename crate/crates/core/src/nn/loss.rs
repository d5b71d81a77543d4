use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Loss {
    Mse,
    /// smooth L1 with threshold `delta`
    Huber { delta: f64 },
}

impl Loss {
    /// Mean loss over all elements and its gradient with respect to `pred`.
    pub fn evaluate(&self, pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
        if pred.rows != target.rows || pred.cols != target.cols {
            return Err(Error::DimensionMismatch { expected: pred.data.len(), got: target.data.len() });
        }
        let n = pred.data.len() as f64;
        let mut grad = Matrix::zeros(pred.rows, pred.cols);
        let mut total = 0.0;
        for ((g, &p), &t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
            let d = p - t;
            match *self {
                Loss::Mse => {
                    total += d * d;
                    *g = 2.0 * d / n;
                }
                Loss::Huber { delta } => {
                    if d.abs() <= delta {
                        total += 0.5 * d * d / delta;
                        *g = d / delta / n;
                    } else {
                        total += d.abs() - 0.5 * delta;
                        *g = d.signum() / n;
                    }
                }
            }
        }
        Ok((total / n, grad))
    }
}
