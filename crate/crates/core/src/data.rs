use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two aligned observation vectors: a candidate cause `x` and effect `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SamplePair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "x", index });
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "y", index });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The same observations with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    /// Split into the first `n` points and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let (xa, xb) = self.x.split_at(n);
        let (ya, yb) = self.y.split_at(n);
        (
            Self {
                x: xa.to_vec(),
                y: ya.to_vec(),
            },
            Self {
                x: xb.to_vec(),
                y: yb.to_vec(),
            },
        )
    }
}
