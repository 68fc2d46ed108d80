//! Minimal dense/recurrent numeric kernel.
//!
//! Everything runs in `f64` on plain `Vec` storage. Layers cache what their
//! backward pass needs on the mutable `forward` path; the `apply` paths are
//! read-only and safe to use from a frozen snapshot.

mod dense;
mod gradcheck;
mod grid;
mod init;
mod lstm;
mod optim;

pub use dense::{Activation, DenseGrads, DenseLayer};
pub use gradcheck::{central_difference, grad_check, relative_error, GradCheckReport, FD_STEP};
pub use grid::ValueGrid;
pub use init::glorot_uniform;
pub use lstm::{LstmCell, LstmGrads, LstmStepCache};
pub use optim::{Adam, AdamSettings, Optimizer, OptimizerKind, Sgd};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("backward called on {0} without a cached forward pass")]
    MissingForward(&'static str),
    #[error("parameter group count mismatch: expected {expected}, got {actual}")]
    GroupCountMismatch { expected: usize, actual: usize },
    #[error("non-finite value at index {index} in {context}")]
    NonFinite { context: &'static str, index: usize },
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(NnError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Gradients for a model, one flat vector per parameter group, in the same
/// order as the model's `params()` listing.
pub type ParamGrads = Vec<Vec<f64>>;

/// Flat access to trainable parameters.
///
/// Group order is fixed per type and shared by `params`, `params_mut` and
/// every gradient the type produces.
pub trait Parameterized {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len("set_flat_params", self.param_count(), flat.len())?;
        let mut offset = 0;
        for group in self.params_mut() {
            let n = group.len();
            group.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Order-sensitive hash of the exact parameter bits.
    fn param_checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for group in self.params() {
            for v in group {
                for b in v.to_bits().to_le_bytes() {
                    hash ^= u64::from(b);
                    hash = hash.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        hash
    }
}

/// Zeroed gradient buffers matching `model`'s parameter groups.
pub fn zero_grads<P: Parameterized + ?Sized>(model: &P) -> ParamGrads {
    model.params().iter().map(|p| vec![0.0; p.len()]).collect()
}

/// `acc += scale * g`, group by group.
pub fn accumulate(acc: &mut ParamGrads, g: &ParamGrads, scale: f64) {
    for (a, b) in acc.iter_mut().zip(g) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += scale * y;
        }
    }
}

pub fn flatten_grads(g: &ParamGrads) -> Vec<f64> {
    g.concat()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
