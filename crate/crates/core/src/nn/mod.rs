//! A small deterministic feed-forward network engine with exact
//! reverse-mode gradients.
//!
//! Parameters live in one flat vector per network so that a hypernetwork can
//! emit them directly. Everything runs in `f64`.

mod adam;
mod gradcheck;
mod matrix;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_gradient, grad_check, GradCheck, LossKind, GRAD_CHECK_STEP};
pub use matrix::Matrix;
pub use mlp::{
    backward, backward_traced, forward, forward_traced, init_params, Activation, LayerLayout,
    MlpSpec, ParamVector, Trace,
};

/// Input rows of a network evaluation.
pub type Batch = Matrix;

/// Order-sensitive 64-bit hash used to detect changes in discrete state
/// (activation patterns, nearest-neighbor assignments, argmax indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint(u64);

impl Default for Fingerprint {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fingerprint {
    pub fn push(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn extend(&mut self, vs: impl IntoIterator<Item = usize>) {
        for v in vs {
            self.push(v as u64);
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }
}
