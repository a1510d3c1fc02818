//! Bounded noisy ReLU, the binary threshold neuron and the noise schedule.

use serde::{Deserialize, Serialize};

/// How the noise half-range grows from 0 to `T/2` over training progress.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnnealShape {
    #[default]
    Linear,
    /// `progress²`: slow start, same endpoints.
    Quadratic,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyReluConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub schedule: AnnealShape,
}

impl NoisyReluConfig {
    pub fn new(t: f64, schedule: AnnealShape) -> Self {
        Self {
            t,
            epsilon: 0.0,
            schedule,
        }
    }

    /// Sets `epsilon` for the given training progress in `[0, 1]`.
    pub fn advance(&mut self, progress: f64) {
        self.epsilon = anneal(progress, self.t, self.schedule);
    }
}

/// `clamp(x + noise, 0, T)`.
#[inline]
pub fn noisy_relu_forward(x: f64, t: f64, noise: f64) -> f64 {
    (x + noise).clamp(0.0, t)
}

/// 1 if `x ≥ T/2`, else 0.
#[inline]
pub fn threshold_forward(x: f64, t: f64) -> f64 {
    if x >= t / 2.0 {
        1.0
    } else {
        0.0
    }
}

/// Saturating-ReLU derivative, used as the backward pass for both neuron
/// kinds: 1 on the open interval `(0, T)`, else 0.
#[inline]
pub fn activation_backward(x: f64, t: f64) -> f64 {
    if x > 0.0 && x < t {
        1.0
    } else {
        0.0
    }
}

/// Noise half-range at `progress ∈ [0, 1]`; nondecreasing, from 0 to `T/2`.
pub fn anneal(progress: f64, t: f64, shape: AnnealShape) -> f64 {
    let p = progress.clamp(0.0, 1.0);
    let s = match shape {
        AnnealShape::Linear => p,
        AnnealShape::Quadratic => p * p,
    };
    0.5 * t * s
}
