//! Hypothesis families: a two-feature logistic regression used as the
//! auxiliary model, and a fully connected ReLU network with a sigmoid output.

mod io;
mod logistic;
mod network;

pub use io::{read_model, write_model, SavedModel};
pub use logistic::{fit_logreg, AuxiliaryModel, FeaturePair, LogRegFit, LogRegOptions};
pub use network::{ForwardPass, Gradients, Layer, Predictor};

/// Probabilities are clipped to `[EPS, 1 - EPS]` before any logarithm.
pub const EPS: f64 = 1e-7;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn clip_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Cross-entropy of a predicted probability against a {0, 1} label.
#[inline]
pub fn logistic_loss(h: f64, y: f64) -> f64 {
    let h = clip_prob(h);
    -(y * h.ln() + (1.0 - y) * (1.0 - h).ln())
}

/// Mean and per-sample logistic loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub mean_logistic_loss: f64,
    pub per_sample: Vec<f64>,
}

impl LossReport {
    pub fn new(scores: &[f64], labels: &[f64]) -> Self {
        let per_sample: Vec<f64> = scores.iter().zip(labels).map(|(&h, &y)| logistic_loss(h, y)).collect();
        let mean_logistic_loss = if per_sample.is_empty() {
            0.0
        } else {
            per_sample.iter().sum::<f64>() / per_sample.len() as f64
        };
        Self {
            mean_logistic_loss,
            per_sample,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        assert!((logistic_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(logistic_loss(1.0 - 1e-12, 1.0) < 1e-6);
        assert!((logistic_loss(0.25, 0.0) - 0.287_682_072_451_780_9).abs() < 1e-12);
        // clipped at the boundary instead of diverging
        assert!(logistic_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn report_mean() {
        let r = LossReport::new(&[0.5, 0.25], &[1.0, 0.0]);
        assert!((r.mean_logistic_loss - (r.per_sample[0] + r.per_sample[1]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
