//! Held-out evaluation: mean predictive log probability and accuracy.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Anything that yields a per-class predictive distribution for a
/// feature vector.
pub trait Predictor {
    fn num_classes(&self) -> usize;
    fn predict_probs(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Metrics {
    /// Mean log predictive probability of the true labels.
    pub mean_log_prob: f64,
    pub accuracy: f64,
    pub n: usize,
}

/// Index of the largest probability; ties resolve to the smallest
/// class index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Scores one predictive distribution per test row.
pub fn evaluate_probs(probs: &[Vec<f64>], test: &Dataset) -> Result<Metrics> {
    if probs.len() != test.n_rows() || test.n_rows() == 0 {
        return Err(Error::invalid_parameter(
            "need one predictive distribution per test row",
        ));
    }
    let mut log_prob_sum = 0.0;
    let mut correct = 0usize;
    for (row, p) in probs.iter().enumerate() {
        let label = test.label(row);
        if label >= p.len() {
            return Err(Error::invalid_state(format!(
                "test label {label} outside the {} predicted classes",
                p.len()
            )));
        }
        log_prob_sum += p[label].ln();
        if argmax(p) == label {
            correct += 1;
        }
    }
    let n = test.n_rows();
    Ok(Metrics {
        mean_log_prob: log_prob_sum / n as f64,
        accuracy: correct as f64 / n as f64,
        n,
    })
}

pub fn evaluate(predictor: &impl Predictor, test: &Dataset) -> Result<Metrics> {
    let probs: Vec<Vec<f64>> = (0..test.n_rows())
        .map(|row| predictor.predict_probs(test.row(row)))
        .collect();
    evaluate_probs(&probs, test)
}
