//! Synthetic classification datasets for experiments and tests.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::derive_rng;

/// Gaussian class blobs centered on a diagonal: class `c` has mean
/// `c * separation` in every dimension, standard deviation `noise_sd`.
/// Large separations make the classes axis-separable, which trees cut
/// cleanly.
pub fn gaussian_blobs(
    n_per_class: usize,
    num_classes: usize,
    dims: usize,
    separation: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || num_classes < 2 || dims == 0 {
        return Err(Error::invalid_parameter(
            "need rows, at least two classes, and a positive dimension",
        ));
    }
    let mut rng = derive_rng(seed, &[3]);
    let mut rows = Vec::with_capacity(n_per_class * num_classes);
    let mut labels = Vec::with_capacity(n_per_class * num_classes);
    for c in 0..num_classes {
        let center = c as f64 * separation;
        for _ in 0..n_per_class {
            let row: Vec<f64> = (0..dims)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    center + noise_sd * z
                })
                .collect();
            rows.push(row);
            labels.push(c);
        }
    }
    Dataset::from_rows(rows, labels, num_classes)
}

/// Two classes in `informative + noise` dimensions: the first
/// `informative` coordinates of class 1 are shifted by `shift`, all
/// remaining coordinates are standard normal for both classes. Models
/// the many-irrelevant-features regime where likelihood-guided
/// proposals matter.
pub fn two_class_shift(
    n_per_class: usize,
    informative: usize,
    noise: usize,
    shift: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || informative == 0 {
        return Err(Error::invalid_parameter(
            "need rows and at least one informative dimension",
        ));
    }
    let dims = informative + noise;
    let mut rng = derive_rng(seed, &[4]);
    let mut rows = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for c in 0..2usize {
        for _ in 0..n_per_class {
            let mut row: Vec<f64> = (0..dims)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            if c == 1 {
                for v in row.iter_mut().take(informative) {
                    *v += shift;
                }
            }
            rows.push(row);
            labels.push(c);
        }
    }
    // Interleave the classes so train/test splits stay balanced even
    // without shuffling.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let rows = order.iter().map(|&i| rows[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    Dataset::from_rows(rows, labels, 2)
}
