use crate::data::Dataset;
use crate::error::{Error, Result};

/// Summary of the rows routed to one node: which rows, their class
/// histogram, the feature extent along every dimension, and the
/// dimensions along which the block actually varies (the only ones a
/// split may use).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub indices: Vec<u32>,
    pub class_counts: Vec<u64>,
    /// `(min, max)` of the block along each dimension.
    pub extents: Vec<(f64, f64)>,
    /// Dimensions with strictly positive extent length, ascending.
    pub valid_dims: Vec<usize>,
}

impl BlockStats {
    pub fn total(&self) -> u64 {
        self.indices.len() as u64
    }

    pub fn extent_len(&self, dim: usize) -> f64 {
        let (lo, hi) = self.extents[dim];
        hi - lo
    }

    /// True when no dimension varies, so the node can never split.
    pub fn is_unsplittable(&self) -> bool {
        self.valid_dims.is_empty()
    }
}

/// Sorted distinct values of the given rows along `dim`.
pub fn distinct_values(data: &Dataset, indices: &[u32], dim: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = indices.iter().map(|&r| data.x(r as usize, dim)).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
    vals.dedup();
    vals
}

/// Computes [`BlockStats`] for the given rows of `data`.
pub fn block_stats(data: &Dataset, indices: &[u32]) -> Result<BlockStats> {
    if indices.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let d = data.n_dims();
    let mut class_counts = vec![0u64; data.num_classes()];
    let mut extents = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for &r in indices {
        let row = data.row(r as usize);
        class_counts[data.label(r as usize)] += 1;
        for (dim, &v) in row.iter().enumerate() {
            let e = &mut extents[dim];
            if v < e.0 {
                e.0 = v;
            }
            if v > e.1 {
                e.1 = v;
            }
        }
    }
    let valid_dims = (0..d).filter(|&dim| extents[dim].1 > extents[dim].0).collect();
    Ok(BlockStats {
        indices: indices.to_vec(),
        class_counts,
        extents,
        valid_dims,
    })
}
