//! Scaled-down timing inputs for the criterion benches.

use angemb_core::synth::{timing_matrix, TIMING_SHAPES};
use angemb_core::{DataMatrix, Result};

/// Planted rank of every bench matrix.
pub const RANK: usize = 5;

/// The named timing shapes with the ambient dimension divided by `scale`.
pub fn scaled_inputs(scale: usize) -> Result<Vec<(&'static str, DataMatrix)>> {
    let scale = scale.max(1);
    TIMING_SHAPES
        .iter()
        .map(|&(name, dim, n)| Ok((name, timing_matrix((dim / scale).max(RANK + 1), n, RANK, 7)?)))
        .collect()
}
