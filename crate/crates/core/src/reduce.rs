//! Deterministic parallel reduction over sample blocks.
//!
//! Per-sample accumulations are split into fixed-size blocks, the blocks are
//! evaluated in parallel, and the partial results are combined by a pairwise
//! tree whose shape depends only on the block count. The result is therefore
//! bitwise identical for any thread count.

use std::ops::Range;

use rayon::prelude::*;

/// Fixed block size for per-sample accumulation.
pub(crate) const SAMPLE_BLOCK: usize = 4096;

/// Evaluates `compute` over consecutive `block`-sized ranges of `0..len` in
/// parallel and combines the partials with a pairwise tree.
pub(crate) fn block_tree_sum<T, F, G>(len: usize, block: usize, compute: F, combine: G) -> Option<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
    G: Fn(T, T) -> T + Sync + Send,
{
    if len == 0 {
        return None;
    }
    let nblocks = len.div_ceil(block);
    let mut partials: Vec<T> = (0..nblocks)
        .into_par_iter()
        .map(|b| compute(b * block..((b + 1) * block).min(len)))
        .collect();
    while partials.len() > 1 {
        let mut next = Vec::with_capacity(partials.len().div_ceil(2));
        let mut iter = partials.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        partials = next;
    }
    partials.pop()
}
