//! Greedy step-down selection shared by the pre- and post-clustering scans.

use alloc::vec::Vec;

use crate::block::Region;

/// Indices of the selected candidates in selection order.
///
/// Only candidates with `passes[k]` enter. Each round picks the surviving
/// candidate of largest `rank` (ties: smaller region in `Ord`) and drops
/// every survivor intersecting its expansion by `c`.
///
/// Processing candidates in rank order and keeping each one that misses all
/// earlier expansions gives the same result: a candidate is only ever
/// removed by a selection that outranks it.
pub(crate) fn step_down<R: Region>(
    regions: &[R],
    rank: &[f64],
    passes: &[bool],
    c: usize,
    dims: R::Dims,
) -> Vec<usize> {
    debug_assert_eq!(regions.len(), rank.len());
    debug_assert_eq!(regions.len(), passes.len());
    let mut order: Vec<usize> = (0..regions.len()).filter(|&k| passes[k]).collect();
    order.sort_unstable_by(|&a, &b| {
        rank[b]
            .total_cmp(&rank[a])
            .then_with(|| regions[a].cmp(&regions[b]))
    });
    let mut expanded: Vec<R> = Vec::new();
    let mut chosen = Vec::new();
    for k in order {
        if expanded.iter().all(|e| !e.intersects(&regions[k])) {
            expanded.push(regions[k].expand(c, dims));
            chosen.push(k);
        }
    }
    chosen
}
