//! Batches over the candidates of the batching vertex.

use std::ops::RangeInclusive;

use crate::graph::{Label, VertexId};

/// Data vertices that may match a query vertex carrying `label`.
pub fn label_candidates(n: usize, labels: Option<&[Label]>, label: Option<Label>) -> Vec<VertexId> {
    match (labels, label) {
        (Some(ls), Some(l)) => (0..n as VertexId).filter(|&u| ls[u as usize] == l).collect(),
        _ => (0..n as VertexId).collect(),
    }
}

/// Splits a sorted candidate list into `ceil(len / batch_size)` contiguous
/// slices and returns each slice as an id range.
pub fn batch_ranges(candidates: &[VertexId], batch_size: usize) -> Vec<RangeInclusive<VertexId>> {
    candidates
        .chunks(batch_size.max(1))
        .map(|c| c[0]..=c[c.len() - 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_candidates_once() {
        let labels = vec![0, 1, 0, 0, 1, 0, 0];
        let c = label_candidates(7, Some(&labels), Some(0));
        assert_eq!(c, vec![0, 2, 3, 5, 6]);
        let r = batch_ranges(&c, 2);
        assert_eq!(r, vec![0..=2, 3..=5, 6..=6]);
        assert_eq!(batch_ranges(&c, 10).len(), 1);
        assert!(batch_ranges(&[], 3).is_empty());
        assert_eq!(label_candidates(3, None, Some(1)), vec![0, 1, 2]);
    }
}
