use std::fmt;

use crate::graph::VertexId;
use crate::query::QueryGraph;

/// Bucket counts per query vertex; cell `(z_1..z_n)` is served by one worker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypercubeShares {
    pub buckets: Vec<usize>,
}

impl HypercubeShares {
    pub fn cells(&self) -> usize {
        self.buckets.iter().product()
    }

    #[inline]
    pub fn coord(&self, dim: usize, u: VertexId) -> usize {
        u as usize % self.buckets[dim]
    }

    /// Mixed-radix index with the first dimension most significant.
    pub fn cell_index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.buckets).fold(0, |acc, (&z, &b)| acc * b + z)
    }

    pub fn cell_coords(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.buckets.len()];
        for (d, &b) in self.buckets.iter().enumerate().rev() {
            coords[d] = index % b;
            index /= b;
        }
        coords
    }

    /// Expected fraction of directed data edges a cell receives: `Σ_e 1/(b_a·b_c)`.
    pub fn load(&self, q: &QueryGraph) -> f64 {
        q.edges()
            .iter()
            .map(|&(a, c)| 1.0 / (self.buckets[a] * self.buckets[c]) as f64)
            .sum()
    }

    /// A match is kept only at the cell its own coordinates name.
    pub fn retains(&self, cell: &[usize], f: &[VertexId]) -> bool {
        f.iter().enumerate().all(|(i, &u)| self.coord(i, u) == cell[i])
    }
}

impl fmt::Display for HypercubeShares {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b: Vec<String> = self.buckets.iter().map(|b| b.to_string()).collect();
        write!(f, "({})", b.join(","))
    }
}

/// Enumerates bucket vectors with product at most `w`, keeps the largest
/// product, then the smallest per-cell load, then the lexicographically
/// smallest vector.
pub fn hypercube_shares(q: &QueryGraph, w: usize) -> HypercubeShares {
    assert!(w >= 1);
    let n = q.n();
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    let mut cur = vec![1; n];
    fn go(
        q: &QueryGraph,
        w: usize,
        dim: usize,
        prod: usize,
        cur: &mut Vec<usize>,
        best: &mut Option<(usize, f64, Vec<usize>)>,
    ) {
        if dim == cur.len() {
            let s = HypercubeShares { buckets: cur.clone() };
            let load = s.load(q);
            let better = match best {
                None => true,
                Some((bp, bl, bv)) => {
                    prod > *bp || (prod == *bp && (load < *bl - 1e-12 || ((load - *bl).abs() <= 1e-12 && cur < bv)))
                }
            };
            if better {
                *best = Some((prod, load, cur.clone()));
            }
            return;
        }
        // Only vectors whose product can still reach w are worth finishing.
        let remaining_dims = cur.len() - dim - 1;
        for b in 1..=w / prod {
            if remaining_dims == 0 && prod * b != w {
                continue;
            }
            cur[dim] = b;
            go(q, w, dim + 1, prod * b, cur, best);
        }
        cur[dim] = 1;
    }
    go(q, w, 0, 1, &mut cur, &mut best);
    HypercubeShares {
        buckets: best.expect("w itself is reachable").2,
    }
}
