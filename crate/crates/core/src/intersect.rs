//! Sorted-list intersection kernels.

use crate::graph::VertexId;

const GALLOP_RATIO: usize = 32;

/// Appends `a ∩ b` to `out`. Both inputs must be strictly increasing.
pub fn intersect_into(a: &[VertexId], b: &[VertexId], out: &mut Vec<VertexId>) {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return;
    }
    if large.len() / small.len() >= GALLOP_RATIO {
        gallop(small, large, out);
    } else {
        merge(small, large, out);
    }
}

pub fn intersect(a: &[VertexId], b: &[VertexId]) -> Vec<VertexId> {
    let mut out = Vec::new();
    intersect_into(a, b, &mut out);
    out
}

/// In-place `acc = acc ∩ other`.
pub fn retain_intersection(acc: &mut Vec<VertexId>, other: &[VertexId]) {
    let mut j = 0;
    acc.retain(|&x| {
        while j < other.len() && other[j] < x {
            j += 1;
        }
        j < other.len() && other[j] == x
    });
}

fn merge(a: &[VertexId], b: &[VertexId], out: &mut Vec<VertexId>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

fn gallop(small: &[VertexId], mut large: &[VertexId], out: &mut Vec<VertexId>) {
    for &x in small {
        let mut step = 1;
        while step < large.len() && large[step] < x {
            step *= 2;
        }
        let hi = (step + 1).min(large.len());
        match large[..hi].binary_search(&x) {
            Ok(i) => {
                out.push(x);
                large = &large[i + 1..];
            }
            Err(i) => large = &large[i..],
        }
        if large.is_empty() {
            break;
        }
    }
}
