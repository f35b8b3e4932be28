//! Pivot partitions over unit embeddings.
//!
//! Rows are grouped around pivots picked by farthest-point traversal. Each
//! partition records an upper bound on the Euclidean distance from its pivot
//! to any member, so the triangle inequality bounds the score any member can
//! reach against a query. Both the neighbor-graph build and entry-point
//! search skip partitions that provably cannot contribute.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::graph::Rows;
use crate::embedding::{approx_margin, dot_f32};

/// Extra Euclidean slack applied before a partition may be skipped. It
/// absorbs the single-precision error of the pivot scores and the 1e-6
/// norm tolerance of stored embeddings.
pub(crate) const PRUNE_SLACK: f64 = 0.01;

/// Lower bound on Euclidean distance given an upper bound on the dot product.
pub(crate) fn dist_lower(sim_upper: f64) -> f64 {
    (2.0 - 2.0 * sim_upper - 1e-5).max(0.0).sqrt()
}

/// Upper bound on Euclidean distance given a lower bound on the dot product.
pub(crate) fn dist_upper(sim_lower: f64) -> f64 {
    (2.0 - 2.0 * sim_lower + 1e-5).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Partition {
    pub pivot: usize,
    pub members: Vec<u32>,
    pub radius: f64,
}

impl Partition {
    /// Lower bound on the distance from a query to any member, given the
    /// query's fast score against the pivot.
    pub fn min_dist(&self, pivot_sim: f32, margin: f64) -> f64 {
        dist_lower(f64::from(pivot_sim) + margin) - self.radius
    }
}

/// Splits rows into roughly `sqrt(n)` partitions.
pub(crate) fn choose_partitions(rows: Rows<'_>) -> Vec<Partition> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let margin = approx_margin(rows.dim);
    let target = ((n as f64).sqrt().ceil() as usize).clamp(8, 1024).min(n);
    let mut pivots = vec![0usize];
    let mut best = vec![f32::NEG_INFINITY; n];
    let mut owner = vec![0u32; n];

    let assign = |p_slot: usize, p: usize, best: &mut [f32], owner: &mut [u32]| {
        let pv = rows.row(p);
        for i in 0..n {
            let s = dot_f32(rows.row(i), pv);
            if s > best[i] {
                best[i] = s;
                owner[i] = p_slot as u32;
            }
        }
    };
    assign(0, 0, &mut best, &mut owner);
    while pivots.len() < target {
        // Farthest point from every pivot so far; lowest index on ties.
        let (next, score) =
            best.iter()
                .enumerate()
                .fold((0usize, f32::INFINITY), |acc, (i, &s)| {
                    if s < acc.1 {
                        (i, s)
                    } else {
                        acc
                    }
                });
        if f64::from(score) >= 1.0 - margin {
            break;
        }
        let slot = pivots.len();
        pivots.push(next);
        assign(slot, next, &mut best, &mut owner);
    }

    let mut parts: Vec<Partition> = pivots
        .iter()
        .map(|&pivot| Partition {
            pivot,
            members: Vec::new(),
            radius: 0.0,
        })
        .collect();
    for i in 0..n {
        let part = &mut parts[owner[i] as usize];
        part.members.push(i as u32);
        part.radius = part.radius.max(dist_upper(f64::from(best[i]) - margin));
    }
    parts
}

/// Fast scores of every row that a linear scan would keep: rows scoring at
/// least `floor`, restricted to those that may still be among the `wanted`
/// best. A row is left out only when it scores below `floor` or at least
/// `wanted` kept rows beat it by more than `2 * margin`.
pub(crate) fn search(
    parts: &[Partition],
    rows: Rows<'_>,
    query: &[f32],
    floor: f64,
    wanted: usize,
) -> Vec<(f32, u32)> {
    let margin = approx_margin(rows.dim);
    let mut order: Vec<(f32, usize)> = parts
        .iter()
        .enumerate()
        .map(|(slot, p)| (dot_f32(query, rows.row(p.pivot)), slot))
        .collect();
    order.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut kept = Vec::new();
    // The `wanted` best kept scores; the heap top is the smallest of them.
    let mut top: BinaryHeap<Reverse<OrdF32>> = BinaryHeap::with_capacity(wanted + 1);
    for (pivot_sim, slot) in order {
        let part = &parts[slot];
        let d = (part.min_dist(pivot_sim, margin) - PRUNE_SLACK).max(0.0);
        let reachable = 1.0 - d * d / 2.0 + margin;
        if reachable < floor {
            continue;
        }
        if top.len() == wanted {
            let Reverse(OrdF32(kth)) = top.peek().copied().expect("heap is full");
            if reachable < f64::from(kth) - 2.0 * margin {
                continue;
            }
        }
        for &j in &part.members {
            let s = dot_f32(query, rows.row(j as usize));
            if f64::from(s) < floor {
                continue;
            }
            kept.push((s, j));
            top.push(Reverse(OrdF32(s)));
            if top.len() > wanted {
                top.pop();
            }
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF32(f32);

impl Eq for OrdF32 {}

impl PartialOrd for OrdF32 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF32 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
