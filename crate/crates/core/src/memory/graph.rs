//! Exact k-nearest-neighbor graph over unit embeddings.
//!
//! Neighbor order is descending canonical cosine ([`dot`]), ties broken by
//! ascending row index. Rows are sorted by record id before the graph is
//! built, so the index tie-break is the id tie-break.
//!
//! Small inputs are compared exhaustively. Larger inputs are partitioned
//! around pivots chosen by farthest-point traversal; a whole partition is
//! skipped only when the triangle inequality proves none of its members can
//! reach the current k-th best score. Survivors are scored with the fast
//! single-precision product and the final neighbor set is re-scored with
//! [`dot`], so the result is identical to the exhaustive build. On data
//! without cluster structure nothing is pruned and the cost degrades to the
//! exhaustive one.

use std::cmp::Ordering;

use super::partition::{choose_partitions, dist_upper, Partition, PRUNE_SLACK};
use crate::embedding::{approx_margin, dot, dot_f32};

/// Inputs up to this size always use the exhaustive build.
const EXHAUSTIVE_MAX: usize = 1024;

/// Row-major view over `n` embeddings of `dim` entries.
#[derive(Clone, Copy)]
pub(crate) struct Rows<'a> {
    pub data: &'a [f32],
    pub dim: usize,
}

impl<'a> Rows<'a> {
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Strategy {
    Auto,
    // Forced variants exist so tests can compare both builds directly.
    #[cfg_attr(not(test), allow(dead_code))]
    Exhaustive,
    #[cfg_attr(not(test), allow(dead_code))]
    Partitioned,
}

/// Descending score, then ascending index. Zeros of either sign are equal.
pub(crate) fn by_score_then_index(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    (b.0 + 0.0).total_cmp(&(a.0 + 0.0)).then(a.1.cmp(&b.1))
}

/// Neighbor lists, plus the partitions used to build them (empty when the
/// build was exhaustive).
pub(crate) fn knn_graph(
    rows: Rows<'_>,
    k: usize,
    strategy: Strategy,
) -> (Vec<Vec<u32>>, Vec<Partition>) {
    let n = rows.len();
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return (vec![Vec::new(); n], Vec::new());
    }
    let partitioned = match strategy {
        Strategy::Auto => n > EXHAUSTIVE_MAX,
        Strategy::Exhaustive => false,
        Strategy::Partitioned => true,
    };
    if partitioned {
        let parts = choose_partitions(rows);
        (partitioned_graph(rows, k, &parts), parts)
    } else {
        (exhaustive_graph(rows, k), Vec::new())
    }
}

fn take_top(mut scored: Vec<(f64, u32)>, k: usize) -> Vec<u32> {
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, by_score_then_index);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_score_then_index);
    scored.into_iter().map(|(_, j)| j).collect()
}

fn exhaustive_graph(rows: Rows<'_>, k: usize) -> Vec<Vec<u32>> {
    let n = rows.len();
    let mut sims = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = dot(rows.row(i), rows.row(j));
            sims[i * n + j] = s;
            sims[j * n + i] = s;
        }
    }
    (0..n)
        .map(|i| {
            let scored = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sims[i * n + j], j as u32))
                .collect();
            take_top(scored, k)
        })
        .collect()
}

fn partitioned_graph(rows: Rows<'_>, k: usize, parts: &[Partition]) -> Vec<Vec<u32>> {
    let n = rows.len();
    let margin = approx_margin(rows.dim);

    let mut pivot_sims = vec![0.0f32; parts.len()];
    let mut order: Vec<usize> = (0..parts.len()).collect();
    let mut candidates: Vec<(f32, u32)> = Vec::new();
    // k best fast scores seen so far, ascending.
    let mut top: Vec<f32> = Vec::with_capacity(k + 1);

    (0..n)
        .map(|q| {
            let qv = rows.row(q);
            for (slot, part) in parts.iter().enumerate() {
                pivot_sims[slot] = dot_f32(qv, rows.row(part.pivot));
            }
            order
                .sort_unstable_by(|&a, &b| pivot_sims[b].total_cmp(&pivot_sims[a]).then(a.cmp(&b)));
            candidates.clear();
            top.clear();

            for &slot in &order {
                let part = &parts[slot];
                if top.len() == k {
                    let kth_dist = dist_upper(f64::from(top[0]) - margin);
                    let lower = part.min_dist(pivot_sims[slot], margin);
                    if lower > kth_dist + PRUNE_SLACK {
                        continue;
                    }
                }
                for &j in &part.members {
                    if j as usize == q {
                        continue;
                    }
                    let s = dot_f32(qv, rows.row(j as usize));
                    candidates.push((s, j));
                    if top.len() < k {
                        let at = top.partition_point(|&t| t < s);
                        top.insert(at, s);
                    } else if s > top[0] {
                        top.remove(0);
                        let at = top.partition_point(|&t| t < s);
                        top.insert(at, s);
                    }
                }
            }

            let cutoff = f64::from(top[0]) - 2.0 * margin;
            let refined = candidates
                .iter()
                .filter(|(s, _)| f64::from(*s) >= cutoff)
                .map(|&(_, j)| (dot(qv, rows.row(j as usize)), j))
                .collect();
            take_top(refined, k)
        })
        .collect()
}
