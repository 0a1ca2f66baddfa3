//! CART regression trees.
//!
//! Greedy squared-error splits over a random subset of columns per node.
//! Candidate thresholds are midpoints between consecutive distinct values;
//! rows go left when `value <= threshold`. Among equal reductions the lower
//! column index wins, then the lower threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::{ColumnKind, FeatureMatrix, RowView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        column: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, row: RowView<'_>) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row.get(*column) <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<f64> {
        match self {
            TreeNode::Leaf { value } => vec![*value],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }

    /// Replace each leaf's value with `value(rows reaching that leaf)`.
    pub fn refit_leaves(&mut self, x: &FeatureMatrix, rows: &[usize], value: &mut impl FnMut(&[usize]) -> f64) {
        match self {
            TreeNode::Leaf { value: v } => *v = value(rows),
            TreeNode::Split {
                column,
                threshold,
                left,
                right,
            } => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x.get(i, *column) <= *threshold);
                left.refit_leaves(x, &l, value);
                right.refit_leaves(x, &r, value);
            }
        }
    }

    pub fn max_column(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                column, left, right, ..
            } => Some(
                (*column)
                    .max(left.max_column().unwrap_or(0))
                    .max(right.max_column().unwrap_or(0)),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules bite.
    pub max_depth: Option<usize>,
    /// Columns considered per split; values at or above the width use all.
    pub max_features: usize,
    pub min_leaf: usize,
}

struct Best {
    column: usize,
    threshold: f64,
    gain: f64,
}

struct Ctx<'a> {
    x: &'a FeatureMatrix,
    targets: &'a [f64],
    params: &'a TreeParams,
    one_hot: Vec<bool>,
}

/// Fit a tree on `rows` (indices into `x`, duplicates allowed) against
/// `targets`, which is indexed by matrix row.
pub fn fit_tree<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    rows: &[usize],
    targets: &[f64],
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode {
    assert_eq!(targets.len(), x.n_rows(), "one target per matrix row");
    if rows.is_empty() {
        return TreeNode::Leaf { value: 0.0 };
    }
    let ctx = Ctx {
        x,
        targets,
        params,
        one_hot: x
            .columns()
            .iter()
            .map(|c| matches!(c.kind, ColumnKind::OneHot { .. }))
            .collect(),
    };
    let mut scratch = Vec::with_capacity(rows.len());
    grow(&ctx, rows.to_vec(), rng, 0, &mut scratch)
}

/// Nonzero statistics of one column within a node.
#[derive(Clone, Copy)]
struct NonZero {
    n: usize,
    sum: f64,
    value: f64,
    uniform: bool,
}

fn grow<R: Rng + ?Sized>(
    ctx: &Ctx<'_>,
    rows: Vec<usize>,
    rng: &mut R,
    depth: usize,
    scratch: &mut Vec<(f64, f64)>,
) -> TreeNode {
    let (x, targets, params) = (ctx.x, ctx.targets, ctx.params);
    let n = rows.len();
    if rows.iter().all(|&r| targets[r] == targets[rows[0]]) {
        return TreeNode::Leaf { value: targets[rows[0]] };
    }
    let sum: f64 = rows.iter().map(|&r| targets[r]).sum();
    let mean = sum / n as f64;
    let sse: f64 = rows.iter().map(|&r| (targets[r] - mean).powi(2)).sum();
    let leaf = TreeNode::Leaf { value: mean };
    let min_leaf = params.min_leaf.max(1);
    if sse <= 0.0 || params.max_depth.is_some_and(|d| depth >= d) || n < 2 * min_leaf {
        return leaf;
    }

    let width = x.width();
    let candidates: Vec<usize> = if params.max_features >= width {
        (0..width).collect()
    } else {
        let mut c = rand::seq::index::sample(rng, width, params.max_features.max(1)).into_vec();
        c.sort_unstable();
        c
    };

    // One-hot columns hold 0 or a single positive level value, so their only
    // split is zero versus nonzero and one pass over the stored entries gives
    // every such gain. Anything else falls back to sorting.
    let mut nonzero: Vec<Option<NonZero>> = vec![None; width];
    for &c in &candidates {
        if ctx.one_hot[c] {
            nonzero[c] = Some(NonZero {
                n: 0,
                sum: 0.0,
                value: 0.0,
                uniform: true,
            });
        }
    }
    if nonzero.iter().any(Option::is_some) {
        for &r in &rows {
            let row = x.row(r);
            for (&c, &v) in row.indices.iter().zip(row.values) {
                if v == 0.0 {
                    continue;
                }
                if let Some(s) = nonzero[c as usize].as_mut() {
                    if s.n == 0 {
                        s.value = v;
                    } else if v != s.value {
                        s.uniform = false;
                    }
                    s.n += 1;
                    s.sum += targets[r];
                }
            }
        }
    }

    let mut best: Option<Best> = None;
    let mut consider = |col: usize, threshold: f64, left_n: usize, left_sum: f64| {
        let right_n = n - left_n;
        let right_sum = sum - left_sum;
        let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64
            - sum * sum / n as f64;
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Best {
                column: col,
                threshold,
                gain,
            });
        }
    };
    for &col in &candidates {
        if let Some(s) = nonzero[col].filter(|s| s.uniform && s.value > 0.0) {
            let zeros = n - s.n;
            if s.n >= min_leaf && zeros >= min_leaf {
                consider(col, s.value / 2.0, zeros, sum - s.sum);
            }
            continue;
        }
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (x.get(r, col), targets[r])));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += scratch[i].1;
            let left_n = i + 1;
            if left_n < min_leaf {
                continue;
            }
            if n - left_n < min_leaf {
                break;
            }
            let (lo, hi) = (scratch[i].0, scratch[i + 1].0);
            if lo >= hi {
                continue;
            }
            let mid = lo + (hi - lo) / 2.0;
            consider(col, if mid < hi { mid } else { lo }, left_n, left_sum);
        }
    }

    let Some(best) = best.filter(|b| b.gain > sse * 1e-12) else {
        return leaf;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| x.get(r, best.column) <= best.threshold);
    TreeNode::Split {
        column: best.column,
        threshold: best.threshold,
        left: Box::new(grow(ctx, left, rng, depth + 1, scratch)),
        right: Box::new(grow(ctx, right, rng, depth + 1, scratch)),
    }
}
