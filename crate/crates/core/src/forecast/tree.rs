//! Greedy variance-reduction regression trees.
//!
//! Splits minimize the summed squared error of the two children, searched
//! over a per-node random feature subset. All reductions run in a canonical
//! order (rows sorted by feature value, then by target) so a fitted tree is
//! bit-for-bit reproducible and independent of input row order.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// One fitted tree. Prediction walks from the root at index 0, taking the
/// left branch when `features[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub(crate) nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }
}

pub(crate) struct GrowParams {
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Features examined per split, already resolved to a count.
    pub k_features: usize,
}

pub(crate) fn grow_tree(
    features: &Array2<f64>,
    targets: &[f64],
    sample: Vec<usize>,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let mut builder = Builder {
        features,
        targets,
        params,
        rng,
        nodes: Vec::new(),
    };
    builder.build(sample, 0);
    RegressionTree {
        nodes: builder.nodes,
    }
}

struct Builder<'a> {
    features: &'a Array2<f64>,
    targets: &'a [f64],
    params: &'a GrowParams,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len();

        // Canonical target view: sorted ascending, summed in that order, so
        // the leaf mean and parent spread do not depend on row order.
        let mut sorted_targets: Vec<f64> = rows.iter().map(|&r| self.targets[r]).collect();
        sorted_targets.sort_unstable_by(f64::total_cmp);
        let t1: f64 = sorted_targets.iter().sum();
        let t2: f64 = sorted_targets.iter().map(|y| y * y).sum();
        let leaf_value = t1 / n as f64;
        let parent_sse = t2 - t1 * t1 / n as f64;

        let at_depth_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        let constant = sorted_targets[0] == sorted_targets[n - 1];
        if at_depth_limit || n < 2 * self.params.min_leaf || constant {
            self.nodes.push(Node::Leaf { value: leaf_value });
            return self.nodes.len() - 1;
        }

        let candidates = self.sample_features();
        let mut best: Option<(f64, usize, f64)> = None; // (children sse, feature, threshold)
        for &feat in &candidates {
            let mut order: Vec<(f64, f64)> = rows
                .iter()
                .map(|&r| (self.features[[r, feat]], self.targets[r]))
                .collect();
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for i in 1..n {
                let y = order[i - 1].1;
                s1 += y;
                s2 += y * y;
                if i < self.params.min_leaf || n - i < self.params.min_leaf {
                    continue;
                }
                if order[i - 1].0 >= order[i].0 {
                    continue; // not a boundary between distinct values
                }
                let nl = i as f64;
                let nr = (n - i) as f64;
                let r1 = t1 - s1;
                let r2 = t2 - s2;
                let sse = (s2 - s1 * s1 / nl) + (r2 - r1 * r1 / nr);
                if sse.is_finite() && best.is_none_or(|(b, _, _)| sse < b) {
                    best = Some((sse, feat, split_threshold(order[i - 1].0, order[i].0)));
                }
            }
        }

        match best {
            Some((sse, feature, threshold)) if sse < parent_sse => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&r| self.features[[r, feature]] <= threshold);
                let idx = self.nodes.len();
                self.nodes.push(Node::Leaf { value: f64::NAN }); // patched below
                let left = self.build(left_rows, depth + 1);
                let right = self.build(right_rows, depth + 1);
                self.nodes[idx] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                idx
            }
            _ => {
                self.nodes.push(Node::Leaf { value: leaf_value });
                self.nodes.len() - 1
            }
        }
    }

    /// Draws `k_features` distinct feature indices, returned ascending so
    /// equal-quality splits resolve to the lowest feature index.
    fn sample_features(&mut self) -> Vec<usize> {
        let nf = self.features.ncols();
        let k = self.params.k_features.min(nf);
        let mut idx: Vec<usize> = (0..nf).collect();
        for i in 0..k {
            let j = self.rng.random_range(i..nf);
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx.sort_unstable();
        idx
    }
}

/// Midpoint of two adjacent distinct feature values, nudged down to the
/// lower value if rounding would land it on the upper one. Guarantees
/// `lo <= t < hi`, keeping the training partition and the prediction rule
/// consistent.
fn split_threshold(lo: f64, hi: f64) -> f64 {
    let t = lo * 0.5 + hi * 0.5;
    if t >= hi {
        lo
    } else {
        t.max(lo)
    }
}
