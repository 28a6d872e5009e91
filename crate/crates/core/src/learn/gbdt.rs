//! Gradient-boosted regression trees with squared-error loss.
//!
//! Each round fits a depth-limited tree to the current residuals using
//! greedy variance-reduction splits, then adds it scaled by the learning
//! rate. Split candidates are the midpoints of consecutive distinct sorted
//! feature values; on equal gain the lowest feature index wins, then the
//! lowest threshold. Trees are grown level by level with one pass over the
//! presorted samples per feature and level.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Recorded for provenance; training itself draws no randomness.
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf: 5,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be in (0, 1]".into(),
            ));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidConfig("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Regression tree node. Samples with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    /// Mean of the training labels.
    pub base_prediction: f64,
    pub trees: Vec<Node>,
    pub params: GbdtParams,
    pub n_features: usize,
}

impl GbdtModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_rounds(x, self.trees.len())
    }

    /// Prediction using only the first `rounds` trees.
    pub fn predict_rounds(&self, x: &[f64], rounds: usize) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let eta = self.params.learning_rate;
        Ok(self.base_prediction
            + self.trees[..rounds.min(self.trees.len())]
                .iter()
                .map(|t| eta * t.eval(x))
                .sum::<f64>())
    }
}

/// Arena node used while growing a tree.
#[derive(Debug, Clone)]
struct Growing {
    sum: f64,
    count: usize,
    split: Option<(usize, f64, usize, usize)>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Per-frontier-node scan state for one feature pass.
#[derive(Debug, Clone, Copy)]
struct Scan {
    sum_left: f64,
    n_left: usize,
    last: f64,
}

/// Fits `params.rounds` trees to `(x, y)`.
pub fn train_gbdt(x: &[Vec<f64>], y: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n_features = x[0].len();
    for row in x {
        if row.len() != n_features {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }

    let n = y.len();
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|f| x.iter().map(|row| row[f]).collect())
        .collect();
    let order: Vec<Vec<u32>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut node_of = vec![0u32; n];

    for _ in 0..params.rounds {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        let (tree, leaf_value) = grow_tree(&columns, &order, &residual, params, &mut node_of);
        for i in 0..n {
            pred[i] += params.learning_rate * leaf_value[node_of[i] as usize];
        }
        trees.push(tree);
    }

    Ok(GbdtModel {
        base_prediction: base,
        trees,
        params: *params,
        n_features,
    })
}

/// Grows one tree on `residual`. Returns the tree and, indexed by arena
/// node, the leaf value; `node_of` is left holding each sample's leaf.
fn grow_tree(
    columns: &[Vec<f64>],
    order: &[Vec<u32>],
    residual: &[f64],
    params: &GbdtParams,
    node_of: &mut [u32],
) -> (Node, Vec<f64>) {
    let n = residual.len();
    node_of.iter_mut().for_each(|v| *v = 0);
    let mut arena = vec![Growing {
        sum: residual.iter().sum(),
        count: n,
        split: None,
    }];
    let mut frontier: Vec<usize> = vec![0];
    // arena index -> slot in the current frontier, u32::MAX when inactive
    let mut slot_of: Vec<u32> = vec![0];

    for _depth in 0..params.max_depth {
        frontier.retain(|&k| arena[k].count >= 2 * params.min_leaf);
        if frontier.is_empty() {
            break;
        }
        slot_of.iter_mut().for_each(|s| *s = u32::MAX);
        for (s, &k) in frontier.iter().enumerate() {
            slot_of[k] = s as u32;
        }

        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        let mut scan = vec![
            Scan {
                sum_left: 0.0,
                n_left: 0,
                last: 0.0,
            };
            frontier.len()
        ];
        for (feature, (col, ord)) in columns.iter().zip(order).enumerate() {
            scan.iter_mut().for_each(|s| {
                s.sum_left = 0.0;
                s.n_left = 0;
            });
            for &i in ord {
                let i = i as usize;
                let slot = slot_of[node_of[i] as usize];
                if slot == u32::MAX {
                    continue;
                }
                let slot = slot as usize;
                let node = &arena[frontier[slot]];
                let st = &mut scan[slot];
                let v = col[i];
                if st.n_left > 0 && v > st.last {
                    let n_right = node.count - st.n_left;
                    if st.n_left >= params.min_leaf && n_right >= params.min_leaf {
                        let sum_right = node.sum - st.sum_left;
                        let gain = st.sum_left * st.sum_left / st.n_left as f64
                            + sum_right * sum_right / n_right as f64
                            - node.sum * node.sum / node.count as f64;
                        if gain > 0.0 && best[slot].is_none_or(|b| gain > b.gain) {
                            best[slot] = Some(Candidate {
                                gain,
                                feature,
                                threshold: midpoint(st.last, v),
                            });
                        }
                    }
                }
                st.sum_left += residual[i];
                st.n_left += 1;
                st.last = v;
            }
        }

        let mut next = Vec::new();
        let mut any = false;
        for (slot, &k) in frontier.iter().enumerate() {
            let Some(c) = best[slot] else { continue };
            any = true;
            let l = arena.len();
            arena.push(Growing {
                sum: 0.0,
                count: 0,
                split: None,
            });
            arena.push(Growing {
                sum: 0.0,
                count: 0,
                split: None,
            });
            slot_of.push(u32::MAX);
            slot_of.push(u32::MAX);
            arena[k].split = Some((c.feature, c.threshold, l, l + 1));
            next.push(l);
            next.push(l + 1);
        }
        if !any {
            break;
        }
        for i in 0..n {
            let k = node_of[i] as usize;
            if let Some((f, t, l, r)) = arena[k].split {
                let child = if columns[f][i] < t { l } else { r };
                node_of[i] = child as u32;
                arena[child].sum += residual[i];
                arena[child].count += 1;
            }
        }
        frontier = next;
    }

    let leaf_value: Vec<f64> = arena
        .iter()
        .map(|g| {
            if g.count == 0 {
                0.0
            } else {
                g.sum / g.count as f64
            }
        })
        .collect();
    (assemble(&arena, &leaf_value, 0), leaf_value)
}

fn assemble(arena: &[Growing], leaf_value: &[f64], k: usize) -> Node {
    match arena[k].split {
        None => Node::Leaf {
            value: leaf_value[k],
        },
        Some((feature, threshold, l, r)) => Node::Split {
            feature,
            threshold,
            left: Box::new(assemble(arena, leaf_value, l)),
            right: Box::new(assemble(arena, leaf_value, r)),
        },
    }
}

/// Threshold strictly above `lo` and at most `hi`, so `lo` routes left and
/// `hi` routes right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}
