use serde::{Deserialize, Serialize};

use super::split::{best_split_presorted, SplitCandidate, SplitRules};
use super::Growth;
use crate::numeric::compensated_sum;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
pub enum Node<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf { value: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionTree<T> {
    pub root: usize,
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn leaf(value: T) -> Self {
        Self {
            root: 0,
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Leaf value reached by `x`. The tree must have been validated.
    pub fn predict(&self, x: &[T]) -> T {
        let mut i = self.root;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[T]) -> usize {
        let mut i = self.root;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[i]
        {
            i = if x[feature] <= threshold { left } else { right };
        }
        i
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { .. } => best = best.max(d),
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
            }
        }
        best
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Checks that the nodes form one binary tree rooted at `root`: indices in
    /// range, every node reached exactly once, finite values, known features.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let len = self.nodes.len();
        if len == 0 {
            return Err(Error::Format("tree has no nodes".into()));
        }
        if self.root >= len {
            return Err(Error::Format(format!("root {} out of range", self.root)));
        }
        let mut seen = vec![false; len];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Format(format!(
                    "node {i} is reached twice (cycle or shared child)"
                )));
            }
            match self.nodes[i] {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Format(format!("leaf {i} has a non-finite value")));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return Err(Error::Format(format!(
                            "node {i} splits on feature {feature} of {n_features}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Format(format!("node {i} has a non-finite threshold")));
                    }
                    for child in [left, right] {
                        if child >= len {
                            return Err(Error::Format(format!(
                                "node {i} links to missing node {child}"
                            )));
                        }
                        stack.push(child);
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!("node {orphan} is unreachable from the root")));
        }
        Ok(())
    }
}

/// A node under construction: its rows sorted by every feature.
struct Pending<T> {
    id: usize,
    depth: usize,
    sorted: Vec<Vec<usize>>,
    best: Option<SplitCandidate<T>>,
}

/// A finished leaf and the training rows routed to it.
pub(crate) struct FittedLeaf<T> {
    pub value: T,
    pub rows: Vec<usize>,
}

pub(crate) struct TreeBuilder<'a, T> {
    columns: &'a [Vec<T>],
    residuals: &'a [T],
    rules: SplitRules<T>,
    nodes: Vec<Node<T>>,
    leaves: Vec<FittedLeaf<T>>,
    goes_left: Vec<bool>,
}

impl<'a, T: Scalar> TreeBuilder<'a, T> {
    pub fn new(columns: &'a [Vec<T>], residuals: &'a [T], rules: SplitRules<T>) -> Self {
        Self {
            columns,
            residuals,
            rules,
            nodes: Vec::new(),
            leaves: Vec::new(),
            goes_left: vec![false; residuals.len()],
        }
    }

    fn total(&self, rows: &[usize]) -> T {
        compensated_sum(rows.iter().map(|&r| self.residuals[r]))
    }

    fn search(&self, p: &mut Pending<T>) {
        let total = self.total(&p.sorted[0]);
        p.best = best_split_presorted(self.columns, self.residuals, &p.sorted, total, &self.rules);
    }

    fn make_leaf(&mut self, p: Pending<T>) {
        let mut rows = p.sorted.into_iter().next().expect("at least one feature");
        rows.sort_unstable();
        let value = self.total(&rows) / (T::from_usize_lossy(rows.len()) + self.rules.lambda);
        self.nodes[p.id] = Node::Leaf { value };
        self.leaves.push(FittedLeaf { value, rows });
    }

    fn alloc(&mut self) -> usize {
        self.nodes.push(Node::Leaf { value: T::zero() });
        self.nodes.len() - 1
    }

    /// Splits `p` by its best candidate into two pending children.
    fn split(&mut self, p: Pending<T>) -> (Pending<T>, Pending<T>) {
        let s = p.best.expect("split requires a candidate");
        let values = &self.columns[s.feature];
        for &r in &p.sorted[s.feature] {
            self.goes_left[r] = values[r] <= s.threshold;
        }
        let (mut left, mut right) = (Vec::with_capacity(p.sorted.len()), Vec::with_capacity(p.sorted.len()));
        for list in &p.sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.iter().partition(|&&row| self.goes_left[row]);
            left.push(l);
            right.push(r);
        }
        debug_assert_eq!(left[0].len(), s.n_left);
        let (lid, rid) = (self.alloc(), self.alloc());
        self.nodes[p.id] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            left: lid,
            right: rid,
        };
        let mk = |id, sorted| Pending {
            id,
            depth: p.depth + 1,
            sorted,
            best: None,
        };
        (mk(lid, left), mk(rid, right))
    }

    /// Grows one tree from rows presorted per feature.
    pub fn grow(mut self, sorted: Vec<Vec<usize>>, growth: &Growth) -> (RegressionTree<T>, Vec<FittedLeaf<T>>) {
        let root = self.alloc();
        let mut start = Pending {
            id: root,
            depth: 0,
            sorted,
            best: None,
        };
        match *growth {
            Growth::Depthwise { max_depth } => {
                let limit = max_depth.unwrap_or(usize::MAX);
                let mut level = vec![start];
                while !level.is_empty() {
                    let mut next = Vec::new();
                    for mut p in level {
                        if p.depth < limit {
                            self.search(&mut p);
                        }
                        if p.best.is_some() {
                            let (l, r) = self.split(p);
                            next.push(l);
                            next.push(r);
                        } else {
                            self.make_leaf(p);
                        }
                    }
                    level = next;
                }
            }
            Growth::Leafwise { max_leaves } => {
                self.search(&mut start);
                let mut frontier = vec![start];
                while frontier.len() < max_leaves.max(1) {
                    // largest gain, ties to the lowest node id
                    let pick = frontier
                        .iter()
                        .enumerate()
                        .filter_map(|(k, p)| p.best.map(|b| (k, b.gain, p.id)))
                        .fold(None::<(usize, T, usize)>, |acc, c| match acc {
                            Some(a) if c.1 < a.1 || (c.1 == a.1 && c.2 > a.2) => Some(a),
                            _ => Some(c),
                        });
                    let Some((k, _, _)) = pick else { break };
                    let p = frontier.swap_remove(k);
                    let (mut l, mut r) = self.split(p);
                    self.search(&mut l);
                    self.search(&mut r);
                    frontier.push(l);
                    frontier.push(r);
                }
                frontier.sort_by_key(|p| p.id);
                for p in frontier {
                    self.make_leaf(p);
                }
            }
        }
        (
            RegressionTree {
                root,
                nodes: self.nodes,
            },
            self.leaves,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> RegressionTree<f64> {
        RegressionTree {
            root: 0,
            nodes: vec![
                Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2 },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 1.0 },
            ],
        }
    }

    #[test]
    fn manual_walk() {
        let t = stump();
        assert_eq!(t.predict(&[2.0]), -1.0);
        assert_eq!(t.predict(&[2.5]), -1.0);
        assert_eq!(t.predict(&[3.0]), 1.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.n_leaves(), 2);
        t.validate(1).unwrap();
    }

    #[test]
    fn malformed_graphs_are_rejected() {
        let mut cyc = stump();
        cyc.nodes[0] = Node::Split { feature: 0, threshold: 1.0, left: 1, right: 0 };
        assert!(matches!(cyc.validate(1), Err(Error::Format(_))));

        let mut dangling = stump();
        dangling.nodes[0] = Node::Split { feature: 0, threshold: 1.0, left: 1, right: 7 };
        assert!(dangling.validate(1).is_err());

        let mut orphan = stump();
        orphan.nodes.push(Node::Leaf { value: 0.0 });
        assert!(orphan.validate(1).is_err());

        assert!(stump().validate(0).is_err());
        assert!(RegressionTree::<f64> { root: 0, nodes: vec![] }.validate(1).is_err());
    }
}
