use crate::error::{Error, Result};
use crate::features::{BalancedDataset, Feature, FeatureVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitCriterion {
    #[default]
    Gini,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub criterion: SplitCriterion,
    /// Columns the tree may split on.
    pub features: Vec<Feature>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_leaf: 5,
            criterion: SplitCriterion::Gini,
            features: Feature::ALL.to_vec(),
        }
    }
}

impl TreeParams {
    pub fn with_features(features: &[Feature]) -> Self {
        Self { features: features.to_vec(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::contract("max_depth and min_leaf must be at least 1"));
        }
        if self.features.is_empty() {
            return Err(Error::contract("tree needs at least one feature"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// `true` = Shared.
    Leaf(bool),
    Split {
        feature: Feature,
        threshold: f64,
        /// Rows with `value <= threshold`.
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn predict(&self, row: &[f64; 6]) -> bool {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(label) => return *label,
                Node::Split { feature, threshold, left, right } => {
                    node = if row[feature.index()] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// Axis-aligned binary tree over the six feature columns.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub(crate) root: Node,
}

impl DecisionTree {
    pub fn from_root(root: Node) -> Result<Self> {
        fn check(n: &Node) -> Result<()> {
            match n {
                Node::Leaf(_) => Ok(()),
                Node::Split { threshold, left, right, .. } => {
                    if !threshold.is_finite() {
                        return Err(Error::validation(format!("non-finite threshold {threshold}")));
                    }
                    check(left)?;
                    check(right)
                }
            }
        }
        check(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn predict(&self, fv: &FeatureVector) -> bool {
        self.root.predict(&fv.as_array())
    }

    pub fn predict_row(&self, row: &[f64; 6]) -> bool {
        self.root.predict(row)
    }
}

pub fn predict(tree: &DecisionTree, fv: &FeatureVector) -> bool {
    tree.predict(fv)
}

pub fn train_tree(data: &BalancedDataset, params: &TreeParams) -> Result<DecisionTree> {
    let rows: Vec<[f64; 6]> = data.instances.iter().map(|x| x.features.as_array()).collect();
    let labels: Vec<bool> = data.instances.iter().map(|x| x.label).collect();
    train_rows(&rows, &labels, params)
}

/// Greedy CART growth with Gini impurity and midpoint thresholds.
pub fn train_rows(rows: &[[f64; 6]], labels: &[bool], params: &TreeParams) -> Result<DecisionTree> {
    params.validate()?;
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::contract(format!(
            "training needs matching non-empty rows and labels ({} vs {})",
            rows.len(),
            labels.len()
        )));
    }
    if let Some(bad) = rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite feature value {bad}")));
    }
    let mut features = params.features.clone();
    features.sort();
    features.dedup();
    let grower = Grower { rows, labels, params, features };
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    Ok(DecisionTree { root: grower.grow(&mut idx, 0) })
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn majority(pos: usize, n: usize) -> bool {
    2 * pos > n
}

struct Grower<'a> {
    rows: &'a [[f64; 6]],
    labels: &'a [bool],
    params: &'a TreeParams,
    features: Vec<Feature>,
}

struct Candidate {
    feature: Feature,
    threshold: f64,
    decrease: f64,
}

impl Grower<'_> {
    fn grow(&self, idx: &mut [usize], depth: usize) -> Node {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.labels[i]).count();
        let parent = gini(pos, n);
        if parent == 0.0 || depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return Node::Leaf(majority(pos, n));
        }
        let Some(best) = self.best_split(idx, pos, parent) else {
            return Node::Leaf(majority(pos, n));
        };
        let f = best.feature.index();
        idx.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
        let cut = idx.partition_point(|&i| self.rows[i][f] <= best.threshold);
        let (l, r) = idx.split_at_mut(cut);
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }

    fn best_split(&self, idx: &mut [usize], pos: usize, parent: f64) -> Option<Candidate> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<Candidate> = None;
        for &feature in &self.features {
            let f = feature.index();
            idx.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left_pos = 0usize;
            for s in 1..n {
                if self.labels[idx[s - 1]] {
                    left_pos += 1;
                }
                let (lo, hi) = (self.rows[idx[s - 1]][f], self.rows[idx[s]][f]);
                if s < min_leaf || n - s < min_leaf || lo == hi {
                    continue;
                }
                let weighted = (s as f64 * gini(left_pos, s)
                    + (n - s) as f64 * gini(pos - left_pos, n - s))
                    / n as f64;
                let decrease = parent - weighted;
                if decrease > 1e-12 && best.as_ref().is_none_or(|b| decrease > b.decrease + 1e-12) {
                    best = Some(Candidate { feature, threshold: midpoint(lo, hi), decrease });
                }
            }
        }
        if let Some(b) = &best {
            debug_assert!(parent - b.decrease <= parent);
        }
        best
    }
}

/// A threshold in `[lo, hi)` so that `lo` goes left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row1(x: f64) -> [f64; 6] {
        [x, 0.0, 0.0, 0.0, 1.0, 0.0]
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let rows: Vec<[f64; 6]> = (0..10).map(|k| row1(k as f64)).collect();
        let t = train_rows(&rows, &[true; 10], &TreeParams::default()).unwrap();
        assert_eq!(t.root, Node::Leaf(true));
    }

    /// Exhaustive oracle: every midpoint between consecutive distinct values,
    /// scored by weighted Gini.
    fn oracle_best_threshold(xs: &[f64], ys: &[bool], min_leaf: usize) -> Option<f64> {
        let mut vals: Vec<f64> = xs.to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let n = xs.len() as f64;
        let imp = |sel: &dyn Fn(f64) -> bool| {
            let pick: Vec<bool> = xs.iter().zip(ys).filter(|(x, _)| sel(**x)).map(|(_, y)| *y).collect();
            let m = pick.len();
            let p = pick.iter().filter(|y| **y).count();
            (m, if m == 0 { 0.0 } else { 2.0 * (p as f64 / m as f64) * (1.0 - p as f64 / m as f64) })
        };
        let mut best: Option<(f64, f64)> = None;
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (nl, gl) = imp(&|x| x <= t);
            let (nr, gr) = imp(&|x| x > t);
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let score = (nl as f64 * gl + nr as f64 * gr) / n;
            if best.is_none_or(|(s, _)| score < s - 1e-12) {
                best = Some((score, t));
            }
        }
        best.map(|(_, t)| t)
    }

    #[test]
    fn separable_one_dimensional_data_splits_at_midpoint() {
        let xs = [0.1, 0.2, 0.3, 0.4, 0.4, 0.6, 0.7, 0.8, 0.9, 0.95];
        let ys: Vec<bool> = xs.iter().map(|&x| x > 0.5).collect();
        let expected = oracle_best_threshold(&xs, &ys, 1).unwrap();
        assert!((expected - 0.5).abs() < 1e-12);
        let rows: Vec<[f64; 6]> = xs.iter().map(|&x| row1(x)).collect();
        let params = TreeParams { min_leaf: 1, ..TreeParams::with_features(&[Feature::SenderItemSim]) };
        let t = train_rows(&rows, &ys, &params).unwrap();
        match &t.root {
            Node::Split { feature, threshold, left, right } => {
                assert_eq!(*feature, Feature::SenderItemSim);
                assert!((threshold - 0.5).abs() < 1e-12);
                assert_eq!(**left, Node::Leaf(false));
                assert_eq!(**right, Node::Leaf(true));
            }
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        let xs = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0, 5.5, 3.5, 8.0, 7.0];
        let ys = [false, false, true, false, true, true, false, true, false, true, true, false];
        let rows: Vec<[f64; 6]> = xs.iter().map(|&x| row1(x)).collect();
        let params = TreeParams { max_depth: 1, min_leaf: 2, ..TreeParams::with_features(&[Feature::SenderItemSim]) };
        let t = train_rows(&rows, &ys, &params).unwrap();
        let Node::Split { threshold, .. } = t.root else { panic!("no split") };
        assert_eq!(threshold, oracle_best_threshold(&xs, &ys, 2).unwrap());
    }

    #[test]
    fn identical_rows_with_mixed_labels_become_a_leaf() {
        let rows = vec![row1(0.3); 6];
        let t = train_rows(&rows, &[true, false, true, false, true, false], &TreeParams::default()).unwrap();
        assert_eq!(t.root, Node::Leaf(false), "ties go to Non-shared");
        let t = train_rows(&rows, &[true, true, true, false, true, false], &TreeParams::default()).unwrap();
        assert_eq!(t.root, Node::Leaf(true));
    }

    #[test]
    fn depth_and_leaf_limits_hold() {
        let rows: Vec<[f64; 6]> = (0..200).map(|k| row1(((k * 37) % 200) as f64)).collect();
        let ys: Vec<bool> = (0..200).map(|k| (k * 37 % 200) % 3 == 0).collect();
        for depth in 1..5 {
            let params = TreeParams { max_depth: depth, min_leaf: 3, ..TreeParams::default() };
            let t = train_rows(&rows, &ys, &params).unwrap();
            assert!(t.depth() <= depth);
        }
    }

    #[test]
    fn invalid_params_and_data_rejected() {
        let rows = vec![row1(0.1)];
        assert!(train_rows(&rows, &[true], &TreeParams { max_depth: 0, ..TreeParams::default() }).is_err());
        assert!(train_rows(&rows, &[true], &TreeParams::with_features(&[])).is_err());
        assert!(train_rows(&[], &[], &TreeParams::default()).is_err());
        assert!(train_rows(&[row1(f64::NAN)], &[true], &TreeParams::default()).is_err());
        let bad = Node::Split {
            feature: Feature::ExtRating,
            threshold: f64::INFINITY,
            left: Box::new(Node::Leaf(true)),
            right: Box::new(Node::Leaf(false)),
        };
        assert!(DecisionTree::from_root(bad).is_err());
    }

    #[test]
    fn midpoint_of_adjacent_floats_stays_below_upper() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(lo <= m && m < hi);
    }
}
