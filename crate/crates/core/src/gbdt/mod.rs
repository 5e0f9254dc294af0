//! Gradient-boosted regression trees for squared-error loss.
//!
//! With squared error every row has unit hessian, so the second-order gain
//! and leaf weight reduce to residual sums: leaf value `G/(n+λ)` and split
//! gain `G_L²/(n_L+λ) + G_R²/(n_R+λ) − G²/(n+λ)`. Split search is exact
//! (every midpoint between distinct sorted values) and fully deterministic.
//!
//! Two growth strategies are available: level-by-level to a depth cap, and
//! best-first by gain to a leaf cap.

mod split;
mod tree;

use serde::{Deserialize, Serialize};

pub use split::{best_split, SplitCandidate};
pub use tree::{Node, RegressionTree};

use crate::dataset::SampleTable;
use crate::numeric::{compensated_sum, shifted_mean};
use crate::{Error, Result, Scalar};
use split::{sort_rows, SplitRules};
use tree::TreeBuilder;

pub const MODEL_FORMAT: &str = "demcorrect-gbdt";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum Growth {
    /// Expand every node level by level; `None` means unlimited depth.
    Depthwise { max_depth: Option<usize> },
    /// Repeatedly split the frontier leaf with the largest gain.
    Leafwise { max_leaves: usize },
}

impl Default for Growth {
    fn default() -> Self {
        Growth::Depthwise { max_depth: Some(6) }
    }
}

impl Growth {
    pub fn leafwise_default() -> Self {
        Growth::Leafwise { max_leaves: 31 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub growth: Growth,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Recorded for provenance; training draws no random numbers.
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.1,
            growth: Growth::default(),
            min_samples_leaf: 1,
            min_gain: 0.0,
            lambda: 1.0,
            seed: 42,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::domain("n_trees must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::domain(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::domain("min_samples_leaf must be positive"));
        }
        if !(self.min_gain >= 0.0 && self.min_gain.is_finite()) {
            return Err(Error::domain("min_gain must be a finite value >= 0"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain("lambda must be a finite value >= 0"));
        }
        match self.growth {
            Growth::Depthwise { max_depth: Some(0) } => {
                Err(Error::domain("max_depth must be positive"))
            }
            Growth::Leafwise { max_leaves } if max_leaves < 2 => {
                Err(Error::domain("max_leaves must be at least 2"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GbdtModel<T> {
    pub feature_names: Vec<String>,
    pub base_score: T,
    pub trees: Vec<RegressionTree<T>>,
    pub params: GbdtParams,
}

impl<T: Scalar> GbdtModel<T> {
    /// `base_score + Σ_t learning_rate · leaf_t(x)`, accumulated tree by tree.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        if x.len() != self.feature_names.len() {
            return Err(Error::domain(format!(
                "expected {} features, got {}",
                self.feature_names.len(),
                x.len()
            )));
        }
        let lr = T::lit(self.params.learning_rate);
        Ok(self
            .trees
            .iter()
            .fold(self.base_score, |acc, t| acc + lr * t.predict(x)))
    }

    /// Predictions after each boosting stage; entry 0 is the base score.
    pub fn staged_predict(&self, x: &[T]) -> Result<Vec<T>> {
        self.predict(x)?;
        let lr = T::lit(self.params.learning_rate);
        let mut acc = self.base_score;
        let mut out = Vec::with_capacity(self.trees.len() + 1);
        out.push(acc);
        for t in &self.trees {
            acc += lr * t.predict(x);
            out.push(acc);
        }
        Ok(out)
    }

    /// Versioned JSON document.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_names: self.feature_names.clone(),
            params: self.params,
            base_score: self.base_score,
            trees: self.trees.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument<T> =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        doc.into_model()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelDocument<T> {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub params: GbdtParams,
    pub base_score: T,
    pub trees: Vec<RegressionTree<T>>,
}

impl<T: Scalar> ModelDocument<T> {
    pub fn into_model(self) -> Result<GbdtModel<T>> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unexpected format tag `{}`", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {} (expected {MODEL_VERSION})",
                self.version
            )));
        }
        self.params
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        if self.trees.len() > self.params.n_trees {
            return Err(Error::Format(format!(
                "{} trees exceed n_trees = {}",
                self.trees.len(),
                self.params.n_trees
            )));
        }
        if !self.base_score.is_finite() {
            return Err(Error::Format("base_score is not finite".into()));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.feature_names.len())
                .map_err(|e| Error::Format(format!("tree {i}: {e}")))?;
        }
        Ok(GbdtModel {
            feature_names: self.feature_names,
            base_score: self.base_score,
            trees: self.trees,
            params: self.params,
        })
    }
}

/// Per-stage training error, recorded during fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace<T> {
    /// RMSE after the base score and after each tree.
    pub train_rmse: Vec<T>,
}

pub fn fit_gbdt<T: Scalar>(train: &SampleTable<T>, params: &GbdtParams) -> Result<GbdtModel<T>> {
    fit_gbdt_traced(train, params).map(|(m, _)| m)
}

/// Fits the ensemble and reports the training RMSE after every stage.
///
/// Boosting stops early only when a tree is a single zero-valued leaf, since
/// every later tree would be identical.
pub fn fit_gbdt_traced<T: Scalar>(
    train: &SampleTable<T>,
    params: &GbdtParams,
) -> Result<(GbdtModel<T>, FitTrace<T>)> {
    if train.is_empty() {
        return Err(Error::EmptyTable("cannot fit GBDT on an empty table".into()));
    }
    params.validate()?;
    if train.n_features() == 0 {
        return Err(Error::domain("GBDT needs at least one feature"));
    }
    let n = train.len();
    let columns: Vec<Vec<T>> = (0..train.n_features()).map(|k| train.column(k)).collect();
    let targets = train.targets();
    let base_score = shifted_mean(&targets).expect("non-empty");
    let lr = T::lit(params.learning_rate);
    let rules = SplitRules::from_params(params);

    let all_rows: Vec<usize> = (0..n).collect();
    let presorted: Vec<Vec<usize>> = columns.iter().map(|c| sort_rows(&all_rows, c)).collect();

    let mut pred = vec![base_score; n];
    let mut residuals: Vec<T> = targets.iter().map(|&y| y - base_score).collect();
    let rmse = |res: &[T]| (compensated_sum(res.iter().map(|&e| e * e)) / T::from_usize_lossy(n)).sqrt();
    let mut trace = vec![rmse(&residuals)];
    let mut trees = Vec::with_capacity(params.n_trees);

    for _ in 0..params.n_trees {
        let builder = TreeBuilder::new(&columns, &residuals, rules);
        let (tree, leaves) = builder.grow(presorted.clone(), &params.growth);
        let degenerate = tree.nodes.len() == 1 && leaves[0].value == T::zero();
        for leaf in &leaves {
            let step = lr * leaf.value;
            for &r in &leaf.rows {
                pred[r] += step;
            }
        }
        for ((res, &y), &p) in residuals.iter_mut().zip(&targets).zip(&pred) {
            *res = y - p;
        }
        trees.push(tree);
        trace.push(rmse(&residuals));
        if degenerate {
            break;
        }
    }

    Ok((
        GbdtModel {
            feature_names: train.feature_names().to_vec(),
            base_score,
            trees,
            params: *params,
        },
        FitTrace { train_rmse: trace },
    ))
}
