//! The JSON run configuration and its command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use demcorrect_core::synth::{ErrorSpec, NonlinearTerm, TermKind};
use demcorrect_core::{CollinearityThresholds, FeatureConfig, GbdtParams, Growth};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "mlr")]
    Mlr,
    #[serde(rename = "gbdt-depthwise")]
    GbdtDepthwise,
    #[serde(rename = "gbdt-leafwise")]
    GbdtLeafwise,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Mlr, ModelKind::GbdtDepthwise, ModelKind::GbdtLeafwise];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlr => "mlr",
            ModelKind::GbdtDepthwise => "gbdt-depthwise",
            ModelKind::GbdtLeafwise => "gbdt-leafwise",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected mlr, gbdt-depthwise or gbdt-leafwise)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dem: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub bare: Option<PathBuf>,
    pub urban: Option<PathBuf>,
    pub forest: Option<PathBuf>,
    pub strata: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dem: None,
            reference: None,
            bare: None,
            urban: None,
            forest: None,
            strata: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Booster settings shared by both growth strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtSettings {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for GbdtSettings {
    fn default() -> Self {
        let d = GbdtParams::default();
        Self {
            n_trees: d.n_trees,
            learning_rate: d.learning_rate,
            max_depth: 6,
            max_leaves: 31,
            min_samples_leaf: d.min_samples_leaf,
            min_gain: d.min_gain,
            lambda: d.lambda,
            seed: d.seed,
        }
    }
}

impl GbdtSettings {
    pub fn params(&self, kind: ModelKind) -> GbdtParams {
        let growth = match kind {
            ModelKind::GbdtLeafwise => Growth::Leafwise { max_leaves: self.max_leaves },
            _ => Growth::Depthwise { max_depth: Some(self.max_depth) },
        };
        GbdtParams {
            n_trees: self.n_trees,
            learning_rate: self.learning_rate,
            growth,
            min_samples_leaf: self.min_samples_leaf,
            min_gain: self.min_gain,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub rate: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            rate: 1.0,
            train_fraction: demcorrect_core::dataset::DEFAULT_TRAIN_FRACTION,
            seed: demcorrect_core::dataset::DEFAULT_SEED,
            stratified: true,
        }
    }
}

/// Which cells the evaluation report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellSet {
    All,
    /// Only cells of the held-out split.
    Test,
}

impl FromStr for CellSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(CellSet::All),
            "test" => Ok(CellSet::Test),
            _ => Err(format!("unknown cell set `{s}` (expected all or test)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluation {
    pub cells: CellSet,
}

impl Default for Evaluation {
    fn default() -> Self {
        Self { cells: CellSet::All }
    }
}

/// Synthetic benchmark scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub size_exponent: u32,
    pub base_height: f64,
    pub relief: f64,
    pub roughness_decay: f64,
    pub dem_seed: u64,
    pub landcover_seed: u64,
    pub error: ErrorSpec,
    pub cells: CellSet,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            size_exponent: 8,
            base_height: 400.0,
            relief: 300.0,
            roughness_decay: 0.45,
            dem_seed: 7,
            landcover_seed: 8,
            error: nonlinear_error(),
            cells: CellSet::Test,
        }
    }
}

/// Slope and forest offsets, an elevation-periodic bias and an urban step,
/// plus noise at a tenth of the signal spread.
pub fn nonlinear_error() -> ErrorSpec {
    ErrorSpec {
        linear_terms: BTreeMap::from([("slope".into(), 1.5), ("pct_forest".into(), 1.0)]),
        nonlinear_terms: vec![
            NonlinearTerm {
                feature: "elevation".into(),
                kind: TermKind::Sine,
                amplitude: 2.5,
                scale: 3.0,
                partner: None,
            },
            NonlinearTerm {
                feature: "urban".into(),
                kind: TermKind::Step,
                amplitude: 2.0,
                scale: 0.5,
                partner: None,
            },
        ],
        noise_std: 0.1,
        relative_noise: true,
        seed: 99,
    }
}

/// Offsets linear in land cover and elevation with low noise.
pub fn linear_error() -> ErrorSpec {
    ErrorSpec {
        linear_terms: BTreeMap::from([
            ("elevation".into(), 1.2),
            ("pct_forest".into(), 1.5),
            ("pct_bare".into(), -0.8),
            ("urban".into(), 1.0),
        ]),
        nonlinear_terms: vec![],
        noise_std: 0.05,
        relative_noise: true,
        seed: 101,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub features: FeatureConfig,
    pub collinearity: CollinearityThresholds,
    pub models: Vec<ModelKind>,
    pub gbdt: GbdtSettings,
    pub sampling: Sampling,
    pub evaluation: Evaluation,
    pub bench: BenchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            features: FeatureConfig::default(),
            collinearity: CollinearityThresholds::default(),
            models: ModelKind::ALL.to_vec(),
            gbdt: GbdtSettings::default(),
            sampling: Sampling::default(),
            evaluation: Evaluation::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let input = |e: demcorrect_core::Error| CliError::Input(e.to_string());
        if self.models.is_empty() {
            return Err(CliError::Input("at least one model must be selected".into()));
        }
        self.features.validate().map_err(input)?;
        for k in &self.models {
            if *k != ModelKind::Mlr {
                self.gbdt.params(*k).validate().map_err(input)?;
            }
        }
        self.bench.error.validate().map_err(input)?;
        let s = &self.sampling;
        if !(s.rate > 0.0 && s.rate <= 1.0) {
            return Err(CliError::Input(format!("sampling.rate must lie in (0, 1], got {}", s.rate)));
        }
        if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
            return Err(CliError::Input(format!(
                "sampling.train_fraction must lie in (0, 1), got {}",
                s.train_fraction
            )));
        }
        Ok(())
    }

    /// Digest of every setting that can change results; the output directory
    /// is left out so that relocated runs stay comparable.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.paths.out = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        crate::sha256_hex(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_document_keeps_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"models": ["mlr"], "gbdt": {"n_trees": 5}}"#).unwrap();
        assert_eq!(c.models, vec![ModelKind::Mlr]);
        assert_eq!(c.gbdt.n_trees, 5);
        assert_eq!(c.gbdt.learning_rate, 0.1);
        assert_eq!(c.sampling, Sampling::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_models_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"modles": []}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"models": ["svm"]}"#).is_err());
        let c = PipelineConfig { models: vec![], ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_ignores_output_directory() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.out = "elsewhere".into();
        assert_eq!(a.digest(), b.digest());
        b.sampling.seed += 1;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn growth_follows_model_kind() {
        let g = GbdtSettings::default();
        assert_eq!(g.params(ModelKind::GbdtDepthwise).growth, Growth::Depthwise { max_depth: Some(6) });
        assert_eq!(g.params(ModelKind::GbdtLeafwise).growth, Growth::Leafwise { max_leaves: 31 });
    }
}
