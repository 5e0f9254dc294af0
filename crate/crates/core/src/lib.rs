//! Correction of vertical error in global DEMs.
//!
//! Terrain predictors are derived from the DEM and land-cover masks, the
//! elevation error `Δh = DEM − reference` is learned with OLS or gradient
//! boosted trees, and the corrected surface `DEM − Δĥ` is scored per
//! landscape stratum.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod grid;
pub mod linear;
pub mod model;
pub mod numeric;
pub mod scalar;
pub mod synth;
pub mod terrain;

pub use dataset::{extract_samples, split, Sample, SampleTable, Split};
pub use error::{Error, Result};
pub use eval::{
    abs_error_grid, apply_correction, build_report, compute_metrics, pct_rmse_reduction, predict_error_grid,
    render_table, EvaluationReport, Metrics, StratumReport,
};
pub use gbdt::{fit_gbdt, fit_gbdt_traced, GbdtModel, GbdtParams, Growth};
pub use grid::{align_to, difference, load_ascii_grid, save_ascii_grid, Grid, GridGeometry, Resampling};
pub use linear::{fit_ols, flag_collinear, CollinearityReport, CollinearityThresholds, LinearModel};
pub use model::{Regressor, TrainedModel};
pub use scalar::Scalar;
pub use synth::{fractal_dem, inject_error, synth_landcover, ErrorSpec, Landcover, NonlinearTerm, TermKind};
pub use terrain::{build_feature_stack, FeatureConfig, FeatureStack, WindowSpec, FEATURE_NAMES};

pub type GridF64 = Grid<f64>;
pub type GridF32 = Grid<f32>;
pub type FeatureStackF64 = FeatureStack<f64>;
pub type SampleTableF64 = SampleTable<f64>;
pub type LinearModelF64 = LinearModel<f64>;
pub type GbdtModelF64 = GbdtModel<f64>;
pub type TrainedModelF64 = TrainedModel<f64>;
