//! Pipeline stages shared by the subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use demcorrect_core::dataset::{extract_samples, split, Split};
use demcorrect_core::synth::{fractal_dem, inject_error, synth_landcover, Landcover};
use demcorrect_core::{
    apply_correction, build_feature_stack, build_report, difference, fit_gbdt_traced, fit_ols, flag_collinear,
    load_ascii_grid, predict_error_grid, CollinearityReport, EvaluationReport, FeatureStackF64, GridF64,
    SampleTableF64, TrainedModelF64,
};

use crate::config::{BenchConfig, CellSet, ModelKind, PipelineConfig, Sampling};
use crate::{sha256_hex, CliError};

/// Rasters named in the configuration, loaded and checked for a common grid.
pub struct Inputs {
    pub dem: GridF64,
    pub reference: Option<GridF64>,
    pub bare: GridF64,
    pub urban: GridF64,
    pub forest: GridF64,
    pub strata: Option<GridF64>,
}

fn require<'a>(path: &'a Option<std::path::PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    let p = path
        .as_deref()
        .ok_or_else(|| CliError::Input(format!("no {what} path given (set paths.{what} or --{what})")))?;
    if !p.exists() {
        return Err(CliError::Input(format!("{what} path does not exist: {}", p.display())));
    }
    Ok(p)
}

fn load(path: &Path, what: &str) -> Result<GridF64, CliError> {
    load_ascii_grid(path).map_err(|e| CliError::Input(format!("{what} {}: {e}", path.display())))
}

impl Inputs {
    pub fn load(cfg: &PipelineConfig, need_reference: bool, need_strata: bool) -> Result<Self, CliError> {
        let p = &cfg.paths;
        let dem = load(require(&p.dem, "dem")?, "dem")?;
        let bare = load(require(&p.bare, "bare")?, "bare")?;
        let urban = load(require(&p.urban, "urban")?, "urban")?;
        let forest = load(require(&p.forest, "forest")?, "forest")?;
        let reference = match (&p.reference, need_reference) {
            (_, true) => Some(load(require(&p.reference, "reference")?, "reference")?),
            (Some(_), false) => Some(load(require(&p.reference, "reference")?, "reference")?),
            (None, false) => None,
        };
        let strata = match (&p.strata, need_strata) {
            (_, true) => Some(load(require(&p.strata, "strata")?, "strata")?),
            (Some(_), false) => Some(load(require(&p.strata, "strata")?, "strata")?),
            (None, false) => None,
        };
        let g = *dem.geometry();
        let others = [("bare", Some(&bare)), ("urban", Some(&urban)), ("forest", Some(&forest)), ("reference", reference.as_ref()), ("strata", strata.as_ref())];
        for (what, grid) in others {
            if let Some(grid) = grid {
                g.ensure_same(grid.geometry(), what).map_err(|e| CliError::Input(e.to_string()))?;
            }
        }
        Ok(Self { dem, reference, bare, urban, forest, strata })
    }

    pub fn stack(&self, cfg: &PipelineConfig) -> Result<FeatureStackF64, CliError> {
        Ok(build_feature_stack(&self.dem, &self.bare, &self.urban, &self.forest, &cfg.features)?)
    }
}

/// Samples cells where the error is known and splits them.
pub fn training_split(
    stack: &FeatureStackF64,
    target: &GridF64,
    strata: Option<&GridF64>,
    s: &Sampling,
) -> Result<Split<f64>, CliError> {
    let table = extract_samples(stack, target, strata, s.rate, s.seed)?;
    Ok(split(&table, s.train_fraction, s.seed, s.stratified && strata.is_some())?)
}

/// Fitted models and the diagnostics produced along the way.
pub struct Trained {
    pub collinearity: CollinearityReport,
    pub models: BTreeMap<String, TrainedModelF64>,
    /// Training RMSE after each boosting stage, per GBDT model.
    pub traces: BTreeMap<String, Vec<f64>>,
}

/// MLR on the variables that survive the collinearity screen, GBDTs on all.
pub fn train_models(train: &SampleTableF64, cfg: &PipelineConfig) -> Result<Trained, CliError> {
    let collinearity = flag_collinear(train, cfg.collinearity)?;
    let mut models = BTreeMap::new();
    let mut traces = BTreeMap::new();
    for &kind in &cfg.models {
        let model = match kind {
            ModelKind::Mlr => TrainedModelF64::Linear(fit_ols(train, &collinearity.retained)?),
            _ => {
                let (m, trace) = fit_gbdt_traced(train, &cfg.gbdt.params(kind))?;
                traces.insert(kind.name().to_string(), trace.train_rmse);
                TrainedModelF64::Gbdt(m)
            }
        };
        models.insert(kind.name().to_string(), model);
    }
    Ok(Trained { collinearity, models, traces })
}

pub fn model_digest(model: &TrainedModelF64) -> Result<String, CliError> {
    Ok(sha256_hex(model.to_json()?.as_bytes()))
}

/// Corrected DEM per model.
pub fn correct_all(
    models: &BTreeMap<String, TrainedModelF64>,
    stack: &FeatureStackF64,
    dem: &GridF64,
) -> Result<BTreeMap<String, GridF64>, CliError> {
    models
        .iter()
        .map(|(name, m)| {
            let dh = predict_error_grid(m.as_regressor(), stack)?;
            Ok((name.clone(), apply_correction(dem, &dh)?))
        })
        .collect()
}

/// Strata grid with every cell outside `table` set to nodata.
pub fn restrict_to_rows(strata: &GridF64, table: &SampleTableF64) -> Result<GridF64, CliError> {
    let mut keep = vec![false; strata.geometry().len()];
    for s in table.rows() {
        keep[strata.index(s.row, s.col)] = true;
    }
    let ncols = strata.ncols();
    Ok(GridF64::from_fn(*strata.geometry(), strata.nodata(), |r, c| {
        if keep[r * ncols + c] {
            strata.get(r, c)
        } else {
            None
        }
    })?)
}

pub fn report(
    reference: &GridF64,
    original: &GridF64,
    corrected: &BTreeMap<String, GridF64>,
    strata: &GridF64,
    models: &BTreeMap<String, TrainedModelF64>,
) -> Result<EvaluationReport, CliError> {
    let digests = models
        .iter()
        .map(|(n, m)| Ok((n.clone(), model_digest(m)?)))
        .collect::<Result<BTreeMap<_, _>, CliError>>()?;
    Ok(build_report(reference, original, corrected, strata, &digests)?)
}

/// Synthetic scene: the clean surface is the reference.
pub struct Scene {
    pub reference: GridF64,
    pub degraded: GridF64,
    pub true_dh: GridF64,
    pub landcover: Landcover<f64>,
}

pub fn synth_scene(bench: &BenchConfig, cfg: &PipelineConfig) -> Result<Scene, CliError> {
    let reference = fractal_dem(bench.size_exponent, bench.base_height, bench.relief, bench.roughness_decay, bench.dem_seed)?;
    let landcover = synth_landcover(&reference, bench.landcover_seed)?;
    let clean = build_feature_stack(&reference, &landcover.bare, &landcover.urban, &landcover.forest, &cfg.features)?;
    let injected = inject_error(&reference, &clean, &bench.error)?;
    Ok(Scene { reference, degraded: injected.degraded, true_dh: injected.true_dh, landcover })
}

pub struct BenchOutcome {
    pub scene: Scene,
    pub split: Split<f64>,
    pub trained: Trained,
    pub report: EvaluationReport,
}

/// Generate, degrade, train every selected model on features of the
/// degraded DEM, correct and score.
pub fn run_bench(cfg: &PipelineConfig) -> Result<BenchOutcome, CliError> {
    let scene = synth_scene(&cfg.bench, cfg)?;
    let lc = &scene.landcover;
    let stack = build_feature_stack(&scene.degraded, &lc.bare, &lc.urban, &lc.forest, &cfg.features)?;
    let target = difference(&scene.degraded, &scene.reference)?;
    let split = training_split(&stack, &target, Some(&lc.strata), &cfg.sampling)?;
    let trained = train_models(&split.train, cfg)?;
    let corrected = correct_all(&trained.models, &stack, &scene.degraded)?;
    let strata = match cfg.bench.cells {
        CellSet::Test => restrict_to_rows(&lc.strata, &split.test)?,
        CellSet::All => lc.strata.clone(),
    };
    let mut report = report(&scene.reference, &scene.degraded, &corrected, &strata, &trained.models)?;
    report.warnings.extend(split.warnings.iter().cloned());
    Ok(BenchOutcome { scene, split, trained, report })
}
