//! One function per subcommand. Each returns the files it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use demcorrect_core::{
    abs_error_grid, apply_correction, difference, predict_error_grid, render_table, FeatureConfig,
    GridGeometry, TrainedModelF64,
};
use serde::Serialize;

use crate::config::{CellSet, PipelineConfig};
use crate::pipeline::{self, Inputs};
use crate::{sha256_hex, write_bytes, write_json, CliError, Provenance};

fn save(grid: &demcorrect_core::GridF64, path: &Path) -> Result<(), CliError> {
    write_bytes(path, demcorrect_core::grid::write_ascii_grid(grid).as_bytes())
}

#[derive(Serialize)]
struct LayerEntry {
    name: String,
    file: String,
    sha256: String,
    valid_cells: usize,
}

#[derive(Serialize)]
struct Manifest {
    geometry: GridGeometry,
    windows: FeatureConfig,
    layers: Vec<LayerEntry>,
}

/// Writes the eleven predictor rasters and a manifest with their checksums.
pub fn features(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let inputs = Inputs::load(cfg, false, false)?;
    let stack = inputs.stack(cfg)?;
    let dir = cfg.paths.out.join("features");
    let mut written = Vec::new();
    let mut layers = Vec::new();
    for (name, layer) in stack.names().iter().zip(stack.layers()) {
        let file = format!("{name}.asc");
        let text = demcorrect_core::grid::write_ascii_grid(layer);
        let path = dir.join(&file);
        write_bytes(&path, text.as_bytes())?;
        layers.push(LayerEntry {
            name: name.clone(),
            file,
            sha256: sha256_hex(text.as_bytes()),
            valid_cells: layer.valid_count(),
        });
        written.push(path);
    }
    let manifest = dir.join("manifest.json");
    write_json(
        &manifest,
        &Manifest { geometry: *stack.geometry(), windows: cfg.features, layers },
        &Provenance::new("features", cfg),
    )?;
    written.push(manifest);
    Ok(written)
}

fn target_of(inputs: &Inputs) -> Result<demcorrect_core::GridF64, CliError> {
    let reference = inputs.reference.as_ref().expect("reference loaded");
    Ok(difference(&inputs.dem, reference)?)
}

/// Collinearity screen of the training split.
pub fn diagnose(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let inputs = Inputs::load(cfg, true, false)?;
    let stack = inputs.stack(cfg)?;
    let split = pipeline::training_split(&stack, &target_of(&inputs)?, inputs.strata.as_ref(), &cfg.sampling)?;
    let report = demcorrect_core::flag_collinear(&split.train, cfg.collinearity)?;
    let path = cfg.paths.out.join("diagnostics").join("collinearity.json");
    write_json(&path, &report, &Provenance::new("diagnose", cfg))?;
    Ok(vec![path])
}

fn model_path(out: &Path, name: &str) -> PathBuf {
    out.join("models").join(format!("{name}.json"))
}

fn write_model(path: &Path, model: &TrainedModelF64, prov: &Provenance) -> Result<(), CliError> {
    let value: serde_json::Value =
        serde_json::from_str(&model.to_json()?).map_err(|e| CliError::Internal(e.to_string()))?;
    write_json(path, &value, prov)
}

#[derive(Serialize)]
struct TrainingSummary {
    train_rows: usize,
    test_rows: usize,
    warnings: Vec<String>,
    mlr_features: Option<Vec<String>>,
    final_train_rmse: BTreeMap<String, f64>,
    model_sha256: BTreeMap<String, String>,
}

/// Fits the selected models and writes one document per model.
pub fn train(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let inputs = Inputs::load(cfg, true, false)?;
    let stack = inputs.stack(cfg)?;
    let split = pipeline::training_split(&stack, &target_of(&inputs)?, inputs.strata.as_ref(), &cfg.sampling)?;
    let trained = pipeline::train_models(&split.train, cfg)?;
    let prov = Provenance::new("train", cfg);
    let mut written = Vec::new();
    let mut digests = BTreeMap::new();
    for (name, model) in &trained.models {
        let path = model_path(&cfg.paths.out, name);
        write_model(&path, model, &prov)?;
        digests.insert(name.clone(), pipeline::model_digest(model)?);
        written.push(path);
    }
    let summary = TrainingSummary {
        train_rows: split.train.len(),
        test_rows: split.test.len(),
        warnings: split.warnings.clone(),
        mlr_features: trained.models.values().find_map(|m| match m {
            TrainedModelF64::Linear(l) => Some(l.feature_names.clone()),
            _ => None,
        }),
        final_train_rmse: trained
            .traces
            .iter()
            .filter_map(|(n, t)| t.last().map(|v| (n.clone(), *v)))
            .collect(),
        model_sha256: digests,
    };
    let path = cfg.paths.out.join("models").join("training.json");
    write_json(&path, &summary, &prov)?;
    let coll = cfg.paths.out.join("diagnostics").join("collinearity.json");
    write_json(&coll, &trained.collinearity, &prov)?;
    written.push(path);
    written.push(coll);
    Ok(written)
}

/// A model named on the command line: either a selection name resolved under
/// `<out>/models/` or a path to a document.
fn resolve_models(cfg: &PipelineConfig, refs: &[String]) -> Result<BTreeMap<String, TrainedModelF64>, CliError> {
    let refs: Vec<String> = if refs.is_empty() {
        cfg.models.iter().map(|m| m.name().to_string()).collect()
    } else {
        refs.to_vec()
    };
    let mut out = BTreeMap::new();
    for r in refs {
        let (name, path) = if r.ends_with(".json") || r.contains(std::path::MAIN_SEPARATOR) {
            let p = PathBuf::from(&r);
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
            (stem, p)
        } else {
            (r.clone(), model_path(&cfg.paths.out, &r))
        };
        if !path.exists() {
            return Err(CliError::Input(format!("model document does not exist: {}", path.display())));
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let model = TrainedModelF64::from_json(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        out.insert(name, model);
    }
    Ok(out)
}

/// Corrected DEM and, with a reference, the absolute-error raster per model.
pub fn correct(cfg: &PipelineConfig, refs: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let models = resolve_models(cfg, refs)?;
    let inputs = Inputs::load(cfg, false, false)?;
    let stack = inputs.stack(cfg)?;
    let dir = cfg.paths.out.join("corrected");
    let mut written = Vec::new();
    for (name, model) in &models {
        let dh = predict_error_grid(model.as_regressor(), &stack)?;
        let corrected = apply_correction(&inputs.dem, &dh)?;
        let p = dir.join(format!("{name}.asc"));
        save(&corrected, &p)?;
        written.push(p);
        let p = dir.join(format!("{name}_dh.asc"));
        save(&dh, &p)?;
        written.push(p);
        if let Some(reference) = &inputs.reference {
            let p = dir.join(format!("{name}_abs_error.asc"));
            save(&abs_error_grid(&corrected, reference)?, &p)?;
            written.push(p);
        }
    }
    if let Some(reference) = &inputs.reference {
        let p = dir.join("original_abs_error.asc");
        save(&abs_error_grid(&inputs.dem, reference)?, &p)?;
        written.push(p);
    }
    Ok(written)
}

fn write_report(
    dir: &Path,
    report: &demcorrect_core::EvaluationReport,
    prov: &Provenance,
) -> Result<Vec<PathBuf>, CliError> {
    let json = dir.join("report.json");
    write_json(&json, report, prov)?;
    let txt = dir.join("report.txt");
    write_bytes(&txt, render_table(report).as_bytes())?;
    Ok(vec![json, txt])
}

/// Per-stratum accuracy of the original and corrected DEMs.
pub fn evaluate(cfg: &PipelineConfig, refs: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let models = resolve_models(cfg, refs)?;
    let inputs = Inputs::load(cfg, true, true)?;
    let stack = inputs.stack(cfg)?;
    let reference = inputs.reference.as_ref().expect("reference loaded");
    let mut strata = inputs.strata.clone().expect("strata loaded");
    if cfg.evaluation.cells == CellSet::Test {
        let split = pipeline::training_split(&stack, &target_of(&inputs)?, Some(&strata), &cfg.sampling)?;
        strata = pipeline::restrict_to_rows(&strata, &split.test)?;
    }
    let corrected = pipeline::correct_all(&models, &stack, &inputs.dem)?;
    let report = pipeline::report(reference, &inputs.dem, &corrected, &strata, &models)?;
    write_report(&cfg.paths.out.join("report"), &report, &Provenance::new("evaluate", cfg))
}

/// Full synthetic run; also writes the generated rasters so the other
/// commands can be pointed at them.
pub fn bench(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, CliError> {
    let outcome = pipeline::run_bench(cfg)?;
    let prov = Provenance::new("bench", cfg);
    let root = cfg.paths.out.join("bench");
    let mut written = Vec::new();

    let data = root.join("data");
    let lc = &outcome.scene.landcover;
    for (name, grid) in [
        ("reference", &outcome.scene.reference),
        ("dem", &outcome.scene.degraded),
        ("true_dh", &outcome.scene.true_dh),
        ("bare", &lc.bare),
        ("urban", &lc.urban),
        ("forest", &lc.forest),
        ("strata", &lc.strata),
    ] {
        let p = data.join(format!("{name}.asc"));
        save(grid, &p)?;
        written.push(p);
    }
    for (name, model) in &outcome.trained.models {
        let p = root.join("models").join(format!("{name}.json"));
        write_model(&p, model, &prov)?;
        written.push(p);
    }
    let coll = root.join("collinearity.json");
    write_json(&coll, &outcome.trained.collinearity, &prov)?;
    written.push(coll);
    written.extend(write_report(&root, &outcome.report, &prov)?);
    Ok(written)
}
