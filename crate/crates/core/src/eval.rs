//! Applying predicted corrections and scoring them against a reference
//! surface, per landscape stratum.
//!
//! Errors are always `surface − reference`, so a positive Δh means the DEM
//! sits too high and the correction `DEM − Δĥ` lowers it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::stratum_label;
use crate::grid::Grid;
use crate::model::Regressor;
use crate::numeric::compensated_sum;
use crate::terrain::FeatureStack;
use crate::{Error, Result, Scalar};

/// Stratum labels and the landscape each stands for.
pub const LANDSCAPES: [(i64, &str); 5] = [
    (1, "Urban/industrial"),
    (2, "Agricultural land"),
    (3, "Mountain"),
    (4, "Peninsula"),
    (5, "Grassland/shrubland"),
];

pub fn landscape_name(label: i64) -> String {
    LANDSCAPES
        .iter()
        .find(|(l, _)| *l == label)
        .map_or_else(|| format!("Stratum {label}"), |(_, n)| n.to_string())
}

/// Per-cell predicted error from the model's feature layers.
pub fn predict_error_grid<T: Scalar>(model: &dyn Regressor<T>, stack: &FeatureStack<T>) -> Result<Grid<T>> {
    let columns = stack.indices_of(model.feature_names())?;
    let template = &stack.layers()[0];
    let cells: Vec<Option<T>> = (0..stack.geometry().len())
        .into_par_iter()
        .map(|cell| match stack.cell_vector(cell, &columns) {
            Some(x) => model.predict_row(&x).map(Some),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    Ok(template.with_cells(cells))
}

/// `dem − dh` per cell.
pub fn apply_correction<T: Scalar>(dem: &Grid<T>, dh: &Grid<T>) -> Result<Grid<T>> {
    dem.zip_valid(dh, "apply_correction", |z, d| z - d)
}

/// `|corrected − reference|` per cell.
pub fn abs_error_grid<T: Scalar>(corrected: &Grid<T>, reference: &Grid<T>) -> Result<Grid<T>> {
    corrected.zip_valid(reference, "abs_error_grid", |a, b| (a - b).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Metrics<T> {
    pub n: usize,
    /// Mean error.
    pub me: T,
    pub mae: T,
    pub rmse: T,
    /// Sample standard deviation (n − 1 denominator; 0 for a single value).
    pub std: T,
}

impl<T: Scalar> Metrics<T> {
    pub fn to_f64(&self) -> Metrics<f64> {
        Metrics {
            n: self.n,
            me: self.me.as_f64(),
            mae: self.mae.as_f64(),
            rmse: self.rmse.as_f64(),
            std: self.std.as_f64(),
        }
    }
}

/// Error statistics with compensated sums taken in input order.
pub fn compute_metrics<T: Scalar>(errors: &[T]) -> Result<Metrics<T>> {
    if errors.is_empty() {
        return Err(Error::domain("metrics of an empty error set"));
    }
    let n = T::from_usize_lossy(errors.len());
    let me = compensated_sum(errors.iter().copied()) / n;
    let mae = compensated_sum(errors.iter().map(|e| e.abs())) / n;
    let rmse = (compensated_sum(errors.iter().map(|&e| e * e)) / n).sqrt();
    let std = if errors.len() > 1 {
        let ss = compensated_sum(errors.iter().map(|&e| (e - me) * (e - me)));
        (ss / T::from_usize_lossy(errors.len() - 1)).sqrt()
    } else {
        T::zero()
    };
    Ok(Metrics {
        n: errors.len(),
        me,
        mae,
        rmse,
        std,
    })
}

/// `100 · (before − after) / before`; negative when accuracy got worse.
pub fn pct_rmse_reduction(before: f64, after: f64) -> Result<f64> {
    if !(before > 0.0) {
        return Err(Error::domain(format!("baseline RMSE must be positive, got {before}")));
    }
    Ok(100.0 * (before - after) / before)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    /// `None` for the all-strata summary.
    pub label: Option<i64>,
    pub name: String,
    pub before: Metrics<f64>,
    pub after: BTreeMap<String, Metrics<f64>>,
    /// `None` when the baseline RMSE is zero.
    pub pct_rmse_reduction: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub models: Vec<String>,
    pub strata: Vec<StratumReport>,
    pub overall: StratumReport,
    pub model_digests: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

fn stratum_report<T: Scalar>(
    label: Option<i64>,
    before: &[T],
    after: &BTreeMap<String, Vec<T>>,
) -> Result<StratumReport> {
    let b = compute_metrics(before)?.to_f64();
    let mut after_m = BTreeMap::new();
    let mut pct = BTreeMap::new();
    for (name, errs) in after {
        let a = compute_metrics(errs)?.to_f64();
        pct.insert(name.clone(), pct_rmse_reduction(b.rmse, a.rmse).ok());
        after_m.insert(name.clone(), a);
    }
    Ok(StratumReport {
        label,
        name: label.map_or_else(|| "Overall".to_string(), landscape_name),
        before: b,
        after: after_m,
        pct_rmse_reduction: pct,
    })
}

/// Scores the original and each corrected surface against the reference over
/// cells where the stratum label and every surface are valid. Cells are
/// visited in row-major order.
pub fn build_report<T: Scalar>(
    reference: &Grid<T>,
    original: &Grid<T>,
    corrected_by_model: &BTreeMap<String, Grid<T>>,
    strata: &Grid<T>,
    model_digests: &BTreeMap<String, String>,
) -> Result<EvaluationReport> {
    let g = reference.geometry();
    g.ensure_same(original.geometry(), "original DEM")?;
    g.ensure_same(strata.geometry(), "strata grid")?;
    for (name, c) in corrected_by_model {
        g.ensure_same(c.geometry(), &format!("corrected DEM `{name}`"))?;
    }

    type Bucket<T> = (Vec<T>, BTreeMap<String, Vec<T>>);
    let new_bucket = || -> Bucket<T> {
        (
            Vec::new(),
            corrected_by_model.keys().map(|k| (k.clone(), Vec::new())).collect(),
        )
    };
    let mut per: BTreeMap<i64, Bucket<T>> = BTreeMap::new();
    let mut all = new_bucket();
    let mut labels_seen: BTreeMap<i64, ()> = BTreeMap::new();

    for cell in 0..g.len() {
        let Some(label) = stratum_label(strata, cell) else { continue };
        labels_seen.insert(label, ());
        let (Some(r), Some(o)) = (reference.get_index(cell), original.get_index(cell)) else {
            continue;
        };
        let mut after = Vec::with_capacity(corrected_by_model.len());
        for c in corrected_by_model.values() {
            match c.get_index(cell) {
                Some(v) => after.push(v - r),
                None => break,
            }
        }
        if after.len() != corrected_by_model.len() {
            continue;
        }
        let bucket = per.entry(label).or_insert_with(new_bucket);
        bucket.0.push(o - r);
        all.0.push(o - r);
        for ((name, e), (_, a)) in corrected_by_model.keys().zip(after).zip(all.1.iter_mut()) {
            bucket.1.get_mut(name).expect("bucket per model").push(e);
            a.push(e);
        }
    }

    let mut warnings = Vec::new();
    for label in labels_seen.keys() {
        if !per.contains_key(label) {
            warnings.push(format!(
                "stratum {label} ({}) has no cells valid in every surface; omitted",
                landscape_name(*label)
            ));
        }
    }
    if all.0.is_empty() {
        return Err(Error::EmptyTable(
            "no cell is valid in the strata grid and every surface".into(),
        ));
    }
    let mut strata_reports = Vec::with_capacity(per.len());
    for (label, (before, after)) in &per {
        let rep = stratum_report(Some(*label), before, after)?;
        if rep.before.rmse == 0.0 {
            warnings.push(format!("stratum {label} has zero baseline RMSE; reductions undefined"));
        }
        strata_reports.push(rep);
    }
    Ok(EvaluationReport {
        models: corrected_by_model.keys().cloned().collect(),
        strata: strata_reports,
        overall: stratum_report(None, &all.0, &all.1)?,
        model_digests: model_digests.clone(),
        warnings,
    })
}

/// Plain-text table of percent RMSE reductions: one row per landscape (the
/// five canonical ones first, then any other label) and one column per model,
/// followed by an overall line.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut rows: Vec<(String, Option<&StratumReport>)> = LANDSCAPES
        .iter()
        .map(|(l, n)| (n.to_string(), report.strata.iter().find(|s| s.label == Some(*l))))
        .collect();
    for s in &report.strata {
        if !LANDSCAPES.iter().any(|(l, _)| Some(*l) == s.label) {
            rows.push((s.name.clone(), Some(s)));
        }
    }
    let cell = |s: Option<&StratumReport>, m: &str| -> String {
        s.and_then(|s| s.pct_rmse_reduction.get(m).copied().flatten())
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
    };

    let first_w = rows
        .iter()
        .map(|r| r.0.len())
        .chain(["Landscape".len(), "Overall".len()])
        .max()
        .unwrap_or(9);
    let col_w: Vec<usize> = report.models.iter().map(|m| m.len().max(6)).collect();
    let total_w = first_w + col_w.iter().map(|w| w + 2).sum::<usize>();

    let mut out = String::new();
    let _ = writeln!(out, "% RMSE reduction of the original DEM after correction");
    let _ = write!(out, "{:<first_w$}", "Landscape");
    for (m, w) in report.models.iter().zip(&col_w) {
        let _ = write!(out, "  {m:>w$}");
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(total_w));
    let line = |name: &str, s: Option<&StratumReport>, out: &mut String| {
        let _ = write!(out, "{name:<first_w$}");
        for (m, w) in report.models.iter().zip(&col_w) {
            let _ = write!(out, "  {:>w$}", cell(s, m));
        }
        out.push('\n');
    };
    for (name, s) in &rows {
        line(name, *s, &mut out);
    }
    let _ = writeln!(out, "{}", "-".repeat(total_w));
    line("Overall", Some(&report.overall), &mut out);
    out
}
