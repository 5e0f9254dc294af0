//! Training tables sampled from aligned rasters.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::terrain::FeatureStack;
use crate::{Error, Result, Scalar};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub row: usize,
    pub col: usize,
    pub features: Vec<T>,
    /// Elevation error Δh = DEM − reference.
    pub target: T,
    pub stratum: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTable<T> {
    feature_names: Vec<String>,
    rows: Vec<Sample<T>>,
}

impl<T: Scalar> SampleTable<T> {
    pub fn new(feature_names: Vec<String>, rows: Vec<Sample<T>>) -> Result<Self> {
        for (i, s) in rows.iter().enumerate() {
            if s.features.len() != feature_names.len() {
                return Err(Error::domain(format!(
                    "row {i} has {} features, expected {}",
                    s.features.len(),
                    feature_names.len()
                )));
            }
            if !s.target.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("row {i} holds a non-finite value")));
            }
        }
        Ok(Self {
            feature_names,
            rows,
        })
    }

    /// Builds a table from a column-less design: one feature vector and one
    /// target per row, placed at (i, 0) with no stratum.
    pub fn from_columns(feature_names: Vec<String>, features: Vec<Vec<T>>, targets: Vec<T>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::domain("feature and target row counts differ"));
        }
        let rows = features
            .into_iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (features, target))| Sample {
                row: i,
                col: 0,
                features,
                target,
                stratum: None,
            })
            .collect();
        Self::new(feature_names, rows)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Sample<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::domain(format!("unknown feature `{name}`")))
    }

    pub fn column(&self, k: usize) -> Vec<T> {
        self.rows.iter().map(|s| s.features[k]).collect()
    }

    pub fn targets(&self) -> Vec<T> {
        self.rows.iter().map(|s| s.target).collect()
    }

    /// Keeps only the named feature columns, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.feature_index(n))
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|s| Sample {
                features: idx.iter().map(|&k| s.features[k]).collect(),
                ..s.clone()
            })
            .collect();
        Ok(Self {
            feature_names: names.to_vec(),
            rows,
        })
    }

    /// CSV with header `row,col,stratum,<features...>,target`; a missing
    /// stratum is an empty field.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row".to_string(), "col".into(), "stratum".into()];
        header.extend(self.feature_names.iter().cloned());
        header.push("target".into());
        w.write_record(&header)?;
        for s in &self.rows {
            let mut rec = vec![
                s.row.to_string(),
                s.col.to_string(),
                s.stratum.map(|v| v.to_string()).unwrap_or_default(),
            ];
            rec.extend(s.features.iter().map(|v| v.to_string()));
            rec.push(s.target.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integer label of a strata cell.
pub fn stratum_label<T: Scalar>(strata: &Grid<T>, cell: usize) -> Option<i64> {
    strata.get_index(cell).and_then(|v| v.round().to_i64())
}

/// Samples cells where every feature layer and the target are valid.
///
/// `round(rate · n_valid)` cells (at least one) are drawn uniformly without
/// replacement using `seed`, then emitted in row-major order.
pub fn extract_samples<T: Scalar>(
    stack: &FeatureStack<T>,
    target: &Grid<T>,
    strata: Option<&Grid<T>>,
    rate: f64,
    seed: u64,
) -> Result<SampleTable<T>> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::domain(format!("sampling rate must lie in (0, 1], got {rate}")));
    }
    let geometry = stack.geometry();
    geometry.ensure_same(target.geometry(), "target grid")?;
    if let Some(s) = strata {
        geometry.ensure_same(s.geometry(), "strata grid")?;
    }
    let all: Vec<usize> = (0..stack.len()).collect();
    let valid: Vec<(usize, Vec<T>, T)> = (0..geometry.len())
        .filter_map(|cell| {
            let t = target.get_index(cell)?;
            let f = stack.cell_vector(cell, &all)?;
            Some((cell, f, t))
        })
        .collect();
    if valid.is_empty() {
        return Err(Error::EmptyTable(
            "no cell has all features and the target valid".into(),
        ));
    }

    let n = valid.len();
    let k = ((rate * n as f64).round() as usize).clamp(1, n);
    let mut chosen = if k == n {
        (0..n).collect::<Vec<_>>()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        index::sample(&mut rng, n, k).into_vec()
    };
    chosen.sort_unstable();

    let ncols = geometry.ncols;
    let mut pool: Vec<Option<(usize, Vec<T>, T)>> = valid.into_iter().map(Some).collect();
    let rows = chosen
        .into_iter()
        .map(|i| {
            let (cell, features, target) = pool[i].take().expect("each index chosen once");
            Sample {
                row: cell / ncols,
                col: cell % ncols,
                features,
                target,
                stratum: strata.and_then(|s| stratum_label(s, cell)),
            }
        })
        .collect();
    SampleTable::new(stack.names().to_vec(), rows)
}

#[derive(Debug, Clone)]
pub struct Split<T> {
    pub train: SampleTable<T>,
    pub test: SampleTable<T>,
    pub warnings: Vec<String>,
}

/// Partitions rows into train and test sets.
///
/// The train set holds `round(n · f)` rows. With `stratified`, each stratum
/// (rows without a label form their own group) contributes within one row of
/// its proportional share, using largest-remainder apportionment; a stratum
/// with fewer than two rows goes entirely to train and yields a warning.
/// Both outputs keep the input row order.
pub fn split<T: Scalar>(
    table: &SampleTable<T>,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<Split<T>> {
    if table.is_empty() {
        return Err(Error::EmptyTable("cannot split an empty table".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = table.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut is_train = vec![false; n];

    if !stratified {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let k = (n as f64 * train_fraction).round() as usize;
        for &i in &order[..k] {
            is_train[i] = true;
        }
    } else {
        let mut groups: BTreeMap<Option<i64>, Vec<usize>> = BTreeMap::new();
        for (i, s) in table.rows.iter().enumerate() {
            groups.entry(s.stratum).or_default().push(i);
        }
        let mut quotas: Vec<(Option<i64>, usize, f64)> = Vec::new();
        let mut target_total = (n as f64 * train_fraction).round() as usize;
        for (label, members) in &groups {
            if members.len() < 2 {
                warnings.push(format!(
                    "stratum {} has {} row(s); assigned to train",
                    label.map_or("<none>".to_string(), |l| l.to_string()),
                    members.len()
                ));
                for &i in members {
                    is_train[i] = true;
                }
                target_total = target_total.saturating_sub(members.len());
                continue;
            }
            let exact = members.len() as f64 * train_fraction;
            quotas.push((*label, exact.floor() as usize, exact - exact.floor()));
        }
        let floor_total: usize = quotas.iter().map(|q| q.1).sum();
        let mut remaining = target_total.saturating_sub(floor_total);
        let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
        // stable sort keeps label order among equal remainders
        by_remainder.sort_by(|&a, &b| quotas[b].2.partial_cmp(&quotas[a].2).expect("finite"));
        for qi in by_remainder {
            if remaining == 0 {
                break;
            }
            if quotas[qi].2 > 0.0 {
                quotas[qi].1 += 1;
                remaining -= 1;
            }
        }
        for (label, k, _) in quotas {
            let mut members = groups[&label].clone();
            members.shuffle(&mut rng);
            for &i in &members[..k] {
                is_train[i] = true;
            }
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, t) in table.rows.iter().zip(is_train) {
        if t {
            train.push(s.clone())
        } else {
            test.push(s.clone())
        }
    }
    Ok(Split {
        train: SampleTable {
            feature_names: table.feature_names.clone(),
            rows: train,
        },
        test: SampleTable {
            feature_names: table.feature_names.clone(),
            rows: test,
        },
        warnings,
    })
}
