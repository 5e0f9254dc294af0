//! Common interface over the two regressors and their on-disk documents.

use serde::{Deserialize, Serialize};

use crate::gbdt::GbdtModel;
use crate::linear::LinearModel;
use crate::{Error, Result, Scalar};

pub const LINEAR_FORMAT: &str = "demcorrect-mlr";
pub const LINEAR_VERSION: u32 = 1;

/// Anything that maps a feature vector to a predicted elevation error.
pub trait Regressor<T>: Sync {
    fn feature_names(&self) -> &[String];
    fn predict_row(&self, x: &[T]) -> Result<T>;
}

impl<T: Scalar> Regressor<T> for LinearModel<T> {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_row(&self, x: &[T]) -> Result<T> {
        self.predict(x)
    }
}

impl<T: Scalar> Regressor<T> for GbdtModel<T> {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict_row(&self, x: &[T]) -> Result<T> {
        self.predict(x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct LinearDocument<T> {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: LinearModel<T>,
}

/// A trained model of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel<T> {
    Linear(LinearModel<T>),
    Gbdt(GbdtModel<T>),
}

impl<T: Scalar> TrainedModel<T> {
    pub fn as_regressor(&self) -> &dyn Regressor<T> {
        match self {
            TrainedModel::Linear(m) => m,
            TrainedModel::Gbdt(m) => m,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            TrainedModel::Linear(m) => Ok(serde_json::to_string_pretty(&LinearDocument {
                format: LINEAR_FORMAT.into(),
                version: LINEAR_VERSION,
                model: m.clone(),
            })?),
            TrainedModel::Gbdt(m) => m.to_json(),
        }
    }

    /// Dispatches on the document's `format` tag.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format: String,
        }
        let probe: Probe = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        match probe.format.as_str() {
            LINEAR_FORMAT => {
                let doc: LinearDocument<T> =
                    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
                if doc.version != LINEAR_VERSION {
                    return Err(Error::Format(format!("unsupported version {}", doc.version)));
                }
                if doc.model.coefficients.len() != doc.model.feature_names.len() {
                    return Err(Error::Format("coefficient count differs from feature count".into()));
                }
                Ok(TrainedModel::Linear(doc.model))
            }
            crate::gbdt::MODEL_FORMAT => Ok(TrainedModel::Gbdt(GbdtModel::from_json(text)?)),
            other => Err(Error::Format(format!("unknown model format `{other}`"))),
        }
    }
}
