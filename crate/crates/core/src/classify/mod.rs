//! Dimension reduction plus a linear classifier for one pair of classes.

mod pca;
mod svm;

use std::collections::BTreeMap;

use nalgebra::RealField;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use pca::{fit_pca, PcaJson, PcaModel};
pub use svm::{fit_svm, fit_svm_named, primal_objective, Side, SvmJson, SvmModel, SvmParams};

/// Number of principal components the classifier works in.
pub const REDUCED_DIM: usize = 3;

/// PCA followed by a linear SVM in the reduced space.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier<T> {
    pub pca: PcaModel<T>,
    pub svm: SvmModel<T>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub correct: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub predicted: String,
    pub signed_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<String, ClassCount>,
    pub predictions: Vec<Prediction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub pca: PcaJson,
    pub svm: SvmJson,
}

fn sides_for(labels: &[&str], classes: (&str, &str)) -> Result<Vec<Side>> {
    labels
        .iter()
        .map(|&l| {
            if l == classes.0 {
                Ok(Side::Positive)
            } else if l == classes.1 {
                Ok(Side::Negative)
            } else {
                Err(Error::Config(format!(
                    "label {l:?} is neither {:?} nor {:?}",
                    classes.0, classes.1
                )))
            }
        })
        .collect()
}

impl<T: Real + RealField> Classifier<T> {
    /// Fits PCA on all embeddings, then the SVM on the reduced points.
    /// `classes.0` is the positive side.
    pub fn fit<R: AsRef<[T]>>(
        embeddings: &[R],
        labels: &[&str],
        classes: (&str, &str),
        params: &SvmParams<T>,
    ) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let sides = sides_for(labels, classes)?;
        let pca = fit_pca(embeddings, REDUCED_DIM)?;
        let reduced = embeddings
            .iter()
            .map(|e| pca.project(e.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let svm = fit_svm_named(&reduced, &sides, params, classes)?;
        Ok(Self { pca, svm })
    }
}

impl<T: Real> Classifier<T> {
    pub fn reduce(&self, embedding: &[T]) -> Result<Vec<T>> {
        self.pca.project(embedding)
    }

    pub fn signed_distance(&self, embedding: &[T]) -> Result<T> {
        Ok(self.svm.signed_distance(&self.reduce(embedding)?))
    }

    pub fn predict(&self, embedding: &[T]) -> Result<&str> {
        let p = self.reduce(embedding)?;
        Ok(self.svm.class_of(self.svm.predict(&p)))
    }

    pub fn evaluate<R: AsRef<[T]>>(&self, embeddings: &[R], labels: &[&str]) -> Result<EvalReport> {
        if embeddings.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: embeddings.len(),
                found: labels.len(),
            });
        }
        if embeddings.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        let mut per_class: BTreeMap<String, ClassCount> = BTreeMap::new();
        let mut predictions = Vec::with_capacity(labels.len());
        let mut correct = 0;
        for (e, &label) in embeddings.iter().zip(labels) {
            let p = self.reduce(e.as_ref())?;
            let predicted = self.svm.class_of(self.svm.predict(&p)).to_string();
            let entry = per_class.entry(label.to_string()).or_default();
            entry.total += 1;
            if predicted == label {
                entry.correct += 1;
                correct += 1;
            }
            predictions.push(Prediction {
                label: label.to_string(),
                predicted,
                signed_distance: self.svm.signed_distance(&p).to_f64_lossy(),
            });
        }
        Ok(EvalReport {
            accuracy: correct as f64 / labels.len() as f64,
            per_class,
            predictions,
        })
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            pca: self.pca.to_json(),
            svm: self.svm.to_json(),
        }
    }

    pub fn from_json(j: &ModelJson) -> Result<Self> {
        let pca = PcaModel::from_json(&j.pca);
        let svm = SvmModel::from_json(&j.svm);
        if pca.components.iter().any(|c| c.len() != pca.mean.len()) {
            return Err(Error::DimensionMismatch {
                expected: pca.mean.len(),
                found: pca.components.iter().map(Vec::len).find(|&l| l != pca.mean.len()).unwrap_or(0),
            });
        }
        if svm.w.len() != pca.components.len() {
            return Err(Error::DimensionMismatch {
                expected: pca.components.len(),
                found: svm.w.len(),
            });
        }
        Ok(Self { pca, svm })
    }
}
