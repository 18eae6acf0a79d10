use nalgebra::{DMatrix, RealField};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mean-centered principal component projection.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// Orthonormal rows, most significant first.
    pub components: Vec<Vec<T>>,
    pub explained_variance: Vec<T>,
    pub explained_variance_ratio: Vec<T>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Fits `n_components` principal components by thin SVD of the centered
/// data matrix. Each component is oriented so its largest-magnitude entry
/// is positive.
pub fn fit_pca<T, R>(rows: &[R], n_components: usize) -> Result<PcaModel<T>>
where
    T: Real + RealField,
    R: AsRef<[T]>,
{
    let n = rows.len();
    if n < n_components + 1 {
        return Err(Error::Rank(format!(
            "{n} samples cannot determine {n_components} components"
        )));
    }
    let d = rows[0].as_ref().len();
    if d < n_components {
        return Err(Error::Rank(format!(
            "{d}-dimensional data has fewer than {n_components} components"
        )));
    }
    if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.as_ref().len(),
        });
    }

    let count = T::from_int(n as i64);
    let mut mean = vec![T::zero(); d];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r.as_ref()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= count;
    }

    let centered = DMatrix::from_fn(n, d, |i, j| rows[i].as_ref()[j] - mean[j]);
    let total: T = centered.iter().map(|&v| v * v).sum();
    if total == T::zero() {
        return Err(Error::Rank("all samples are identical".into()));
    }

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let dof = T::from_int(n as i64 - 1);
    let mut components = Vec::with_capacity(n_components);
    let mut explained_variance = Vec::with_capacity(n_components);
    let mut explained_variance_ratio = Vec::with_capacity(n_components);
    for &k in order.iter().take(n_components) {
        let mut row: Vec<T> = v_t.row(k).iter().copied().collect();
        let lead = row
            .iter()
            .copied()
            .fold(T::zero(), |best, v| if Float::abs(v) > Float::abs(best) { v } else { best });
        if lead < T::zero() {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        let s = svd.singular_values[k];
        components.push(row);
        explained_variance.push(s * s / dof);
        explained_variance_ratio.push(s * s / total);
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
    })
}

impl<T: Real> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `components * (x - mean)`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.len(),
            });
        }
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        Ok(self.components.iter().map(|c| dot(c, &centered)).collect())
    }

    /// `components^T * y`, the embedding-space direction of a reduced-space
    /// vector.
    pub fn back_project(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.components.len() {
            return Err(Error::DimensionMismatch {
                expected: self.components.len(),
                found: y.len(),
            });
        }
        let mut out = vec![T::zero(); self.mean.len()];
        for (c, &w) in self.components.iter().zip(y) {
            for (o, &v) in out.iter_mut().zip(c) {
                *o = *o + v * w;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> PcaJson {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        PcaJson {
            mean: f(&self.mean),
            components: self.components.iter().map(|c| f(c)).collect(),
            evr: f(&self.explained_variance_ratio),
            explained_variance: f(&self.explained_variance),
        }
    }

    pub fn from_json(j: &PcaJson) -> Self {
        let f = |v: &[f64]| v.iter().map(|&x| T::from_f64_lossy(x)).collect::<Vec<_>>();
        Self {
            mean: f(&j.mean),
            components: j.components.iter().map(|c| f(c)).collect(),
            explained_variance_ratio: f(&j.evr),
            explained_variance: f(&j.explained_variance),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaJson {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub evr: Vec<f64>,
    #[serde(default)]
    pub explained_variance: Vec<f64>,
}
