//! Reading a trained classifier back in landscape terms.
//!
//! The separating plane in PCA space pulls back to a hyperplane of the
//! embedding space. Walking from the data centroid along its normal to the
//! edge of the data gives one point per side; reshaped into curves these are
//! the virtual landscapes.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::classify::{PcaModel, Side, SvmModel};
use crate::error::{Error, Result};
use crate::landscape::{vector_to_landscape, CurvesJson, LandscapeConfig, LandscapeCurves};
use crate::scalar::Real;

/// The hyperplane `{v : normal . v = offset}` of embedding space whose PCA
/// image is the separating plane.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPlane<T> {
    /// Unit normal, oriented toward the positive class.
    pub normal: Vec<T>,
    pub offset: T,
}

impl<T: Real> LiftedPlane<T> {
    /// Signed Euclidean distance from `v` to the lifted hyperplane.
    pub fn signed_distance(&self, v: &[T]) -> T {
        dot(&self.normal, v) - self.offset
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn lift_plane<T: Real>(pca: &PcaModel<T>, svm: &SvmModel<T>) -> Result<LiftedPlane<T>> {
    let raw = pca.back_project(&svm.w)?;
    let norm = Float::sqrt(dot(&raw, &raw));
    if norm == T::zero() {
        return Err(Error::ZeroNormal);
    }
    let offset = (svm.b + dot(&raw, &pca.mean)) / norm;
    Ok(LiftedPlane {
        normal: raw.into_iter().map(|v| v / norm).collect(),
        offset,
    })
}

/// A point of embedding space on the line through the data centroid along
/// the lifted normal.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualPoint<T> {
    pub vector: Vec<T>,
    pub side: Side,
    pub class: String,
    /// Position along the unit normal, measured from the centroid.
    pub offset: T,
    /// `w . x - b` of the point's projection.
    pub decision: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualLandscape<T> {
    pub point: VirtualPoint<T>,
    pub curves: LandscapeCurves<T>,
}

pub fn centroid<T: Real, R: AsRef<[T]>>(data: &[R]) -> Result<Vec<T>> {
    let first = data.first().ok_or(Error::Empty("virtual landscape data"))?;
    let mut mu = vec![T::zero(); first.as_ref().len()];
    for x in data {
        let x = x.as_ref();
        if x.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                found: x.len(),
            });
        }
        for (m, &v) in mu.iter_mut().zip(x) {
            *m = *m + v;
        }
    }
    let n = T::from_int(data.len() as i64);
    Ok(mu.into_iter().map(|m| m / n).collect())
}

/// Point at the outer extent of `data` along the lifted normal, on `side`:
/// the centroid shifted by the largest (positive side) or smallest
/// (negative side) scalar projection of the centered data.
pub fn virtual_point<T: Real, R: AsRef<[T]>>(
    pca: &PcaModel<T>,
    svm: &SvmModel<T>,
    data: &[R],
    side: Side,
) -> Result<VirtualPoint<T>> {
    let plane = lift_plane(pca, svm)?;
    let mu = centroid(data)?;
    let projections = data.iter().map(|x| {
        let s: T = plane
            .normal
            .iter()
            .zip(x.as_ref())
            .zip(&mu)
            .map(|((&n, &v), &m)| n * (v - m))
            .sum();
        s
    });
    let offset = match side {
        Side::Positive => projections.fold(T::neg_infinity(), T::max),
        Side::Negative => projections.fold(T::infinity(), T::min),
    };
    let vector: Vec<T> = mu.iter().zip(&plane.normal).map(|(&m, &n)| m + offset * n).collect();
    let decision = svm.decision(&pca.project(&vector)?);
    let class = svm.class_of(side).to_string();
    if Side::of(decision) != side || decision == T::zero() {
        return Err(Error::WrongSide {
            class,
            decision: decision.to_f64_lossy(),
        });
    }
    Ok(VirtualPoint {
        vector,
        side,
        class,
        offset,
        decision,
    })
}

pub fn virtual_landscape<T: Real, R: AsRef<[T]>>(
    pca: &PcaModel<T>,
    svm: &SvmModel<T>,
    data: &[R],
    side: Side,
    config: &LandscapeConfig,
) -> Result<VirtualLandscape<T>> {
    let point = virtual_point(pca, svm, data, side)?;
    let curves = vector_to_landscape(&point.vector, config)?;
    Ok(VirtualLandscape { point, curves })
}

/// Index and signed distance of the data point farthest from the plane on
/// each side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremes<T> {
    pub positive: (usize, T),
    pub negative: (usize, T),
}

impl<T: Copy> Extremes<T> {
    pub fn get(&self, side: Side) -> (usize, T) {
        match side {
            Side::Positive => self.positive,
            Side::Negative => self.negative,
        }
    }
}

/// Signed distances use the same formula as classifier evaluation.
pub fn extreme_examples<T: Real, R: AsRef<[T]>>(
    pca: &PcaModel<T>,
    svm: &SvmModel<T>,
    data: &[R],
) -> Result<Extremes<T>> {
    let mut pos: Option<(usize, T)> = None;
    let mut neg: Option<(usize, T)> = None;
    for (i, x) in data.iter().enumerate() {
        let d = svm.signed_distance(&pca.project(x.as_ref())?);
        if d > T::zero() {
            if pos.is_none_or(|(_, best)| d > best) {
                pos = Some((i, d));
            }
        } else if d < T::zero() && neg.is_none_or(|(_, best)| d < best) {
            neg = Some((i, d));
        }
    }
    Ok(Extremes {
        positive: pos.ok_or_else(|| Error::MissingSide(svm.class_pos.clone()))?,
        negative: neg.ok_or_else(|| Error::MissingSide(svm.class_neg.clone()))?,
    })
}

/// Serialized virtual point, with the curves it reshapes into.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualPointJson {
    pub class: String,
    pub side: Side,
    pub offset: f64,
    pub decision: f64,
    /// Which annotations defined the centroid and extent.
    pub data: String,
    pub curves: CurvesJson,
}

impl<T: Real> VirtualLandscape<T> {
    pub fn to_json(&self, data: &str) -> VirtualPointJson {
        VirtualPointJson {
            class: self.point.class.clone(),
            side: self.point.side,
            offset: self.point.offset.to_f64_lossy(),
            decision: self.point.decision.to_f64_lossy(),
            data: data.to_string(),
            curves: self.curves.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{fit_pca, fit_svm_named, SvmParams};

    fn setup() -> (PcaModel<f64>, SvmModel<f64>, Vec<Vec<f64>>) {
        let data: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                (0..6).map(|k| s * (k as f64 + 1.0) * 0.3 + ((i * 7 + k * 3) % 5) as f64 * 0.1).collect()
            })
            .collect();
        let pca = fit_pca(&data, 3).unwrap();
        let red: Vec<Vec<f64>> = data.iter().map(|x| pca.project(x).unwrap()).collect();
        let sides: Vec<Side> = (0..12).map(|i| if i % 2 == 0 { Side::Positive } else { Side::Negative }).collect();
        let svm = fit_svm_named(&red, &sides, &SvmParams::default(), ("p", "n")).unwrap();
        (pca, svm, data)
    }

    #[test]
    fn lifted_plane_matches_projected_plane() {
        let (pca, svm, data) = setup();
        let plane = lift_plane(&pca, &svm).unwrap();
        assert!((dot(&plane.normal, &plane.normal) - 1.0).abs() < 1e-12);
        for x in &data {
            let d3 = svm.signed_distance(&pca.project(x).unwrap());
            assert!((plane.signed_distance(x) - d3).abs() < 1e-10);
        }
    }

    #[test]
    fn moving_along_normal_moves_projection_linearly() {
        let (pca, svm, data) = setup();
        let plane = lift_plane(&pca, &svm).unwrap();
        let mu = centroid(&data).unwrap();
        let at = |t: f64| {
            let v: Vec<f64> = mu.iter().zip(&plane.normal).map(|(m, n)| m + t * n).collect();
            svm.signed_distance(&pca.project(&v).unwrap())
        };
        let (d0, d1, d2) = (at(0.0), at(1.0), at(2.5));
        assert!((d1 - d0 - 1.0).abs() < 1e-10 && (d2 - d0 - 2.5).abs() < 1e-10);
    }

    #[test]
    fn virtual_points_sit_on_their_sides() {
        let (pca, svm, data) = setup();
        let cfg = LandscapeConfig {
            k: 1,
            grid: crate::landscape::Grid { min: 0, max: 255, n: 3 },
        };
        for side in [Side::Positive, Side::Negative] {
            let v = virtual_landscape(&pca, &svm, &data, side, &cfg).unwrap();
            assert_eq!(Side::of(v.point.decision), side);
            assert!(v.curves.is_virtual);
            assert_eq!(v.curves.to_vector(), v.point.vector);
        }
    }

    #[test]
    fn symmetric_pair_gives_the_data_points() {
        let (pca, svm, _) = setup();
        let plane = lift_plane(&pca, &svm).unwrap();
        let mu: Vec<f64> = (0..6).map(|k| k as f64 * 0.5).collect();
        let a: Vec<f64> = mu.iter().zip(&plane.normal).map(|(m, n)| m + n).collect();
        let b: Vec<f64> = mu.iter().zip(&plane.normal).map(|(m, n)| m - n).collect();
        let data = vec![a.clone(), b.clone()];
        for (side, target) in [(Side::Positive, &a), (Side::Negative, &b)] {
            match virtual_point(&pca, &svm, &data, side) {
                Ok(p) => {
                    for (x, y) in p.vector.iter().zip(target) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
                Err(Error::WrongSide { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn extremes_and_missing_side() {
        let (pca, svm, data) = setup();
        let ex = extreme_examples(&pca, &svm, &data).unwrap();
        assert!(ex.positive.1 > 0.0 && ex.negative.1 < 0.0);
        for x in &data {
            let d = svm.signed_distance(&pca.project(x).unwrap());
            assert!(d <= ex.positive.1 && d >= ex.negative.1);
        }
        let only_pos: Vec<Vec<f64>> = data.iter().step_by(2).cloned().collect();
        assert!(matches!(extreme_examples(&pca, &svm, &only_pos), Err(Error::MissingSide(c)) if c == "n"));
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(virtual_point(&pca, &svm, &empty, Side::Positive), Err(Error::Empty(_))));
    }
}
