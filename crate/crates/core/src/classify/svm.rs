//! Linear soft-margin SVM.
//!
//! Minimizes `1/2 |w|^2 + C sum max(0, 1 - y_i (w . x_i - b))` through its
//! dual with sequential minimal optimization: maximal-violating first index,
//! second-order choice of the partner, and a fixed iteration cap, so runs
//! are deterministic.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Side::Positive => T::one(),
            Side::Negative => -T::one(),
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Side::Positive => Side::Negative,
            Side::Negative => Side::Positive,
        }
    }

    pub fn of<T: Real>(value: T) -> Self {
        if value > T::zero() {
            Side::Positive
        } else {
            Side::Negative
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams<T> {
    pub c: T,
    /// Stop when the maximal KKT violation falls below this.
    pub tolerance: T,
    pub max_iter: usize,
}

impl<T: Real> Default for SvmParams<T> {
    fn default() -> Self {
        Self {
            c: T::one(),
            tolerance: Float::sqrt(T::epsilon()) / T::from_int(10),
            max_iter: 10_000_000,
        }
    }
}

/// Separating plane `w . x = b`; points with `w . x - b > 0` belong to
/// `class_pos`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel<T> {
    pub w: Vec<T>,
    pub b: T,
    pub c: T,
    pub class_pos: String,
    pub class_neg: String,
    pub iterations: usize,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn fit_svm<T, R>(points: &[R], labels: &[Side], params: &SvmParams<T>) -> Result<SvmModel<T>>
where
    T: Real,
    R: AsRef<[T]>,
{
    fit_svm_named(points, labels, params, ("positive", "negative"))
}

pub fn fit_svm_named<T, R>(
    points: &[R],
    labels: &[Side],
    params: &SvmParams<T>,
    classes: (&str, &str),
) -> Result<SvmModel<T>>
where
    T: Real,
    R: AsRef<[T]>,
{
    let n = points.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if !labels.contains(&Side::Positive) || !labels.contains(&Side::Negative) {
        return Err(Error::SingleClass(format!(
            "{} training points, all on one side",
            n
        )));
    }
    if params.c <= T::zero() {
        return Err(Error::Config("C must be positive".into()));
    }
    let d = points[0].as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.as_ref().len(),
        });
    }

    let c = params.c;
    let y: Vec<T> = labels.iter().map(|s| s.sign()).collect();
    let kernel: Vec<T> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| dot(points[i].as_ref(), points[j].as_ref()))
        .collect();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let tau = T::from_f64_lossy(1e-12);

    let mut alpha = vec![T::zero(); n];
    // gradient of 1/2 a'Qa - e'a
    let mut grad = vec![-T::one(); n];
    let in_up = |a: T, yi: T| (yi > T::zero() && a < c) || (yi < T::zero() && a > T::zero());
    let in_low = |a: T, yi: T| (yi > T::zero() && a > T::zero()) || (yi < T::zero() && a < c);

    let mut iterations = 0;
    while iterations < params.max_iter {
        let mut gmax = T::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else { break };

        let mut gmin = T::infinity();
        let mut best = T::infinity();
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            if v < gmin {
                gmin = v;
            }
            let diff = gmax - v;
            if diff > T::zero() {
                let mut quad = k(i, i) + k(t, t) - T::from_int(2) * k(i, t);
                if quad <= T::zero() {
                    quad = tau;
                }
                let obj = -(diff * diff) / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else { break };
        if gmax - gmin < params.tolerance {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - T::from_int(2) * k(i, j);
        if quad <= T::zero() {
            quad = tau;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] = grad[t] + y[t] * (y[i] * k(i, t) * di + y[j] * k(j, t) * dj);
        }
    }

    // offset from the free vectors, or the midpoint of the feasible range
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum_free, mut n_free) = (T::zero(), 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= T::zero();
        if at_upper {
            if y[t] < T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free = sum_free + yg;
        }
    }
    let b = if n_free > 0 {
        sum_free / T::from_int(n_free as i64)
    } else {
        (ub + lb) / T::from_int(2)
    };

    let mut w = vec![T::zero(); d];
    for t in 0..n {
        if alpha[t] > T::zero() {
            for (wk, &xk) in w.iter_mut().zip(points[t].as_ref()) {
                *wk = *wk + alpha[t] * y[t] * xk;
            }
        }
    }
    if w.iter().all(|&v| v == T::zero()) {
        return Err(Error::ZeroNormal);
    }

    Ok(SvmModel {
        w,
        b,
        c,
        class_pos: classes.0.to_string(),
        class_neg: classes.1.to_string(),
        iterations,
    })
}

impl<T: Real> SvmModel<T> {
    /// `w . x - b`.
    pub fn decision(&self, x: &[T]) -> T {
        dot(&self.w, x) - self.b
    }

    pub fn norm_w(&self) -> T {
        Float::sqrt(dot(&self.w, &self.w))
    }

    /// Euclidean distance to the plane, positive on the `class_pos` side.
    pub fn signed_distance(&self, x: &[T]) -> T {
        self.decision(x) / self.norm_w()
    }

    pub fn predict(&self, x: &[T]) -> Side {
        Side::of(self.decision(x))
    }

    pub fn class_of(&self, side: Side) -> &str {
        match side {
            Side::Positive => &self.class_pos,
            Side::Negative => &self.class_neg,
        }
    }

    pub fn side_of_class(&self, class: &str) -> Option<Side> {
        if class == self.class_pos {
            Some(Side::Positive)
        } else if class == self.class_neg {
            Some(Side::Negative)
        } else {
            None
        }
    }

    /// Primal objective on a labelled set.
    pub fn objective<R: AsRef<[T]>>(&self, points: &[R], labels: &[Side]) -> T {
        primal_objective(&self.w, self.b, self.c, points, labels)
    }

    pub fn to_json(&self) -> SvmJson {
        SvmJson {
            w: self.w.iter().map(|v| v.to_f64_lossy()).collect(),
            b: self.b.to_f64_lossy(),
            c: self.c.to_f64_lossy(),
            classes: [self.class_pos.clone(), self.class_neg.clone()],
        }
    }

    pub fn from_json(j: &SvmJson) -> Self {
        Self {
            w: j.w.iter().map(|&v| T::from_f64_lossy(v)).collect(),
            b: T::from_f64_lossy(j.b),
            c: T::from_f64_lossy(j.c),
            class_pos: j.classes[0].clone(),
            class_neg: j.classes[1].clone(),
            iterations: 0,
        }
    }
}

pub fn primal_objective<T: Real, R: AsRef<[T]>>(w: &[T], b: T, c: T, points: &[R], labels: &[Side]) -> T {
    let half = T::from_f64_lossy(0.5);
    let hinge: T = points
        .iter()
        .zip(labels)
        .map(|(p, s)| {
            let m = s.sign::<T>() * (dot(w, p.as_ref()) - b);
            (T::one() - m).max(T::zero())
        })
        .sum();
    half * dot(w, w) + c * hinge
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmJson {
    pub w: Vec<f64>,
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// `[positive class, negative class]`.
    pub classes: [String; 2],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> (Vec<Vec<f64>>, Vec<Side>) {
        (
            vec![vec![-1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
            vec![Side::Negative, Side::Positive],
        )
    }

    #[test]
    fn one_dimensional_separation() {
        let (x, y) = line_data();
        let m = fit_svm(&x, &y, &SvmParams::default()).unwrap();
        assert_eq!(m.predict(&x[0]), Side::Negative);
        assert_eq!(m.predict(&x[1]), Side::Positive);
        // hard-margin solution: w = (1, 0, 0), b = 0
        assert!((m.w[0] - 1.0).abs() < 1e-9 && m.b.abs() < 1e-9);
        assert!(m.decision(&[0.0, 0.0, 0.0]).abs() < 1e-9);
    }

    #[test]
    fn label_flip_negates_plane() {
        let x = vec![
            vec![0.3, 1.2, -0.4],
            vec![1.5, 0.2, 0.1],
            vec![-0.7, -1.1, 0.9],
            vec![2.1, 1.9, -0.3],
            vec![-1.4, 0.4, 0.2],
            vec![0.9, -0.8, 1.7],
        ];
        let y = vec![Side::Negative, Side::Positive, Side::Negative, Side::Positive, Side::Negative, Side::Positive];
        let flipped: Vec<Side> = y.iter().map(|s| s.flip()).collect();
        let p = SvmParams::default();
        let a = fit_svm(&x, &y, &p).unwrap();
        let b = fit_svm(&x, &flipped, &p).unwrap();
        for (wa, wb) in a.w.iter().zip(&b.w) {
            assert!((wa + wb).abs() < 1e-7, "{wa} vs {wb}");
        }
        assert!((a.b + b.b).abs() < 1e-7);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let err = fit_svm(&x, &[Side::Positive, Side::Positive], &SvmParams::default()).unwrap_err();
        assert!(matches!(err, Error::SingleClass(_)));
    }

    #[test]
    fn json_shape() {
        let (x, y) = line_data();
        let m = fit_svm_named(&x, &y, &SvmParams::default(), ("sugar", "flowers")).unwrap();
        let j = serde_json::to_value(m.to_json()).unwrap();
        assert_eq!(j["classes"][0], "sugar");
        assert_eq!(j["C"], 1.0);
        let back = SvmModel::<f64>::from_json(&m.to_json());
        assert_eq!(back.w, m.w);
    }

    #[test]
    fn f32_solver() {
        let x: Vec<Vec<f32>> = vec![vec![-1.0, 0.5], vec![-2.0, 0.0], vec![1.0, 0.2], vec![2.5, -0.1]];
        let y = vec![Side::Negative, Side::Negative, Side::Positive, Side::Positive];
        let m = fit_svm(&x, &y, &SvmParams::default()).unwrap();
        assert!(x.iter().zip(&y).all(|(p, s)| m.predict(p) == *s));
    }
}
