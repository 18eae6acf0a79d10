//! PCA and SVM checked against independent textbook solvers.

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tda_texture::classify::{fit_pca, fit_svm, primal_objective, Side, SvmParams};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues (descending) and matching unit eigenvectors.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals = idx.iter().map(|&i| a[i][i]).collect();
    let vecs = idx.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (vals, vecs)
}

fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // anisotropic so the leading eigenvalues are well separated
    (0..n)
        .map(|_| (0..d).map(|k| rng.random_range(-1.0..1.0) * (d - k) as f64).collect())
        .collect()
}

#[test]
fn pca_matches_covariance_eigenvectors() {
    for seed in 0..5 {
        let (n, d) = (40, 8);
        let rows = random_rows(n, d, seed);
        let pca = fit_pca(&rows, 3).unwrap();

        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64)
                    .collect()
            })
            .collect();
        let total: f64 = (0..d).map(|i| cov[i][i]).sum();
        let (vals, vecs) = jacobi_eigen(cov);

        for k in 0..3 {
            assert!((pca.explained_variance[k] - vals[k]).abs() < 1e-8, "seed {seed} eigenvalue {k}");
            assert!((pca.explained_variance_ratio[k] - vals[k] / total).abs() < 1e-8);
            // same axis up to orientation
            let align = dot(&pca.components[k], &vecs[k]).abs();
            assert!((align - 1.0).abs() < 1e-8, "seed {seed} component {k}: {align}");
        }

        // reconstruction residual equals the discarded variance
        let mut resid = 0.0;
        for r in &rows {
            let p = pca.project(r).unwrap();
            let back = pca.back_project(&p).unwrap();
            resid += r.iter().zip(&mean).zip(&back).map(|((x, m), b)| (x - m - b).powi(2)).sum::<f64>();
        }
        let expected = total - vals[..3].iter().sum::<f64>();
        assert!((resid / (n - 1) as f64 - expected).abs() < 1e-8);
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

enum State {
    Zero,
    Free,
    Upper,
}

/// Optimal `(w, b)` of the soft-margin problem found by enumerating which
/// dual variables sit at 0, at C, or strictly between, and keeping a KKT
/// point.
fn active_set_reference(x: &[Vec<f64>], y: &[f64], c: f64) -> Option<(Vec<f64>, f64)> {
    let n = x.len();
    let d = x[0].len();
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for code in 0..3usize.pow(n as u32) {
        let states: Vec<State> = (0..n)
            .map(|i| match code / 3usize.pow(i as u32) % 3 {
                0 => State::Zero,
                1 => State::Free,
                _ => State::Upper,
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| matches!(states[i], State::Free)).collect();
        let upper: Vec<usize> = (0..n).filter(|&i| matches!(states[i], State::Upper)).collect();
        if free.is_empty() {
            continue;
        }
        let m = free.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[r][s] = y[i] * y[j] * dot(&x[i], &x[j]);
            }
            a[r][m] = -y[i];
            rhs[r] = 1.0 - y[i] * upper.iter().map(|&j| c * y[j] * dot(&x[i], &x[j])).sum::<f64>();
        }
        for (s, &j) in free.iter().enumerate() {
            a[m][s] = y[j];
        }
        rhs[m] = -upper.iter().map(|&j| c * y[j]).sum::<f64>();
        let Some(sol) = solve(a, rhs) else { continue };
        if sol[..m].iter().any(|&al| al <= 0.0 || al >= c) {
            continue;
        }
        let mut alpha = vec![0.0; n];
        for (s, &j) in free.iter().enumerate() {
            alpha[j] = sol[s];
        }
        for &j in &upper {
            alpha[j] = c;
        }
        let b = sol[m];
        let w: Vec<f64> = (0..d).map(|k| (0..n).map(|i| alpha[i] * y[i] * x[i][k]).sum()).collect();
        let kkt = (0..n).all(|i| {
            let margin = y[i] * (dot(&w, &x[i]) - b);
            match states[i] {
                State::Zero => margin >= 1.0 - 1e-9,
                State::Upper => margin <= 1.0 + 1e-9,
                State::Free => true,
            }
        });
        if kkt {
            let sides: Vec<Side> = y.iter().map(|&v| if v > 0.0 { Side::Positive } else { Side::Negative }).collect();
            let obj = primal_objective(&w, b, c, x, &sides);
            if best.as_ref().is_none_or(|b| obj < b.2) {
                best = Some((w, b, obj));
            }
        }
    }
    best.map(|(w, b, _)| (w, b))
}

fn labelled_points(n: usize, d: usize, seed: u64, overlap: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Side>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        x.push((0..d).map(|k| rng.random_range(-overlap..overlap) + if k == 0 { label } else { 0.3 * label }).collect());
        y.push(label);
    }
    let sides = y.iter().map(|&v| if v > 0.0 { Side::Positive } else { Side::Negative }).collect();
    (x, y, sides)
}

#[test]
fn smo_matches_active_set_enumeration() {
    let mut checked = 0;
    for seed in 0..12 {
        let n = 6 + (seed as usize % 3);
        let (x, y, sides) = labelled_points(n, 3, seed, 1.5);
        let c = [0.3, 1.0, 4.0][seed as usize % 3];
        let Some((w_ref, _)) = active_set_reference(&x, &y, c) else { continue };
        let params = SvmParams { c, ..SvmParams::default() };
        let model = fit_svm(&x, &sides, &params).unwrap();
        let obj_ref = primal_objective(&w_ref, active_set_reference(&x, &y, c).unwrap().1, c, &x, &sides);
        let obj = model.objective(&x, &sides);
        assert!((obj - obj_ref).abs() <= 1e-6 * obj_ref.abs().max(1.0), "seed {seed}: {obj} vs {obj_ref}");
        let wn = dot(&w_ref, &w_ref).sqrt();
        for (a, b) in model.w.iter().zip(&w_ref) {
            assert!((a - b).abs() <= 1e-6 * wn.max(1.0), "seed {seed}: w {:?} vs {:?}", model.w, w_ref);
        }
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} reference solutions found");
}

/// Maximum margin of separable data by enumerating candidate support sets
/// of size 2 to 4 and solving the equality-constrained problem on each.
fn hard_margin_reference(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = x.len();
    let mut best = f64::INFINITY;
    let mut consider = |set: &[usize]| {
        let m = set.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for (r, &i) in set.iter().enumerate() {
            for (s, &j) in set.iter().enumerate() {
                a[r][s] = y[i] * y[j] * dot(&x[i], &x[j]);
            }
            a[r][m] = -y[i];
            rhs[r] = 1.0;
            a[m][r] = y[i];
        }
        let Some(sol) = solve(a, rhs) else { return };
        if sol[..m].iter().any(|&l| l < -1e-12) {
            return;
        }
        let w: Vec<f64> = (0..3).map(|k| set.iter().enumerate().map(|(s, &i)| sol[s] * y[i] * x[i][k]).sum()).collect();
        let b = sol[m];
        if (0..n).all(|i| y[i] * (dot(&w, &x[i]) - b) >= 1.0 - 1e-9) {
            best = best.min(dot(&w, &w).sqrt());
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            consider(&[i, j]);
            for k in j + 1..n {
                consider(&[i, j, k]);
                for l in k + 1..n {
                    consider(&[i, j, k, l]);
                }
            }
        }
    }
    1.0 / best
}

#[test]
fn large_c_recovers_hard_margin() {
    for seed in 0..3 {
        let (x, y, sides) = labelled_points(20, 3, 100 + seed, 0.6);
        let margin_ref = hard_margin_reference(&x, &y);
        assert!(margin_ref.is_finite() && margin_ref > 0.0);
        let params = SvmParams { c: 1e6, ..SvmParams::default() };
        let model = fit_svm(&x, &sides, &params).unwrap();
        let margin = 1.0 / model.norm_w();
        assert!((margin - margin_ref).abs() < 1e-4, "seed {seed}: {margin} vs {margin_ref}");
        assert!(x.iter().zip(&sides).all(|(p, s)| model.predict(p) == *s));
    }
}

#[test]
fn rescaling_data_and_c_together_rescales_the_plane() {
    let (x, _, sides) = labelled_points(30, 3, 7, 1.2);
    let s = 3.0;
    let scaled: Vec<Vec<f64>> = x.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
    let a = fit_svm(&x, &sides, &SvmParams { c: 0.9, ..SvmParams::default() }).unwrap();
    let b = fit_svm(&scaled, &sides, &SvmParams { c: 0.1, ..SvmParams::default() }).unwrap();
    for (wa, wb) in a.w.iter().zip(&b.w) {
        assert!((wa - wb * s).abs() < 1e-6, "{wa} vs {}", wb * s);
    }
    assert!((a.b - b.b).abs() < 1e-6);
}

#[test]
fn svm_is_invariant_to_row_order() {
    let (x, _, sides) = labelled_points(40, 3, 9, 1.3);
    let a = fit_svm(&x, &sides, &SvmParams::default()).unwrap();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.reverse();
    order.rotate_left(7);
    let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let sp: Vec<Side> = order.iter().map(|&i| sides[i]).collect();
    let b = fit_svm(&xp, &sp, &SvmParams::default()).unwrap();
    for (wa, wb) in a.w.iter().zip(&b.w) {
        assert!((wa - wb).abs() < 1e-6);
    }
    assert!((a.objective(&x, &sides) - b.objective(&x, &sides)).abs() < 1e-8);
}

#[test]
fn separable_plane_is_stable_once_c_is_large() {
    let (x, _, sides) = labelled_points(20, 3, 21, 0.5);
    let fit = |c: f64| fit_svm(&x, &sides, &SvmParams { c, ..SvmParams::default() }).unwrap();
    let (a, b) = (fit(1e3), fit(1e5));
    // separable: every point on or outside its margin
    assert!(x.iter().zip(&sides).all(|(p, s)| s.sign::<f64>() * a.decision(p) >= 1.0 - 1e-6));
    for (wa, wb) in a.w.iter().zip(&b.w) {
        assert!((wa - wb).abs() < 1e-6);
    }
    assert!((a.b - b.b).abs() < 1e-6);
}

#[test]
fn constant_prediction_scores_the_class_share() {
    // a model whose plane sits beyond all test points predicts one class
    let (x, _, sides) = labelled_points(10, 3, 4, 0.3);
    let mut m = fit_svm(&x, &sides, &SvmParams::default()).unwrap();
    m.b = 1e9;
    let agree = x.iter().zip(&sides).filter(|(p, s)| m.predict(p) == **s).count();
    let negatives = sides.iter().filter(|s| **s == Side::Negative).count();
    assert_eq!(agree, negatives);
}
