//! Persistence landscapes and their fixed-grid embedding.
//!
//! Bars have integer endpoints on the internal parameter axis `[0, 255]`, so
//! every landscape function is piecewise linear with breakpoints at
//! half-integers and slopes in `{-1, 0, 1}`. A landscape is therefore stored
//! exactly as its doubled values `2 * lambda(x / 2)` for `x = 0..=510`.
//!
//! Sampling at grid point `t_j = min + (max - min) * j / (n - 1)` reduces to
//! an integer numerator over `2 * (n - 1)`, converted with a single division
//! in the target scalar. With `Rational64` the embedding is exact; with
//! floats each component is the correctly rounded exact value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::Barcode;
use crate::scalar::Scalar;

/// Largest value of the internal parameter.
pub const PARAM_MAX: u8 = 255;
const LATTICE_LEN: usize = 2 * PARAM_MAX as usize + 1;

/// Homological dimensions covered by the embedding.
pub const DIMS: [u8; 2] = [0, 1];

/// Evenly spaced sampling grid over `[min, max]` of the internal parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub min: u8,
    pub max: u8,
    pub n: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            min: 0,
            max: PARAM_MAX,
            n: 200,
        }
    }
}

impl Grid {
    pub fn new(min: u8, max: u8, n: usize) -> Result<Self> {
        let g = Self { min, max, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min >= self.max || self.n < 2 {
            return Err(Error::Config(format!(
                "grid needs min < max and n >= 2, got [{}, {}] with n = {}",
                self.min, self.max, self.n
            )));
        }
        Ok(())
    }

    /// `t_j` as the exact fraction `num / den`.
    fn point_fraction(&self, j: usize) -> (i64, i64) {
        let den = self.n as i64 - 1;
        let num = self.min as i64 * den + (self.max - self.min) as i64 * j as i64;
        (num, den)
    }

    pub fn point<T: Scalar>(&self, j: usize) -> T {
        let (num, den) = self.point_fraction(j);
        T::from_int(num) / T::from_int(den)
    }

    pub fn points<T: Scalar>(&self) -> Vec<T> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    pub fn spacing<T: Scalar>(&self) -> T {
        T::from_int((self.max - self.min) as i64) / T::from_int(self.n as i64 - 1)
    }
}

/// Landscape size and sampling grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub k: usize,
    pub grid: Grid,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            k: 5,
            grid: Grid::default(),
        }
    }
}

impl LandscapeConfig {
    /// Length of one embedding vector.
    pub fn embedding_len(&self) -> usize {
        DIMS.len() * self.k * self.grid.n
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        self.grid.validate()
    }
}

/// The first `k` landscape functions of one homological dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PersistenceLandscape {
    dim: u8,
    /// `doubled[i][x] = 2 * lambda_{i+1}(x / 2)`.
    doubled: Vec<Vec<u16>>,
}

/// Landscape of the finite bars of dimension `dim`. Infinite bars are
/// excluded.
pub fn compute_landscape(bc: &Barcode, dim: u8, k: usize) -> PersistenceLandscape {
    landscape_from_intervals(dim, &bc.finite_intervals(dim), k)
}

/// Landscape of explicit internal-parameter intervals `(birth, death)`.
pub fn landscape_from_intervals(dim: u8, intervals: &[(u8, u8)], k: usize) -> PersistenceLandscape {
    // top[x] holds the k largest tent values at lattice position x, descending
    let mut top = vec![0u16; LATTICE_LEN * k];
    for &(b, d) in intervals {
        let (lo, hi) = (2 * b.min(d) as usize, 2 * b.max(d) as usize);
        for x in lo + 1..hi {
            let v = (x - lo).min(hi - x) as u16;
            let slot = &mut top[x * k..(x + 1) * k];
            if v <= slot[k - 1] {
                continue;
            }
            let mut i = k - 1;
            while i > 0 && slot[i - 1] < v {
                slot[i] = slot[i - 1];
                i -= 1;
            }
            slot[i] = v;
        }
    }
    let doubled = (0..k)
        .map(|i| (0..LATTICE_LEN).map(|x| top[x * k + i]).collect())
        .collect();
    PersistenceLandscape { dim, doubled }
}

impl PersistenceLandscape {
    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.doubled.len()
    }

    /// `lambda_{i+1}` at an arbitrary parameter value.
    pub fn evaluate<T: Scalar>(&self, i: usize, t: T) -> T {
        let two = T::from_int(2);
        let x = t * two;
        if x <= T::zero() || x >= T::from_int(LATTICE_LEN as i64 - 1) {
            return T::zero();
        }
        let mut m = x.to_f64_lossy().floor() as i64;
        while T::from_int(m) > x {
            m -= 1;
        }
        while T::from_int(m + 1) <= x {
            m += 1;
        }
        let f = &self.doubled[i];
        let y0 = f[m as usize] as i64;
        let slope = f[m as usize + 1] as i64 - y0;
        (T::from_int(y0) + T::from_int(slope) * (x - T::from_int(m))) / two
    }

    /// Vertices of `lambda_{i+1}` as `(t, value)` pairs, redundant collinear
    /// points removed.
    pub fn breakpoints(&self, i: usize) -> Vec<(f64, f64)> {
        let f = &self.doubled[i];
        let mut out = vec![(0.0, f[0] as f64 / 2.0)];
        for x in 1..LATTICE_LEN - 1 {
            let (a, b, c) = (f[x - 1] as i32, f[x] as i32, f[x + 1] as i32);
            if b - a != c - b {
                out.push((x as f64 / 2.0, b as f64 / 2.0));
            }
        }
        out.push((PARAM_MAX as f64, f[LATTICE_LEN - 1] as f64 / 2.0));
        out
    }

    /// Samples every function on `grid`, concatenated function by function.
    pub fn sample<T: Scalar>(&self, grid: &Grid) -> Vec<T> {
        let mut out = Vec::with_capacity(self.k() * grid.n);
        for f in &self.doubled {
            out.extend((0..grid.n).map(|j| sample_lattice::<T>(f, grid, j)));
        }
        out
    }
}

fn sample_lattice<T: Scalar>(f: &[u16], grid: &Grid, j: usize) -> T {
    let (num, den) = grid.point_fraction(j);
    let x_num = 2 * num;
    let m = (x_num / den) as usize;
    let rem = x_num - m as i64 * den;
    let y0 = f[m] as i64;
    let slope = if m + 1 < f.len() { f[m + 1] as i64 - y0 } else { 0 };
    debug_assert!((-1..=1).contains(&slope));
    T::from_int(y0 * den + slope * rem) / T::from_int(2 * den)
}

/// Samples `ls` on the grid, `k * n` values.
pub fn sample_landscape<T: Scalar>(ls: &PersistenceLandscape, grid: &Grid) -> Vec<T> {
    ls.sample(grid)
}

/// Fixed-length vector summarizing a barcode: for H0 then H1, each of the
/// `k` landscape functions sampled on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeEmbedding<T> {
    pub values: Vec<T>,
    pub config: LandscapeConfig,
}

pub fn embed<T: Scalar>(bc: &Barcode, config: &LandscapeConfig) -> LandscapeEmbedding<T> {
    let mut values = Vec::with_capacity(config.embedding_len());
    for dim in DIMS {
        values.extend(compute_landscape(bc, dim, config.k).sample::<T>(&config.grid));
    }
    LandscapeEmbedding {
        values,
        config: *config,
    }
}

impl<T: Scalar> LandscapeEmbedding<T> {
    pub fn zeros(config: &LandscapeConfig) -> Self {
        Self {
            values: vec![T::zero(); config.embedding_len()],
            config: *config,
        }
    }

    /// Reshapes into sampled curves (never virtual).
    pub fn curves(&self) -> LandscapeCurves<T> {
        let mut c = vector_to_landscape(&self.values, &self.config)
            .expect("embedding length matches its config");
        c.is_virtual = false;
        c
    }

    /// Samples of `lambda_{i+1}` in dimension `dim`.
    pub fn function(&self, dim: u8, i: usize) -> &[T] {
        let n = self.config.grid.n;
        let start = (dim as usize * self.config.k + i) * n;
        &self.values[start..start + n]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> LandscapeEmbedding<U> {
        LandscapeEmbedding {
            values: self.values.iter().map(|&v| f(v)).collect(),
            config: self.config,
        }
    }

    pub fn to_f64(&self) -> LandscapeEmbedding<f64> {
        self.map(|v| v.to_f64_lossy())
    }
}

/// Componentwise mean.
pub fn average_embeddings<T: Scalar>(items: &[LandscapeEmbedding<T>]) -> Result<LandscapeEmbedding<T>> {
    let first = items.first().ok_or(Error::Empty("no embeddings to average"))?;
    let mut sum = vec![T::zero(); first.values.len()];
    for e in items {
        if e.config != first.config {
            return Err(Error::Config("embeddings sampled on different grids".into()));
        }
        for (s, &v) in sum.iter_mut().zip(&e.values) {
            *s = *s + v;
        }
    }
    let count = T::from_int(items.len() as i64);
    Ok(LandscapeEmbedding {
        values: sum.into_iter().map(|s| s / count).collect(),
        config: first.config,
    })
}

/// Landscape-shaped curves sampled on a grid. Curves recovered from an
/// arbitrary point of embedding space are `virtual` and are not guaranteed
/// to satisfy the landscape axioms.
#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeCurves<T> {
    pub grid: Grid,
    pub h0: Vec<Vec<T>>,
    pub h1: Vec<Vec<T>>,
    pub is_virtual: bool,
}

/// Inverse embedding: reshapes a vector into `2 * k` sampled curves,
/// flagged virtual.
pub fn vector_to_landscape<T: Scalar>(values: &[T], config: &LandscapeConfig) -> Result<LandscapeCurves<T>> {
    let expected = config.embedding_len();
    if values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: values.len(),
        });
    }
    let n = config.grid.n;
    let mut blocks = values.chunks(n).map(<[T]>::to_vec);
    let h0 = blocks.by_ref().take(config.k).collect();
    let h1 = blocks.collect();
    Ok(LandscapeCurves {
        grid: config.grid,
        h0,
        h1,
        is_virtual: true,
    })
}

/// A failed landscape axiom found on sampled curves.
#[derive(Clone, Debug, PartialEq)]
pub enum AxiomViolation {
    Negative { dim: u8, function: usize, sample: usize },
    Ordering { dim: u8, function: usize, sample: usize },
    Lipschitz { dim: u8, function: usize, sample: usize },
}

impl<T: Scalar> LandscapeCurves<T> {
    pub fn k(&self) -> usize {
        self.h0.len()
    }

    pub fn dim(&self, dim: u8) -> &[Vec<T>] {
        if dim == 0 {
            &self.h0
        } else {
            &self.h1
        }
    }

    /// Concatenation back into an embedding vector.
    pub fn to_vector(&self) -> Vec<T> {
        self.h0.iter().chain(&self.h1).flatten().copied().collect()
    }

    /// Checks non-negativity, ordering and the grid-resolution Lipschitz
    /// bound.
    pub fn axiom_violations(&self) -> Vec<AxiomViolation> {
        let spacing: T = self.grid.spacing();
        let mut out = Vec::new();
        for dim in DIMS {
            let fs = self.dim(dim);
            for (i, f) in fs.iter().enumerate() {
                for (j, &v) in f.iter().enumerate() {
                    if v < T::zero() {
                        out.push(AxiomViolation::Negative { dim, function: i, sample: j });
                    }
                    if i + 1 < fs.len() && fs[i + 1][j] > v {
                        out.push(AxiomViolation::Ordering { dim, function: i, sample: j });
                    }
                    if j + 1 < f.len() && (f[j + 1] - v).abs() > spacing {
                        out.push(AxiomViolation::Lipschitz { dim, function: i, sample: j });
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> CurvesJson {
        let conv = |fs: &[Vec<T>]| -> Vec<Vec<f64>> {
            fs.iter()
                .map(|f| f.iter().map(|v| v.to_f64_lossy()).collect())
                .collect()
        };
        CurvesJson {
            grid: self.grid,
            h0: conv(&self.h0),
            h1: conv(&self.h1),
            is_virtual: self.is_virtual,
        }
    }

    pub fn block_max(&self, dim: u8) -> T {
        self.dim(dim)
            .iter()
            .flatten()
            .fold(T::zero(), |m, &v| if v > m { v } else { m })
    }

    /// Sum of all samples in a dimension (a crude "mass").
    pub fn mass(&self, dim: u8) -> T {
        self.dim(dim).iter().flatten().fold(T::zero(), |s, &v| s + v)
    }
}

/// Serialized form of [`LandscapeCurves`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvesJson {
    pub grid: Grid,
    pub h0: Vec<Vec<f64>>,
    pub h1: Vec<Vec<f64>>,
    #[serde(rename = "virtual", default, skip_serializing_if = "std::ops::Not::not")]
    pub is_virtual: bool,
}

impl CurvesJson {
    pub fn into_curves(self) -> LandscapeCurves<f64> {
        LandscapeCurves {
            grid: self.grid,
            h0: self.h0,
            h1: self.h1,
            is_virtual: self.is_virtual,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::GrayImage;
    use crate::persistence::barcode;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn empty_landscape_is_zero() {
        let ls = landscape_from_intervals(0, &[], 5);
        let v: Vec<f64> = ls.sample(&Grid::default());
        assert_eq!(v.len(), 1000);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_tent_peak() {
        // intensity 200 -> 10 is internal 55 -> 245
        let ls = landscape_from_intervals(0, &[(55, 245)], 5);
        assert_eq!(ls.evaluate(0, r(150, 1)), r(95, 1));
        assert_eq!(ls.evaluate(0, r(55, 1)), r(0, 1));
        assert_eq!(ls.evaluate(0, r(100, 1)), r(45, 1));
        for i in 1..5 {
            assert_eq!(ls.evaluate(i, r(150, 1)), r(0, 1));
        }
        assert_eq!(ls.breakpoints(0), vec![(0.0, 0.0), (55.0, 0.0), (150.0, 95.0), (245.0, 0.0), (255.0, 0.0)]);
    }

    #[test]
    fn nested_tents() {
        let ls = landscape_from_intervals(1, &[(0, 6), (2, 4)], 5);
        assert_eq!(ls.evaluate(0, r(3, 1)), r(3, 1));
        assert_eq!(ls.evaluate(1, r(3, 1)), r(1, 1));
        assert_eq!(ls.evaluate(1, r(5, 2)), r(1, 2));
        assert_eq!(ls.evaluate(0, 3.0f64), 3.0);
    }

    #[test]
    fn sampled_max_is_tent_at_nearest_grid_point() {
        let ls = landscape_from_intervals(0, &[(55, 245)], 5);
        let grid = Grid::default();
        let v: Vec<Rational64> = ls.sample(&grid);
        let pts: Vec<Rational64> = grid.points();
        let nearest = (0..grid.n)
            .min_by_key(|&j| num_traits::Signed::abs(&(pts[j] - r(150, 1))))
            .unwrap();
        let max = *v[..grid.n].iter().max().unwrap();
        assert_eq!(max, ls.evaluate(0, pts[nearest]));
        assert_eq!(max, r(95, 1) - num_traits::Signed::abs(&(pts[nearest] - r(150, 1))));
    }

    #[test]
    fn sample_matches_evaluate_exactly() {
        let ls = landscape_from_intervals(0, &[(3, 200), (10, 90), (50, 61), (60, 255), (0, 255)], 5);
        let grid = Grid::default();
        let v: Vec<Rational64> = ls.sample(&grid);
        for i in 0..5 {
            for j in 0..grid.n {
                assert_eq!(v[i * grid.n + j], ls.evaluate(i, grid.point::<Rational64>(j)));
            }
        }
    }

    #[test]
    fn constant_image_embeds_to_zero() {
        let e: LandscapeEmbedding<f64> = embed(&barcode(&GrayImage::filled(6, 6, 77)), &LandscapeConfig::default());
        assert_eq!(e.values.len(), 2000);
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn h0_only_leaves_h1_block_zero() {
        let img = GrayImage::new(5, 1, vec![10, 200, 10, 180, 10]).unwrap();
        let e: LandscapeEmbedding<f64> = embed(&barcode(&img), &LandscapeConfig::default());
        assert!(e.values[..1000].iter().any(|&v| v > 0.0));
        assert!(e.values[1000..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ring_gives_single_h1_tent() {
        let img = GrayImage::from_fn(3, 3, |x, y| if x == 1 && y == 1 { 50 } else { 200 });
        let e: LandscapeEmbedding<Rational64> = embed(&barcode(&img), &LandscapeConfig::default());
        let c = e.curves();
        assert!(c.h0.iter().flatten().all(|v| *v == r(0, 1)));
        assert!(c.h1[0].iter().any(|v| *v > r(0, 1)));
        assert!(c.h1[1..].iter().flatten().all(|v| *v == r(0, 1)));
        let expected = landscape_from_intervals(1, &[(55, 205)], 1).sample::<Rational64>(&Grid::default());
        assert_eq!(c.h1[0], expected);
    }

    #[test]
    fn average_examples() {
        let cfg = LandscapeConfig::default();
        let img = GrayImage::from_fn(10, 10, |x, y| ((x * 41 + y * 73) % 256) as u8);
        let v: LandscapeEmbedding<Rational64> = embed(&barcode(&img), &cfg);
        let avg = average_embeddings(&[v.clone(), v.clone(), v.clone()]).unwrap();
        assert_eq!(avg, v);
        let half = average_embeddings(&[v.clone(), LandscapeEmbedding::zeros(&cfg)]).unwrap();
        for (h, x) in half.values.iter().zip(&v.values) {
            assert_eq!(*h * r(2, 1), *x);
        }
        assert!(average_embeddings::<f64>(&[]).is_err());
    }

    #[test]
    fn vector_to_landscape_roundtrip_and_errors() {
        let cfg = LandscapeConfig::default();
        let img = GrayImage::from_fn(12, 9, |x, y| ((x * 97 + y * 31 + x * y * 7) % 256) as u8);
        let bc = barcode(&img);
        let e: LandscapeEmbedding<f64> = embed(&bc, &cfg);
        let curves = vector_to_landscape(&e.values, &cfg).unwrap();
        assert!(curves.is_virtual);
        for i in 0..5 {
            assert_eq!(curves.h0[i], compute_landscape(&bc, 0, 5).sample::<f64>(&cfg.grid)[i * 200..(i + 1) * 200]);
        }
        assert_eq!(curves.to_vector(), e.values);
        let zero = vector_to_landscape(&vec![0.0f64; 2000], &cfg).unwrap();
        assert_eq!(zero.h0.len() + zero.h1.len(), 10);
        assert!(matches!(
            vector_to_landscape(&[0.0f64; 1999], &cfg),
            Err(Error::DimensionMismatch { expected: 2000, found: 1999 })
        ));
    }

    #[test]
    fn virtual_curves_may_violate_axioms() {
        let cfg = LandscapeConfig::default();
        let mut v = vec![0.0f64; 2000];
        v[250] = 3.0; // lambda_2 above lambda_1, and a jump larger than the spacing
        let c = vector_to_landscape(&v, &cfg).unwrap();
        let bad = c.axiom_violations();
        assert!(bad.iter().any(|x| matches!(x, AxiomViolation::Ordering { .. })));
        assert!(bad.iter().any(|x| matches!(x, AxiomViolation::Lipschitz { .. })));
    }

    #[test]
    fn curves_json_shape() {
        let cfg = LandscapeConfig { k: 2, grid: Grid::new(0, 255, 3).unwrap() };
        let c = vector_to_landscape(&[0.0f64, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0], &cfg).unwrap();
        let json = serde_json::to_string(&c.to_json()).unwrap();
        assert_eq!(
            json,
            r#"{"grid":{"min":0,"max":255,"n":3},"h0":[[0.0,1.0,2.0],[3.0,4.0,5.0]],"h1":[[6.0,7.0,8.0],[9.0,10.0,11.0]],"virtual":true}"#
        );
        let back: CurvesJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_curves(), c);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(10, 10, 5).is_err());
        assert!(Grid::new(0, 255, 1).is_err());
        assert_eq!(Grid::default().point::<Rational64>(199), r(255, 1));
        assert_eq!(Grid::default().spacing::<Rational64>(), r(255, 199));
    }

    prop_compose! {
        fn intervals()(raw in prop::collection::vec((0u8..=255, 0u8..=255), 0..40)) -> Vec<(u8, u8)> {
            raw.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect()
        }
    }

    proptest! {
        #[test]
        fn landscape_is_permutation_invariant(mut iv in intervals(), seed in any::<u64>()) {
            let a = landscape_from_intervals(0, &iv, 5);
            // deterministic shuffle
            let n = iv.len();
            if n > 1 {
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    iv.swap(i, (s >> 33) as usize % (i + 1));
                }
            }
            prop_assert_eq!(a, landscape_from_intervals(0, &iv, 5));
        }

        #[test]
        fn sampled_curves_satisfy_axioms(iv in intervals()) {
            let ls = landscape_from_intervals(0, &iv, 5);
            let cfg = LandscapeConfig::default();
            let mut values: Vec<Rational64> = ls.sample(&cfg.grid);
            values.extend(std::iter::repeat_n(r(0, 1), 1000));
            let c = vector_to_landscape(&values, &cfg).unwrap();
            prop_assert!(c.axiom_violations().is_empty());
        }

        #[test]
        fn float_sampling_rounds_the_exact_value(iv in intervals()) {
            let ls = landscape_from_intervals(0, &iv, 3);
            let grid = Grid::default();
            let exact: Vec<Rational64> = ls.sample(&grid);
            let float: Vec<f64> = ls.sample(&grid);
            for (e, f) in exact.iter().zip(&float) {
                // exact numerator / denominator divided once in f64
                let expect = *e.numer() as f64 / *e.denom() as f64;
                prop_assert_eq!(*f, expect);
            }
        }
    }
}
