//! Scalar abstractions.
//!
//! Landscape sampling, averaging and the inverse embedding only need field
//! arithmetic, so they are generic over [`Scalar`], which admits both IEEE
//! floats and exact rationals. The statistical models (PCA, SVM) additionally
//! need square roots and a machine epsilon, which [`Real`] provides.

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like scalar: `f32`, `f64` or an exact rational.
pub trait Scalar:
    Num + Signed + Copy + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Exact conversion for the small integers produced by the lattice code.
    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer not representable in scalar type")
    }

    /// Lossy conversion used for serialization and plotting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for Rational64 {}

/// Floating point scalar for the statistical models.
pub trait Real: Scalar + Float + std::iter::Sum + std::fmt::Display {
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 not representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_division_is_exact() {
        let third = Rational64::from_int(1) / Rational64::from_int(3);
        assert_eq!(third * Rational64::from_int(3), Rational64::from_int(1));
        assert!((third.to_f64_lossy() - 1.0 / 3.0).abs() < 1e-15);
    }
}
