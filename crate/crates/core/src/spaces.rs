//! Finite-dimensional Banach codomains: `R^d` with the `l^s` norm.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `R^dimension` under the `l^s` norm, `s = norm_exponent > 1`.
///
/// `l^s` is `min(s, 2)`-smooth, so that is the largest martingale moment
/// exponent `p` the inequalities may be run with. The martingale constant
/// `C_{p,B}` exists for every admissible `p` but is never evaluated; the
/// harness fits empirical constants instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct BanachSpace {
    dimension: usize,
    norm_exponent: f64,
}

#[derive(Deserialize)]
struct RawSpace {
    dimension: usize,
    #[serde(default = "two")]
    norm_exponent: f64,
}

fn two() -> f64 {
    2.0
}

impl TryFrom<RawSpace> for BanachSpace {
    type Error = Error;
    fn try_from(r: RawSpace) -> Result<Self> {
        BanachSpace::new(r.dimension, r.norm_exponent)
    }
}

impl Default for BanachSpace {
    fn default() -> Self {
        Self::real()
    }
}

/// Half-open interval `(1, upper]` of admissible moment exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentRange {
    pub upper: f64,
}

impl ExponentRange {
    pub fn contains(&self, p: f64) -> bool {
        p > 1.0 && p <= self.upper
    }
}

impl BanachSpace {
    pub fn new(dimension: usize, norm_exponent: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dimension", "must be positive"));
        }
        if !norm_exponent.is_finite() || norm_exponent <= 1.0 {
            return Err(Error::param(
                "norm_exponent",
                format!("{norm_exponent} is not > 1 (l^1 is not r-smooth for any r > 1)"),
            ));
        }
        Ok(Self {
            dimension,
            norm_exponent,
        })
    }

    /// The real line with `|.|`.
    pub fn real() -> Self {
        Self {
            dimension: 1,
            norm_exponent: 2.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn norm_exponent(&self) -> f64 {
        self.norm_exponent
    }

    /// Smoothness power `r = min(s, 2)`.
    pub fn smoothness(&self) -> f64 {
        self.norm_exponent.min(2.0)
    }

    pub fn admissible_p_range(&self) -> ExponentRange {
        ExponentRange {
            upper: self.smoothness(),
        }
    }

    pub fn norm(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: point.len(),
            });
        }
        Ok(self.norm_unchecked(point))
    }

    /// Norm without the dimension check.
    #[inline]
    pub fn norm_unchecked(&self, point: &[f64]) -> f64 {
        if point.len() == 1 {
            return point[0].abs();
        }
        let s = self.norm_exponent;
        let max = point.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max == 0.0 || !max.is_finite() {
            return max;
        }
        if s == 2.0 {
            let ss: f64 = point.iter().map(|x| (x / max) * (x / max)).sum();
            return max * ss.sqrt();
        }
        let ss: f64 = point.iter().map(|x| (x.abs() / max).powf(s)).sum();
        max * ss.powf(1.0 / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norms() {
        let e = BanachSpace::new(2, 2.0).unwrap();
        assert_eq!(e.norm(&[3.0, 4.0]).unwrap(), 5.0);
        let l = BanachSpace::new(3, 1.5).unwrap();
        assert_eq!(l.norm(&[0.0; 3]).unwrap(), 0.0);
        // 3^(2/3), high-precision value 2.080083823051904114530056824358...
        let v = l.norm(&[1.0, 1.0, 1.0]).unwrap();
        assert!((v - 2.080_083_823_051_904).abs() < 1e-14);
        assert!(matches!(
            e.norm(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn exponent_ranges() {
        assert_eq!(BanachSpace::new(1, 2.0).unwrap().admissible_p_range().upper, 2.0);
        assert_eq!(BanachSpace::new(1, 1.5).unwrap().admissible_p_range().upper, 1.5);
        assert_eq!(BanachSpace::new(1, 3.0).unwrap().admissible_p_range().upper, 2.0);
        let r = BanachSpace::real().admissible_p_range();
        assert!(!r.contains(1.0));
        assert!(r.contains(2.0));
        assert!(!r.contains(2.0001));
    }

    #[test]
    fn rejects_l1_and_zero_dimension() {
        assert!(BanachSpace::new(2, 1.0).is_err());
        assert!(BanachSpace::new(0, 2.0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s: BanachSpace = serde_json::from_str(r#"{"dimension": 3, "norm_exponent": 1.5}"#).unwrap();
        assert_eq!(s, BanachSpace::new(3, 1.5).unwrap());
        assert!(serde_json::from_str::<BanachSpace>(r#"{"dimension": 3, "norm_exponent": 1}"#).is_err());
        let back: BanachSpace = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    fn vec_and_space() -> impl Strategy<Value = (BanachSpace, Vec<f64>, Vec<f64>)> {
        (1usize..6, 1.01f64..4.0).prop_flat_map(|(d, s)| {
            (
                Just(BanachSpace::new(d, s).unwrap()),
                prop::collection::vec(-1e3f64..1e3, d),
                prop::collection::vec(-1e3f64..1e3, d),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn triangle_inequality((sp, x, y) in vec_and_space()) {
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let lhs = sp.norm(&sum).unwrap();
            let rhs = sp.norm(&x).unwrap() + sp.norm(&y).unwrap();
            prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn homogeneity((sp, x, _y) in vec_and_space(), c in -50.0f64..50.0) {
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let a = sp.norm(&cx).unwrap();
            let b = c.abs() * sp.norm(&x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }
}
