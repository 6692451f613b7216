//! The analytic nonlinearity `F(u) = sum_k a_k u^k`, truncated at a finite order.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("unknown series family `{0}` (expected exp, sin, cos or geometric)")]
    UnknownFamily(String),
    #[error("truncation order must be non-negative, got {0}")]
    NegativeOrder(i64),
    #[error("coefficient list is empty")]
    Empty,
    #[error("coefficient a_{index} is not finite")]
    NonFinite { index: usize },
}

/// Named Taylor families, expanded about zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `exp(u)`, entire.
    Exp,
    /// `sin(u)`, entire.
    Sin,
    /// `cos(u)`, entire.
    Cos,
    /// `1 / (1 - u)`; the untruncated series only converges for `|scale * u| < 1`.
    Geometric,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Exp => "exp",
            Family::Sin => "sin",
            Family::Cos => "cos",
            Family::Geometric => "geometric",
        }
    }

    /// Taylor coefficient `c_k` of the unscaled family.
    fn taylor(self, k: usize, factorial: f64) -> f64 {
        match self {
            Family::Exp => 1.0 / factorial,
            Family::Geometric => 1.0,
            Family::Sin => match k % 4 {
                1 => 1.0 / factorial,
                3 => -1.0 / factorial,
                _ => 0.0,
            },
            Family::Cos => match k % 4 {
                0 => 1.0 / factorial,
                2 => -1.0 / factorial,
                _ => 0.0,
            },
        }
    }
}

impl FromStr for Family {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp" => Ok(Family::Exp),
            "sin" => Ok(Family::Sin),
            "cos" => Ok(Family::Cos),
            "geometric" => Ok(Family::Geometric),
            other => Err(SeriesError::UnknownFamily(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesKind {
    Polynomial,
    Named { family: Family, scale: f64 },
}

/// Truncated power series. Coefficients beyond the stored order are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    kind: SeriesKind,
    coefficients: Vec<f64>,
}

impl PowerSeries {
    /// Explicit polynomial `a_0 + a_1 u + ... + a_K u^K`.
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self, SeriesError> {
        if coefficients.is_empty() {
            return Err(SeriesError::Empty);
        }
        if let Some(index) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(SeriesError::NonFinite { index });
        }
        Ok(Self {
            kind: SeriesKind::Polynomial,
            coefficients,
        })
    }

    /// `family(scale * u)` truncated after the `u^order` term, i.e. `a_k = c_k * scale^k`.
    ///
    /// Truncation error is the caller's concern: for `exp`, `sin` and `cos` the
    /// tail after order `K` is bounded by `|scale*u|^(K+1) / (K+1)!` times a
    /// modest constant; for `geometric` the tail is `|scale*u|^(K+1) / (1 - |scale*u|)`
    /// and the full series diverges for `|scale*u| >= 1`.
    pub fn from_named(name: &str, scale: f64, order: i64) -> Result<Self, SeriesError> {
        let family: Family = name.parse()?;
        if order < 0 {
            return Err(SeriesError::NegativeOrder(order));
        }
        if !scale.is_finite() {
            return Err(SeriesError::NonFinite { index: 0 });
        }
        let order = order as usize;
        let mut coefficients = Vec::with_capacity(order + 1);
        let mut factorial = 1.0;
        let mut power = 1.0;
        for k in 0..=order {
            if k > 0 {
                factorial *= k as f64;
                power *= scale;
            }
            coefficients.push(family.taylor(k, factorial) * power);
        }
        Ok(Self {
            kind: SeriesKind::Named { family, scale },
            coefficients,
        })
    }

    pub fn kind(&self) -> &SeriesKind {
        &self.kind
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        self.coefficients.get(k).copied().unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Indices with a non-zero coefficient, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Horner evaluation of the truncated series.
    pub fn evaluate(&self, u: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, a| acc.mul_add(u, *a))
    }
}

impl fmt::Display for PowerSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SeriesKind::Polynomial => write!(f, "poly{:?}", self.coefficients),
            SeriesKind::Named { family, scale } => {
                write!(f, "{}({scale}*u) to order {}", family.name(), self.order())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polynomial_coefficients() {
        let s = PowerSeries::polynomial(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.coefficient(2), 1.0);
        assert_eq!(s.coefficient(7), 0.0);
        assert_eq!(s.support(), vec![2]);
        assert_eq!(s.evaluate(2.0), 4.0);
    }

    #[test]
    fn negation() {
        let s = PowerSeries::polynomial(vec![0.0, -1.0]).unwrap();
        assert_eq!(s.evaluate(0.5), -0.5);
    }

    #[test]
    fn named_families() {
        let sin = PowerSeries::from_named("sin", 1.0, 4).unwrap();
        assert_eq!(sin.coefficients(), &[0.0, 1.0, 0.0, -1.0 / 6.0, 0.0]);
        assert_eq!(sin.coefficient(3), -1.0 / 6.0);
        assert_eq!(sin.support(), vec![1, 3]);

        let exp = PowerSeries::from_named("exp", 1.0, 3).unwrap();
        assert_eq!(exp.coefficients(), &[1.0, 1.0, 0.5, 1.0 / 6.0]);

        let geo = PowerSeries::from_named("geometric", 1.0, 2).unwrap();
        assert_eq!(geo.coefficients(), &[1.0, 1.0, 1.0]);

        let cos = PowerSeries::from_named("cos", 2.0, 2).unwrap();
        assert_eq!(cos.coefficients(), &[1.0, 0.0, -2.0]);
    }

    #[test]
    fn truncated_exp_is_close_to_e() {
        // tail sum_{k>=13} 1/k! < 3e-10
        let exp = PowerSeries::from_named("exp", 1.0, 12).unwrap();
        assert!((exp.evaluate(1.0) - std::f64::consts::E).abs() < 3e-9);
    }

    #[test]
    fn scale_is_applied_coefficientwise() {
        let s = PowerSeries::from_named("exp", 0.5, 10).unwrap();
        for (k, a) in s.coefficients().iter().enumerate() {
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((a - 0.5f64.powi(k as i32) / fact).abs() < 1e-18);
        }
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            PowerSeries::from_named("log", 1.0, 3),
            Err(SeriesError::UnknownFamily(_))
        ));
        assert_eq!(
            PowerSeries::from_named("exp", 1.0, -1),
            Err(SeriesError::NegativeOrder(-1))
        );
        assert_eq!(PowerSeries::polynomial(vec![]), Err(SeriesError::Empty));
        assert_eq!(
            PowerSeries::polynomial(vec![1.0, f64::NAN]),
            Err(SeriesError::NonFinite { index: 1 })
        );
    }

    #[test]
    fn finite_differences_recover_low_coefficients() {
        let s = PowerSeries::from_named("exp", 0.7, 12).unwrap();
        let h = 1e-5;
        let a0 = s.evaluate(0.0);
        let a1 = (s.evaluate(h) - s.evaluate(-h)) / (2.0 * h);
        assert!((a0 - s.coefficient(0)).abs() < 1e-6);
        assert!((a1 - s.coefficient(1)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn horner_matches_naive_sum(
            coeffs in prop::collection::vec(-3.0f64..3.0, 1..8),
            u in -1.0f64..1.0,
        ) {
            let s = PowerSeries::polynomial(coeffs.clone()).unwrap();
            let naive: f64 = coeffs.iter().enumerate().map(|(k, a)| a * u.powi(k as i32)).sum();
            let scale = coeffs.iter().map(|a| a.abs()).sum::<f64>().max(1e-300);
            prop_assert!((s.evaluate(u) - naive).abs() <= 1e-12 * scale);
        }
    }
}
