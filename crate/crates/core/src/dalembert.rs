//! Free-wave (homogeneous) solution of the Cauchy problem for `u_tt - u_xx = 0`:
//!
//! ```text
//! v(x, t) = (phi(x + t) + phi(x - t)) / 2 + (1/2) * integral_{x-t}^{x+t} psi(y) dy
//! ```

use thiserror::Error;

use crate::expr::{EvalError, Expression};
pub use crate::quadrature::QuadratureSpec;
use crate::quadrature::{self, QuadratureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DalembertError {
    #[error("time must be non-negative and finite, got {0}")]
    InvalidTime(f64),
    #[error("expression error: {0}")]
    Eval(#[from] EvalError),
    #[error("quadrature did not converge on [{a}, {b}] within depth {max_depth} (estimate {estimate:e})")]
    Quadrature {
        a: f64,
        b: f64,
        max_depth: u32,
        estimate: f64,
    },
    #[error("invalid integration interval [{a}, {b}]")]
    Interval { a: f64, b: f64 },
    #[error("|{which}({x})| = {value} exceeds the declared bound sup_{which} = {bound}")]
    BoundViolated {
        which: &'static str,
        x: f64,
        value: f64,
        bound: f64,
    },
    #[error("sup-norm bounds for phi and psi are required")]
    MissingBounds,
    #[error("sup bound for {which} must be non-negative and finite, got {value}")]
    InvalidBound { which: &'static str, value: f64 },
}

impl From<QuadratureError<DalembertError>> for DalembertError {
    fn from(err: QuadratureError<DalembertError>) -> Self {
        match err {
            QuadratureError::NotConverged {
                a,
                b,
                max_depth,
                estimate,
            } => DalembertError::Quadrature {
                a,
                b,
                max_depth,
                estimate,
            },
            QuadratureError::InvalidInterval { a, b } => DalembertError::Interval { a, b },
            QuadratureError::Integrand(inner) => inner,
        }
    }
}

/// Initial displacement `phi`, initial velocity `psi`, and optional sup-norm bounds.
///
/// When a bound is supplied, every evaluation of the corresponding function is
/// checked against it and a violation is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    phi: Expression,
    psi: Expression,
    sup_phi: Option<f64>,
    sup_psi: Option<f64>,
}

impl InitialData {
    pub fn new(phi: Expression, psi: Expression) -> Self {
        Self {
            phi,
            psi,
            sup_phi: None,
            sup_psi: None,
        }
    }

    pub fn with_bounds(mut self, sup_phi: f64, sup_psi: f64) -> Result<Self, DalembertError> {
        self.sup_phi = Some(check_bound("phi", sup_phi)?);
        self.sup_psi = Some(check_bound("psi", sup_psi)?);
        Ok(self)
    }

    pub fn with_sup_phi(mut self, bound: Option<f64>) -> Result<Self, DalembertError> {
        self.sup_phi = bound.map(|b| check_bound("phi", b)).transpose()?;
        Ok(self)
    }

    pub fn with_sup_psi(mut self, bound: Option<f64>) -> Result<Self, DalembertError> {
        self.sup_psi = bound.map(|b| check_bound("psi", b)).transpose()?;
        Ok(self)
    }

    pub fn phi(&self) -> &Expression {
        &self.phi
    }

    pub fn psi(&self) -> &Expression {
        &self.psi
    }

    pub fn sup_phi(&self) -> Option<f64> {
        self.sup_phi
    }

    pub fn sup_psi(&self) -> Option<f64> {
        self.sup_psi
    }

    fn eval_checked(
        &self,
        which: &'static str,
        expr: &Expression,
        bound: Option<f64>,
        x: f64,
    ) -> Result<f64, DalembertError> {
        let value = expr.evaluate(x)?;
        match bound {
            Some(bound) if value.abs() > bound => Err(DalembertError::BoundViolated {
                which,
                x,
                value: value.abs(),
                bound,
            }),
            _ => Ok(value),
        }
    }

    pub fn phi_at(&self, x: f64) -> Result<f64, DalembertError> {
        self.eval_checked("phi", &self.phi, self.sup_phi, x)
    }

    pub fn psi_at(&self, x: f64) -> Result<f64, DalembertError> {
        self.eval_checked("psi", &self.psi, self.sup_psi, x)
    }

    /// `v(x, t)`, with the `psi` integral computed to `q.tol()`.
    pub fn homogeneous_solution(
        &self,
        q: &QuadratureSpec,
        x: f64,
        t: f64,
    ) -> Result<f64, DalembertError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(DalembertError::InvalidTime(t));
        }
        let travelling = 0.5 * (self.phi_at(x + t)? + self.phi_at(x - t)?);
        if t == 0.0 {
            return Ok(travelling);
        }
        let integral = if self.psi.is_constant() {
            // exact, and still checks the bound once
            self.psi_at(x)? * 2.0 * t
        } else {
            quadrature::integrate(|y| self.psi_at(y), x - t, x + t, q)?
        };
        Ok(travelling + 0.5 * integral)
    }

    /// `sup_phi + t * sup_psi`, an upper bound on `sup_x |v(x, t)|`.
    pub fn sup_bound_v(&self, t: f64) -> Result<f64, DalembertError> {
        match (self.sup_phi, self.sup_psi) {
            (Some(sp), Some(ss)) => Ok(sp + t * ss),
            _ => Err(DalembertError::MissingBounds),
        }
    }
}

fn check_bound(which: &'static str, value: f64) -> Result<f64, DalembertError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(DalembertError::InvalidBound { which, value })
    }
}

/// Integral of an expression over `[a, b]`. Constant expressions are integrated exactly.
pub fn integrate(
    f: &Expression,
    a: f64,
    b: f64,
    q: &QuadratureSpec,
) -> Result<f64, DalembertError> {
    if f.is_constant() {
        if !(a.is_finite() && b.is_finite()) || a > b {
            return Err(DalembertError::Interval { a, b });
        }
        return Ok(f.evaluate(a)? * (b - a));
    }
    Ok(quadrature::integrate(
        |y| f.evaluate(y).map_err(DalembertError::from),
        a,
        b,
        q,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn data(phi: &str, psi: &str) -> InitialData {
        InitialData::new(
            Expression::parse(phi).unwrap(),
            Expression::parse(psi).unwrap(),
        )
    }

    fn expr(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    #[test]
    fn cosine_standing_wave() {
        let d = data("cos(x)", "0");
        let v = d
            .homogeneous_solution(&QuadratureSpec::default(), 0.0, PI / 3.0)
            .unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_velocity_gives_t() {
        let d = data("0", "1");
        let v = d
            .homogeneous_solution(&QuadratureSpec::default(), 5.0, 0.7)
            .unwrap();
        assert!((v - 0.7).abs() < 1e-15);
    }

    #[test]
    fn scaled_cosine_against_quadrature() {
        let d = data("0.4*cos(x)", "0");
        let q = QuadratureSpec::default();
        let v = d.homogeneous_solution(&q, 0.0, 0.5).unwrap();
        assert!((v - 0.4 * 0.5f64.cos()).abs() < 1e-15);
        // same value with phi moved into psi: v = (1/2) int_{-t}^{t} 0.4 cos = 0.4 sin t
        let d2 = data("0", "0.4*cos(x)");
        let v2 = d2.homogeneous_solution(&q, 0.0, 0.5).unwrap();
        assert!((v2 - 0.4 * 0.5f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn integrate_examples() {
        let q = QuadratureSpec::default();
        assert_eq!(integrate(&expr("1"), 0.0, 2.0, &q).unwrap(), 2.0);
        assert!((integrate(&expr("cos(x)"), 0.0, FRAC_PI_2, &q).unwrap() - 1.0).abs() < 1e-10);
        let e1 = std::f64::consts::E - 1.0;
        assert!((integrate(&expr("exp(x)"), 0.0, 1.0, &q).unwrap() - e1).abs() < 1e-10);
    }

    #[test]
    fn integrate_reports_non_convergence() {
        let q = QuadratureSpec::new(1e-14, 2).unwrap();
        let r = integrate(&expr("sin(1/(x+0.001))"), 0.0, 1.0, &q);
        assert!(matches!(
            r,
            Err(DalembertError::Quadrature { max_depth: 2, .. })
        ));
    }

    #[test]
    fn domain_errors_propagate() {
        let d = data("sqrt(x)", "0");
        let r = d.homogeneous_solution(&QuadratureSpec::default(), 0.0, 1.0);
        assert!(matches!(r, Err(DalembertError::Eval(_))));
    }

    #[test]
    fn negative_time_rejected() {
        let d = data("0", "0");
        assert!(matches!(
            d.homogeneous_solution(&QuadratureSpec::default(), 0.0, -1.0),
            Err(DalembertError::InvalidTime(_))
        ));
    }

    #[test]
    fn sup_bound_examples() {
        let d = data("0", "0").with_bounds(0.4, 0.0).unwrap();
        assert_eq!(d.sup_bound_v(1.0).unwrap(), 0.4);
        let d = data("0", "0").with_bounds(0.0, 1.0).unwrap();
        assert_eq!(d.sup_bound_v(0.7).unwrap(), 0.7);
        let d = data("0", "0").with_bounds(0.1, 0.2).unwrap();
        assert!((d.sup_bound_v(0.5).unwrap() - 0.2).abs() < 1e-16);
        assert_eq!(
            data("0", "0").sup_bound_v(1.0),
            Err(DalembertError::MissingBounds)
        );
        assert!(data("0", "0").with_bounds(-0.1, 0.0).is_err());
    }

    #[test]
    fn violated_bound_is_an_error() {
        let d = data("2*cos(x)", "0").with_bounds(1.0, 0.0).unwrap();
        let r = d.homogeneous_solution(&QuadratureSpec::default(), 0.0, 0.1);
        assert!(matches!(
            r,
            Err(DalembertError::BoundViolated { which: "phi", .. })
        ));
        let d = data("0", "x").with_bounds(0.0, 1.0).unwrap();
        let r = d.homogeneous_solution(&QuadratureSpec::default(), 0.0, 2.0);
        assert!(matches!(
            r,
            Err(DalembertError::BoundViolated { which: "psi", .. })
        ));
    }

    #[test]
    fn standing_waves_on_a_grid() {
        let q = QuadratureSpec::default();
        for k in [1.0, 2.0, 3.5] {
            let d = data(&format!("cos({k}*x)"), "0");
            for i in 0..20 {
                for j in 0..20 {
                    let x = -3.0 + 0.3 * i as f64;
                    let t = 0.1 * j as f64;
                    let v = d.homogeneous_solution(&q, x, t).unwrap();
                    assert!((v - (k * x).cos() * (k * t).cos()).abs() < 1e-8);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn initial_time_returns_phi(x in -10.0f64..10.0) {
            let d = data("0.3*sin(x) + exp(-x^2)", "cos(x)");
            let v = d.homogeneous_solution(&QuadratureSpec::default(), x, 0.0).unwrap();
            prop_assert!((v - d.phi_at(x).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn linear_in_the_data(alpha in -3.0f64..3.0, x in -2.0f64..2.0, t in 0.0f64..2.0) {
            let q = QuadratureSpec::default();
            let base = data("exp(-x^2)", "sin(x)*x");
            let scaled = data(
                &format!("({alpha:?})*exp(-x^2)"),
                &format!("({alpha:?})*(sin(x)*x)"),
            );
            let v = base.homogeneous_solution(&q, x, t).unwrap();
            let w = scaled.homogeneous_solution(&q, x, t).unwrap();
            prop_assert!((w - alpha * v).abs() <= 4.0 * q.tol() * alpha.abs().max(1.0));
        }
    }
}
