//! Offspring law `p`, reweighting `b_k = a_k / p_k`, and the existence horizon `T*`.
//!
//! A law is admissible for a series `F(u) = sum a_k u^k` when
//!
//! 1. `p` is a probability distribution,
//! 2. `p_k > 0` wherever `a_k != 0`,
//! 3. the mean offspring `sum k p_k` is at most one,
//!
//! and additionally `p_0 > 0`, since leaves carry `w = v / p_0`.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::dalembert::{DalembertError, InitialData};
use crate::series::PowerSeries;

/// Slack for the normalization and criticality checks.
pub const PROBABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BranchingError {
    #[error("p_{k} = {p} is negative")]
    NegativeProbability { k: usize, p: f64 },
    #[error("p_{k} is not a finite number")]
    NonFinite { k: usize },
    #[error("probabilities sum to {sum}, not 1 (condition (i))")]
    NotNormalized { sum: f64 },
    #[error("a_{k} = {a} is non-zero but p_{k} = 0 (condition (ii))")]
    UncoveredCoefficient { k: usize, a: f64 },
    #[error("mean offspring {mean} exceeds 1 (condition (iii))")]
    Supercritical { mean: f64 },
    #[error("p_0 must be positive so that w = v / p_0 is defined")]
    ZeroLeafProbability,
    #[error("scan step fraction must lie in (0, 1] and the unbounded cap must be positive")]
    InvalidScan,
    #[error(transparent)]
    Data(#[from] DalembertError),
}

/// Time grid used by [`BranchingLaw::t_star`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    /// Grid step as a fraction of the horizon cap.
    pub step_fraction: f64,
    /// Cap used when `b* = 0` and the `sqrt(2 / b*)` bound is vacuous.
    pub unbounded_cap: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            step_fraction: 1e-3,
            unbounded_cap: 10.0,
        }
    }
}

impl ScanSpec {
    fn validate(&self) -> Result<(), BranchingError> {
        let ok = self.step_fraction > 0.0
            && self.step_fraction <= 1.0
            && self.unbounded_cap > 0.0
            && self.unbounded_cap.is_finite();
        if ok {
            Ok(())
        } else {
            Err(BranchingError::InvalidScan)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingLaw {
    probabilities: BTreeMap<usize, f64>,
    weights: BTreeMap<usize, f64>,
    mean_offspring: f64,
    b_star: f64,
    // (k, P(kappa <= k)) over k with p_k > 0, ascending
    cumulative: Vec<(usize, f64)>,
}

impl BranchingLaw {
    /// The dyadic default law.
    ///
    /// With `k_1 < ... < k_m` the non-zero orders `k >= 1` of `series`, sets
    /// `p_{k_j} = 2^-(j+1) / k_j` and gives the remainder to `p_0`. The mean
    /// offspring is then at most `1/2` and `p_0 >= 1/2`.
    pub fn build_default(series: &PowerSeries) -> Self {
        let mut probabilities = BTreeMap::new();
        let mut branching_mass = 0.0;
        for (j, k) in series.support().into_iter().filter(|k| *k >= 1).enumerate() {
            let pk = 0.5f64.powi(j as i32 + 2) / k as f64;
            branching_mass += pk;
            probabilities.insert(k, pk);
        }
        probabilities.insert(0, 1.0 - branching_mass);
        Self::assemble(probabilities, series)
    }

    /// Validates a user-supplied law against `series`.
    pub fn from_custom(
        probabilities: BTreeMap<usize, f64>,
        series: &PowerSeries,
    ) -> Result<Self, BranchingError> {
        for (&k, &p) in &probabilities {
            if !p.is_finite() {
                return Err(BranchingError::NonFinite { k });
            }
            if p < 0.0 {
                return Err(BranchingError::NegativeProbability { k, p });
            }
        }
        let sum: f64 = probabilities.values().sum();
        if (sum - 1.0).abs() > PROBABILITY_SLACK {
            return Err(BranchingError::NotNormalized { sum });
        }
        if probabilities.get(&0).copied().unwrap_or(0.0) <= 0.0 {
            return Err(BranchingError::ZeroLeafProbability);
        }
        for k in series.support() {
            if probabilities.get(&k).copied().unwrap_or(0.0) <= 0.0 {
                return Err(BranchingError::UncoveredCoefficient {
                    k,
                    a: series.coefficient(k),
                });
            }
        }
        let mean: f64 = probabilities.iter().map(|(k, p)| *k as f64 * p).sum();
        if mean > 1.0 + PROBABILITY_SLACK {
            return Err(BranchingError::Supercritical { mean });
        }
        Ok(Self::assemble(probabilities, series))
    }

    fn assemble(probabilities: BTreeMap<usize, f64>, series: &PowerSeries) -> Self {
        let weights: BTreeMap<usize, f64> = probabilities
            .iter()
            .map(|(&k, &p)| {
                let b = if p > 0.0 {
                    series.coefficient(k) / p
                } else {
                    0.0
                };
                (k, b)
            })
            .collect();
        let mean_offspring = probabilities.iter().map(|(k, p)| *k as f64 * p).sum();
        let b_star = weights
            .iter()
            .filter(|(k, _)| **k >= 1)
            .map(|(_, b)| b.abs())
            .fold(0.0, f64::max);
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (&k, &p) in &probabilities {
            if p > 0.0 {
                acc += p;
                cumulative.push((k, acc));
            }
        }
        Self {
            probabilities,
            weights,
            mean_offspring,
            b_star,
            cumulative,
        }
    }

    pub fn probabilities(&self) -> &BTreeMap<usize, f64> {
        &self.probabilities
    }

    pub fn weights(&self) -> &BTreeMap<usize, f64> {
        &self.weights
    }

    pub fn p(&self, k: usize) -> f64 {
        self.probabilities.get(&k).copied().unwrap_or(0.0)
    }

    pub fn p0(&self) -> f64 {
        self.p(0)
    }

    /// `b_k`; zero outside the support of `p`.
    pub fn b(&self, k: usize) -> f64 {
        self.weights.get(&k).copied().unwrap_or(0.0)
    }

    pub fn mean_offspring(&self) -> f64 {
        self.mean_offspring
    }

    /// `sup_{k >= 1} |b_k|`, zero when no `k >= 1` carries weight.
    ///
    /// `b_0` is excluded: it enters the horizon condition through the leaf
    /// factor instead.
    pub fn b_star(&self) -> f64 {
        self.b_star
    }

    /// Inverse-CDF offspring count for a uniform draw `u` in `[0, 1)`.
    pub fn offspring_for_uniform(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .find(|(_, c)| u < *c)
            .or(self.cumulative.last())
            .map(|(k, _)| *k)
            .unwrap_or(0)
    }

    pub fn sample_offspring<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.offspring_for_uniform(rng.random::<f64>())
    }

    /// Upper end of the horizon scan: `sqrt(2 / b*)`, or `scan.unbounded_cap` when `b* = 0`.
    pub fn horizon_cap(&self, scan: &ScanSpec) -> f64 {
        if self.b_star > 0.0 {
            (2.0 / self.b_star).sqrt()
        } else {
            scan.unbounded_cap
        }
    }

    /// Existence horizon `T*`.
    ///
    /// Scans `s = 0, h, 2h, ..., cap` (with `h = step_fraction * cap`) and returns
    /// the last grid time up to which every scanned `s` satisfies
    /// `sup|v(., s)| / p_0 + s^2 |b_0| / 2 <= 1`, with the sup taken from the
    /// declared bounds of `data`. Returns 0 when the condition already fails at `s = 0`.
    pub fn t_star(&self, data: &InitialData, scan: &ScanSpec) -> Result<f64, BranchingError> {
        scan.validate()?;
        let p0 = self.p0();
        let b0 = self.b(0).abs();
        let cap = self.horizon_cap(scan);
        let steps = (1.0 / scan.step_fraction).round().max(1.0) as usize;
        let mut last_ok = None;
        for i in 0..=steps {
            let s = if i == steps {
                cap
            } else {
                cap * i as f64 / steps as f64
            };
            let bound = data.sup_bound_v(s)? / p0 + 0.5 * s * s * b0;
            if bound <= 1.0 {
                last_ok = Some(s);
            } else {
                break;
            }
        }
        Ok(last_ok.unwrap_or(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use proptest::prelude::*;

    fn poly(a: &[f64]) -> PowerSeries {
        PowerSeries::polynomial(a.to_vec()).unwrap()
    }

    fn pmap(entries: &[(usize, f64)]) -> BTreeMap<usize, f64> {
        entries.iter().copied().collect()
    }

    fn cos_data(sup_phi: f64, sup_psi: f64) -> InitialData {
        InitialData::new(
            Expression::parse("0.4*cos(x)").unwrap(),
            Expression::parse("0").unwrap(),
        )
        .with_bounds(sup_phi, sup_psi)
        .unwrap()
    }

    fn assert_admissible(law: &BranchingLaw, s: &PowerSeries) {
        let sum: f64 = law.probabilities().values().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(law.probabilities().values().all(|p| *p >= 0.0));
        for k in s.support() {
            assert!(law.p(k) > 0.0);
        }
        assert!(law.mean_offspring() <= 1.0 + 1e-12);
        assert!(law.p0() > 0.0);
        for (&k, &p) in law.probabilities() {
            if p > 0.0 {
                assert!(
                    (p * law.b(k) - s.coefficient(k)).abs()
                        <= 1e-15 * s.coefficient(k).abs().max(1.0)
                );
            } else {
                assert_eq!(law.b(k), 0.0);
            }
        }
    }

    #[test]
    fn default_law_for_negation() {
        let s = poly(&[0.0, -1.0]);
        let law = BranchingLaw::build_default(&s);
        assert_eq!(law.p(1), 0.25);
        assert_eq!(law.p0(), 0.75);
        assert_eq!(law.b(1), -4.0);
        assert_eq!(law.b_star(), 4.0);
        assert_admissible(&law, &s);
    }

    #[test]
    fn default_law_for_square() {
        let s = poly(&[0.0, 0.0, 1.0]);
        let law = BranchingLaw::build_default(&s);
        assert_eq!(law.p(2), 0.125);
        assert_eq!(law.p0(), 0.875);
        assert_eq!(law.b(2), 8.0);
        assert_eq!(law.b_star(), 8.0);
    }

    #[test]
    fn default_law_for_constant() {
        let s = poly(&[0.3]);
        let law = BranchingLaw::build_default(&s);
        assert_eq!(law.p0(), 1.0);
        assert_eq!(law.b(0), 0.3);
        assert_eq!(law.b_star(), 0.0);
        assert_eq!(law.mean_offspring(), 0.0);
    }

    #[test]
    fn default_law_for_many_terms() {
        let s = PowerSeries::from_named("exp", 1.0, 12).unwrap();
        let law = BranchingLaw::build_default(&s);
        assert_admissible(&law, &s);
        assert!(law.p0() >= 0.5);
        assert!(law.mean_offspring() <= 0.5);
    }

    #[test]
    fn default_law_ignores_magnitudes() {
        let a = BranchingLaw::build_default(&poly(&[0.0, 3.0, 0.0, -7.0]));
        let b = BranchingLaw::build_default(&poly(&[0.0, -0.1, 0.0, 2.0]));
        assert_eq!(a.probabilities(), b.probabilities());
    }

    #[test]
    fn custom_law_for_negation() {
        let s = poly(&[0.0, -1.0]);
        let law = BranchingLaw::from_custom(pmap(&[(0, 0.5), (1, 0.5)]), &s).unwrap();
        assert_eq!(law.b(1), -2.0);
        assert_eq!(law.b_star(), 2.0);
        assert_eq!(law.mean_offspring(), 0.5);
        assert_admissible(&law, &s);
    }

    #[test]
    fn custom_law_rejections() {
        let cube = poly(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            BranchingLaw::from_custom(pmap(&[(1, 1.0)]), &cube),
            Err(BranchingError::ZeroLeafProbability)
        );
        assert!(matches!(
            BranchingLaw::from_custom(pmap(&[(0, 0.5), (2, 0.5)]), &cube),
            Err(BranchingError::UncoveredCoefficient { k: 3, .. })
        ));
        assert!(matches!(
            BranchingLaw::from_custom(pmap(&[(0, 0.5), (3, 0.6), (1, -0.1)]), &cube),
            Err(BranchingError::NegativeProbability { k: 1, .. })
        ));
        assert!(matches!(
            BranchingLaw::from_custom(pmap(&[(0, 0.5), (3, 0.4)]), &cube),
            Err(BranchingError::NotNormalized { .. })
        ));
        assert!(matches!(
            BranchingLaw::from_custom(pmap(&[(0, 0.5), (3, 0.5)]), &cube),
            Err(BranchingError::Supercritical { .. })
        ));
    }

    #[test]
    fn b_star_over_several_orders() {
        let s = poly(&[0.0, 0.0, 2.0, -3.0]);
        let law = BranchingLaw::from_custom(pmap(&[(0, 0.7), (2, 0.2), (3, 0.1)]), &s).unwrap();
        assert!((law.b(2) - 10.0).abs() < 1e-14);
        assert!((law.b(3) + 30.0).abs() < 1e-13);
        assert_eq!(law.b_star(), law.b(3).abs());
    }

    #[test]
    fn inverse_cdf_table() {
        let s = poly(&[0.0, -1.0]);
        let law = BranchingLaw::from_custom(pmap(&[(0, 0.5), (1, 0.5)]), &s).unwrap();
        assert_eq!(law.offspring_for_uniform(0.999), 1);
        assert_eq!(law.offspring_for_uniform(0.0), 0);
        assert_eq!(law.offspring_for_uniform(0.4999), 0);
        assert_eq!(law.offspring_for_uniform(0.5), 1);
        let only_leaf = BranchingLaw::build_default(&poly(&[0.0]));
        assert_eq!(only_leaf.offspring_for_uniform(0.999_999), 0);
    }

    #[test]
    fn t_star_examples() {
        let s = poly(&[0.0, -1.0]);
        let scan = ScanSpec::default();
        let custom = BranchingLaw::from_custom(pmap(&[(0, 0.5), (1, 0.5)]), &s).unwrap();
        assert_eq!(custom.t_star(&cos_data(0.4, 0.0), &scan).unwrap(), 1.0);

        let default = BranchingLaw::build_default(&s);
        let t = default.t_star(&cos_data(0.4, 0.0), &scan).unwrap();
        assert!((t - 0.5f64.sqrt()).abs() < 1e-15);

        let big = cos_data(5.0, 0.0);
        assert_eq!(custom.t_star(&big, &scan).unwrap(), 0.0);
    }

    #[test]
    fn t_star_limited_by_data_growth() {
        // sup|w| = (0.2 + 0.5 s) / 0.5 <= 1  <=>  s <= 0.6
        let s = poly(&[0.0, -1.0]);
        let law = BranchingLaw::from_custom(pmap(&[(0, 0.5), (1, 0.5)]), &s).unwrap();
        let t = law
            .t_star(&cos_data(0.2, 0.5), &ScanSpec::default())
            .unwrap();
        assert!((t - 0.6).abs() <= 1e-3 + 1e-12);
        assert!(t <= 0.6 + 1e-12);
    }

    #[test]
    fn t_star_with_constant_source() {
        // p0 = 1, b0 = 2, sup v = 0: s^2 <= 1, capped by unbounded_cap
        let law = BranchingLaw::build_default(&poly(&[2.0]));
        let data = cos_data(0.0, 0.0);
        let scan = ScanSpec {
            step_fraction: 1e-3,
            unbounded_cap: 4.0,
        };
        let t = law.t_star(&data, &scan).unwrap();
        assert!(t <= 1.0 && t > 1.0 - 4e-3);
    }

    #[test]
    fn t_star_needs_bounds() {
        let law = BranchingLaw::build_default(&poly(&[0.0, -1.0]));
        let data = InitialData::new(Expression::constant(0.0), Expression::constant(0.0));
        assert!(matches!(
            law.t_star(&data, &ScanSpec::default()),
            Err(BranchingError::Data(DalembertError::MissingBounds))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_through_custom(coeffs in prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], 1..7)) {
            let s = poly(&coeffs);
            let law = BranchingLaw::build_default(&s);
            assert_admissible(&law, &s);
            let again = BranchingLaw::from_custom(law.probabilities().clone(), &s).unwrap();
            prop_assert_eq!(again.weights(), law.weights());
        }

        #[test]
        fn t_star_is_antitone_in_the_data(
            phi_a in 0.0f64..1.0, phi_extra in 0.0f64..0.5,
            psi_a in 0.0f64..1.0, psi_extra in 0.0f64..0.5,
        ) {
            let s = poly(&[0.1, -1.0, 0.5]);
            let law = BranchingLaw::build_default(&s);
            let scan = ScanSpec::default();
            let small = law.t_star(&cos_data(phi_a, psi_a), &scan).unwrap();
            let large = law.t_star(&cos_data(phi_a + phi_extra, psi_a + psi_extra), &scan).unwrap();
            prop_assert!(large <= small);
        }
    }
}
