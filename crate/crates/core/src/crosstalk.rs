//! Demultiplexer crosstalk as incoherent mixing of the two outcome buckets.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::scene::OutcomeDistribution;

/// Column-stochastic 2x2 matrix; `c_jk` is the probability that a photon
/// belonging to bucket `k` is registered in bucket `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosstalkMatrix<T> {
    c00: T,
    c01: T,
    c10: T,
    c11: T,
}

impl<T: Real> CrosstalkMatrix<T> {
    pub fn new(c00: T, c01: T, c10: T, c11: T) -> Result<Self> {
        for (name, v) in [("c00", c00), ("c01", c01), ("c10", c10), ("c11", c11)] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::domain(format!("{name} = {v} is not a probability")));
            }
        }
        let tol = T::simplex_tolerance();
        if (c00 + c10 - T::one()).abs() > tol || (c01 + c11 - T::one()).abs() > tol {
            return Err(Error::domain("crosstalk matrix columns must sum to 1"));
        }
        Ok(Self { c00, c01, c10, c11 })
    }

    /// Matrix from its two leakage probabilities: `c10` (HG00 photon seen in
    /// the first-order bucket) and `c01` (the reverse).
    pub fn from_leakage(c10: T, c01: T) -> Result<Self> {
        Self::new(T::one() - c10, c01, c10, T::one() - c01)
    }

    /// Balanced crosstalk `c10 = c01 = c`.
    pub fn symmetric(c: T) -> Result<Self> {
        if !(c >= T::zero() && c <= T::lit(0.5)) {
            return Err(Error::domain(format!("symmetric crosstalk must lie in [0, 1/2], got {c}")));
        }
        Self::from_leakage(c, c)
    }

    pub fn identity() -> Self {
        Self {
            c00: T::one(),
            c01: T::zero(),
            c10: T::zero(),
            c11: T::one(),
        }
    }

    pub fn c00(&self) -> T {
        self.c00
    }

    pub fn c01(&self) -> T {
        self.c01
    }

    pub fn c10(&self) -> T {
        self.c10
    }

    pub fn c11(&self) -> T {
        self.c11
    }

    /// `c11 - c10`: the contrast that survives mixing.
    pub fn contrast(&self) -> T {
        self.c11 - self.c10
    }

    /// True when a leakage exceeds 1/2. Such matrices are valid but can be
    /// relabelled into an equivalent one with smaller leakage.
    pub fn exceeds_noise_bound(&self) -> bool {
        let half = T::lit(0.5);
        self.c10 > half || self.c01 > half
    }

    pub fn apply(&self, p: &OutcomeDistribution<T>) -> OutcomeDistribution<T> {
        let q0 = self.c00 * p.p0() + self.c01 * p.p1();
        let q1 = self.c10 * p.p0() + self.c11 * p.p1();
        OutcomeDistribution::from_parts_unchecked(q0, q1)
    }

    /// Matrix product `self * other`: first `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            c00: self.c00 * other.c00 + self.c01 * other.c10,
            c01: self.c00 * other.c01 + self.c01 * other.c11,
            c10: self.c10 * other.c00 + self.c11 * other.c10,
            c11: self.c10 * other.c01 + self.c11 * other.c11,
        }
    }
}

impl<T: Real> Default for CrosstalkMatrix<T> {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dist(p1: f64) -> OutcomeDistribution<f64> {
        OutcomeDistribution::from_p1(p1).unwrap()
    }

    #[test]
    fn identity_is_transparent() {
        let p = dist(0.3);
        assert_eq!(CrosstalkMatrix::identity().apply(&p), p);
        assert_eq!(CrosstalkMatrix::symmetric(0.0).unwrap(), CrosstalkMatrix::identity());
    }

    #[test]
    fn purely_noisy_measurement() {
        let m = CrosstalkMatrix::symmetric(0.5).unwrap();
        let q = m.apply(&OutcomeDistribution::fundamental());
        assert_eq!((q.p0(), q.p1()), (0.5, 0.5));
        for v in [m.c00(), m.c01(), m.c10(), m.c11()] {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn symmetric_one_percent() {
        let m = CrosstalkMatrix::symmetric(0.01).unwrap();
        assert_eq!((m.c00(), m.c01(), m.c10(), m.c11()), (0.99, 0.01, 0.01, 0.99));
        let q = m.apply(&OutcomeDistribution::fundamental());
        assert_relative_eq!(q.p0(), 0.99, max_relative = 1e-15);
        assert_relative_eq!(q.p1(), 0.01, max_relative = 1e-15);
    }

    #[test]
    fn symmetric_domain() {
        assert!(CrosstalkMatrix::<f64>::symmetric(-0.01).is_err());
        assert!(CrosstalkMatrix::<f64>::symmetric(0.51).is_err());
        assert!(CrosstalkMatrix::<f64>::symmetric(f64::NAN).is_err());
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(CrosstalkMatrix::new(0.9, 0.1, 0.2, 0.9).is_err());
        assert!(CrosstalkMatrix::new(1.1, 0.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn large_leakage_is_flagged_not_rejected() {
        let m = CrosstalkMatrix::from_leakage(0.05, 0.8).unwrap();
        assert!(m.exceeds_noise_bound());
        assert!(!CrosstalkMatrix::symmetric(0.5).unwrap().exceeds_noise_bound());
    }

    proptest! {
        #[test]
        fn apply_preserves_probability(c10 in 0.0..=1.0f64, c01 in 0.0..=1.0f64, p1 in 0.0..=1.0f64) {
            let m = CrosstalkMatrix::from_leakage(c10, c01).unwrap();
            let q = m.apply(&dist(p1));
            prop_assert!((q.p0() + q.p1() - 1.0).abs() <= 1e-12);
            prop_assert!(OutcomeDistribution::new(q.p0(), q.p1()).is_ok());
        }

        #[test]
        fn composition_matches_sequential_application(
            a10 in 0.0..=1.0f64, a01 in 0.0..=1.0f64,
            b10 in 0.0..=1.0f64, b01 in 0.0..=1.0f64,
            p1 in 0.0..=1.0f64,
        ) {
            let a = CrosstalkMatrix::from_leakage(a10, a01).unwrap();
            let b = CrosstalkMatrix::from_leakage(b10, b01).unwrap();
            let p = dist(p1);
            let seq = a.apply(&b.apply(&p));
            let ab = a.compose(&b);
            let once = ab.apply(&p);
            prop_assert!((seq.p0() - once.p0()).abs() <= 1e-12);
            prop_assert!((seq.p1() - once.p1()).abs() <= 1e-12);
            prop_assert!(CrosstalkMatrix::new(ab.c00(), ab.c01(), ab.c10(), ab.c11()).is_ok());
        }
    }
}
