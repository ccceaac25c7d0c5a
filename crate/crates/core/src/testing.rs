//! The universal SPADE threshold test and the direct-imaging variance test.
//!
//! The SPADE test counts photons `N1` in the HG01+HG10 bucket out of `N`
//! detected and rejects H0 iff `N1 > N*`. The threshold depends only on the
//! crosstalk and the target type-I error, never on the (unknown) intensity
//! ratio or separation: it is either computed from the Gaussian
//! approximation of the H0 binomial ([`analytic_threshold`]) or taken as an
//! empirical percentile of H0 calibration counts ([`calibrated_threshold`]).

use std::f64::consts::{LN_2, SQRT_2};

use crate::crosstalk::CrosstalkMatrix;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scene::{Hypothesis, Order, SourceScene};
use crate::special;

/// Standard-normal upper-`alpha` quantile, `sqrt(2) erfinv(1 - 2 alpha)`.
pub fn k_alpha<T: Real>(alpha: T) -> Result<T> {
    let a = alpha.as_f64();
    if !(a > 0.0 && a <= 0.5) {
        return Err(Error::domain(format!("alpha = {a} must lie in (0, 1/2]")));
    }
    Ok(T::lit(SQRT_2 * special::erf_inv(1.0 - 2.0 * a)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdSource {
    Analytic,
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSpec<T> {
    alpha: T,
    n_star: u64,
    source: ThresholdSource,
}

impl<T: Real> TestSpec<T> {
    pub fn new(alpha: T, n_star: u64, source: ThresholdSource) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::domain(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        Ok(Self {
            alpha,
            n_star,
            source,
        })
    }

    /// Spec with the threshold of [`analytic_threshold`].
    pub fn analytic(n_total: u64, ct: &CrosstalkMatrix<T>, alpha: T) -> Result<Self> {
        Self::new(alpha, analytic_threshold(n_total, ct, alpha)?, ThresholdSource::Analytic)
    }

    /// Spec with the threshold of [`calibrated_threshold`].
    pub fn calibrated(calibration: &[u64], alpha: T) -> Result<Self> {
        Self::new(
            alpha,
            calibrated_threshold(calibration, alpha)?,
            ThresholdSource::Calibrated,
        )
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn n_star(&self) -> u64 {
        self.n_star
    }

    pub fn source(&self) -> ThresholdSource {
        self.source
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    H0,
    H1,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::H0 => "H0",
            Decision::H1 => "H1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestVerdict {
    pub decision: Decision,
    pub n1_observed: u64,
    pub n_star: u64,
}

/// Rejects H0 iff `n1 > n_star`.
pub fn decide<T: Real>(n1: u64, spec: &TestSpec<T>) -> TestVerdict {
    let decision = if n1 > spec.n_star {
        Decision::H1
    } else {
        Decision::H0
    };
    TestVerdict {
        decision,
        n1_observed: n1,
        n_star: spec.n_star,
    }
}

/// Unrounded threshold `N c10 + K(alpha) sqrt(N c10 c00)`.
pub fn analytic_threshold_raw<T: Real>(n_total: T, ct: &CrosstalkMatrix<T>, alpha: T) -> Result<T> {
    let k = k_alpha(alpha)?;
    Ok(n_total * ct.c10() + k * (n_total * ct.c10() * ct.c00()).sqrt())
}

/// Smallest integer threshold whose Gaussian-approximate type-I error is at
/// most `alpha`, i.e. the ceiling of [`analytic_threshold_raw`].
pub fn analytic_threshold<T: Real>(n_total: u64, ct: &CrosstalkMatrix<T>, alpha: T) -> Result<u64> {
    if n_total == 0 {
        return Err(Error::domain("threshold needs at least one detected photon"));
    }
    let raw = analytic_threshold_raw(T::lit(n_total as f64), ct, alpha)?;
    Ok(raw.ceil().as_f64().max(0.0) as u64)
}

/// Gaussian-approximate `P(N1 > threshold | H0)`.
pub fn gaussian_type_one<T: Real>(n_total: u64, ct: &CrosstalkMatrix<T>, threshold: f64) -> f64 {
    let n = n_total as f64;
    let mean = n * ct.c10().as_f64();
    let sd = (mean * ct.c00().as_f64()).sqrt();
    if sd == 0.0 {
        return if mean > threshold { 1.0 } else { 0.0 };
    }
    special::normal_sf((threshold - mean) / sd)
}

/// Smallest integer `t` with `#{counts > t} / len <= alpha`.
pub fn calibrated_threshold<T: Real>(counts: &[u64], alpha: T) -> Result<u64> {
    if counts.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let a = alpha.as_f64();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain(format!("alpha = {a} must lie in (0, 1)")));
    }
    let n = counts.len();
    // largest number of exceedances the type-I budget allows
    let allowed = (0..=n)
        .rev()
        .find(|&k| k as f64 / n as f64 <= a)
        .unwrap_or(0);
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    Ok(sorted[n - allowed - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BetaMethod {
    /// Gaussian approximation of the H1 binomial.
    Gaussian,
    /// Exact `P'(0|H1)^N`, used when the threshold is zero and there is no
    /// leakage into the first-order bucket.
    ExactZeroThreshold,
}

/// A type-II error probability together with its logarithm. `value`
/// underflows to zero deep in the tail; `ln_value` stays finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaValue<T> {
    pub value: T,
    pub ln_value: T,
    pub underflow: bool,
    pub method: BetaMethod,
}

impl<T: Real> BetaValue<T> {
    fn from_ln(ln_value: f64, method: BetaMethod) -> Self {
        let value = ln_value.exp();
        let as_t = T::lit(value);
        Self {
            value: as_t,
            ln_value: T::lit(ln_value),
            underflow: ln_value.is_finite() && as_t == T::zero(),
            method,
        }
    }
}

fn ln_half_erfc(z: f64) -> f64 {
    special::ln_erfc(z) - LN_2
}

/// `beta = P(N1 <= n_star | H1)` for `n_total` detected photons (possibly a
/// non-integer expectation) and an arbitrary threshold:
/// `(1/2) erfc((mu1 - n_star) / (sqrt 2 sigma1))` with `mu1 = N P'(1|H1)`
/// and `sigma1^2 = N P'(1|H1) P'(0|H1)` from the leading-order mode
/// probabilities. With `c10 = 0` and a zero threshold the exact
/// `P'(0|H1)^N` is returned instead.
pub fn spade_beta_with_threshold<T: Real>(
    n_total: T,
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
    n_star: T,
) -> Result<BetaValue<T>> {
    let n = n_total.as_f64();
    if !(n >= 0.0) {
        return Err(Error::domain(format!("photon number {n} must be >= 0")));
    }
    let mixed = ct.apply(&scene.spade_probabilities(Hypothesis::H1, Order::Leading)?);
    let q = mixed.p1().as_f64();
    let threshold = n_star.as_f64();
    if ct.c10() == T::zero() && threshold < 1.0 {
        return Ok(BetaValue::from_ln(n * (-q).ln_1p(), BetaMethod::ExactZeroThreshold));
    }
    let mean = n * q;
    let sd = (n * q * (1.0 - q)).sqrt();
    if sd == 0.0 {
        let ln = if mean <= threshold { 0.0 } else { f64::NEG_INFINITY };
        return Ok(BetaValue::from_ln(ln, BetaMethod::Gaussian));
    }
    let z = (mean - threshold) / (SQRT_2 * sd);
    Ok(BetaValue::from_ln(ln_half_erfc(z), BetaMethod::Gaussian))
}

/// Predicted type-II error of the SPADE test with the unrounded analytic
/// threshold, for `n_total >= 100` detected photons.
pub fn spade_beta_theory<T: Real>(
    n_total: u64,
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
    alpha: T,
) -> Result<BetaValue<T>> {
    if n_total < 100 {
        return Err(Error::regime(format!(
            "Gaussian error-rate theory needs N >= 100, got {n_total}"
        )));
    }
    let n = T::lit(n_total as f64);
    let n_star = analytic_threshold_raw(n, ct, alpha)?;
    spade_beta_with_threshold(n, scene, ct, n_star)
}

/// Exact type-II error without crosstalk: H0 is accepted only when no photon
/// reaches the first-order bucket, so `beta = P(0|H1)^N`. The bucket
/// probability is `eps d^2 / 4` (leading order, star-aligned), not the
/// `eps d^2` that drops the factor 4.
pub fn spade_beta_no_crosstalk<T: Real>(n_total: u64, scene: &SourceScene<T>) -> Result<BetaValue<T>> {
    let p = scene.spade_probabilities(Hypothesis::H1, Order::Leading)?;
    let ln = n_total as f64 * (-p.p1().as_f64()).ln_1p();
    Ok(BetaValue::from_ln(ln, BetaMethod::ExactZeroThreshold))
}

/// Acceptance threshold of the direct-imaging variance test:
/// reject H0 iff the mean squared position exceeds `1 + K(alpha) sqrt(2/N)`.
pub fn di_variance_threshold(n_total: u64, alpha: f64) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::domain("variance test needs at least one photon"));
    }
    Ok(1.0 + k_alpha(alpha)? * (2.0 / n_total as f64).sqrt())
}

/// Predicted type-II error of the direct-imaging variance test,
/// `(1/2) erfc((sqrt(N) eps d^2 - K sqrt 2) / (2 (1 - eps d^2)))`.
pub fn di_beta_theory<T: Real>(n_total: u64, scene: &SourceScene<T>, alpha: T) -> Result<BetaValue<T>> {
    let d = scene.separation().as_f64();
    let u = scene.epsilon().as_f64() * d * d;
    if u >= 1.0 {
        return Err(Error::regime(format!("eps*d_a^2 = {u} must be < 1")));
    }
    let k = k_alpha(alpha)?.as_f64();
    let z = ((n_total as f64).sqrt() * u - k * SQRT_2) / (2.0 * (1.0 - u));
    Ok(BetaValue::from_ln(ln_half_erfc(z), BetaMethod::Gaussian))
}

/// Crosstalk recovered from a measured threshold by inverting the analytic
/// threshold formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosstalkEstimate<T> {
    pub c10: T,
    /// Set when `n_star = 0`: any crosstalk below roughly `1/N` is consistent.
    pub degenerate: bool,
}

/// Solves `n_star = N C + K(alpha) sqrt(N C (1 - C))` for `C` in `[0, 1/2)`.
/// The right-hand side is increasing in `C`, so bisection is exact to
/// machine precision. Best-effort: the estimator's sampling properties are
/// not characterised.
pub fn invert_threshold<T: Real>(n_star: T, n_total: T, alpha: T) -> Result<CrosstalkEstimate<T>> {
    let target = n_star.as_f64();
    let n = n_total.as_f64();
    if !(n > 0.0) {
        return Err(Error::domain(format!("photon number {n} must be > 0")));
    }
    if !(target >= 0.0) {
        return Err(Error::domain(format!("threshold {target} must be >= 0")));
    }
    if target >= n / 2.0 {
        return Err(Error::NoRoot(format!(
            "threshold {target} is not below N/2 = {}",
            n / 2.0
        )));
    }
    if target == 0.0 {
        return Ok(CrosstalkEstimate {
            c10: T::zero(),
            degenerate: true,
        });
    }
    let k = k_alpha(alpha)?.as_f64();
    let f = |c: f64| n * c + k * (n * c * (1.0 - c)).sqrt() - target;
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    if f(hi) < 0.0 {
        return Err(Error::NoRoot(format!("threshold {target} unreachable with C <= 1/2")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CrosstalkEstimate {
        c10: T::lit(0.5 * (lo + hi)),
        degenerate: false,
    })
}

/// Empirical error rates with their binomial standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub alpha_hat: f64,
    pub alpha_stderr: f64,
    pub trials_h0: usize,
    pub beta_hat: f64,
    pub beta_stderr: f64,
    pub trials_h1: usize,
}

/// `sqrt(r (1 - r) / trials)`.
pub fn rate_stderr(rate: f64, trials: usize) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sym(c: f64) -> CrosstalkMatrix<f64> {
        CrosstalkMatrix::symmetric(c).unwrap()
    }

    fn on_axis(eps: f64, d: f64) -> SourceScene<f64> {
        SourceScene::on_axis(eps, d).unwrap()
    }

    #[test]
    fn k_alpha_examples() {
        assert_relative_eq!(k_alpha(0.05).unwrap(), 1.644_853_626_951_472_7, max_relative = 1e-12);
        assert!(k_alpha(0.5f64).unwrap().abs() < 1e-15);
        assert!((k_alpha(0.158_655f64).unwrap() - 1.0).abs() < 1e-4);
        assert!(k_alpha(0.0f64).is_err());
        assert!(k_alpha(0.6f64).is_err());
    }

    #[test]
    fn analytic_threshold_examples() {
        assert_relative_eq!(
            analytic_threshold_raw(1000.0, &sym(0.01), 0.05).unwrap(),
            15.175_411_113_674_41,
            max_relative = 1e-12
        );
        assert_eq!(analytic_threshold(1000, &sym(0.01), 0.05).unwrap(), 16);
        assert_eq!(analytic_threshold(1095, &sym(0.01), 0.05).unwrap(), 17);
        for n in [1, 10, 1000, 1_000_000] {
            assert_eq!(analytic_threshold(n, &CrosstalkMatrix::identity(), 0.01).unwrap(), 0);
        }
        assert!(analytic_threshold(0, &sym(0.01), 0.05).is_err());
    }

    #[test]
    fn calibrated_threshold_examples() {
        assert_eq!(calibrated_threshold(&[0u64; 100], 0.05).unwrap(), 0);
        let mut c = vec![0u64; 95];
        c.extend([1; 5]);
        assert_eq!(calibrated_threshold(&c, 0.05).unwrap(), 0);
        let mut c = vec![0u64; 94];
        c.extend([1; 6]);
        assert_eq!(calibrated_threshold(&c, 0.05).unwrap(), 1);
        assert_eq!(calibrated_threshold::<f64>(&[], 0.05), Err(Error::EmptyBatch));
    }

    #[test]
    fn decide_examples() {
        let spec = TestSpec::new(0.05, 16, ThresholdSource::Analytic).unwrap();
        assert_eq!(decide(16, &spec).decision, Decision::H0);
        assert_eq!(decide(17, &spec).decision, Decision::H1);
        let zero = TestSpec::new(0.05, 0, ThresholdSource::Analytic).unwrap();
        assert_eq!(decide(0, &zero).decision, Decision::H0);
        assert!(TestSpec::new(1.0, 0, ThresholdSource::Analytic).is_err());
    }

    #[test]
    fn beta_without_planet_is_acceptance_rate() {
        let b = spade_beta_theory(1000, &on_axis(0.0, 0.33), &sym(0.01), 0.05).unwrap();
        assert_relative_eq!(b.value, 0.95, max_relative = 1e-12);
    }

    #[test]
    fn beta_at_the_experiment_point() {
        // 30-digit evaluation of the same Gaussian expression
        let b = spade_beta_theory(1000, &on_axis(0.042, 0.33), &sym(0.01), 0.05).unwrap();
        assert_relative_eq!(b.value, 0.889_287_710_742_131, max_relative = 1e-9);
        assert_eq!(b.method, BetaMethod::Gaussian);
        assert!(spade_beta_theory(99, &on_axis(0.042, 0.33), &sym(0.01), 0.05).is_err());
    }

    #[test]
    fn beta_zero_crosstalk_is_exact() {
        let s = on_axis(0.042, 0.33);
        let b = spade_beta_theory(1000, &s, &CrosstalkMatrix::identity(), 0.05).unwrap();
        let exact = spade_beta_no_crosstalk(1000, &s).unwrap();
        assert_eq!(b.method, BetaMethod::ExactZeroThreshold);
        assert_relative_eq!(b.value, exact.value, max_relative = 1e-14);
    }

    #[test]
    fn no_crosstalk_examples() {
        let s = on_axis(0.042, 0.33);
        assert_relative_eq!(spade_beta_no_crosstalk(1000, &s).unwrap().value, 0.318_509_098_479_209_7, max_relative = 1e-12);
        assert_eq!(spade_beta_no_crosstalk(0, &s).unwrap().value, 1.0);
        assert_eq!(spade_beta_no_crosstalk(1000, &on_axis(0.0, 0.33)).unwrap().value, 1.0);
    }

    #[test]
    fn di_examples() {
        let s = on_axis(0.042, 0.33);
        assert_relative_eq!(di_beta_theory(1_000_000, &s, 0.05).unwrap().value, 0.055_175_892_393_082_79, max_relative = 1e-9);
        let zero = di_beta_theory(0, &on_axis(0.001, 0.1), 0.05).unwrap().value;
        assert!((zero - 0.95).abs() < 1e-4);
        assert!(di_beta_theory(100, &on_axis(0.49, 1.5), 0.05).is_err());
    }

    #[test]
    fn deep_tail_underflow_is_flagged() {
        let b = spade_beta_theory(1_000_000_000, &on_axis(0.042, 0.33), &sym(0.05), 0.05).unwrap();
        assert!(b.underflow);
        assert_eq!(b.value, 0.0);
        assert!(b.ln_value.is_finite() && b.ln_value < -745.0);
    }

    #[test]
    fn spade_exponent_converges_to_crosstalk_entropy() {
        // At C = 0.05 the large-N Gaussian exponent sits within 2% of the
        // closed-form entropy, so the ratio must climb monotonically to it.
        use crate::information::spade_relative_entropy_approx;
        let s = on_axis(0.042, 0.33);
        let ct = sym(0.05);
        let d = spade_relative_entropy_approx(&s, &ct).unwrap();
        let ratios: Vec<f64> = [1e6, 1e7, 1e8, 1e9]
            .iter()
            .map(|&n: &f64| -spade_beta_theory(n as u64, &s, &ct, 0.05).unwrap().ln_value / n / d)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
        assert!((ratios[3] - 1.0).abs() < 0.10, "{ratios:?}");
    }

    #[test]
    fn di_exponent_converges_to_di_entropy() {
        use crate::information::di_relative_entropy;
        let s = on_axis(0.042, 0.33);
        let d = di_relative_entropy(&s).unwrap();
        let ratios: Vec<f64> = [1e8, 1e9, 1e10]
            .iter()
            .map(|&n: &f64| -di_beta_theory(n as u64, &s, 0.05).unwrap().ln_value / n / d)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
        assert!((ratios[2] - 1.0).abs() < 0.10, "{ratios:?}");
    }

    #[test]
    fn crossover_brackets_threshold() {
        let s = on_axis(0.042, 0.33);
        let di = di_beta_theory(1_000_000, &s, 0.05).unwrap().value;
        let low = spade_beta_theory(1_000_000, &s, &sym(0.05), 0.05).unwrap().value;
        let high = spade_beta_theory(1_000_000, &s, &sym(0.15), 0.05).unwrap().value;
        assert!(low < di && di < high);
    }

    #[test]
    fn invert_threshold_examples() {
        let est = invert_threshold(15.18f64, 1000.0, 0.05).unwrap();
        assert!((est.c10 - 0.01).abs() < 1e-3);
        assert!(!est.degenerate);
        let raw = analytic_threshold_raw(1000.0, &sym(0.0123), 0.05).unwrap();
        assert_relative_eq!(invert_threshold(raw, 1000.0, 0.05).unwrap().c10, 0.0123, max_relative = 1e-12);
        let zero = invert_threshold(0.0, 1000.0, 0.05).unwrap();
        assert_eq!(zero.c10, 0.0);
        assert!(zero.degenerate);
        assert!(matches!(invert_threshold(500.0, 1000.0, 0.05), Err(Error::NoRoot(_))));
    }

    #[test]
    fn stderr_formula() {
        assert_relative_eq!(rate_stderr(0.5, 100), 0.05, max_relative = 1e-15);
        assert_eq!(rate_stderr(0.0, 10), 0.0);
    }

    proptest! {
        #[test]
        fn analytic_threshold_is_tight(c in 1e-4..0.5f64, n in 100u64..2_000_000, alpha in 0.001..0.3f64) {
            let ct = sym(c);
            let t = analytic_threshold(n, &ct, alpha).unwrap();
            prop_assert!(gaussian_type_one(n, &ct, t as f64) <= alpha * (1.0 + 1e-9));
            if t >= 1 {
                prop_assert!(gaussian_type_one(n, &ct, t as f64 - 1.0) > alpha);
            }
        }

        #[test]
        fn beta_monotone(
            n in 100u64..100_000, dn in 1u64..10_000,
            eps in 0.001..0.3f64, de in 0.0..0.1f64,
            d in 0.01..0.5f64, dd in 0.0..0.3f64,
            c in 0.001..0.3f64,
        ) {
            let ct = sym(c);
            let b = |n: u64, e: f64, x: f64| spade_beta_theory(n, &on_axis(e, x), &ct, 0.05).unwrap().value;
            let base = b(n, eps, d);
            prop_assert!(b(n + dn, eps, d) <= base + 1e-12);
            prop_assert!(b(n, (eps + de).min(0.49), d) <= base + 1e-12);
            prop_assert!(b(n, eps, d + dd) <= base + 1e-12);
        }

        #[test]
        fn threshold_ignores_scene(c in 0.001..0.4f64, n in 100u64..100_000) {
            // the threshold signature takes no scene; evaluating betas for
            // different scenes reuses one N* unchanged
            let ct = sym(c);
            let t1 = analytic_threshold(n, &ct, 0.05).unwrap();
            let _ = spade_beta_theory(n, &on_axis(0.1, 0.2), &ct, 0.05).unwrap();
            let t2 = analytic_threshold(n, &ct, 0.05).unwrap();
            prop_assert_eq!(t1, t2);
        }
    }
}
