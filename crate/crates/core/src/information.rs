//! Relative entropies (nats per detected photon) and SPADE-vs-direct-imaging
//! figures of merit.
//!
//! Closed forms are small-parameter results; each one guards its regime and
//! returns [`Error::OutOfRegime`] outside it:
//!
//! | quantity | form | guard |
//! |---|---|---|
//! | quantum bound | `eps d^2 / 4` | `eps d^2 < 0.1` |
//! | direct imaging | `eps^2 d^4 / 4` | `eps d^2 < 0.1` |
//! | SPADE with crosstalk | `eps^2 d^4 (c11-c10)^2 / (32 c10 (1-c10))` | `eps d^2 < c10` |

use crate::crosstalk::CrosstalkMatrix;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scene::{Hypothesis, Order, OutcomeDistribution, SourceScene};

const BOUND_REGIME: f64 = 0.1;

fn variance_parameter<T: Real>(scene: &SourceScene<T>) -> T {
    let d = scene.separation();
    scene.epsilon() * d * d
}

fn check_bound_regime<T: Real>(scene: &SourceScene<T>) -> Result<T> {
    let u = variance_parameter(scene);
    if u >= T::lit(BOUND_REGIME) {
        return Err(Error::regime(format!(
            "eps*d_a^2 = {u} is not small (limit {BOUND_REGIME})"
        )));
    }
    Ok(u)
}

fn check_crosstalk_regime<T: Real>(scene: &SourceScene<T>, ct: &CrosstalkMatrix<T>) -> Result<T> {
    let c10 = ct.c10();
    if c10 <= T::zero() || c10 >= T::one() {
        return Err(Error::domain(format!("c10 = {c10} must lie strictly inside (0, 1)")));
    }
    let u = variance_parameter(scene);
    if u >= c10 {
        return Err(Error::regime(format!(
            "eps*d_a^2 = {u} is not below the crosstalk c10 = {c10}"
        )));
    }
    Ok(u)
}

/// Quantum relative entropy between the one- and two-source states.
pub fn quantum_relative_entropy<T: Real>(scene: &SourceScene<T>) -> Result<T> {
    Ok(check_bound_regime(scene)? * T::lit(0.25))
}

/// Relative entropy of ideal direct imaging (centre-of-brightness-fixed
/// hypotheses); quartic in the separation.
pub fn di_relative_entropy<T: Real>(scene: &SourceScene<T>) -> Result<T> {
    let u = check_bound_regime(scene)?;
    Ok(u * u * T::lit(0.25))
}

/// `(1+h) ln(1+h) - h`, i.e. `r ln r - r + 1` at `r = 1 + h`; nonnegative.
fn entropy_kernel<T: Real>(h: T) -> T {
    if h.abs() < T::lit(1e-3) {
        // sum_{k>=2} (-1)^k h^k / (k (k-1))
        let mut term = h * h;
        let mut acc = T::zero();
        for k in 2..9 {
            let kf = T::lit(k as f64);
            let sign = if k % 2 == 0 { T::one() } else { -T::one() };
            acc = acc + sign * term / (kf * (kf - T::one()));
            term = term * h;
        }
        acc
    } else if h == -T::one() {
        T::one()
    } else {
        (T::one() + h) * h.ln_1p() - h
    }
}

/// `D(p || q)` for two-bucket distributions, written as
/// `sum_i q_i phi(p_i / q_i)` with `phi(r) = r ln r - r + 1 >= 0` so the
/// result is nonnegative and exactly zero only for `p == q`.
pub fn bernoulli_relative_entropy<T: Real>(
    p: &OutcomeDistribution<T>,
    q: &OutcomeDistribution<T>,
) -> Result<T> {
    let pairs = [(p.p0(), q.p0()), (p.p1(), q.p1())];
    let mut total = T::zero();
    for (outcome, &(pi, qi)) in pairs.iter().enumerate() {
        if qi <= T::zero() {
            if pi > T::zero() {
                return Err(Error::InfiniteDivergence { outcome });
            }
            continue;
        }
        total = total + qi * entropy_kernel((pi - qi) / qi);
    }
    Ok(total)
}

/// Exact Bernoulli relative entropy between the crosstalk-mixed leading-order
/// SPADE distributions of the two hypotheses.
pub fn spade_relative_entropy_exact<T: Real>(
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
) -> Result<T> {
    let p = ct.apply(&scene.spade_probabilities(Hypothesis::H0, Order::Leading)?);
    let q = ct.apply(&scene.spade_probabilities(Hypothesis::H1, Order::Leading)?);
    bernoulli_relative_entropy(&p, &q)
}

fn crosstalk_exponent<T: Real>(gap: T, ct: &CrosstalkMatrix<T>, effective_c00: T) -> T {
    let contrast = ct.contrast();
    gap * gap * contrast * contrast / (T::lit(32.0) * ct.c10() * effective_c00)
}

/// Small-signal SPADE relative entropy under crosstalk, in the star-aligned
/// form `eps^2 d^4 (c11-c10)^2 / (32 c10 (1-c10))`.
pub fn spade_relative_entropy_approx<T: Real>(
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
) -> Result<T> {
    let u = check_crosstalk_regime(scene, ct)?;
    Ok(crosstalk_exponent(u, ct, ct.c00()))
}

/// Crosstalk-free SPADE entropy to first order in the moments,
/// `(M2{1} - M2{0}) / 4`, for any formulation and alignment.
pub fn first_order_entropy<T: Real>(scene: &SourceScene<T>) -> T {
    scene.moments().second_moment_gap() * T::lit(0.25)
}

/// Same exponent with the scene's actual second-moment gap
/// `M2{1} - M2{0}` in place of `eps d^2`, which covers every formulation and
/// alignment.
pub fn moment_relative_entropy<T: Real>(
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
) -> Result<T> {
    check_crosstalk_regime(scene, ct)?;
    let gap = scene.moments().second_moment_gap();
    Ok(crosstalk_exponent(gap, ct, ct.c00()))
}

/// Exponent at a fixed integration window, including vacuum outcomes.
/// `eta` is the per-window detection probability; `eta = 1` recovers
/// [`spade_relative_entropy_approx`] exactly.
pub fn vacuum_corrected_spade_entropy<T: Real>(
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
    eta: T,
) -> Result<T> {
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(Error::domain(format!("detection probability eta = {eta} outside [0, 1]")));
    }
    let u = check_crosstalk_regime(scene, ct)?;
    let widened = ct.c00() + ct.c10() * (T::one() - eta);
    Ok(crosstalk_exponent(u, ct, widened))
}

fn check_c10<T: Real>(ct: &CrosstalkMatrix<T>) -> Result<()> {
    let c10 = ct.c10();
    if c10 <= T::zero() || c10 >= T::one() {
        return Err(Error::domain(format!("c10 = {c10} must lie strictly inside (0, 1)")));
    }
    Ok(())
}

/// `D_SD / D_DI = (c11-c10)^2 / (8 c10 (1-c10))`; independent of the scene.
pub fn advantage_ratio<T: Real>(ct: &CrosstalkMatrix<T>) -> Result<T> {
    check_c10(ct)?;
    let contrast = ct.contrast();
    Ok(contrast * contrast / (T::lit(8.0) * ct.c10() * ct.c00()))
}

/// Balanced crosstalk at which SPADE and direct imaging tie: `(3 - sqrt 6) / 6`.
pub fn crosstalk_threshold<T: Real>() -> T {
    (T::lit(3.0) - T::lit(6.0).sqrt()) / T::lit(6.0)
}

/// Fraction of direct-imaging photons SPADE needs for the same asymptotic
/// type-II error: the reciprocal of [`advantage_ratio`].
pub fn photon_budget_ratio<T: Real>(ct: &CrosstalkMatrix<T>) -> Result<T> {
    let contrast = ct.contrast();
    if contrast == T::zero() {
        return Err(Error::domain("c11 == c10: the measurement carries no information"));
    }
    Ok(T::lit(8.0) * ct.c10() * ct.c00() / (contrast * contrast))
}

/// The `c01` at which the advantage ratio equals one for a given `c10`, or
/// `None` when no `c01 >= 0` reaches parity (the ratio is below one even with
/// `c01 = 0`).
pub fn parity_c01<T: Real>(c10: T) -> Option<T> {
    if !(c10 > T::zero() && c10 < T::one()) {
        return None;
    }
    // (1 - c01 - c10)^2 = 8 c10 (1 - c10), taking the root with c11 > c10
    let c01 = T::one() - c10 - (T::lit(8.0) * c10 * (T::one() - c10)).sqrt();
    (c01 >= T::zero()).then_some(c01)
}

/// All entropy figures for one scene and crosstalk setting. Closed forms
/// outside their regime are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport<T> {
    pub d_quantum: Option<T>,
    pub d_direct_imaging: Option<T>,
    pub d_spade_exact: T,
    pub d_spade_approx: Option<T>,
    pub advantage_ratio: Option<T>,
}

pub fn entropy_report<T: Real>(
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
) -> Result<EntropyReport<T>> {
    Ok(EntropyReport {
        d_quantum: quantum_relative_entropy(scene).ok(),
        d_direct_imaging: di_relative_entropy(scene).ok(),
        d_spade_exact: spade_relative_entropy_exact(scene, ct)?,
        d_spade_approx: spade_relative_entropy_approx(scene, ct).ok(),
        advantage_ratio: advantage_ratio(ct).ok(),
    })
}
