//! One-versus-two point-source geometry and SPADE mode probabilities.
//!
//! All lengths are in units of the (Gaussian) PSF width. A scene fixes the
//! intensity ratio `epsilon` of the faint source, its separation vector
//! `(d_x, d_y)` from the bright one, which quantity is held fixed between the
//! hypotheses ([`Formulation`]) and where the demultiplexer axis sits
//! ([`Alignment`]). Moments are computed exactly from the point-source
//! mixture in the demultiplexer frame.

use crate::error::{Error, Result};
use crate::real::Real;

/// Which position is shared by the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Formulation {
    /// H0 has a single source at the star position; under H1 the star stays
    /// there and the planet sits at `d`.
    #[default]
    StarFixed,
    /// H0 has a single source at the centre of brightness; under H1 the pair
    /// is placed so that its centre of brightness is unchanged.
    CentroidFixed,
}

/// Where the demultiplexer is centred, always relative to the H1 geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Alignment {
    #[default]
    Star,
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Single source.
    H0,
    /// Source pair.
    H1,
}

/// Truncation of the small-separation expansion of the mode probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Order {
    /// `p1 = M2/4`.
    #[default]
    Leading,
    /// `p1 = M2/4 - M4/16`.
    WithM4,
}

/// Weighted point source, position in PSF-width units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource<T> {
    pub weight: T,
    pub x: T,
    pub y: T,
}

impl<T: Real> PointSource<T> {
    pub fn new(weight: T, x: T, y: T) -> Self {
        Self { weight, x, y }
    }

    fn r2(&self) -> T {
        self.x * self.x + self.y * self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceScene<T> {
    epsilon: T,
    d_x: T,
    d_y: T,
    formulation: Formulation,
    alignment: Alignment,
}

impl<T: Real> SourceScene<T> {
    pub fn new(
        epsilon: T,
        d_x: T,
        d_y: T,
        formulation: Formulation,
        alignment: Alignment,
    ) -> Result<Self> {
        if !(epsilon >= T::zero() && epsilon < T::lit(0.5)) {
            return Err(Error::domain(format!(
                "intensity ratio must lie in [0, 1/2), got {epsilon}"
            )));
        }
        if !d_x.is_finite() || !d_y.is_finite() {
            return Err(Error::domain("separation must be finite"));
        }
        Ok(Self {
            epsilon,
            d_x,
            d_y,
            formulation,
            alignment,
        })
    }

    /// Separation along x, star-fixed formulation, demultiplexer on the star:
    /// the configuration of the tabletop experiment.
    pub fn on_axis(epsilon: T, d_a: T) -> Result<Self> {
        if d_a < T::zero() {
            return Err(Error::domain(format!("separation must be >= 0, got {d_a}")));
        }
        Self::new(epsilon, d_a, T::zero(), Formulation::StarFixed, Alignment::Star)
    }

    pub fn with_geometry(self, formulation: Formulation, alignment: Alignment) -> Self {
        Self {
            formulation,
            alignment,
            ..self
        }
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn d_x(&self) -> T {
        self.d_x
    }

    pub fn d_y(&self) -> T {
        self.d_y
    }

    /// Normalised separation `d_a = sqrt(d_x^2 + d_y^2)`.
    pub fn separation(&self) -> T {
        self.d_x.hypot(self.d_y)
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn alignment(&self) -> Alignment {
        self.alignment
    }

    /// Point sources of hypothesis `h` in the lab frame (H0 source at the origin).
    fn lab_sources(&self, h: Hypothesis) -> Vec<PointSource<T>> {
        let one = T::one();
        let eps = self.epsilon;
        match (h, self.formulation) {
            (Hypothesis::H0, _) => vec![PointSource::new(one, T::zero(), T::zero())],
            (Hypothesis::H1, Formulation::StarFixed) => vec![
                PointSource::new(one - eps, T::zero(), T::zero()),
                PointSource::new(eps, self.d_x, self.d_y),
            ],
            (Hypothesis::H1, Formulation::CentroidFixed) => vec![
                PointSource::new(one - eps, -eps * self.d_x, -eps * self.d_y),
                PointSource::new(eps, (one - eps) * self.d_x, (one - eps) * self.d_y),
            ],
        }
    }

    /// Lab-frame position of the demultiplexer axis.
    fn demux_origin(&self) -> (T, T) {
        let eps = self.epsilon;
        match (self.formulation, self.alignment) {
            (Formulation::StarFixed, Alignment::Star) => (T::zero(), T::zero()),
            (Formulation::StarFixed, Alignment::Centroid) => (eps * self.d_x, eps * self.d_y),
            (Formulation::CentroidFixed, Alignment::Star) => (-eps * self.d_x, -eps * self.d_y),
            (Formulation::CentroidFixed, Alignment::Centroid) => (T::zero(), T::zero()),
        }
    }

    /// Point sources of hypothesis `h` in the demultiplexer frame.
    pub fn point_sources(&self, h: Hypothesis) -> Vec<PointSource<T>> {
        let (ox, oy) = self.demux_origin();
        self.lab_sources(h)
            .into_iter()
            .map(|s| PointSource::new(s.weight, s.x - ox, s.y - oy))
            .collect()
    }

    /// Second radial moment of the source distribution about the demultiplexer axis.
    pub fn second_moment(&self, h: Hypothesis) -> T {
        self.point_sources(h)
            .iter()
            .fold(T::zero(), |acc, s| acc + s.weight * s.r2())
    }

    /// Fourth radial moment about the demultiplexer axis.
    pub fn fourth_moment(&self, h: Hypothesis) -> T {
        self.point_sources(h).iter().fold(T::zero(), |acc, s| {
            let r2 = s.r2();
            acc + s.weight * r2 * r2
        })
    }

    pub fn moments(&self) -> Moments<T> {
        Moments {
            m2_h0: self.second_moment(Hypothesis::H0),
            m2_h1: self.second_moment(Hypothesis::H1),
            m4_h0: self.fourth_moment(Hypothesis::H0),
            m4_h1: self.fourth_moment(Hypothesis::H1),
        }
    }

    /// Probabilities that a detected photon lands in HG00 or in HG01+HG10.
    pub fn spade_probabilities(&self, h: Hypothesis, order: Order) -> Result<OutcomeDistribution<T>> {
        let quarter = T::lit(0.25);
        let p1 = match order {
            Order::Leading => self.second_moment(h) * quarter,
            Order::WithM4 => {
                self.second_moment(h) * quarter - self.fourth_moment(h) / T::lit(16.0)
            }
        };
        if !(p1 >= T::zero() && p1 <= T::one()) {
            return Err(Error::OutOfExpansionRange { p1: p1.as_f64() });
        }
        Ok(OutcomeDistribution {
            p0: T::one() - p1,
            p1,
        })
    }
}

/// Second and fourth moments of both hypotheses in the demultiplexer frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub m2_h0: T,
    pub m2_h1: T,
    pub m4_h0: T,
    pub m4_h1: T,
}

impl<T: Real> Moments<T> {
    /// `M2{1} - M2{0}`, the quantity that drives every SPADE entropy.
    pub fn second_moment_gap(&self) -> T {
        self.m2_h1 - self.m2_h0
    }
}

/// Bernoulli distribution over {HG00, HG01+HG10}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution<T> {
    p0: T,
    p1: T,
}

impl<T: Real> OutcomeDistribution<T> {
    pub fn new(p0: T, p1: T) -> Result<Self> {
        let unit = |p: T| p >= T::zero() && p <= T::one();
        if !unit(p0) || !unit(p1) || (p0 + p1 - T::one()).abs() > T::simplex_tolerance() {
            return Err(Error::domain(format!(
                "({p0}, {p1}) is not a probability distribution"
            )));
        }
        Ok(Self { p0, p1 })
    }

    /// Distribution with `P(HG01+HG10) = p1`.
    pub fn from_p1(p1: T) -> Result<Self> {
        Self::new(T::one() - p1, p1)
    }

    /// All photons in HG00.
    pub fn fundamental() -> Self {
        Self {
            p0: T::one(),
            p1: T::zero(),
        }
    }

    pub fn p0(&self) -> T {
        self.p0
    }

    pub fn p1(&self) -> T {
        self.p1
    }

    pub(crate) fn from_parts_unchecked(p0: T, p1: T) -> Self {
        Self { p0, p1 }
    }
}

const FACTORIAL: [f64; 3] = [1.0, 1.0, 2.0];

/// Element `<n,n'| rho |m,m'>` of the single-photon density matrix in the 2D
/// Hermite-Gauss basis, for a normalised mixture of point sources.
///
/// For point sources the source-plane integral collapses to the weighted sum
/// of `exp(-(x^2+y^2)/4) (x/2)^(n+m) (y/2)^(n'+m') / sqrt(n! m! n'! m'!)`.
pub fn gamma_coefficient<T: Real>(
    sources: &[PointSource<T>],
    n: usize,
    n_prime: usize,
    m: usize,
    m_prime: usize,
) -> Result<T> {
    if let Some(&index) = [n, n_prime, m, m_prime].iter().find(|&&i| i > 2) {
        return Err(Error::IndexOutOfRange { index });
    }
    let total = sources.iter().fold(T::zero(), |acc, s| acc + s.weight);
    if (total - T::one()).abs() > T::simplex_tolerance().sqrt() {
        return Err(Error::domain(format!("source weights sum to {total}, expected 1")));
    }
    let norm = T::lit(
        (FACTORIAL[n] * FACTORIAL[m] * FACTORIAL[n_prime] * FACTORIAL[m_prime]).sqrt(),
    );
    let half = T::lit(0.5);
    let value = sources.iter().fold(T::zero(), |acc, s| {
        let envelope = (-s.r2() * T::lit(0.25)).exp();
        let gx = (s.x * half).powi((n + m) as i32);
        let gy = (s.y * half).powi((n_prime + m_prime) as i32);
        acc + s.weight * envelope * gx * gy
    });
    Ok(value / norm)
}
