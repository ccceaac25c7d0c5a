//! Asymmetric hypothesis testing for faint-companion detection with
//! spatial-mode demultiplexing (SPADE).
//!
//! The crate models a bright source (the "star") that may or may not have a
//! faint companion (the "planet") at a sub-diffraction separation. A
//! demultiplexer sorts photons into the fundamental Hermite-Gauss mode HG00
//! and the first-order bucket HG01+HG10; a universal threshold test on the
//! bucket count decides between H0 (no companion) and H1.
//!
//! Modules, bottom-up:
//!
//! - [`scene`]: source geometry, intensity moments and mode-projection probabilities.
//! - [`crosstalk`]: the 2x2 column-stochastic demultiplexer mixing.
//! - [`information`]: relative entropies (quantum bound, direct imaging, SPADE).
//! - [`testing`]: thresholds, decisions and closed-form error rates.
//! - [`simulate`]: seeded Monte Carlo for photon counts and direct imaging.
//! - [`special`]: error-function helpers.
//!
//! The analytic modules are generic over the scalar type through [`Real`];
//! the aliases below fix it to `f64`, which is what the CLI and the
//! simulator use.

pub mod crosstalk;
pub mod error;
pub mod information;
pub mod real;
pub mod scene;
pub mod simulate;
pub mod special;
pub mod testing;

pub use crosstalk::CrosstalkMatrix;
pub use error::{Error, Result};
pub use real::Real;
pub use scene::{Alignment, Formulation, Hypothesis, Order, OutcomeDistribution, SourceScene};

/// Source scene in double precision.
pub type Scene = scene::SourceScene<f64>;
/// Crosstalk matrix in double precision.
pub type Crosstalk = crosstalk::CrosstalkMatrix<f64>;
/// Two-bucket outcome distribution in double precision.
pub type Outcome = scene::OutcomeDistribution<f64>;
/// Intensity moments in double precision.
pub type MomentSet = scene::Moments<f64>;
/// Point source in double precision.
pub type Source = scene::PointSource<f64>;
/// Threshold test in double precision.
pub type Spec = testing::TestSpec<f64>;
/// Entropy report in double precision.
pub type Entropies = information::EntropyReport<f64>;

/// Single-precision aliases, for callers that want to trade accuracy for
/// memory in large sweeps.
pub mod single {
    pub type Scene = crate::scene::SourceScene<f32>;
    pub type Crosstalk = crate::crosstalk::CrosstalkMatrix<f32>;
    pub type Outcome = crate::scene::OutcomeDistribution<f32>;
}
