//! Seeded Monte Carlo for photon counts and direct-imaging variances.
//!
//! Every repetition owns a ChaCha8 substream: the key is derived from the
//! user seed plus a purpose tag, the stream index is the repetition index.
//! Results are therefore a pure function of (seed, config) however rayon
//! schedules the work.
//!
//! Binomial draws are exact (inversion for small means, BTPE above); the
//! point of the simulator is to check the Gaussian theory, so it never
//! samples from a Gaussian approximation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::crosstalk::CrosstalkMatrix;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scene::{Alignment, Formulation, Hypothesis, Order, SourceScene};
use crate::testing::{
    self, decide, rate_stderr, Decision, ErrorRates, TestSpec, ThresholdSource,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Simulated { seed: u64 },
    Ingested { source: String },
}

/// Per-repetition photon counts, simulated or measured.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialBatch {
    counts_n1: Vec<u64>,
    counts_total: Option<Vec<u64>>,
    provenance: Provenance,
}

impl TrialBatch {
    pub fn new(counts_n1: Vec<u64>, counts_total: Option<Vec<u64>>, provenance: Provenance) -> Result<Self> {
        if let Some(totals) = &counts_total {
            if totals.len() != counts_n1.len() {
                return Err(Error::domain(format!(
                    "{} bucket counts but {} totals",
                    counts_n1.len(),
                    totals.len()
                )));
            }
            if let Some(i) = counts_n1.iter().zip(totals).position(|(n1, t)| n1 > t) {
                return Err(Error::domain(format!(
                    "repetition {i}: n1 = {} exceeds total {}",
                    counts_n1[i], totals[i]
                )));
            }
        }
        Ok(Self {
            counts_n1,
            counts_total,
            provenance,
        })
    }

    pub fn counts_n1(&self) -> &[u64] {
        &self.counts_n1
    }

    pub fn counts_total(&self) -> Option<&[u64]> {
        self.counts_total.as_deref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        match self.provenance {
            Provenance::Simulated { seed } => Some(seed),
            Provenance::Ingested { .. } => None,
        }
    }

    pub fn len(&self) -> usize {
        self.counts_n1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts_n1.is_empty()
    }

    pub fn calibrated_threshold(&self, alpha: f64) -> Result<u64> {
        testing::calibrated_threshold(&self.counts_n1, alpha)
    }

    /// Repetitions whose total equals `n`, as a fixed-photon-number batch.
    pub fn condition_on_total(&self, n: u64) -> Option<Vec<u64>> {
        let totals = self.counts_total.as_ref()?;
        Some(
            self.counts_n1
                .iter()
                .zip(totals)
                .filter(|(_, &t)| t == n)
                .map(|(&n1, _)| n1)
                .collect(),
        )
    }
}

/// Detection with vacuum outcomes: `n_windows` temporal modes, each holding
/// at most one photon, detected with probability `eta = I tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedWindowConfig {
    intensity_rate: f64,
    window: f64,
    mode_time: f64,
}

impl FixedWindowConfig {
    pub fn new(intensity_rate: f64, window: f64, mode_time: f64) -> Result<Self> {
        if !(mode_time > 0.0 && mode_time.is_finite()) {
            return Err(Error::domain(format!("mode time must be positive, got {mode_time}")));
        }
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::domain(format!("window must be positive, got {window}")));
        }
        let cfg = Self {
            intensity_rate,
            window,
            mode_time,
        };
        let eta = cfg.eta();
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::domain(format!("per-window detection probability {eta} not in (0, 1]")));
        }
        let ratio = window / mode_time;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::domain(format!(
                "window / mode time = {ratio} must be a positive integer"
            )));
        }
        Ok(cfg)
    }

    /// Config in units where the mode time is 1.
    pub fn from_eta(eta: f64, n_windows: u64) -> Result<Self> {
        Self::new(eta, n_windows as f64, 1.0)
    }

    pub fn intensity_rate(&self) -> f64 {
        self.intensity_rate
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn mode_time(&self) -> f64 {
        self.mode_time
    }

    pub fn eta(&self) -> f64 {
        self.intensity_rate * self.mode_time
    }

    pub fn n_windows(&self) -> u64 {
        (self.window / self.mode_time).round() as u64
    }

    /// Expected detected photons, `n_windows * eta`.
    pub fn expected_photons(&self) -> f64 {
        self.n_windows() as f64 * self.eta()
    }

    /// Same windows with the intensity multiplied by `factor`.
    pub fn scaled_intensity(&self, factor: f64) -> Result<Self> {
        Self::new(self.intensity_rate * factor, self.window, self.mode_time)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of tags into a new 64-bit key.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

const TAG_FIXED_N: u64 = 1;
const TAG_FIXED_WINDOW: u64 = 2;
const TAG_DIRECT_IMAGING: u64 = 3;
const TAG_CALIBRATION: u64 = 10;
const TAG_VALIDATION: u64 = 11;
const TAG_GRID: u64 = 12;

fn hypothesis_tag(h: Hypothesis) -> u64 {
    match h {
        Hypothesis::H0 => 0,
        Hypothesis::H1 => 1,
    }
}

fn rep_rng(key: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(rep as u64);
    rng
}

fn binomial<R: Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("validated probability").sample(rng)
}

fn bucket_probability<T: Real>(
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
    h: Hypothesis,
) -> Result<f64> {
    let p = scene.spade_probabilities(h, Order::Leading)?;
    Ok(ct.apply(&p).p1().as_f64().clamp(0.0, 1.0))
}

/// `N1 ~ Binomial(n_total, P'(1|h))` per repetition, with the leading-order
/// mode probabilities mixed by the crosstalk.
pub fn simulate_fixed_n<T: Real>(
    n_total: u64,
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
    hypothesis: Hypothesis,
    repetitions: usize,
    seed: u64,
) -> Result<TrialBatch> {
    let q = bucket_probability(scene, ct, hypothesis)?;
    let key = derive_seed(seed, &[TAG_FIXED_N, hypothesis_tag(hypothesis)]);
    let counts = (0..repetitions)
        .into_par_iter()
        .map(|rep| binomial(n_total, q, &mut rep_rng(key, rep)))
        .collect();
    TrialBatch::new(counts, None, Provenance::Simulated { seed })
}

/// Trinomial over the windows with probabilities
/// `(1 - eta, eta P'(0|h), eta P'(1|h))`, drawn as the detected total
/// followed by the bucket split.
pub fn simulate_fixed_window<T: Real>(
    cfg: &FixedWindowConfig,
    scene: &SourceScene<T>,
    ct: &CrosstalkMatrix<T>,
    hypothesis: Hypothesis,
    repetitions: usize,
    seed: u64,
) -> Result<TrialBatch> {
    let q = bucket_probability(scene, ct, hypothesis)?;
    let (windows, eta) = (cfg.n_windows(), cfg.eta());
    let key = derive_seed(seed, &[TAG_FIXED_WINDOW, hypothesis_tag(hypothesis)]);
    let (n1, totals): (Vec<u64>, Vec<u64>) = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(key, rep);
            let total = binomial(windows, eta, &mut rng);
            (binomial(total, q, &mut rng), total)
        })
        .unzip();
    TrialBatch::new(n1, Some(totals), Provenance::Simulated { seed })
}

/// Mean squared photon position `sum x^2 / N` per repetition along the
/// separation axis, in units of the PSF width.
///
/// Positions are drawn in the centroid frame whatever the scene's
/// formulation: under H1 a photon comes from the star at `-eps d` with
/// probability `1 - eps` and from the planet at `(1 - eps) d` otherwise;
/// under H0 every photon is centred at 0. The per-source sums are drawn as
/// noncentral chi-squares, which is exact and independent of `N`.
pub fn simulate_direct_imaging<T: Real>(
    n_total: u64,
    scene: &SourceScene<T>,
    hypothesis: Hypothesis,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_total == 0 {
        return Err(Error::domain("direct imaging needs at least one photon"));
    }
    let eps = match hypothesis {
        Hypothesis::H0 => 0.0,
        Hypothesis::H1 => scene.epsilon().as_f64(),
    };
    let d = scene.separation().as_f64();
    let (star_mu, planet_mu) = (-eps * d, (1.0 - eps) * d);
    let key = derive_seed(seed, &[TAG_DIRECT_IMAGING, hypothesis_tag(hypothesis)]);
    Ok((0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(key, rep);
            let k = binomial(n_total, eps, &mut rng);
            let sum = sum_of_squares(n_total - k, star_mu, &mut rng)
                + sum_of_squares(k, planet_mu, &mut rng);
            sum / n_total as f64
        })
        .collect())
}

/// `sum_{i<n} (mu + Z_i)^2` as `chi2(n - 1) + (Z + sqrt(n) mu)^2`.
fn sum_of_squares<R: Rng>(n: u64, mu: f64, rng: &mut R) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    let shifted = z + (n as f64).sqrt() * mu;
    let rest = if n > 1 {
        ChiSquared::new((n - 1) as f64).expect("positive degrees of freedom").sample(rng)
    } else {
        0.0
    };
    rest + shifted * shifted
}

/// Rejection rate on the H0 batch and acceptance rate on the H1 batch.
pub fn estimate_error_rates<T: Real>(h0: &TrialBatch, h1: &TrialBatch, spec: &TestSpec<T>) -> Result<ErrorRates> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let alpha_hat = decision_rate(h0.counts_n1(), spec, Decision::H1);
    let beta_hat = decision_rate(h1.counts_n1(), spec, Decision::H0);
    Ok(ErrorRates {
        alpha_hat,
        alpha_stderr: rate_stderr(alpha_hat, h0.len()),
        trials_h0: h0.len(),
        beta_hat,
        beta_stderr: rate_stderr(beta_hat, h1.len()),
        trials_h1: h1.len(),
    })
}

fn decision_rate<T: Real>(counts: &[u64], spec: &TestSpec<T>, decision: Decision) -> f64 {
    let hits = counts
        .iter()
        .filter(|&&n1| decide(n1, spec).decision == decision)
        .count();
    hits as f64 / counts.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonBudget {
    FixedN(u64),
    /// Under H1 with `planet_adds_intensity` the companion adds light on
    /// top of the star: the rate becomes `I (1 + eps)`.
    FixedWindow {
        config: FixedWindowConfig,
        planet_adds_intensity: bool,
    },
}

impl PhotonBudget {
    fn window_for(&self, eps: f64) -> Result<Option<FixedWindowConfig>> {
        match *self {
            PhotonBudget::FixedN(_) => Ok(None),
            PhotonBudget::FixedWindow {
                config,
                planet_adds_intensity,
            } => {
                if planet_adds_intensity {
                    config.scaled_intensity(1.0 + eps).map(Some)
                } else {
                    Ok(Some(config))
                }
            }
        }
    }

    /// Expected number of detected photons at intensity ratio `eps`.
    pub fn expected_photons(&self, eps: f64) -> Result<f64> {
        Ok(match (self, self.window_for(eps)?) {
            (PhotonBudget::FixedN(n), _) => *n as f64,
            (_, Some(cfg)) => cfg.expected_photons(),
            (_, None) => unreachable!(),
        })
    }
}

/// A full measurement campaign: calibrate the threshold on star-only data,
/// then estimate the type-II error at every `(eps, d_a)` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentProtocol {
    pub seed: u64,
    pub alpha: f64,
    pub repetitions: usize,
    pub calibration_repetitions: usize,
    pub crosstalk: CrosstalkMatrix<f64>,
    pub photons: PhotonBudget,
    pub formulation: Formulation,
    pub alignment: Alignment,
    /// `(eps, d_a)` pairs.
    pub grid: Vec<(f64, f64)>,
    pub threshold_mode: ThresholdSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRow {
    pub epsilon: f64,
    pub d_a: f64,
    pub expected_photons: f64,
    pub beta_hat: f64,
    pub beta_stderr: f64,
    /// Gaussian prediction at the threshold actually used, `None` outside
    /// the expansion range.
    pub beta_theory: Option<f64>,
    pub beta_di_theory: Option<f64>,
    pub n_star: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub n_star: u64,
    pub threshold_source: ThresholdSource,
    /// Crosstalk behind the theory overlay: the configured value for an
    /// analytic threshold, the value implied by the calibrated one otherwise.
    pub c_theory: f64,
    pub alpha_hat: f64,
    pub alpha_stderr: f64,
    pub rows: Vec<ExperimentRow>,
    pub calibration: Option<TrialBatch>,
    pub batches: Vec<TrialBatch>,
}

fn simulate_budget(
    photons: &PhotonBudget,
    scene: &SourceScene<f64>,
    ct: &CrosstalkMatrix<f64>,
    h: Hypothesis,
    reps: usize,
    seed: u64,
) -> Result<TrialBatch> {
    match (photons, photons.window_for(scene.epsilon())?) {
        (PhotonBudget::FixedN(n), _) => simulate_fixed_n(*n, scene, ct, h, reps, seed),
        (_, Some(cfg)) => simulate_fixed_window(&cfg, scene, ct, h, reps, seed),
        (_, None) => unreachable!(),
    }
}

pub fn replicate_experiment(protocol: &ExperimentProtocol) -> Result<ExperimentReport> {
    if protocol.repetitions == 0 {
        return Err(Error::domain("repetitions must be >= 1"));
    }
    if protocol.grid.is_empty() {
        return Err(Error::domain("sweep grid is empty"));
    }
    let alpha = protocol.alpha;
    testing::k_alpha(alpha)?;
    let ct = protocol.crosstalk;
    let geometry = |eps: f64, d: f64| {
        SourceScene::new(eps, d, 0.0, protocol.formulation, protocol.alignment)
    };
    let star_only = geometry(0.0, 0.0)?;
    let n0 = protocol.photons.expected_photons(0.0)?;

    let (n_star, c_theory, calibration) = match protocol.threshold_mode {
        ThresholdSource::Calibrated => {
            if protocol.calibration_repetitions == 0 {
                return Err(Error::domain("calibration repetitions must be >= 1"));
            }
            let seed = derive_seed(protocol.seed, &[TAG_CALIBRATION]);
            let batch = simulate_budget(
                &protocol.photons,
                &star_only,
                &ct,
                Hypothesis::H0,
                protocol.calibration_repetitions,
                seed,
            )?;
            let n_star = batch.calibrated_threshold(alpha)?;
            let c = testing::invert_threshold(n_star as f64, n0, alpha)?.c10;
            (n_star, c, Some(batch))
        }
        ThresholdSource::Analytic => {
            let n = n0.round().max(1.0) as u64;
            (testing::analytic_threshold(n, &ct, alpha)?, ct.c10(), None)
        }
    };
    let spec = TestSpec::new(alpha, n_star, protocol.threshold_mode)?;
    let overlay_ct = match protocol.threshold_mode {
        ThresholdSource::Calibrated => CrosstalkMatrix::symmetric(c_theory)?,
        ThresholdSource::Analytic => ct,
    };

    let validation = simulate_budget(
        &protocol.photons,
        &star_only,
        &ct,
        Hypothesis::H0,
        protocol.repetitions,
        derive_seed(protocol.seed, &[TAG_VALIDATION]),
    )?;

    let points = protocol
        .grid
        .iter()
        .enumerate()
        .map(|(i, &(eps, d))| {
            let scene = geometry(eps, d)?;
            let seed = derive_seed(protocol.seed, &[TAG_GRID, i as u64]);
            let batch = simulate_budget(&protocol.photons, &scene, &ct, Hypothesis::H1, protocol.repetitions, seed)?;
            let rates = estimate_error_rates(&validation, &batch, &spec)?;
            let n = protocol.photons.expected_photons(eps)?;
            let beta_theory = testing::spade_beta_with_threshold(n, &scene, &overlay_ct, n_star as f64)
                .ok()
                .map(|b| b.value);
            let beta_di_theory = testing::di_beta_theory(n.round() as u64, &scene, alpha)
                .ok()
                .map(|b| b.value);
            let row = ExperimentRow {
                epsilon: eps,
                d_a: d,
                expected_photons: n,
                beta_hat: rates.beta_hat,
                beta_stderr: rates.beta_stderr,
                beta_theory,
                beta_di_theory,
                n_star,
            };
            Ok((row, batch))
        })
        .collect::<Result<Vec<_>>>()?;

    let alpha_hat = decision_rate(validation.counts_n1(), &spec, Decision::H1);
    let (rows, batches) = points.into_iter().unzip();
    Ok(ExperimentReport {
        n_star,
        threshold_source: protocol.threshold_mode,
        c_theory,
        alpha_hat,
        alpha_stderr: rate_stderr(alpha_hat, validation.len()),
        rows,
        calibration,
        batches,
    })
}
