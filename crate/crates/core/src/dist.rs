//! Bounded, zero-mean, i.i.d. disturbance models with reproducible
//! counter-based sample streams.
//!
//! Both supported families are symmetric about the origin with box support,
//! and assign positive probability to every ball around zero, so small
//! disturbances always remain possible. Streams are derived from a master
//! seed plus a stream index, which makes parallel trajectory sampling
//! independent of scheduling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::setalg::Polytope;

/// Stream index reserved for moment estimation.
const STREAM_SECOND_MOMENT: u64 = u64::MAX - 1;
/// Stream index reserved for ball-probability estimation.
const STREAM_BALL_PROB: u64 = u64::MAX - 2;

const SECOND_MOMENT_SAMPLES: usize = 1_000_000;
const MIN_ACCEPTANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("halfwidths and deviations must be finite and nonnegative")]
    BadParameters,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("truncation acceptance rate {0:.2e} below 1e-3; widen the box or shrink the deviation")]
    AcceptanceTooLow(f64),
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
enum Kind {
    UniformBox {
        halfwidth: Vec<f64>,
    },
    TruncatedGaussian {
        std_dev: Vec<f64>,
        halfwidth: Vec<f64>,
    },
}

/// Disturbance model with box support, zero mean and an attached seed that
/// identifies its stream family.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DisturbanceModel {
    kind: Kind,
    seed: u64,
}

/// Second moment `E[w w']`; `std_error` is reported when the matrix is a
/// Monte Carlo estimate rather than exact.
#[derive(Debug, Clone)]
pub struct SecondMoment {
    pub matrix: DMatrix<f64>,
    pub std_error: Option<f64>,
}

/// Monte Carlo estimate of `P(|w| <= lambda)` with its binomial standard
/// error, plus an analytic lower bound where the geometry allows one.
#[derive(Debug, Clone)]
pub struct BallProbability {
    pub estimate: f64,
    pub std_error: f64,
    pub analytic_lower_bound: Option<f64>,
}

/// Sampling stream bound to one (model, stream index) pair.
pub struct DisturbanceStream<'m> {
    model: &'m DisturbanceModel,
    rng: ChaCha8Rng,
}

impl DisturbanceModel {
    pub fn uniform_box(halfwidth: &[f64], seed: u64) -> Result<Self, DistError> {
        if halfwidth.is_empty() || halfwidth.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(DistError::BadParameters);
        }
        Ok(Self {
            kind: Kind::UniformBox {
                halfwidth: halfwidth.to_vec(),
            },
            seed,
        })
    }

    /// Zero-mean Gaussian with per-axis deviation, rejected against the box
    /// `{|w_i| <= halfwidth_i}`. Construction fails when the analytic
    /// acceptance rate drops below 1e-3.
    pub fn truncated_gaussian(std_dev: &[f64], halfwidth: &[f64], seed: u64) -> Result<Self, DistError> {
        if std_dev.len() != halfwidth.len() {
            return Err(DistError::DimensionMismatch("std_dev vs halfwidth".into()));
        }
        if std_dev.is_empty()
            || std_dev.iter().any(|s| !s.is_finite() || *s <= 0.0)
            || halfwidth.iter().any(|h| !h.is_finite() || *h <= 0.0)
        {
            return Err(DistError::BadParameters);
        }
        let acceptance: f64 = std_dev
            .iter()
            .zip(halfwidth)
            .map(|(s, h)| erf(h / (s * std::f64::consts::SQRT_2)))
            .product();
        if acceptance < MIN_ACCEPTANCE {
            return Err(DistError::AcceptanceTooLow(acceptance));
        }
        Ok(Self {
            kind: Kind::TruncatedGaussian {
                std_dev: std_dev.to_vec(),
                halfwidth: halfwidth.to_vec(),
            },
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::UniformBox { halfwidth } => halfwidth.len(),
            Kind::TruncatedGaussian { halfwidth, .. } => halfwidth.len(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn halfwidth(&self) -> &[f64] {
        match &self.kind {
            Kind::UniformBox { halfwidth } => halfwidth,
            Kind::TruncatedGaussian { halfwidth, .. } => halfwidth,
        }
    }

    /// Support box as a polytope.
    pub fn support(&self) -> Polytope {
        Polytope::box_at_origin(self.halfwidth()).expect("validated halfwidths")
    }

    /// Largest norm attainable on the support (box corner).
    pub fn max_norm(&self) -> f64 {
        self.halfwidth().iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    /// Open a reproducible stream. The same (seed, stream) pair always
    /// yields the same sequence regardless of what other streams did.
    pub fn stream(&self, stream: u64) -> DisturbanceStream<'_> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        DisturbanceStream { model: self, rng }
    }

    /// Draw `count` i.i.d. samples from the given stream index.
    pub fn sample(&self, stream: u64, count: usize) -> Vec<DVector<f64>> {
        let mut s = self.stream(stream);
        (0..count).map(|_| s.next_sample()).collect()
    }

    /// Second moment matrix. Exact for the uniform box; Monte Carlo with a
    /// reported standard error for the truncated Gaussian.
    pub fn second_moment(&self) -> SecondMoment {
        match &self.kind {
            Kind::UniformBox { halfwidth } => {
                let d = halfwidth.len();
                let mut m = DMatrix::zeros(d, d);
                for i in 0..d {
                    m[(i, i)] = halfwidth[i] * halfwidth[i] / 3.0;
                }
                SecondMoment {
                    matrix: m,
                    std_error: None,
                }
            }
            Kind::TruncatedGaussian { .. } => {
                let d = self.dim();
                let mut acc = DMatrix::zeros(d, d);
                let mut sq_acc = DVector::zeros(d);
                let mut s = self.stream(STREAM_SECOND_MOMENT);
                for _ in 0..SECOND_MOMENT_SAMPLES {
                    let w = s.next_sample();
                    for i in 0..d {
                        for j in 0..d {
                            acc[(i, j)] += w[i] * w[j];
                        }
                        sq_acc[i] += w[i].powi(4);
                    }
                }
                let n = SECOND_MOMENT_SAMPLES as f64;
                let matrix = acc / n;
                // Worst per-axis standard error of the diagonal estimates.
                let mut se: f64 = 0.0;
                for i in 0..d {
                    let var = (sq_acc[i] / n - matrix[(i, i)] * matrix[(i, i)]).max(0.0);
                    se = se.max((var / n).sqrt());
                }
                SecondMoment {
                    matrix,
                    std_error: Some(se),
                }
            }
        }
    }

    /// Monte Carlo estimate of `P(|w|_2 <= lambda)`.
    pub fn ball_probability(&self, lambda: f64, n_samples: usize) -> BallProbability {
        let mut hits = 0usize;
        let mut s = self.stream(STREAM_BALL_PROB);
        for _ in 0..n_samples {
            if s.next_sample().norm() <= lambda {
                hits += 1;
            }
        }
        let n = n_samples.max(1) as f64;
        let estimate = hits as f64 / n;
        let std_error = (estimate * (1.0 - estimate) / n).sqrt();
        BallProbability {
            estimate,
            std_error,
            analytic_lower_bound: self.analytic_ball_lower_bound(lambda),
        }
    }

    /// Volume-ratio lower bound for the uniform box; exact 1 when the ball
    /// covers the support.
    fn analytic_ball_lower_bound(&self, lambda: f64) -> Option<f64> {
        if lambda <= 0.0 {
            return Some(0.0);
        }
        if lambda >= self.max_norm() {
            return Some(1.0);
        }
        match &self.kind {
            Kind::UniformBox { halfwidth } => {
                if halfwidth.iter().any(|h| *h <= 0.0) {
                    // Degenerate axes carry no volume; the mass at zero makes
                    // every ball probability 1 along them, so fall back.
                    return Some(0.0);
                }
                let d = halfwidth.len() as f64;
                let r = halfwidth
                    .iter()
                    .fold(lambda, |acc, h| acc.min(*h));
                let ball = std::f64::consts::PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0) * r.powf(d);
                let volume: f64 = halfwidth.iter().map(|h| 2.0 * h).product();
                Some((ball / volume).min(1.0))
            }
            Kind::TruncatedGaussian { .. } => None,
        }
    }

    /// Valid lower bound on `P(|w| <= lambda)`: the analytic bound when
    /// available, otherwise the Monte Carlo estimate minus three standard
    /// errors, floored at `floor_min`.
    pub fn prob_lower_bound(&self, lambda: f64, n_samples: usize, floor_min: f64) -> f64 {
        let bp = self.ball_probability(lambda, n_samples);
        let mc = (bp.estimate - 3.0 * bp.std_error).max(floor_min);
        match bp.analytic_lower_bound {
            Some(lb) if lb > 0.0 => lb.max(floor_min).max(mc.min(1.0)).min(1.0),
            _ => mc.min(1.0),
        }
    }
}

impl DisturbanceStream<'_> {
    pub fn next_sample(&mut self) -> DVector<f64> {
        match &self.model.kind {
            Kind::UniformBox { halfwidth } => DVector::from_fn(halfwidth.len(), |i, _| {
                let h = halfwidth[i];
                if h == 0.0 {
                    0.0
                } else {
                    self.rng.gen_range(-h..=h)
                }
            }),
            Kind::TruncatedGaussian { std_dev, halfwidth } => loop {
                let w = DVector::from_fn(std_dev.len(), |i, _| {
                    let z: f64 = self.rng.sample(StandardNormal);
                    z * std_dev[i]
                });
                let inside = w
                    .iter()
                    .zip(halfwidth)
                    .all(|(v, h)| v.abs() <= *h);
                if inside {
                    break w;
                }
            },
        }
    }
}
