use rand::Rng;
use rand_distr::{Distribution as _, Exp, Normal, Weibull};
use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// A scalar parameter distribution. Units follow the parameter it feeds
/// (pixels, 8-bit intensity, ratios, amplitudes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    Normal { mean: f64, std: f64 },
    /// `offset + Exp(rate = 1/scale)`.
    Exponential { scale: f64, offset: f64 },
    /// `offset + Weibull(λ = scale, k = shape)`.
    Weibull { scale: f64, shape: f64, offset: f64 },
}

impl Distribution {
    pub const fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    pub const fn constant(v: f64) -> Self {
        Self::Uniform { lo: v, hi: v }
    }

    pub const fn log_uniform(lo: f64, hi: f64) -> Self {
        Self::LogUniform { lo, hi }
    }

    pub const fn normal(mean: f64, std: f64) -> Self {
        Self::Normal { mean, std }
    }

    pub const fn exponential(scale: f64, offset: f64) -> Self {
        Self::Exponential { scale, offset }
    }

    pub const fn weibull(scale: f64, shape: f64, offset: f64) -> Self {
        Self::Weibull {
            scale,
            shape,
            offset,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let ok = match *self {
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Self::LogUniform { lo, hi } => lo > 0.0 && hi.is_finite() && lo <= hi,
            Self::Normal { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            Self::Exponential { scale, offset } => scale > 0.0 && scale.is_finite() && offset.is_finite(),
            Self::Weibull {
                scale,
                shape,
                offset,
            } => scale > 0.0 && shape > 0.0 && scale.is_finite() && shape.is_finite() && offset.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::InvalidDistribution(*self))
        }
    }

    /// Closed support `[lo, hi]` (infinite where unbounded).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lo, hi } | Self::LogUniform { lo, hi } => (lo, hi),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Exponential { offset, .. } | Self::Weibull { offset, .. } => (offset, f64::INFINITY),
        }
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::LogUniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    (hi - lo) / libm::log(hi / lo)
                }
            }
            Self::Normal { mean, .. } => mean,
            Self::Exponential { scale, offset } => offset + scale,
            Self::Weibull {
                scale,
                shape,
                offset,
            } => offset + scale * libm::tgamma(1.0 + 1.0 / shape),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    lo + (hi - lo) * rng.random::<f64>()
                }
            }
            Self::LogUniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    let (a, b) = (libm::log(lo), libm::log(hi));
                    libm::exp(a + (b - a) * rng.random::<f64>()).clamp(lo, hi)
                }
            }
            Self::Normal { mean, std } => {
                if std == 0.0 {
                    mean
                } else {
                    Normal::new(mean, std).expect("validated").sample(rng)
                }
            }
            Self::Exponential { scale, offset } => {
                offset + Exp::new(1.0 / scale).expect("validated").sample(rng)
            }
            Self::Weibull {
                scale,
                shape,
                offset,
            } => offset + Weibull::new(scale, shape).expect("validated").sample(rng),
        }
    }
}

/// Inclusive integer count range, sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    pub const fn exactly(n: u32) -> Self {
        Self { min: n, max: n }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.min >= self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(d: Distribution, n: usize, seed: u64) -> (f64, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..n {
            let v = d.sample(&mut rng);
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (sum / n as f64, lo, hi)
    }

    #[test]
    fn exponential_mean_and_offset() {
        let d = Distribution::exponential(10.0, 1.0);
        let (mean, lo, _) = moments(d, 100_000, 3);
        assert!(lo >= 1.0);
        assert!((mean - 11.0).abs() / 11.0 < 0.03, "{mean}");
    }

    #[test]
    fn weibull_mean_matches_gamma_formula() {
        let d = Distribution::weibull(25.0, 2.0, 18.0);
        // Γ(1.5) = √π / 2
        let expected = 18.0 + 25.0 * libm::sqrt(core::f64::consts::PI) / 2.0;
        assert!((d.mean() - expected).abs() < 1e-9);
        let (mean, lo, _) = moments(d, 100_000, 4);
        assert!(lo >= 18.0);
        assert!((mean - expected).abs() / expected < 0.02, "{mean} vs {expected}");
    }

    #[test]
    fn bounded_kinds_stay_in_range() {
        for d in [Distribution::uniform(32.0, 153.0), Distribution::log_uniform(2.0, 20000.0)] {
            let (_, lo, hi) = moments(d, 50_000, 5);
            let (a, b) = d.support();
            assert!(lo >= a && hi <= b);
        }
        assert_eq!(moments(Distribution::constant(128.0), 10, 1).0, 128.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Distribution::uniform(2.0, 1.0).validate().is_err());
        assert!(Distribution::exponential(0.0, 1.0).validate().is_err());
        assert!(Distribution::normal(0.0, -1.0).validate().is_err());
        assert!(Distribution::log_uniform(0.0, 1.0).validate().is_err());
        assert!(Distribution::weibull(25.0, 2.0, 18.0).validate().is_ok());
    }

    #[test]
    fn count_range_inclusive() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = CountRange::new(1, 4);
        let mut seen = [false; 5];
        for _ in 0..1000 {
            seen[r.sample(&mut rng) as usize] = true;
        }
        assert_eq!(seen, [false, true, true, true, true]);
    }
}
