use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _, StandardNormal};

use crate::error::{Error, Result};

/// Seeded random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha8, a counter-based generator: every stream id selects an
/// independent keystream, so per-trajectory streams need no coordination.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// A distribution accepted by [`RngStream::sample`].
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Uniform01,
    Gaussian { mean: f64, std: f64 },
    Bernoulli(f64),
    Binomial { n: u64, p: f64 },
    Categorical(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample {
    Real(f64),
    Integer(u64),
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A sibling stream with the same seed.
    pub fn derive(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }

    pub fn sample(&mut self, dist: &Distribution) -> Result<Sample> {
        Ok(match dist {
            Distribution::Uniform01 => Sample::Real(self.uniform01()),
            Distribution::Gaussian { mean, std } => Sample::Real(self.gaussian(*mean, *std)?),
            Distribution::Bernoulli(p) => Sample::Integer(self.bernoulli(*p)? as u64),
            Distribution::Binomial { n, p } => Sample::Integer(self.binomial(*n, *p)?),
            Distribution::Categorical(probs) => Sample::Integer(self.categorical(probs)? as u64),
        })
    }

    /// Uniform on [0, 1).
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in 0..n.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn gaussian_std(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> Result<f64> {
        if !(std > 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gaussian needs finite mean and std > 0, got ({mean}, {std})"
            )));
        }
        Ok(mean + std * self.gaussian_std())
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool> {
        check_probability(p)?;
        Ok(self.uniform01() < p)
    }

    pub fn binomial(&mut self, n: u64, p: f64) -> Result<u64> {
        check_probability(p)?;
        let dist = Binomial::new(n, p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// Index drawn with the given probabilities. Zero-probability entries
    /// are never returned.
    pub fn categorical(&mut self, probs: &[f64]) -> Result<usize> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("categorical needs at least one entry".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "categorical probabilities must be finite and non-negative: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "categorical probabilities sum to {total}"
            )));
        }
        Ok(self.categorical_unchecked(probs))
    }

    /// Same as [`categorical`](Self::categorical) without the input checks,
    /// for probabilities produced by a softmax.
    pub fn categorical_unchecked(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform01() * probs.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
        last_positive
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}
