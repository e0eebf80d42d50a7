//! Binary-mechanism counter for a `{-1, 0, +1}` stream under continual observation.
//!
//! The counter keeps one dyadic partial sum per level. When the `t`-th symbol
//! arrives, all levels below `i = trailing_zeros(t)` are merged into level
//! `i`, which receives exactly one fresh Laplace draw. The released count at
//! time `t` is the sum of the noisy nodes at the set bits of `t`, so it
//! aggregates `popcount(t)` noise terms. Nodes keep their draw for as long as
//! they stay active; nothing is ever redrawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-node privacy parameter `ε′`. `Infinite` disables noise entirely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonPrime {
    Finite(f64),
    Infinite,
}

impl EpsilonPrime {
    pub fn new(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(EpsilonPrime::Infinite)
        } else if value.is_nan() || value <= 0.0 {
            Err(Error::param("epsilon_prime", value, "must be positive"))
        } else {
            Ok(EpsilonPrime::Finite(value))
        }
    }

    /// Laplace scale `1/ε′`, or `None` in zero-noise mode.
    pub fn noise_scale(self) -> Option<f64> {
        match self {
            EpsilonPrime::Finite(e) => Some(1.0 / e),
            EpsilonPrime::Infinite => None,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            EpsilonPrime::Finite(e) => e,
            EpsilonPrime::Infinite => f64::INFINITY,
        }
    }
}

/// Laplace draw by inverse CDF on a uniform `u` in `(0, 1)`.
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    if centered == 0.0 {
        return 0.0;
    }
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// One Laplace(`scale`) sample drawn from `rng`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if scale.is_nan() || scale <= 0.0 || scale.is_infinite() {
        return Err(Error::param("scale", scale, "must be positive and finite"));
    }
    let u = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    Ok(laplace_from_uniform(u, scale))
}

/// High-probability bound on `max_t |ŷ_t - y_t|` over a length-`T` stream:
/// `sqrt(8 ln T) * ln(2/β′) / ε′` (natural logarithms).
pub fn error_bound(stream_len: u64, beta_prime: f64, epsilon_prime: f64) -> Result<f64> {
    if stream_len < 2 {
        return Err(Error::param("T", stream_len as f64, "must be at least 2"));
    }
    if !(beta_prime > 0.0 && beta_prime < 1.0) {
        return Err(Error::param("beta_prime", beta_prime, "must lie in (0, 1)"));
    }
    if epsilon_prime.is_nan() || epsilon_prime <= 0.0 {
        return Err(Error::param("epsilon_prime", epsilon_prime, "must be positive"));
    }
    Ok((8.0 * (stream_len as f64).ln()).sqrt() * (2.0 / beta_prime).ln() / epsilon_prime)
}

/// Stateful binary-mechanism counter with a fixed stream budget.
#[derive(Debug, Clone)]
pub struct PrivateCounter {
    budget: u64,
    epsilon_prime: EpsilonPrime,
    t: u64,
    exact_nodes: Vec<f64>,
    noisy_nodes: Vec<f64>,
    exact_total: i64,
    rng: ChaCha8Rng,
}

impl PrivateCounter {
    /// Empty counter for up to `budget` symbols, seeded deterministically.
    pub fn new(budget: u64, epsilon_prime: EpsilonPrime, seed: u64) -> Result<Self> {
        Self::with_rng(budget, epsilon_prime, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(budget: u64, epsilon_prime: EpsilonPrime, rng: ChaCha8Rng) -> Result<Self> {
        if budget == 0 {
            return Err(Error::param("T", 0.0, "must be at least 1"));
        }
        if let EpsilonPrime::Finite(e) = epsilon_prime {
            EpsilonPrime::new(e)?;
        }
        let levels = (u64::BITS - budget.leading_zeros()) as usize;
        Ok(Self {
            budget,
            epsilon_prime,
            t: 0,
            exact_nodes: vec![0.0; levels],
            noisy_nodes: vec![0.0; levels],
            exact_total: 0,
            rng,
        })
    }

    /// Appends one symbol and returns the noisy prefix count at the new time.
    pub fn feed(&mut self, symbol: i8) -> Result<f64> {
        if !(-1..=1).contains(&symbol) {
            return Err(Error::InvalidSymbol(symbol));
        }
        if self.t == self.budget {
            return Err(Error::StreamExhausted { budget: self.budget });
        }
        self.t += 1;
        self.exact_total += i64::from(symbol);
        let level = self.t.trailing_zeros() as usize;
        let merged: f64 = self.exact_nodes[..level].iter().sum::<f64>() + f64::from(symbol);
        for j in 0..level {
            self.exact_nodes[j] = 0.0;
            self.noisy_nodes[j] = 0.0;
        }
        self.exact_nodes[level] = merged;
        let noise = match self.epsilon_prime.noise_scale() {
            Some(scale) => laplace_sample(scale, &mut self.rng)?,
            None => 0.0,
        };
        self.noisy_nodes[level] = merged + noise;
        Ok(self.noisy_count())
    }

    /// Sum of the active noisy nodes at the current time.
    pub fn noisy_count(&self) -> f64 {
        self.active_levels().map(|j| self.noisy_nodes[j]).sum()
    }

    /// Exact prefix sum of every symbol fed so far.
    pub fn exact_count(&self) -> i64 {
        self.exact_total
    }

    /// Levels `j` with bit `j` of `t` set.
    pub fn active_levels(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.exact_nodes.len()).filter(move |&j| self.t >> j & 1 == 1)
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn epsilon_prime(&self) -> EpsilonPrime {
        self.epsilon_prime
    }

    /// Number of noise terms in the current release.
    pub fn noise_terms(&self) -> u32 {
        self.t.count_ones()
    }
}

/// Free-function constructor matching [`PrivateCounter::new`].
pub fn new_counter(budget: u64, epsilon_prime: EpsilonPrime, seed: u64) -> Result<PrivateCounter> {
    PrivateCounter::new(budget, epsilon_prime, seed)
}
