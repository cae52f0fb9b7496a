//! Subsample generation: multinomial sampling with replacement through an
//! alias table, and single-pass Poisson sampling.
//!
//! Randomness comes from `Xoshiro256PlusPlus`. A generator is identified by
//! a 64-bit master seed and a 64-bit stream id; the 256-bit state is filled
//! from a SplitMix64 sequence started at a mix of the two, so distinct
//! streams of the same master seed are independent for practical purposes
//! and any (seed, stream) pair reproduces the same draws.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Tolerance on `|Σπ − 1|` before renormalisation.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    WithReplacement,
    Poisson,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::WithReplacement => "with_replacement",
            Scheme::Poisson => "poisson",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with_replacement" | "replacement" | "R" | "r" => Ok(Scheme::WithReplacement),
            "poisson" | "P" | "p" => Ok(Scheme::Poisson),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub master: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    /// A sub-stream derived deterministically from this one.
    pub fn child(&self, tag: u64) -> Self {
        let mut s = self.stream ^ tag.rotate_left(29) ^ 0xD1B5_4A32_D192_ED03;
        Self {
            master: self.master,
            stream: splitmix64(&mut s),
        }
    }

    pub fn rng(&self) -> Xoshiro256PlusPlus {
        let mut s = self.master;
        let mut mix = splitmix64(&mut s) ^ self.stream.wrapping_mul(0xA24B_AED4_963E_E407);
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut mix).to_le_bytes());
        }
        Xoshiro256PlusPlus::from_seed(bytes)
    }
}

/// Indices drawn by one sampling step together with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    /// Row indices; with multiplicity for sampling with replacement,
    /// strictly increasing for Poisson sampling.
    pub indices: Vec<usize>,
    /// The probability `πᵢ` recorded for each drawn index.
    pub probs: Vec<f64>,
    pub scheme: Scheme,
}

impl Subsample {
    pub fn realized_size(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Vose alias table for O(1) draws from a discrete distribution.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Builds from nonnegative weights with a positive sum.
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {i} is {w}")));
        }
        let total: f64 = crate::numeric::compensated_sum(weights.iter().cloned());
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![0.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small = Vec::new();
        let mut large = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are numerically 1
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Checks that `pi` is a probability vector up to [`SUM_TOLERANCE`].
pub fn check_distribution(pi: &[f64]) -> Result<f64> {
    if pi.is_empty() {
        return Err(Error::InvalidDistribution("empty distribution".into()));
    }
    if let Some((i, p)) = pi.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
    }
    let total = crate::numeric::compensated_sum(pi.iter().cloned());
    if !(total > 0.0) {
        return Err(Error::InvalidDistribution("zero total mass".into()));
    }
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(total)
}

/// `s` i.i.d. multinomial draws from `pi`.
pub fn sample_with_replacement(pi: &[f64], s: usize, seed: RngSeed) -> Result<Subsample> {
    if s == 0 {
        return Err(Error::InvalidArgument("subsample size must be ≥ 1".into()));
    }
    let total = check_distribution(pi)?;
    let table = AliasTable::new(pi)?;
    let mut rng = seed.rng();
    let mut indices = Vec::with_capacity(s);
    let mut probs = Vec::with_capacity(s);
    for _ in 0..s {
        let i = table.sample(&mut rng);
        indices.push(i);
        probs.push(pi[i] / total);
    }
    Ok(Subsample {
        indices,
        probs,
        scheme: Scheme::WithReplacement,
    })
}

/// Poisson sampling over a stream of per-record probabilities: record `i`
/// is kept iff `uᵢ ≤ s·πᵢ` with one uniform per record in data order.
pub fn sample_poisson<I>(pi: I, s: usize, seed: RngSeed) -> Subsample
where
    I: IntoIterator<Item = f64>,
{
    let mut it = pi.into_iter();
    let n = usize::MAX;
    sample_poisson_with(n, s, seed, |_| Ok(it.next()))
        .expect("infallible probability stream")
}

/// Fallible variant of [`sample_poisson`]: `source(i)` yields `πᵢ`, or
/// `None` when the stream is exhausted, and is called once per record.
pub fn sample_poisson_with<F>(n: usize, s: usize, seed: RngSeed, mut source: F) -> Result<Subsample>
where
    F: FnMut(usize) -> Result<Option<f64>>,
{
    let mut rng = seed.rng();
    let s = s as f64;
    let mut indices = Vec::new();
    let mut probs = Vec::new();
    for i in 0..n {
        let Some(p) = source(i)? else { break };
        let u: f64 = rng.gen();
        let rate = s * p;
        if rate > 0.0 && u <= rate {
            indices.push(i);
            probs.push(p);
        }
    }
    Ok(Subsample {
        indices,
        probs,
        scheme: Scheme::Poisson,
    })
}

/// Uniform pilot subsample of (expected) size `s0` out of `n` records.
pub fn pilot_uniform(n: usize, s0: usize, scheme: Scheme, seed: RngSeed) -> Result<Subsample> {
    if s0 == 0 || n == 0 {
        return Err(Error::InvalidArgument("pilot needs n ≥ 1 and s0 ≥ 1".into()));
    }
    let p = 1.0 / n as f64;
    match scheme {
        Scheme::WithReplacement => sample_with_replacement(&vec![p; n], s0, seed),
        Scheme::Poisson => {
            let sub = sample_poisson(std::iter::repeat_n(p, n), s0, seed);
            if sub.is_empty() {
                Err(Error::EmptyPilot)
            } else {
                Ok(sub)
            }
        }
    }
}
