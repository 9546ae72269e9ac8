//! Seedable noise sampling for every mechanism in the crate.
//!
//! All randomness flows through [`RngStream`], a ChaCha12-backed stream that
//! is fully determined by a 64-bit master seed and a stream index. Parallel
//! trials fork one stream per trial with [`RngStream::fork`], so results are
//! reproducible regardless of scheduling.
//!
//! The samplers here are continuous `f64` transforms of uniform draws. They
//! make no attempt to defend against floating-point side channels and do not
//! implement discrete noise; see the crate README for that limitation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Distribution family plus scale used by a mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Laplace with scale `b`.
    Laplace { scale: f64 },
    /// Gaussian with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Gumbel with scale `b`.
    Gumbel { scale: f64 },
}

impl NoiseKind {
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseKind::Laplace { scale } => scale,
            NoiseKind::Gaussian { sigma } => sigma,
            NoiseKind::Gumbel { scale } => scale,
        }
    }

    pub fn shape(&self) -> NoiseShape {
        match self {
            NoiseKind::Laplace { .. } => NoiseShape::Laplace,
            NoiseKind::Gaussian { .. } => NoiseShape::Gaussian,
            NoiseKind::Gumbel { .. } => NoiseShape::Gumbel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::param("scale", format!("must be positive, got {s}")));
        }
        Ok(())
    }
}

/// Shape of a unit-scale draw requested from a [`NoiseSource`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseShape {
    Laplace,
    Gaussian,
    Gumbel,
}

/// Anything that can hand out unit-scale noise draws.
///
/// [`RngStream`] is the production implementation. [`ForcedSource`] replays a
/// fixed trace so tests can pin mechanism outputs, and [`Recording`] captures
/// the draws a mechanism consumed.
pub trait NoiseSource {
    fn standard(&mut self, shape: NoiseShape) -> f64;
}

/// Scaled sample of the given kind: `scale * standard(shape)`.
pub fn sample(kind: NoiseKind, src: &mut dyn NoiseSource) -> Result<f64> {
    kind.validate()?;
    Ok(kind.scale() * src.standard(kind.shape()))
}

/// splitmix64-style finalizer over the combined inputs.
fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic, seekable random stream.
///
/// Two streams constructed from the same `(seed, stream)` pair produce
/// bit-identical draw sequences on IEEE-754 platforms.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    draws: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            stream,
            draws: 0,
            rng,
        }
    }

    /// Derive an independent stream for a parallel unit of work.
    ///
    /// Forking is by index, not by state: `fork(i)` yields the same stream no
    /// matter how many draws the parent has made. The child stream id mixes
    /// the parent id and the index so that nested forks (per-cell, then
    /// per-trial) do not collide the way additive schemes do.
    pub fn fork(&self, index: u64) -> Self {
        Self::with_stream(self.seed, mix64(self.stream, index.wrapping_add(1)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of standard draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform draw in the open interval (0, 1).
    ///
    /// Endpoints are excluded so that `ln(u)` and `ln(-ln(u))` stay finite.
    fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl NoiseSource for RngStream {
    fn standard(&mut self, shape: NoiseShape) -> f64 {
        self.draws += 1;
        match shape {
            // Two-sided exponential: random sign times a unit exponential.
            NoiseShape::Laplace => {
                let sign = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * -self.uniform_open().ln()
            }
            // Box-Muller; the sine companion is discarded to keep the stream
            // position independent of call history.
            NoiseShape::Gaussian => {
                let u1 = self.uniform_open();
                let u2 = self.uniform_open();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
            NoiseShape::Gumbel => -(-self.uniform_open().ln()).ln(),
        }
    }
}

/// Replays a fixed queue of standard draws. Panics when exhausted.
#[derive(Debug, Clone)]
pub struct ForcedSource {
    values: Vec<f64>,
    next: usize,
}

impl ForcedSource {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, next: 0 }
    }

    /// A source that always returns zero, i.e. noiseless mechanisms.
    pub fn zeros() -> Self {
        Self {
            values: Vec::new(),
            next: 0,
        }
    }
}

impl NoiseSource for ForcedSource {
    fn standard(&mut self, _shape: NoiseShape) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let v = self.values[self.next % self.values.len()];
        self.next += 1;
        v
    }
}

/// Wraps a source and logs every draw it hands out.
pub struct Recording<'a> {
    inner: &'a mut dyn NoiseSource,
    log: Vec<f64>,
}

impl<'a> Recording<'a> {
    pub fn new(inner: &'a mut dyn NoiseSource) -> Self {
        Self {
            inner,
            log: Vec::new(),
        }
    }

    pub fn into_log(self) -> Vec<f64> {
        self.log
    }
}

impl NoiseSource for Recording<'_> {
    fn standard(&mut self, shape: NoiseShape) -> f64 {
        let v = self.inner.standard(shape);
        self.log.push(v);
        v
    }
}
