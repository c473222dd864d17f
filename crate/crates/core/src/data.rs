//! Seeded random streams, the ring-of-Gaussians target and the noise prior.
//!
//! # Random number generation
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`) keyed by
//! the run's 64-bit master seed (`seed_from_u64`) with the ChaCha stream id
//! set to the [`Stream`] discriminant. Streams with different ids never share
//! key-stream blocks, so the data, noise, initialization and evaluation
//! streams of one run are independent.
//!
//! * uniforms in `[0, 1)`: the top 53 bits of `next_u64`, scaled by `2^-53`;
//! * standard normals: Box–Muller on two uniforms, `r = √(−2 ln(1−u₁))`,
//!   `θ = 2πu₂`, returning `r cos θ` then the cached `r sin θ`.
//!
//! A stream's state is `(seed, stream id, word position, cached normal)`,
//! which is what checkpoints store.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Named sub-streams of a run's master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Data = 1,
    Noise = 2,
    Init = 3,
    Eval = 4,
    Theory = 5,
}

/// A portable, seeded random stream (see the module docs for the algorithm).
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
    cached_normal: Option<f64>,
}

/// Serializable position of an [`Rng`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    /// ChaCha word position, as a decimal string (it is a u128).
    pub word_pos: String,
    pub cached_normal: Option<f64>,
}

impl Rng {
    /// Stream `stream` of master seed `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            inner,
            seed,
            stream,
            cached_normal: None,
        }
    }

    pub fn new(seed: u64, stream: Stream) -> Self {
        Self::with_stream(seed, stream as u64)
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            stream: self.stream,
            word_pos: self.inner.get_word_pos().to_string(),
            cached_normal: self.cached_normal,
        }
    }

    pub fn from_state(state: &RngState) -> Result<Self> {
        let pos: u128 = state
            .word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad rng word position {:?}", state.word_pos)))?;
        let mut rng = Self::with_stream(state.seed, state.stream);
        rng.inner.set_word_pos(pos);
        rng.cached_normal = state.cached_normal;
        Ok(rng)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal via Box–Muller.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Exponential(1), used for Dirichlet draws.
    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }
}

/// Mixture of `n_modes` isotropic Gaussians with centers evenly spaced on a
/// circle, the first at angle 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub n_modes: usize,
    pub radius: f64,
    /// Per-coordinate variance of each component.
    pub covariance_scale: f64,
}

impl Default for RingSpec {
    fn default() -> Self {
        RingSpec {
            n_modes: 8,
            radius: 2.0,
            covariance_scale: 0.02,
        }
    }
}

impl RingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 || !(self.radius > 0.0) || !(self.covariance_scale > 0.0) {
            return Err(Error::Config(format!("invalid ring spec {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self, k: usize) -> [f64; 2] {
        let angle = 2.0 * PI * k as f64 / self.n_modes as f64;
        [self.radius * angle.cos(), self.radius * angle.sin()]
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.n_modes).map(|k| self.center(k)).collect()
    }

    pub fn std_dev(&self) -> f64 {
        self.covariance_scale.sqrt()
    }
}

/// Draws `n` points from the ring mixture.
pub fn sample_ring(spec: &RingSpec, n: usize, rng: &mut Rng) -> Array2<f64> {
    let sd = spec.std_dev();
    let centers = spec.centers();
    let mut out = Array2::zeros((n, 2));
    for mut row in out.rows_mut() {
        let c = centers[rng.index(spec.n_modes)];
        row[0] = c[0] + sd * rng.normal();
        row[1] = c[1] + sd * rng.normal();
    }
    out
}

/// Log density of the ring mixture at `x`, via log-sum-exp over components.
pub fn ring_log_density(spec: &RingSpec, x: [f64; 2]) -> f64 {
    let var = spec.covariance_scale;
    let exponent = |k: usize| {
        let c = spec.center(k);
        -((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * var)
    };
    let max = (0..spec.n_modes).map(exponent).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = (0..spec.n_modes).map(|k| (exponent(k) - max).exp()).sum();
    max + sum.ln() - (2.0 * PI * var).ln() - (spec.n_modes as f64).ln()
}

/// `(1/K) Σ_k N(x; center_k, covariance_scale·I)`.
pub fn ring_density(spec: &RingSpec, x: [f64; 2]) -> f64 {
    let var = spec.covariance_scale;
    let norm = 1.0 / (2.0 * PI * var * spec.n_modes as f64);
    spec.centers()
        .iter()
        .map(|c| {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            (-d2 / (2.0 * var)).exp()
        })
        .sum::<f64>()
        * norm
}

/// `n × dim` i.i.d. standard normals, filled row-major.
pub fn sample_noise(n: usize, dim: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, dim), || rng.normal())
}

/// Writes two-column samples as CSV with header `x,y`. Floats use Rust's
/// shortest round-trip formatting.
pub fn write_samples_csv(path: &Path, samples: &Array2<f64>) -> Result<()> {
    if samples.ncols() != 2 {
        return Err(Error::Shape(format!("expected 2 columns, got {}", samples.ncols())));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,y")?;
    for row in samples.rows() {
        writeln!(w, "{},{}", row[0], row[1])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_samples_csv`].
pub fn read_samples_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("x,y") {
        return Err(Error::Shape(format!("{}: missing x,y header", path.display())));
    }
    let mut flat = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut it = line.split(',');
        for _ in 0..2 {
            let v: f64 = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Shape(format!("bad sample line {line:?}")))?;
            flat.push(v);
        }
    }
    let n = flat.len() / 2;
    Array2::from_shape_vec((n, 2), flat).map_err(|e| Error::Shape(e.to_string()))
}
