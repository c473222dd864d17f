//! Sample-quality metrics for the ring experiment.
//!
//! # Symmetric KL estimator
//!
//! `P_g` is a Gaussian KDE over the generated samples with a full bandwidth
//! matrix `H = s²·Σ̂`, where `Σ̂` is the unbiased sample covariance and
//! `s = n^{−1/(d+4)} = n^{−1/6}` (Scott's rule, `d = 2`). `P_d` is the exact
//! ring density. Each direction is a Monte Carlo average over draws from its
//! first argument (ring draws, and KDE draws = random sample + `N(0, H)`),
//! with both densities floored at `1e-12` inside the logarithm.
//!
//! The KDE over-smooths narrow modes, so even samples from the ring itself
//! score well above zero. Levels are estimator-dependent; compare trends.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{ring_log_density, sample_ring, RingSpec, Rng};
use crate::{Error, Result};

/// Largest problem the exact assignment solver accepts.
pub const WASSERSTEIN_BUDGET: usize = 2048;
/// Monte Carlo draws per direction of the symmetric KL.
pub const KL_DRAWS: usize = 10_000;
/// Stream id reserved for metric Monte Carlo when no generator is supplied.
pub const KL_STREAM: u64 = 16;
const DENSITY_FLOOR: f64 = 1e-12;

/// Gaussian KDE in the plane with a full bandwidth matrix.
#[derive(Clone, Debug)]
pub struct Kde2 {
    points: Vec<[f64; 2]>,
    /// Lower Cholesky factor of the bandwidth matrix.
    chol: [[f64; 2]; 2],
    /// Inverse bandwidth matrix, as (a, b, c) of [[a, b], [b, c]].
    inv: [f64; 3],
    log_norm: f64,
}

impl Kde2 {
    /// Scott's-rule KDE over the rows of `samples`.
    pub fn scott(samples: ArrayView2<f64>) -> Result<Self> {
        if samples.ncols() != 2 {
            return Err(Error::Shape(format!("expected 2 columns, got {}", samples.ncols())));
        }
        let n = samples.nrows();
        if n < 2 {
            return Err(Error::Degenerate(format!("need at least 2 samples, got {n}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("samples contain non-finite values".into()));
        }
        let nf = n as f64;
        let (mut mx, mut my) = (0.0, 0.0);
        for r in samples.rows() {
            mx += r[0];
            my += r[1];
        }
        mx /= nf;
        my /= nf;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for r in samples.rows() {
            let (dx, dy) = (r[0] - mx, r[1] - my);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        let s2 = nf.powf(-1.0 / 3.0) / (nf - 1.0);
        let (a, b, c) = (sxx * s2, sxy * s2, syy * s2);
        let det = a * c - b * b;
        let scale = a.abs().max(c.abs());
        if !(det > 1e-12 * scale * scale) || !(scale > 0.0) {
            return Err(Error::Degenerate("sample covariance is singular".into()));
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (c - l21 * l21).sqrt();
        Ok(Kde2 {
            points: samples.rows().into_iter().map(|r| [r[0], r[1]]).collect(),
            chol: [[l11, 0.0], [l21, l22]],
            inv: [c / det, -b / det, a / det],
            log_norm: -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - nf.ln(),
        })
    }

    /// Bandwidth matrix `H` as `[[a, b], [b, c]]`.
    pub fn bandwidth(&self) -> [[f64; 2]; 2] {
        let [[l11, _], [l21, l22]] = self.chol;
        [[l11 * l11, l11 * l21], [l11 * l21, l21 * l21 + l22 * l22]]
    }

    pub fn log_density(&self, x: [f64; 2]) -> f64 {
        let [a, b, c] = self.inv;
        let q = |p: &[f64; 2]| {
            let (dx, dy) = (x[0] - p[0], x[1] - p[1]);
            -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
        };
        let max = self.points.iter().map(q).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = self.points.iter().map(|p| (q(p) - max).exp()).sum();
        max + sum.ln() + self.log_norm
    }

    pub fn sample(&self, rng: &mut Rng) -> [f64; 2] {
        let p = self.points[rng.index(self.points.len())];
        let (z1, z2) = (rng.normal(), rng.normal());
        let [[l11, _], [l21, l22]] = self.chol;
        [p[0] + l11 * z1, p[1] + l21 * z1 + l22 * z2]
    }
}

fn floored_log(log_p: f64) -> f64 {
    log_p.max(DENSITY_FLOOR.ln())
}

/// `D_KL(P_d‖P_g) + D_KL(P_g‖P_d)` with the estimator described in the
/// module docs, `draws` Monte Carlo points per direction from `rng`.
pub fn symmetric_kl_with(samples: ArrayView2<f64>, spec: &RingSpec, rng: &mut Rng, draws: usize) -> Result<f64> {
    spec.validate()?;
    if samples.nrows() < 100 {
        return Err(Error::Shape(format!("symmetric KL needs at least 100 samples, got {}", samples.nrows())));
    }
    let kde = Kde2::scott(samples)?;
    let real = sample_ring(spec, draws, rng);
    let mut forward = 0.0;
    for r in real.rows() {
        let x = [r[0], r[1]];
        forward += floored_log(ring_log_density(spec, x)) - floored_log(kde.log_density(x));
    }
    let mut reverse = 0.0;
    for _ in 0..draws {
        let x = kde.sample(rng);
        reverse += floored_log(kde.log_density(x)) - floored_log(ring_log_density(spec, x));
    }
    Ok((forward + reverse) / draws as f64)
}

/// [`symmetric_kl_with`] using [`KL_DRAWS`] draws from the fixed stream
/// [`KL_STREAM`] of seed 0, so the same samples always score the same.
pub fn symmetric_kl(samples: ArrayView2<f64>, spec: &RingSpec) -> Result<f64> {
    let mut rng = Rng::with_stream(0, KL_STREAM);
    symmetric_kl_with(samples, spec, &mut rng, KL_DRAWS)
}

/// Minimum-cost perfect matching on a square cost matrix (shortest
/// augmenting paths with potentials, O(n³)). Returns `assignment[row] = col`.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols());
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

fn euclidean_costs(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let dx = a[[i, 0]] - b[[j, 0]];
        let dy = a[[i, 1]] - b[[j, 1]];
        dx.hypot(dy)
    })
}

/// Exact empirical 1-Wasserstein distance between two equal-size point sets:
/// the optimal matching cost divided by `n`.
pub fn wasserstein(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::SupportMismatch(a.nrows(), b.nrows()));
    }
    if a.ncols() != 2 || b.ncols() != 2 {
        return Err(Error::Shape("wasserstein expects two-column point sets".into()));
    }
    let n = a.nrows();
    if n > WASSERSTEIN_BUDGET {
        return Err(Error::Budget {
            size: n,
            budget: WASSERSTEIN_BUDGET,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let cost = euclidean_costs(a, b);
    let assignment = min_cost_assignment(&cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    Ok(total / n as f64)
}

/// Thresholds for [`mode_coverage`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageThresholds {
    /// A sample is high quality within this many standard deviations of its
    /// nearest center.
    pub sigmas: f64,
    /// A mode is covered when its high-quality samples make up at least this
    /// fraction of all samples.
    pub min_fraction: f64,
}

impl Default for CoverageThresholds {
    fn default() -> Self {
        CoverageThresholds {
            sigmas: 3.0,
            min_fraction: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    /// Samples whose nearest center is mode `k`.
    pub assigned: Vec<usize>,
    /// High-quality samples of mode `k`.
    pub high_quality: Vec<usize>,
    pub modes_covered: usize,
    pub high_quality_fraction: f64,
}

pub fn mode_coverage_with(samples: ArrayView2<f64>, spec: &RingSpec, th: CoverageThresholds) -> Result<ModeReport> {
    spec.validate()?;
    if samples.ncols() != 2 {
        return Err(Error::Shape(format!("expected 2 columns, got {}", samples.ncols())));
    }
    let centers = spec.centers();
    let radius = th.sigmas * spec.std_dev();
    let mut assigned = vec![0; spec.n_modes];
    let mut high_quality = vec![0; spec.n_modes];
    for r in samples.rows() {
        let mut best = (f64::INFINITY, 0);
        for (k, c) in centers.iter().enumerate() {
            let d = (r[0] - c[0]).hypot(r[1] - c[1]);
            if d < best.0 {
                best = (d, k);
            }
        }
        // NaN samples match no mode.
        if best.0.is_finite() {
            assigned[best.1] += 1;
            if best.0 <= radius {
                high_quality[best.1] += 1;
            }
        }
    }
    let n = samples.nrows().max(1) as f64;
    let modes_covered = high_quality.iter().filter(|&&h| h as f64 >= th.min_fraction * n).count();
    let hq: usize = high_quality.iter().sum();
    Ok(ModeReport {
        assigned,
        high_quality,
        modes_covered,
        high_quality_fraction: hq as f64 / n,
    })
}

/// [`mode_coverage_with`] at the default 3σ / 2% thresholds.
pub fn mode_coverage(samples: ArrayView2<f64>, spec: &RingSpec) -> Result<ModeReport> {
    mode_coverage_with(samples, spec, CoverageThresholds::default())
}
