//! f-divergences over finite supports.
//!
//! `D_f(P‖Q) = Σ_x Q(x)·f(P(x)/Q(x))`. Divergences that blow up (absolute
//! continuity fails for a superlinear `f`) are returned as `f64::INFINITY`
//! rather than as errors, so metric series stay well-formed.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::losses::{AlphaParam, LossFn, LossPair};
use crate::optimize::{self, GOLDEN_TOL, UNIT_POINTS};
use crate::{Error, Result};

/// Tolerance on `Σ p = 1`.
pub const SUM_TOL: f64 = 1e-12;

/// A probability vector over an indexed finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(DiscreteDistribution { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidDistribution("weights must be non-negative with a positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn check_support(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.len() == q.len() {
        Ok(())
    } else {
        Err(Error::SupportMismatch(p.len(), q.len()))
    }
}

/// Where a generator came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    ClosedFormAlpha,
    GenericSup,
    Kl,
    ReverseKl,
    CpeInduced,
    Custom,
}

type GeneratorFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// A convex `f` on `u ≥ 0` together with its growth rate `lim f(u)/u`.
///
/// `f(0)` is the right limit at zero. A `slope_at_infinity` of `None` means
/// `f` is treated as superlinear, so mass of `P` outside the support of `Q`
/// makes the divergence infinite.
#[derive(Clone)]
pub struct ConvexGenerator {
    kind: GeneratorKind,
    f: GeneratorFn,
    slope_at_infinity: Option<f64>,
}

impl fmt::Debug for ConvexGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexGenerator")
            .field("kind", &self.kind)
            .field("slope_at_infinity", &self.slope_at_infinity)
            .finish()
    }
}

impl ConvexGenerator {
    pub fn custom(
        f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
        slope_at_infinity: Option<f64>,
    ) -> Self {
        ConvexGenerator {
            kind: GeneratorKind::Custom,
            f: Arc::new(f),
            slope_at_infinity,
        }
    }

    /// `u log u`, giving `D_KL(P‖Q)`.
    pub fn kl() -> Self {
        ConvexGenerator {
            kind: GeneratorKind::Kl,
            f: Arc::new(|u| Ok(if u == 0.0 { 0.0 } else { u * u.ln() })),
            slope_at_infinity: None,
        }
    }

    /// `−log u`, giving `D_KL(Q‖P)`.
    pub fn reverse_kl() -> Self {
        ConvexGenerator {
            kind: GeneratorKind::ReverseKl,
            f: Arc::new(|u| Ok(-u.ln())),
            slope_at_infinity: Some(0.0),
        }
    }

    /// Closed-form `f_c^{α₁,α₂}`; requires `α₂ > α₁ > 0`, both away from 1.
    pub fn alpha_closed_form(alpha1: f64, alpha2: f64, c: f64) -> Result<Self> {
        Self::alpha_closed_form_shifted(alpha1, alpha2, c, 0.0)
    }

    pub(crate) fn alpha_closed_form_shifted(
        alpha1: f64,
        alpha2: f64,
        c: f64,
        exponent_shift: f64,
    ) -> Result<Self> {
        check_closed_form_args(alpha1, alpha2, c)?;
        // f(u) = -A u + (A - B) c^{e2} u^{e1}; superlinear exactly when e1 > 1, i.e. α₁ > 1.
        let slope = (alpha1 < 1.0).then(|| alpha1 / (1.0 - alpha1));
        Ok(ConvexGenerator {
            kind: GeneratorKind::ClosedFormAlpha,
            f: Arc::new(move |u| Ok(fc_closed_unchecked(u, alpha1, alpha2, c, exponent_shift))),
            slope_at_infinity: slope,
        })
    }

    /// `f_c` as a numerical supremum over the discriminator output (see [`fc_generic`]).
    pub fn generic_sup(pair: LossPair, c: f64) -> Result<Self> {
        check_positive("c", c)?;
        Ok(ConvexGenerator {
            kind: GeneratorKind::GenericSup,
            f: Arc::new(move |u| fc_generic(u, &pair, c)),
            slope_at_infinity: None,
        })
    }

    /// The generator induced by the α-loss used as a class-probability loss.
    pub fn cpe_induced(alpha: AlphaParam) -> Self {
        ConvexGenerator {
            kind: GeneratorKind::CpeInduced,
            f: Arc::new(move |u| cpe_induced_unchecked(u, alpha)),
            slope_at_infinity: None,
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn slope_at_infinity(&self) -> Option<f64> {
        self.slope_at_infinity
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("generator argument must be non-negative, got {u}")));
        }
        (self.f)(u)
    }
}

/// `D_f(P‖Q) = Σ Q(x) f(P(x)/Q(x))`.
///
/// Points with `P = Q = 0` contribute nothing; a point with `Q = 0 < P`
/// contributes `P·lim f(u)/u`, which is `+∞` for superlinear generators.
pub fn f_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution, f: &ConvexGenerator) -> Result<f64> {
    check_support(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        let term = if qi > 0.0 {
            qi * f.eval(pi / qi)?
        } else if pi > 0.0 {
            match f.slope_at_infinity {
                Some(s) => pi * s,
                None => f64::INFINITY,
            }
        } else {
            0.0
        };
        if term.is_nan() {
            return Err(Error::Domain("divergence term is undefined (∞ − ∞)".into()));
        }
        total += term;
    }
    Ok(total)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn check_closed_form_args(alpha1: f64, alpha2: f64, c: f64) -> Result<()> {
    check_positive("alpha1", alpha1)?;
    check_positive("alpha2", alpha2)?;
    check_positive("c", c)?;
    if alpha2 <= alpha1 {
        return Err(Error::Constraint(format!(
            "closed form needs alpha2 > alpha1, got alpha1 = {alpha1}, alpha2 = {alpha2}"
        )));
    }
    if alpha1 == 1.0 || alpha2 == 1.0 {
        return Err(Error::Domain("closed form is undefined at alpha = 1; use the limit check".into()));
    }
    Ok(())
}

/// Exponents `(e₁, e₂) = ((α₁α₂−α₁)/(α₂−α₁), (α₁α₂−α₂)/(α₂−α₁))`.
pub fn fc_exponents(alpha1: f64, alpha2: f64) -> (f64, f64) {
    let d = alpha2 - alpha1;
    ((alpha1 * alpha2 - alpha1) / d, (alpha1 * alpha2 - alpha2) / d)
}

fn fc_closed_unchecked(u: f64, alpha1: f64, alpha2: f64, c: f64, exponent_shift: f64) -> f64 {
    let (e1, e2) = fc_exponents(alpha1, alpha2);
    let e1 = e1 + exponent_shift;
    let a = alpha1 / (alpha1 - 1.0);
    let b = alpha2 / (alpha2 - 1.0);
    if u == 0.0 {
        // Right limit; avoids ∞ − ∞ when e1 < 0.
        let w = c.powf(e2) * 0f64.powf(e1);
        return if w == 0.0 { 0.0 } else { (a - b) * w };
    }
    let w = c.powf(e2) * u.powf(e1);
    -a * (u - w) - b * w
}

/// `f_c^{α₁,α₂}(u) = −α₁/(α₁−1)·(u − c^{e₂}u^{e₁}) − α₂/(α₂−1)·c^{e₂}u^{e₁}`.
pub fn fc_closed_form(u: f64, alpha1: f64, alpha2: f64, c: f64) -> Result<f64> {
    check_closed_form_args(alpha1, alpha2, c)?;
    check_positive("u", u)?;
    Ok(fc_closed_unchecked(u, alpha1, alpha2, c, 0.0))
}

/// Per-point supremum of the generalized value function, normalized by `c`:
///
/// `f_c(u) = sup_{t>0} ( −u·ℓ₁(t) + (ℓ₂(t) − 1)/c )`.
///
/// The `−1` carried by the value function's reject terms is kept inside the
/// supremum, so `c·D_{f_c}(P_d‖P_g)` is exactly the optimum over the first
/// discriminator. For an α pair this differs from [`fc_closed_form`] by the
/// constant `1/(c(α₂−1))`, which the closed form leaves out.
///
/// Computed by a 2001-point log scan of `t ∈ [1e-6, 1e6]` plus golden-section
/// refinement (see [`optimize::sup_positive`]).
pub fn fc_generic(u: f64, pair: &LossPair, c: f64) -> Result<f64> {
    check_positive("c", c)?;
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::Domain(format!("u must be non-negative, got {u}")));
    }
    let e = optimize::sup_positive(|t| -u * pair.l1.eval(t) + (pair.l2.eval(t) - 1.0) / c)?;
    Ok(e.value)
}

/// `A_α(P‖Q) = α/(α−1)·(Σ (p^α + q^α)^{1/α} − 2^{1/α})`, for `α > 0`, `α ≠ 1`.
pub fn arimoto_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    check_support(p, q)?;
    check_positive("alpha", alpha)?;
    if alpha == 1.0 {
        return Err(Error::Domain("Arimoto divergence is defined here only for alpha != 1".into()));
    }
    let inv = 1.0 / alpha;
    let sum: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&a, &b)| {
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            if hi == 0.0 {
                0.0
            } else {
                // (hi^α + lo^α)^{1/α} = hi·(1 + (lo/hi)^α)^{1/α}; no underflow for large α.
                hi * (1.0 + (lo / hi).powf(alpha)).powf(inv)
            }
        })
        .sum();
    Ok(alpha / (alpha - 1.0) * (sum - 2f64.powf(inv)))
}

fn cpe_induced_unchecked(u: f64, alpha: AlphaParam) -> Result<f64> {
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::Domain(format!("u must be non-negative, got {u}")));
    }
    let loss = LossFn::Alpha(alpha);
    let e = optimize::unit_interval_min(|p| loss.eval(1.0 - p) + u * loss.eval(p), UNIT_POINTS, GOLDEN_TOL);
    Ok(-e.value)
}

/// `f(u) = −inf_{p∈[0,1]} (ℓ_α(1−p) + u·ℓ_α(p))`, by a 1001-point scan plus
/// golden-section refinement.
///
/// `D_f(P‖Q) − f(1)` is the Arimoto divergence of order α.
pub fn cpe_induced_f(u: f64, alpha: AlphaParam) -> Result<f64> {
    check_positive("u", u)?;
    AlphaParam::new(alpha.value())?;
    cpe_induced_unchecked(u, alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KlKind {
    Forward,
    Reverse,
    Symmetric,
}

fn kl_forward(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// Forward `D_KL(P‖Q)`, reverse `D_KL(Q‖P)`, or their sum.
pub fn kl_family(p: &DiscreteDistribution, q: &DiscreteDistribution, kind: KlKind) -> Result<f64> {
    check_support(p, q)?;
    let (p, q) = (p.probs(), q.probs());
    Ok(match kind {
        KlKind::Forward => kl_forward(p, q),
        KlKind::Reverse => kl_forward(q, p),
        KlKind::Symmetric => kl_forward(p, q) + kl_forward(q, p),
    })
}
