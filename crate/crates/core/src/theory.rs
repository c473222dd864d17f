//! Closed-form results for dual-discriminator games over finite supports, and
//! the brute-force routes that check them.
//!
//! The value function of the generalized game is
//!
//! ```text
//! V = c₁·E_{P_d}[−ℓ₁(D₁)] + E_{P_g}[ℓ₂(D₁) − 1] + E_{P_d}[ℓ₂(D₂) − 1] + c₂·E_{P_g}[−ℓ₁(D₂)]
//! ```
//!
//! For `ℓ₁ = ℓ_{α₁}`, `ℓ₂ = ℓ_{α₂}` with `α₂ > α₁` the optimal discriminators
//! are `D₁* = (c₁P_d/P_g)^k`, `D₂* = (c₂P_g/P_d)^k`, `k = α₁α₂/(α₂−α₁)`.
//!
//! Substituting them gives `c₁·D_{f_{c₁}}(P_d‖P_g) + c₂·D_{f_{c₂}}(P_g‖P_d)`
//! with the closed-form `f_c` of [`fc_closed_form`], **plus the constant
//! `2/(α₂−1)`** contributed by the `−1` terms. The closed-form expressions
//! here ([`theorem1_rhs`], [`theorem1_min_value`]) leave that constant out,
//! and [`closed_form_gap`] returns it. It vanishes as `α₂ → ∞`.

use serde::{Deserialize, Serialize};

use crate::data::Rng;
use crate::divergences::{f_divergence, fc_exponents, kl_family, ConvexGenerator, DiscreteDistribution, KlKind};
use crate::losses::LossPair;
use crate::optimize;
use crate::{Error, Result};

/// Distributions, weights and losses of one game instance.
#[derive(Clone, Debug)]
pub struct GanTheorySetting {
    pub pd: DiscreteDistribution,
    pub pg: DiscreteDistribution,
    pub c1: f64,
    pub c2: f64,
    pub pair: LossPair,
}

impl GanTheorySetting {
    pub fn new(pd: DiscreteDistribution, pg: DiscreteDistribution, c1: f64, c2: f64, pair: LossPair) -> Result<Self> {
        if pd.len() != pg.len() {
            return Err(Error::SupportMismatch(pd.len(), pg.len()));
        }
        for (name, c) in [("c1", c1), ("c2", c2)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {c}")));
            }
        }
        Ok(GanTheorySetting { pd, pg, c1, c2, pair })
    }

    pub fn with_pair(&self, pair: LossPair) -> Self {
        GanTheorySetting { pair, ..self.clone() }
    }

    pub fn with_pg(&self, pg: DiscreteDistribution) -> Result<Self> {
        Self::new(self.pd.clone(), pg, self.c1, self.c2, self.pair.clone())
    }
}

/// One discriminator's output at each support point. Points where the
/// optimal output divides by a zero density hold `+∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorField(pub Vec<f64>);

impl DiscriminatorField {
    pub fn constant(n: usize, value: f64) -> Self {
        DiscriminatorField(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

fn check_alpha_order(alpha1: f64, alpha2: f64) -> Result<()> {
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::Domain(format!("alphas must be positive, got {alpha1}, {alpha2}")));
    }
    if alpha2 <= alpha1 {
        return Err(Error::Constraint(format!(
            "optimal discriminators need alpha2 > alpha1, got alpha1 = {alpha1}, alpha2 = {alpha2}"
        )));
    }
    Ok(())
}

/// `α₁α₂/(α₂−α₁)`, the exponent of the optimal discriminators.
pub fn discriminator_exponent(alpha1: f64, alpha2: f64) -> f64 {
    alpha1 * alpha2 / (alpha2 - alpha1)
}

fn ratio_power(num: f64, den: f64, k: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).powf(k)
    }
}

/// `D₁*(x) = (c₁P_d/P_g)^k`, `D₂*(x) = (c₂P_g/P_d)^k`, `k = α₁α₂/(α₂−α₁)`.
pub fn optimal_discriminators(
    s: &GanTheorySetting,
    alpha1: f64,
    alpha2: f64,
) -> Result<(DiscriminatorField, DiscriminatorField)> {
    check_alpha_order(alpha1, alpha2)?;
    let k = discriminator_exponent(alpha1, alpha2);
    let (pd, pg) = (s.pd.probs(), s.pg.probs());
    let d1 = pd.iter().zip(pg).map(|(&d, &g)| ratio_power(s.c1 * d, g, k)).collect();
    let d2 = pd.iter().zip(pg).map(|(&d, &g)| ratio_power(s.c2 * g, d, k)).collect();
    Ok((DiscriminatorField(d1), DiscriminatorField(d2)))
}

/// Maximizer and maximum of `h(t) = a·(−ℓ₁(t)) + b·(ℓ₂(t) − 1)` over `t > 0`,
/// by log-grid scan plus golden section. Reports [`Error::Unbounded`] when
/// the maximum sits on the edge of the admissible range.
pub fn pointwise_bruteforce_opt(a: f64, b: f64, pair: &LossPair) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("weights must be positive, got a = {a}, b = {b}")));
    }
    let e = optimize::sup_positive(|t| a * -pair.l1.eval(t) + b * (pair.l2.eval(t) - 1.0))?;
    Ok((e.arg, e.value))
}

/// The value function as a finite sum. Zero-mass points contribute nothing.
pub fn value_function(s: &GanTheorySetting, d1: &DiscriminatorField, d2: &DiscriminatorField) -> Result<f64> {
    let n = s.pd.len();
    if d1.0.len() != n || d2.0.len() != n {
        return Err(Error::SupportMismatch(n, d1.0.len().min(d2.0.len())));
    }
    if let Some(v) = d1.0.iter().chain(&d2.0).find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("discriminator outputs must be positive, got {v}")));
    }
    let (l1, l2) = (&s.pair.l1, &s.pair.l2);
    let weighted = |w: f64, v: f64| if w == 0.0 { 0.0 } else { w * v };
    let mut total = 0.0;
    for i in 0..n {
        let (pd, pg) = (s.pd.probs()[i], s.pg.probs()[i]);
        let (t1, t2) = (d1.0[i], d2.0[i]);
        total += weighted(s.c1 * pd, -l1.eval(t1))
            + weighted(pg, l2.eval(t1) - 1.0)
            + weighted(pd, l2.eval(t2) - 1.0)
            + weighted(s.c2 * pg, -l1.eval(t2));
    }
    Ok(total)
}

pub(crate) fn theorem1_rhs_shifted(s: &GanTheorySetting, alpha1: f64, alpha2: f64, exponent_shift: f64) -> Result<f64> {
    check_alpha_order(alpha1, alpha2)?;
    let f1 = ConvexGenerator::alpha_closed_form_shifted(alpha1, alpha2, s.c1, exponent_shift)?;
    let f2 = ConvexGenerator::alpha_closed_form_shifted(alpha1, alpha2, s.c2, exponent_shift)?;
    Ok(s.c1 * f_divergence(&s.pd, &s.pg, &f1)? + s.c2 * f_divergence(&s.pg, &s.pd, &f2)?)
}

/// `c₁·D_{f_{c₁}}(P_d‖P_g) + c₂·D_{f_{c₂}}(P_g‖P_d)` with the closed-form `f_c`.
pub fn theorem1_rhs(s: &GanTheorySetting, alpha1: f64, alpha2: f64) -> Result<f64> {
    theorem1_rhs_shifted(s, alpha1, alpha2, 0.0)
}

/// `−α₁/(α₁−1)(c₁+c₂) + (α₁/(α₁−1) − α₂/(α₂−1))(c₁^{e₁} + c₂^{e₁})`, the
/// closed-form minimum over generators, attained at `P_g = P_d`.
pub fn theorem1_min_value(c1: f64, c2: f64, alpha1: f64, alpha2: f64) -> Result<f64> {
    check_alpha_order(alpha1, alpha2)?;
    if alpha1 == 1.0 || alpha2 == 1.0 || alpha2.is_infinite() {
        return Err(Error::Domain("closed-form minimum is only defined away from the limit points".into()));
    }
    let (e1, _) = fc_exponents(alpha1, alpha2);
    let a = alpha1 / (alpha1 - 1.0);
    let b = alpha2 / (alpha2 - 1.0);
    Ok(-a * (c1 + c2) + (a - b) * (c1.powf(e1) + c2.powf(e1)))
}

/// `V(D₁*, D₂*, G) − theorem1_rhs = 2/(α₂−1)`: the constant from the two
/// `E[ℓ₂(·) − 1]` terms that the closed form omits.
pub fn closed_form_gap(alpha2: f64) -> f64 {
    2.0 / (alpha2 - 1.0)
}

/// `c₁·D_{f_{c₁}}(P_d‖P_g) + c₂·D_{f_{c₂}}(P_g‖P_d)` with `f_c` computed as a
/// numerical supremum ([`crate::divergences::fc_generic`]) for the setting's
/// loss pair.
///
/// The reverse term is evaluated through the perspective
/// `f'_{c}(u) = u·f_{c}(1/u)`, i.e. `Σ P_g·f'_{c₂}(P_d/P_g)`.
pub fn theorem2_rhs(s: &GanTheorySetting) -> Result<f64> {
    let f1 = ConvexGenerator::generic_sup(s.pair.clone(), s.c1)?;
    let f2 = ConvexGenerator::generic_sup(s.pair.clone(), s.c2)?;
    let forward = f_divergence(&s.pd, &s.pg, &f1)?;
    let mut reverse = 0.0;
    for (&pd, &pg) in s.pd.probs().iter().zip(s.pg.probs()) {
        reverse += match (pd > 0.0, pg > 0.0) {
            (true, true) => {
                let u = pd / pg;
                pg * u * f2.eval(1.0 / u)?
            }
            (false, true) => f64::INFINITY,
            (true, false) => pd * f2.eval(0.0)?,
            (false, false) => 0.0,
        };
    }
    Ok(s.c1 * forward + s.c2 * reverse)
}

/// Supremum of the value function over both discriminators, computed point by
/// point with [`pointwise_bruteforce_opt`]. Independent of any `f_c`.
pub fn sup_value_bruteforce(s: &GanTheorySetting) -> Result<f64> {
    let mut total = 0.0;
    for (&pd, &pg) in s.pd.probs().iter().zip(s.pg.probs()) {
        if pd > 0.0 && pg > 0.0 {
            total += pointwise_bruteforce_opt(s.c1 * pd, pg, &s.pair)?.1;
            total += pointwise_bruteforce_opt(s.c2 * pg, pd, &s.pair)?.1;
        } else if pd > 0.0 || pg > 0.0 {
            return Err(Error::Domain("brute-force supremum needs full-support distributions".into()));
        }
    }
    Ok(total)
}

/// One rung of the limit ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitStep {
    pub alpha1: f64,
    pub alpha2: f64,
    pub forward: f64,
    pub reverse: f64,
    pub forward_gap: f64,
    pub reverse_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// `c₁ log c₁ − c₁ + c₁·D_KL(P_d‖P_g)`
    pub forward_target: f64,
    /// `c₂ log c₂ − c₂ + c₂·D_KL(P_g‖P_d)`
    pub reverse_target: f64,
    pub steps: Vec<LimitStep>,
}

impl LimitReport {
    /// Larger of the two gaps at the last rung.
    pub fn final_gap(&self) -> f64 {
        self.steps.last().map_or(f64::INFINITY, |s| s.forward_gap.max(s.reverse_gap))
    }

    /// True when both gaps shrink at every rung.
    pub fn monotone(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| w[1].forward_gap <= w[0].forward_gap && w[1].reverse_gap <= w[0].reverse_gap)
    }
}

/// `(α₁, α₂)` ladder towards `(1, ∞)`.
pub const LIMIT_SCHEDULE: [(f64, f64); 4] = [(1.1, 10.0), (1.01, 100.0), (1.001, 1e4), (1.0 + 1e-5, 1e6)];

/// Evaluates `c₁·D_{f_{c₁}}(P_d‖P_g)` and `c₂·D_{f_{c₂}}(P_g‖P_d)` with the
/// closed-form `f_c` along [`LIMIT_SCHEDULE`], against their D2 GAN limits.
pub fn d2gan_limit_check(s: &GanTheorySetting) -> Result<LimitReport> {
    let forward_target = s.c1 * s.c1.ln() - s.c1 + s.c1 * kl_family(&s.pd, &s.pg, KlKind::Forward)?;
    let reverse_target = s.c2 * s.c2.ln() - s.c2 + s.c2 * kl_family(&s.pg, &s.pd, KlKind::Forward)?;
    let mut steps = Vec::with_capacity(LIMIT_SCHEDULE.len());
    for &(alpha1, alpha2) in &LIMIT_SCHEDULE {
        let f1 = ConvexGenerator::alpha_closed_form(alpha1, alpha2, s.c1)?;
        let f2 = ConvexGenerator::alpha_closed_form(alpha1, alpha2, s.c2)?;
        let forward = s.c1 * f_divergence(&s.pd, &s.pg, &f1)?;
        let reverse = s.c2 * f_divergence(&s.pg, &s.pd, &f2)?;
        steps.push(LimitStep {
            alpha1,
            alpha2,
            forward,
            reverse,
            forward_gap: (forward - forward_target).abs(),
            reverse_gap: (reverse - reverse_target).abs(),
        });
    }
    Ok(LimitReport {
        forward_target,
        reverse_target,
        steps,
    })
}

/// Root in `(0, 1)` of `D^{α₂} = (1−D)^{α₁}`: the optimal single
/// discriminator at `P_g = P_d` when the real and fake terms use α-losses of
/// different orders. Bisection to `1e-12`.
pub fn prop1_root(alpha1: f64, alpha2: f64) -> Result<f64> {
    if !(alpha1 > 0.0 && alpha2 > 0.0 && alpha1.is_finite() && alpha2.is_finite()) {
        return Err(Error::Domain(format!("alphas must be positive, got {alpha1}, {alpha2}")));
    }
    let g = |d: f64| d.powf(alpha2) - (1.0 - d).powf(alpha1);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Dirichlet(1, …, 1) draw with entries floored at `floor` and renormalized.
pub fn random_distribution(rng: &mut Rng, n: usize, floor: f64) -> DiscreteDistribution {
    let w: Vec<f64> = (0..n).map(|_| rng.exponential()).collect();
    let sum: f64 = w.iter().sum();
    let floored: Vec<f64> = w.iter().map(|x| (x / sum).max(floor)).collect();
    DiscreteDistribution::from_weights(&floored).expect("positive weights")
}

/// Floor used for randomly drawn settings.
pub const RANDOM_FLOOR: f64 = 1e-4;
