//! The α-loss family on positive reals and loss pairs for the generalized
//! dual-discriminator value function.
//!
//! `ℓ_α(t) = α/(α−1)·(1 − t^((α−1)/α))` for `t > 0`, with the two limits
//! `ℓ_1(t) = −log t` and `ℓ_∞(t) = 1 − t` dispatched exactly.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower edge of the loss-input clamp.
pub const T_MIN: f64 = 1e-12;
/// Upper edge of the loss-input clamp.
pub const T_MAX: f64 = 1e12;

/// Clamps a loss input into `[T_MIN, T_MAX]`. NaN passes through.
#[inline]
pub fn clamp_input(t: f64) -> f64 {
    if t < T_MIN {
        T_MIN
    } else if t > T_MAX {
        T_MAX
    } else {
        t
    }
}

#[inline]
fn in_clamp_range(t: f64) -> bool {
    (T_MIN..=T_MAX).contains(&t)
}

/// The tuning parameter of the α-loss.
///
/// `One` and `Infinity` are the exact limit cases; `Finite` always goes
/// through the general formula, even when it is numerically close to a limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AlphaParam {
    One,
    Infinity,
    Finite(f64),
}

impl AlphaParam {
    /// Builds a parameter from a number. `1.0` and `+∞` map to the symbolic
    /// cases; everything else must be a finite positive number.
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == 1.0 {
            Ok(AlphaParam::One)
        } else if alpha == f64::INFINITY {
            Ok(AlphaParam::Infinity)
        } else if alpha.is_finite() && alpha > 0.0 {
            Ok(AlphaParam::Finite(alpha))
        } else {
            Err(Error::Domain(format!("alpha must be positive, got {alpha}")))
        }
    }

    /// Numeric value (`1.0` or `+∞` for the symbolic cases).
    pub fn value(self) -> f64 {
        match self {
            AlphaParam::One => 1.0,
            AlphaParam::Infinity => f64::INFINITY,
            AlphaParam::Finite(a) => a,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            AlphaParam::Finite(a) if !(a.is_finite() && a > 0.0) => {
                Err(Error::Domain(format!("alpha must be positive, got {a}")))
            }
            _ => Ok(self),
        }
    }
}

impl fmt::Display for AlphaParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaParam::One => write!(f, "1"),
            AlphaParam::Infinity => write!(f, "inf"),
            AlphaParam::Finite(a) => write!(f, "{a}"),
        }
    }
}

// Unchecked kernels; inputs are already clamped and alpha validated.

#[inline]
fn alpha_eval(alpha: AlphaParam, t: f64) -> f64 {
    match alpha {
        AlphaParam::One => -t.ln(),
        AlphaParam::Infinity => 1.0 - t,
        AlphaParam::Finite(a) => {
            // 1 - t^e = -expm1(e ln t) keeps precision for α near 1.
            let e = (a - 1.0) / a;
            -(a / (a - 1.0)) * (e * t.ln()).exp_m1()
        }
    }
}

#[inline]
fn alpha_deriv(alpha: AlphaParam, t: f64) -> f64 {
    match alpha {
        AlphaParam::One => -1.0 / t,
        AlphaParam::Infinity => -1.0,
        AlphaParam::Finite(a) => -(-t.ln() / a).exp(),
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("loss input must be positive, got {t}")))
    }
}

/// `ℓ_α(t)`, with `t` clamped to `[T_MIN, T_MAX]`.
pub fn alpha_loss(alpha: AlphaParam, t: f64) -> Result<f64> {
    let alpha = alpha.validate()?;
    check_t(t)?;
    Ok(alpha_eval(alpha, clamp_input(t)))
}

/// `dℓ_α/dt = −t^(−1/α)`; zero outside the clamp range.
pub fn alpha_loss_deriv(alpha: AlphaParam, t: f64) -> Result<f64> {
    let alpha = alpha.validate()?;
    check_t(t)?;
    Ok(if in_clamp_range(t) {
        alpha_deriv(alpha, t)
    } else {
        0.0
    })
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied loss with its own derivative.
#[derive(Clone)]
pub struct CustomLoss {
    name: String,
    eval: ScalarFn,
    deriv: ScalarFn,
}

impl CustomLoss {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CustomLoss {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLoss").field("name", &self.name).finish()
    }
}

/// A scalar loss on positive reals.
#[derive(Clone, Debug)]
pub enum LossFn {
    Alpha(AlphaParam),
    /// `−log t`
    NegLog,
    /// `1 − t`
    OneMinusT,
    Custom(CustomLoss),
}

impl LossFn {
    pub fn alpha(alpha: f64) -> Result<Self> {
        Ok(LossFn::Alpha(AlphaParam::new(alpha)?))
    }

    /// Value at `t`, after clamping `t` into `[T_MIN, T_MAX]`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let t = clamp_input(t);
        match self {
            LossFn::Alpha(a) => alpha_eval(*a, t),
            LossFn::NegLog => -t.ln(),
            LossFn::OneMinusT => 1.0 - t,
            LossFn::Custom(c) => (c.eval)(t),
        }
    }

    /// Derivative at `t`. Zero outside the clamp range, where `eval` is flat.
    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        if !in_clamp_range(t) {
            return if t.is_nan() { f64::NAN } else { 0.0 };
        }
        match self {
            LossFn::Alpha(a) => alpha_deriv(*a, t),
            LossFn::NegLog => -1.0 / t,
            LossFn::OneMinusT => -1.0,
            LossFn::Custom(c) => (c.deriv)(t),
        }
    }

    /// The α this loss corresponds to, if it is a member of the α family.
    pub fn alpha_value(&self) -> Option<f64> {
        match self {
            LossFn::Alpha(a) => Some(a.value()),
            LossFn::NegLog => Some(1.0),
            LossFn::OneMinusT => Some(f64::INFINITY),
            LossFn::Custom(_) => None,
        }
    }

    pub fn descriptor(&self) -> Option<LossDescriptor> {
        match self {
            LossFn::Alpha(AlphaParam::Finite(a)) => Some(LossDescriptor::Alpha { alpha: *a }),
            LossFn::Alpha(AlphaParam::One) | LossFn::NegLog => Some(LossDescriptor::NegLog {}),
            LossFn::Alpha(AlphaParam::Infinity) | LossFn::OneMinusT => {
                Some(LossDescriptor::OneMinus {})
            }
            LossFn::Custom(_) => None,
        }
    }
}

/// JSON form of a loss: `{"kind": "alpha", "alpha": 0.6}`, `{"kind": "neglog"}`
/// or `{"kind": "oneminus"}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossDescriptor {
    Alpha { alpha: f64 },
    NegLog {},
    OneMinus {},
}

impl LossDescriptor {
    pub fn build(&self) -> Result<LossFn> {
        match *self {
            LossDescriptor::Alpha { alpha } => {
                if alpha.is_finite() && alpha > 0.0 {
                    // Numeric alpha stays on the general formula unless it is exactly 1.
                    Ok(LossFn::Alpha(AlphaParam::new(alpha)?))
                } else {
                    Err(Error::Config(format!(
                        "alpha loss needs a finite positive alpha, got {alpha}"
                    )))
                }
            }
            LossDescriptor::NegLog {} => Ok(LossFn::NegLog),
            LossDescriptor::OneMinus {} => Ok(LossFn::OneMinusT),
        }
    }
}

/// Descriptor for a `(ℓ₁, ℓ₂)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossPairDescriptor {
    pub l1: LossDescriptor,
    pub l2: LossDescriptor,
}

/// `ℓ₁` scores the discriminator on the samples it should reward, `ℓ₂` on the
/// samples it should reject.
#[derive(Clone, Debug)]
pub struct LossPair {
    pub l1: LossFn,
    pub l2: LossFn,
}

impl LossPair {
    pub fn new(l1: LossFn, l2: LossFn) -> Self {
        LossPair { l1, l2 }
    }

    /// `(ℓ_{α₁}, ℓ_{α₂})`.
    pub fn alpha(alpha1: f64, alpha2: f64) -> Result<Self> {
        Ok(LossPair::new(LossFn::alpha(alpha1)?, LossFn::alpha(alpha2)?))
    }

    /// `(−log t, 1 − t)`, the D2 GAN losses.
    pub fn d2gan() -> Self {
        LossPair::new(LossFn::NegLog, LossFn::OneMinusT)
    }

    /// The `(α₁, α₂)` of a pair drawn from the α family.
    pub fn alphas(&self) -> Option<(f64, f64)> {
        Some((self.l1.alpha_value()?, self.l2.alpha_value()?))
    }

    /// True when the pair is in the α family but `α₂ ≤ α₁`, so the closed-form
    /// optimal discriminators do not apply.
    pub fn violates_alpha_order(&self) -> bool {
        matches!(self.alphas(), Some((a1, a2)) if a2 <= a1)
    }

    pub fn descriptor(&self) -> Option<LossPairDescriptor> {
        Some(LossPairDescriptor {
            l1: self.l1.descriptor()?,
            l2: self.l2.descriptor()?,
        })
    }
}

/// Builds a loss pair from its descriptor.
pub fn make_loss_pair(spec: &LossPairDescriptor) -> Result<LossPair> {
    Ok(LossPair::new(spec.l1.build()?, spec.l2.build()?))
}

/// Parses a pair descriptor from JSON, e.g.
/// `{"l1": {"kind": "alpha", "alpha": 0.6}, "l2": {"kind": "alpha", "alpha": 0.9}}`.
pub fn parse_loss_pair(json: &str) -> Result<LossPair> {
    let spec: LossPairDescriptor =
        serde_json::from_str(json).map_err(|e| Error::Config(format!("loss pair: {e}")))?;
    make_loss_pair(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(a: f64) -> AlphaParam {
        AlphaParam::Finite(a)
    }

    #[test]
    fn alpha_loss_examples() {
        assert!((alpha_loss(fin(0.5), 2.0).unwrap() - (-0.5)).abs() < 1e-15);
        for a in [fin(0.3), fin(0.5), fin(2.0), fin(7.0), AlphaParam::One, AlphaParam::Infinity] {
            assert_eq!(alpha_loss(a, 1.0).unwrap(), 0.0);
        }
        assert_eq!(alpha_loss(AlphaParam::Infinity, 3.0).unwrap(), -2.0);
        assert_eq!(alpha_loss(AlphaParam::One, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn alpha_loss_deriv_examples() {
        assert_eq!(alpha_loss_deriv(AlphaParam::One, 4.0).unwrap(), -0.25);
        assert!((alpha_loss_deriv(fin(0.5), 2.0).unwrap() - (-0.25)).abs() < 1e-15);
        assert_eq!(alpha_loss_deriv(AlphaParam::Infinity, 7.0).unwrap(), -1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(alpha_loss(fin(0.5), 0.0).is_err());
        assert!(alpha_loss(fin(0.5), -1.0).is_err());
        assert!(alpha_loss(fin(-0.5), 1.0).is_err());
        assert!(alpha_loss(fin(0.0), 1.0).is_err());
        assert!(alpha_loss_deriv(fin(0.5), -2.0).is_err());
        assert!(AlphaParam::new(0.0).is_err());
        assert!(AlphaParam::new(f64::NAN).is_err());
        assert_eq!(AlphaParam::new(1.0).unwrap(), AlphaParam::One);
        assert_eq!(AlphaParam::new(f64::INFINITY).unwrap(), AlphaParam::Infinity);
    }

    #[test]
    fn continuity_in_alpha() {
        for &t in &[0.1, 0.5, 1.0, 2.0, 10.0] {
            let neglog = -f64::ln(t);
            for a in [1.0 - 1e-6, 1.0 + 1e-6] {
                let v = alpha_loss(fin(a), t).unwrap();
                assert!((v - neglog).abs() < 1e-4, "a={a} t={t}: {v} vs {neglog}");
            }
            let v = alpha_loss(fin(1e8), t).unwrap();
            assert!((v - (1.0 - t)).abs() < 1e-4 * (1.0 + t), "t={t}: {v}");
        }
    }

    fn log_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn derivative_matches_central_differences() {
        let losses = [
            LossFn::alpha(0.3).unwrap(),
            LossFn::alpha(0.6).unwrap(),
            LossFn::alpha(0.9).unwrap(),
            LossFn::alpha(1.5).unwrap(),
            LossFn::alpha(4.0).unwrap(),
            LossFn::NegLog,
            LossFn::OneMinusT,
        ];
        for loss in &losses {
            for &t in &log_grid(41, 1e-3, 1e3) {
                let h = 1e-5 * t;
                let fd = (loss.eval(t + h) - loss.eval(t - h)) / (2.0 * h);
                let d = loss.deriv(t);
                let rel = (fd - d).abs() / d.abs().max(1e-300);
                // Far out in the tail the loss is a constant minus a tiny term, and
                // the difference quotient carries roundoff of order eps·|ℓ|/h.
                let roundoff = 1e3 * f64::EPSILON * loss.eval(t).abs() / h;
                assert!(rel < 1e-6 || (fd - d).abs() < roundoff, "{loss:?} t={t}: fd={fd} d={d} rel={rel}");
            }
        }
    }

    #[test]
    fn finite_on_clamp_range_and_decreasing() {
        let losses = [
            LossFn::alpha(0.2).unwrap(),
            LossFn::alpha(0.6).unwrap(),
            LossFn::alpha(0.9).unwrap(),
            LossFn::alpha(3.0).unwrap(),
            LossFn::NegLog,
            LossFn::OneMinusT,
        ];
        for loss in &losses {
            for &t in &log_grid(121, T_MIN, T_MAX) {
                assert!(loss.eval(t).is_finite(), "{loss:?} at {t}");
                let d = loss.deriv(t);
                assert!(d.is_finite() && d < 0.0, "{loss:?} deriv at {t} = {d}");
            }
        }
    }

    #[test]
    fn clamp_flattens_loss() {
        let l = LossFn::alpha(0.6).unwrap();
        assert_eq!(l.eval(1e-20), l.eval(T_MIN));
        assert_eq!(l.eval(0.0), l.eval(T_MIN));
        assert_eq!(l.eval(1e20), l.eval(T_MAX));
        assert_eq!(l.deriv(1e-20), 0.0);
        assert_eq!(l.deriv(1e20), 0.0);
    }

    #[test]
    fn custom_loss_uses_supplied_derivative() {
        let sq = LossFn::Custom(CustomLoss::new("square", |t| (t - 1.0).powi(2), |t| 2.0 * (t - 1.0)));
        assert_eq!(sq.eval(3.0), 4.0);
        assert_eq!(sq.deriv(3.0), 4.0);
        assert!(sq.descriptor().is_none());
    }

    #[test]
    fn loss_pair_descriptors() {
        let p = parse_loss_pair(
            r#"{"l1": {"kind": "alpha", "alpha": 0.6}, "l2": {"kind": "alpha", "alpha": 0.9}}"#,
        )
        .unwrap();
        assert_eq!(p.alphas(), Some((0.6, 0.9)));
        assert!(!p.violates_alpha_order());

        let d2 = parse_loss_pair(r#"{"l1": {"kind": "neglog"}, "l2": {"kind": "oneminus"}}"#).unwrap();
        assert!(matches!(d2.l1, LossFn::NegLog));
        assert!(matches!(d2.l2, LossFn::OneMinusT));
        assert_eq!(d2.alphas(), Some((1.0, f64::INFINITY)));

        let eq = LossPair::alpha(0.5, 0.5).unwrap();
        assert!(eq.violates_alpha_order());

        for bad in [
            r#"{"l1": {"kind": "alpha"}, "l2": {"kind": "neglog"}}"#,
            r#"{"l1": {"kind": "alpha", "alpha": -1}, "l2": {"kind": "neglog"}}"#,
            r#"{"l1": {"kind": "hinge"}, "l2": {"kind": "neglog"}}"#,
            r#"{"l1": {"kind": "neglog", "alpha": 2}, "l2": {"kind": "neglog"}}"#,
            r#"{"l1": {"kind": "neglog"}}"#,
            r#"not json"#,
        ] {
            assert!(parse_loss_pair(bad).is_err(), "accepted {bad}");
        }
    }

    #[test]
    fn descriptor_json_shape() {
        let d = LossDescriptor::Alpha { alpha: 0.6 };
        assert_eq!(serde_json::to_string(&d).unwrap(), r#"{"kind":"alpha","alpha":0.6}"#);
        assert_eq!(
            serde_json::to_string(&LossDescriptor::OneMinus {}).unwrap(),
            r#"{"kind":"oneminus"}"#
        );
    }
}
