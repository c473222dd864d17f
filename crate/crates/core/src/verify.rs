//! Randomized checks of the closed-form theory against brute force.
//!
//! Every identity is evaluated on `trials` random settings drawn from the
//! [`Stream::Theory`] stream of `seed`, and reports its largest error against
//! a fixed tolerance. Settings keep every optimal discriminator output and
//! every inner maximizer inside the loss clamp range:
//!
//! * supports of 2 to 16 points, Dirichlet(1) probabilities floored at `1e-4`;
//! * `c₁, c₂` log-uniform in `[0.2, 2]`;
//! * `α₁ ∈ [0.2, 1.5]`, `α₂ > α₁` with `α₁α₂/(α₂−α₁) ≤ 2.2` and both at least
//!   `0.05` away from 1.
//!
//! The value-function identities compare `V(D₁*, D₂*)` with the closed form
//! plus [`closed_form_gap`].

use serde::{Deserialize, Serialize};

use crate::data::{Rng, Stream};
use crate::divergences::{kl_family, DiscreteDistribution, KlKind};
use crate::losses::LossPair;
use crate::theory::{
    closed_form_gap, d2gan_limit_check, discriminator_exponent, optimal_discriminators, pointwise_bruteforce_opt,
    prop1_root, random_distribution, sup_value_bruteforce, theorem1_min_value, theorem1_rhs_shifted, theorem2_rhs,
    value_function, GanTheorySetting, RANDOM_FLOOR,
};
use crate::Result;

pub const LEMMA1_TOL: f64 = 1e-4;
pub const THEOREM1_TOL: f64 = 1e-8;
pub const MIN_VALUE_TOL: f64 = 1e-9;
pub const THEOREM2_TOL: f64 = 1e-6;
pub const LIMIT_TOL: f64 = 1e-3;
pub const PROP1_TOL: f64 = 1e-9;
pub const OPTIMALITY_TOL: f64 = 1e-9;

const MAX_SUPPORT: usize = 16;
const MAX_EXPONENT: f64 = 2.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    /// Added to both closed-form `f_c` exponents. Zero except in sensitivity
    /// tests, where a small shift must make the closed-form identities fail.
    pub exponent_shift: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            trials: 100,
            exponent_shift: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub exponent_shift: f64,
    pub identities: Vec<IdentityReport>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn failing(&self) -> Vec<&str> {
        self.identities
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect()
    }
}

fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.uniform() * (hi.ln() - lo.ln())).exp()
}

/// `(α₁, α₂)` with `α₂ > α₁`, bounded discriminator exponent, both away from 1.
pub fn random_alphas(rng: &mut Rng) -> (f64, f64) {
    loop {
        let a1 = 0.2 + 1.3 * rng.uniform();
        let a2 = a1 + 0.05 + 3.0 * rng.uniform();
        if discriminator_exponent(a1, a2) <= MAX_EXPONENT && (a1 - 1.0).abs() > 0.05 && (a2 - 1.0).abs() > 0.05 {
            return (a1, a2);
        }
    }
}

/// Random pair of distributions over a support of 2 to `max_support` points.
pub fn random_pair(rng: &mut Rng, max_support: usize) -> (DiscreteDistribution, DiscreteDistribution) {
    let n = 2 + rng.index(max_support - 1);
    (
        random_distribution(rng, n, RANDOM_FLOOR),
        random_distribution(rng, n, RANDOM_FLOOR),
    )
}

/// Random α-loss setting; returns it with its `(α₁, α₂)`.
pub fn random_alpha_setting(rng: &mut Rng) -> Result<(GanTheorySetting, f64, f64)> {
    let (pd, pg) = random_pair(rng, MAX_SUPPORT);
    let c1 = log_uniform(rng, 0.2, 2.0);
    let c2 = log_uniform(rng, 0.2, 2.0);
    let (a1, a2) = random_alphas(rng);
    Ok((GanTheorySetting::new(pd, pg, c1, c2, LossPair::alpha(a1, a2)?)?, a1, a2))
}

struct Tracker {
    name: &'static str,
    tolerance: f64,
    trials: usize,
    max_error: f64,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tracker {
            name,
            tolerance,
            trials: 0,
            max_error: 0.0,
        }
    }

    fn record(&mut self, err: f64) {
        self.trials += 1;
        // NaN counts as a failure.
        if !(err <= self.max_error) {
            self.max_error = if err.is_nan() { f64::INFINITY } else { err };
        }
    }

    fn finish(self) -> IdentityReport {
        IdentityReport {
            name: self.name.to_string(),
            trials: self.trials,
            max_error: self.max_error,
            tolerance: self.tolerance,
            passed: self.max_error < self.tolerance,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs())
}

/// Runs the whole suite.
pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = Rng::new(opts.seed, Stream::Theory);
    let shift = opts.exponent_shift;
    let trials = opts.trials.max(1);

    let mut lemma1 = Tracker::new("lemma1_maximizer", LEMMA1_TOL);
    for _ in 0..trials {
        let a = log_uniform(&mut rng, 0.05, 20.0);
        let b = log_uniform(&mut rng, 0.05, 20.0);
        let (a1, a2) = random_alphas(&mut rng);
        let (t, _) = pointwise_bruteforce_opt(a, b, &LossPair::alpha(a1, a2)?)?;
        let expected = (a / b).powf(discriminator_exponent(a1, a2));
        lemma1.record((t - expected).abs() / t);
    }

    let mut theorem1 = Tracker::new("theorem1_value_at_optimum", THEOREM1_TOL);
    let mut theorem2_alpha = Tracker::new("theorem2_alpha_pair", THEOREM2_TOL);
    let mut sup_decomposition = Tracker::new("theorem2_sup_decomposition", THEOREM2_TOL);
    let mut optimality = Tracker::new("generator_optimality", OPTIMALITY_TOL);
    for _ in 0..trials {
        let (s, a1, a2) = random_alpha_setting(&mut rng)?;
        let (d1, d2) = optimal_discriminators(&s, a1, a2)?;
        let v = value_function(&s, &d1, &d2)?;
        let rhs = theorem1_rhs_shifted(&s, a1, a2, shift)?;
        theorem1.record(rel(v, rhs + closed_form_gap(a2)));
        let generic = theorem2_rhs(&s)?;
        theorem2_alpha.record((generic - (rhs + closed_form_gap(a2))).abs());
        sup_decomposition.record((sup_value_bruteforce(&s)? - generic).abs());
        let min = theorem1_min_value(s.c1, s.c2, a1, a2)?;
        optimality.record((min - rhs).max(0.0));
    }

    let mut min_value = Tracker::new("minimum_value", MIN_VALUE_TOL);
    for _ in 0..trials {
        let (s, a1, a2) = random_alpha_setting(&mut rng)?;
        let at_equality = s.with_pg(s.pd.clone())?;
        let rhs = theorem1_rhs_shifted(&at_equality, a1, a2, shift)?;
        min_value.record((rhs - theorem1_min_value(s.c1, s.c2, a1, a2)?).abs());
    }

    let mut theorem2_d2 = Tracker::new("theorem2_d2gan_pair", THEOREM2_TOL);
    let mut limit = Tracker::new("kl_limit", LIMIT_TOL);
    for _ in 0..trials {
        let (pd, pg) = random_pair(&mut rng, MAX_SUPPORT);
        let c1 = log_uniform(&mut rng, 0.2, 2.0);
        let c2 = log_uniform(&mut rng, 0.2, 2.0);
        let s = GanTheorySetting::new(pd, pg, c1, c2, LossPair::d2gan())?;
        let expected = c1 * c1.ln() - c1 + c1 * kl_family(&s.pd, &s.pg, KlKind::Forward)? + c2 * c2.ln() - c2
            + c2 * kl_family(&s.pg, &s.pd, KlKind::Forward)?;
        theorem2_d2.record((theorem2_rhs(&s)? - expected).abs());
        limit.record(d2gan_limit_check(&s)?.final_gap());
    }

    let mut prop1 = Tracker::new("prop1_root", PROP1_TOL);
    prop1.record((prop1_root(1.0, 2.0)? - (5f64.sqrt() - 1.0) / 2.0).abs());
    for _ in 0..trials {
        let a1 = log_uniform(&mut rng, 0.1, 10.0);
        let a2 = log_uniform(&mut rng, 0.1, 10.0);
        let sym = (prop1_root(a1, a2)? + prop1_root(a2, a1)? - 1.0).abs();
        let equal = (prop1_root(a1, a1)? - 0.5).abs();
        prop1.record(sym.max(equal));
    }

    let identities: Vec<IdentityReport> = [
        lemma1,
        theorem1,
        min_value,
        theorem2_alpha,
        theorem2_d2,
        sup_decomposition,
        optimality,
        limit,
        prop1,
    ]
    .into_iter()
    .map(Tracker::finish)
    .collect();
    let all_passed = identities.iter().all(|r| r.passed);
    Ok(VerifyReport {
        seed: opts.seed,
        trials,
        exponent_shift: shift,
        identities,
        all_passed,
    })
}
