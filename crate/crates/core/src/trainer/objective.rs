//! Batch estimates of the value functions and their gradients.

use ndarray::{Array2, ArrayView2};

use crate::losses::{LossFn, LossPair};
use crate::nn::Network;
use crate::{Error, Result};

use super::config::TrainConfig;

/// The objective one model plays.
#[derive(Clone, Debug)]
pub enum Objective {
    /// `E_{P_d}[log D(x)] + E_{P_g}[log(1 − D(x))]`. With `non_saturating` the
    /// generator gradient is that of `−E_{P_g}[log D(x)]` instead; the
    /// reported value is unchanged.
    Vanilla { non_saturating: bool },
    /// `c₁E_{P_d}[−ℓ₁(D₁)] + E_{P_g}[ℓ₂(D₁) − 1] + E_{P_d}[ℓ₂(D₂) − 1] + c₂E_{P_g}[−ℓ₁(D₂)]`.
    Dual { pair: LossPair, c1: f64, c2: f64 },
}

impl Objective {
    pub fn from_config(config: &TrainConfig) -> Result<Self> {
        Ok(match config.loss_pair()? {
            None => Objective::Vanilla {
                non_saturating: config.non_saturating,
            },
            Some(pair) => Objective::Dual {
                pair,
                c1: config.c1,
                c2: config.c2,
            },
        })
    }

    pub fn dual(&self) -> bool {
        matches!(self, Objective::Dual { .. })
    }
}

/// The generator and its one or two discriminators.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Nets {
    pub generator: Network,
    pub d1: Network,
    /// Present for the dual models only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<Network>,
}

/// Which gradients to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Want {
    pub discriminators: bool,
    pub generator: bool,
}

impl Want {
    pub const ALL: Want = Want {
        discriminators: true,
        generator: true,
    };
    pub const DISCRIMINATORS: Want = Want {
        discriminators: true,
        generator: false,
    };
    pub const GENERATOR: Want = Want {
        discriminators: false,
        generator: true,
    };
    pub const NONE: Want = Want {
        discriminators: false,
        generator: false,
    };
}

/// Value estimate and the requested gradients of it (generator gradients of
/// the non-saturating loss when that variant is active).
#[derive(Clone, Debug, Default)]
pub struct BatchGrads {
    pub value: f64,
    pub generator: Option<Vec<f64>>,
    pub d1: Option<Vec<f64>>,
    pub d2: Option<Vec<f64>>,
}

impl BatchGrads {
    pub fn all_finite(&self) -> bool {
        self.value.is_finite()
            && [&self.generator, &self.d1, &self.d2]
                .into_iter()
                .flatten()
                .all(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Value and gradients for discriminators scored on explicit fake samples.
/// `fake_grad` is `∂/∂fake` of the generator's loss, when requested.
#[derive(Clone, Debug)]
pub struct FakeBatchGrads {
    pub value: f64,
    pub d1: Option<Vec<f64>>,
    pub d2: Option<Vec<f64>>,
    pub fake_grad: Option<Array2<f64>>,
}

fn column(values: &Array2<f64>) -> impl Iterator<Item = f64> + '_ {
    values.column(0).into_iter().copied()
}

fn upstream(values: &Array2<f64>, per_sample: impl Fn(f64) -> f64) -> Array2<f64> {
    values.mapv(per_sample)
}

/// Value of the objective with `fake` standing in for generator output, plus
/// discriminator gradients and the gradient with respect to `fake`.
pub fn value_on_samples(
    obj: &Objective,
    d1: &Network,
    d2: Option<&Network>,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    want_disc: bool,
    want_fake: bool,
) -> Result<FakeBatchGrads> {
    if real.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let nr = real.nrows() as f64;
    let nf = fake.nrows() as f64;
    let tape_r1 = d1.forward_tape(real)?;
    let tape_f1 = d1.forward_tape(fake)?;
    let (s_r1, s_f1) = (tape_r1.output(), tape_f1.output());

    match obj {
        Objective::Vanilla { non_saturating } => {
            let nl = LossFn::NegLog;
            let log = |t: f64| -nl.eval(t);
            let dlog = |t: f64| -nl.deriv(t);
            let value = column(s_r1).map(log).sum::<f64>() / nr + column(s_f1).map(|s| log(1.0 - s)).sum::<f64>() / nf;
            let d1_grad = if want_disc {
                let up_r = upstream(s_r1, |s| dlog(s) / nr);
                let up_f = upstream(s_f1, |s| -dlog(1.0 - s) / nf);
                let mut g = d1.backward_tape(&tape_r1, up_r.view())?.params;
                let gf = d1.backward_tape(&tape_f1, up_f.view())?.params;
                g.iter_mut().zip(gf).for_each(|(a, b)| *a += b);
                Some(g)
            } else {
                None
            };
            let fake_grad = if want_fake {
                let up = if *non_saturating {
                    upstream(s_f1, |s| -dlog(s) / nf)
                } else {
                    upstream(s_f1, |s| -dlog(1.0 - s) / nf)
                };
                Some(d1.backward_tape(&tape_f1, up.view())?.input)
            } else {
                None
            };
            Ok(FakeBatchGrads {
                value,
                d1: d1_grad,
                d2: None,
                fake_grad,
            })
        }
        Objective::Dual { pair, c1, c2 } => {
            let d2 = d2.ok_or_else(|| Error::Shape("dual objective needs two discriminators".into()))?;
            let (l1, l2) = (&pair.l1, &pair.l2);
            let (c1, c2) = (*c1, *c2);
            let tape_r2 = d2.forward_tape(real)?;
            let tape_f2 = d2.forward_tape(fake)?;
            let (t_r2, t_f2) = (tape_r2.output(), tape_f2.output());
            let value = c1 * column(s_r1).map(|t| -l1.eval(t)).sum::<f64>() / nr
                + column(s_f1).map(|t| l2.eval(t) - 1.0).sum::<f64>() / nf
                + column(t_r2).map(|t| l2.eval(t) - 1.0).sum::<f64>() / nr
                + c2 * column(t_f2).map(|t| -l1.eval(t)).sum::<f64>() / nf;

            // ∂V/∂output for each of the four discriminator evaluations.
            let up_f1 = upstream(s_f1, |t| l2.deriv(t) / nf);
            let up_f2 = upstream(t_f2, |t| -c2 * l1.deriv(t) / nf);
            let (g1, g2) = if want_disc {
                let up_r1 = upstream(s_r1, |t| -c1 * l1.deriv(t) / nr);
                let up_r2 = upstream(t_r2, |t| l2.deriv(t) / nr);
                let mut g1 = d1.backward_tape(&tape_r1, up_r1.view())?.params;
                let gf = d1.backward_tape(&tape_f1, up_f1.view())?;
                g1.iter_mut().zip(&gf.params).for_each(|(a, b)| *a += b);
                let mut g2 = d2.backward_tape(&tape_r2, up_r2.view())?.params;
                let gf2 = d2.backward_tape(&tape_f2, up_f2.view())?;
                g2.iter_mut().zip(&gf2.params).for_each(|(a, b)| *a += b);
                let fake_grad = want_fake.then(|| gf.input + &gf2.input);
                return Ok(FakeBatchGrads {
                    value,
                    d1: Some(g1),
                    d2: Some(g2),
                    fake_grad,
                });
            } else {
                (None, None)
            };
            let fake_grad = if want_fake {
                let a = d1.backward_tape(&tape_f1, up_f1.view())?.input;
                let b = d2.backward_tape(&tape_f2, up_f2.view())?.input;
                Some(a + &b)
            } else {
                None
            };
            Ok(FakeBatchGrads {
                value,
                d1: g1,
                d2: g2,
                fake_grad,
            })
        }
    }
}

/// Empirical value function on one real batch and one noise batch, with the
/// gradients requested by `want`. The generator gradient flows through
/// `G(z)` into every discriminator term that consumes fake samples.
pub fn batch_value_and_grads(
    obj: &Objective,
    nets: &Nets,
    real: ArrayView2<f64>,
    noise: ArrayView2<f64>,
    want: Want,
) -> Result<BatchGrads> {
    if obj.dual() != nets.d2.is_some() {
        return Err(Error::Shape("network set does not match the objective".into()));
    }
    let (fake, tape) = if want.generator {
        let tape = nets.generator.forward_tape(noise)?;
        (tape.output().clone(), Some(tape))
    } else {
        (nets.generator.forward(noise)?, None)
    };
    let r = value_on_samples(
        obj,
        &nets.d1,
        nets.d2.as_ref(),
        real,
        fake.view(),
        want.discriminators,
        want.generator,
    )?;
    let generator = match (tape, r.fake_grad) {
        (Some(tape), Some(up)) => Some(nets.generator.backward_tape(&tape, up.view())?.params),
        _ => None,
    };
    Ok(BatchGrads {
        value: r.value,
        generator,
        d1: r.d1,
        d2: r.d2,
    })
}
