use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::losses::{make_loss_pair, LossPair, LossPairDescriptor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// One sigmoid discriminator, cross-entropy value function.
    Vanilla,
    /// Two softplus discriminators with `(−log t, 1 − t)`.
    D2,
    /// Two softplus discriminators with `(ℓ_{α₁}, ℓ_{α₂})`.
    D2alpha,
    /// Two softplus discriminators with an arbitrary loss pair.
    D2general,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vanilla => "vanilla",
            ModelKind::D2 => "d2",
            ModelKind::D2alpha => "d2alpha",
            ModelKind::D2general => "d2general",
        }
    }

    pub fn dual(self) -> bool {
        self != ModelKind::Vanilla
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(ModelKind::Vanilla),
            "d2" => Ok(ModelKind::D2),
            "d2alpha" => Ok(ModelKind::D2alpha),
            "d2general" => Ok(ModelKind::D2general),
            _ => Err(Error::Config(format!(
                "unknown model {s:?} (expected vanilla, d2, d2alpha or d2general)"
            ))),
        }
    }
}

fn default_c() -> f64 {
    1.0
}
fn default_lr() -> f64 {
    1e-3
}
fn default_batch() -> usize {
    512
}
fn default_epochs() -> usize {
    25_000
}
fn default_seed() -> u64 {
    712
}
fn default_noise_dim() -> usize {
    256
}
fn default_hidden() -> usize {
    128
}
fn default_snapshot_every() -> usize {
    5000
}
fn default_metric_every() -> usize {
    500
}
fn default_d_steps() -> usize {
    1
}
fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eval_samples() -> usize {
    512
}
fn default_snapshot_samples() -> usize {
    1000
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    /// Loss pair for `d2general`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<LossPairDescriptor>,
    #[serde(default = "default_c")]
    pub c1: f64,
    #[serde(default = "default_c")]
    pub c2: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_noise_dim")]
    pub noise_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_metric_every")]
    pub metric_every: usize,
    /// Discriminator steps per generator step.
    #[serde(default = "default_d_steps")]
    pub d_steps: usize,
    /// Adam moment decay rates, shared by all players.
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    /// Vanilla only: train the generator on `−log D(G(z))`.
    #[serde(default)]
    pub non_saturating: bool,
    /// Samples per side for the Wasserstein and symmetric-KL evaluations.
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    #[serde(default = "default_snapshot_samples")]
    pub snapshot_samples: usize,
}

impl TrainConfig {
    /// Defaults for `model` with every optional field unset.
    pub fn new(model: ModelKind) -> Self {
        TrainConfig {
            model,
            alpha1: None,
            alpha2: None,
            losses: None,
            c1: default_c(),
            c2: default_c(),
            lr: default_lr(),
            batch_size: default_batch(),
            epochs: default_epochs(),
            seed: default_seed(),
            noise_dim: default_noise_dim(),
            hidden: default_hidden(),
            snapshot_every: default_snapshot_every(),
            metric_every: default_metric_every(),
            d_steps: default_d_steps(),
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            non_saturating: false,
            eval_samples: default_eval_samples(),
            snapshot_samples: default_snapshot_samples(),
        }
    }

    /// The published hyperparameters for each model at full length.
    pub fn published(model: ModelKind) -> Self {
        let mut c = TrainConfig::new(model);
        match model {
            ModelKind::Vanilla => {}
            ModelKind::D2 => {
                c.c1 = 1.2;
                c.c2 = 1.0;
                c.lr = 2e-4;
            }
            ModelKind::D2alpha => {
                c.alpha1 = Some(0.6);
                c.alpha2 = Some(0.9);
                c.c1 = 0.01;
                c.c2 = 1.5;
            }
            ModelKind::D2general => {
                c.losses = Some(LossPair::d2gan().descriptor().expect("built-in pair"));
            }
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: TrainConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn adam(&self) -> crate::nn::AdamConfig {
        crate::nn::AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: 1e-8,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("lr", self.lr)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive number, got {v}"));
            }
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        for (name, v) in [
            ("noise_dim", self.noise_dim),
            ("hidden", self.hidden),
            ("d_steps", self.d_steps),
            ("snapshot_every", self.snapshot_every),
            ("metric_every", self.metric_every),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.eval_samples < 100 {
            return bad(format!("eval_samples must be at least 100, got {}", self.eval_samples));
        }
        if self.eval_samples > crate::metrics::WASSERSTEIN_BUDGET {
            return bad(format!(
                "eval_samples must be at most {}, got {}",
                crate::metrics::WASSERSTEIN_BUDGET,
                self.eval_samples
            ));
        }
        if self.snapshot_samples == 0 {
            return bad("snapshot_samples must be positive".into());
        }
        if self.non_saturating && self.model != ModelKind::Vanilla {
            return bad("non_saturating applies to the vanilla model only".into());
        }
        self.loss_pair().map(|_| ())
    }

    /// Loss pair of a dual model; `None` for vanilla.
    pub fn loss_pair(&self) -> Result<Option<LossPair>> {
        match self.model {
            ModelKind::Vanilla => Ok(None),
            ModelKind::D2 => Ok(Some(LossPair::d2gan())),
            ModelKind::D2alpha => {
                let (Some(a1), Some(a2)) = (self.alpha1, self.alpha2) else {
                    return Err(Error::Config("d2alpha needs alpha1 and alpha2".into()));
                };
                if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
                    return Err(Error::Config(format!("alphas must be positive, got {a1}, {a2}")));
                }
                if a2 <= a1 {
                    return Err(Error::Config(format!(
                        "d2alpha needs alpha2 > alpha1 for the optimal discriminators to exist, \
                         got alpha1 = {a1}, alpha2 = {a2}"
                    )));
                }
                Ok(Some(LossPair::alpha(a1, a2)?))
            }
            ModelKind::D2general => {
                let d = self
                    .losses
                    .as_ref()
                    .ok_or_else(|| Error::Config("d2general needs a losses descriptor".into()))?;
                Ok(Some(make_loss_pair(d)?))
            }
        }
    }

    /// SHA-256 of the canonical JSON with `epochs` zeroed, as lowercase hex.
    /// Two configs with equal hashes describe the same trajectory, so a run
    /// may be resumed with a larger epoch count.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.epochs = 0;
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_configs_validate() {
        for m in [ModelKind::Vanilla, ModelKind::D2, ModelKind::D2alpha, ModelKind::D2general] {
            TrainConfig::published(m).validate().unwrap();
        }
        let c = TrainConfig::published(ModelKind::D2alpha);
        assert_eq!((c.batch_size, c.epochs, c.seed), (512, 25_000, 712));
    }

    #[test]
    fn alpha_order_enforced() {
        let mut c = TrainConfig::published(ModelKind::D2alpha);
        c.alpha1 = Some(0.9);
        c.alpha2 = Some(0.6);
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("alpha2 > alpha1"), "{err}");
        c.alpha2 = None;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let c = TrainConfig::published(ModelKind::D2alpha);
        let back = TrainConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert!(TrainConfig::from_json(r#"{"model": "d2", "learning_rate": 0.1}"#).is_err());
        let minimal = TrainConfig::from_json(r#"{"model": "vanilla"}"#).unwrap();
        assert_eq!(minimal, TrainConfig::new(ModelKind::Vanilla));
    }

    #[test]
    fn hash_ignores_epochs_only() {
        let a = TrainConfig::published(ModelKind::D2);
        let mut b = a.clone();
        b.epochs = 7;
        assert_eq!(a.config_hash(), b.config_hash());
        b.lr = 1e-3;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn general_model_uses_descriptor() {
        let mut c = TrainConfig::new(ModelKind::D2general);
        assert!(c.validate().is_err());
        c.losses = Some(serde_json::from_str(r#"{"l1": {"kind": "alpha", "alpha": 0.5}, "l2": {"kind": "oneminus"}}"#).unwrap());
        let pair = c.loss_pair().unwrap().unwrap();
        assert_eq!(pair.l1.alpha_value(), Some(0.5));
    }
}
