//! Adversarial training on the ring of Gaussians.
//!
//! One epoch is `d_steps` discriminator ascent steps (default one), each on a
//! fresh batch, followed by one generator descent step on another fresh batch. In the dual models both
//! discriminators are updated from the same loss evaluation, each with its
//! own Adam state.
//!
//! Randomness comes from the run seed: real batches from [`Stream::Data`],
//! noise from [`Stream::Noise`], initial weights from [`Stream::Init`]. The
//! evaluation set (real points, evaluation noise and snapshot noise) is drawn
//! once from [`Stream::Eval`] and reused at every evaluation, so metric curves
//! measure the generator rather than resampling noise.
//!
//! # Run directory
//!
//! ```text
//! <out>/<run_id>/config.json
//! <out>/<run_id>/metrics.csv             epoch,sym_kl,wasserstein,modes_covered,hq_fraction,value_fn
//! <out>/<run_id>/samples_epoch_<k>.csv   x,y
//! <out>/<run_id>/ckpt/epoch_<k>.json
//! ```
//!
//! A checkpoint is a JSON object with `format = "d2gan-checkpoint"`,
//! `version`, the config and its hash, the epoch, all networks (layer specs
//! and flat parameters), all Adam states, the data and noise stream states
//! and the metric rows so far. Floats are written in shortest round-trip
//! form, so resuming reproduces an uninterrupted run bit for bit.

pub mod config;
pub mod objective;

use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{sample_noise, sample_ring, write_samples_csv, RingSpec, Rng, RngState, Stream};
use crate::metrics::{mode_coverage, symmetric_kl_with, wasserstein, KL_DRAWS, KL_STREAM};
use crate::nn::{discriminator_layers, generator_layers, Activation, AdamState, Network};
use crate::{Error, Result};

pub use config::{ModelKind, TrainConfig};
pub use objective::{batch_value_and_grads, value_on_samples, BatchGrads, Nets, Objective, Want};

pub const CHECKPOINT_FORMAT: &str = "d2gan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Consecutive non-finite steps tolerated before a run aborts.
pub const MAX_NONFINITE_STREAK: usize = 10;
pub const METRICS_HEADER: &str = "epoch,sym_kl,wasserstein,modes_covered,hq_fraction,value_fn";

/// One row of `metrics.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub epoch: usize,
    /// NaN when the estimator rejects the samples (e.g. a collapsed generator).
    pub sym_kl: f64,
    pub wasserstein: f64,
    pub modes_covered: usize,
    pub hq_fraction: f64,
    pub value_fn: f64,
}

impl MetricRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.sym_kl, self.wasserstein, self.modes_covered, self.hq_fraction, self.value_fn
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || Error::Shape(format!("bad metrics line {line:?}"));
        if f.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(MetricRow {
            epoch: f[0].parse().map_err(|_| bad())?,
            sym_kl: num(f[1])?,
            wasserstein: num(f[2])?,
            modes_covered: f[3].parse().map_err(|_| bad())?,
            hq_fraction: num(f[4])?,
            value_fn: num(f[5])?,
        })
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.to_csv_line());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(METRICS_HEADER) {
        return Err(Error::Shape(format!("{}: unexpected header", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(MetricRow::parse_csv_line)
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Value estimates around one update, on the batch that drove it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepProbe {
    pub disc_before: f64,
    pub disc_after: f64,
    pub gen_before: f64,
    pub gen_after: f64,
}

struct EvalSet {
    real: Array2<f64>,
    noise: Array2<f64>,
    snapshot_noise: Array2<f64>,
}

impl EvalSet {
    fn new(config: &TrainConfig, spec: &RingSpec) -> Self {
        let mut rng = Rng::new(config.seed, Stream::Eval);
        let real = sample_ring(spec, config.eval_samples, &mut rng);
        let noise = sample_noise(config.eval_samples, config.noise_dim, &mut rng);
        let snapshot_noise = sample_noise(config.snapshot_samples, config.noise_dim, &mut rng);
        EvalSet {
            real,
            noise,
            snapshot_noise,
        }
    }
}

/// Serialized training state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: TrainConfig,
    pub epoch: usize,
    pub nets: Nets,
    pub adam_generator: AdamState,
    pub adam_d1: AdamState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam_d2: Option<AdamState>,
    pub data_rng: RngState,
    pub noise_rng: RngState,
    pub nonfinite_streak: usize,
    pub rows: Vec<MetricRow>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    /// Reads and checks a checkpoint. Nothing is returned unless the whole
    /// file parses and is internally consistent.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: not a valid checkpoint: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if ck.config_hash != ck.config.config_hash() {
            return Err(Error::Checkpoint("stored config does not match its hash".into()));
        }
        ck.config.validate()?;
        for net in [&ck.nets.generator, &ck.nets.d1].into_iter().chain(&ck.nets.d2) {
            net.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        Ok(ck)
    }
}

/// A model, its optimizers and its random streams.
pub struct Trainer {
    config: TrainConfig,
    spec: RingSpec,
    objective: Objective,
    nets: Nets,
    adam_generator: AdamState,
    adam_d1: AdamState,
    adam_d2: Option<AdamState>,
    data_rng: Rng,
    noise_rng: Rng,
    epoch: usize,
    nonfinite_streak: usize,
    eval: EvalSet,
}

fn architecture(config: &TrainConfig) -> (Vec<crate::nn::LayerSpec>, Vec<crate::nn::LayerSpec>) {
    let out = if config.model.dual() {
        Activation::Softplus
    } else {
        Activation::Sigmoid
    };
    (
        generator_layers(config.noise_dim, config.hidden),
        discriminator_layers(config.hidden, out),
    )
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let spec = RingSpec::default();
        let objective = Objective::from_config(&config)?;
        let (g_layers, d_layers) = architecture(&config);
        let mut init = Rng::new(config.seed, Stream::Init);
        let generator = Network::init(g_layers, &mut init)?;
        let d1 = Network::init(d_layers.clone(), &mut init)?;
        let d2 = if config.model.dual() {
            Some(Network::init(d_layers, &mut init)?)
        } else {
            None
        };
        let adam = config.adam();
        let eval = EvalSet::new(&config, &spec);
        Ok(Trainer {
            adam_generator: AdamState::new(generator.param_count(), adam),
            adam_d1: AdamState::new(d1.param_count(), adam),
            adam_d2: d2.as_ref().map(|d| AdamState::new(d.param_count(), adam)),
            nets: Nets { generator, d1, d2 },
            data_rng: Rng::new(config.seed, Stream::Data),
            noise_rng: Rng::new(config.seed, Stream::Noise),
            epoch: 0,
            nonfinite_streak: 0,
            eval,
            objective,
            spec,
            config,
        })
    }

    /// Restores a trainer. `config`, if given, must hash-equal the stored one;
    /// its `epochs` may differ.
    pub fn from_checkpoint(ck: Checkpoint, config: Option<&TrainConfig>) -> Result<(Self, Vec<MetricRow>)> {
        let config = match config {
            Some(c) => {
                if c.config_hash() != ck.config_hash {
                    return Err(Error::Checkpoint(
                        "config differs from the checkpointed run (hash mismatch)".into(),
                    ));
                }
                c.clone()
            }
            None => ck.config.clone(),
        };
        let (g_layers, d_layers) = architecture(&config);
        let shapes_ok = ck.nets.generator.layers() == g_layers.as_slice()
            && ck.nets.d1.layers() == d_layers.as_slice()
            && ck.nets.d2.as_ref().map(|d| d.layers()) == config.model.dual().then_some(d_layers.as_slice())
            && ck.adam_d2.is_some() == config.model.dual();
        if !shapes_ok {
            return Err(Error::Checkpoint("networks do not match the configured architecture".into()));
        }
        let spec = RingSpec::default();
        let trainer = Trainer {
            objective: Objective::from_config(&config)?,
            eval: EvalSet::new(&config, &spec),
            spec,
            nets: ck.nets,
            adam_generator: ck.adam_generator,
            adam_d1: ck.adam_d1,
            adam_d2: ck.adam_d2,
            data_rng: Rng::from_state(&ck.data_rng)?,
            noise_rng: Rng::from_state(&ck.noise_rng)?,
            epoch: ck.epoch,
            nonfinite_streak: ck.nonfinite_streak,
            config,
        };
        Ok((trainer, ck.rows))
    }

    pub fn checkpoint(&self, rows: &[MetricRow]) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config_hash: self.config.config_hash(),
            config: self.config.clone(),
            epoch: self.epoch,
            nets: self.nets.clone(),
            adam_generator: self.adam_generator.clone(),
            adam_d1: self.adam_d1.clone(),
            adam_d2: self.adam_d2.clone(),
            data_rng: self.data_rng.state(),
            noise_rng: self.noise_rng.state(),
            nonfinite_streak: self.nonfinite_streak,
            rows: rows.to_vec(),
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn nets(&self) -> &Nets {
        &self.nets
    }

    pub fn ring(&self) -> &RingSpec {
        &self.spec
    }

    fn draw_batch(&mut self) -> (Array2<f64>, Array2<f64>) {
        let real = sample_ring(&self.spec, self.config.batch_size, &mut self.data_rng);
        let noise = sample_noise(self.config.batch_size, self.config.noise_dim, &mut self.noise_rng);
        (real, noise)
    }

    fn note_finite(&mut self, finite: bool, value: f64) -> Result<bool> {
        if finite {
            self.nonfinite_streak = 0;
            return Ok(true);
        }
        self.nonfinite_streak += 1;
        if self.nonfinite_streak >= MAX_NONFINITE_STREAK {
            return Err(Error::NonFinite(format!(
                "value function or gradients non-finite for {MAX_NONFINITE_STREAK} consecutive steps \
                 (epoch {}, last value {value})",
                self.epoch + 1
            )));
        }
        Ok(false)
    }

    fn value_on(&self, real: &Array2<f64>, noise: &Array2<f64>) -> Result<f64> {
        Ok(batch_value_and_grads(&self.objective, &self.nets, real.view(), noise.view(), Want::NONE)?.value)
    }

    fn epoch_inner(&mut self, probe: bool) -> Result<Option<StepProbe>> {
        let mut disc_before = f64::NAN;
        let mut disc_after = f64::NAN;
        for _ in 0..self.config.d_steps {
            let (real, noise) = self.draw_batch();
            let d = batch_value_and_grads(&self.objective, &self.nets, real.view(), noise.view(), Want::DISCRIMINATORS)?;
            if self.note_finite(d.all_finite(), d.value)? {
                self.adam_d1.step(self.nets.d1.params_mut(), d.d1.as_ref().unwrap(), true)?;
                if let (Some(net), Some(adam), Some(g)) = (self.nets.d2.as_mut(), self.adam_d2.as_mut(), d.d2.as_ref()) {
                    adam.step(net.params_mut(), g, true)?;
                }
            }
            disc_before = d.value;
            if probe {
                disc_after = self.value_on(&real, &noise)?;
            }
        }

        let (real_g, noise_g) = self.draw_batch();
        let g = batch_value_and_grads(&self.objective, &self.nets, real_g.view(), noise_g.view(), Want::GENERATOR)?;
        if self.note_finite(g.all_finite(), g.value)? {
            self.adam_generator
                .step(self.nets.generator.params_mut(), g.generator.as_ref().unwrap(), false)?;
        }
        let gen_after = if probe { self.value_on(&real_g, &noise_g)? } else { f64::NAN };
        self.epoch += 1;
        Ok(probe.then_some(StepProbe {
            disc_before,
            disc_after,
            gen_before: g.value,
            gen_after,
        }))
    }

    /// Runs one epoch.
    pub fn step(&mut self) -> Result<()> {
        self.epoch_inner(false).map(|_| ())
    }

    /// Runs one epoch and re-evaluates each batch after its update.
    pub fn step_probed(&mut self) -> Result<StepProbe> {
        Ok(self.epoch_inner(true)?.expect("probe requested"))
    }

    pub fn generate(&self, noise: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.nets.generator.forward(noise)
    }

    /// Generator output on the fixed snapshot noise.
    pub fn snapshot(&self) -> Result<Array2<f64>> {
        self.generate(self.eval.snapshot_noise.view())
    }

    /// Metrics of the current generator on the fixed evaluation set.
    pub fn evaluate(&self) -> Result<MetricRow> {
        let fake = self.generate(self.eval.noise.view())?;
        let finite = fake.iter().all(|v| v.is_finite());
        let mut kl_rng = Rng::with_stream(self.config.seed, KL_STREAM);
        let sym_kl = if finite {
            symmetric_kl_with(fake.view(), &self.spec, &mut kl_rng, KL_DRAWS).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        let w = if finite {
            wasserstein(fake.view(), self.eval.real.view())?
        } else {
            f64::NAN
        };
        let modes = mode_coverage(fake.view(), &self.spec)?;
        let value = value_on_samples(
            &self.objective,
            &self.nets.d1,
            self.nets.d2.as_ref(),
            self.eval.real.view(),
            fake.view(),
            false,
            false,
        )?
        .value;
        Ok(MetricRow {
            epoch: self.epoch,
            sym_kl,
            wasserstein: w,
            modes_covered: modes.modes_covered,
            hq_fraction: modes.high_quality_fraction,
            value_fn: value,
        })
    }
}

/// Where a run writes its artifacts.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_root: PathBuf,
    /// Defaults to [`default_run_id`].
    pub run_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub epoch: usize,
    pub path: PathBuf,
}

/// Everything a finished run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub dir: PathBuf,
    pub config: TrainConfig,
    pub rows: Vec<MetricRow>,
    pub snapshots: Vec<Snapshot>,
    pub checkpoint: PathBuf,
}

impl RunRecord {
    /// Reads a run directory written by [`train`].
    pub fn load(dir: &Path) -> Result<Self> {
        let config = TrainConfig::from_json(&std::fs::read_to_string(dir.join("config.json"))?)?;
        let rows = read_metrics_csv(&dir.join("metrics.csv"))?;
        let mut snapshots = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if let Some(k) = name.strip_prefix("samples_epoch_").and_then(|s| s.strip_suffix(".csv")) {
                if let Ok(epoch) = k.parse() {
                    snapshots.push(Snapshot { epoch, path });
                }
            }
        }
        snapshots.sort_by_key(|s| s.epoch);
        let checkpoint = latest_checkpoint(dir).unwrap_or_else(|| dir.join("ckpt"));
        Ok(RunRecord {
            run_id: dir.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string(),
            dir: dir.to_path_buf(),
            config,
            rows,
            snapshots,
            checkpoint,
        })
    }

    pub fn final_row(&self) -> Option<&MetricRow> {
        self.rows.last()
    }
}

/// Highest-epoch checkpoint under `<dir>/ckpt`.
pub fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
    std::fs::read_dir(dir.join("ckpt"))
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let k: usize = p
                .file_name()?
                .to_str()?
                .strip_prefix("epoch_")?
                .strip_suffix(".json")?
                .parse()
                .ok()?;
            Some((k, p))
        })
        .max_by_key(|(k, _)| *k)
        .map(|(_, p)| p)
}

/// `<model>_<seed>_<unix seconds>`.
pub fn default_run_id(config: &TrainConfig) -> String {
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{}_{}_{}", config.model, config.seed, ts)
}

fn run_loop(
    mut trainer: Trainer,
    mut rows: Vec<MetricRow>,
    run_id: String,
    dir: PathBuf,
    mut on_row: impl FnMut(&MetricRow),
) -> Result<RunRecord> {
    let config = trainer.config().clone();
    std::fs::create_dir_all(dir.join("ckpt"))?;
    std::fs::write(dir.join("config.json"), config.to_json())?;
    write_metrics_csv(&dir.join("metrics.csv"), &rows)?;
    let mut checkpoint = latest_checkpoint(&dir).unwrap_or_else(|| dir.join("ckpt"));
    while trainer.epoch() < config.epochs {
        trainer.step()?;
        let k = trainer.epoch();
        let last = k == config.epochs;
        if k.is_multiple_of(config.metric_every) || last {
            let row = trainer.evaluate()?;
            on_row(&row);
            rows.push(row);
            write_metrics_csv(&dir.join("metrics.csv"), &rows)?;
        }
        if k.is_multiple_of(config.snapshot_every) || last {
            write_samples_csv(&dir.join(format!("samples_epoch_{k}.csv")), &trainer.snapshot()?)?;
            checkpoint = dir.join("ckpt").join(format!("epoch_{k}.json"));
            trainer.checkpoint(&rows).save(&checkpoint)?;
        }
    }
    let mut record = RunRecord::load(&dir)?;
    record.run_id = run_id;
    record.rows = rows;
    record.checkpoint = checkpoint;
    Ok(record)
}

/// Trains from scratch into `<out_root>/<run_id>`.
pub fn train(config: &TrainConfig, opts: &RunOptions) -> Result<RunRecord> {
    train_with(config, opts, |_| {})
}

/// [`train`], calling `on_row` after each evaluation.
pub fn train_with(config: &TrainConfig, opts: &RunOptions, on_row: impl FnMut(&MetricRow)) -> Result<RunRecord> {
    let trainer = Trainer::new(config.clone())?;
    let run_id = opts.run_id.clone().unwrap_or_else(|| default_run_id(config));
    let dir = opts.out_root.join(&run_id);
    if dir.join("metrics.csv").exists() {
        return Err(Error::Config(format!("run directory {} already holds a run", dir.display())));
    }
    run_loop(trainer, Vec::new(), run_id, dir, on_row)
}

/// Continues the run that wrote `checkpoint` up to `config.epochs` (or the
/// stored config's epochs), writing into the same run directory.
pub fn resume(checkpoint: &Path, config: Option<&TrainConfig>) -> Result<RunRecord> {
    resume_with(checkpoint, config, |_| {})
}

pub fn resume_with(checkpoint: &Path, config: Option<&TrainConfig>, on_row: impl FnMut(&MetricRow)) -> Result<RunRecord> {
    let ck = Checkpoint::load(checkpoint)?;
    let (trainer, rows) = Trainer::from_checkpoint(ck, config)?;
    let dir = checkpoint
        .parent()
        .and_then(Path::parent)
        .ok_or_else(|| Error::Checkpoint("checkpoint is not inside <run>/ckpt/".into()))?
        .to_path_buf();
    let run_id = dir.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string();
    run_loop(trainer, rows, run_id, dir, on_row)
}
