//! `d2gan`: train models, check the theory, sweep hyperparameters and emit
//! figure data.

mod report;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use d2gan::trainer::{self, ModelKind, RunOptions, TrainConfig};
use d2gan::verify::{self, VerifyOptions};

#[derive(Parser)]
#[command(name = "d2gan", version, about = "Dual-discriminator GAN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on the ring of Gaussians.
    Train(TrainArgs),
    /// Check the closed-form theory against brute force on random settings.
    Verify(VerifyArgs),
    /// Run every config of a manifest and rank the results.
    Sweep(sweep::SweepArgs),
    /// Collect metric curves and sample snapshots of finished runs into CSVs.
    Report(report::ReportArgs),
}

#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// vanilla, d2, d2alpha or d2general
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    noise_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    metric_every: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    eval_samples: Option<usize>,
    /// Discriminator steps per generator step.
    #[arg(long)]
    d_steps: Option<usize>,
    #[arg(long)]
    adam_beta1: Option<f64>,
    #[arg(long)]
    adam_beta2: Option<f64>,
}

impl Overrides {
    fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        if let Some(m) = self.model {
            c.model = m;
        }
        if self.alpha1.is_some() {
            c.alpha1 = self.alpha1;
        }
        if self.alpha2.is_some() {
            c.alpha2 = self.alpha2;
        }
        set!(c1, c2, lr, seed, epochs, batch_size, noise_dim, hidden, metric_every, snapshot_every, eval_samples, d_steps, adam_beta1,
            adam_beta2);
    }
}

#[derive(Args)]
struct TrainArgs {
    /// JSON config; without it the published settings of --model are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Output root; the run goes to <out>/<run id>.
    #[arg(long, env = "D2GAN_OUT", default_value = "runs")]
    out: PathBuf,
    /// Defaults to <model>_<seed>_<unix time>.
    #[arg(long)]
    run_id: Option<String>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sensitivity check: shift the closed-form f_c exponents by this much.
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb_exponent: f64,
}

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn print_row(run: &str, r: &trainer::MetricRow) {
    eprintln!(
        "{run} epoch {:>6}  sym_kl {:>8.4}  W {:>7.4}  modes {}  hq {:.3}  V {:.4}",
        r.epoch, r.sym_kl, r.wasserstein, r.modes_covered, r.hq_fraction, r.value_fn
    );
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = match (&args.config, args.overrides.model, &args.resume) {
        (Some(path), _, _) => read_config(path)?,
        (None, Some(m), _) => TrainConfig::published(m),
        (None, None, Some(ck)) => d2gan::trainer::Checkpoint::load(ck)?.config,
        (None, None, None) => bail!("give --config or --model"),
    };
    args.overrides.apply(&mut config);
    config.validate().context("invalid config")?;
    let quiet = args.quiet;

    let record = if let Some(ck) = &args.resume {
        trainer::resume_with(ck, Some(&config), |r| {
            if !quiet {
                print_row("resume", r)
            }
        })?
    } else {
        let run_id = args.run_id.clone().unwrap_or_else(|| trainer::default_run_id(&config));
        let opts = RunOptions {
            out_root: args.out.clone(),
            run_id: Some(run_id.clone()),
        };
        trainer::train_with(&config, &opts, |r| {
            if !quiet {
                print_row(&run_id, r)
            }
        })?
    };
    println!("{}", record.dir.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let report = verify::run(&VerifyOptions {
        seed: args.seed,
        trials: args.trials,
        exponent_shift: args.perturb_exponent,
    })?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = &args.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{json}");
    if !report.all_passed {
        eprintln!("failing identities: {}", report.failing().join(", "));
    }
    Ok(report.all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => sweep::cmd_sweep(a),
        Command::Report(a) => report::cmd_report(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
