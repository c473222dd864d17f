use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::Args;
use d2gan::trainer::{self, RunOptions, RunRecord, TrainConfig};
use serde::Deserialize;

#[derive(Args)]
pub struct SweepArgs {
    /// Manifest JSON: {"out": "dir"?, "runs": [{"id": "...", "config": {...}}]}
    manifest: PathBuf,
    /// Runs executed at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output root; overrides the manifest's.
    #[arg(long, env = "D2GAN_OUT")]
    out: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRun {
    pub id: String,
    pub config: TrainConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            bail!("manifest has no runs");
        }
        let mut seen = HashSet::new();
        for r in &self.runs {
            if r.id.is_empty() || r.id.contains(['/', '\\']) {
                bail!("invalid run id {:?}", r.id);
            }
            if !seen.insert(r.id.as_str()) {
                bail!("duplicate run id {:?}", r.id);
            }
            r.config.validate().with_context(|| format!("run {:?}", r.id))?;
        }
        Ok(())
    }
}

type Outcome = (String, std::result::Result<RunRecord, String>);

fn summary_row(outcome: &Outcome) -> Vec<String> {
    let (id, result) = outcome;
    match result {
        Ok(rec) => {
            let last = rec.final_row();
            let f = |g: fn(&trainer::MetricRow) -> String| last.map(g).unwrap_or_default();
            vec![
                id.clone(),
                rec.config.model.to_string(),
                rec.config.seed.to_string(),
                f(|r| r.epoch.to_string()),
                f(|r| r.wasserstein.to_string()),
                f(|r| r.sym_kl.to_string()),
                f(|r| r.modes_covered.to_string()),
                f(|r| r.hq_fraction.to_string()),
                "ok".into(),
            ]
        }
        Err(e) => {
            let mut row = vec![id.clone()];
            row.extend(std::iter::repeat_n(String::new(), 7));
            row.push(format!("failed: {e}"));
            row
        }
    }
}

fn rank_key(o: &Outcome) -> (f64, f64) {
    match &o.1 {
        Ok(rec) => rec
            .final_row()
            .map(|r| {
                let nan_last = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
                (nan_last(r.wasserstein), nan_last(r.sym_kl))
            })
            .unwrap_or((f64::INFINITY, f64::INFINITY)),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    }
}

pub fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let manifest: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
    manifest.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| manifest.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out)?;

    let queue = Mutex::new(manifest.runs.iter());
    let outcomes = Mutex::new(Vec::new());
    let quiet = args.quiet;
    std::thread::scope(|s| {
        for _ in 0..args.jobs.max(1).min(manifest.runs.len()) {
            s.spawn(|| loop {
                let Some(run) = queue.lock().unwrap().next() else { break };
                let opts = RunOptions {
                    out_root: out.clone(),
                    run_id: Some(run.id.clone()),
                };
                let result = trainer::train_with(&run.config, &opts, |r| {
                    if !quiet {
                        crate::print_row(&run.id, r)
                    }
                })
                .map_err(|e| e.to_string());
                if let Err(e) = &result {
                    eprintln!("{}: {e}", run.id);
                }
                outcomes.lock().unwrap().push((run.id.clone(), result));
            });
        }
    });

    let mut outcomes = outcomes.into_inner().unwrap();
    outcomes.sort_by(|a, b| rank_key(a).partial_cmp(&rank_key(b)).unwrap().then_with(|| a.0.cmp(&b.0)));
    let path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "run_id",
        "model",
        "seed",
        "final_epoch",
        "final_wasserstein",
        "final_sym_kl",
        "modes_covered",
        "hq_fraction",
        "status",
    ])?;
    for o in &outcomes {
        w.write_record(summary_row(o))?;
    }
    w.flush()?;
    println!("{}", path.display());
    let failed = outcomes.iter().filter(|o| o.1.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", outcomes.len());
    }
    Ok(failed == 0)
}
