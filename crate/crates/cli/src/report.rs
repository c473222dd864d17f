use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use d2gan::trainer::{MetricRow, RunRecord};

#[derive(Args)]
pub struct ReportArgs {
    /// Run ids under --runs, or run directories.
    #[arg(required = true)]
    runs: Vec<String>,
    #[arg(long, env = "D2GAN_OUT", default_value = "runs")]
    runs_root: PathBuf,
    /// Directory for the figure CSVs.
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn resolve(root: &Path, run: &str) -> Result<PathBuf> {
    let direct = PathBuf::from(run);
    let dir = if direct.join("metrics.csv").is_file() {
        direct
    } else {
        root.join(run)
    };
    if !dir.join("metrics.csv").is_file() {
        bail!("run {run:?} not found (looked in {})", dir.display());
    }
    Ok(dir)
}

/// One column per run, rows aligned on epoch; a run without a row at some
/// epoch leaves that cell blank.
pub fn write_curves(path: &Path, runs: &[RunRecord], metric: fn(&MetricRow) -> f64) -> Result<()> {
    let epochs: BTreeSet<usize> = runs.iter().flat_map(|r| r.rows.iter().map(|m| m.epoch)).collect();
    let columns: Vec<BTreeMap<usize, f64>> = runs
        .iter()
        .map(|r| r.rows.iter().map(|m| (m.epoch, metric(m))).collect())
        .collect();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["epoch".to_string()];
    header.extend(runs.iter().map(|r| r.run_id.clone()));
    w.write_record(&header)?;
    for e in epochs {
        let mut row = vec![e.to_string()];
        row.extend(columns.iter().map(|c| c.get(&e).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut runs = Vec::new();
    for r in &args.runs {
        let dir = resolve(&args.runs_root, r)?;
        runs.push(RunRecord::load(&dir).with_context(|| format!("loading {}", dir.display()))?);
    }
    std::fs::create_dir_all(&args.out)?;
    write_curves(&args.out.join("fig1_symkl.csv"), &runs, |m| m.sym_kl)?;
    write_curves(&args.out.join("fig1_wasserstein.csv"), &runs, |m| m.wasserstein)?;

    let mut per_model: BTreeMap<String, usize> = BTreeMap::new();
    for r in &runs {
        *per_model.entry(r.config.model.to_string()).or_default() += 1;
    }
    for r in &runs {
        let model = r.config.model.to_string();
        // Several runs of one model keep their run id in the name.
        let label = if per_model[&model] > 1 {
            format!("{model}_{}", r.run_id)
        } else {
            model
        };
        for s in &r.snapshots {
            let dest = args.out.join(format!("fig2_epoch_{}_{label}.csv", s.epoch));
            std::fs::copy(&s.path, &dest).with_context(|| format!("copying {}", s.path.display()))?;
        }
    }
    println!("{}", args.out.display());
    Ok(())
}
