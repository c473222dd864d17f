use std::path::Path;

use d2gan::trainer::*;
use d2gan::Error;
use tempfile::TempDir;

fn small(model: ModelKind, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::published(model);
    c.noise_dim = 16;
    c.hidden = 32;
    c.batch_size = 64;
    c.epochs = epochs;
    c.metric_every = 25;
    c.snapshot_every = 50;
    c.eval_samples = 128;
    c.snapshot_samples = 100;
    c
}

fn opts(dir: &Path, id: &str) -> RunOptions {
    RunOptions {
        out_root: dir.to_path_buf(),
        run_id: Some(id.into()),
    }
}

#[test]
fn single_epoch_run_has_one_row() {
    let dir = TempDir::new().unwrap();
    let rec = train(&small(ModelKind::D2, 1), &opts(dir.path(), "one")).unwrap();
    assert_eq!(rec.rows.len(), 1);
    assert_eq!(rec.rows[0].epoch, 1);
    assert_eq!(rec.snapshots.len(), 1);
    let loaded = RunRecord::load(&rec.dir).unwrap();
    assert_eq!(loaded.rows, rec.rows);
    assert_eq!(loaded.config, rec.config);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = TempDir::new().unwrap();
    for model in [ModelKind::Vanilla, ModelKind::D2alpha] {
        let full = train(&small(model, 100), &opts(dir.path(), &format!("{model}_full"))).unwrap();
        let half = train(&small(model, 50), &opts(dir.path(), &format!("{model}_split"))).unwrap();
        let resumed = resume(&half.checkpoint, Some(&small(model, 100))).unwrap();

        let bits = |rows: &[MetricRow]| -> Vec<[u64; 4]> {
            rows.iter()
                .map(|r| [r.epoch as u64, r.wasserstein.to_bits(), r.sym_kl.to_bits(), r.value_fn.to_bits()])
                .collect()
        };
        assert_eq!(bits(&full.rows), bits(&resumed.rows));
        let a = Checkpoint::load(&full.checkpoint).unwrap();
        let b = Checkpoint::load(&resumed.checkpoint).unwrap();
        assert_eq!(a.nets, b.nets);
        assert_eq!(a.epoch, 100);
        assert_eq!(
            std::fs::read(full.dir.join("samples_epoch_100.csv")).unwrap(),
            std::fs::read(resumed.dir.join("samples_epoch_100.csv")).unwrap()
        );
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let dir = TempDir::new().unwrap();
    let rec = train(&small(ModelKind::D2, 2), &opts(dir.path(), "c")).unwrap();
    let text = std::fs::read_to_string(&rec.checkpoint).unwrap();

    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert!(matches!(Checkpoint::load(&truncated), Err(Error::Checkpoint(_))));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = 99.into();
    let wrong_version = dir.path().join("version.json");
    std::fs::write(&wrong_version, v.to_string()).unwrap();
    assert!(matches!(Checkpoint::load(&wrong_version), Err(Error::Checkpoint(_))));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["config"]["lr"] = 0.5.into();
    let edited = dir.path().join("edited.json");
    std::fs::write(&edited, v.to_string()).unwrap();
    assert!(matches!(Checkpoint::load(&edited), Err(Error::Checkpoint(_))));

    let mut other = small(ModelKind::D2, 10);
    other.lr = 0.5;
    assert!(resume(&rec.checkpoint, Some(&other)).is_err());
}

#[test]
fn updates_move_the_batch_value_the_right_way() {
    for model in [ModelKind::Vanilla, ModelKind::D2, ModelKind::D2alpha] {
        let mut t = Trainer::new(small(model, 100)).unwrap();
        let (mut d_bad, mut g_bad) = (0, 0);
        for _ in 0..100 {
            let p = t.step_probed().unwrap();
            d_bad += (p.disc_after < p.disc_before) as usize;
            g_bad += (p.gen_after > p.gen_before) as usize;
        }
        assert!(d_bad <= 5, "{model}: {d_bad} discriminator steps lowered the value");
        assert!(g_bad <= 5, "{model}: {g_bad} generator steps raised the value");
    }
}

#[test]
fn non_saturating_flag_is_vanilla_only() {
    let mut c = small(ModelKind::D2, 1);
    c.non_saturating = true;
    assert!(matches!(Trainer::new(c), Err(Error::Config(_))));
    let mut c = small(ModelKind::Vanilla, 3);
    c.non_saturating = true;
    let mut t = Trainer::new(c).unwrap();
    t.step().unwrap();
    assert!(t.evaluate().unwrap().wasserstein.is_finite());
}
