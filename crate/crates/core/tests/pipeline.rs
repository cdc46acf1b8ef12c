use std::fs;

use ppt_omega::criteria::Criterion;
use ppt_omega::estimator::{checkpoint_load, checkpoint_save, IntervalRecord, RunState};
use ppt_omega::measures::MetricName;
use ppt_omega::run::{
    self, RunConfig, RunOptions, CHECKPOINT_FILE, CONFIG_FILE, DELTAS_FILE, INTERVALS_FILE, SUMMARY_FILE,
};
use ppt_omega::estimator::SeriesConvention;
use ppt_omega::Error;

fn config(dir: &std::path::Path, total: u64, every: u64) -> RunConfig {
    let mut c = RunConfig::new(2, 3, total, every);
    c.criteria = vec![Criterion::Ppt, Criterion::CrossNorm];
    c.output_dir = dir.to_path_buf();
    c
}

#[test]
fn split_run_matches_straight_run() {
    let cfg = RunConfig::new(2, 2, 1000, 100);
    let integrator = cfg.integrator().unwrap();
    let layout = integrator.evaluator.layout();

    let mut straight = RunState::new(cfg.hash(), layout.clone());
    let all = integrator.log_interval(&mut straight, 1000, 100).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let mut first = RunState::new(cfg.hash(), layout);
    let mut records: Vec<IntervalRecord> = integrator.log_interval(&mut first, 500, 100).unwrap();
    checkpoint_save(&first, &path).unwrap();
    let mut second = checkpoint_load(&path, Some(&cfg.hash())).unwrap();
    records.extend(integrator.log_interval(&mut second, 1000, 100).unwrap());

    assert_eq!(second, straight);
    let rows = |r: &[IntervalRecord]| r.iter().flat_map(|x| x.csv_lines()).collect::<Vec<_>>();
    assert_eq!(rows(&records), rows(&all));
}

#[test]
fn rerun_is_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run::run(&config(a.path(), 20_000, 5_000), RunOptions::default()).unwrap();
    run::run(&config(b.path(), 20_000, 5_000), RunOptions::default()).unwrap();
    for f in [INTERVALS_FILE, DELTAS_FILE, SUMMARY_FILE, CHECKPOINT_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let lines = fs::read_to_string(a.path().join(INTERVALS_FILE)).unwrap();
    assert!(lines.starts_with("interval,n_points,metric,criterion,convention,prob_full,prob_boundary,omega\n"));
    // 4 intervals x 2 criteria x (2 conventions + pooled)
    assert_eq!(lines.lines().count(), 1 + 4 * 2 * 3);
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let straight = tempfile::tempdir().unwrap();
    let cfg = config(straight.path(), 20_000, 5_000);
    run::run(&cfg, RunOptions::default()).unwrap();

    // state after two intervals, plus log rows of a third interval written
    // just before a crash
    let crashed = tempfile::tempdir().unwrap();
    let cfg_b = config(crashed.path(), 20_000, 5_000);
    let integrator = cfg_b.integrator().unwrap();
    let mut state = RunState::new(cfg_b.hash(), integrator.evaluator.layout());
    integrator.log_interval(&mut state, 10_000, 5_000).unwrap();
    fs::write(crashed.path().join(CONFIG_FILE), cfg_b.to_toml().unwrap()).unwrap();
    checkpoint_save(&state, &crashed.path().join(CHECKPOINT_FILE)).unwrap();
    for f in [INTERVALS_FILE, DELTAS_FILE] {
        let full = fs::read_to_string(straight.path().join(f)).unwrap();
        let keep: Vec<&str> = full
            .lines()
            .filter(|l| !l.starts_with("4,"))
            .collect();
        fs::write(crashed.path().join(f), keep.join("\n") + "\n").unwrap();
    }

    let resumed = run::resume(crashed.path(), Some(3), RunOptions::default()).unwrap();
    assert_eq!(resumed.n_points, 20_000);
    for f in [INTERVALS_FILE, DELTAS_FILE, SUMMARY_FILE] {
        assert_eq!(
            fs::read(straight.path().join(f)).unwrap(),
            fs::read(crashed.path().join(f)).unwrap(),
            "{f}"
        );
    }

    // nothing left to do
    let before = fs::read(crashed.path().join(INTERVALS_FILE)).unwrap();
    run::resume(&crashed.path().join(CHECKPOINT_FILE), None, RunOptions::default()).unwrap();
    assert_eq!(before, fs::read(crashed.path().join(INTERVALS_FILE)).unwrap());
}

#[test]
fn resume_refuses_a_changed_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 10_000, 5_000);
    run::run(&cfg, RunOptions::default()).unwrap();
    let mut changed = cfg.clone();
    changed.total_points = 20_000;
    fs::write(dir.path().join(CONFIG_FILE), changed.to_toml().unwrap()).unwrap();
    assert!(matches!(
        run::resume(dir.path(), None, RunOptions::default()),
        Err(Error::HashMismatch { .. })
    ));
}

#[test]
fn ppt_tolerance_does_not_move_the_estimate() {
    let mut omegas = Vec::new();
    for tol in [1e-12, 1e-8] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(2, 2, 100_000, 100_000);
        cfg.tolerances.ppt = tol;
        cfg.output_dir = dir.path().to_path_buf();
        let s = run::run(&cfg, RunOptions::default()).unwrap();
        omegas.push(s.cell(MetricName::Hs, Criterion::Ppt, SeriesConvention::Inner).unwrap().omega.unwrap());
    }
    assert!((omegas[0] - omegas[1]).abs() < 1e-3, "{omegas:?}");
}

#[test]
fn monotone_metrics_leave_boundary_cells_empty() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(2, 2, 5_000, 5_000);
    cfg.metrics = vec![MetricName::Hs, MetricName::Bures, MetricName::KuboMori, MetricName::WignerYanase];
    cfg.output_dir = dir.path().to_path_buf();
    let s = run::run(&cfg, RunOptions::default()).unwrap();
    for m in [MetricName::Bures, MetricName::KuboMori, MetricName::WignerYanase] {
        let c = s.cell(m, Criterion::Ppt, SeriesConvention::Inner).unwrap();
        let p = c.prob_full.unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(c.prob_boundary, None);
        assert_eq!(c.omega, None);
    }
    let hs = s.cell(MetricName::Hs, Criterion::Ppt, SeriesConvention::Inner).unwrap();
    assert!(hs.omega.is_some());
}

#[test]
fn prng_sampling_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(2, 2, 20_000, 10_000);
    cfg.sampling = run::Sampling::Prng { seed: 5 };
    cfg.output_dir = dir.path().to_path_buf();
    let s = run::run(&cfg, RunOptions::default()).unwrap();
    let o = s.cell(MetricName::Hs, Criterion::Ppt, SeriesConvention::Inner).unwrap().omega.unwrap();
    assert!(o > 1.0 && o < 3.0, "{o}");
}
