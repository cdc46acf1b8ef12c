//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line to stderr.

use std::io::Write;
use std::path::Path;

use ppt_omega::criteria::{
    cross_norm_pass, is_ppt, partial_transpose, partial_transpose_first, Convention, Criterion, Split,
    DEFAULT_TOLERANCE,
};
use ppt_omega::estimator::{edit_series, Accumulator, CellLayout, EditRule, SeriesConvention, SeriesPoint};
use ppt_omega::linalg::{hermitian_eigenvalues, trace, CMatrix};
use ppt_omega::measures::{hs_density, MetricName};
use ppt_omega::oracle_exact::{bell_state, mc_ppt_probability, werner_state, GinibreSampler};
use ppt_omega::run::{self, RunConfig, RunOptions, RunSummary, INTERVALS_FILE};
use ppt_omega::state_param::{cube_dimension, SpectrumPoint};

fn report(id: &str, pass: bool, detail: &str) {
    let mut err = std::io::stderr().lock();
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(err, "\n{id} {verdict} {detail}");
}

fn run_in(dir: &Path, mut cfg: RunConfig) -> RunSummary {
    cfg.output_dir = dir.to_path_buf();
    run::run(&cfg, RunOptions::default()).expect("run completes")
}

fn omega_of(s: &RunSummary, criterion: Criterion, convention: SeriesConvention) -> Option<f64> {
    s.cell(MetricName::Hs, criterion, convention).and_then(|c| c.omega)
}

#[test]
fn ac1_two_qubit_hs_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_in(dir.path(), RunConfig::new(2, 2, 20_000_000, 2_000_000));
    let o = omega_of(&s, Criterion::Ppt, SeriesConvention::Inner);
    let pass = o.is_some_and(|o| (1.90..=2.10).contains(&o));
    report("AC1", pass, &format!("2x2 HS omega {o:?} over {} points per stream, want [1.90, 2.10]", s.n_points));
    assert!(pass);
}

#[test]
fn ac2_qubit_qutrit_two_conventions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(2, 3, 10_000_000, 1_000_000);
    cfg.pooling = ppt_omega::estimator::PoolingRule::BoundaryWeighted;
    let s = run_in(dir.path(), cfg);
    let inner = omega_of(&s, Criterion::Ppt, SeriesConvention::Inner);
    let outer = omega_of(&s, Criterion::Ppt, SeriesConvention::Outer);
    let pooled = s.pooled.first().and_then(|p| p.omega);
    let in_range = |o: Option<f64>| o.is_some_and(|o| (1.85..=2.20).contains(&o));
    let pooled_ok = match (inner, outer, pooled) {
        (Some(a), Some(b), Some(p)) => (p - 0.5 * (a + b)).abs() <= 0.05,
        _ => false,
    };
    let pass = in_range(inner) && in_range(outer) && pooled_ok;
    report(
        "AC2",
        pass,
        &format!("2x3 omega inner {inner:?}, outer {outer:?}, pooled {pooled:?}; want both in [1.85, 2.20], pooled within 0.05 of their mean"),
    );
    assert!(pass);
}

#[test]
fn ac3_area_to_volume() {
    let mut errors = Vec::new();
    for d in [2usize, 3] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(1, d, 1_000_000, 1_000_000);
        cfg.criteria = vec![];
        cfg.absolute_volumes = true;
        let s = run_in(dir.path(), cfg);
        errors.push(s.area_volume.map(|c| c.relative_error));
    }
    let pass = errors.iter().all(|e| e.is_some_and(|e| e < 0.01));
    report("AC3", pass, &format!("area/volume relative errors d=2,3: {errors:?}, want < 0.01"));
    assert!(pass);
}

#[test]
fn ac4_ginibre_cross_check() {
    let mc = mc_ppt_probability(2, 2, 4, 1_000_000, 2024).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(2, 2, 1_000_000, 1_000_000);
    cfg.rank_mode = run::RankMode::Full;
    let s = run_in(dir.path(), cfg);
    let cell = s.cell(MetricName::Hs, Criterion::Ppt, SeriesConvention::Inner).unwrap();
    let (p, se) = (cell.prob_full.unwrap(), cell.se_full.unwrap());
    let combined = (mc.standard_error.powi(2) + se.powi(2)).sqrt();
    let z = (mc.estimate - p).abs() / combined;
    let pass = z <= 3.0;
    report(
        "AC4",
        pass,
        &format!("ginibre {:.6} +- {:.6} vs qmc {p:.6} +- {se:.6}: {z:.2} combined SE, want <= 3", mc.estimate, mc.standard_error),
    );
    assert!(pass);
}

#[test]
fn ac5_known_states() {
    let s22 = Split::new(2, 2, Convention::InnerBlocks);
    let mut worst = 0.0f64;
    for p in [0.0, 0.2, 1.0 / 3.0, 0.5, 1.0] {
        let w = werner_state(p);
        let (_, min) = is_ppt(&w, s22, DEFAULT_TOLERANCE).unwrap();
        worst = worst.max((min - (1.0 - 3.0 * p) / 4.0).abs());
    }
    let threshold = is_ppt(&werner_state(1.0 / 3.0), s22, DEFAULT_TOLERANCE).unwrap().0
        && !is_ppt(&werner_state(1.0 / 3.0 + 1e-6), s22, DEFAULT_TOLERANCE).unwrap().0;
    let (bell_pass, bell) = cross_norm_pass(&bell_state(), s22, DEFAULT_TOLERANCE).unwrap();
    let mixed = CMatrix::identity(9, 9).map(|z| z / 9.0);
    let (_, m9) = cross_norm_pass(&mixed, Split::new(3, 3, Convention::InnerBlocks), DEFAULT_TOLERANCE).unwrap();
    worst = worst.max((bell - 2.0).abs()).max((m9 - 1.0 / 3.0).abs());
    let pass = threshold && !bell_pass && worst < 1e-10;
    report("AC5", pass, &format!("Werner and realignment values, largest deviation {worst:e}, want < 1e-10"));
    assert!(pass);
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn ac6_property_suites() {
    const N: u64 = 10_000;
    let sampler = GinibreSampler::new(99);
    let shapes = [(2usize, 2usize), (2, 3), (3, 2), (3, 3)];
    let mut involution = 0usize;
    let mut trace_kept = 0usize;
    let mut duality = 0usize;
    let mut square_agree = 0usize;
    let mut square_total = 0usize;
    for i in 0..N {
        let (d_a, d_b) = shapes[(i % 4) as usize];
        let d = d_a * d_b;
        let rank = 1 + (i as usize / 4) % d;
        let rho = sampler.state(i, d, rank);
        let conv = if i % 8 < 4 { Convention::InnerBlocks } else { Convention::OuterBlocks };
        let split = Split::new(d_a, d_b, conv);
        let pt = partial_transpose(rho.matrix(), split).unwrap();
        if max_diff(&partial_transpose(&pt, split).unwrap(), rho.matrix()) == 0.0 {
            involution += 1;
        }
        if (trace(&pt) - trace(rho.matrix())).norm() < 1e-12 {
            trace_kept += 1;
        }
        let a = hermitian_eigenvalues(&pt);
        let b = hermitian_eigenvalues(&partial_transpose_first(rho.matrix(), split).unwrap());
        if a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10) {
            duality += 1;
        }
        if d_a == d_b {
            square_total += 1;
            let inner = is_ppt(rho.matrix(), Split::new(d_a, d_b, Convention::InnerBlocks), DEFAULT_TOLERANCE).unwrap();
            let outer = is_ppt(rho.matrix(), Split::new(d_a, d_b, Convention::OuterBlocks), DEFAULT_TOLERANCE).unwrap();
            if inner.0 == outer.0 && (inner.1 - outer.1).abs() < 1e-10 {
                square_agree += 1;
            }
        }
    }

    // spectra with a repeated eigenvalue have zero HS density
    let mut vandermonde = 0usize;
    for i in 0..N {
        let d = 2 + (i % 7) as usize;
        let mut l: Vec<f64> = (0..d).map(|k| 1.0 + ((i as usize * 7 + k * 13) % 17) as f64).collect();
        l[d - 1] = l[(i as usize) % (d - 1)];
        let total: f64 = l.iter().sum();
        let spec = SpectrumPoint::new(l.iter().map(|x| x / total).collect(), false).unwrap();
        if hs_density(&spec) == 0.0 {
            vandermonde += 1;
        }
    }

    // merging split accumulators against a single pass
    let layout = CellLayout {
        metrics: vec![MetricName::Hs],
        criteria: vec![Criterion::Ppt, Criterion::CrossNorm],
        conventions: vec![Convention::InnerBlocks],
    };
    let outcome = |p: bool, c: bool| {
        use ppt_omega::criteria::{ConventionOutcome, CriterionOutcome};
        let o = |pass| ConventionOutcome { convention: Convention::InnerBlocks, pass, value: 0.0 };
        CriterionOutcome { ppt: vec![o(p)], cross_norm: vec![o(c)] }
    };
    let mut merge_ok = 0usize;
    for i in 0..N {
        let n = 5 + (i % 50) as usize;
        let pts: Vec<(f64, bool, bool)> = (0..n)
            .map(|k| {
                let h = (i as usize * 31 + k * 17) % 101;
                (h as f64 * 1.37e-3 + 1e-9 * k as f64, h % 3 == 0, h % 2 == 0)
            })
            .collect();
        let mut whole = Accumulator::new(layout.clone());
        for &(w, p, c) in &pts {
            whole.accumulate(&[w], &outcome(p, c));
        }
        let parts = 1 + (i % 7) as usize;
        let mut merged = Accumulator::new(layout.clone());
        for chunk in pts.chunks(n.div_ceil(parts)) {
            let mut a = Accumulator::new(layout.clone());
            for &(w, p, c) in chunk {
                a.accumulate(&[w], &outcome(p, c));
            }
            merged.merge(&a);
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
        let ok = merged.n_points == whole.n_points
            && merged.contingency == whole.contingency
            && whole.sum_weight_pass.iter().zip(&merged.sum_weight_pass).all(|(a, b)| close(a.value(), b.value()))
            && close(whole.sum_weight[0].value(), merged.sum_weight[0].value());
        if ok {
            merge_ok += 1;
        }
    }

    let n = N as usize;
    let pass = involution == n
        && trace_kept == n
        && duality == n
        && square_agree == square_total
        && vandermonde == n
        && merge_ok == n;
    report(
        "AC6",
        pass,
        &format!(
            "over {n} instances each: involution {involution}, trace {trace_kept}, duality {duality}, square agreement {square_agree}/{square_total}, vandermonde {vandermonde}, merge {merge_ok}"
        ),
    );
    assert!(pass);
}

#[test]
fn ac7_two_qutrit_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(3, 3, 100_000, 50_000);
    cfg.criteria = vec![Criterion::Ppt, Criterion::CrossNorm];
    let s = run_in(dir.path(), cfg);
    let dims = (cube_dimension(9, false), cube_dimension(9, true));
    let table = s.contingency_full.map(|t| t.total());
    let pass = s.n_points == 100_000 && dims == (80, 79) && table == Some(100_000) && s.contingency_boundary.is_some();
    report(
        "AC7",
        pass,
        &format!("3x3 run of {} points, cube dimensions {dims:?}, contingency total {table:?}", s.n_points),
    );
    assert!(pass);
}

const FIXTURE: [f64; 27] = [
    1.85599, 1.85619, 1.85765, 1.85915, 1.85941, 1.88103, 1.89082, 1.89125, 0.208052, 1.89083, 1.89098,
    1.89101, 1.89056, 1.89181, 0.0198977, 1.89892, 1.9031, 1.95864, 1.96107, 1.95866, 1.95938, 1.95924,
    1.98872, 1.98913, 1.98842, 1.98853, 1.98835,
];

#[test]
fn ac8_editing_fixture() {
    let points: Vec<SeriesPoint> = FIXTURE
        .iter()
        .enumerate()
        .map(|(i, &v)| SeriesPoint { interval: 54 + i as u64, value: Some(v), delta: None })
        .collect();
    let edited = edit_series(&points, EditRule::default()).unwrap();
    let kept: Vec<f64> = edited.kept.iter().filter_map(|p| p.value).collect();

    // the same fixture through the report path
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join(INTERVALS_FILE);
    let mut csv = String::from("interval,n_points,metric,criterion,convention,prob_full,prob_boundary,omega\n");
    for p in &points {
        csv.push_str(&format!("{},{},hs,ppt,inner,,,{}\n", p.interval, p.interval * 1000, p.value.unwrap()));
    }
    std::fs::write(&log, csv).unwrap();
    let rep = run::report(&log, EditRule::default(), dir.path()).unwrap();
    let series = rep.get(MetricName::Hs, Criterion::Ppt, SeriesConvention::Inner).unwrap();

    let pass = edited.discarded == vec![62, 68]
        && kept.len() == 25
        && kept.iter().all(|v| (1.85..=2.0).contains(v))
        && series.discarded == edited.discarded
        && series.kept == 25;
    report(
        "AC8",
        pass,
        &format!("discarded intervals {:?}, {} kept values in [1.85, 2]", edited.discarded, kept.len()),
    );
    assert!(pass);
}

#[test]
fn ac9_worker_count_does_not_change_output() {
    let mut outputs = Vec::new();
    for workers in [1, 4, 8] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(2, 3, 60_000, 20_000);
        cfg.criteria = vec![Criterion::Ppt, Criterion::CrossNorm];
        cfg.workers = workers;
        run_in(dir.path(), cfg);
        let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
        outputs.push((read(INTERVALS_FILE), read(run::DELTAS_FILE), read(run::SUMMARY_FILE)));
    }
    let pass = outputs.windows(2).all(|w| w[0] == w[1]);
    report("AC9", pass, "interval CSV, delta CSV and summary byte-identical for 1, 4 and 8 workers");
    assert!(pass);
}
