//! Weighted accumulation of criterion indicators over paired full-rank and
//! boundary point streams, cumulative interval records, series editing and
//! checkpoints.
//!
//! Every probability is a ratio of weighted sums `sum w * pass / sum w`, and the
//! ratio of the full-rank to the boundary probability is the Omega estimate.
//! Cumulative values are always recomputed from the full accumulators.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{Convention, CriteriaPlan, Criterion, CriterionOutcome};
use crate::error::{Error, Result};
use crate::measures::{clipped_weight, MetricKind, MetricName};
use crate::qmc_sequence::PointSource;
use crate::state_param::coords_to_state;

/// Points per work unit. Fixed so that results do not depend on worker count.
pub const CHUNK_SIZE: u64 = 1024;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Which (metric, criterion, convention) cells an accumulator tracks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    pub metrics: Vec<MetricName>,
    pub criteria: Vec<Criterion>,
    pub conventions: Vec<Convention>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub metric: MetricName,
    pub criterion: Criterion,
    pub convention: Convention,
}

impl CellLayout {
    pub fn n_cells(&self) -> usize {
        self.metrics.len() * self.criteria.len() * self.conventions.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.metrics.iter().flat_map(move |&metric| {
            self.criteria.iter().flat_map(move |&criterion| {
                self.conventions.iter().map(move |&convention| Cell {
                    metric,
                    criterion,
                    convention,
                })
            })
        })
    }

    pub fn metric_index(&self, metric: MetricName) -> Option<usize> {
        self.metrics.iter().position(|&m| m == metric)
    }

    pub fn cell_index(&self, cell: Cell) -> Option<usize> {
        let m = self.metric_index(cell.metric)?;
        let c = self.criteria.iter().position(|&c| c == cell.criterion)?;
        let v = self.conventions.iter().position(|&v| v == cell.convention)?;
        Some((m * self.criteria.len() + c) * self.conventions.len() + v)
    }

    fn tracks_contingency(&self) -> bool {
        self.criteria.contains(&Criterion::Ppt) && self.criteria.contains(&Criterion::CrossNorm)
    }
}

/// 2x2 point counts indexed `[ppt_pass][cross_norm_pass]`, using the first
/// convention of the layout for both criteria.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    pub counts: [[u64; 2]; 2],
}

impl Contingency {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn ppt_pass_cn_pass(&self) -> u64 {
        self.counts[1][1]
    }
    pub fn ppt_pass_cn_fail(&self) -> u64 {
        self.counts[1][0]
    }
    pub fn ppt_fail_cn_pass(&self) -> u64 {
        self.counts[0][1]
    }
    pub fn ppt_fail_cn_fail(&self) -> u64 {
        self.counts[0][0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub layout: CellLayout,
    pub n_points: u64,
    pub sum_weight: Vec<CompensatedSum>,
    pub sum_weight_sq: Vec<CompensatedSum>,
    pub sum_weight_pass: Vec<CompensatedSum>,
    pub sum_weight_sq_pass: Vec<CompensatedSum>,
    /// Present only when both criteria are evaluated.
    pub contingency: Option<Contingency>,
    pub clipped_count: u64,
}

impl Accumulator {
    pub fn new(layout: CellLayout) -> Self {
        let nm = layout.metrics.len();
        let nc = layout.n_cells();
        Accumulator {
            contingency: layout.tracks_contingency().then(Contingency::default),
            layout,
            n_points: 0,
            sum_weight: vec![CompensatedSum::default(); nm],
            sum_weight_sq: vec![CompensatedSum::default(); nm],
            sum_weight_pass: vec![CompensatedSum::default(); nc],
            sum_weight_sq_pass: vec![CompensatedSum::default(); nc],
            clipped_count: 0,
        }
    }

    /// Adds one point. `weights` has one entry per metric of the layout.
    ///
    /// Panics on a negative weight.
    pub fn accumulate(&mut self, weights: &[f64], outcome: &CriterionOutcome) {
        assert_eq!(weights.len(), self.layout.metrics.len(), "one weight per metric");
        self.n_points += 1;
        let nc = self.layout.criteria.len();
        let nv = self.layout.conventions.len();
        for (m, &w) in weights.iter().enumerate() {
            assert!(w >= 0.0, "negative weight {w}");
            self.sum_weight[m].add(w);
            self.sum_weight_sq[m].add(w * w);
            for (c, &criterion) in self.layout.criteria.iter().enumerate() {
                for (v, &convention) in self.layout.conventions.iter().enumerate() {
                    if outcome.passes(criterion, convention) {
                        let i = (m * nc + c) * nv + v;
                        self.sum_weight_pass[i].add(w);
                        self.sum_weight_sq_pass[i].add(w * w);
                    }
                }
            }
        }
        if let Some(table) = self.contingency.as_mut() {
            let conv = self.layout.conventions[0];
            let p = outcome.passes(Criterion::Ppt, conv) as usize;
            let c = outcome.passes(Criterion::CrossNorm, conv) as usize;
            table.counts[p][c] += 1;
        }
    }

    pub fn record_clipped(&mut self) {
        self.clipped_count += 1;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        assert_eq!(self.layout, other.layout, "merging accumulators with different layouts");
        self.n_points += other.n_points;
        self.clipped_count += other.clipped_count;
        for (a, b) in self.sum_weight.iter_mut().zip(&other.sum_weight) {
            a.merge(b);
        }
        for (a, b) in self.sum_weight_sq.iter_mut().zip(&other.sum_weight_sq) {
            a.merge(b);
        }
        for (a, b) in self.sum_weight_pass.iter_mut().zip(&other.sum_weight_pass) {
            a.merge(b);
        }
        for (a, b) in self.sum_weight_sq_pass.iter_mut().zip(&other.sum_weight_sq_pass) {
            a.merge(b);
        }
        if let (Some(a), Some(b)) = (self.contingency.as_mut(), other.contingency.as_ref()) {
            for (ra, rb) in a.counts.iter_mut().zip(&b.counts) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
        }
    }

    pub fn total_weight(&self, metric: MetricName) -> Option<f64> {
        self.layout
            .metric_index(metric)
            .map(|m| self.sum_weight[m].value())
    }

    pub fn pass_weight(&self, cell: Cell) -> Option<f64> {
        self.layout
            .cell_index(cell)
            .map(|i| self.sum_weight_pass[i].value())
    }

    pub fn mean_weight(&self, metric: MetricName) -> Option<f64> {
        if self.n_points == 0 {
            return None;
        }
        self.total_weight(metric).map(|w| w / self.n_points as f64)
    }

    /// Weighted pass fraction; `None` while the total weight is zero.
    pub fn probability(&self, cell: Cell) -> Option<f64> {
        let total = self.total_weight(cell.metric)?;
        let pass = self.pass_weight(cell)?;
        (total > 0.0).then(|| (pass / total).clamp(0.0, 1.0))
    }

    /// Delta-method standard error of [`Self::probability`], treating the points
    /// as independent draws.
    pub fn standard_error(&self, cell: Cell) -> Option<f64> {
        let p = self.probability(cell)?;
        let m = self.layout.metric_index(cell.metric)?;
        let i = self.layout.cell_index(cell)?;
        let s1 = self.sum_weight[m].value();
        let s2 = self.sum_weight_sq[m].value();
        let s2p = self.sum_weight_sq_pass[i].value();
        let var = (s2p * (1.0 - 2.0 * p) + p * p * s2) / (s1 * s1);
        Some(var.max(0.0).sqrt())
    }
}

pub fn probability(acc: &Accumulator, cell: Cell) -> Option<f64> {
    acc.probability(cell)
}

/// Full-rank over boundary probability; `None` when either is undefined or the
/// boundary probability is zero.
pub fn omega(full: &Accumulator, boundary: &Accumulator, cell: Cell) -> Option<f64> {
    let pf = full.probability(cell)?;
    let pb = boundary.probability(cell)?;
    (pb > 0.0).then(|| pf / pb)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingRule {
    /// Each convention's Omega weighted by its boundary pass-weight.
    #[default]
    BoundaryWeighted,
    Arithmetic,
}

/// Combines the per-convention Omega values. Only defined when the layout
/// carries two conventions.
pub fn pooled_omega(
    full: &Accumulator,
    boundary: &Accumulator,
    metric: MetricName,
    criterion: Criterion,
    rule: PoolingRule,
) -> Result<Option<f64>> {
    if full.layout.conventions.len() < 2 {
        return Err(Error::NotApplicable(
            "pooling needs two inequivalent conventions".into(),
        ));
    }
    let mut parts = Vec::new();
    for &convention in &full.layout.conventions {
        let cell = Cell { metric, criterion, convention };
        let Some(o) = omega(full, boundary, cell) else {
            return Ok(None);
        };
        let w = match rule {
            PoolingRule::BoundaryWeighted => boundary.pass_weight(cell).unwrap_or(0.0),
            PoolingRule::Arithmetic => 1.0,
        };
        parts.push((o, w));
    }
    Ok(pool_values(&parts))
}

/// Weighted mean of `(value, weight)` pairs.
pub fn pool_values(parts: &[(f64, f64)]) -> Option<f64> {
    let total: f64 = parts.iter().map(|p| p.1).sum();
    (total > 0.0).then(|| parts.iter().map(|(o, w)| o * w).sum::<f64>() / total)
}

/// Maps hypercube coordinates to weights and criterion outcomes.
#[derive(Clone, Debug)]
pub struct PointEvaluator {
    pub d_a: usize,
    pub d_b: usize,
    pub metrics: Vec<MetricKind>,
    pub plan: CriteriaPlan,
    pub clip_floor: f64,
}

/// One evaluated point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSample {
    pub weights: Vec<f64>,
    pub clipped: bool,
    pub outcome: CriterionOutcome,
}

impl PointEvaluator {
    pub fn dim(&self) -> usize {
        self.d_a * self.d_b
    }

    pub fn layout(&self) -> CellLayout {
        CellLayout {
            metrics: self.metrics.iter().map(|m| m.name).collect(),
            criteria: self.plan.criteria.clone(),
            conventions: self.plan.conventions.clone(),
        }
    }

    pub fn evaluate(&self, coords: &[f64], rank_deficient: bool) -> Result<PointSample> {
        let (rho, spec) = coords_to_state(coords, self.dim(), rank_deficient)?;
        let mut clipped = false;
        let mut weights = Vec::with_capacity(self.metrics.len());
        for metric in &self.metrics {
            // monotone boundary densities are not defined: those cells stay empty
            let w = if rank_deficient && metric.is_monotone() {
                0.0
            } else {
                match clipped_weight(&spec, metric, self.clip_floor)? {
                    Some(w) => w,
                    None => {
                        clipped = true;
                        0.0
                    }
                }
            };
            weights.push(w);
        }
        let outcome = self.plan.decide(rho.matrix())?;
        Ok(PointSample { weights, clipped, outcome })
    }

    /// Accumulates points `start .. start + count` of `source`. Work is split
    /// into fixed chunks evaluated in parallel and merged in index order, so
    /// the result is independent of the thread count.
    pub fn integrate(
        &self,
        source: &PointSource,
        rank_deficient: bool,
        start: u64,
        count: u64,
    ) -> Result<Accumulator> {
        let layout = self.layout();
        let n_chunks = count.div_ceil(CHUNK_SIZE);
        let parts: Vec<Accumulator> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let lo = start + c * CHUNK_SIZE;
                let hi = (lo + CHUNK_SIZE).min(start + count);
                let mut acc = Accumulator::new(layout.clone());
                source.for_each(lo, hi - lo, |_, coords| {
                    let s = self.evaluate(coords, rank_deficient)?;
                    if s.clipped {
                        acc.record_clipped();
                    }
                    acc.accumulate(&s.weights, &s.outcome);
                    Ok(())
                })?;
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = Accumulator::new(layout);
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }
}

/// Progress of a paired run: everything needed to continue it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    pub config_hash: String,
    pub next_index: u64,
    pub intervals_done: u64,
    pub full: Accumulator,
    pub boundary: Accumulator,
}

impl RunState {
    pub fn new(config_hash: String, layout: CellLayout) -> Self {
        RunState {
            version: CHECKPOINT_VERSION,
            config_hash,
            next_index: 0,
            intervals_done: 0,
            full: Accumulator::new(layout.clone()),
            boundary: Accumulator::new(layout),
        }
    }
}

/// Interval increments of both streams.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalDelta {
    pub full: Accumulator,
    pub boundary: Accumulator,
}

/// Row label for per-convention and pooled series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesConvention {
    Inner,
    Outer,
    Pooled,
}

impl SeriesConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesConvention::Inner => "inner",
            SeriesConvention::Outer => "outer",
            SeriesConvention::Pooled => "pooled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inner" => Some(SeriesConvention::Inner),
            "outer" => Some(SeriesConvention::Outer),
            "pooled" => Some(SeriesConvention::Pooled),
            _ => None,
        }
    }
}

impl From<Convention> for SeriesConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::InnerBlocks => SeriesConvention::Inner,
            Convention::OuterBlocks => SeriesConvention::Outer,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub metric: MetricName,
    pub criterion: Criterion,
    pub convention: SeriesConvention,
    pub prob_full: Option<f64>,
    pub prob_boundary: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    /// 1-based.
    pub interval_index: u64,
    pub points_per_interval: u64,
    /// Cumulative points per stream.
    pub n_points: u64,
    pub rows: Vec<RecordRow>,
    /// Seconds since the Unix epoch; not part of the CSV log.
    pub timestamp: u64,
}

pub const INTERVAL_CSV_HEADER: &str =
    "interval,n_points,metric,criterion,convention,prob_full,prob_boundary,omega";

pub const DELTA_CSV_HEADER: &str =
    "interval,metric,criterion,convention,weight_full,pass_full,weight_boundary,pass_boundary";

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

impl IntervalRecord {
    /// Cumulative record built from the full accumulators of `state`.
    pub fn from_state(state: &RunState, points_per_interval: u64, pooling: PoolingRule) -> Self {
        let layout = &state.full.layout;
        let mut rows = Vec::new();
        for &metric in &layout.metrics {
            for &criterion in &layout.criteria {
                for &convention in &layout.conventions {
                    let cell = Cell { metric, criterion, convention };
                    rows.push(RecordRow {
                        metric,
                        criterion,
                        convention: convention.into(),
                        prob_full: state.full.probability(cell),
                        prob_boundary: state.boundary.probability(cell),
                        omega: omega(&state.full, &state.boundary, cell),
                    });
                }
                if layout.conventions.len() > 1 {
                    let pooled = pooled_omega(&state.full, &state.boundary, metric, criterion, pooling)
                        .ok()
                        .flatten();
                    rows.push(RecordRow {
                        metric,
                        criterion,
                        convention: SeriesConvention::Pooled,
                        prob_full: None,
                        prob_boundary: None,
                        omega: pooled,
                    });
                }
            }
        }
        IntervalRecord {
            interval_index: state.intervals_done,
            points_per_interval,
            n_points: state.next_index,
            rows,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn csv_lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    self.interval_index,
                    self.n_points,
                    r.metric.as_str(),
                    r.criterion.as_str(),
                    r.convention.as_str(),
                    fmt_opt(r.prob_full),
                    fmt_opt(r.prob_boundary),
                    fmt_opt(r.omega),
                )
            })
            .collect()
    }

    pub fn row(&self, metric: MetricName, criterion: Criterion, convention: SeriesConvention) -> Option<&RecordRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.criterion == criterion && r.convention == convention)
    }
}

/// Per-cell interval increments as CSV rows.
pub fn delta_csv_lines(interval: u64, delta: &IntervalDelta) -> Vec<String> {
    let layout = &delta.full.layout;
    layout
        .cells()
        .map(|cell| {
            format!(
                "{},{},{},{},{},{},{},{}",
                interval,
                cell.metric.as_str(),
                cell.criterion.as_str(),
                SeriesConvention::from(cell.convention).as_str(),
                delta.full.total_weight(cell.metric).unwrap_or(0.0),
                delta.full.pass_weight(cell).unwrap_or(0.0),
                delta.boundary.total_weight(cell.metric).unwrap_or(0.0),
                delta.boundary.pass_weight(cell).unwrap_or(0.0),
            )
        })
        .collect()
}

/// Point sources and evaluator of a paired run.
#[derive(Clone, Debug)]
pub struct Integrator {
    pub evaluator: PointEvaluator,
    pub full_source: Option<PointSource>,
    pub boundary_source: Option<PointSource>,
    pub pooling: PoolingRule,
}

impl Integrator {
    /// Processes the next `count` indices of both streams and folds them into `state`.
    pub fn advance(&self, state: &mut RunState, count: u64) -> Result<IntervalDelta> {
        let layout = self.evaluator.layout();
        let start = state.next_index;
        let full = match &self.full_source {
            Some(src) => self.evaluator.integrate(src, false, start, count)?,
            None => Accumulator::new(layout.clone()),
        };
        let boundary = match &self.boundary_source {
            Some(src) => self.evaluator.integrate(src, true, start, count)?,
            None => Accumulator::new(layout),
        };
        state.full.merge(&full);
        state.boundary.merge(&boundary);
        state.next_index += count;
        state.intervals_done += 1;
        Ok(IntervalDelta { full, boundary })
    }

    /// Advances `state` to `total_points` in blocks of `every_n_points`, handing
    /// each cumulative record to `sink`. A final short block is logged too.
    pub fn log_intervals<F>(
        &self,
        state: &mut RunState,
        total_points: u64,
        every_n_points: u64,
        mut sink: F,
    ) -> Result<()>
    where
        F: FnMut(&RunState, &IntervalRecord, &IntervalDelta) -> Result<()>,
    {
        if every_n_points == 0 {
            return Err(Error::Config("points per interval must be positive".into()));
        }
        while state.next_index < total_points {
            let n = every_n_points.min(total_points - state.next_index);
            let delta = self.advance(state, n)?;
            let record = IntervalRecord::from_state(state, n, self.pooling);
            sink(state, &record, &delta)?;
        }
        Ok(())
    }

    /// Convenience wrapper collecting all records in memory.
    pub fn log_interval(
        &self,
        state: &mut RunState,
        total_points: u64,
        every_n_points: u64,
    ) -> Result<Vec<IntervalRecord>> {
        let mut out = Vec::new();
        self.log_intervals(state, total_points, every_n_points, |_, r, _| {
            out.push(r.clone());
            Ok(())
        })?;
        Ok(out)
    }
}

/// Discards intervals whose cumulative estimate strays from the running median
/// of the previous kept values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditRule {
    pub window: usize,
    /// Largest allowed `|estimate - median| / |median|`.
    pub threshold: f64,
}

impl Default for EditRule {
    fn default() -> Self {
        EditRule {
            window: 5,
            threshold: 0.5,
        }
    }
}

impl EditRule {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config("edit window must be odd and at least 3".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config("edit threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Interval increments of one series cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSums {
    pub weight_full: f64,
    pub pass_full: f64,
    pub weight_boundary: f64,
    pub pass_boundary: f64,
}

impl IntervalSums {
    fn add(&mut self, o: &IntervalSums) {
        self.weight_full += o.weight_full;
        self.pass_full += o.pass_full;
        self.weight_boundary += o.weight_boundary;
        self.pass_boundary += o.pass_boundary;
    }

    pub fn omega(&self) -> Option<f64> {
        if self.weight_full <= 0.0 || self.weight_boundary <= 0.0 || self.pass_boundary <= 0.0 {
            return None;
        }
        Some((self.pass_full / self.weight_full) / (self.pass_boundary / self.weight_boundary))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub interval: u64,
    /// Cumulative estimate as logged.
    pub value: Option<f64>,
    pub delta: Option<IntervalSums>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditedSeries {
    pub kept: Vec<SeriesPoint>,
    pub discarded: Vec<u64>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Walks the series once. When every point carries its interval increments,
/// candidate estimates are recomputed from the kept increments; otherwise the
/// logged values are used as they are. The first kept value is never judged,
/// and the median uses fewer than `window` values until enough are kept.
pub fn edit_series(points: &[SeriesPoint], rule: EditRule) -> Result<EditedSeries> {
    rule.validate()?;
    let recompute = !points.is_empty() && points.iter().all(|p| p.delta.is_some());
    let mut kept: Vec<SeriesPoint> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut discarded = Vec::new();
    let mut running = IntervalSums {
        weight_full: 0.0,
        pass_full: 0.0,
        weight_boundary: 0.0,
        pass_boundary: 0.0,
    };
    for p in points {
        let candidate_sums = recompute.then(|| {
            let mut s = running;
            s.add(&p.delta.expect("checked above"));
            s
        });
        let value = match candidate_sums {
            Some(s) => s.omega(),
            None => p.value,
        };
        let keep = match value {
            Some(v) if !history.is_empty() => {
                let recent = &history[history.len().saturating_sub(rule.window)..];
                let med = median(recent);
                (v - med).abs() <= rule.threshold * med.abs()
            }
            _ => true,
        };
        if keep {
            if let Some(s) = candidate_sums {
                running = s;
            }
            if let Some(v) = value {
                history.push(v);
            }
            kept.push(SeriesPoint {
                interval: p.interval,
                value,
                delta: p.delta,
            });
        } else {
            discarded.push(p.interval);
        }
    }
    Ok(EditedSeries { kept, discarded })
}

/// Atomically writes `state` as JSON next to `path` and renames it into place.
pub fn checkpoint_save(state: &RunState, path: &Path) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        serde_json::to_writer(&mut f, state)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a checkpoint; with `expected_hash`, refuses one written for another config.
pub fn checkpoint_load(path: &Path, expected_hash: Option<&str>) -> Result<RunState> {
    let text = fs::read_to_string(path)?;
    let state: RunState = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if state.version != CHECKPOINT_VERSION {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            message: format!("unsupported checkpoint version {}", state.version),
        });
    }
    if let Some(h) = expected_hash {
        if h != state.config_hash {
            return Err(Error::HashMismatch {
                expected: h.to_string(),
                found: state.config_hash,
            });
        }
    }
    Ok(state)
}
