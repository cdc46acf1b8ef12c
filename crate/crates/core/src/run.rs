//! Run configuration, execution, resumption and reporting.
//!
//! A run directory holds:
//!
//! * `config.toml`: the effective configuration
//! * `intervals.csv`: cumulative per-interval estimates
//! * `interval_deltas.csv`: per-interval weight increments, used by the editor
//! * `checkpoint.json`: accumulators and the next point index
//! * `summary.json`: final estimates

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::criteria::{CriteriaPlan, Criterion};
use crate::error::{Error, Result};
use crate::estimator::{
    checkpoint_load, checkpoint_save, delta_csv_lines, edit_series, omega, pooled_omega, Cell,
    Contingency, EditRule, EditedSeries, Integrator, IntervalSums, PointEvaluator, PoolingRule,
    RunState, SeriesConvention, SeriesPoint, DELTA_CSV_HEADER, INTERVAL_CSV_HEADER,
};
use crate::measures::{CFunction, MetricKind, MetricName, DEFAULT_CLIP_FLOOR};
use crate::oracle_exact::{area_to_volume_check, AreaVolumeCheck, AreaVolumeInput};
use crate::qmc_sequence::{FaureSequence, PointSource, PrngSequence, Scrambling, SequenceConfig};
use crate::state_param::cube_dimension;

pub const CONFIG_FILE: &str = "config.toml";
pub const INTERVALS_FILE: &str = "intervals.csv";
pub const DELTAS_FILE: &str = "interval_deltas.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    Full,
    Boundary,
    #[default]
    Paired,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryStream {
    /// Leading coordinates of the full-rank stream.
    #[default]
    Subset,
    /// A separately scrambled sequence.
    Independent,
}

fn default_scrambling() -> Scrambling {
    Scrambling::Tezuka { seed: 1 }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    Faure {
        #[serde(default = "default_scrambling")]
        scrambling: Scrambling,
        #[serde(default)]
        skip: u64,
        #[serde(default)]
        boundary_stream: BoundaryStream,
    },
    Prng {
        seed: u64,
    },
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Faure {
            scrambling: default_scrambling(),
            skip: 0,
            boundary_stream: BoundaryStream::Subset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ppt: f64,
    pub cross_norm: f64,
    pub clip_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ppt: crate::criteria::DEFAULT_TOLERANCE,
            cross_norm: crate::criteria::DEFAULT_TOLERANCE,
            clip_floor: DEFAULT_CLIP_FLOOR,
        }
    }
}

fn default_metrics() -> Vec<MetricName> {
    vec![MetricName::Hs]
}

fn default_criteria() -> Vec<Criterion> {
    vec![Criterion::Ppt]
}

fn default_workers() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d_a: usize,
    pub d_b: usize,
    #[serde(default)]
    pub rank_mode: RankMode,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricName>,
    /// Kernels for metrics that have no built-in one.
    #[serde(default)]
    pub c_functions: BTreeMap<MetricName, CFunction>,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub sampling: Sampling,
    pub total_points: u64,
    pub points_per_interval: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub edit: EditRule,
    #[serde(default)]
    pub pooling: PoolingRule,
    /// Report absolute HS volume, hyperarea and their ratio in the summary.
    #[serde(default)]
    pub absolute_volumes: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(d_a: usize, d_b: usize, total_points: u64, points_per_interval: u64) -> Self {
        RunConfig {
            d_a,
            d_b,
            rank_mode: RankMode::default(),
            metrics: default_metrics(),
            c_functions: BTreeMap::new(),
            criteria: default_criteria(),
            sampling: Sampling::default(),
            total_points,
            points_per_interval,
            tolerances: Tolerances::default(),
            edit: EditRule::default(),
            pooling: PoolingRule::default(),
            absolute_volumes: false,
            workers: default_workers(),
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.d_b
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_a == 0 || self.d_b == 0 {
            return Err(Error::Config("d_a and d_b must be positive".into()));
        }
        if self.dim() < 2 {
            return Err(Error::Config("the joint dimension must be at least 2".into()));
        }
        if self.total_points == 0 || self.points_per_interval == 0 {
            return Err(Error::Config("total_points and points_per_interval must be positive".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("at least one metric is required".into()));
        }
        let mut seen = self.metrics.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.metrics.len() {
            return Err(Error::Config("metrics are listed twice".into()));
        }
        let mut crit = self.criteria.clone();
        crit.sort();
        crit.dedup();
        if crit.len() != self.criteria.len() {
            return Err(Error::Config("criteria are listed twice".into()));
        }
        self.metric_kinds()?;
        let t = &self.tolerances;
        if !(t.ppt >= 0.0 && t.cross_norm >= 0.0 && t.clip_floor >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        self.edit.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let Sampling::Faure { scrambling: Scrambling::None, boundary_stream: BoundaryStream::Independent, .. } =
            self.sampling
        {
            return Err(Error::Config(
                "an independent boundary stream needs a scrambled sequence".into(),
            ));
        }
        Ok(())
    }

    pub fn metric_kinds(&self) -> Result<Vec<MetricKind>> {
        self.metrics
            .iter()
            .map(|&m| MetricKind::resolve(m, &self.c_functions))
            .collect()
    }

    /// SHA-256 of the configuration with the worker count and output directory
    /// blanked, since neither changes any result.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        c.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn sources(&self) -> Result<(Option<PointSource>, Option<PointSource>)> {
        let d = self.dim();
        let dim_full = cube_dimension(d, false);
        let dim_bnd = cube_dimension(d, true);
        let want_full = self.rank_mode != RankMode::Boundary;
        let want_bnd = self.rank_mode != RankMode::Full;
        let (full, bnd) = match &self.sampling {
            Sampling::Faure { scrambling, skip, boundary_stream } => {
                let mut full_cfg = SequenceConfig::new(dim_full).with_scrambling(*scrambling);
                full_cfg.skip = *skip;
                let bnd_cfg = match boundary_stream {
                    BoundaryStream::Subset => full_cfg.clone().with_subset((0..dim_bnd).collect()),
                    BoundaryStream::Independent => {
                        let mut c = SequenceConfig::new(dim_bnd).with_scrambling(reseed(*scrambling));
                        c.skip = *skip;
                        c
                    }
                };
                (
                    PointSource::Faure(FaureSequence::new(full_cfg)?),
                    PointSource::Faure(FaureSequence::new(bnd_cfg)?),
                )
            }
            Sampling::Prng { seed } => (
                PointSource::Prng(PrngSequence::new(*seed, dim_full)),
                PointSource::Prng(PrngSequence::new(seed.wrapping_add(0x9e37_79b9_7f4a_7c15), dim_bnd)),
            ),
        };
        Ok((want_full.then_some(full), want_bnd.then_some(bnd)))
    }

    pub fn integrator(&self) -> Result<Integrator> {
        let mut plan = CriteriaPlan::new(self.d_a, self.d_b, self.criteria.clone());
        plan.ppt_tolerance = self.tolerances.ppt;
        plan.cross_norm_tolerance = self.tolerances.cross_norm;
        let evaluator = PointEvaluator {
            d_a: self.d_a,
            d_b: self.d_b,
            metrics: self.metric_kinds()?,
            plan,
            clip_floor: self.tolerances.clip_floor,
        };
        let (full_source, boundary_source) = self.sources()?;
        Ok(Integrator {
            evaluator,
            full_source,
            boundary_source,
            pooling: self.pooling,
        })
    }
}

fn reseed(s: Scrambling) -> Scrambling {
    match s {
        Scrambling::None => Scrambling::None,
        Scrambling::Tezuka { seed } => Scrambling::Tezuka { seed: seed.wrapping_add(1) },
        Scrambling::DigitPermutation { seed } => Scrambling::DigitPermutation { seed: seed.wrapping_add(1) },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub metric: MetricName,
    pub criterion: Criterion,
    pub convention: SeriesConvention,
    pub prob_full: Option<f64>,
    pub se_full: Option<f64>,
    pub prob_boundary: Option<f64>,
    pub se_boundary: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledSummary {
    pub metric: MetricName,
    pub criterion: Criterion,
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub d_a: usize,
    pub d_b: usize,
    pub n_points: u64,
    pub intervals: u64,
    pub cells: Vec<CellSummary>,
    pub pooled: Vec<PooledSummary>,
    pub contingency_full: Option<Contingency>,
    pub contingency_boundary: Option<Contingency>,
    pub clipped_full: u64,
    pub clipped_boundary: u64,
    pub mean_weight_full: BTreeMap<MetricName, f64>,
    pub mean_weight_boundary: BTreeMap<MetricName, f64>,
    pub area_volume: Option<AreaVolumeCheck>,
}

impl RunSummary {
    pub fn from_state(config: &RunConfig, state: &RunState) -> Self {
        let layout = &state.full.layout;
        let mut cells = Vec::new();
        let mut pooled = Vec::new();
        for cell in layout.cells() {
            cells.push(CellSummary {
                metric: cell.metric,
                criterion: cell.criterion,
                convention: cell.convention.into(),
                prob_full: state.full.probability(cell),
                se_full: state.full.standard_error(cell),
                prob_boundary: state.boundary.probability(cell),
                se_boundary: state.boundary.standard_error(cell),
                omega: omega(&state.full, &state.boundary, cell),
            });
        }
        if layout.conventions.len() > 1 {
            for &metric in &layout.metrics {
                for &criterion in &layout.criteria {
                    let o = pooled_omega(&state.full, &state.boundary, metric, criterion, config.pooling)
                        .ok()
                        .flatten();
                    pooled.push(PooledSummary { metric, criterion, omega: o });
                }
            }
        }
        let means = |acc: &crate::estimator::Accumulator| {
            layout
                .metrics
                .iter()
                .filter_map(|&m| acc.mean_weight(m).map(|w| (m, w)))
                .collect::<BTreeMap<_, _>>()
        };
        let mean_weight_full = means(&state.full);
        let mean_weight_boundary = means(&state.boundary);
        let area_volume = match (
            config.absolute_volumes,
            mean_weight_full.get(&MetricName::Hs),
            mean_weight_boundary.get(&MetricName::Hs),
        ) {
            (true, Some(&f), Some(&b)) => area_to_volume_check(&AreaVolumeInput {
                d: config.dim(),
                mean_weight_full: f,
                mean_weight_boundary: b,
                absolute_jacobian: true,
            })
            .ok(),
            _ => None,
        };
        RunSummary {
            config_hash: state.config_hash.clone(),
            d_a: config.d_a,
            d_b: config.d_b,
            n_points: state.next_index,
            intervals: state.intervals_done,
            cells,
            pooled,
            contingency_full: state.full.contingency,
            contingency_boundary: state.boundary.contingency,
            clipped_full: state.full.clipped_count,
            clipped_boundary: state.boundary.clipped_count,
            mean_weight_full,
            mean_weight_boundary,
            area_volume,
        }
    }

    pub fn cell(&self, metric: MetricName, criterion: Criterion, convention: SeriesConvention) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.metric == metric && c.criterion == criterion && c.convention == convention)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Print one progress line per interval to stderr.
    pub progress: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn drive(config: &RunConfig, dir: &Path, state: &mut RunState, options: RunOptions) -> Result<RunSummary> {
    let integrator = config.integrator()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut intervals = OpenOptions::new().append(true).open(dir.join(INTERVALS_FILE))?;
    let mut deltas = OpenOptions::new().append(true).open(dir.join(DELTAS_FILE))?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    pool.install(|| {
        integrator.log_intervals(state, config.total_points, config.points_per_interval, |st, record, delta| {
            for line in record.csv_lines() {
                writeln!(intervals, "{line}")?;
            }
            intervals.flush()?;
            for line in delta_csv_lines(record.interval_index, delta) {
                writeln!(deltas, "{line}")?;
            }
            deltas.flush()?;
            checkpoint_save(st, &checkpoint)?;
            if options.progress {
                let first = record.rows.first();
                eprintln!(
                    "interval {} ({} / {} points){}",
                    record.interval_index,
                    record.n_points,
                    config.total_points,
                    first
                        .and_then(|r| r.omega.map(|o| format!(": {} {} omega {o:.6}", r.metric.as_str(), r.criterion.as_str())))
                        .unwrap_or_default()
                );
            }
            Ok(())
        })
    })?;
    let summary = RunSummary::from_state(config, state);
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Starts a fresh run in `config.output_dir`, replacing earlier artifacts.
pub fn run(config: &RunConfig, options: RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), config.to_toml()?)?;
    fs::write(dir.join(INTERVALS_FILE), format!("{INTERVAL_CSV_HEADER}\n"))?;
    fs::write(dir.join(DELTAS_FILE), format!("{DELTA_CSV_HEADER}\n"))?;
    let integrator = config.integrator()?;
    let mut state = RunState::new(config.hash(), integrator.evaluator.layout());
    checkpoint_save(&state, &dir.join(CHECKPOINT_FILE))?;
    drive(config, dir, &mut state, options)
}

/// Drops log rows of intervals after `intervals_done`, which a crash between
/// the log write and the checkpoint write can leave behind.
fn truncate_log(path: &Path, intervals_done: u64) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0
            || line
                .split(',')
                .next()
                .and_then(|f| f.parse::<u64>().ok())
                .is_some_and(|k| k <= intervals_done);
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Continues the run in `dir` (or the directory holding a checkpoint file).
/// The configuration is read back from the run directory; `workers` may
/// override its worker count.
pub fn resume(path: &Path, workers: Option<usize>, options: RunOptions) -> Result<RunSummary> {
    let dir = if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let mut config = RunConfig::load(&dir.join(CONFIG_FILE))?;
    config.output_dir = dir.clone();
    if let Some(w) = workers {
        config.workers = w;
        config.validate()?;
    }
    let mut state = checkpoint_load(&dir.join(CHECKPOINT_FILE), Some(&config.hash()))?;
    if state.next_index >= config.total_points {
        return Ok(RunSummary::from_state(&config, &state));
    }
    truncate_log(&dir.join(INTERVALS_FILE), state.intervals_done)?;
    truncate_log(&dir.join(DELTAS_FILE), state.intervals_done)?;
    drive(&config, &dir, &mut state, options)
}

/// One (metric, criterion, convention) series read back from a log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesKey {
    pub metric: MetricName,
    pub criterion: Criterion,
    pub convention: SeriesConvention,
}

impl SeriesKey {
    fn cell(&self) -> Option<Cell> {
        let convention = match self.convention {
            SeriesConvention::Inner => crate::criteria::Convention::InnerBlocks,
            SeriesConvention::Outer => crate::criteria::Convention::OuterBlocks,
            SeriesConvention::Pooled => return None,
        };
        Some(Cell { metric: self.metric, criterion: self.criterion, convention })
    }
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Malformed { path: path.to_path_buf(), message: message.into() }
}

fn parse_opt(path: &Path, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse::<f64>().map(Some).map_err(|_| malformed(path, format!("bad number {s:?}")))
    }
}

fn parse_key(path: &Path, metric: &str, criterion: &str, convention: &str) -> Result<SeriesKey> {
    let metric = MetricName::parse(metric).ok_or_else(|| malformed(path, format!("unknown metric {metric:?}")))?;
    let criterion = match criterion {
        "ppt" => Criterion::Ppt,
        "cross_norm" => Criterion::CrossNorm,
        _ => return Err(malformed(path, format!("unknown criterion {criterion:?}"))),
    };
    let convention = SeriesConvention::parse(convention)
        .ok_or_else(|| malformed(path, format!("unknown convention {convention:?}")))?;
    Ok(SeriesKey { metric, criterion, convention })
}

fn open_csv(path: &Path, header: &str) -> Result<csv::Reader<File>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got.join(",") != header {
        return Err(malformed(path, format!("unexpected header {:?}", got.join(","))));
    }
    Ok(rdr)
}

/// Reads `intervals.csv` into per-series points, attaching increments from
/// `interval_deltas.csv` in the same directory when that file exists.
pub fn read_series(log: &Path) -> Result<BTreeMap<SeriesKey, Vec<SeriesPoint>>> {
    let mut series: BTreeMap<SeriesKey, Vec<SeriesPoint>> = BTreeMap::new();
    let mut rdr = open_csv(log, INTERVAL_CSV_HEADER)?;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 8 {
            return Err(malformed(log, format!("expected 8 fields, found {}", rec.len())));
        }
        let interval: u64 = rec[0].parse().map_err(|_| malformed(log, format!("bad interval {:?}", &rec[0])))?;
        let key = parse_key(log, &rec[2], &rec[3], &rec[4])?;
        let value = parse_opt(log, &rec[7])?;
        series.entry(key).or_default().push(SeriesPoint { interval, value, delta: None });
    }
    if series.is_empty() {
        return Err(malformed(log, "the interval log has no records"));
    }
    let deltas_path = log.with_file_name(DELTAS_FILE);
    if deltas_path.exists() {
        let mut sums: BTreeMap<(SeriesKey, u64), IntervalSums> = BTreeMap::new();
        let mut rdr = open_csv(&deltas_path, DELTA_CSV_HEADER)?;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 8 {
                return Err(malformed(&deltas_path, format!("expected 8 fields, found {}", rec.len())));
            }
            let interval: u64 = rec[0]
                .parse()
                .map_err(|_| malformed(&deltas_path, format!("bad interval {:?}", &rec[0])))?;
            let key = parse_key(&deltas_path, &rec[1], &rec[2], &rec[3])?;
            let num = |i: usize| -> Result<f64> {
                parse_opt(&deltas_path, &rec[i])?.ok_or_else(|| malformed(&deltas_path, "missing value"))
            };
            sums.insert(
                (key, interval),
                IntervalSums {
                    weight_full: num(4)?,
                    pass_full: num(5)?,
                    weight_boundary: num(6)?,
                    pass_boundary: num(7)?,
                },
            );
        }
        for (key, points) in series.iter_mut() {
            if key.cell().is_none() {
                continue;
            }
            for p in points.iter_mut() {
                p.delta = sums.get(&(*key, p.interval)).copied();
            }
        }
    }
    Ok(series)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub metric: MetricName,
    pub criterion: Criterion,
    pub convention: SeriesConvention,
    pub final_unedited: Option<f64>,
    pub final_edited: Option<f64>,
    pub discarded: Vec<u64>,
    pub kept: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub edit_rule: EditRule,
    pub series: Vec<SeriesReport>,
}

impl ReportSummary {
    pub fn get(&self, metric: MetricName, criterion: Criterion, convention: SeriesConvention) -> Option<&SeriesReport> {
        self.series
            .iter()
            .find(|s| s.metric == metric && s.criterion == criterion && s.convention == convention)
    }
}

const SERIES_HEADER: &str = "interval,metric,criterion,convention,omega,omega_minus_2";

fn series_lines(key: &SeriesKey, points: &[SeriesPoint], out: &mut String) {
    for p in points {
        let (o, o2) = match p.value {
            Some(v) => (format!("{v}"), format!("{}", v - 2.0)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{o},{o2}\n",
            p.interval,
            key.metric.as_str(),
            key.criterion.as_str(),
            key.convention.as_str(),
        ));
    }
}

/// Edits every series of an interval log and writes `series_unedited.csv`,
/// `series_edited.csv`, `discarded.csv` and `report.json` to `out_dir`.
pub fn report(log: &Path, rule: EditRule, out_dir: &Path) -> Result<ReportSummary> {
    rule.validate()?;
    let series = read_series(log)?;
    let mut unedited = format!("{SERIES_HEADER}\n");
    let mut edited_csv = format!("{SERIES_HEADER}\n");
    let mut discarded_csv = String::from("metric,criterion,convention,interval\n");
    let mut reports = Vec::new();
    for (key, points) in &series {
        let edited: EditedSeries = edit_series(points, rule)?;
        series_lines(key, points, &mut unedited);
        series_lines(key, &edited.kept, &mut edited_csv);
        for i in &edited.discarded {
            discarded_csv.push_str(&format!(
                "{},{},{},{i}\n",
                key.metric.as_str(),
                key.criterion.as_str(),
                key.convention.as_str()
            ));
        }
        reports.push(SeriesReport {
            metric: key.metric,
            criterion: key.criterion,
            convention: key.convention,
            final_unedited: points.last().and_then(|p| p.value),
            final_edited: edited.kept.last().and_then(|p| p.value),
            discarded: edited.discarded.clone(),
            kept: edited.kept.len(),
        });
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("series_unedited.csv"), unedited)?;
    fs::write(out_dir.join("series_edited.csv"), edited_csv)?;
    fs::write(out_dir.join("discarded.csv"), discarded_csv)?;
    let summary = ReportSummary { edit_rule: rule, series: reports };
    write_json(&out_dir.join("report.json"), &summary)?;
    Ok(summary)
}

/// Number of data rows in a CSV file.
pub fn count_rows(path: &Path) -> Result<usize> {
    let f = BufReader::new(File::open(path)?);
    Ok(f.lines().skip(1).filter(|l| l.as_ref().map(|s| !s.is_empty()).unwrap_or(true)).count())
}
