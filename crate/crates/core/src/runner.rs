//! Experiment harness: JSON run configs, multi-seed execution, CSV traces and
//! JSON summaries.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithm::{AlgoError, Algorithm, BitConvention, RunState};
use crate::compress::{CompressError, CompressorKind, CompressorSpec};
use crate::graph::{random_geometric_sphere, GraphError, Topology};
use crate::linalg::Matrix;
use crate::metrics::{
    bits_to_threshold, rebase_optimality, LyapunovContext, MeasureConfig, MetricsError, Recorder, TraceRecord,
};
use crate::problems::{Problem, ProblemConfig, ProblemError};
use crate::rng;
use crate::schedule::{Schedule, ScheduleConfig, ScheduleError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("every seed diverged")]
    AllSeedsDiverged,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyConfig {
    /// Random geometric graph on the sphere.
    Geometric {
        threshold_deg: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Whitespace edge list `i j [w]`; relative paths resolve against the
    /// config file's directory.
    EdgeList {
        path: PathBuf,
    },
    Dense {
        adjacency: Vec<Vec<f64>>,
    },
    Complete,
    Ring,
    Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitConfig {
    #[default]
    Zeros,
    /// Entries i.i.d. `N(0, scale²)` from the run seed's init stream.
    Gaussian {
        scale: f64,
    },
    /// Same vector at every agent.
    Consensus {
        value: Vec<f64>,
    },
    Explicit {
        rows: Vec<Vec<f64>>,
    },
}

fn default_compressor() -> CompressorKind {
    CompressorKind::Dithered { bits: 2 }
}
fn default_schedule() -> ScheduleConfig {
    ScheduleConfig::Table1 { omega: None }
}
fn default_cadence() -> usize {
    10
}
fn default_grad_batch() -> usize {
    64
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub topology: TopologyConfig,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_compressor")]
    pub compressor: CompressorKind,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleConfig,
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Measure every `cadence` iterations.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub init: InitConfig,
    /// Record the five Lyapunov components.
    #[serde(default)]
    pub lyapunov: bool,
    /// `λ_{n+1}` for the `F_M` weighting; the Fiedler value when absent.
    #[serde(default)]
    pub lambda_fm: Option<f64>,
    #[serde(default)]
    pub bit_convention: BitConvention,
    /// Draws per stochastic expectation at measurement time.
    #[serde(default = "default_grad_batch")]
    pub grad_batch: usize,
    /// Report bits-to-threshold for these performance levels.
    #[serde(default)]
    pub thresholds: Vec<f64>,
    /// Write elapsed time into traces. Off makes traces bit-reproducible.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Czsd
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    /// Parse a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        if let TopologyConfig::EdgeList { path: p } = &mut cfg.topology {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.iterations == 0 {
            return Err(RunError::Config("iterations must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(RunError::Config("at least one seed is required".into()));
        }
        if self.cadence == 0 {
            return Err(RunError::Config("cadence must be positive".into()));
        }
        if self.problem.n() == 0 || self.problem.p() == 0 {
            return Err(RunError::Config("n and p must be positive".into()));
        }
        Ok(())
    }

    pub fn build_topology(&self) -> Result<BuiltTopology, RunError> {
        let n = self.problem.n();
        let (topology, attempts, points) = match &self.topology {
            TopologyConfig::Geometric { threshold_deg, seed } => {
                let g = random_geometric_sphere(n, *threshold_deg, *seed)?;
                (g.topology, g.attempts, Some(g.points))
            }
            TopologyConfig::EdgeList { path } => {
                let text = fs::read_to_string(path)?;
                (Topology::parse_edge_list(&text, Some(n))?, 1, None)
            }
            TopologyConfig::Dense { adjacency } => {
                let a = Matrix::from_rows(adjacency)
                    .ok_or_else(|| RunError::Config("adjacency rows differ in length".into()))?;
                (Topology::from_adjacency(a)?, 1, None)
            }
            TopologyConfig::Complete => (Topology::complete(n), 1, None),
            TopologyConfig::Ring => (Topology::ring(n), 1, None),
            TopologyConfig::Path => (Topology::path(n), 1, None),
        };
        if topology.n() != n {
            return Err(RunError::Config(format!(
                "topology has {} nodes but the problem has {n} agents",
                topology.n()
            )));
        }
        if !topology.is_connected() {
            return Err(GraphError::Disconnected {
                fiedler: topology.fiedler(),
            }
            .into());
        }
        Ok(BuiltTopology {
            topology: Arc::new(topology),
            attempts,
            points,
        })
    }

    fn initial_iterate(&self, seed: u64) -> Result<Matrix, RunError> {
        let (n, p) = (self.problem.n(), self.problem.p());
        let x0 = match &self.init {
            InitConfig::Zeros => Matrix::zeros(n, p),
            InitConfig::Gaussian { scale } => {
                let mut rng = rng::stream(seed, rng::INIT_STREAM);
                let mut m = Matrix::zeros(n, p);
                rng::fill_standard_normal(&mut rng, m.as_mut_slice());
                m.scale(*scale)
            }
            InitConfig::Consensus { value } => {
                if value.len() != p {
                    return Err(RunError::Config(format!(
                        "init vector has length {}, expected {p}",
                        value.len()
                    )));
                }
                Matrix::from_fn(n, p, |_, l| value[l])
            }
            InitConfig::Explicit { rows } => Matrix::from_rows(rows)
                .filter(|m| m.rows() == n && m.cols() == p)
                .ok_or_else(|| RunError::Config(format!("explicit init must be {n}x{p}")))?,
        };
        Ok(x0)
    }
}

#[derive(Debug, Clone)]
pub struct BuiltTopology {
    pub topology: Arc<Topology>,
    pub attempts: usize,
    pub points: Option<Vec<[f64; 3]>>,
}

/// Trace and status for one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub trace: Vec<TraceRecord>,
    /// Set when the run stopped early on a non-finite or exploding state.
    pub diverged: Option<String>,
    /// Best objective estimate used in place of an unknown `f*`.
    pub f_reference: Option<f64>,
}

impl SeedRun {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBits {
    pub threshold: f64,
    pub bits: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub rows: usize,
    pub final_p: Option<f64>,
    pub final_consensus: Option<f64>,
    pub final_optimality: Option<f64>,
    pub total_bits: u64,
    pub diverged: Option<String>,
    /// `f*` surrogate (best objective seen) when the true optimum is unknown.
    pub f_reference: Option<f64>,
    pub bits_to_threshold: Vec<ThresholdBits>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateThreshold {
    pub threshold: f64,
    /// Seeds that reached the threshold.
    pub reached: usize,
    pub bits: Option<Stats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub n: usize,
    pub edges: usize,
    pub fiedler: f64,
    pub spectral_radius: f64,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub compressor_r: f64,
    pub compressor_delta: f64,
    pub bits_per_vector: u64,
    pub topology: TopologySummary,
    /// `exact` or `best_seen`: what the optimality column is measured against.
    pub optimality_reference: String,
    pub seeds: Vec<SeedSummary>,
    pub diverged_seeds: usize,
    pub final_p: Option<Stats>,
    pub bits_to_threshold: Vec<AggregateThreshold>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub topology: BuiltTopology,
    pub runs: Vec<SeedRun>,
    pub summary: Summary,
}

/// Iterate one seed for `cfg.iterations` rounds on a prebuilt topology.
///
/// Rows are recorded before the step at `k = 0, c, 2c, … < T`. A diverging
/// seed keeps the rows measured so far.
pub fn run_seed(cfg: &RunConfig, topology: &Arc<Topology>, seed: u64) -> Result<SeedRun, RunError> {
    let problem = Arc::new(Problem::from_config(&cfg.problem, seed)?);
    let (n, p) = (problem.n(), problem.p());
    let compressor = CompressorSpec::new(cfg.compressor.clone(), p)?;
    let r = match cfg.algorithm {
        Algorithm::Czsd => compressor.r(),
        _ => 1.0,
    };
    let schedule = Schedule::new(&cfg.schedule, n, p, cfg.iterations, r)?;
    let x0 = cfg.initial_iterate(seed)?;
    let mut state = RunState::init(
        cfg.algorithm,
        topology.clone(),
        problem,
        compressor,
        schedule,
        x0,
        seed,
        cfg.bit_convention,
    )?;
    let lyapunov = if cfg.lyapunov {
        Some(LyapunovContext::new(topology, cfg.lambda_fm)?)
    } else {
        None
    };
    let mut recorder = Recorder::new(
        MeasureConfig {
            grad_batch: cfg.grad_batch,
            lyapunov,
            record_wall_time: cfg.record_wall_time,
        },
        seed,
    );

    let mut trace = Vec::with_capacity(cfg.iterations / cfg.cadence + 2);
    let mut diverged = None;
    for k in 0..cfg.iterations {
        if k % cfg.cadence == 0 {
            trace.push(recorder.measure(&state));
        }
        match state.step() {
            Ok(()) => {}
            Err(e @ AlgoError::NonFiniteState { .. }) => {
                log::warn!("seed {seed}: {e}");
                diverged = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let f_reference = if state.problem().optimum().is_some() {
        None
    } else {
        rebase_optimality(&mut trace, n)
    };
    Ok(SeedRun {
        seed,
        trace,
        diverged,
        f_reference,
    })
}

/// Run every configured seed and aggregate.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let built = cfg.build_topology()?;
    log::info!(
        "{} on n={} p={} for T={} over {} seed(s)",
        cfg.algorithm.name(),
        cfg.problem.n(),
        cfg.problem.p(),
        cfg.iterations,
        cfg.seeds.len()
    );

    let runs = run_all(cfg, &built.topology)?;
    if runs.iter().all(|r| r.diverged.is_some()) {
        return Err(RunError::AllSeedsDiverged);
    }
    let summary = summarize(cfg, &built, &runs)?;
    Ok(RunOutput {
        config: cfg.clone(),
        topology: built,
        runs,
        summary,
    })
}

#[cfg(feature = "parallel")]
fn run_all(cfg: &RunConfig, topology: &Arc<Topology>) -> Result<Vec<SeedRun>, RunError> {
    use rayon::prelude::*;
    cfg.seeds.par_iter().map(|&s| run_seed(cfg, topology, s)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all(cfg: &RunConfig, topology: &Arc<Topology>) -> Result<Vec<SeedRun>, RunError> {
    cfg.seeds.iter().map(|&s| run_seed(cfg, topology, s)).collect()
}

fn summarize(cfg: &RunConfig, built: &BuiltTopology, runs: &[SeedRun]) -> Result<Summary, RunError> {
    let spec = CompressorSpec::new(cfg.compressor.clone(), cfg.problem.p())?;
    let spec = match cfg.algorithm {
        Algorithm::Czsd => spec,
        _ => CompressorSpec::identity(cfg.problem.p()),
    };
    let seeds: Vec<SeedSummary> = runs
        .iter()
        .map(|r| {
            let last = r.final_record();
            SeedSummary {
                seed: r.seed,
                rows: r.trace.len(),
                final_p: last.map(|l| l.p_running),
                final_consensus: last.map(|l| l.consensus),
                final_optimality: last.map(|l| l.optimality),
                total_bits: last.map_or(0, |l| l.bits),
                diverged: r.diverged.clone(),
                f_reference: r.f_reference,
                bits_to_threshold: cfg
                    .thresholds
                    .iter()
                    .map(|&t| ThresholdBits {
                        threshold: t,
                        bits: bits_to_threshold(&r.trace, t),
                    })
                    .collect(),
            }
        })
        .collect();

    let converged: Vec<f64> = seeds
        .iter()
        .filter(|s| s.diverged.is_none())
        .filter_map(|s| s.final_p)
        .collect();
    let bits_to_threshold = cfg
        .thresholds
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let hits: Vec<f64> = seeds
                .iter()
                .filter_map(|s| s.bits_to_threshold[j].bits)
                .map(|b| b as f64)
                .collect();
            AggregateThreshold {
                threshold: t,
                reached: hits.len(),
                bits: Stats::of(&hits),
            }
        })
        .collect();

    let topo = &built.topology;
    Ok(Summary {
        algorithm: cfg.algorithm,
        iterations: cfg.iterations,
        compressor_r: spec.r(),
        compressor_delta: spec.delta(),
        bits_per_vector: spec.bits_per_vector(),
        topology: TopologySummary {
            n: topo.n(),
            edges: topo.edge_count(),
            fiedler: topo.fiedler(),
            spectral_radius: topo.spectral_radius(),
            attempts: built.attempts,
        },
        optimality_reference: if runs.iter().any(|r| r.f_reference.is_some()) {
            "best_seen".into()
        } else {
            "exact".into()
        },
        diverged_seeds: seeds.iter().filter(|s| s.diverged.is_some()).count(),
        seeds,
        final_p: Stats::of(&converged),
        bits_to_threshold,
    })
}

pub fn trace_file_name(index: usize, seed: u64) -> String {
    format!("trace_{index:03}_seed{seed}.csv")
}

pub fn write_trace<W: std::io::Write>(trace: &[TraceRecord], writer: W) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(writer);
    for rec in trace {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: std::io::Read>(reader: R) -> Result<Vec<TraceRecord>, RunError> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|rec| rec.map_err(RunError::from)).collect()
}

impl RunOutput {
    /// Write one trace per seed plus `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (i, run) in self.runs.iter().enumerate() {
            let path = dir.join(trace_file_name(i, run.seed));
            write_trace(&run.trace, fs::File::create(&path)?)?;
            written.push(path);
        }
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&self.summary)?)?;
        written.push(path);
        Ok(written)
    }
}

/// Seed-wise mean of a metric over traces sharing the same row layout.
pub fn mean_series(runs: &[SeedRun], metric: impl Fn(&TraceRecord) -> f64) -> Vec<(usize, f64)> {
    let rows = runs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
    (0..rows)
        .map(|j| {
            let k = runs[0].trace[j].k;
            let m = runs.iter().map(|r| metric(&r.trace[j])).sum::<f64>() / runs.len() as f64;
            (k, m)
        })
        .collect()
}
