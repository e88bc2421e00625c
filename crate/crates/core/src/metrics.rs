//! Convergence and communication metrics.
//!
//! The headline metric is the running minimum over measured iterations of
//! `E_ξ‖∇F(x̄_k, ξ)‖² + (1/n) Σ_i ‖x_{i,k} − x̄_k‖²`. The five Lyapunov
//! components are optional diagnostics:
//!
//! ```text
//! e1 = ½‖x‖²_E                       consensus
//! e2 = ½‖v + g⁰/γ‖²_{((β+γ)/γ) F}     dual
//! e3 = xᵀ E F (v + g⁰/γ)              cross (may be negative)
//! e4 = n (f(x̄) − f*)                 optimality
//! e5 = ‖x − y‖²                      compression
//! ```
//!
//! with `E = E ⊗ I_p`, `F = F_M ⊗ I_p` and `g⁰ = col(∇f_i(x̄))`.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithm::{Algorithm, RunState};
use crate::graph::{GraphError, Topology};
use crate::linalg::{norm_sq, Matrix};
use crate::rng::{self, StreamRng};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("performance metric is undefined for an empty stream")]
    EmptyStream,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consensus {
    /// `(1/n) Σ ‖x_i − x̄‖²`
    pub normalized: f64,
    /// `½ Σ ‖x_i − x̄‖²`
    pub e1: f64,
}

pub fn consensus_error(x: &Matrix) -> Consensus {
    let mean = x.row_mean();
    let total: f64 = (0..x.rows())
        .map(|i| x.row(i).iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Consensus {
        normalized: total / x.rows() as f64,
        e1: 0.5 * total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lyapunov {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
}

impl Lyapunov {
    pub fn total(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.e4 + self.e5
    }
}

/// Precomputed `F_M` and `E F_M` for one topology.
#[derive(Debug, Clone)]
pub struct LyapunovContext {
    fm: Matrix,
    efm: Matrix,
}

impl LyapunovContext {
    pub fn new(topology: &Topology, lambda: Option<f64>) -> Result<Self, MetricsError> {
        let fm = topology.fm(lambda)?;
        let efm = topology.projector().matmul(&fm);
        Ok(Self { fm, efm })
    }

    pub fn fm(&self) -> &Matrix {
        &self.fm
    }

    /// Components for stacks `x, v, y`, local gradients `g0` at the mean, and
    /// optimality gap `f(x̄) − f*`.
    #[allow(clippy::too_many_arguments)]
    pub fn components(
        &self,
        x: &Matrix,
        v: &Matrix,
        y: &Matrix,
        g0: &Matrix,
        beta: f64,
        gamma: f64,
        optimality_gap: f64,
    ) -> Lyapunov {
        let n = x.rows();
        let w = Matrix::from_fn(n, x.cols(), |i, l| v[(i, l)] + g0[(i, l)] / gamma);
        let e1 = consensus_error(x).e1;
        let e2 = 0.5 * (beta + gamma) / gamma * self.fm.kron_bilinear(&w, &w);
        let e3 = self.efm.kron_bilinear(x, &w);
        let e4 = n as f64 * optimality_gap;
        let e5 = x.sub(y).frobenius_sq();
        Lyapunov { e1, e2, e3, e4, e5 }
    }
}

/// Running minimum of a metric stream.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMin {
    value: Option<f64>,
}

impl RunningMin {
    pub fn update(&mut self, v: f64) -> f64 {
        let next = match self.value {
            Some(cur) if cur <= v => cur,
            _ => v,
        };
        self.value = Some(next);
        next
    }

    pub fn value(&self) -> Result<f64, MetricsError> {
        self.value.ok_or(MetricsError::EmptyStream)
    }
}

/// One measured iteration. Field order is the trace column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub consensus: f64,
    pub grad_sq: f64,
    pub p_running: f64,
    /// `f(x̄) − f*`, or against the best value seen across the run when `f*`
    /// is unknown.
    pub optimality: f64,
    pub bits: u64,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub e3: Option<f64>,
    pub e4: Option<f64>,
    pub e5: Option<f64>,
    pub wall_ms: Option<f64>,
    #[serde(skip)]
    pub mean_grad_norm_sq: Option<f64>,
}

impl TraceRecord {
    pub fn lyapunov(&self) -> Option<Lyapunov> {
        Some(Lyapunov {
            e1: self.e1?,
            e2: self.e2?,
            e3: self.e3?,
            e4: self.e4?,
            e5: self.e5?,
        })
    }
}

/// Measurement settings shared by every seed of a run.
#[derive(Debug, Clone)]
pub struct MeasureConfig {
    /// Draws used for stochastic expectations per measurement.
    pub grad_batch: usize,
    pub lyapunov: Option<LyapunovContext>,
    pub record_wall_time: bool,
}

/// Stateful per-seed recorder: owns the measurement stream and the running
/// minimum.
///
/// When `f*` is unknown the `optimality` column (and `e4`) hold raw objective
/// estimates until [`rebase_optimality`] is applied to the finished trace.
#[derive(Debug)]
pub struct Recorder {
    cfg: MeasureConfig,
    rng: StreamRng,
    p_min: RunningMin,
    /// Clock start; absent when wall time is not recorded (no clock on
    /// bare wasm targets).
    started: Option<Instant>,
}

impl Recorder {
    pub fn new(cfg: MeasureConfig, seed: u64) -> Self {
        Self {
            rng: rng::stream(seed, rng::METRICS_STREAM),
            p_min: RunningMin::default(),
            started: cfg.record_wall_time.then(Instant::now),
            cfg,
        }
    }

    pub fn p_running(&self) -> Result<f64, MetricsError> {
        self.p_min.value()
    }

    pub fn measure(&mut self, state: &RunState) -> TraceRecord {
        let problem = state.problem();
        let mean = state.mean_x();
        let consensus = consensus_error(state.x());
        let grad_sq = problem.grad_sq_estimate(&mean, self.cfg.grad_batch, &mut self.rng);
        let p_running = self.p_min.update(grad_sq + consensus.normalized);

        let gap = match problem.optimum() {
            Some(f_star) => problem.global_value(&mean).expect("deterministic") - f_star,
            // raw estimate of f(x̄); rebased by `rebase_optimality` once the run ends
            None => problem.value_estimate(&mean, self.cfg.grad_batch, &mut self.rng),
        };

        let lyap = self.cfg.lyapunov.as_ref().map(|ctx| {
            let g0 = frozen_local_gradients(state, &mean, self.cfg.grad_batch);
            let k = state.k();
            let s = state.schedule();
            // ZSD-PD communicates exactly, so its compression memory is x itself
            let y = match state.algorithm() {
                Algorithm::Zsdpd => state.x(),
                _ => state.y(),
            };
            ctx.components(state.x(), state.v(), y, &g0, s.beta(k), s.gamma(k), gap)
        });

        TraceRecord {
            k: state.k(),
            consensus: consensus.normalized,
            grad_sq,
            p_running,
            optimality: gap,
            bits: state.bits(),
            e1: lyap.map(|l| l.e1),
            e2: lyap.map(|l| l.e2),
            e3: lyap.map(|l| l.e3),
            e4: lyap.map(|l| l.e4),
            e5: lyap.map(|l| l.e5),
            wall_ms: self.started.map(|t| t.elapsed().as_secs_f64() * 1e3),
            mean_grad_norm_sq: problem.global_gradient(&mean).map(|g| norm_sq(&g)),
        }
    }
}

/// `col(∇f_i(x̄))`, exact for deterministic problems and otherwise averaged
/// over a batch drawn from a stream fixed by `(seed, k)`.
pub fn frozen_local_gradients(state: &RunState, mean: &[f64], batch: usize) -> Matrix {
    let problem = state.problem();
    let n = problem.n();
    let mut g0 = Matrix::zeros(n, problem.p());
    let mut rng = rng::lyapunov_stream(state.seed(), state.k());
    for i in 0..n {
        problem.local_gradient_estimate(i, mean, batch, &mut rng, g0.row_mut(i));
    }
    g0
}

/// Replace raw objective estimates by gaps to the best value seen across the
/// whole trace, the surrogate for an unknown `f*`. Returns that value.
pub fn rebase_optimality(trace: &mut [TraceRecord], n: usize) -> Option<f64> {
    let best = trace
        .iter()
        .map(|r| r.optimality)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))?;
    for r in trace.iter_mut() {
        r.optimality -= best;
        if let Some(e4) = r.e4.as_mut() {
            *e4 -= n as f64 * best;
        }
    }
    Some(best)
}

/// Smallest cumulative bit count at which `p_running ≤ threshold`.
pub fn bits_to_threshold(trace: &[TraceRecord], threshold: f64) -> Option<u64> {
    trace.iter().find(|r| r.p_running <= threshold).map(|r| r.bits)
}
