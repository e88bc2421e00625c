//! Synchronous round-based simulation of CZSD and the exact-communication
//! primal–dual baseline ZSD-PD.
//!
//! Per-agent vectors are kept as `n × p` stacks. One call to
//! [`RunState::step`] is one synchronized round for all agents.
//!
//! CZSD round `k`, agent `i`:
//!
//! ```text
//! s_i     = z_i + Σ_j L_ij q_j                      (z read before its update)
//! y_i    += ω q_i
//! z_i    += ω Σ_j L_ij q_j
//! x_i    -= α_k β_k s_i + α_k (γ_k v_i + g_i)
//! v_i    += α_k γ_k s_i
//! q_i     = C(x_i − y_i)
//! ```
//!
//! ZSD-PD round `k`:
//!
//! ```text
//! x_i -= α_k (β_k Σ_j L_ij x_j + γ_k v_i + g_i)
//! v_i += α_k γ_k Σ_j L_ij x_j
//! ```
//!
//! `g_i` is the two-point estimate at `x_i` with a fresh `ξ_i` and `ζ_i`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compress::{CompressError, CompressorSpec, FLOAT_BITS};
use crate::graph::Topology;
use crate::linalg::Matrix;
use crate::problems::{DataDraw, Problem};
use crate::rng::{self, StreamRng};
use crate::schedule::Schedule;
use crate::zoracle::{sample_sphere_into, zo_gradient_into, ZoError};

/// Any state entry beyond this magnitude counts as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Czsd,
    Zsdpd,
    /// CZSD with the identity compressor.
    CzsdIdentity,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Czsd => "czsd",
            Algorithm::Zsdpd => "zsdpd",
            Algorithm::CzsdIdentity => "czsd_identity",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "czsd" => Ok(Self::Czsd),
            "zsdpd" => Ok(Self::Zsdpd),
            "czsd_identity" => Ok(Self::CzsdIdentity),
            other => Err(format!("unknown algorithm `{other}` (czsd|zsdpd|czsd_identity)")),
        }
    }
}

/// How transmitted bits are counted per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BitConvention {
    /// One message per agent per round.
    #[default]
    Broadcast,
    /// One message per directed edge per round.
    PerEdge,
}

#[derive(Debug, Error, PartialEq)]
pub enum AlgoError {
    #[error("topology is disconnected")]
    Disconnected,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state diverged at iteration {k} (|entry| > {DIVERGENCE_THRESHOLD:e} or non-finite)")]
    NonFiniteState { k: usize },
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Zo(#[from] ZoError),
}

/// Full simulation state for one seed.
#[derive(Debug, Clone)]
pub struct RunState {
    algorithm: Algorithm,
    topology: Arc<Topology>,
    problem: Arc<Problem>,
    compressor: CompressorSpec,
    schedule: Schedule,
    bit_convention: BitConvention,
    seed: u64,

    x: Matrix,
    v: Matrix,
    y: Matrix,
    z: Matrix,
    q: Matrix,
    k: usize,
    bits: u64,

    sampling_rngs: Vec<StreamRng>,
    compression_rngs: Vec<StreamRng>,
    draws: Vec<DataDraw>,
    gradients: Matrix,
    neighbor_sum: Matrix,
    zeta: Vec<f64>,
    scratch: Vec<f64>,
}

impl RunState {
    /// Initializes `v = y = z = 0` and `q = C(x₀)`.
    ///
    /// For [`Algorithm::CzsdIdentity`] the given compressor is replaced by
    /// the identity. For ZSD-PD the compression memories stay zero.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        algorithm: Algorithm,
        topology: Arc<Topology>,
        problem: Arc<Problem>,
        compressor: CompressorSpec,
        schedule: Schedule,
        x0: Matrix,
        seed: u64,
        bit_convention: BitConvention,
    ) -> Result<Self, AlgoError> {
        let (n, p) = (problem.n(), problem.p());
        if !topology.is_connected() {
            return Err(AlgoError::Disconnected);
        }
        if topology.n() != n {
            return Err(AlgoError::DimensionMismatch(format!(
                "topology has {} nodes, problem has {n} agents",
                topology.n()
            )));
        }
        if (x0.rows(), x0.cols()) != (n, p) {
            return Err(AlgoError::DimensionMismatch(format!(
                "x0 is {}x{}, expected {n}x{p}",
                x0.rows(),
                x0.cols()
            )));
        }
        if compressor.dim() != p {
            return Err(AlgoError::DimensionMismatch(format!(
                "compressor dimension {} != p = {p}",
                compressor.dim()
            )));
        }
        let compressor = match algorithm {
            Algorithm::CzsdIdentity => CompressorSpec::identity(p),
            _ => compressor,
        };
        if algorithm != Algorithm::Zsdpd && schedule.omega() * compressor.r() > 1.0 + 1e-12 {
            log::warn!(
                "omega * r = {} exceeds 1; convergence guarantees do not apply",
                schedule.omega() * compressor.r()
            );
        }

        let mut compression_rngs: Vec<StreamRng> = (0..n).map(|i| rng::agent_compression_stream(seed, i)).collect();
        let mut q = Matrix::zeros(n, p);
        if algorithm != Algorithm::Zsdpd {
            for i in 0..n {
                compressor.compress_into(x0.row(i), &mut compression_rngs[i], q.row_mut(i))?;
            }
        }
        let state = Self {
            algorithm,
            sampling_rngs: (0..n).map(|i| rng::agent_sampling_stream(seed, i)).collect(),
            compression_rngs,
            draws: (0..n).map(|_| problem.new_draw()).collect(),
            gradients: Matrix::zeros(n, p),
            neighbor_sum: Matrix::zeros(n, p),
            zeta: vec![0.0; p],
            scratch: vec![0.0; p],
            topology,
            problem,
            compressor,
            schedule,
            bit_convention,
            seed,
            v: Matrix::zeros(n, p),
            y: Matrix::zeros(n, p),
            z: Matrix::zeros(n, p),
            q,
            x: x0,
            k: 0,
            bits: 0,
        };
        if !state.x.is_finite() || state.x.max_abs() > DIVERGENCE_THRESHOLD {
            return Err(AlgoError::NonFiniteState { k: 0 });
        }
        Ok(state)
    }

    /// One synchronized round of the configured algorithm.
    pub fn step(&mut self) -> Result<(), AlgoError> {
        match self.algorithm {
            Algorithm::Czsd | Algorithm::CzsdIdentity => self.czsd_step(),
            Algorithm::Zsdpd => self.zsdpd_step(),
        }
    }

    /// Algorithm 1 round: communicate `q`, estimate gradients, update
    /// memories, primal/dual variables, then recompress.
    pub fn czsd_step(&mut self) -> Result<(), AlgoError> {
        let k = self.k;
        self.topology.laplacian_apply_into(&self.q, &mut self.neighbor_sum);
        self.estimate_gradients()?;

        let (alpha, beta, gamma, omega) = (
            self.schedule.alpha(k),
            self.schedule.beta(k),
            self.schedule.gamma(k),
            self.schedule.omega(),
        );
        let lq = self.neighbor_sum.as_slice();
        let g = self.gradients.as_slice();
        let q = self.q.as_slice();
        let x = self.x.as_mut_slice();
        let v = self.v.as_mut_slice();
        let y = self.y.as_mut_slice();
        let z = self.z.as_mut_slice();
        for idx in 0..x.len() {
            let s = z[idx] + lq[idx];
            y[idx] += omega * q[idx];
            z[idx] += omega * lq[idx];
            x[idx] -= alpha * beta * s + alpha * (gamma * v[idx] + g[idx]);
            v[idx] += alpha * gamma * s;
        }

        let n = self.x.rows();
        for i in 0..n {
            for ((d, a), b) in self.scratch.iter_mut().zip(self.x.row(i)).zip(self.y.row(i)) {
                *d = a - b;
            }
            if self.scratch.iter().any(|v| !v.is_finite()) {
                return Err(AlgoError::NonFiniteState { k: k + 1 });
            }
            self.compressor
                .compress_into(&self.scratch, &mut self.compression_rngs[i], self.q.row_mut(i))?;
        }

        self.bits += self.round_bits(self.compressor.bits_per_vector());
        self.k += 1;
        self.check_divergence()
    }

    /// Exact-communication round: every agent sends its full `x`.
    pub fn zsdpd_step(&mut self) -> Result<(), AlgoError> {
        let k = self.k;
        self.topology.laplacian_apply_into(&self.x, &mut self.neighbor_sum);
        self.estimate_gradients()?;

        let (alpha, beta, gamma) = (self.schedule.alpha(k), self.schedule.beta(k), self.schedule.gamma(k));
        let lx = self.neighbor_sum.as_slice();
        let g = self.gradients.as_slice();
        let x = self.x.as_mut_slice();
        let v = self.v.as_mut_slice();
        for idx in 0..x.len() {
            x[idx] -= alpha * (beta * lx[idx] + gamma * v[idx] + g[idx]);
            v[idx] += alpha * gamma * lx[idx];
        }

        self.bits += self.round_bits(FLOAT_BITS * self.problem.p() as u64);
        self.k += 1;
        self.check_divergence()
    }

    fn estimate_gradients(&mut self) -> Result<(), AlgoError> {
        let mu = self.schedule.mu(self.k);
        let problem = &*self.problem;
        for i in 0..self.x.rows() {
            let rng = &mut self.sampling_rngs[i];
            problem.draw_into(i, rng, &mut self.draws[i]);
            sample_sphere_into(rng, &mut self.zeta);
            let draw = &self.draws[i];
            zo_gradient_into(
                |pt| problem.eval(i, pt, draw),
                self.x.row(i),
                mu,
                &self.zeta,
                &mut self.scratch,
                self.gradients.row_mut(i),
            )?;
        }
        Ok(())
    }

    fn round_bits(&self, per_message: u64) -> u64 {
        match self.bit_convention {
            BitConvention::Broadcast => self.x.rows() as u64 * per_message,
            BitConvention::PerEdge => {
                let messages: usize = (0..self.x.rows()).map(|i| self.topology.neighbor_count(i)).sum();
                messages as u64 * per_message
            }
        }
    }

    fn check_divergence(&self) -> Result<(), AlgoError> {
        let bad = |m: &Matrix| !m.is_finite() || m.max_abs() > DIVERGENCE_THRESHOLD;
        if bad(&self.x) || bad(&self.v) {
            return Err(AlgoError::NonFiniteState { k: self.k });
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn compressor(&self) -> &CompressorSpec {
        &self.compressor
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Completed rounds.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Bits transmitted so far.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    /// Gradient estimates used in the last round.
    pub fn last_gradients(&self) -> &Matrix {
        &self.gradients
    }

    pub fn mean_x(&self) -> Vec<f64> {
        self.x.row_mean()
    }
}
