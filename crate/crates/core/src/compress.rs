//! Compression operators with their contraction certificate.
//!
//! Every compressor `C` ships constants `r > 0` and `δ ∈ (0, 1]` such that
//! `E‖C(x)/r − x‖² ≤ (1 − δ)‖x‖²`, which implies
//! `E‖C(x) − x‖² ≤ δ₀‖x‖²` with `δ₀ = 2r²(1 − δ) + 2(1 − r)²`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm_inf, norm_sq};
use crate::rng;

/// Bits used for one full-precision scalar on the wire.
pub const FLOAT_BITS: u64 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum CompressError {
    #[error("input contains a non-finite entry at index {0}")]
    NonFiniteInput(usize),
    #[error("input has length {got}, compressor built for dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid compressor: {0}")]
    Invalid(String),
}

/// Compressor selection, as it appears in run configs.
///
/// `{"kind":"dithered","bits":2}`, `{"kind":"identity"}`,
/// `{"kind":"topk","fraction":0.1}`,
/// `{"kind":"scaled","inner":{...},"scale":0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CompressorKind {
    Identity,
    /// Unbiased dithered quantizer with `2^(bits-1)` levels per sign.
    Dithered {
        bits: u32,
    },
    /// Keep the `⌈fraction·p⌉` largest-magnitude entries.
    Topk {
        fraction: f64,
    },
    /// `scale · inner(x)`.
    Scaled {
        inner: Box<CompressorKind>,
        scale: f64,
    },
}

/// A compressor bound to a dimension, carrying its `(r, δ)` certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressorSpec {
    kind: CompressorKind,
    dim: usize,
    r: f64,
    delta: f64,
}

impl CompressorSpec {
    pub fn new(kind: CompressorKind, dim: usize) -> Result<Self, CompressError> {
        if dim == 0 {
            return Err(CompressError::Invalid("dimension must be positive".into()));
        }
        let (r, delta) = certificate(&kind, dim)?;
        Ok(Self { kind, dim, r, delta })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CompressorKind::Identity, dim).expect("identity is always valid")
    }

    pub fn kind(&self) -> &CompressorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `δ₀ = 2r²(1 − δ) + 2(1 − r)²`.
    pub fn delta0(&self) -> f64 {
        2.0 * self.r * self.r * (1.0 - self.delta) + 2.0 * (1.0 - self.r).powi(2)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, CompressorKind::Identity)
    }

    /// Exact bits needed to transmit one compressed vector.
    pub fn bits_per_vector(&self) -> u64 {
        kind_bits(&self.kind, self.dim)
    }

    /// Writes `C(x)` into `out`. Dither, when needed, is drawn from `rng`.
    pub fn compress_into<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) -> Result<(), CompressError> {
        if x.len() != self.dim || out.len() != self.dim {
            return Err(CompressError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(CompressError::NonFiniteInput(i));
        }
        apply(&self.kind, x, rng, out);
        Ok(())
    }

    pub fn compress<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>, CompressError> {
        let mut out = vec![0.0; x.len()];
        self.compress_into(x, rng, &mut out)?;
        Ok(out)
    }
}

fn certificate(kind: &CompressorKind, dim: usize) -> Result<(f64, f64), CompressError> {
    match kind {
        CompressorKind::Identity => Ok((1.0, 1.0)),
        CompressorKind::Dithered { bits } => {
            if !(1..=30).contains(bits) {
                return Err(CompressError::Invalid(format!(
                    "quantizer bits must be in 1..=30, got {bits}"
                )));
            }
            let r = 1.0 + dim as f64 / 4f64.powi(*bits as i32);
            Ok((r, 1.0 / r))
        }
        CompressorKind::Topk { fraction } => {
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                return Err(CompressError::Invalid(format!(
                    "top-k fraction must be in (0, 1], got {fraction}"
                )));
            }
            Ok((1.0, topk_count(*fraction, dim) as f64 / dim as f64))
        }
        CompressorKind::Scaled { inner, scale } => {
            if !(*scale > 0.0 && scale.is_finite()) {
                return Err(CompressError::Invalid(format!("scale must be positive, got {scale}")));
            }
            let (r, delta) = certificate(inner, dim)?;
            Ok((r * scale, delta))
        }
    }
}

fn kind_bits(kind: &CompressorKind, dim: usize) -> u64 {
    match kind {
        CompressorKind::Identity => FLOAT_BITS * dim as u64,
        CompressorKind::Dithered { bits } => quantizer_bits(dim, *bits),
        CompressorKind::Topk { fraction } => {
            let m = topk_count(*fraction, dim) as u64;
            m * (FLOAT_BITS + index_bits(dim))
        }
        CompressorKind::Scaled { inner, .. } => kind_bits(inner, dim),
    }
}

/// `(k + 1)·p + 64`: sign plus `k` level bits per coordinate, one float norm.
pub fn quantizer_bits(dim: usize, bits: u32) -> u64 {
    (bits as u64 + 1) * dim as u64 + FLOAT_BITS
}

/// `⌈log₂ p⌉`.
fn index_bits(dim: usize) -> u64 {
    if dim <= 1 {
        0
    } else {
        (usize::BITS - (dim - 1).leading_zeros()) as u64
    }
}

fn topk_count(fraction: f64, dim: usize) -> usize {
    ((fraction * dim as f64 - 1e-9).ceil() as usize).clamp(1, dim)
}

fn apply<R: Rng + ?Sized>(kind: &CompressorKind, x: &[f64], rng: &mut R, out: &mut [f64]) {
    match kind {
        CompressorKind::Identity => out.copy_from_slice(x),
        CompressorKind::Dithered { bits } => {
            let norm = norm_inf(x);
            if norm == 0.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            let levels = (1u64 << (bits - 1)) as f64;
            let step = norm / levels;
            for (o, &v) in out.iter_mut().zip(x) {
                let dither: f64 = rng.random();
                let level = (levels * v.abs() / norm + dither).floor();
                *o = step * v.signum() * level;
                if v == 0.0 {
                    *o = 0.0;
                }
            }
        }
        CompressorKind::Topk { fraction } => {
            let m = topk_count(*fraction, x.len());
            let mut order: Vec<usize> = (0..x.len()).collect();
            // stable: ties keep the lower index first
            order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
            out.iter_mut().for_each(|o| *o = 0.0);
            for &i in &order[..m] {
                out[i] = x[i];
            }
        }
        CompressorKind::Scaled { inner, scale } => {
            apply(inner, x, rng, out);
            out.iter_mut().for_each(|o| *o *= scale);
        }
    }
}

/// Monte-Carlo check of the contraction contract.
#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub samples: usize,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    /// `1 − δ`.
    pub bound: f64,
    /// Multiplier applied to `bound` before comparing.
    pub slack: f64,
    pub pass: bool,
}

/// Draws `samples` standard-normal vectors, compresses each once and reports
/// `‖C(x)/r − x‖² / ‖x‖²`. Passes when the mean is at most
/// `(1 − δ)(1 + 3/√samples)`.
pub fn certify<R: Rng + ?Sized>(spec: &CompressorSpec, samples: usize, rng: &mut R) -> CertifyReport {
    let p = spec.dim();
    let mut x = vec![0.0; p];
    let mut c = vec![0.0; p];
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut drawn = 0;
    while drawn < samples {
        rng::fill_standard_normal(rng, &mut x);
        let nx = norm_sq(&x);
        if nx == 0.0 {
            continue;
        }
        spec.compress_into(&x, rng, &mut c).expect("finite input");
        let err: f64 = c.iter().zip(&x).map(|(ci, xi)| (ci / spec.r() - xi).powi(2)).sum();
        let ratio = err / nx;
        sum += ratio;
        max = max.max(ratio);
        drawn += 1;
    }
    let mean = sum / samples.max(1) as f64;
    let bound = 1.0 - spec.delta();
    let slack = 1.0 + 3.0 / (samples.max(1) as f64).sqrt();
    CertifyReport {
        samples,
        mean_ratio: mean,
        max_ratio: max,
        bound,
        slack,
        pass: mean <= bound * slack,
    }
}
