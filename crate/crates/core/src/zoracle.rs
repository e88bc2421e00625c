//! Two-point zeroth-order gradient estimation.
//!
//! `g = p·(F(x + μζ, ξ) − F(x, ξ))/μ · ζ` with `ζ` uniform on the unit sphere
//! of `R^p`. The estimate is unbiased for the gradient of the ball-smoothed
//! function `f̂(x, μ) = E_{u ∈ B^p}[f(x + μu)]`, not of `f` itself.
//!
//! Oracles are closures `FnMut(&[f64]) -> f64` with the data draw `ξ` already
//! captured, so both evaluations of one estimate share the same `ξ`.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::norm_sq;
use crate::rng;

/// Smallest exploration radius accepted by [`zo_gradient`].
pub const MU_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ZoError {
    #[error("oracle returned a non-finite value at the {0} point")]
    NonFiniteEvaluation(&'static str),
    #[error("exploration parameter {0:e} below floor {MU_FLOOR:e}")]
    MuTooSmall(f64),
    #[error("direction has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Uniform draw from the unit sphere in `R^p`.
pub fn sample_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; p];
    sample_sphere_into(rng, &mut out);
    out
}

pub fn sample_sphere_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        rng::fill_standard_normal(rng, out);
        let norm = norm_sq(out).sqrt();
        if norm > 0.0 && norm.is_finite() {
            out.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

/// Uniform draw from the unit ball in `R^p` (sphere direction, radius `U^{1/p}`).
pub fn sample_ball<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    let mut out = sample_sphere(p, rng);
    let u: f64 = rng.random();
    let radius = u.powf(1.0 / p as f64);
    out.iter_mut().for_each(|v| *v *= radius);
    out
}

/// Writes the two-point estimate into `out` using exactly two oracle calls.
///
/// `scratch` must have the length of `x`; it holds `x + μζ`.
pub fn zo_gradient_into<F>(
    mut oracle: F,
    x: &[f64],
    mu: f64,
    zeta: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<(), ZoError>
where
    F: FnMut(&[f64]) -> f64,
{
    let p = x.len();
    if zeta.len() != p || out.len() != p || scratch.len() != p {
        return Err(ZoError::DimensionMismatch {
            expected: p,
            got: zeta.len(),
        });
    }
    if !(mu >= MU_FLOOR) {
        return Err(ZoError::MuTooSmall(mu));
    }
    for ((s, xi), zi) in scratch.iter_mut().zip(x).zip(zeta) {
        *s = xi + mu * zi;
    }
    let shifted = oracle(scratch);
    if !shifted.is_finite() {
        return Err(ZoError::NonFiniteEvaluation("shifted"));
    }
    let base = oracle(x);
    if !base.is_finite() {
        return Err(ZoError::NonFiniteEvaluation("base"));
    }
    let coef = p as f64 * (shifted - base) / mu;
    for (o, zi) in out.iter_mut().zip(zeta) {
        *o = coef * zi;
    }
    Ok(())
}

pub fn zo_gradient<F>(oracle: F, x: &[f64], mu: f64, zeta: &[f64]) -> Result<Vec<f64>, ZoError>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut scratch = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    zo_gradient_into(oracle, x, mu, zeta, &mut scratch, &mut out)?;
    Ok(out)
}

/// One estimate together with the randomness that produced it.
#[derive(Debug, Clone)]
pub struct ZoSample {
    pub direction: Vec<f64>,
    pub mu: f64,
    pub estimate: Vec<f64>,
    pub evaluations: usize,
}

impl ZoSample {
    /// Draws `ζ` from `rng` and evaluates the estimator, counting oracle calls.
    pub fn draw<F, R>(mut oracle: F, x: &[f64], mu: f64, rng: &mut R) -> Result<Self, ZoError>
    where
        F: FnMut(&[f64]) -> f64,
        R: Rng + ?Sized,
    {
        let direction = sample_sphere(x.len(), rng);
        let mut evaluations = 0;
        let estimate = zo_gradient(
            |y| {
                evaluations += 1;
                oracle(y)
            },
            x,
            mu,
            &direction,
        )?;
        Ok(Self {
            direction,
            mu,
            estimate,
            evaluations,
        })
    }
}

/// Mean and standard error of a Monte-Carlo average.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Monte-Carlo estimate of `f̂(x, μ)`.
pub fn smoothed_value<F, R>(mut f: F, x: &[f64], mu: f64, samples: usize, rng: &mut R) -> Result<Estimate, ZoError>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let samples = samples.max(1);
    let mut point = vec![0.0; x.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let u = sample_ball(x.len(), rng);
        for ((pt, xi), ui) in point.iter_mut().zip(x).zip(&u) {
            *pt = xi + mu * ui;
        }
        let v = f(&point);
        if !v.is_finite() {
            return Err(ZoError::NonFiniteEvaluation("smoothing"));
        }
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        std_err: (var / n).sqrt(),
    })
}

/// Empirical second moment of the estimator against its analytic bound
/// `2p‖∇F(x,ξ)‖² + ½p²μ²ℓ²`.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub samples: usize,
    pub mean_sq_norm: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `grad_norm_sq` is `‖∇F(x, ξ)‖²` for the oracle's frozen `ξ` and `ell` its
/// smoothness constant.
pub fn variance_report<F, R>(
    mut oracle: F,
    x: &[f64],
    mu: f64,
    grad_norm_sq: f64,
    ell: f64,
    samples: usize,
    rng: &mut R,
) -> Result<VarianceReport, ZoError>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let p = x.len() as f64;
    let samples = samples.max(1);
    let mut zeta = vec![0.0; x.len()];
    let mut scratch = vec![0.0; x.len()];
    let mut g = vec![0.0; x.len()];
    let mut acc = 0.0;
    for _ in 0..samples {
        sample_sphere_into(rng, &mut zeta);
        zo_gradient_into(&mut oracle, x, mu, &zeta, &mut scratch, &mut g)?;
        acc += norm_sq(&g);
    }
    let mean = acc / samples as f64;
    let bound = 2.0 * p * grad_norm_sq + 0.5 * p * p * mu * mu * ell * ell;
    Ok(VarianceReport {
        samples,
        mean_sq_norm: mean,
        bound,
        pass: mean <= bound * (1.0 + 3.0 / (samples as f64).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::rng::stream;

    #[test]
    fn sphere_p1_is_sign() {
        let mut rng = stream(1, 0);
        let mut plus = 0;
        for _ in 0..10_000 {
            let z = sample_sphere(1, &mut rng);
            assert!(z[0] == 1.0 || z[0] == -1.0);
            plus += (z[0] > 0.0) as usize;
        }
        // binomial(1e4, 1/2): std 50
        assert!((plus as i64 - 5000).abs() < 200);
    }

    #[test]
    fn sphere_moments_p3() {
        let mut rng = stream(2, 0);
        let draws = 100_000;
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for _ in 0..draws {
            let z = sample_sphere(3, &mut rng);
            assert!((norm_sq(&z) - 1.0).abs() < 1e-12);
            for i in 0..3 {
                mean[i] += z[i] / draws as f64;
                for j in 0..3 {
                    second[i][j] += z[i] * z[j] / draws as f64;
                }
            }
        }
        for i in 0..3 {
            assert!(mean[i].abs() < 4.0 / (draws as f64).sqrt());
            for j in 0..3 {
                let target = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((second[i][j] - target).abs() < 0.02);
            }
        }
    }

    #[test]
    fn linear_oracle_cases() {
        let a = [1.0, 0.0];
        let f = |x: &[f64]| dot(&a, x);
        assert_eq!(zo_gradient(f, &[0.3, -0.2], 0.5, &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        for mu in [1e-6, 0.1, 3.0] {
            let g = zo_gradient(f, &[0.3, -0.2], mu, &[1.0, 0.0]).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-8 && g[1] == 0.0, "{g:?}");
        }
    }

    #[test]
    fn exactly_two_evaluations() {
        let mut rng = stream(3, 0);
        let s = ZoSample::draw(|x: &[f64]| norm_sq(x), &[1.0, 2.0, 3.0], 0.1, &mut rng).unwrap();
        assert_eq!(s.evaluations, 2);
        assert!((norm_sq(&s.direction) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin()).sum::<f64>();
        let a = ZoSample::draw(f, &[0.1, 0.2], 0.01, &mut stream(8, 8)).unwrap();
        let b = ZoSample::draw(f, &[0.1, 0.2], 0.01, &mut stream(8, 8)).unwrap();
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn rejects_tiny_mu_and_nan() {
        let f = |x: &[f64]| x[0];
        assert_eq!(zo_gradient(f, &[0.0], 1e-13, &[1.0]), Err(ZoError::MuTooSmall(1e-13)));
        let bad = |_: &[f64]| f64::NAN;
        assert!(matches!(
            zo_gradient(bad, &[0.0], 0.1, &[1.0]),
            Err(ZoError::NonFiniteEvaluation(_))
        ));
    }

    #[test]
    fn smoothed_constant_and_quadratic() {
        let mut rng = stream(4, 0);
        let c = smoothed_value(|_: &[f64]| 2.5, &[0.0; 3], 1.0, 100, &mut rng).unwrap();
        assert_eq!((c.mean, c.std_err), (2.5, 0.0));

        // E‖u‖² over the unit ball in R² is p/(p+2) = 1/2
        let q = smoothed_value(|x: &[f64]| norm_sq(x), &[0.0; 2], 1.0, 50_000, &mut rng).unwrap();
        assert!((q.mean - 0.5).abs() <= 4.0 * q.std_err, "{q:?}");

        let lin = smoothed_value(|x: &[f64]| 3.0 * x[0] - x[1], &[1.0, 2.0], 0.5, 50_000, &mut rng).unwrap();
        assert!((lin.mean - 1.0).abs() <= 4.0 * lin.std_err, "{lin:?}");
    }

    #[test]
    fn variance_report_linear_and_constant() {
        let mut rng = stream(5, 0);
        let a = [1.0, -2.0, 0.5, 0.0];
        let rep = variance_report(
            |x: &[f64]| dot(&a, x),
            &[0.0; 4],
            0.3,
            norm_sq(&a),
            0.0,
            20_000,
            &mut rng,
        )
        .unwrap();
        // E‖p(aᵀζ)ζ‖² = p²E(aᵀζ)² = p‖a‖²
        assert!((rep.mean_sq_norm - 4.0 * norm_sq(&a)).abs() < 0.05 * 4.0 * norm_sq(&a));
        assert!(rep.pass);

        let rep = variance_report(|_: &[f64]| 1.0, &[0.0; 4], 0.3, 0.0, 0.0, 1000, &mut rng).unwrap();
        assert_eq!(rep.mean_sq_norm, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn variance_report_small_mu_quadratic() {
        let mut rng = stream(6, 0);
        let x = [0.4, -1.0, 0.2];
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let rep = variance_report(|y: &[f64]| norm_sq(y), &x, 1e-6, norm_sq(&grad), 2.0, 20_000, &mut rng).unwrap();
        // μ → 0: E‖p(∇fᵀζ)ζ‖² = p‖∇f‖²
        let limit = 3.0 * norm_sq(&grad);
        assert!((rep.mean_sq_norm - limit).abs() < 0.05 * limit, "{rep:?}");
        assert!(rep.pass);
    }
}
