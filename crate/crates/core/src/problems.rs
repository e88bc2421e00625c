//! Benchmark objectives `F_i(x, ξ_i)` for `n` agents in dimension `p`.
//!
//! The global objective is `f(x) = (1/n) Σ_i f_i(x)` with
//! `f_i(x) = E_ξ[F_i(x, ξ)]`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm_sq, Matrix};
use crate::rng::{self, StreamRng};

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("invalid problem parameters: {0}")]
    Invalid(String),
    #[error("closed-form gradient not available for this problem")]
    UnsupportedKind,
}

fn default_m() -> usize {
    200
}
fn default_theta() -> f64 {
    0.001
}
fn default_tau() -> f64 {
    1.0
}
fn default_center_scale() -> f64 {
    1.0
}
fn default_spread() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Heterogeneity {
    /// Every agent holds the same `½‖x − c‖²`.
    #[default]
    Zero,
    /// Agent-specific diagonal curvatures and shifted centres.
    Scaled,
}

/// Problem selection, as it appears in run configs, e.g.
/// `{"problem":"logistic","n":20,"p":50,"m":200,"theta":0.001,"tau":1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum ProblemConfig {
    Logistic {
        n: usize,
        p: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default = "default_tau")]
        tau: f64,
    },
    PlQuadratic {
        n: usize,
        p: usize,
        #[serde(default)]
        heterogeneity: Heterogeneity,
        /// Standard deviation of the common centre `c`.
        #[serde(default = "default_center_scale")]
        center_scale: f64,
        /// Standard deviation of per-agent centre offsets (scaled only).
        #[serde(default = "default_spread")]
        spread: f64,
    },
    DeterministicQuadratic {
        n: usize,
        p: usize,
        #[serde(default = "default_center_scale")]
        center_scale: f64,
    },
}

impl ProblemConfig {
    pub fn n(&self) -> usize {
        match *self {
            Self::Logistic { n, .. } | Self::PlQuadratic { n, .. } | Self::DeterministicQuadratic { n, .. } => n,
        }
    }

    pub fn p(&self) -> usize {
        match *self {
            Self::Logistic { p, .. } | Self::PlQuadratic { p, .. } | Self::DeterministicQuadratic { p, .. } => p,
        }
    }
}

/// Analytic constants, `None` where only empirical values exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub ell: Option<f64>,
    pub nu: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    LogisticNonconvex,
    PlQuadratic,
    DeterministicQuadratic,
}

#[derive(Debug, Clone)]
enum Data {
    Logistic {
        m: usize,
        theta: f64,
        tau: f64,
        /// Hidden parameter generating the labels.
        hidden: Vec<f64>,
    },
    /// `f_i(x) = ½ Σ_l d_il (x_l − c_il)²`.
    Quadratic {
        curvature: Matrix,
        centers: Matrix,
        minimizer: Vec<f64>,
        f_star: f64,
    },
}

/// One data draw `ξ` for one agent.
#[derive(Debug, Clone, PartialEq)]
pub enum DataDraw {
    /// Deterministic problems ignore `ξ`; the token only counts draws.
    Token(u64),
    Logistic {
        /// `m × p`, row-major.
        features: Vec<f64>,
        labels: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    p: usize,
    kind: ProblemKind,
    data: Data,
}

impl Problem {
    /// Builds an instance; all hidden randomness comes from `seed`.
    pub fn from_config(cfg: &ProblemConfig, seed: u64) -> Result<Self, ProblemError> {
        let (n, p) = (cfg.n(), cfg.p());
        if n == 0 || p == 0 {
            return Err(ProblemError::Invalid("n and p must be positive".into()));
        }
        let mut rng = rng::stream(seed, rng::PROBLEM_STREAM);
        match *cfg {
            ProblemConfig::Logistic { m, theta, tau, .. } => {
                if m == 0 || theta < 0.0 || tau < 0.0 {
                    return Err(ProblemError::Invalid(format!(
                        "need m >= 1, theta >= 0, tau >= 0 (m={m}, theta={theta}, tau={tau})"
                    )));
                }
                let mut hidden = vec![0.0; p];
                rng::fill_standard_normal(&mut rng, &mut hidden);
                Ok(Self {
                    n,
                    p,
                    kind: ProblemKind::LogisticNonconvex,
                    data: Data::Logistic { m, theta, tau, hidden },
                })
            }
            ProblemConfig::PlQuadratic {
                heterogeneity,
                center_scale,
                spread,
                ..
            } => {
                let c = scaled_normal(&mut rng, p, center_scale);
                let (curvature, centers) = match heterogeneity {
                    Heterogeneity::Zero => (Matrix::from_fn(n, p, |_, _| 1.0), Matrix::from_fn(n, p, |_, l| c[l])),
                    Heterogeneity::Scaled => {
                        let curv = Matrix::from_fn(n, p, |_, _| rng.random_range(0.5..1.5));
                        let offsets = Matrix::from_fn(n, p, |_, _| spread * rng::standard_normal(&mut rng));
                        (curv, Matrix::from_fn(n, p, |i, l| c[l] + offsets[(i, l)]))
                    }
                };
                Ok(Self::quadratic(ProblemKind::PlQuadratic, curvature, centers))
            }
            ProblemConfig::DeterministicQuadratic { center_scale, .. } => {
                let c = scaled_normal(&mut rng, p, center_scale);
                let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
                Ok(Self::quadratic(
                    ProblemKind::DeterministicQuadratic,
                    Matrix::from_fn(n, p, |_, l| d[l]),
                    Matrix::from_fn(n, p, |_, l| c[l]),
                ))
            }
        }
    }

    /// Zero-heterogeneity `½‖x − c‖²` for every agent with an explicit centre.
    pub fn pl_quadratic_centered(n: usize, center: &[f64]) -> Self {
        let p = center.len();
        Self::quadratic(
            ProblemKind::PlQuadratic,
            Matrix::from_fn(n, p, |_, _| 1.0),
            Matrix::from_fn(n, p, |_, l| center[l]),
        )
    }

    /// `f_i(x) = ½ Σ_l d_il (x_l − c_il)²` from explicit `n × p` curvatures
    /// (nonnegative) and centres. Zero curvature gives a constant objective.
    pub fn separable_quadratic(curvature: Matrix, centers: Matrix) -> Result<Self, ProblemError> {
        if (curvature.rows(), curvature.cols()) != (centers.rows(), centers.cols()) || curvature.rows() == 0 {
            return Err(ProblemError::Invalid(
                "curvature and centres must share a nonempty shape".into(),
            ));
        }
        if curvature.as_slice().iter().any(|d| !(*d >= 0.0)) {
            return Err(ProblemError::Invalid("curvatures must be nonnegative".into()));
        }
        Ok(Self::quadratic(ProblemKind::PlQuadratic, curvature, centers))
    }

    fn quadratic(kind: ProblemKind, curvature: Matrix, centers: Matrix) -> Self {
        let (n, p) = (curvature.rows(), curvature.cols());
        let minimizer: Vec<f64> = (0..p)
            .map(|l| {
                let (num, den) = (0..n).fold((0.0, 0.0), |(a, b), i| {
                    (a + curvature[(i, l)] * centers[(i, l)], b + curvature[(i, l)])
                });
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect();
        let mut problem = Self {
            n,
            p,
            kind,
            data: Data::Quadratic {
                curvature,
                centers,
                minimizer: minimizer.clone(),
                f_star: 0.0,
            },
        };
        let f_star = problem.global_value(&minimizer).expect("quadratic");
        if let Data::Quadratic { f_star: fs, .. } = &mut problem.data {
            *fs = f_star;
        }
        problem
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self.data, Data::Logistic { .. })
    }

    /// Hidden label-generating parameter of the logistic task.
    pub fn hidden_parameter(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Logistic { hidden, .. } => Some(hidden),
            Data::Quadratic { .. } => None,
        }
    }

    /// Exact `f*` when known.
    pub fn optimum(&self) -> Option<f64> {
        match &self.data {
            Data::Quadratic { f_star, .. } => Some(*f_star),
            Data::Logistic { .. } => None,
        }
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        match &self.data {
            Data::Quadratic { minimizer, .. } => Some(minimizer),
            Data::Logistic { .. } => None,
        }
    }

    pub fn constants(&self) -> ProblemConstants {
        match &self.data {
            Data::Logistic { .. } => ProblemConstants {
                ell: None,
                nu: None,
                sigma1: None,
                sigma2: None,
                eta1: None,
                eta2: None,
            },
            Data::Quadratic { curvature, centers, .. } => {
                let ell = curvature.max_abs();
                let mean_curv = curvature.row_mean();
                let nu = mean_curv.iter().copied().fold(f64::INFINITY, f64::min);
                let homogeneous =
                    (0..self.n).all(|i| curvature.row(i) == curvature.row(0) && centers.row(i) == centers.row(0));
                ProblemConstants {
                    ell: Some(ell),
                    nu: Some(nu),
                    sigma1: Some(0.0),
                    sigma2: homogeneous.then_some(0.0),
                    eta1: Some(0.0),
                    eta2: homogeneous.then_some(0.0),
                }
            }
        }
    }

    /// A buffer suitable for [`Self::draw_into`].
    pub fn new_draw(&self) -> DataDraw {
        match &self.data {
            Data::Logistic { m, .. } => DataDraw::Logistic {
                features: vec![0.0; m * self.p],
                labels: vec![0.0; *m],
            },
            Data::Quadratic { .. } => DataDraw::Token(0),
        }
    }

    /// Fresh `ξ` for `agent` from `rng`. Logistic draws regenerate all
    /// features and labels.
    pub fn draw_into<R: Rng + ?Sized>(&self, _agent: usize, rng: &mut R, draw: &mut DataDraw) {
        match (&self.data, draw) {
            (Data::Logistic { hidden, m, .. }, DataDraw::Logistic { features, labels }) => {
                features.resize(m * self.p, 0.0);
                labels.resize(*m, 0.0);
                rng::fill_standard_normal(rng, features);
                for (j, t) in labels.iter_mut().enumerate() {
                    let s = &features[j * self.p..(j + 1) * self.p];
                    let u: f64 = rng.random();
                    *t = if u < sigmoid(dot(hidden, s)) { 1.0 } else { -1.0 };
                }
            }
            (Data::Quadratic { .. }, DataDraw::Token(t)) => *t += 1,
            (_, d) => {
                *d = self.new_draw();
                self.draw_into(_agent, rng, d);
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, agent: usize, rng: &mut R) -> DataDraw {
        let mut d = self.new_draw();
        self.draw_into(agent, rng, &mut d);
        d
    }

    /// `F_i(x, ξ)`.
    pub fn eval(&self, agent: usize, x: &[f64], draw: &DataDraw) -> f64 {
        match (&self.data, draw) {
            (Data::Logistic { m, theta, tau, .. }, DataDraw::Logistic { features, labels }) => {
                let data: f64 = labels
                    .iter()
                    .enumerate()
                    .map(|(j, t)| softplus(-t * dot(x, &features[j * self.p..(j + 1) * self.p])))
                    .sum();
                self.n as f64 / *m as f64 * data + regularizer(x, *theta, *tau)
            }
            (Data::Quadratic { curvature, centers, .. }, _) => {
                0.5 * curvature
                    .row(agent)
                    .iter()
                    .zip(centers.row(agent))
                    .zip(x)
                    .map(|((d, c), xl)| d * (xl - c) * (xl - c))
                    .sum::<f64>()
            }
            _ => panic!("data draw does not match problem kind"),
        }
    }

    /// `∇_x F_i(x, ξ)` for the frozen draw.
    pub fn gradient_into(&self, agent: usize, x: &[f64], draw: &DataDraw, out: &mut [f64]) {
        match (&self.data, draw) {
            (Data::Logistic { m, theta, tau, .. }, DataDraw::Logistic { features, labels }) => {
                for (o, xl) in out.iter_mut().zip(x) {
                    let den = 1.0 + tau * xl * xl;
                    *o = 2.0 * theta * tau * xl / (den * den);
                }
                let w = self.n as f64 / *m as f64;
                for (j, t) in labels.iter().enumerate() {
                    let s = &features[j * self.p..(j + 1) * self.p];
                    let coef = -w * t * sigmoid(-t * dot(x, s));
                    for (o, sl) in out.iter_mut().zip(s) {
                        *o += coef * sl;
                    }
                }
            }
            (Data::Quadratic { curvature, centers, .. }, _) => {
                for (((o, d), c), xl) in out.iter_mut().zip(curvature.row(agent)).zip(centers.row(agent)).zip(x) {
                    *o = d * (xl - c);
                }
            }
            _ => panic!("data draw does not match problem kind"),
        }
    }

    pub fn analytic_gradient(&self, agent: usize, x: &[f64], draw: &DataDraw) -> Result<Vec<f64>, ProblemError> {
        let mut out = vec![0.0; self.p];
        self.gradient_into(agent, x, draw, &mut out);
        Ok(out)
    }

    /// Exact `f(x)` when the objective is deterministic.
    pub fn global_value(&self, x: &[f64]) -> Option<f64> {
        match &self.data {
            Data::Quadratic { .. } => {
                let token = DataDraw::Token(0);
                Some((0..self.n).map(|i| self.eval(i, x, &token)).sum::<f64>() / self.n as f64)
            }
            Data::Logistic { .. } => None,
        }
    }

    /// Exact `∇f(x)` when the objective is deterministic.
    pub fn global_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.data {
            Data::Quadratic { .. } => {
                let token = DataDraw::Token(0);
                let mut acc = vec![0.0; self.p];
                let mut g = vec![0.0; self.p];
                for i in 0..self.n {
                    self.gradient_into(i, x, &token, &mut g);
                    acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                acc.iter_mut().for_each(|a| *a /= self.n as f64);
                Some(acc)
            }
            Data::Logistic { .. } => None,
        }
    }

    /// `f_i(x)`: exact when deterministic, otherwise a `batch`-draw average.
    pub fn local_value_estimate(&self, agent: usize, x: &[f64], batch: usize, rng: &mut StreamRng) -> f64 {
        if !self.is_stochastic() {
            return self.eval(agent, x, &DataDraw::Token(0));
        }
        let mut draw = self.new_draw();
        let batch = batch.max(1);
        let mut acc = 0.0;
        for _ in 0..batch {
            self.draw_into(agent, rng, &mut draw);
            acc += self.eval(agent, x, &draw);
        }
        acc / batch as f64
    }

    /// `∇f_i(x)`: exact when deterministic, otherwise a `batch`-draw average.
    pub fn local_gradient_estimate(&self, agent: usize, x: &[f64], batch: usize, rng: &mut StreamRng, out: &mut [f64]) {
        if !self.is_stochastic() {
            self.gradient_into(agent, x, &DataDraw::Token(0), out);
            return;
        }
        let mut draw = self.new_draw();
        let mut g = vec![0.0; self.p];
        out.iter_mut().for_each(|o| *o = 0.0);
        let batch = batch.max(1);
        for _ in 0..batch {
            self.draw_into(agent, rng, &mut draw);
            self.gradient_into(agent, x, &draw, &mut g);
            out.iter_mut().zip(&g).for_each(|(o, v)| *o += v / batch as f64);
        }
    }

    /// Estimate of `f(x)`: exact when deterministic, otherwise the mean of
    /// `batch` draws spread round-robin over agents.
    pub fn value_estimate(&self, x: &[f64], batch: usize, rng: &mut StreamRng) -> f64 {
        if let Some(v) = self.global_value(x) {
            return v;
        }
        let mut draw = self.new_draw();
        let batch = batch.max(1);
        (0..batch)
            .map(|b| {
                let agent = b % self.n;
                self.draw_into(agent, rng, &mut draw);
                self.eval(agent, x, &draw)
            })
            .sum::<f64>()
            / batch as f64
    }

    /// Estimate of `E_ξ‖∇F(x, ξ)‖²`, the gradient term of the performance
    /// metric. Exact `‖∇f(x)‖²` when deterministic.
    pub fn grad_sq_estimate(&self, x: &[f64], batch: usize, rng: &mut StreamRng) -> f64 {
        if let Some(g) = self.global_gradient(x) {
            return norm_sq(&g);
        }
        let mut draw = self.new_draw();
        let mut g = vec![0.0; self.p];
        let batch = batch.max(1);
        (0..batch)
            .map(|b| {
                let agent = b % self.n;
                self.draw_into(agent, rng, &mut draw);
                self.gradient_into(agent, x, &draw, &mut g);
                norm_sq(&g)
            })
            .sum::<f64>()
            / batch as f64
    }
}

fn scaled_normal(rng: &mut StreamRng, p: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; p];
    rng::fill_standard_normal(rng, &mut v);
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn regularizer(x: &[f64], theta: f64, tau: f64) -> f64 {
    x.iter().map(|v| theta * tau * v * v / (1.0 + tau * v * v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn logistic(n: usize, p: usize, theta: f64) -> Problem {
        Problem::from_config(
            &ProblemConfig::Logistic {
                n,
                p,
                m: 50,
                theta,
                tau: 1.0,
            },
            7,
        )
        .unwrap()
    }

    fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|l| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[l] += h;
                b[l] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        diff / norm_sq(b).sqrt().max(1e-8)
    }

    #[test]
    fn logistic_at_origin_is_n_log2() {
        let prob = logistic(20, 5, 0.001);
        let mut rng = stream(1, 0);
        let d = prob.draw(3, &mut rng);
        let v = prob.eval(3, &[0.0; 5], &d);
        assert!((v - 20.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn regularizer_off_is_convex_along_lines() {
        let prob = logistic(4, 3, 0.0);
        let mut rng = stream(2, 0);
        let d = prob.draw(0, &mut rng);
        for k in 0..20 {
            let a: Vec<f64> = (0..3).map(|l| ((k * 3 + l) as f64).sin() * 2.0).collect();
            let b: Vec<f64> = (0..3).map(|l| ((k * 5 + l) as f64).cos() * 2.0).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let fa = prob.eval(0, &a, &d);
            let fb = prob.eval(0, &b, &d);
            assert!(prob.eval(0, &mid, &d) <= 0.5 * (fa + fb) + 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = stream(3, 0);
        let problems = [
            logistic(5, 6, 0.5),
            logistic(5, 6, 0.001),
            Problem::from_config(
                &ProblemConfig::PlQuadratic {
                    n: 5,
                    p: 6,
                    heterogeneity: Heterogeneity::Scaled,
                    center_scale: 1.0,
                    spread: 0.5,
                },
                1,
            )
            .unwrap(),
            Problem::from_config(
                &ProblemConfig::DeterministicQuadratic {
                    n: 5,
                    p: 6,
                    center_scale: 1.0,
                },
                1,
            )
            .unwrap(),
        ];
        for prob in &problems {
            for k in 0..100 {
                let agent = k % 5;
                let d = prob.draw(agent, &mut rng);
                let mut x = vec![0.0; 6];
                rng::fill_standard_normal(&mut rng, &mut x);
                let g = prob.analytic_gradient(agent, &x, &d).unwrap();
                let fd = central_difference(|y| prob.eval(agent, y, &d), &x, 1e-5);
                assert!(rel_err(&g, &fd) < 1e-5, "{:?}: {g:?} vs {fd:?}", prob.kind());
            }
        }
    }

    #[test]
    fn single_datum_gradient_formula() {
        let prob = Problem::from_config(
            &ProblemConfig::Logistic {
                n: 3,
                p: 2,
                m: 1,
                theta: 0.0,
                tau: 1.0,
            },
            1,
        )
        .unwrap();
        let d = DataDraw::Logistic {
            features: vec![0.5, -1.5],
            labels: vec![-1.0],
        };
        let x = [0.3, 0.7];
        let g = prob.analytic_gradient(0, &x, &d).unwrap();
        let margin = -dot(&x, &[0.5, -1.5]);
        let coef = 3.0 * (1.0) / (1.0 + margin.exp());
        assert!((g[0] - coef * 0.5).abs() < 1e-14);
        assert!((g[1] - coef * -1.5).abs() < 1e-14);
    }

    #[test]
    fn regularizer_gradient_zero_at_origin() {
        let prob = logistic(2, 3, 1.0);
        let d = DataDraw::Logistic {
            features: vec![0.0; 150],
            labels: vec![1.0; 50],
        };
        let g = prob.analytic_gradient(0, &[0.0, 1.0, 0.0], &d).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn pl_quadratic_zero_heterogeneity() {
        let prob = Problem::pl_quadratic_centered(4, &[0.0; 3]);
        let x = [1.0, -2.0, 0.5];
        assert_eq!(prob.global_gradient(&x).unwrap(), x.to_vec());
        assert_eq!(prob.optimum(), Some(0.0));
        assert_eq!(prob.minimizer().unwrap(), &[0.0; 3]);
        let c = prob.constants();
        assert_eq!(
            (c.nu, c.ell, c.sigma1, c.sigma2),
            (Some(1.0), Some(1.0), Some(0.0), Some(0.0))
        );
    }

    #[test]
    fn pl_inequality_holds_with_equality() {
        let cfg = ProblemConfig::PlQuadratic {
            n: 3,
            p: 4,
            heterogeneity: Heterogeneity::Zero,
            center_scale: 1.0,
            spread: 0.0,
        };
        let prob = Problem::from_config(&cfg, 9).unwrap();
        let c = prob.minimizer().unwrap().to_vec();
        assert!(prob.global_value(&c).unwrap().abs() < 1e-15);
        let mut rng = stream(4, 0);
        for _ in 0..1000 {
            let mut x = vec![0.0; 4];
            rng::fill_standard_normal(&mut rng, &mut x);
            let lhs = 0.5 * norm_sq(&prob.global_gradient(&x).unwrap());
            let rhs = prob.global_value(&x).unwrap() - prob.optimum().unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }
    }

    #[test]
    fn scaled_quadratic_pl_constant() {
        let cfg = ProblemConfig::PlQuadratic {
            n: 6,
            p: 5,
            heterogeneity: Heterogeneity::Scaled,
            center_scale: 1.0,
            spread: 0.5,
        };
        let prob = Problem::from_config(&cfg, 2).unwrap();
        let nu = prob.constants().nu.unwrap();
        assert_eq!(prob.constants().sigma2, None);
        let xs = prob.minimizer().unwrap().to_vec();
        assert!(norm_sq(&prob.global_gradient(&xs).unwrap()) < 1e-24);
        let mut rng = stream(5, 0);
        for _ in 0..200 {
            let mut x = vec![0.0; 5];
            rng::fill_standard_normal(&mut rng, &mut x);
            let lhs = 0.5 * norm_sq(&prob.global_gradient(&x).unwrap());
            let rhs = nu * (prob.global_value(&x).unwrap() - prob.optimum().unwrap());
            assert!(lhs >= rhs - 1e-12);
        }
    }

    #[test]
    fn deterministic_quadratic_ignores_xi() {
        let prob = Problem::from_config(
            &ProblemConfig::DeterministicQuadratic {
                n: 3,
                p: 4,
                center_scale: 1.0,
            },
            3,
        )
        .unwrap();
        let mut rng = stream(6, 0);
        let a = prob.draw(1, &mut rng);
        let mut b = prob.draw(1, &mut rng);
        prob.draw_into(1, &mut rng, &mut b);
        assert_ne!(a, b);
        let x = [0.3, 0.1, -0.4, 2.0];
        assert_eq!(prob.eval(1, &x, &a), prob.eval(1, &x, &b));
        assert_eq!(prob.eval(0, &x, &a), prob.eval(2, &x, &b));
    }

    #[test]
    fn logistic_labels_reproducible() {
        let prob = logistic(3, 4, 0.001);
        let a = prob.draw(0, &mut stream(10, 2));
        let b = prob.draw(0, &mut stream(10, 2));
        assert_eq!(a, b);
        let again = logistic(3, 4, 0.001);
        assert_eq!(prob.hidden_parameter(), again.hidden_parameter());
    }

    #[test]
    fn config_keys() {
        let cfg: ProblemConfig =
            serde_json::from_str(r#"{"problem":"logistic","n":20,"p":50,"m":200,"theta":0.001,"tau":1.0}"#).unwrap();
        assert_eq!(
            cfg,
            ProblemConfig::Logistic {
                n: 20,
                p: 50,
                m: 200,
                theta: 0.001,
                tau: 1.0
            }
        );
        let cfg: ProblemConfig = serde_json::from_str(r#"{"problem":"pl_quadratic","n":2,"p":3}"#).unwrap();
        assert!(matches!(
            cfg,
            ProblemConfig::PlQuadratic {
                heterogeneity: Heterogeneity::Zero,
                ..
            }
        ));
    }
}
