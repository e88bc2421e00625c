//! Iteration-indexed parameter laws `α_k, β_k, γ_k, μ_k` and the compression
//! step `ω`.
//!
//! Three regimes come with convergence guarantees (fixed horizon, linearly
//! growing `γ_k`, geometric `μ_k`); `table1` is the hand-tuned setting used
//! for the logistic benchmark.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zoracle::MU_FLOOR;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule parameter: {0}")]
    InvalidParams(String),
}

/// A scalar law of the iteration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Constant {
        value: f64,
    },
    /// `scale / (k + offset)`
    Harmonic {
        scale: f64,
        offset: f64,
    },
    /// `scale · (k + offset)`
    Linear {
        scale: f64,
        offset: f64,
    },
    /// `scale · ratio^k`
    Geometric {
        scale: f64,
        ratio: f64,
    },
}

impl Law {
    pub fn at(&self, k: usize) -> f64 {
        let k = k as f64;
        match *self {
            Law::Constant { value } => value,
            Law::Harmonic { scale, offset } => scale / (k + offset),
            Law::Linear { scale, offset } => scale * (k + offset),
            Law::Geometric { scale, ratio } => scale * ratio.powf(k),
        }
    }

    fn validate(&self, name: &str) -> Result<(), ScheduleError> {
        let ok = match *self {
            Law::Constant { value } => value > 0.0,
            Law::Harmonic { scale, offset } | Law::Linear { scale, offset } => scale > 0.0 && offset > 0.0,
            Law::Geometric { scale, ratio } => scale > 0.0 && ratio > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ScheduleError::InvalidParams(format!(
                "{name} law must stay positive: {self:?}"
            )))
        }
    }
}

/// Schedule selection, as it appears in run configs.
///
/// `omega` defaults to `1/r` of the compressor in the theorem regimes and to
/// 0.1 in `table1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum ScheduleConfig {
    /// `α = √n/√(pT)`, `γ = ε₂/α`, `β = ε₁γ`, `μ = κ_μ√(pα)/√(n+p)`.
    #[serde(rename = "theorem1")]
    Theorem1Fixed {
        eps1: f64,
        eps2: f64,
        kappa_mu: f64,
        /// Horizon `T`; the run length when absent.
        #[serde(default)]
        horizon: Option<usize>,
        #[serde(default)]
        omega: Option<f64>,
    },
    /// `γ_k = ε₃(k + m)`, `β_k = ε₁γ_k`, `α_k = ε₂/γ_k`,
    /// `μ_k = κ_μ√(pα_k)/√(n+p)`.
    #[serde(rename = "theorem2")]
    Theorem2TimeVarying {
        eps1: f64,
        eps2: f64,
        eps3: f64,
        m: f64,
        kappa_mu: f64,
        #[serde(default)]
        omega: Option<f64>,
    },
    /// Constant `γ`, `α = ε₂/γ`, `β = ε₁γ`, `μ_k = κ_μ ε̃^k`.
    #[serde(rename = "theorem3")]
    Theorem3Geometric {
        eps1: f64,
        eps2: f64,
        gamma: f64,
        kappa_mu: f64,
        eps_tilde: f64,
        #[serde(default)]
        omega: Option<f64>,
    },
    /// `α = 0.1/(k+1)`, `β = 3(k+1)`, `γ = 0.1(k+1)`, `μ = 0.99^k`, `ω = 0.1`.
    Table1 {
        #[serde(default)]
        omega: Option<f64>,
    },
    Custom {
        alpha: Law,
        beta: Law,
        gamma: Law,
        mu: Law,
        omega: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Theorem1Fixed,
    Theorem2TimeVarying,
    Theorem3Geometric,
    Table1,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    regime: Regime,
    alpha: Law,
    beta: Law,
    gamma: Law,
    mu: MuLaw,
    omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum MuLaw {
    Plain(Law),
    /// `κ_μ √(p α_k) / √(n + p)`
    TiedToAlpha {
        kappa_mu: f64,
        p: f64,
        n_plus_p: f64,
    },
}

impl Schedule {
    /// Resolves a config for `n` agents in dimension `p`.
    ///
    /// `horizon` is the run length (used by the fixed-horizon regime when the
    /// config leaves it out) and `r` the compressor scaling constant.
    pub fn new(cfg: &ScheduleConfig, n: usize, p: usize, horizon: usize, r: f64) -> Result<Self, ScheduleError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(ScheduleError::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        let omega_or = |o: Option<f64>, default: f64| positive("omega", o.unwrap_or(default));
        let (nf, pf) = (n as f64, p as f64);
        let schedule = match *cfg {
            ScheduleConfig::Theorem1Fixed {
                eps1,
                eps2,
                kappa_mu,
                horizon: t,
                omega,
            } => {
                positive("eps1", eps1)?;
                positive("eps2", eps2)?;
                positive("kappa_mu", kappa_mu)?;
                let t = t.unwrap_or(horizon);
                if t == 0 {
                    return Err(ScheduleError::InvalidParams("horizon T must be at least 1".into()));
                }
                let alpha = nf.sqrt() / (pf * t as f64).sqrt();
                let gamma = eps2 / alpha;
                Schedule {
                    regime: Regime::Theorem1Fixed,
                    alpha: Law::Constant { value: alpha },
                    beta: Law::Constant { value: eps1 * gamma },
                    gamma: Law::Constant { value: gamma },
                    mu: MuLaw::Plain(Law::Constant {
                        value: kappa_mu * (pf * alpha).sqrt() / (nf + pf).sqrt(),
                    }),
                    omega: omega_or(omega, 1.0 / r)?,
                }
            }
            ScheduleConfig::Theorem2TimeVarying {
                eps1,
                eps2,
                eps3,
                m,
                kappa_mu,
                omega,
            } => {
                positive("eps1", eps1)?;
                positive("eps2", eps2)?;
                positive("eps3", eps3)?;
                positive("kappa_mu", kappa_mu)?;
                if !(m >= 1.0) {
                    return Err(ScheduleError::InvalidParams(format!("m must be >= 1, got {m}")));
                }
                Schedule {
                    regime: Regime::Theorem2TimeVarying,
                    alpha: Law::Harmonic {
                        scale: eps2 / eps3,
                        offset: m,
                    },
                    beta: Law::Linear {
                        scale: eps1 * eps3,
                        offset: m,
                    },
                    gamma: Law::Linear { scale: eps3, offset: m },
                    mu: MuLaw::TiedToAlpha {
                        kappa_mu,
                        p: pf,
                        n_plus_p: nf + pf,
                    },
                    omega: omega_or(omega, 1.0 / r)?,
                }
            }
            ScheduleConfig::Theorem3Geometric {
                eps1,
                eps2,
                gamma,
                kappa_mu,
                eps_tilde,
                omega,
            } => {
                positive("eps1", eps1)?;
                positive("eps2", eps2)?;
                positive("gamma", gamma)?;
                positive("kappa_mu", kappa_mu)?;
                if !(eps_tilde > 0.0 && eps_tilde < 1.0) {
                    return Err(ScheduleError::InvalidParams(format!(
                        "eps_tilde must be in (0, 1), got {eps_tilde}"
                    )));
                }
                Schedule {
                    regime: Regime::Theorem3Geometric,
                    alpha: Law::Constant { value: eps2 / gamma },
                    beta: Law::Constant { value: eps1 * gamma },
                    gamma: Law::Constant { value: gamma },
                    mu: MuLaw::Plain(Law::Geometric {
                        scale: kappa_mu,
                        ratio: eps_tilde,
                    }),
                    omega: omega_or(omega, 1.0 / r)?,
                }
            }
            ScheduleConfig::Table1 { omega } => Schedule {
                regime: Regime::Table1,
                alpha: Law::Harmonic {
                    scale: 0.1,
                    offset: 1.0,
                },
                beta: Law::Linear {
                    scale: 3.0,
                    offset: 1.0,
                },
                gamma: Law::Linear {
                    scale: 0.1,
                    offset: 1.0,
                },
                mu: MuLaw::Plain(Law::Geometric {
                    scale: 1.0,
                    ratio: 0.99,
                }),
                omega: omega_or(omega, 0.1)?,
            },
            ScheduleConfig::Custom {
                alpha,
                beta,
                gamma,
                mu,
                omega,
            } => {
                alpha.validate("alpha")?;
                beta.validate("beta")?;
                gamma.validate("gamma")?;
                mu.validate("mu")?;
                Schedule {
                    regime: Regime::Custom,
                    alpha,
                    beta,
                    gamma,
                    mu: MuLaw::Plain(mu),
                    omega: positive("omega", omega)?,
                }
            }
        };
        Ok(schedule)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha.at(k)
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.beta.at(k)
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma.at(k)
    }

    /// Exploration radius, clamped below at [`MU_FLOOR`].
    pub fn mu(&self, k: usize) -> f64 {
        let raw = match &self.mu {
            MuLaw::Plain(law) => law.at(k),
            MuLaw::TiedToAlpha { kappa_mu, p, n_plus_p } => kappa_mu * (p * self.alpha(k)).sqrt() / n_plus_p.sqrt(),
        };
        raw.max(MU_FLOOR)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem1_alpha() {
        let cfg = ScheduleConfig::Theorem1Fixed {
            eps1: 2.0,
            eps2: 0.5,
            kappa_mu: 1.0,
            horizon: Some(100),
            omega: None,
        };
        let s = Schedule::new(&cfg, 4, 16, 7, 2.0).unwrap();
        assert!((s.alpha(0) - 0.05).abs() < 1e-15);
        assert!((s.alpha(0) * s.gamma(0) - 0.5).abs() < 1e-12);
        assert!((s.beta(3) - 2.0 * s.gamma(3)).abs() < 1e-12);
        assert_eq!(s.omega(), 0.5);
        let expected_mu = (16.0f64 * 0.05).sqrt() / 20f64.sqrt();
        assert!((s.mu(10) - expected_mu).abs() < 1e-15);
    }

    #[test]
    fn theorem2_first_gamma() {
        let cfg = ScheduleConfig::Theorem2TimeVarying {
            eps1: 3.0,
            eps2: 0.02,
            eps3: 0.1,
            m: 10.0,
            kappa_mu: 1.0,
            omega: Some(0.5),
        };
        let s = Schedule::new(&cfg, 4, 4, 10, 1.0).unwrap();
        assert!((s.gamma(0) - 1.0).abs() < 1e-15);
        for k in [0, 1, 10, 1000] {
            assert!((s.alpha(k) * s.gamma(k) - 0.02).abs() < 1e-15);
            assert!((s.beta(k) / s.gamma(k) - 3.0).abs() < 1e-12);
            assert!(s.gamma(k + 1) >= s.gamma(k));
            assert!(s.mu(k) > 0.0);
        }
    }

    #[test]
    fn theorem3_geometric_mu_clamps() {
        let cfg = ScheduleConfig::Theorem3Geometric {
            eps1: 2.0,
            eps2: 0.01,
            gamma: 1.0,
            kappa_mu: 1.0,
            eps_tilde: 0.5,
            omega: None,
        };
        let s = Schedule::new(&cfg, 2, 2, 10, 1.6).unwrap();
        assert_eq!(s.mu(1), 0.5);
        assert_eq!(s.mu(200), MU_FLOOR);
        assert!(s.omega() * 1.6 <= 1.0 + 1e-15);
    }

    #[test]
    fn table1_values() {
        let s = Schedule::new(&ScheduleConfig::Table1 { omega: None }, 20, 50, 10, 4.125).unwrap();
        assert_eq!(
            (s.alpha(0), s.beta(0), s.gamma(0), s.mu(0), s.omega()),
            (0.1, 3.0, 0.1, 1.0, 0.1)
        );
        assert!((s.alpha(9) - 0.01).abs() < 1e-15);
        assert!((s.beta(9) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_params() {
        let bad = ScheduleConfig::Theorem3Geometric {
            eps1: 1.0,
            eps2: 1.0,
            gamma: 1.0,
            kappa_mu: 1.0,
            eps_tilde: 1.0,
            omega: None,
        };
        assert!(Schedule::new(&bad, 2, 2, 1, 1.0).is_err());
        let bad = ScheduleConfig::Theorem2TimeVarying {
            eps1: 1.0,
            eps2: 1.0,
            eps3: 1.0,
            m: 0.5,
            kappa_mu: 1.0,
            omega: None,
        };
        assert!(Schedule::new(&bad, 2, 2, 1, 1.0).is_err());
    }

    #[test]
    fn config_parses() {
        let c: ScheduleConfig = serde_json::from_str(r#"{"regime":"table1"}"#).unwrap();
        assert_eq!(c, ScheduleConfig::Table1 { omega: None });
        let c: ScheduleConfig = serde_json::from_str(
            r#"{"regime":"theorem3","eps1":2,"eps2":0.01,"gamma":1,"kappa_mu":1,"eps_tilde":0.95}"#,
        )
        .unwrap();
        assert!(matches!(c, ScheduleConfig::Theorem3Geometric { .. }));
    }
}
