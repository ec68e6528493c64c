//! Stochastic user demand.
//!
//! A [`DemandProfile`] describes the random resource demand of a single user
//! per time unit. Profiles are immutable once built; every statistic below is
//! a deterministic function of the profile.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{ModelError, Result};

/// Distribution family of the demand random variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandKind {
    /// `[lower, upper]`
    Uniform,
    /// `[mu, sigma, upper]` (lower bound 0) or `[mu, sigma, lower, upper]`
    TruncatedNormal,
    /// `[mu_log, sigma_log]` (untruncated) or `[mu_log, sigma_log, upper]`
    #[serde(alias = "lognormal")]
    LogNormal,
    /// The observed demand values themselves.
    Empirical,
}

/// How `max(R_demand)` is estimated from a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxMethod {
    /// `E(R) + V(R)`. Mixes units and squared units; kept for comparison runs.
    MeanPlusVariance,
    /// The q-quantile of the demand distribution, `0 < q < 1`.
    Quantile(f64),
    /// Supremum of the support. Fails for unbounded profiles.
    TrueUpperBound,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Uniform {
        lower: f64,
        upper: f64,
    },
    TruncatedNormal {
        mu: f64,
        sigma: f64,
        lower: f64,
        upper: f64,
        // standardized bounds and their CDF values, cached
        alpha: f64,
        beta: f64,
        cdf_alpha: f64,
        mass: f64,
    },
    LogNormal {
        mu_log: f64,
        sigma_log: f64,
        upper: Option<f64>,
        // P(X <= upper), 1 when untruncated
        mass: f64,
    },
    Empirical {
        sorted: Vec<f64>,
    },
}

/// Validated demand distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    kind: DemandKind,
    params: Vec<f64>,
    resource_unit: String,
    family: Family,
}

fn std_normal() -> Normal {
    Normal::standard()
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::InvalidDistribution(msg.into())
}

impl DemandProfile {
    /// Builds a profile from a family tag and its parameter list.
    pub fn new(kind: DemandKind, params: &[f64]) -> Result<Self> {
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        let family = match kind {
            DemandKind::Uniform => {
                let [lower, upper] = params else {
                    return Err(invalid(format!(
                        "uniform takes [lower, upper], got {} values",
                        params.len()
                    )));
                };
                if *lower < 0.0 {
                    return Err(invalid("uniform lower bound must be >= 0"));
                }
                if lower >= upper {
                    return Err(invalid(format!(
                        "uniform requires lower < upper, got [{lower}, {upper}]"
                    )));
                }
                Family::Uniform {
                    lower: *lower,
                    upper: *upper,
                }
            }
            DemandKind::TruncatedNormal => {
                let (mu, sigma, lower, upper) = match params {
                    [mu, sigma, upper] => (*mu, *sigma, 0.0, *upper),
                    [mu, sigma, lower, upper] => (*mu, *sigma, *lower, *upper),
                    _ => {
                        return Err(invalid(format!(
                            "truncated_normal takes [mu, sigma, upper] or [mu, sigma, lower, upper], got {} values",
                            params.len()
                        )))
                    }
                };
                if sigma <= 0.0 {
                    return Err(invalid(format!("sigma must be > 0, got {sigma}")));
                }
                if lower < 0.0 {
                    return Err(invalid("truncated_normal lower bound must be >= 0"));
                }
                if lower >= upper {
                    return Err(invalid(format!(
                        "truncated_normal requires lower < upper, got [{lower}, {upper}]"
                    )));
                }
                let n = std_normal();
                let alpha = (lower - mu) / sigma;
                let beta = (upper - mu) / sigma;
                let cdf_alpha = n.cdf(alpha);
                let mass = n.cdf(beta) - cdf_alpha;
                if mass.is_nan() || mass <= 1e-300 {
                    return Err(invalid("truncation interval carries no probability mass"));
                }
                Family::TruncatedNormal {
                    mu,
                    sigma,
                    lower,
                    upper,
                    alpha,
                    beta,
                    cdf_alpha,
                    mass,
                }
            }
            DemandKind::LogNormal => {
                let (mu_log, sigma_log, upper) = match params {
                    [m, s] => (*m, *s, None),
                    [m, s, u] => (*m, *s, Some(*u)),
                    _ => {
                        return Err(invalid(format!(
                            "lognormal takes [mu_log, sigma_log] or [mu_log, sigma_log, upper], got {} values",
                            params.len()
                        )))
                    }
                };
                if sigma_log <= 0.0 {
                    return Err(invalid(format!("sigma_log must be > 0, got {sigma_log}")));
                }
                let mass = match upper {
                    None => 1.0,
                    Some(u) if u <= 0.0 => {
                        return Err(invalid("lognormal upper truncation must be > 0"))
                    }
                    Some(u) => std_normal().cdf((u.ln() - mu_log) / sigma_log),
                };
                if mass.is_nan() || mass <= 1e-300 {
                    return Err(invalid("truncation interval carries no probability mass"));
                }
                Family::LogNormal {
                    mu_log,
                    sigma_log,
                    upper,
                    mass,
                }
            }
            DemandKind::Empirical => {
                if params.len() < 2 {
                    return Err(invalid(format!(
                        "empirical profile needs at least 2 samples, got {}",
                        params.len()
                    )));
                }
                if params.iter().any(|&v| v < 0.0) {
                    return Err(invalid("empirical demand values must be >= 0"));
                }
                let mut sorted = params.to_vec();
                sorted.sort_by(f64::total_cmp);
                Family::Empirical { sorted }
            }
        };
        Ok(Self {
            kind,
            params: params.to_vec(),
            resource_unit: String::new(),
            family,
        })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::new(DemandKind::Uniform, &[lower, upper])
    }

    pub fn truncated_normal(mu: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::new(DemandKind::TruncatedNormal, &[mu, sigma, lower, upper])
    }

    pub fn lognormal(mu_log: f64, sigma_log: f64, upper: Option<f64>) -> Result<Self> {
        match upper {
            Some(u) => Self::new(DemandKind::LogNormal, &[mu_log, sigma_log, u]),
            None => Self::new(DemandKind::LogNormal, &[mu_log, sigma_log]),
        }
    }

    pub fn empirical(samples: &[f64]) -> Result<Self> {
        Self::new(DemandKind::Empirical, samples)
    }

    /// Attaches a documentation-only unit label such as `"GB"`.
    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.resource_unit = unit.into();
        self
    }

    pub fn kind(&self) -> DemandKind {
        self.kind
    }

    /// Parameters exactly as supplied at construction.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn resource_unit(&self) -> &str {
        &self.resource_unit
    }

    /// Whether the support has a finite supremum.
    pub fn is_bounded(&self) -> bool {
        !matches!(self.family, Family::LogNormal { upper: None, .. })
    }

    /// Supremum of the support, `None` when unbounded.
    pub fn support_max(&self) -> Option<f64> {
        match &self.family {
            Family::Uniform { upper, .. } | Family::TruncatedNormal { upper, .. } => Some(*upper),
            Family::LogNormal { upper, .. } => *upper,
            Family::Empirical { sorted } => sorted.last().copied(),
        }
    }

    /// `E(R)`.
    pub fn mean(&self) -> f64 {
        match &self.family {
            Family::Uniform { lower, upper } => 0.5 * (lower + upper),
            Family::TruncatedNormal {
                mu,
                sigma,
                alpha,
                beta,
                mass,
                ..
            } => {
                let n = std_normal();
                mu + sigma * (n.pdf(*alpha) - n.pdf(*beta)) / mass
            }
            Family::LogNormal {
                mu_log,
                sigma_log,
                upper,
                mass,
            } => {
                let full = (mu_log + 0.5 * sigma_log * sigma_log).exp();
                match upper {
                    None => full,
                    Some(u) => {
                        let z = (u.ln() - mu_log - sigma_log * sigma_log) / sigma_log;
                        full * std_normal().cdf(z) / mass
                    }
                }
            }
            Family::Empirical { sorted } => sorted.iter().sum::<f64>() / sorted.len() as f64,
        }
    }

    /// `V(R)`; the unbiased sample variance for empirical profiles.
    pub fn variance(&self) -> f64 {
        match &self.family {
            Family::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            Family::TruncatedNormal {
                sigma,
                alpha,
                beta,
                mass,
                ..
            } => {
                let n = std_normal();
                let (pa, pb) = (n.pdf(*alpha), n.pdf(*beta));
                let a_term = if alpha.is_finite() { alpha * pa } else { 0.0 };
                let b_term = if beta.is_finite() { beta * pb } else { 0.0 };
                let shift = (pa - pb) / mass;
                sigma * sigma * (1.0 + (a_term - b_term) / mass - shift * shift)
            }
            Family::LogNormal {
                mu_log,
                sigma_log,
                upper,
                mass,
            } => {
                let s2 = sigma_log * sigma_log;
                match upper {
                    None => s2.exp_m1() * (2.0 * mu_log + s2).exp(),
                    Some(u) => {
                        let n = std_normal();
                        let ln_u = u.ln();
                        let m1 = (mu_log + 0.5 * s2).exp()
                            * n.cdf((ln_u - mu_log - s2) / sigma_log)
                            / mass;
                        let m2 = (2.0 * mu_log + 2.0 * s2).exp()
                            * n.cdf((ln_u - mu_log - 2.0 * s2) / sigma_log)
                            / mass;
                        (m2 - m1 * m1).max(0.0)
                    }
                }
            }
            Family::Empirical { sorted } => {
                let n = sorted.len() as f64;
                let mean = sorted.iter().sum::<f64>() / n;
                sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            }
        }
    }

    /// Default estimator for `max(R_demand)`: the support supremum when it
    /// exists, otherwise the 0.99-quantile.
    pub fn default_max_method(&self) -> MaxMethod {
        if self.is_bounded() {
            MaxMethod::TrueUpperBound
        } else {
            MaxMethod::Quantile(0.99)
        }
    }

    pub fn max_estimate(&self, method: MaxMethod) -> Result<f64> {
        match method {
            MaxMethod::MeanPlusVariance => Ok(self.mean() + self.variance()),
            MaxMethod::Quantile(q) => self.quantile(q),
            MaxMethod::TrueUpperBound => self.support_max().ok_or_else(|| {
                ModelError::UnboundedSupport(
                    "untruncated lognormal has no finite upper bound".into(),
                )
            }),
        }
    }

    /// The q-quantile, `inf { x : F(x) >= q }`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "quantile level must lie in (0, 1), got {q}"
            )));
        }
        Ok(self.inverse_cdf(q))
    }

    /// `P(R_demand > r)`.
    pub fn tail_probability(&self, r: f64) -> f64 {
        match &self.family {
            Family::Uniform { lower, upper } => {
                if r < *lower {
                    1.0
                } else if r >= *upper {
                    0.0
                } else {
                    (upper - r) / (upper - lower)
                }
            }
            Family::TruncatedNormal {
                mu,
                sigma,
                lower,
                upper,
                beta,
                mass,
                ..
            } => {
                if r < *lower {
                    1.0
                } else if r >= *upper {
                    0.0
                } else {
                    let n = std_normal();
                    let z = (r - mu) / sigma;
                    // sf difference keeps precision when both bounds sit in the upper tail
                    let tail = n.sf(z) - n.sf(*beta);
                    (tail / mass).clamp(0.0, 1.0)
                }
            }
            Family::LogNormal {
                mu_log,
                sigma_log,
                upper,
                mass,
            } => {
                if r <= 0.0 {
                    return 1.0;
                }
                if let Some(u) = upper {
                    if r >= *u {
                        return 0.0;
                    }
                }
                let n = std_normal();
                let below = n.cdf((r.ln() - mu_log) / sigma_log);
                ((mass - below) / mass).clamp(0.0, 1.0)
            }
            Family::Empirical { sorted } => {
                let above = sorted.len() - sorted.partition_point(|&v| v <= r);
                above as f64 / sorted.len() as f64
            }
        }
    }

    /// `E[min(R_demand, cap)]`, the mean of demand truncated at `cap`.
    pub fn capped_mean(&self, cap: f64) -> f64 {
        if cap <= 0.0 {
            return 0.0;
        }
        self.partial_expectation(cap) + cap * self.tail_probability(cap)
    }

    /// `E[R · 1{R <= t}]`.
    fn partial_expectation(&self, t: f64) -> f64 {
        match &self.family {
            Family::Uniform { lower, upper } => {
                if t <= *lower {
                    0.0
                } else if t >= *upper {
                    self.mean()
                } else {
                    (t * t - lower * lower) / (2.0 * (upper - lower))
                }
            }
            Family::TruncatedNormal {
                mu,
                sigma,
                lower,
                upper,
                alpha,
                cdf_alpha,
                mass,
                ..
            } => {
                if t <= *lower {
                    return 0.0;
                }
                let n = std_normal();
                let bt = (t.min(*upper) - mu) / sigma;
                (mu * (n.cdf(bt) - cdf_alpha) - sigma * (n.pdf(bt) - n.pdf(*alpha))) / mass
            }
            Family::LogNormal {
                mu_log,
                sigma_log,
                upper,
                mass,
            } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let t = upper.map_or(t, |u| t.min(u));
                let s2 = sigma_log * sigma_log;
                (mu_log + 0.5 * s2).exp() * std_normal().cdf((t.ln() - mu_log - s2) / sigma_log)
                    / mass
            }
            Family::Empirical { sorted } => {
                let k = sorted.partition_point(|&v| v <= t);
                sorted[..k].iter().sum::<f64>() / sorted.len() as f64
            }
        }
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        match &self.family {
            Family::Uniform { lower, upper } => lower + u * (upper - lower),
            Family::TruncatedNormal {
                mu,
                sigma,
                lower,
                upper,
                cdf_alpha,
                mass,
                ..
            } => {
                let z = std_normal().inverse_cdf(cdf_alpha + u * mass);
                (mu + sigma * z).clamp(*lower, *upper)
            }
            Family::LogNormal {
                mu_log,
                sigma_log,
                upper,
                mass,
            } => {
                let z = std_normal().inverse_cdf(u * mass);
                let x = (mu_log + sigma_log * z).exp();
                match upper {
                    Some(up) => x.min(*up),
                    None => x,
                }
            }
            Family::Empirical { sorted } => {
                let n = sorted.len();
                let idx = ((u * n as f64).ceil() as usize).clamp(1, n) - 1;
                sorted[idx]
            }
        }
    }

    /// One demand draw.
    ///
    /// Uses exactly one `f64` from `rng` per draw (inverse-transform sampling),
    /// so a seeded stream yields the same sequence on every platform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match &self.family {
            Family::Empirical { sorted } => {
                let idx = ((u * sorted.len() as f64) as usize).min(sorted.len() - 1);
                sorted[idx]
            }
            _ => {
                // keep u strictly inside (0, 1) so the normal quantile stays finite
                let u = u.max(f64::MIN_POSITIVE);
                self.inverse_cdf(u)
            }
        }
    }
}
