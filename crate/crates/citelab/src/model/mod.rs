//! Core symbols of the citation-impact model: system constants, per-paper
//! fitness, attachment-kernel weights in both disputed readings, and the
//! closed-form citation curves.

mod aging;

pub use aging::{AgingKernel, EXHAUST_TAIL, MAX_T_END};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("fitness must be nonnegative, got {0}")]
    NegativeFitness(f64),
    #[error("quantile argument {0} outside [0, 1]")]
    QuantileOutOfRange(f64),
    #[error("kernel cdf inversion at u = {u} left residual {residual:e} > 1e-12")]
    InversionFailed { u: f64, residual: f64 },
    #[error("unrecognized kernel syntax {0:?} (expected lognormal:<mu>,<sigma> | exponential:<rate> | uniform:<horizon>)")]
    KernelSyntax(String),
    #[error("paper params carry no raw fitness eta (constructed from lambda alone)")]
    MissingEta,
    #[error("invalid citation history for {paper_id:?}: {reason}")]
    InvalidHistory { paper_id: String, reason: String },
}

/// System-wide constants: growth rate `beta`, normalization `big_a`,
/// references per new paper / initial attractiveness `m`, and the paper
/// count `n0` at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub beta: f64,
    pub big_a: f64,
    pub m: u64,
    pub n0: u64,
}

impl SystemParams {
    pub fn new(beta: f64, big_a: f64, m: u64, n0: u64) -> Result<Self, ModelError> {
        if beta <= 0.0 || !beta.is_finite() {
            return Err(ModelError::InvalidParameter { name: "beta", value: beta });
        }
        if big_a <= 0.0 || !big_a.is_finite() {
            return Err(ModelError::InvalidParameter { name: "big_a", value: big_a });
        }
        if m < 1 {
            return Err(ModelError::InvalidParameter { name: "m", value: m as f64 });
        }
        if n0 < 1 {
            return Err(ModelError::InvalidParameter { name: "n0", value: n0 as f64 });
        }
        Ok(SystemParams { beta, big_a, m, n0 })
    }
}

/// Exponentially growing paper count `n0 * exp(beta * t)`.
pub fn paper_count(t: f64, sys: &SystemParams) -> Result<f64, ModelError> {
    if t < 0.0 {
        return Err(ModelError::NegativeTime(t));
    }
    Ok(sys.n0 as f64 * (sys.beta * t).exp())
}

/// Relative fitness `lambda = eta * beta / big_a`.
pub fn relative_fitness(eta: f64, sys: &SystemParams) -> Result<f64, ModelError> {
    if eta < 0.0 {
        return Err(ModelError::NegativeFitness(eta));
    }
    Ok(eta * sys.beta / sys.big_a)
}

/// The two readings of the attachment kernel's count term.
///
/// `Literal` weights a paper by its bare citation count `c`, which leaves an
/// uncited paper with zero weight forever. `WithAttractiveness` weights by
/// `c + m`, making the first citation reachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    Literal,
    WithAttractiveness,
}

impl KernelVariant {
    /// Count term of the attachment weight: `c` or `c + m`.
    pub fn count_weight(self, c: u64, m: u64) -> u64 {
        match self {
            KernelVariant::Literal => c,
            KernelVariant::WithAttractiveness => c + m,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KernelVariant::Literal => "literal",
            KernelVariant::WithAttractiveness => "with_attractiveness",
        }
    }
}

/// Per-paper parameters: raw fitness `eta` (when known), relative fitness
/// `lambda`, aging kernel, and publication time.
///
/// `lambda` is the only parameter entering the closed-form impact formulas,
/// so it may be supplied directly without `eta`, `beta`, `big_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperParams {
    pub eta: Option<f64>,
    pub lambda: f64,
    pub aging: AgingKernel,
    pub pub_time: f64,
}

impl PaperParams {
    pub fn from_eta(
        eta: f64,
        sys: &SystemParams,
        aging: AgingKernel,
        pub_time: f64,
    ) -> Result<Self, ModelError> {
        let lambda = relative_fitness(eta, sys)?;
        Ok(PaperParams { eta: Some(eta), lambda, aging, pub_time })
    }

    pub fn from_lambda(lambda: f64, aging: AgingKernel, pub_time: f64) -> Result<Self, ModelError> {
        if lambda < 0.0 {
            return Err(ModelError::NegativeFitness(lambda));
        }
        Ok(PaperParams { eta: None, lambda, aging, pub_time })
    }
}

/// Unnormalized attachment weight of a paper with `c` citations at age `dt`.
///
/// `Literal` gives `eta * c * pdf(dt)`; `WithAttractiveness` gives
/// `eta * (c + m) * pdf(dt)`. Callers normalize over their candidate set.
pub fn kernel_weight(
    c: u64,
    dt: f64,
    p: &PaperParams,
    variant: KernelVariant,
    sys: &SystemParams,
) -> Result<f64, ModelError> {
    let eta = p.eta.ok_or(ModelError::MissingEta)?;
    Ok(eta * variant.count_weight(c, sys.m) as f64 * p.aging.pdf(dt))
}

/// Ultimate citation count `m * (exp(lambda) - 1)`.
pub fn ultimate_citations(lambda: f64, m: u64) -> f64 {
    m as f64 * lambda.exp_m1()
}

/// Citation curve `m * (exp(lambda * cdf(dt)) - 1)` implied by the
/// attractiveness reading; converges to [`ultimate_citations`] as the kernel
/// exhausts.
pub fn citation_curve(lambda: f64, m: u64, kernel: &AgingKernel, dt: f64) -> f64 {
    m as f64 * (lambda * kernel.cdf(dt)).exp_m1()
}

/// Citation curve implied by the `f = 1` fixed point of the literal-kernel
/// mean-field equation: identically zero at every age.
pub fn fixed_point_curve(_dt: f64) -> f64 {
    0.0
}

/// A paper's publication time and its ordered citation event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CitationHistoryRecord")]
pub struct CitationHistory {
    paper_id: String,
    pub_time: f64,
    event_times: Vec<f64>,
}

/// Raw wire form of a history; validated on conversion so deserialized
/// histories satisfy the same invariants as constructed ones.
#[derive(Deserialize)]
struct CitationHistoryRecord {
    paper_id: String,
    pub_time: f64,
    event_times: Vec<f64>,
}

impl TryFrom<CitationHistoryRecord> for CitationHistory {
    type Error = ModelError;

    fn try_from(r: CitationHistoryRecord) -> Result<Self, ModelError> {
        CitationHistory::new(r.paper_id, r.pub_time, r.event_times)
    }
}

impl CitationHistory {
    /// Validates that events are nondecreasing (ties allowed) and strictly
    /// after publication.
    pub fn new(
        paper_id: impl Into<String>,
        pub_time: f64,
        event_times: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let paper_id = paper_id.into();
        if !pub_time.is_finite() {
            return Err(ModelError::InvalidHistory {
                paper_id,
                reason: format!("non-finite publication time {pub_time}"),
            });
        }
        for pair in event_times.windows(2) {
            if pair[1] < pair[0] {
                return Err(ModelError::InvalidHistory {
                    paper_id,
                    reason: format!("event times decrease at {} -> {}", pair[0], pair[1]),
                });
            }
        }
        if let Some(&t) = event_times.iter().find(|&&t| t <= pub_time || !t.is_finite()) {
            return Err(ModelError::InvalidHistory {
                paper_id,
                reason: format!("event time {t} not after publication time {pub_time}"),
            });
        }
        Ok(CitationHistory { paper_id, pub_time, event_times })
    }

    pub fn paper_id(&self) -> &str {
        &self.paper_id
    }

    pub fn pub_time(&self) -> f64 {
        self.pub_time
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    /// Citation count at absolute time `t`: events with time <= `t`.
    pub fn count_at(&self, t: f64) -> u64 {
        self.event_times.partition_point(|&e| e <= t) as u64
    }

    pub fn final_count(&self) -> u64 {
        self.event_times.len() as u64
    }
}
