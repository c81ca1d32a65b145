//! Full growing-system simulation: papers arrive on the deterministic
//! exponential schedule and each new paper distributes its references over
//! existing papers with probability proportional to the attachment weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{AgingKernel, CitationHistory, KernelVariant, SystemParams};

use super::SimError;

/// How each paper's raw fitness `eta` is assigned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessSource {
    Constant(f64),
    SampledUniform { lo: f64, hi: f64 },
}

impl FitnessSource {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            FitnessSource::Constant(eta) => eta,
            FitnessSource::SampledUniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
        }
    }
}

/// Parameters of one full-system run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSimConfig {
    pub sys: SystemParams,
    pub t_end: f64,
    pub fitness_source: FitnessSource,
    pub variant: KernelVariant,
    pub kernel: AgingKernel,
    /// References made by each arriving paper; conventionally equal to
    /// `sys.m`.
    pub refs_per_paper: u64,
    pub seed: u64,
}

impl SystemSimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.t_end.is_nan() || self.t_end <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if self.refs_per_paper < 1 {
            return Err(SimError::InvalidConfig("refs_per_paper must be >= 1".to_string()));
        }
        match self.fitness_source {
            FitnessSource::Constant(eta) if eta < 0.0 => {
                return Err(SimError::InvalidConfig(format!("eta must be >= 0, got {eta}")))
            }
            FitnessSource::SampledUniform { lo, hi } if lo < 0.0 || hi < lo => {
                return Err(SimError::InvalidConfig(format!(
                    "fitness range [{lo}, {hi}] must satisfy 0 <= lo <= hi"
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// Arrival time of paper `k` (for `k > n0`): `t_k = ln(k / n0) / beta`,
    /// so that the paper count at `t_k` is exactly `k`.
    pub fn arrival_time(&self, k: u64) -> f64 {
        (k as f64 / self.sys.n0 as f64).ln() / self.sys.beta
    }

    /// Total papers at `t_end`: `floor(n0 * exp(beta * t_end))`.
    pub fn final_paper_count(&self) -> u64 {
        (self.sys.n0 as f64 * (self.sys.beta * self.t_end).exp()).floor() as u64
    }
}

/// Everything a full-system run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRun {
    /// One history per paper, ordered by paper id (creation order).
    pub histories: Vec<CitationHistory>,
    /// References actually made by each paper (zero for the initial cohort,
    /// and under the literal reading when every candidate weight vanishes).
    pub out_refs: Vec<u64>,
    /// Raw fitness assigned to each paper.
    pub etas: Vec<f64>,
    /// Kernel-weighted time average of the realized normalization
    /// `beta N(t) refs / W(t)`: multiply by a paper's `eta` to get the
    /// effective relative fitness its mean-field curve would use.
    pub lambda_eff_per_eta: f64,
}

impl SystemRun {
    pub fn total_citations(&self) -> u64 {
        self.histories.iter().map(|h| h.final_count()).sum()
    }

    pub fn total_out_refs(&self) -> u64 {
        self.out_refs.iter().sum()
    }
}

/// Runs the growing system: papers arrive at `t_k = ln(k/n0)/beta`, each
/// drawing `refs_per_paper` distinct existing papers without replacement
/// with probability proportional to `eta_j * w(c_j) * pdf(t_k - pub_j)`.
///
/// When every candidate weight is zero (the literal reading before any paper
/// has a citation) the arriving paper cites nothing; that is the degeneracy
/// under test, not an error.
pub fn simulate_system(cfg: &SystemSimConfig) -> Result<SystemRun, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n0 = cfg.sys.n0;
    let n_final = cfg.final_paper_count().max(n0);
    let total = n_final as usize;

    let mut pub_times = Vec::with_capacity(total);
    let mut etas = Vec::with_capacity(total);
    let mut counts = vec![0u64; total];
    let mut events: Vec<Vec<f64>> = vec![Vec::new(); total];
    let mut out_refs = vec![0u64; total];

    for _ in 0..n0 {
        pub_times.push(0.0);
        etas.push(cfg.fitness_source.draw(&mut rng));
    }

    // Trapezoid accumulation of s(t) pdf(t) dt, where s = beta N refs / W is
    // the realized normalization. At t = 0 the candidates are the identical
    // initial cohort, so s * pdf starts at the finite value beta * refs / m.
    let mut lambda_eff = 0.0f64;
    let mut prev_t = 0.0f64;
    let mut prev_integrand = cfg.sys.beta * cfg.refs_per_paper as f64 / cfg.sys.m as f64
        * mean_eta_inverse_weight(&etas);

    let mut weights = Vec::with_capacity(total);
    for k in (n0 + 1)..=n_final {
        let t_k = cfg.arrival_time(k);
        let existing = pub_times.len();

        weights.clear();
        let mut w_total = 0.0f64;
        for j in 0..existing {
            let w = etas[j]
                * cfg.variant.count_weight(counts[j], cfg.sys.m) as f64
                * cfg.kernel.pdf(t_k - pub_times[j]);
            weights.push(w);
            w_total += w;
        }

        if w_total > 0.0 {
            let s_k = cfg.sys.beta * k as f64 * cfg.refs_per_paper as f64 / w_total;
            let integrand = s_k * cfg.kernel.pdf(t_k);
            lambda_eff += 0.5 * (prev_integrand + integrand) * (t_k - prev_t);
            prev_integrand = integrand;
            prev_t = t_k;

            let mut remaining = w_total;
            for _ in 0..cfg.refs_per_paper {
                if remaining <= 0.0 {
                    break;
                }
                let mut u = rng.gen::<f64>() * remaining;
                let mut chosen = None;
                for (j, &w) in weights.iter().enumerate() {
                    if w > 0.0 {
                        u -= w;
                        if u <= 0.0 {
                            chosen = Some(j);
                            break;
                        }
                    }
                }
                // Roundoff in `remaining` can leave u positive after the
                // scan; fall back to the last positive-weight candidate.
                let j = match chosen.or_else(|| weights.iter().rposition(|&w| w > 0.0)) {
                    Some(j) => j,
                    None => break,
                };
                events[j].push(t_k);
                counts[j] += 1;
                out_refs[(k - 1) as usize] += 1;
                remaining -= weights[j];
                weights[j] = 0.0; // without replacement; frozen for this arrival
            }
        }

        pub_times.push(t_k);
        etas.push(cfg.fitness_source.draw(&mut rng));
    }

    let width = (total.max(1) as f64).log10().ceil() as usize + 1;
    let histories = (0..total)
        .map(|j| {
            CitationHistory::new(
                format!("p{:0width$}", j, width = width),
                pub_times[j],
                std::mem::take(&mut events[j]),
            )
            .map_err(SimError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(SystemRun { histories, out_refs, etas, lambda_eff_per_eta: lambda_eff })
}

/// The t -> 0 limit of `s(t) pdf(t)` divides by the cohort-average eta; with
/// constant fitness this is `1 / eta`.
fn mean_eta_inverse_weight(etas: &[f64]) -> f64 {
    let mean = etas.iter().sum::<f64>() / etas.len() as f64;
    if mean > 0.0 {
        1.0 / mean
    } else {
        0.0
    }
}
