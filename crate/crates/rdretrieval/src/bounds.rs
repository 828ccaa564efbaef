//! Closed-form information-theoretic bounds: the ranking Fano converse,
//! the skew-penalized converse and its inversion into a distortion
//! frontier, the contrastive capacity gap, and the finite-sample
//! generalization bounds.
//!
//! All rates are in bits (log base 2) everywhere.
//!
//! The raw ranking Fano expression `log N - h(D) - (1-D) log(N-1)` is zero
//! at `D = 1/N` and increasing towards `D = 1`, so only its non-increasing
//! branch near `D = 0` is a usable "rate needed for distortion D" frontier.
//! The branch is located numerically and inversion is restricted to it; the
//! raw curve stays available for transparency.

use serde::{Deserialize, Serialize};

use crate::{rng, RdError, Result};
use rand::Rng;

pub const LOG2_SQRT_EPI: f64 = 1.547_095_585_180_641_2; // log2(sqrt(e * pi))

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(RdError::InvalidInput(format!("p must be in [0, 1], got {p}")));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Upper bound on top-1 success probability: `min(1, 2(1-D)(N-1)/(N-3))`.
pub fn success_prob_upper(distortion: f64, n_corpus: usize) -> Result<f64> {
    if n_corpus < 4 {
        return Err(RdError::InvalidInput(format!(
            "corpus too small for the success-probability bound: N = {n_corpus} < 4"
        )));
    }
    let n = n_corpus as f64;
    let raw = 2.0 * (1.0 - distortion) * (n - 1.0) / (n - 3.0);
    Ok(raw.clamp(0.0, 1.0))
}

/// Ranking Fano bound `max(0, log N - h(D) - (1-D) log(N-1))`, in bits.
pub fn ranking_fano_rate(distortion: f64, n_corpus: usize) -> Result<f64> {
    if n_corpus < 2 {
        return Err(RdError::InvalidInput("ranking Fano bound needs N >= 2".into()));
    }
    if !(0.0..=1.0).contains(&distortion) {
        return Err(RdError::InvalidInput(format!("D must be in [0, 1], got {distortion}")));
    }
    let n = n_corpus as f64;
    let raw = n.log2() - binary_entropy(distortion)? - (1.0 - distortion) * (n - 1.0).log2();
    Ok(raw.max(0.0))
}

/// Inputs for the skew-penalized converse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverseInputs {
    pub n_corpus: usize,
    pub distortion: f64,
    pub kappa: f64,
    pub delta_h: f64,
    pub modalities: usize,
}

impl ConverseInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n_corpus < 4 {
            return Err(RdError::InvalidInput("converse needs N >= 4".into()));
        }
        if !(0.0..=1.0).contains(&self.distortion) {
            return Err(RdError::InvalidInput("D must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(RdError::InvalidInput("kappa must be in [0, 1]".into()));
        }
        if self.delta_h < 0.0 {
            return Err(RdError::InvalidInput("delta_h must be >= 0".into()));
        }
        Ok(())
    }
}

/// Skew-penalized converse: `R_bal(D) + kappa * delta_h`. The balanced
/// source shares the joint support, so its Fano term depends only on N
/// and D; imbalance enters purely through the additive penalty.
pub fn converse_rate(inputs: &ConverseInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(ranking_fano_rate(inputs.distortion, inputs.n_corpus)? + inputs.kappa * inputs.delta_h)
}

const BRANCH_GRID: usize = 1000;

/// End of the usable (non-increasing) branch of the converse in `D`,
/// located by grid scan plus ternary refinement of the minimum.
pub fn monotone_branch_end(n_corpus: usize) -> Result<f64> {
    if n_corpus < 4 {
        return Err(RdError::InvalidInput("branch location needs N >= 4".into()));
    }
    let f = |d: f64| ranking_fano_rate(d, n_corpus).expect("d in range");
    let mut end_idx = BRANCH_GRID;
    let mut prev = f(0.0);
    for i in 1..=BRANCH_GRID {
        let d = i as f64 / BRANCH_GRID as f64;
        let cur = f(d);
        if cur > prev {
            end_idx = i - 1;
            break;
        }
        prev = cur;
    }
    let step = 1.0 / BRANCH_GRID as f64;
    let mut lo = (end_idx as f64 * step - step).max(0.0);
    let mut hi = ((end_idx as f64 * step) + step).min(1.0);
    // ternary search on the unimodal raw curve for its minimum
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Invert the converse on its monotone branch: the distortion `D*(R)`
/// solving `R_bal(D*) + kappa * delta_h = R`. Saturates at the branch
/// endpoints when `R` is outside the curve's range.
pub fn invert_rate_to_distortion(
    rate_bits: f64,
    n_corpus: usize,
    kappa: f64,
    delta_h: f64,
) -> Result<f64> {
    if rate_bits < 0.0 {
        return Err(RdError::InvalidInput("rate must be >= 0".into()));
    }
    let end = monotone_branch_end(n_corpus)?;
    let rate_at = |d: f64| -> Result<f64> {
        converse_rate(&ConverseInputs { n_corpus, distortion: d, kappa, delta_h, modalities: 1 })
    };
    let r_max = rate_at(0.0)?;
    let r_min = rate_at(end)?;
    if rate_bits >= r_max {
        return Ok(0.0);
    }
    if rate_bits <= r_min {
        return Ok(end);
    }
    let (mut lo, mut hi) = (0.0_f64, end);
    for _ in 0..200 {
        if hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > rate_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-dimension capacity of a unit-norm deterministic codebook:
/// `d * log2(sqrt(e * pi))` bits.
pub fn contrastive_capacity(dim: usize) -> Result<f64> {
    if dim == 0 {
        return Err(RdError::InvalidInput("dim must be >= 1".into()));
    }
    Ok(dim as f64 * LOG2_SQRT_EPI)
}

/// Whether the deterministic-encoder capacity can meet the converse:
/// true ("tight possible") when the converse requirement fits under the
/// capacity.
pub fn capacity_gap_check(dim: usize, converse_bits: f64) -> Result<bool> {
    Ok(contrastive_capacity(dim)? >= converse_bits)
}

/// Rademacher complexity bound `sqrt(2/n) (sqrt(Lambda) + sqrt(log D_max))`.
pub fn rademacher_bound(n: usize, lambda_bits: f64, d_max: usize) -> Result<f64> {
    if n < 1 || d_max < 1 || lambda_bits < 0.0 {
        return Err(RdError::InvalidInput("need n >= 1, D_max >= 1, Lambda >= 0".into()));
    }
    Ok((2.0 / n as f64).sqrt() * (lambda_bits.sqrt() + (d_max as f64).log2().sqrt()))
}

/// Inputs for the finite-sample excess-distortion bound. Cell counts are
/// carried as `log2 K_m` because `K_m = 2^{R_m}` overflows any integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationInputs {
    pub n: usize,
    pub log2_cells: Vec<f64>,
    pub d_max: usize,
    pub delta: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl GeneralizationInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.d_max < 1 {
            return Err(RdError::InvalidInput("need n >= 1 and D_max >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(RdError::InvalidInput("delta must be in (0, 1)".into()));
        }
        if self.log2_cells.iter().any(|&k| k < 0.0) {
            return Err(RdError::InvalidInput("cell counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.log2_cells.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationBound {
    pub bound: f64,
    pub pre_clamp: f64,
    pub estimation_term: f64,
    pub confidence_term: f64,
}

/// Upper bound on true distortion:
/// `empirical + 4 sqrt(2/n)(sqrt(Lambda) + sqrt(log D_max)) + 3 sqrt(log(2/delta)/(2n))`,
/// clamped at 1. The pre-clamp value is reported alongside.
pub fn generalization_bound(
    inputs: &GeneralizationInputs,
    empirical_distortion: f64,
) -> Result<GeneralizationBound> {
    inputs.validate()?;
    let n = inputs.n as f64;
    let estimation_term = 4.0 * rademacher_bound(inputs.n, inputs.lambda(), inputs.d_max)?;
    let confidence_term = 3.0 * ((2.0 / inputs.delta).log2() / (2.0 * n)).sqrt();
    let pre_clamp = empirical_distortion + estimation_term + confidence_term;
    Ok(GeneralizationBound { bound: pre_clamp.min(1.0), pre_clamp, estimation_term, confidence_term })
}

/// Both readings of the cell-count lemma. The lemma's statement carries
/// `+gamma^2 dH` on the right-hand side while its proof derives
/// `-gamma^2 dH`; both are reported rather than reconciled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCountBound {
    pub lhs: f64,
    pub rhs_statement: f64,
    pub rhs_proof: f64,
    pub holds_statement: bool,
    pub holds_proof: bool,
    /// Set when `gamma > 1/sqrt(2)`, outside the lemma's stated range.
    pub gamma_warning: bool,
}

/// Evaluate the temperature-scheduled cell-count bound
/// `sum log K_m <= M H_bar +/- gamma^2 dH` with the schedule
/// `tau_m = gamma sqrt(|H_m - H_bar| + eps)`, where
/// `log K_m = H_m - tau_m^2`.
pub fn cell_count_bound(entropies: &[f64], gamma: f64, epsilon: f64) -> Result<CellCountBound> {
    if entropies.is_empty() {
        return Err(RdError::InvalidInput("need at least one modality".into()));
    }
    let m = entropies.len() as f64;
    let balanced = entropies.iter().sum::<f64>() / m;
    let delta_h: f64 = entropies.iter().map(|h| (h - balanced).abs()).sum();
    let lhs: f64 = entropies
        .iter()
        .map(|h| h - gamma * gamma * ((h - balanced).abs() + epsilon))
        .sum();
    let rhs_statement = m * balanced + gamma * gamma * delta_h;
    let rhs_proof = m * balanced - gamma * gamma * delta_h;
    Ok(CellCountBound {
        lhs,
        rhs_statement,
        rhs_proof,
        holds_statement: lhs <= rhs_statement + 1e-12,
        holds_proof: lhs <= rhs_proof + 1e-12,
        gamma_warning: gamma > std::f64::consts::FRAC_1_SQRT_2,
    })
}

/// One (rate, distortion) frontier per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDistortionCurve {
    pub points: Vec<(f64, f64)>,
    pub label: String,
}

impl RateDistortionCurve {
    pub fn new(points: Vec<(f64, f64)>, label: impl Into<String>) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(RdError::InvalidInput("rates must be strictly increasing".into()));
            }
        }
        if points.iter().any(|&(_, d)| !(0.0..=1.0).contains(&d)) {
            return Err(RdError::InvalidInput("distortions must be in [0, 1]".into()));
        }
        Ok(Self { points, label: label.into() })
    }
}

/// A midpoint-convexity violation of the raw converse on the sampled triple
/// `(d_lo, d_mid, d_hi)`: `rate(mid) > (rate(lo) + rate(hi)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityViolation {
    pub d_lo: f64,
    pub d_mid: f64,
    pub d_hi: f64,
    pub excess: f64,
}

/// Midpoint-convexity scan over sampled triples restricted to the monotone
/// branch. Violations are returned for reporting, never hidden.
pub fn convexity_violations(
    n_corpus: usize,
    kappa: f64,
    delta_h: f64,
    n_triples: usize,
    seed: u64,
) -> Result<Vec<ConvexityViolation>> {
    let end = monotone_branch_end(n_corpus)?;
    let rate_at = |d: f64| -> Result<f64> {
        converse_rate(&ConverseInputs { n_corpus, distortion: d, kappa, delta_h, modalities: 1 })
    };
    let mut r = rng::stream(seed, "convexity", 0);
    let mut violations = Vec::new();
    for _ in 0..n_triples {
        let a: f64 = r.gen::<f64>() * end;
        let b: f64 = r.gen::<f64>() * end;
        let (d_lo, d_hi) = if a <= b { (a, b) } else { (b, a) };
        let d_mid = 0.5 * (d_lo + d_hi);
        let mid = rate_at(d_mid)?;
        let avg = 0.5 * (rate_at(d_lo)? + rate_at(d_hi)?);
        if mid > avg + 1e-12 {
            violations.push(ConvexityViolation { d_lo, d_mid, d_hi, excess: mid - avg });
        }
    }
    Ok(violations)
}
