//! Entropy, cross-modal redundancy, and the modality-skew coefficient.
//!
//! Two estimator families are exposed and every report records which one
//! was used: a binned plug-in for arbitrary samples (per-dimension quantile
//! cells, joint counting over the most variant dimensions) and an analytic
//! Gaussian path for sources that are known to be Gaussian.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, RdError, Result};

pub const LOG2_2PIE: f64 = 4.094_191_170_361_282; // log2(2 * pi * e)

/// Full 64-dim joint histograms are vacuously sparse, so joint counting is
/// restricted to this many most-variant dimensions; the rest contribute
/// independence-sum terms.
pub const DEFAULT_JOINT_DIM_CAP: usize = 8;
pub const DEFAULT_BINS_PER_DIM: usize = 16;

/// Relative ridge added to sample covariance diagonals.
pub const COV_RIDGE_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyMethod {
    BinnedPlugin,
    GaussianAnalytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value_bits: f64,
    pub method: EntropyMethod,
    pub n_samples: usize,
    pub bins: Option<usize>,
}

fn check_rectangular(samples: &[Vec<f64>]) -> Result<usize> {
    let d = samples.first().map(|s| s.len()).unwrap_or(0);
    if samples.iter().any(|s| s.len() != d) {
        return Err(RdError::Data("ragged sample matrix".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RdError::Data("non-finite sample entry".into()));
    }
    Ok(d)
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Equal-probability cut points for one dimension: quantiles `j / bins`,
/// deduplicated. Returns an empty set for a constant dimension.
pub fn quantile_cuts(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cuts: Vec<f64> = (1..bins).map(|j| quantile(&sorted, j as f64 / bins as f64)).collect();
    cuts.dedup();
    // A cut equal to the max puts everything in one cell; drop it.
    cuts.retain(|&c| c < *sorted.last().unwrap() && c >= *sorted.first().unwrap());
    cuts
}

/// Right-closed cell assignment: a point exactly on a cut belongs to the
/// cell whose right edge it is.
pub fn locate_cell(cuts: &[f64], x: f64) -> usize {
    cuts.partition_point(|&c| c < x)
}

fn plugin_entropy_from_counts<I: Iterator<Item = usize>>(counts: I, n: usize) -> f64 {
    let n = n as f64;
    counts
        .map(|c| {
            let p = c as f64 / n;
            if p > 0.0 {
                -p * p.log2()
            } else {
                0.0
            }
        })
        .sum()
}

/// Binned plug-in entropy with a cap on jointly counted dimensions.
pub fn estimate_entropy_binned_capped(
    samples: &[Vec<f64>],
    bins_per_dim: usize,
    joint_dim_cap: usize,
) -> Result<EntropyEstimate> {
    if samples.len() < 2 {
        return Err(RdError::InvalidInput("need at least 2 samples".into()));
    }
    if bins_per_dim < 2 {
        return Err(RdError::InvalidInput("bins_per_dim must be >= 2".into()));
    }
    let d = check_rectangular(samples)?;
    let n = samples.len();

    // Per-dimension variance; constant dimensions contribute 0 bits.
    let mut dims: Vec<(usize, f64)> = (0..d)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n as f64;
            let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / n as f64;
            (j, var)
        })
        .filter(|&(_, v)| v > 0.0)
        .collect();
    dims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let joint_dims: Vec<usize> = dims.iter().take(joint_dim_cap).map(|&(j, _)| j).collect();
    let rest_dims: Vec<usize> = dims.iter().skip(joint_dim_cap).map(|&(j, _)| j).collect();

    let mut total = 0.0;
    if !joint_dims.is_empty() {
        let cuts: Vec<Vec<f64>> = joint_dims
            .iter()
            .map(|&j| {
                let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
                quantile_cuts(&col, bins_per_dim)
            })
            .collect();
        // BTreeMap keeps summation order deterministic across runs.
        let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
        for s in samples {
            let key: Vec<u32> = joint_dims
                .iter()
                .zip(&cuts)
                .map(|(&j, c)| locate_cell(c, s[j]) as u32)
                .collect();
            *counts.entry(key).or_insert(0) += 1;
        }
        total += plugin_entropy_from_counts(counts.values().copied(), n);
    }
    for &j in &rest_dims {
        let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let cuts = quantile_cuts(&col, bins_per_dim);
        let mut counts = vec![0usize; cuts.len() + 1];
        for &x in &col {
            counts[locate_cell(&cuts, x)] += 1;
        }
        total += plugin_entropy_from_counts(counts.into_iter(), n);
    }

    Ok(EntropyEstimate {
        value_bits: total,
        method: EntropyMethod::BinnedPlugin,
        n_samples: n,
        bins: Some(bins_per_dim),
    })
}

pub fn estimate_entropy_binned(samples: &[Vec<f64>], bins_per_dim: usize) -> Result<EntropyEstimate> {
    estimate_entropy_binned_capped(samples, bins_per_dim, DEFAULT_JOINT_DIM_CAP)
}

fn sample_covariance(samples: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    let n = samples.len();
    let mut mean = vec![0.0; d];
    for s in samples {
        for j in 0..d {
            mean[j] += s[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        for a in 0..d {
            let da = s[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (s[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            cov[(a, b)] /= denom;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

fn logdet2_with_ridge(cov: &DMatrix<f64>) -> Result<f64> {
    let d = cov.nrows();
    let mut ridge = COV_RIDGE_REL * cov.trace().max(f64::MIN_POSITIVE) / d as f64;
    for _ in 0..8 {
        let mut m = cov.clone();
        for i in 0..d {
            m[(i, i)] += ridge;
        }
        if let Some(chol) = m.cholesky() {
            let logdet2: f64 = (0..d).map(|i| chol.l()[(i, i)].log2()).sum::<f64>() * 2.0;
            return Ok(logdet2);
        }
        ridge *= 10.0;
    }
    Err(RdError::Internal("covariance not positive definite after ridge escalation".into()))
}

/// Differential entropy under a Gaussian fit:
/// `0.5 * log2((2*pi*e)^d * det(cov + ridge))`.
pub fn estimate_entropy_gaussian(samples: &[Vec<f64>]) -> Result<EntropyEstimate> {
    let d = check_rectangular(samples)?;
    if d == 0 || samples.len() < d + 1 {
        return Err(RdError::InvalidInput(format!(
            "gaussian entropy needs at least dim+1 = {} samples, got {}",
            d + 1,
            samples.len()
        )));
    }
    let cov = sample_covariance(samples, d);
    let logdet2 = logdet2_with_ridge(&cov)?;
    Ok(EntropyEstimate {
        value_bits: 0.5 * (d as f64 * LOG2_2PIE + logdet2),
        method: EntropyMethod::GaussianAnalytic,
        n_samples: samples.len(),
        bins: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiMethod {
    Binned { bins_per_dim: usize },
    Gaussian,
}

/// Pairwise mutual information `I = H(a) + H(b) - H(a, b)`, clamped at 0.
pub fn mutual_information(a: &[Vec<f64>], b: &[Vec<f64>], method: MiMethod) -> Result<f64> {
    if a.len() != b.len() {
        return Err(RdError::Data("mismatched sample counts across modalities".into()));
    }
    let joint: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.iter().chain(y.iter()).copied().collect())
        .collect();
    let (ha, hb, hab) = match method {
        MiMethod::Binned { bins_per_dim } => (
            estimate_entropy_binned(a, bins_per_dim)?.value_bits,
            estimate_entropy_binned(b, bins_per_dim)?.value_bits,
            estimate_entropy_binned(&joint, bins_per_dim)?.value_bits,
        ),
        MiMethod::Gaussian => (
            estimate_entropy_gaussian(a)?.value_bits,
            estimate_entropy_gaussian(b)?.value_bits,
            estimate_entropy_gaussian(&joint)?.value_bits,
        ),
    };
    Ok((ha + hb - hab).max(0.0))
}

/// Total cross-modal redundancy: the ordered sum over `m != m'`, so each
/// unordered pair is counted twice.
pub fn cross_modal_info(modalities: &[Vec<Vec<f64>>], method: MiMethod) -> Result<f64> {
    let n = modalities.first().map(|m| m.len()).unwrap_or(0);
    if modalities.iter().any(|m| m.len() != n) {
        return Err(RdError::Data("mismatched sample counts across modalities".into()));
    }
    let mut total = 0.0;
    for i in 0..modalities.len() {
        for j in (i + 1)..modalities.len() {
            total += 2.0 * mutual_information(&modalities[i], &modalities[j], method)?;
        }
    }
    Ok(total)
}

/// Modality-skew coefficient `(1 - rho) / (M - 1)`; zero for a single
/// modality. `rho` is clamped into `[0, 1]` first.
pub fn skew_coefficient(m: usize, rho: f64) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    (1.0 - rho.clamp(0.0, 1.0)) / (m - 1) as f64
}

/// Per-modality entropies plus the derived balance/imbalance/redundancy/skew
/// summary used by the converse bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityProfile {
    pub entropies: Vec<f64>,
    pub balanced: f64,
    pub imbalance: f64,
    pub cross_info: f64,
    pub redundancy: f64,
    pub skew: f64,
    pub method: EntropyMethod,
}

impl ModalityProfile {
    pub fn from_entropies(entropies: Vec<f64>, cross_info: f64, method: EntropyMethod) -> Result<Self> {
        if entropies.is_empty() {
            return Err(RdError::InvalidInput("profile needs at least one modality".into()));
        }
        let m = entropies.len();
        let balanced = entropies.iter().sum::<f64>() / m as f64;
        let imbalance = entropies.iter().map(|h| (h - balanced).abs()).sum::<f64>();
        let sum_h: f64 = entropies.iter().sum();
        let redundancy = if m == 1 || sum_h <= 0.0 {
            if m == 1 {
                0.0
            } else {
                1.0
            }
        } else {
            (cross_info / sum_h).clamp(0.0, 1.0)
        };
        let skew = skew_coefficient(m, redundancy);
        Ok(Self { entropies, balanced, imbalance, cross_info, redundancy, skew, method })
    }
}

/// One row of the entropy concentration table: mean over trials of
/// `max_m |H_hat_m - H_m|` at sample size `n`, against the
/// `c * sqrt(log(6M/delta) / n)` reference envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub mean_max_dev: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub rows: Vec<ConcentrationRow>,
    /// Least-squares slope of log(dev) against log(n).
    pub decay_exponent: f64,
}

/// Known-entropy categorical source, one distribution per modality.
#[derive(Debug, Clone)]
pub struct DiscreteSource {
    pub probs_per_modality: Vec<Vec<f64>>,
}

impl DiscreteSource {
    pub fn true_entropies(&self) -> Vec<f64> {
        self.probs_per_modality
            .iter()
            .map(|p| p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum())
            .collect()
    }
}

/// Monte-Carlo check of plug-in entropy concentration on a finite alphabet.
pub fn entropy_concentration_check(
    source: &DiscreteSource,
    n_grid: &[usize],
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if n_grid.is_empty() || trials == 0 {
        return Err(RdError::InvalidInput("empty grid or zero trials".into()));
    }
    let truth = source.true_entropies();
    let m = source.probs_per_modality.len();
    let c = source
        .probs_per_modality
        .iter()
        .map(|p| (p.len() as f64).log2())
        .fold(0.0_f64, f64::max)
        .max(1.0);

    let mut rows = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let mut dev_sum = 0.0;
        for t in 0..trials {
            let mut max_dev = 0.0_f64;
            for (mi, probs) in source.probs_per_modality.iter().enumerate() {
                let mut r = rng::stream(seed, "conc", ((gi * trials + t) * m + mi) as u64);
                let mut counts = vec![0usize; probs.len()];
                for _ in 0..n {
                    let u: f64 = r.gen();
                    let mut acc = 0.0;
                    let mut k = probs.len() - 1;
                    for (i, &p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            k = i;
                            break;
                        }
                    }
                    counts[k] += 1;
                }
                let h_hat = plugin_entropy_from_counts(counts.into_iter(), n);
                max_dev = max_dev.max((h_hat - truth[mi]).abs());
            }
            dev_sum += max_dev;
        }
        let mean_max_dev = dev_sum / trials as f64;
        let envelope = c * ((6.0 * m as f64 / delta).log2() / n as f64).sqrt();
        rows.push(ConcentrationRow { n, mean_max_dev, envelope });
    }

    // log-log least squares for the decay exponent
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_max_dev > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean_max_dev.ln()))
        .collect();
    let decay_exponent = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (k * sxy - sx * sy) / (k * sxx - sx * sx)
    } else {
        0.0
    };

    Ok(ConcentrationReport { rows, decay_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn constant_samples_have_zero_entropy() {
        let samples = vec![vec![3.5, -1.0]; 50];
        let e = estimate_entropy_binned(&samples, 8).unwrap();
        assert_eq!(e.value_bits, 0.0);
    }

    #[test]
    fn fair_coin_is_one_bit() {
        let samples: Vec<Vec<f64>> = (0..1000).map(|i| vec![(i % 2) as f64]).collect();
        let e = estimate_entropy_binned(&samples, 2).unwrap();
        assert!((e.value_bits - 1.0).abs() < 1e-12, "got {}", e.value_bits);
    }

    #[test]
    fn uniform_four_bins_is_two_bits() {
        let mut r = rng::stream(3, "unif", 0);
        let samples: Vec<Vec<f64>> = (0..100_000).map(|_| vec![r.gen::<f64>()]).collect();
        let e = estimate_entropy_binned(&samples, 4).unwrap();
        // Oracle: count cells directly on the same sample.
        let col: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let cuts = quantile_cuts(&col, 4);
        let mut counts = vec![0usize; cuts.len() + 1];
        for &x in &col {
            counts[locate_cell(&cuts, x)] += 1;
        }
        let oracle = plugin_entropy_from_counts(counts.into_iter(), col.len());
        assert!((e.value_bits - oracle).abs() < 1e-12);
        assert!((e.value_bits - 2.0).abs() < 0.01, "got {}", e.value_bits);
    }

    #[test]
    fn binned_entropy_bounded_by_occupied_cells() {
        let mut r = rng::stream(5, "cells", 0);
        for _ in 0..10 {
            let n = 200 + (r.gen::<u64>() % 300) as usize;
            let samples: Vec<Vec<f64>> =
                (0..n).map(|_| vec![r.gen::<f64>(), r.gen::<f64>() * 3.0]).collect();
            let e = estimate_entropy_binned(&samples, 4).unwrap();
            // 4 bins per dim, 2 dims jointly counted: at most 16 occupied cells.
            assert!(e.value_bits <= (16.0_f64).log2() + 1e-12);
        }
    }

    #[test]
    fn gaussian_entropy_closed_form() {
        let mut r = rng::stream(9, "gauss", 0);
        let samples: Vec<Vec<f64>> =
            (0..20_000).map(|_| vec![rand_distr_standard(&mut r)]).collect();
        let e = estimate_entropy_gaussian(&samples).unwrap();
        // Oracle: 0.5*log2(2*pi*e*var_hat) recomputed from the same sample.
        let mean = samples.iter().map(|s| s[0]).sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s[0] - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let ridge = COV_RIDGE_REL * var;
        let oracle = 0.5 * (LOG2_2PIE + (var + ridge).log2());
        assert!((e.value_bits - oracle).abs() < 1e-9);
        // And against the unit-variance closed form 0.5*log2(2*pi*e) ~ 2.0471.
        assert!((e.value_bits - 0.5 * LOG2_2PIE).abs() < 0.05, "got {}", e.value_bits);
    }

    #[test]
    fn gaussian_entropy_scaling_adds_one_bit() {
        let mut r = rng::stream(9, "gauss", 1);
        let base: Vec<Vec<f64>> = (0..5000).map(|_| vec![rand_distr_standard(&mut r)]).collect();
        let scaled: Vec<Vec<f64>> = base.iter().map(|s| vec![2.0 * s[0]]).collect();
        let h1 = estimate_entropy_gaussian(&base).unwrap().value_bits;
        let h2 = estimate_entropy_gaussian(&scaled).unwrap().value_bits;
        assert!((h2 - h1 - 1.0).abs() < 1e-9, "diff {}", h2 - h1);
    }

    #[test]
    fn degenerate_covariance_is_finite_with_ridge() {
        let mut r = rng::stream(9, "gauss", 2);
        let samples: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let x = rand_distr_standard(&mut r);
                vec![x, x] // rank-1 covariance
            })
            .collect();
        let e = estimate_entropy_gaussian(&samples).unwrap();
        assert!(e.value_bits.is_finite());
    }

    #[test]
    fn mi_independent_coins_near_zero() {
        let mut r = rng::stream(13, "coins", 0);
        let a: Vec<Vec<f64>> = (0..50_000).map(|_| vec![f64::from(r.gen::<bool>())]).collect();
        let b: Vec<Vec<f64>> = (0..50_000).map(|_| vec![f64::from(r.gen::<bool>())]).collect();
        let i = cross_modal_info(&[a, b], MiMethod::Binned { bins_per_dim: 2 }).unwrap();
        assert!((0.0..0.02).contains(&i), "got {i}");
    }

    #[test]
    fn mi_duplicated_modality_double_counts() {
        let a: Vec<Vec<f64>> = (0..2000).map(|i| vec![(i % 2) as f64]).collect();
        let i = cross_modal_info(&[a.clone(), a], MiMethod::Binned { bins_per_dim: 2 }).unwrap();
        assert!((i - 2.0).abs() < 0.02, "got {i}");
    }

    #[test]
    fn mi_single_modality_is_zero() {
        let a: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let i = cross_modal_info(&[a], MiMethod::Binned { bins_per_dim: 2 }).unwrap();
        assert_eq!(i, 0.0);
    }

    #[test]
    fn mi_is_symmetric_and_nonnegative() {
        let mut r = rng::stream(13, "sym", 0);
        let a: Vec<Vec<f64>> = (0..3000).map(|_| vec![rand_distr_standard(&mut r)]).collect();
        let b: Vec<Vec<f64>> =
            a.iter().map(|s| vec![s[0] + 0.5 * rand_distr_standard(&mut r)]).collect();
        let iab = mutual_information(&a, &b, MiMethod::Binned { bins_per_dim: 8 }).unwrap();
        let iba = mutual_information(&b, &a, MiMethod::Binned { bins_per_dim: 8 }).unwrap();
        assert!(iab >= 0.0);
        assert!((iab - iba).abs() < 1e-12);
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew_coefficient(2, 0.0), 1.0);
        assert_eq!(skew_coefficient(5, 1.0), 0.0);
        assert_eq!(skew_coefficient(3, 0.0), 0.5);
        assert_eq!(skew_coefficient(1, 0.3), 0.0);
        // clamping
        assert_eq!(skew_coefficient(2, -0.5), 1.0);
        assert_eq!(skew_coefficient(2, 1.5), 0.0);
    }

    #[test]
    fn skew_strictly_decreasing_in_rho() {
        for m in 2..5 {
            let mut last = f64::INFINITY;
            for i in 0..=10 {
                let k = skew_coefficient(m, i as f64 / 10.0);
                assert!((0.0..=1.0).contains(&k));
                assert!(k < last || (i == 0 && k <= last));
                last = k;
            }
        }
    }

    #[test]
    fn profile_invariants() {
        let p = ModalityProfile::from_entropies(vec![4.0, 4.0], 1.0, EntropyMethod::GaussianAnalytic)
            .unwrap();
        assert_eq!(p.imbalance, 0.0);
        let q = ModalityProfile::from_entropies(vec![2.0, 8.0], 0.0, EntropyMethod::GaussianAnalytic)
            .unwrap();
        let q_perm =
            ModalityProfile::from_entropies(vec![8.0, 2.0], 0.0, EntropyMethod::GaussianAnalytic)
                .unwrap();
        assert_eq!(q.imbalance, q_perm.imbalance);
        assert_eq!(q.imbalance, 6.0);
        let single =
            ModalityProfile::from_entropies(vec![5.0], 0.0, EntropyMethod::GaussianAnalytic).unwrap();
        assert_eq!(single.skew, 0.0);
        assert_eq!(single.imbalance, 0.0);
    }

    #[test]
    fn concentration_sanity_small() {
        let source = DiscreteSource { probs_per_modality: vec![vec![0.6, 0.3, 0.1]] };
        // a few trials: a single draw can land exactly on the true
        // proportions, making the deviation legitimately zero
        let rep = entropy_concentration_check(&source, &[500], 5, 0.05, 1).unwrap();
        assert!(rep.rows[0].mean_max_dev > 0.0);
        assert!(rep.rows[0].mean_max_dev.is_finite());
    }

    #[test]
    fn concentration_decay_roughly_sqrt_n() {
        let source = DiscreteSource {
            probs_per_modality: vec![vec![0.6, 0.3, 0.1], vec![0.7, 0.2, 0.1]],
        };
        let rep = entropy_concentration_check(&source, &[1000, 4000, 16000], 10, 0.05, 42).unwrap();
        assert!(
            (rep.decay_exponent + 0.5).abs() < 0.2,
            "decay exponent {}",
            rep.decay_exponent
        );
        // deviation roughly halves when n quadruples
        let ratio = rep.rows[1].mean_max_dev / rep.rows[0].mean_max_dev;
        assert!(ratio > 0.3 && ratio < 0.8, "ratio {ratio}");
    }

    fn rand_distr_standard<R: Rng>(r: &mut R) -> f64 {
        // Box-Muller; good enough for test fixtures.
        let u1: f64 = r.gen::<f64>().max(1e-300);
        let u2: f64 = r.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
