//! Entropy-weighted stochastic product quantizer.
//!
//! Bits are allocated across modalities proportionally to empirical
//! entropy, spread across dimensions round-robin in order of decreasing
//! variance, and each dimension is cut into equal-probability cells at
//! empirical quantiles. Encoding locates the cell (right-closed boundary
//! rule) and samples the codeword coordinate uniformly inside it, so the
//! cell index is deterministic while the emitted vector is stochastic.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::infotheory::{locate_cell, quantile_cuts};
use crate::model::MultimodalVector;
use crate::{RdError, Result};

/// Per-modality bit budgets from the proportional ceiling rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitAllocation {
    pub total_bits: usize,
    pub per_modality: Vec<usize>,
}

impl BitAllocation {
    pub fn sum(&self) -> usize {
        self.per_modality.iter().sum()
    }
}

/// `R_m = ceil((H_m / sum_j H_j) R)`, with every budget at least 1 bit.
/// Negative differential entropies are shifted by a common offset so all
/// weights are positive; relative order is preserved.
pub fn allocate_bits(total_bits: usize, entropies: &[f64]) -> Result<BitAllocation> {
    let m = entropies.len();
    if m == 0 {
        return Err(RdError::InvalidInput("no modalities".into()));
    }
    if entropies.iter().any(|h| !h.is_finite()) {
        return Err(RdError::InvalidInput("non-finite entropy".into()));
    }
    if total_bits < m {
        return Err(RdError::InvalidInput(format!(
            "rate {total_bits} below one bit per modality (M = {m})"
        )));
    }
    let shifted = positive_weights(entropies);
    let sum: f64 = shifted.iter().sum();
    let per_modality: Vec<usize> = shifted
        .iter()
        .map(|h| ((h / sum * total_bits as f64).ceil() as usize).max(1))
        .collect();
    Ok(BitAllocation { total_bits, per_modality })
}

/// Shift entropies into positive territory when any is non-positive.
/// Used identically by bit allocation and the adaptive temperature rule.
pub fn positive_weights(entropies: &[f64]) -> Vec<f64> {
    let min = entropies.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min <= 0.0 { -min + 0.1 } else { 0.0 };
    entropies.iter().map(|h| h + shift).collect()
}

/// Quantile cuts for one dimension of one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimPartition {
    pub cuts: Vec<f64>,
    pub bits: u32,
    pub observed_min: f64,
    pub observed_max: f64,
    /// True when duplicate quantile cuts were merged (discrete-valued data),
    /// reducing the effective cell count below `2^bits`.
    pub merged: bool,
}

impl DimPartition {
    pub fn cells(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn effective_bits(&self) -> f64 {
        (self.cells() as f64).log2()
    }
}

/// Equal-probability cell partition for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPartition {
    pub dims: Vec<DimPartition>,
    pub requested_bits: usize,
}

impl CellPartition {
    /// `sum_j log2(cells_j)`; equals `requested_bits` unless cuts merged.
    pub fn effective_bits(&self) -> f64 {
        self.dims.iter().map(DimPartition::effective_bits).sum()
    }

    pub fn merged_dims(&self) -> usize {
        self.dims.iter().filter(|d| d.merged).count()
    }
}

/// Distribute `bits` across dimensions round-robin in order of decreasing
/// sample variance; constant dimensions take no bits (reassigned onward).
fn distribute_bits(variances: &[f64], bits: usize) -> Vec<u32> {
    let mut order: Vec<usize> = (0..variances.len()).filter(|&j| variances[j] > 0.0).collect();
    order.sort_by(|&a, &b| variances[b].partial_cmp(&variances[a]).unwrap().then(a.cmp(&b)));
    let mut per_dim = vec![0u32; variances.len()];
    if order.is_empty() {
        return per_dim;
    }
    let mut remaining = bits;
    let mut i = 0;
    while remaining > 0 {
        per_dim[order[i % order.len()]] += 1;
        remaining -= 1;
        i += 1;
    }
    per_dim
}

/// Fit an equal-probability partition for one modality on training rows.
pub fn fit_partition(samples: &[Vec<f64>], bits: usize) -> Result<CellPartition> {
    let n = samples.len();
    let d = samples.first().map(|s| s.len()).unwrap_or(0);
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(RdError::Data("empty or ragged training matrix".into()));
    }
    let variances: Vec<f64> = (0..d)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n as f64;
            samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / n as f64
        })
        .collect();
    let per_dim = distribute_bits(&variances, bits);
    let max_bits = per_dim.iter().copied().max().unwrap_or(0);
    let required = (1usize << max_bits) * 4;
    if n < required {
        return Err(RdError::InvalidInput(format!(
            "insufficient training samples: need at least {required} for {max_bits} bits per dim, got {n}"
        )));
    }

    let dims = (0..d)
        .map(|j| {
            let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let observed_min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let observed_max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let b = per_dim[j];
            let cuts = if b == 0 { Vec::new() } else { quantile_cuts(&col, 1usize << b) };
            let merged = cuts.len() + 1 != (1usize << b) && b > 0;
            DimPartition { cuts, bits: b, observed_min, observed_max, merged }
        })
        .collect();

    Ok(CellPartition { dims, requested_bits: bits })
}

/// Stochastic codeword: deterministic per-dimension cell indices plus a
/// point sampled uniformly inside the indexed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticCodeword {
    /// Per modality, per quantized dimension.
    pub cell_index: Vec<Vec<u32>>,
    /// Per modality sampled coordinates.
    pub vector: Vec<Vec<f64>>,
}

/// Encode one multimodal vector. Cell lookup is binary search with the
/// right-closed tie rule; tail cells are bounded by the observed training
/// range and out-of-range inputs clamp into the nearest cell.
pub fn encode<R: Rng>(
    x: &MultimodalVector,
    partitions: &[CellPartition],
    rng: &mut R,
) -> Result<StochasticCodeword> {
    if x.parts.len() != partitions.len() {
        return Err(RdError::Data("modality count mismatch".into()));
    }
    let mut cell_index = Vec::with_capacity(partitions.len());
    let mut vector = Vec::with_capacity(partitions.len());
    for (part, p) in x.parts.iter().zip(partitions) {
        if part.len() != p.dims.len() {
            return Err(RdError::Data(format!(
                "dimension mismatch: vector has {}, partition has {}",
                part.len(),
                p.dims.len()
            )));
        }
        let mut idx = Vec::with_capacity(p.dims.len());
        let mut coords = Vec::with_capacity(p.dims.len());
        for (&v, dp) in part.iter().zip(&p.dims) {
            let cell = locate_cell(&dp.cuts, v);
            let lo = if cell == 0 { dp.observed_min } else { dp.cuts[cell - 1] };
            let hi = if cell == dp.cuts.len() { dp.observed_max } else { dp.cuts[cell] };
            let u: f64 = rng.gen();
            coords.push(lo + u * (hi - lo));
            idx.push(cell as u32);
        }
        cell_index.push(idx);
        vector.push(coords);
    }
    Ok(StochasticCodeword { cell_index, vector })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookAudit {
    pub h_c_bits: f64,
    pub within_budget: bool,
    pub occupied_cells: usize,
}

/// Plug-in entropy of the emitted cell-index distribution, checked against
/// the allocated budget with 0.1 bit of slack.
pub fn codebook_entropy_audit(
    codewords: &[StochasticCodeword],
    allocation: &BitAllocation,
) -> Result<CodebookAudit> {
    if codewords.is_empty() {
        return Err(RdError::InvalidInput("no codewords to audit".into()));
    }
    // BTreeMap keeps summation order deterministic across runs.
    let mut counts: BTreeMap<&[Vec<u32>], usize> = BTreeMap::new();
    for c in codewords {
        *counts.entry(c.cell_index.as_slice()).or_insert(0) += 1;
    }
    let n = codewords.len() as f64;
    let h_c_bits: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    Ok(CodebookAudit {
        h_c_bits,
        within_budget: h_c_bits <= allocation.sum() as f64 + 0.1,
        occupied_cells: counts.len(),
    })
}

/// Worst relative deviation of empirical per-cell probability from the
/// equal-probability target `2^-bits`, over per-dimension cells whose
/// expected count is at least `min_expected`.
pub fn calibration_max_deviation(
    partition: &CellPartition,
    samples: &[Vec<f64>],
    min_expected: f64,
) -> f64 {
    let n = samples.len() as f64;
    let mut worst: f64 = 0.0;
    for (j, dp) in partition.dims.iter().enumerate() {
        if dp.bits == 0 {
            continue;
        }
        let target = 2.0_f64.powi(-(dp.bits as i32));
        if n * target < min_expected {
            continue;
        }
        let mut counts = vec![0usize; dp.cells()];
        for s in samples {
            counts[locate_cell(&dp.cuts, s[j])] += 1;
        }
        for &c in &counts {
            let dev = (c as f64 / n - target).abs() / target;
            worst = worst.max(dev);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_bits(64, &[4.0, 4.0]).unwrap().per_modality, vec![32, 32]);
        assert_eq!(allocate_bits(64, &[3.0, 1.0]).unwrap().per_modality, vec![48, 16]);
        assert_eq!(allocate_bits(10, &[3.0, 1.0, 1.0]).unwrap().per_modality, vec![6, 2, 2]);
        assert!(allocate_bits(2, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn allocation_handles_negative_entropies() {
        let a = allocate_bits(64, &[-2.0, 4.0]).unwrap();
        assert!(a.per_modality.iter().all(|&b| b >= 1));
        assert!(a.per_modality[1] > a.per_modality[0]);
    }

    #[test]
    fn allocation_sum_within_ceiling_slack() {
        let mut r = rng::stream(2, "alloc", 0);
        for _ in 0..100 {
            let m = 1 + (r.gen::<u64>() % 5) as usize;
            let h: Vec<f64> = (0..m).map(|_| r.gen::<f64>() * 10.0 + 0.1).collect();
            let total = m + (r.gen::<u64>() % 100) as usize;
            let a = allocate_bits(total, &h).unwrap();
            assert!(a.sum() >= total);
            assert!(a.sum() <= total + m);
        }
    }

    fn uniform_samples(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, "qsamples", 0);
        (0..n).map(|_| (0..d).map(|_| r.gen::<f64>()).collect()).collect()
    }

    #[test]
    fn partition_quantiles_on_uniform_scalar() {
        let samples = uniform_samples(20_000, 1, 1);
        let p = fit_partition(&samples, 2).unwrap();
        let cuts = &p.dims[0].cuts;
        assert_eq!(cuts.len(), 3);
        for (cut, expect) in cuts.iter().zip([0.25, 0.5, 0.75]) {
            assert!((cut - expect).abs() < 0.02, "cut {cut} vs {expect}");
        }
    }

    #[test]
    fn zero_bits_is_single_cell() {
        // 2 dims, 1 bit: only the higher-variance dim is cut
        let mut samples = uniform_samples(1000, 2, 2);
        for s in &mut samples {
            s[1] *= 10.0;
        }
        let p = fit_partition(&samples, 1).unwrap();
        assert_eq!(p.dims[1].bits, 1);
        assert_eq!(p.dims[0].bits, 0);
        assert_eq!(p.dims[0].cells(), 1);
    }

    #[test]
    fn constant_dim_bits_reassigned() {
        let mut samples = uniform_samples(1000, 2, 3);
        for s in &mut samples {
            s[0] = 7.0;
        }
        let p = fit_partition(&samples, 4).unwrap();
        assert_eq!(p.dims[0].bits, 0);
        assert_eq!(p.dims[0].cells(), 1);
        assert_eq!(p.dims[1].bits, 4);
    }

    #[test]
    fn insufficient_samples_error_names_count() {
        let samples = uniform_samples(10, 1, 4);
        let err = fit_partition(&samples, 4).unwrap_err();
        assert!(err.to_string().contains("64"), "{err}");
    }

    #[test]
    fn encode_boundary_is_right_closed() {
        let p = CellPartition {
            dims: vec![DimPartition {
                cuts: vec![0.5],
                bits: 1,
                observed_min: 0.0,
                observed_max: 1.0,
                merged: false,
            }],
            requested_bits: 1,
        };
        let x = MultimodalVector::new(vec![vec![0.5]]).unwrap();
        let mut r = rng::stream(1, "enc", 0);
        let c = encode(&x, std::slice::from_ref(&p), &mut r).unwrap();
        assert_eq!(c.cell_index[0][0], 0); // on the cut -> lower cell
        let x = MultimodalVector::new(vec![vec![0.5000001]]).unwrap();
        let c = encode(&x, std::slice::from_ref(&p), &mut r).unwrap();
        assert_eq!(c.cell_index[0][0], 1);
    }

    #[test]
    fn encode_deterministic_given_seed_and_cell_stable_across_seeds() {
        let samples = uniform_samples(5000, 3, 5);
        let p = fit_partition(&samples, 6).unwrap();
        let x = MultimodalVector::new(vec![samples[17].clone()]).unwrap();
        let parts = [p];
        let a = encode(&x, &parts, &mut rng::stream(9, "e", 0)).unwrap();
        let b = encode(&x, &parts, &mut rng::stream(9, "e", 0)).unwrap();
        assert_eq!(a, b);
        let c = encode(&x, &parts, &mut rng::stream(10, "e", 0)).unwrap();
        assert_eq!(a.cell_index, c.cell_index);
        assert_ne!(a.vector, c.vector);
    }

    #[test]
    fn encoded_coordinates_stay_in_cell() {
        let samples = uniform_samples(5000, 2, 6);
        let p = fit_partition(&samples, 4).unwrap();
        let mut r = rng::stream(3, "cell", 0);
        for s in samples.iter().take(300) {
            let x = MultimodalVector::new(vec![s.clone()]).unwrap();
            let c = encode(&x, std::slice::from_ref(&p), &mut r).unwrap();
            for ((&coord, &cell), dp) in
                c.vector[0].iter().zip(&c.cell_index[0]).zip(&p.dims)
            {
                let cell = cell as usize;
                let lo = if cell == 0 { dp.observed_min } else { dp.cuts[cell - 1] };
                let hi = if cell == dp.cuts.len() { dp.observed_max } else { dp.cuts[cell] };
                assert!(coord >= lo && coord <= hi);
            }
        }
    }

    #[test]
    fn out_of_range_clamps_to_edge_cells() {
        let samples = uniform_samples(5000, 1, 7);
        let p = fit_partition(&samples, 2).unwrap();
        let mut r = rng::stream(4, "oor", 0);
        let low = MultimodalVector::new(vec![vec![-100.0]]).unwrap();
        let c = encode(&low, std::slice::from_ref(&p), &mut r).unwrap();
        assert_eq!(c.cell_index[0][0], 0);
        assert!(c.vector[0][0] >= p.dims[0].observed_min);
        let high = MultimodalVector::new(vec![vec![100.0]]).unwrap();
        let c = encode(&high, std::slice::from_ref(&p), &mut r).unwrap();
        assert_eq!(c.cell_index[0][0] as usize, p.dims[0].cells() - 1);
        assert!(c.vector[0][0] <= p.dims[0].observed_max);
    }

    #[test]
    fn within_cell_distribution_is_uniform() {
        // 10^4 encodes of one input; KS statistic per coordinate < 0.02
        let samples = uniform_samples(5000, 2, 8);
        let p = fit_partition(&samples, 4).unwrap();
        let x = MultimodalVector::new(vec![samples[42].clone()]).unwrap();
        let parts = [p.clone()];
        let n = 10_000;
        let mut draws: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(n)).collect();
        let mut r = rng::stream(11, "ks", 0);
        for _ in 0..n {
            let c = encode(&x, &parts, &mut r).unwrap();
            for (j, &v) in c.vector[0].iter().enumerate() {
                draws[j].push(v);
            }
        }
        for (j, d) in draws.iter().enumerate() {
            let dp = &p.dims[j];
            let cell = locate_cell(&dp.cuts, x.parts[0][j]);
            let lo = if cell == 0 { dp.observed_min } else { dp.cuts[cell - 1] };
            let hi = if cell == dp.cuts.len() { dp.observed_max } else { dp.cuts[cell] };
            let mut sorted = d.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ks = sorted
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let cdf = (v - lo) / (hi - lo);
                    let emp_hi = (i + 1) as f64 / n as f64;
                    let emp_lo = i as f64 / n as f64;
                    (cdf - emp_lo).abs().max((emp_hi - cdf).abs())
                })
                .fold(0.0_f64, f64::max);
            assert!(ks < 0.02, "dim {j}: KS = {ks}");
        }
    }

    #[test]
    fn audit_examples() {
        let alloc = BitAllocation { total_bits: 2, per_modality: vec![2] };
        // all in one cell
        let one = vec![
            StochasticCodeword { cell_index: vec![vec![0, 0]], vector: vec![vec![0.0, 0.0]] };
            10
        ];
        let a = codebook_entropy_audit(&one, &alloc).unwrap();
        assert_eq!(a.h_c_bits, 0.0);
        assert!(a.within_budget);

        // equal-probability 2-bit codebook
        let spread: Vec<StochasticCodeword> = (0..100_000)
            .map(|i| StochasticCodeword {
                cell_index: vec![vec![(i % 2) as u32, ((i / 2) % 2) as u32]],
                vector: vec![vec![0.0, 0.0]],
            })
            .collect();
        let a = codebook_entropy_audit(&spread, &alloc).unwrap();
        assert!((a.h_c_bits - 2.0).abs() < 0.05);
        assert!(a.h_c_bits <= (a.occupied_cells as f64).log2() + 1e-12);
    }

    #[test]
    fn equal_probability_calibration() {
        let samples = uniform_samples(100_000, 4, 12);
        let p = fit_partition(&samples, 16).unwrap(); // 4 bits per dim
        let dev = calibration_max_deviation(&p, &samples, 100.0);
        assert!(dev < 0.2, "max relative deviation {dev}");
    }
}
