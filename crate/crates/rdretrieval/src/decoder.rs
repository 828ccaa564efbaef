//! Temperature-scaled ranking decoder.
//!
//! Scores are per-modality inner products scaled by per-modality
//! temperatures and summed; documents are ranked by descending score with
//! ascending-index tie-break. Temperatures come from a closed-form
//! adaptive fixed point, an entropy-gap schedule, or an optional
//! finite-difference multiplicative refinement loop.
//!
//! Softmax normalization is never materialized: only score order matters
//! for ranking, so the partition function cancels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Metrics, MultimodalVector, RankingResult};
use crate::quantizer::{encode, positive_weights, CellPartition};
use crate::{rng, RdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauOrigin {
    GlobalFixed,
    CvFixed,
    AdaptiveFixedPoint,
    Schedule,
    BaRefined,
}

/// Per-modality decoder temperatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureVector {
    pub taus: Vec<f64>,
    pub origin: TauOrigin,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
}

impl TemperatureVector {
    pub fn new(taus: Vec<f64>, origin: TauOrigin) -> Result<Self> {
        if taus.is_empty() {
            return Err(RdError::InvalidInput("no modalities".into()));
        }
        if taus.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(RdError::InvalidInput("temperatures must be positive and finite".into()));
        }
        Ok(Self { taus, origin, gamma: None, epsilon: None, lambda: None })
    }

    pub fn uniform(tau: f64, modalities: usize) -> Result<Self> {
        Self::new(vec![tau; modalities], TauOrigin::GlobalFixed)
    }
}

/// Adaptive fixed point `tau_m = sqrt(sum_j H_j / (M H_m))`, after the same
/// positivity shift used by bit allocation. Balanced entropies give all 1.
pub fn adaptive_temperatures(entropies: &[f64]) -> Result<TemperatureVector> {
    if entropies.is_empty() {
        return Err(RdError::InvalidInput("no modalities".into()));
    }
    let h = positive_weights(entropies);
    let sum: f64 = h.iter().sum();
    let m = h.len() as f64;
    let taus = h.iter().map(|&hm| (sum / (m * hm)).sqrt()).collect();
    TemperatureVector::new(taus, TauOrigin::AdaptiveFixedPoint)
}

/// Entropy-gap schedule `tau_m = gamma sqrt(|H_m - H_bar| + eps)`.
pub fn schedule_temperatures(entropies: &[f64], gamma: f64, epsilon: f64) -> Result<TemperatureVector> {
    if !(gamma > 0.0 && epsilon > 0.0) {
        return Err(RdError::InvalidInput("gamma and epsilon must be positive".into()));
    }
    if entropies.is_empty() {
        return Err(RdError::InvalidInput("no modalities".into()));
    }
    let balanced = entropies.iter().sum::<f64>() / entropies.len() as f64;
    let taus = entropies.iter().map(|h| gamma * ((h - balanced).abs() + epsilon).sqrt()).collect();
    let mut t = TemperatureVector::new(taus, TauOrigin::Schedule)?;
    t.gamma = Some(gamma);
    t.epsilon = Some(epsilon);
    Ok(t)
}

/// The schedule's tuning constant: `gamma^2 = 1 / (M + dH)`.
pub fn schedule_gamma(modalities: usize, delta_h: f64) -> f64 {
    (1.0 / (modalities as f64 + delta_h)).sqrt()
}

/// Corpus document embeddings laid out per modality, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEmbeddings {
    pub per_modality: Vec<Vec<f64>>,
    pub dims: Vec<usize>,
    pub n_docs: usize,
}

impl CorpusEmbeddings {
    pub fn from_documents(documents: &[MultimodalVector]) -> Result<Self> {
        let first = documents
            .first()
            .ok_or_else(|| RdError::Data("empty corpus".into()))?;
        let dims: Vec<usize> = first.parts.iter().map(Vec::len).collect();
        let n_docs = documents.len();
        let mut per_modality: Vec<Vec<f64>> =
            dims.iter().map(|&d| Vec::with_capacity(d * n_docs)).collect();
        for doc in documents {
            if doc.parts.len() != dims.len() {
                return Err(RdError::Data("inconsistent modality count in corpus".into()));
            }
            for (m, part) in doc.parts.iter().enumerate() {
                if part.len() != dims[m] {
                    return Err(RdError::Data("inconsistent dimensionality in corpus".into()));
                }
                per_modality[m].extend_from_slice(part);
            }
        }
        Ok(Self { per_modality, dims, n_docs })
    }

    fn doc_part(&self, modality: usize, doc: usize) -> &[f64] {
        let d = self.dims[modality];
        &self.per_modality[modality][doc * d..(doc + 1) * d]
    }
}

/// How the document-side temperature is chosen. The per-modality
/// decomposition sums `<C_m, E_m>/tau_m`; the dominant-modality variant
/// divides the whole document score by the temperature of its
/// largest-norm modality. They coincide when a document has a single
/// populated modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoringMode {
    PerModality,
    DominantModality,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Temperature-scaled scores for every document.
pub fn score_documents(
    query_parts: &[Vec<f64>],
    corpus: &CorpusEmbeddings,
    taus: &TemperatureVector,
    mode: ScoringMode,
) -> Result<Vec<f64>> {
    if query_parts.len() != corpus.dims.len() || taus.taus.len() != corpus.dims.len() {
        return Err(RdError::Data("modality count mismatch".into()));
    }
    for (m, part) in query_parts.iter().enumerate() {
        if part.len() != corpus.dims[m] {
            return Err(RdError::Data(format!(
                "dimension mismatch in modality {m}: query {} vs corpus {}",
                part.len(),
                corpus.dims[m]
            )));
        }
    }
    let n = corpus.n_docs;
    let mut scores = vec![0.0; n];
    match mode {
        ScoringMode::PerModality => {
            for (m, part) in query_parts.iter().enumerate() {
                let inv_tau = 1.0 / taus.taus[m];
                for (k, s) in scores.iter_mut().enumerate() {
                    *s += dot(part, corpus.doc_part(m, k)) * inv_tau;
                }
            }
        }
        ScoringMode::DominantModality => {
            for (k, s) in scores.iter_mut().enumerate() {
                let dominant = (0..corpus.dims.len())
                    .max_by(|&a, &b| {
                        let na = dot(corpus.doc_part(a, k), corpus.doc_part(a, k));
                        let nb = dot(corpus.doc_part(b, k), corpus.doc_part(b, k));
                        na.partial_cmp(&nb).unwrap()
                    })
                    .unwrap();
                let inv_tau = 1.0 / taus.taus[dominant];
                for (m, part) in query_parts.iter().enumerate() {
                    *s += dot(part, corpus.doc_part(m, k)) * inv_tau;
                }
            }
        }
    }
    Ok(scores)
}

/// 1-based rank of the relevant document under descending score with
/// ascending-index tie-break. Equivalent to a full argsort but O(N).
pub fn rank_of_relevant(scores: &[f64], relevant: usize) -> usize {
    let sr = scores[relevant];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > sr || (s == sr && j < relevant))
        .count()
}

/// Scores plus the full ranking for one query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredRanking {
    pub scores: Vec<f64>,
    pub result: RankingResult,
}

/// Rank the whole corpus for one (already encoded or raw) query.
pub fn score_and_rank(
    query_parts: &[Vec<f64>],
    corpus: &CorpusEmbeddings,
    taus: &TemperatureVector,
    relevant: usize,
    mode: ScoringMode,
) -> Result<ScoredRanking> {
    let scores = score_documents(query_parts, corpus, taus, mode)?;
    let mut permutation: Vec<usize> = (0..scores.len()).collect();
    permutation.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let result = RankingResult::new(permutation, relevant)?;
    debug_assert_eq!(result.relevant_rank, rank_of_relevant(&scores, relevant));
    Ok(ScoredRanking { scores, result })
}

/// Evaluate a batch of queries through the stochastic encoder. Each query
/// gets a fresh per-query substream, so results are deterministic in the
/// seed and independent of evaluation order.
pub fn evaluate(
    queries: &[MultimodalVector],
    relevant: &[usize],
    partitions: &[CellPartition],
    corpus: &CorpusEmbeddings,
    taus: &TemperatureVector,
    mode: ScoringMode,
    seed: u64,
) -> Result<(Metrics, Vec<usize>)> {
    if queries.len() != relevant.len() {
        return Err(RdError::Data("queries and relevance lengths differ".into()));
    }
    let ranks: Result<Vec<usize>> = queries
        .par_iter()
        .zip(relevant.par_iter())
        .enumerate()
        .map(|(qi, (q, &rel))| {
            let mut r = rng::stream(seed, "encode", qi as u64);
            let code = encode(q, partitions, &mut r)?;
            let scores = score_documents(&code.vector, corpus, taus, mode)?;
            Ok(rank_of_relevant(&scores, rel))
        })
        .collect();
    let ranks = ranks?;
    Ok((metrics_from_ranks(&ranks)?, ranks))
}

/// Evaluate raw (unquantized) queries; the naive baseline path.
pub fn evaluate_raw(
    queries: &[MultimodalVector],
    relevant: &[usize],
    corpus: &CorpusEmbeddings,
    taus: &TemperatureVector,
    mode: ScoringMode,
) -> Result<(Metrics, Vec<usize>)> {
    if queries.len() != relevant.len() {
        return Err(RdError::Data("queries and relevance lengths differ".into()));
    }
    let ranks: Result<Vec<usize>> = queries
        .par_iter()
        .zip(relevant.par_iter())
        .map(|(q, &rel)| {
            let scores = score_documents(&q.parts, corpus, taus, mode)?;
            Ok(rank_of_relevant(&scores, rel))
        })
        .collect();
    let ranks = ranks?;
    Ok((metrics_from_ranks(&ranks)?, ranks))
}

pub fn metrics_from_ranks(ranks: &[usize]) -> Result<Metrics> {
    if ranks.is_empty() {
        return Err(RdError::InvalidInput("no results".into()));
    }
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let recall_at_1 = ranks.iter().filter(|&&r| r == 1).count() as f64 / n;
    Ok(Metrics { mrr, recall_at_1, mean_distortion: 1.0 - mrr })
}

/// Precomputed per-query, per-modality inner products against every
/// document, so temperature refinement re-ranks without re-encoding.
#[derive(Debug, Clone)]
pub struct ScoreBatch {
    /// `[query][modality][doc]`
    pub dots: Vec<Vec<Vec<f64>>>,
    pub relevant: Vec<usize>,
}

impl ScoreBatch {
    pub fn from_encoded(
        encoded_parts: &[Vec<Vec<f64>>],
        relevant: &[usize],
        corpus: &CorpusEmbeddings,
    ) -> Result<Self> {
        if encoded_parts.len() != relevant.len() {
            return Err(RdError::Data("batch size mismatch".into()));
        }
        let dots = encoded_parts
            .par_iter()
            .map(|parts| {
                (0..corpus.dims.len())
                    .map(|m| {
                        (0..corpus.n_docs).map(|k| dot(&parts[m], corpus.doc_part(m, k))).collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { dots, relevant: relevant.to_vec() })
    }

    /// 1-based relevant-document ranks for every query in the batch.
    pub fn ranks(&self, taus: &[f64]) -> Vec<usize> {
        let inv: Vec<f64> = taus.iter().map(|t| 1.0 / t).collect();
        self.dots
            .par_iter()
            .zip(self.relevant.par_iter())
            .map(|(per_mod, &rel)| {
                let n = per_mod[0].len();
                let score = |k: usize| -> f64 {
                    per_mod.iter().zip(&inv).map(|(d, &it)| d[k] * it).sum()
                };
                let sr = score(rel);
                1 + (0..n)
                    .filter(|&k| {
                        let s = score(k);
                        s > sr || (s == sr && k < rel)
                    })
                    .count()
            })
            .collect()
    }

    pub fn mean_rr(&self, taus: &[f64]) -> f64 {
        let ranks = self.ranks(taus);
        ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaReport {
    pub iterations: usize,
    pub initial_rr: f64,
    pub best_rr: f64,
    /// L2 distance of the returned taus to the closed-form fixed point,
    /// when reference entropies were supplied.
    pub distance_to_fixed_point: Option<f64>,
    /// The rate term of the dual objective does not depend on tau for a
    /// fixed encoder; the loop therefore descends the retrieval term only.
    pub rate_term_constant: bool,
}

/// Multiplicative temperature refinement by central finite differences on
/// the batch objective `-lambda * mean RR`. Returns the best iterate seen,
/// so the result never ranks worse than the input on the batch.
pub fn ba_refine(
    initial: &TemperatureVector,
    lambda: f64,
    batch: &ScoreBatch,
    step_cap: f64,
    iterations: usize,
    reference_entropies: Option<&[f64]>,
) -> Result<(TemperatureVector, BaReport)> {
    if lambda <= 0.0 {
        return Err(RdError::InvalidInput("lambda must be positive".into()));
    }
    if batch.dots.is_empty() {
        return Err(RdError::InvalidInput("empty refinement batch".into()));
    }
    let m = initial.taus.len();
    let mut taus = initial.taus.clone();
    let initial_rr = batch.mean_rr(&taus);
    let mut best = (taus.clone(), initial_rr);

    for _ in 0..iterations {
        let mut grad = vec![0.0; m];
        for j in 0..m {
            let mut span = 1e-2 * taus[j];
            let mut ok = false;
            for _ in 0..5 {
                let mut up = taus.clone();
                up[j] += span;
                let mut down = taus.clone();
                down[j] = (down[j] - span).max(span * 1e-6);
                let g = (-lambda * batch.mean_rr(&up) + lambda * batch.mean_rr(&down)) / (2.0 * span);
                if g.is_finite() {
                    grad[j] = g;
                    ok = true;
                    break;
                }
                span *= 0.5;
            }
            if !ok {
                return Err(RdError::Internal(format!(
                    "non-finite temperature gradient for modality {j} after 5 span halvings"
                )));
            }
        }
        for j in 0..m {
            let step = (-grad[j]).clamp(-step_cap, step_cap);
            taus[j] *= step.exp();
        }
        let rr = batch.mean_rr(&taus);
        if rr > best.1 {
            best = (taus.clone(), rr);
        }
    }

    let distance_to_fixed_point = reference_entropies.map(|h| {
        let fp = adaptive_temperatures(h).expect("reference entropies");
        best.0
            .iter()
            .zip(&fp.taus)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    });

    let mut out = TemperatureVector::new(best.0, TauOrigin::BaRefined)?;
    out.lambda = Some(lambda);
    let report = BaReport {
        iterations,
        initial_rr,
        best_rr: best.1,
        distance_to_fixed_point,
        rate_term_constant: true,
    };
    Ok((out, report))
}
