//! Data model for multimodal corpora plus the ranking distortion and
//! retrieval metrics everything else consumes.
//!
//! Ranks are 1-based throughout; reciprocal-rank distortion is
//! `1 - 1/rank`, so mean distortion and MRR always sum to 1.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, RdError, Result};

/// A single modality: a label and the dimensionality of its vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub name: String,
    pub dim: usize,
}

impl ModalitySpec {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(RdError::InvalidInput("modality dim must be >= 1".into()));
        }
        Ok(Self { name: name.into(), dim })
    }
}

/// One object (query or document) with one real vector per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalVector {
    pub parts: Vec<Vec<f64>>,
}

impl MultimodalVector {
    pub fn new(parts: Vec<Vec<f64>>) -> Result<Self> {
        if parts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RdError::Data("non-finite entry in multimodal vector".into()));
        }
        Ok(Self { parts })
    }

    pub fn matches(&self, specs: &[ModalitySpec]) -> bool {
        self.parts.len() == specs.len()
            && self.parts.iter().zip(specs).all(|(p, s)| p.len() == s.dim)
    }
}

/// Minimum corpus size. The success-probability bound has an `N - 3`
/// denominator, so anything smaller is rejected up front.
pub const MIN_CORPUS: usize = 4;

/// A fixed, public document collection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub specs: Vec<ModalitySpec>,
    pub documents: Vec<MultimodalVector>,
}

impl Corpus {
    pub fn new(specs: Vec<ModalitySpec>, documents: Vec<MultimodalVector>) -> Result<Self> {
        if documents.len() < MIN_CORPUS {
            return Err(RdError::InvalidInput(format!(
                "corpus needs at least {MIN_CORPUS} documents, got {}",
                documents.len()
            )));
        }
        let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != specs.len() {
            return Err(RdError::InvalidInput("modality names must be unique".into()));
        }
        if let Some(i) = documents.iter().position(|d| !d.matches(&specs)) {
            return Err(RdError::Data(format!("document {i} does not match modality specs")));
        }
        Ok(Self { specs, documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// Queries with exactly one relevant document each, and a train/test split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalDataset {
    pub queries: Vec<MultimodalVector>,
    pub relevant_index: Vec<usize>,
    pub split: Vec<Split>,
    pub seed: u64,
}

impl RetrievalDataset {
    pub fn new(
        queries: Vec<MultimodalVector>,
        relevant_index: Vec<usize>,
        corpus_len: usize,
        seed: u64,
    ) -> Result<Self> {
        if queries.len() != relevant_index.len() {
            return Err(RdError::Data("queries and relevance lengths differ".into()));
        }
        if let Some(&bad) = relevant_index.iter().find(|&&i| i >= corpus_len) {
            return Err(RdError::Data(format!(
                "relevant index {bad} out of range for corpus of {corpus_len}"
            )));
        }
        let n = queries.len();
        Ok(Self { queries, relevant_index, split: vec![Split::Train; n], seed })
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.queries.len()).filter(|&i| self.split[i] == which).collect()
    }
}

/// Assign a deterministic train/test split. `|test| = round(fraction * n)`,
/// which must leave both sides non-empty.
pub fn split_dataset(dataset: &mut RetrievalDataset, test_fraction: f64, seed: u64) -> Result<()> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(RdError::Config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.queries.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(RdError::Config(format!(
            "test_fraction {test_fraction} leaves an empty split for n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, "split", 0);
    order.shuffle(&mut rng);
    dataset.split = vec![Split::Train; n];
    for &i in order.iter().take(n_test) {
        dataset.split[i] = Split::Test;
    }
    dataset.seed = seed;
    Ok(())
}

/// A full ranking of the corpus for one query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingResult {
    /// Document indices, best first.
    pub permutation: Vec<usize>,
    /// 1-based position of the relevant document.
    pub relevant_rank: usize,
}

impl RankingResult {
    /// Validates that `permutation` is a bijection on `{0, .., N-1}` and
    /// locates the relevant document in it.
    pub fn new(permutation: Vec<usize>, relevant_index: usize) -> Result<Self> {
        let n = permutation.len();
        let mut seen = vec![false; n];
        for &p in &permutation {
            if p >= n || seen[p] {
                return Err(RdError::Internal("permutation is not a bijection".into()));
            }
            seen[p] = true;
        }
        let pos = permutation
            .iter()
            .position(|&p| p == relevant_index)
            .ok_or_else(|| RdError::Internal("relevant document missing from permutation".into()))?;
        Ok(Self { permutation, relevant_rank: pos + 1 })
    }
}

/// Reciprocal-rank distortion `1 - 1/rank`, in `[0, 1)`.
pub fn reciprocal_rank_distortion(result: &RankingResult) -> f64 {
    1.0 - 1.0 / result.relevant_rank as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    pub recall_at_1: f64,
    pub mean_distortion: f64,
}

/// MRR, Recall@1, and mean distortion over a batch of rankings.
/// `mean_distortion = 1 - mrr` holds as an exact identity.
pub fn aggregate_metrics(results: &[RankingResult]) -> Result<Metrics> {
    if results.is_empty() {
        return Err(RdError::InvalidInput("no results".into()));
    }
    let n = results.len() as f64;
    let mrr = results.iter().map(|r| 1.0 / r.relevant_rank as f64).sum::<f64>() / n;
    let recall_at_1 = results.iter().filter(|r| r.relevant_rank == 1).count() as f64 / n;
    Ok(Metrics { mrr, recall_at_1, mean_distortion: 1.0 - mrr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank_only(rank: usize, n: usize) -> RankingResult {
        // permutation with the relevant doc (index 0) at position `rank`
        let mut permutation: Vec<usize> = (1..n).collect();
        permutation.insert(rank - 1, 0);
        RankingResult::new(permutation, 0).unwrap()
    }

    #[test]
    fn distortion_examples() {
        assert_eq!(reciprocal_rank_distortion(&rank_only(1, 5)), 0.0);
        assert_eq!(reciprocal_rank_distortion(&rank_only(4, 5)), 0.75);
        let worst = rank_only(1000, 1000);
        assert!((reciprocal_rank_distortion(&worst) - 0.999).abs() < 1e-12);
    }

    #[test]
    fn distortion_monotone_in_rank() {
        let mut last = -1.0;
        for rank in 1..=50 {
            let d = reciprocal_rank_distortion(&rank_only(rank, 50));
            assert!(d >= last);
            last = d;
        }
    }

    #[test]
    fn aggregate_examples() {
        let m = aggregate_metrics(&[rank_only(1, 4), rank_only(1, 4)]).unwrap();
        assert_eq!(m.mrr, 1.0);
        assert_eq!(m.recall_at_1, 1.0);
        assert_eq!(m.mean_distortion, 0.0);

        let m = aggregate_metrics(&[rank_only(1, 4), rank_only(2, 4), rank_only(4, 4)]).unwrap();
        let expected = (1.0 + 0.5 + 0.25) / 3.0;
        assert!((m.mrr - expected).abs() < 1e-15);
        assert!((m.mean_distortion + m.mrr - 1.0).abs() <= 1e-12);

        let m = aggregate_metrics(&[rank_only(2, 4)]).unwrap();
        assert_eq!(m.recall_at_1, 0.0);
        assert_eq!(m.mrr, 0.5);
    }

    #[test]
    fn aggregate_empty_is_error() {
        assert!(aggregate_metrics(&[]).is_err());
    }

    #[test]
    fn aggregate_matches_bruteforce_from_permutations() {
        // Oracle: recompute ranks by scanning raw permutations.
        let mut rng = rng::stream(11, "perm", 0);
        let n = 10usize;
        let mut results = Vec::new();
        let mut oracle_rr = Vec::new();
        for q in 0..200 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let relevant = q % n;
            let rank = perm.iter().position(|&p| p == relevant).unwrap() + 1;
            oracle_rr.push(1.0 / rank as f64);
            results.push(RankingResult::new(perm, relevant).unwrap());
        }
        let m = aggregate_metrics(&results).unwrap();
        let oracle_mrr = oracle_rr.iter().sum::<f64>() / oracle_rr.len() as f64;
        assert!((m.mrr - oracle_mrr).abs() < 1e-15);
    }

    fn toy_dataset(n: usize) -> RetrievalDataset {
        let queries = (0..n)
            .map(|i| MultimodalVector::new(vec![vec![i as f64]]).unwrap())
            .collect();
        RetrievalDataset::new(queries, vec![0; n], 4, 0).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut d = toy_dataset(100);
        split_dataset(&mut d, 0.15, 42).unwrap();
        assert_eq!(d.indices(Split::Test).len(), 15);
        assert_eq!(d.indices(Split::Train).len(), 85);

        let mut d2 = toy_dataset(100);
        split_dataset(&mut d2, 0.15, 42).unwrap();
        assert_eq!(d.split, d2.split);

        let mut d3 = toy_dataset(10);
        split_dataset(&mut d3, 0.5, 7).unwrap();
        let mut d4 = toy_dataset(10);
        split_dataset(&mut d4, 0.5, 7).unwrap();
        assert_eq!(d3.split, d4.split);
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let mut d = toy_dataset(10);
        assert!(split_dataset(&mut d, 0.999, 1).is_err()); // rounds to 10 = n
        assert!(split_dataset(&mut d, 0.0, 1).is_err());
        assert!(split_dataset(&mut d, 1.0, 1).is_err());
    }

    #[test]
    fn ranking_result_validation() {
        assert!(RankingResult::new(vec![0, 0, 1], 0).is_err());
        assert!(RankingResult::new(vec![0, 3, 1], 0).is_err());
        let r = RankingResult::new(vec![2, 0, 1], 0).unwrap();
        assert_eq!(r.relevant_rank, 2);
    }

    #[test]
    fn corpus_validation() {
        let spec = vec![ModalitySpec::new("a", 1).unwrap()];
        let docs: Vec<MultimodalVector> =
            (0..3).map(|i| MultimodalVector::new(vec![vec![i as f64]]).unwrap()).collect();
        assert!(Corpus::new(spec.clone(), docs).is_err()); // too small

        let dup = vec![ModalitySpec::new("a", 1).unwrap(), ModalitySpec::new("a", 2).unwrap()];
        let docs: Vec<MultimodalVector> = (0..4)
            .map(|i| MultimodalVector::new(vec![vec![i as f64], vec![0.0, 0.0]]).unwrap())
            .collect();
        assert!(Corpus::new(dup, docs).is_err());
    }
}
