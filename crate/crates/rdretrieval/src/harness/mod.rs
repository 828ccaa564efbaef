//! Experiment runner: rate sweeps over methods and trials, baselines,
//! bound overlays, and bit-exact result export.
//!
//! Determinism contract: every random draw is keyed off the trial seed via
//! labeled substreams, records carry no timestamps, and floats are written
//! with shortest-round-trip formatting, so identical configs produce
//! byte-identical CSV files.

pub mod config;
pub mod io;
pub mod pca;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Method, Mode};
pub use io::IngestPaths;

use crate::bounds::{generalization_bound, invert_rate_to_distortion, GeneralizationInputs};
use crate::decoder::{
    adaptive_temperatures, ba_refine, schedule_gamma, schedule_temperatures, CorpusEmbeddings,
    ScoreBatch, TemperatureVector,
};
use crate::infotheory::{
    cross_modal_info, estimate_entropy_binned, estimate_entropy_gaussian, EntropyMethod, MiMethod,
    ModalityProfile, DEFAULT_BINS_PER_DIM,
};
use crate::model::{split_dataset, MultimodalVector, RetrievalDataset};
use crate::quantizer::{allocate_bits, encode, fit_partition, CellPartition};
use crate::{rng, synth, RdError, Result};

/// One (method, rate, trial) measurement. Wall time is informational only
/// and covers the whole trial-rate block; it is excluded from serialized
/// output so reruns are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub rate: usize,
    pub trial: usize,
    pub seed: u64,
    pub mrr: f64,
    pub recall_at_1: f64,
    pub distortion: f64,
    pub bound_distortion: f64,
    pub gap: f64,
    pub entropies: Vec<f64>,
    pub kappa: f64,
    pub delta_h: f64,
    pub taus: Vec<f64>,
    pub gen_bound: f64,
    pub gen_pre_clamp: f64,
    pub gen_holds: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

// Equality ignores wall time, matching the serialized representation.
impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.rate == other.rate
            && self.trial == other.trial
            && self.seed == other.seed
            && self.mrr == other.mrr
            && self.recall_at_1 == other.recall_at_1
            && self.distortion == other.distortion
            && self.bound_distortion == other.bound_distortion
            && self.gap == other.gap
            && self.entropies == other.entropies
            && self.kappa == other.kappa
            && self.delta_h == other.delta_h
            && self.taus == other.taus
            && self.gen_bound == other.gen_bound
            && self.gen_pre_clamp == other.gen_pre_clamp
            && self.gen_holds == other.gen_holds
    }
}

impl RunRecord {
    fn validate(&self) -> Result<()> {
        let unit = [self.mrr, self.recall_at_1, self.distortion, self.bound_distortion];
        if unit.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RdError::Internal(format!(
                "metric outside [0, 1] in record {}/{}/{}",
                self.method, self.rate, self.trial
            )));
        }
        if (self.gap - (self.distortion - self.bound_distortion)).abs() > 1e-12 {
            return Err(RdError::Internal("gap != distortion - bound_distortion".into()));
        }
        Ok(())
    }
}

/// Per (method, rate) aggregate over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRateStat {
    pub method: String,
    pub rate: usize,
    pub trials: usize,
    pub mean_mrr: f64,
    /// Standard error over trials; absent (flagged) for a single trial.
    pub se_mrr: Option<f64>,
    pub mean_distortion: f64,
    pub mean_gap: f64,
    pub mean_bound_distortion: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub summary: Vec<MethodRateStat>,
    pub files: Vec<PathBuf>,
}

fn parts_of(items: &[MultimodalVector], idx: &[usize], modality: usize) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| items[i].parts[modality].clone()).collect()
}

fn truncate_parts(v: &MultimodalVector, k: usize) -> MultimodalVector {
    MultimodalVector { parts: v.parts.iter().map(|p| p[..k.min(p.len())].to_vec()).collect() }
}

/// Encode a set of queries, one labeled substream per query.
fn encode_queries(
    queries: &[&MultimodalVector],
    partitions: &[CellPartition],
    root: u64,
    label: &str,
) -> Result<Vec<Vec<Vec<f64>>>> {
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let mut r = rng::stream(root, label, i as u64);
            Ok(encode(q, partitions, &mut r)?.vector)
        })
        .collect()
}

const EVAL_CHUNK: usize = 2048;

/// Ranks of the relevant document for every query under each temperature
/// set, sharing the inner products across sets. Chunked to bound memory.
fn ranks_for_tau_sets(
    encoded: &[Vec<Vec<f64>>],
    relevant: &[usize],
    corpus: &CorpusEmbeddings,
    tau_sets: &[Vec<f64>],
) -> Result<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::with_capacity(encoded.len()); tau_sets.len()];
    for (chunk, rel_chunk) in encoded.chunks(EVAL_CHUNK).zip(relevant.chunks(EVAL_CHUNK)) {
        let batch = ScoreBatch::from_encoded(chunk, rel_chunk, corpus)?;
        for (t, taus) in tau_sets.iter().enumerate() {
            out[t].extend(batch.ranks(taus));
        }
    }
    Ok(out)
}

/// 5-fold cross-validation of a shared temperature on the train split.
/// Maximizes fold-mean MRR; exact ties go to the smaller temperature. The
/// selected value is always a grid member.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate_tau(
    train_queries: &[&MultimodalVector],
    train_relevant: &[usize],
    partitions: &[CellPartition],
    corpus: &CorpusEmbeddings,
    grid: &[f64],
    folds: usize,
    subsample_per_fold: usize,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(RdError::InvalidInput("empty temperature grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let m = corpus.dims.len();
    let n = train_queries.len();
    let folds = folds.clamp(2, n.max(2));
    let mut fold_mean = vec![0.0; grid.len()];
    for f in 0..folds {
        let fold_idx: Vec<usize> =
            (0..n).filter(|i| i % folds == f).take(subsample_per_fold).collect();
        if fold_idx.is_empty() {
            continue;
        }
        let fold_queries: Vec<&MultimodalVector> =
            fold_idx.iter().map(|&i| train_queries[i]).collect();
        let fold_rel: Vec<usize> = fold_idx.iter().map(|&i| train_relevant[i]).collect();
        let encoded = encode_queries(&fold_queries, partitions, seed, &format!("encode_cv{f}"))?;
        let tau_sets: Vec<Vec<f64>> = grid.iter().map(|&t| vec![t; m]).collect();
        let ranks = ranks_for_tau_sets(&encoded, &fold_rel, corpus, &tau_sets)?;
        for (g, r) in ranks.iter().enumerate() {
            fold_mean[g] +=
                r.iter().map(|&x| 1.0 / x as f64).sum::<f64>() / r.len() as f64 / folds as f64;
        }
    }
    let mut best = 0;
    for g in 1..grid.len() {
        if fold_mean[g] > fold_mean[best] {
            best = g;
        }
    }
    Ok(grid[best])
}

struct TrialInputs<'a> {
    dataset: &'a RetrievalDataset,
    corpus_docs: &'a [MultimodalVector],
    trial: usize,
    seed: u64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn entropy_profile(
    train_parts: &[Vec<Vec<f64>>],
    method: EntropyMethod,
) -> Result<ModalityProfile> {
    let (entropies, cross) = match method {
        EntropyMethod::GaussianAnalytic => {
            let h: Vec<f64> = train_parts
                .iter()
                .map(|p| estimate_entropy_gaussian(p).map(|e| e.value_bits))
                .collect::<Result<_>>()?;
            let cross = if train_parts.len() > 1 {
                cross_modal_info(train_parts, MiMethod::Gaussian)?
            } else {
                0.0
            };
            (h, cross)
        }
        EntropyMethod::BinnedPlugin => {
            let h: Vec<f64> = train_parts
                .iter()
                .map(|p| estimate_entropy_binned(p, DEFAULT_BINS_PER_DIM).map(|e| e.value_bits))
                .collect::<Result<_>>()?;
            let cross = if train_parts.len() > 1 {
                cross_modal_info(train_parts, MiMethod::Binned { bins_per_dim: DEFAULT_BINS_PER_DIM })?
            } else {
                0.0
            };
            (h, cross)
        }
    };
    ModalityProfile::from_entropies(entropies, cross, method)
}

fn run_trial(cfg: &ExperimentConfig, inputs: &TrialInputs) -> Result<Vec<RunRecord>> {
    let dataset = inputs.dataset;
    let corpus_docs = inputs.corpus_docs;
    let seed = inputs.seed;
    let m_count = corpus_docs[0].parts.len();
    let obs_dims: Vec<usize> = corpus_docs[0].parts.iter().map(Vec::len).collect();

    let train_idx = dataset.indices(crate::model::Split::Train);
    let test_idx = dataset.indices(crate::model::Split::Test);
    let gen_idx: Vec<usize> =
        train_idx.iter().copied().take(cfg.gen_bound_subsample.max(1)).collect();

    let test_queries: Vec<&MultimodalVector> = test_idx.iter().map(|&i| &dataset.queries[i]).collect();
    let test_rel: Vec<usize> = test_idx.iter().map(|&i| dataset.relevant_index[i]).collect();
    let gen_queries: Vec<&MultimodalVector> = gen_idx.iter().map(|&i| &dataset.queries[i]).collect();
    let gen_rel: Vec<usize> = gen_idx.iter().map(|&i| dataset.relevant_index[i]).collect();
    let train_queries: Vec<&MultimodalVector> =
        train_idx.iter().map(|&i| &dataset.queries[i]).collect();
    let train_rel: Vec<usize> = train_idx.iter().map(|&i| dataset.relevant_index[i]).collect();

    let quantize_raw = cfg.mode == Mode::Synth;
    let needs_quant = cfg.methods.iter().any(|&m| m != Method::NaiveGlobalTau);
    let needs_pca = cfg.methods.contains(&Method::NaiveGlobalTau) || !quantize_raw;

    // Full-dimension training matrices per modality.
    let train_parts: Vec<Vec<Vec<f64>>> =
        (0..m_count).map(|m| parts_of(&dataset.queries, &train_idx, m)).collect();

    // PCA models fit once per trial at the widest width, truncated per rate.
    let k_max = cfg
        .rates
        .iter()
        .map(|&r| (r / cfg.bits_per_component).max(1))
        .max()
        .unwrap()
        .min(*obs_dims.iter().min().unwrap());
    let pca_models: Option<Vec<pca::PcaModel>> = if needs_pca {
        Some(
            (0..m_count)
                .map(|m| pca::fit_pca(&train_parts[m], k_max.min(obs_dims[m])))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let project_all = |items: &[&MultimodalVector]| -> Vec<MultimodalVector> {
        let models = pca_models.as_ref().expect("PCA models");
        items
            .par_iter()
            .map(|v| MultimodalVector {
                parts: (0..m_count).map(|m| models[m].project(&v.parts[m], k_max)).collect(),
            })
            .collect()
    };
    let (proj_corpus, proj_test, proj_gen, proj_train) = if needs_pca {
        let doc_refs: Vec<&MultimodalVector> = corpus_docs.iter().collect();
        (
            project_all(&doc_refs),
            project_all(&test_queries),
            project_all(&gen_queries),
            if quantize_raw { Vec::new() } else { project_all(&train_queries) },
        )
    } else {
        (Vec::new(), Vec::new(), Vec::new(), Vec::new())
    };
    if let Some(models) = &pca_models {
        for (m, model) in models.iter().enumerate() {
            if model.zero_variance > 0 {
                eprintln!(
                    "warning: modality {m}: {} of {} PCA components have zero variance (rank-deficient data)",
                    model.zero_variance,
                    model.components.ncols()
                );
            }
        }
    }

    // Entropy profile for the quantized pipeline; rate-independent in synth
    // mode (full-dimension data), rate-dependent after PCA in ingest mode.
    let synth_profile = if needs_quant && quantize_raw {
        Some(entropy_profile(&train_parts, EntropyMethod::GaussianAnalytic)?)
    } else {
        None
    };

    let corpus_emb_raw = CorpusEmbeddings::from_documents(corpus_docs)?;

    let mut records = Vec::new();
    for &rate in &cfg.rates {
        let block_start = Instant::now();
        let rseed = rng::subseed(seed, "rate", rate as u64);
        let k_rate = (rate / cfg.bits_per_component).max(1).min(k_max);

        // ---- quantized pipeline shared state ----
        let mut quant: Option<(ModalityProfile, Vec<usize>, Vec<CellPartition>, CorpusEmbeddings)> =
            None;
        let mut quant_train: Vec<MultimodalVector> = Vec::new();
        if needs_quant {
            let parts_owned: Vec<Vec<Vec<f64>>>;
            let (profile, fit_data): (ModalityProfile, &[Vec<Vec<f64>>]) = if quantize_raw {
                (synth_profile.clone().unwrap(), &train_parts)
            } else {
                quant_train = proj_train.iter().map(|v| truncate_parts(v, k_rate)).collect();
                parts_owned = (0..m_count)
                    .map(|m| quant_train.iter().map(|v| v.parts[m].clone()).collect())
                    .collect();
                (entropy_profile(&parts_owned, EntropyMethod::BinnedPlugin)?, &parts_owned)
            };
            let allocation = allocate_bits(rate, &profile.entropies)?;
            let partitions: Vec<CellPartition> = (0..m_count)
                .into_par_iter()
                .map(|m| fit_partition(&fit_data[m], allocation.per_modality[m]))
                .collect::<Result<_>>()?;
            let emb = if quantize_raw {
                corpus_emb_raw.clone()
            } else {
                let docs: Vec<MultimodalVector> =
                    proj_corpus.iter().map(|v| truncate_parts(v, k_rate)).collect();
                CorpusEmbeddings::from_documents(&docs)?
            };
            quant = Some((profile, allocation.per_modality, partitions, emb));
        }

        // ---- temperatures per method ----
        let mut tau_by_method: Vec<(Method, TemperatureVector)> = Vec::new();
        for &method in &cfg.methods {
            if method == Method::NaiveGlobalTau {
                continue;
            }
            let (profile, _, partitions, emb) = quant.as_ref().unwrap();
            let taus = match method {
                Method::FixedTauCv => {
                    let q: Vec<&MultimodalVector> = if quantize_raw {
                        train_queries.clone()
                    } else {
                        quant_train.iter().collect()
                    };
                    let r = train_rel.as_slice();
                    let tau = cross_validate_tau(
                        &q,
                        r,
                        partitions,
                        emb,
                        &cfg.cv_grid,
                        cfg.cv_folds,
                        cfg.cv_subsample,
                        rseed,
                    )?;
                    TemperatureVector::uniform(tau, m_count)?
                }
                Method::AdaptiveTau => adaptive_temperatures(&profile.entropies)?,
                Method::ScheduleTau => {
                    let gamma = schedule_gamma(m_count, profile.imbalance);
                    schedule_temperatures(&profile.entropies, gamma, cfg.schedule_epsilon)?
                }
                Method::BaRefined => {
                    let take = cfg.ba_batch.min(train_queries.len()).max(1);
                    let batch_q: Vec<&MultimodalVector> = if quantize_raw {
                        train_queries.iter().take(take).copied().collect()
                    } else {
                        quant_train.iter().take(take).collect()
                    };
                    let batch_rel: Vec<usize> = train_rel.iter().take(take).copied().collect();
                    let encoded = encode_queries(&batch_q, partitions, rseed, "encode_ba")?;
                    let batch = ScoreBatch::from_encoded(&encoded, &batch_rel, emb)?;
                    let init = adaptive_temperatures(&profile.entropies)?;
                    let (taus, _report) = ba_refine(
                        &init,
                        cfg.ba_lambda,
                        &batch,
                        cfg.ba_step_cap,
                        cfg.ba_iterations,
                        Some(&profile.entropies),
                    )?;
                    taus
                }
                Method::NaiveGlobalTau => unreachable!(),
            };
            tau_by_method.push((method, taus));
        }

        // ---- shared evaluation passes ----
        let (test_ranks, gen_ranks) = if let Some((_, _, partitions, emb)) = &quant {
            let tau_sets: Vec<Vec<f64>> =
                tau_by_method.iter().map(|(_, t)| t.taus.clone()).collect();
            let enc_test = if quantize_raw {
                encode_queries(&test_queries, partitions, rseed, "encode_test")?
            } else {
                let trunc: Vec<MultimodalVector> =
                    proj_test.iter().map(|v| truncate_parts(v, k_rate)).collect();
                encode_queries(&trunc.iter().collect::<Vec<_>>(), partitions, rseed, "encode_test")?
            };
            let enc_gen = if quantize_raw {
                encode_queries(&gen_queries, partitions, rseed, "encode_gen")?
            } else {
                let trunc: Vec<MultimodalVector> =
                    proj_gen.iter().map(|v| truncate_parts(v, k_rate)).collect();
                encode_queries(&trunc.iter().collect::<Vec<_>>(), partitions, rseed, "encode_gen")?
            };
            (
                ranks_for_tau_sets(&enc_test, &test_rel, emb, &tau_sets)?,
                ranks_for_tau_sets(&enc_gen, &gen_rel, emb, &tau_sets)?,
            )
        } else {
            (Vec::new(), Vec::new())
        };

        // ---- naive baseline: PCA-projected raw embeddings, one global tau ----
        let naive_eval = if cfg.methods.contains(&Method::NaiveGlobalTau) {
            let docs: Vec<MultimodalVector> =
                proj_corpus.iter().map(|v| truncate_parts(v, k_rate)).collect();
            let emb = CorpusEmbeddings::from_documents(&docs)?;
            let taus = vec![cfg.naive_tau; m_count];
            let as_parts = |items: &[MultimodalVector]| -> Vec<Vec<Vec<f64>>> {
                items.iter().map(|v| v.parts.iter().map(|p| p[..k_rate.min(p.len())].to_vec()).collect()).collect()
            };
            let test_parts = as_parts(&proj_test);
            let gen_parts = as_parts(&proj_gen);
            let t = ranks_for_tau_sets(&test_parts, &test_rel, &emb, std::slice::from_ref(&taus))?;
            let g = ranks_for_tau_sets(&gen_parts, &gen_rel, &emb, std::slice::from_ref(&taus))?;
            Some((t.into_iter().next().unwrap(), g.into_iter().next().unwrap(), taus))
        } else {
            None
        };

        // ---- bound overlay (shared across methods at this rate) ----
        let (bound_kappa, bound_dh, bound_entropies) = match (&quant, &synth_profile) {
            (Some((p, _, _, _)), _) => (p.skew, p.imbalance, p.entropies.clone()),
            (None, Some(p)) => (p.skew, p.imbalance, p.entropies.clone()),
            (None, None) => {
                // naive-only sweep still reports the overlay from raw data
                let p = entropy_profile(&train_parts, EntropyMethod::GaussianAnalytic)?;
                (p.skew, p.imbalance, p.entropies.clone())
            }
        };
        let bound_distortion =
            invert_rate_to_distortion(rate as f64, corpus_docs.len(), bound_kappa, bound_dh)?;
        let gamma = schedule_gamma(m_count, bound_dh);

        let block_time = block_start.elapsed().as_secs_f64();
        let mut quant_slot = 0;
        for &method in &cfg.methods {
            let (ranks_test, ranks_gen, taus, log2_cells): (&[usize], &[usize], Vec<f64>, Vec<f64>) =
                if method == Method::NaiveGlobalTau {
                    let (t, g, taus) = naive_eval.as_ref().unwrap();
                    (t, g, taus.clone(), vec![rate as f64 / m_count as f64; m_count])
                } else {
                    let (_, per_modality, _, _) = quant.as_ref().unwrap();
                    let (_, tv) = &tau_by_method[quant_slot];
                    let r = (&test_ranks[quant_slot][..], &gen_ranks[quant_slot][..]);
                    quant_slot += 1;
                    (r.0, r.1, tv.taus.clone(), per_modality.iter().map(|&b| b as f64).collect())
                };
            let metrics = crate::decoder::metrics_from_ranks(ranks_test)?;
            let gen_metrics = crate::decoder::metrics_from_ranks(ranks_gen)?;
            let gb = generalization_bound(
                &GeneralizationInputs {
                    n: ranks_gen.len(),
                    log2_cells,
                    d_max: corpus_docs.len(),
                    delta: cfg.delta,
                    gamma,
                    epsilon: cfg.schedule_epsilon,
                },
                gen_metrics.mean_distortion,
            )?;
            let record = RunRecord {
                method: method.name().to_string(),
                rate,
                trial: inputs.trial,
                seed,
                mrr: metrics.mrr,
                recall_at_1: metrics.recall_at_1,
                distortion: metrics.mean_distortion,
                bound_distortion,
                gap: metrics.mean_distortion - bound_distortion,
                entropies: bound_entropies.clone(),
                kappa: bound_kappa,
                delta_h: bound_dh,
                taus,
                gen_bound: gb.bound,
                gen_pre_clamp: gb.pre_clamp,
                gen_holds: gb.bound >= metrics.mean_distortion,
                wall_time_s: block_time,
            };
            record.validate()?;
            records.push(record);
        }
    }
    Ok(records)
}

/// Run the configured sweep and return all records, trial-parallel.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    match cfg.mode {
        Mode::Synth => {
            let per_trial: Vec<Vec<RunRecord>> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut mix = cfg.mixture.clone();
                    mix.seed = cfg.seeds[trial];
                    let (dataset, corpus, _) = synth::generate(&mix)?;
                    run_trial(
                        cfg,
                        &TrialInputs {
                            dataset: &dataset,
                            corpus_docs: &corpus.documents,
                            trial,
                            seed: cfg.seeds[trial],
                        },
                    )
                })
                .collect::<Result<_>>()?;
            Ok(per_trial.into_iter().flatten().collect())
        }
        Mode::Ingest => {
            let paths = cfg.ingest.as_ref().expect("validated");
            let (queries, docs, relevance) = io::load_embeddings(paths)?;
            run_sweep_on_data(cfg, &queries, &docs, &relevance)
        }
    }
}

/// Ingest-style sweep over in-memory embeddings; the file-based path loads
/// and delegates here, which is what makes export/ingest round-trips exactly
/// comparable.
pub fn run_sweep_on_data(
    cfg: &ExperimentConfig,
    queries: &[MultimodalVector],
    docs: &[MultimodalVector],
    relevance: &[usize],
) -> Result<Vec<RunRecord>> {
    let per_trial: Vec<Vec<RunRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = cfg.seeds[trial];
            let mut dataset =
                RetrievalDataset::new(queries.to_vec(), relevance.to_vec(), docs.len(), seed)?;
            split_dataset(&mut dataset, cfg.mixture.test_fraction, seed)?;
            run_trial(cfg, &TrialInputs { dataset: &dataset, corpus_docs: docs, trial, seed })
        })
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

pub fn summarize(records: &[RunRecord]) -> Vec<MethodRateStat> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in records {
        let key = (r.method.clone(), r.rate);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|(method, rate)| {
            let mrrs: Vec<f64> = records
                .iter()
                .filter(|r| &r.method == method && r.rate == *rate)
                .map(|r| r.mrr)
                .collect();
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| &r.method == method && r.rate == *rate)
                .collect();
            let n = mrrs.len();
            let mean_mrr = mean(&mrrs);
            let se_mrr = if n > 1 {
                let var =
                    mrrs.iter().map(|x| (x - mean_mrr) * (x - mean_mrr)).sum::<f64>() / (n - 1) as f64;
                Some((var / n as f64).sqrt())
            } else {
                None
            };
            MethodRateStat {
                method: method.clone(),
                rate: *rate,
                trials: n,
                mean_mrr,
                se_mrr,
                mean_distortion: mean(&group.iter().map(|r| r.distortion).collect::<Vec<_>>()),
                mean_gap: mean(&group.iter().map(|r| r.gap).collect::<Vec<_>>()),
                mean_bound_distortion: mean(
                    &group.iter().map(|r| r.bound_distortion).collect::<Vec<_>>(),
                ),
            }
        })
        .collect()
}

fn join_f64(v: &[f64], sep: char) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(&sep.to_string())
}

pub const CSV_HEADER: &str = "method,rate,trial,seed,mrr,recall_at_1,distortion,bound_distortion,gap,entropies,kappa,delta_h,taus,gen_bound,gen_pre_clamp,gen_holds";

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.rate,
            r.trial,
            r.seed,
            r.mrr,
            r.recall_at_1,
            r.distortion,
            r.bound_distortion,
            r.gap,
            join_f64(&r.entropies, ';'),
            r.kappa,
            r.delta_h,
            join_f64(&r.taus, ';'),
            r.gen_bound,
            r.gen_pre_clamp,
            r.gen_holds
        ));
    }
    out
}

/// Write the record table (CSV + JSON mirror), the per-method summary, a
/// Table-1-shaped text table, and a gnuplot frontier file.
pub fn emit_report(records: &[RunRecord], out_dir: &Path) -> Result<SweepOutput> {
    if records.is_empty() {
        return Err(RdError::InvalidInput("no records to report".into()));
    }
    fs::create_dir_all(out_dir)?;
    let summary = summarize(records);
    let mut files = Vec::new();

    let csv_path = out_dir.join("records.csv");
    fs::write(&csv_path, records_csv(records))?;
    files.push(csv_path);

    let json_path = out_dir.join("records.json");
    fs::write(&json_path, serde_json::to_string_pretty(records)?)?;
    files.push(json_path);

    // summary.csv: one row per (method, rate); s.e. empty and flagged for a
    // single trial.
    let mut s = String::from("method,rate,trials,mean_mrr,se_mrr,mean_distortion,mean_gap,mean_bound_distortion,single_trial\n");
    for st in &summary {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            st.method,
            st.rate,
            st.trials,
            st.mean_mrr,
            st.se_mrr.map(|v| format!("{v}")).unwrap_or_default(),
            st.mean_distortion,
            st.mean_gap,
            st.mean_bound_distortion,
            st.se_mrr.is_none()
        ));
    }
    let summary_path = out_dir.join("summary.csv");
    fs::write(&summary_path, s)?;
    files.push(summary_path);

    // Table-1 shape: rows = methods + bound, columns = rates, cells = MRR.
    let mut rates: Vec<usize> = records.iter().map(|r| r.rate).collect();
    rates.sort_unstable();
    rates.dedup();
    let mut methods: Vec<String> = Vec::new();
    for r in records {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let cell = |method: &str, rate: usize| -> Option<&MethodRateStat> {
        summary.iter().find(|s| s.method == method && s.rate == rate)
    };
    let mut table = String::from("MRR by rate (mean over trials, +/- s.e. where available)\n");
    table.push_str(&format!("{:<18}", "method"));
    for &r in &rates {
        table.push_str(&format!("{:>16}", format!("R={r}")));
    }
    table.push('\n');
    for m in &methods {
        table.push_str(&format!("{m:<18}"));
        for &r in &rates {
            let st = cell(m, r).expect("summary cell");
            let txt = match st.se_mrr {
                Some(se) => format!("{:.4}+/-{:.4}", st.mean_mrr, se),
                None => format!("{:.4}", st.mean_mrr),
            };
            table.push_str(&format!("{txt:>16}"));
        }
        table.push('\n');
    }
    table.push_str(&format!("{:<18}", "bound (1-D*)"));
    for &r in &rates {
        let st = summary.iter().find(|s| s.rate == r).expect("rate present");
        table.push_str(&format!("{:>16}", format!("{:.4}", 1.0 - st.mean_bound_distortion)));
    }
    table.push('\n');
    let table_path = out_dir.join("table.txt");
    fs::write(&table_path, table)?;
    files.push(table_path);

    // gnuplot frontier: distortion vs rate, one column per method plus the
    // theoretical curve.
    let mut dat = String::from("# rate frontier_distortion");
    for m in &methods {
        dat.push(' ');
        dat.push_str(m);
    }
    dat.push('\n');
    for &r in &rates {
        let st = summary.iter().find(|s| s.rate == r).expect("rate present");
        dat.push_str(&format!("{r} {}", st.mean_bound_distortion));
        for m in &methods {
            dat.push_str(&format!(" {}", cell(m, r).expect("cell").mean_distortion));
        }
        dat.push('\n');
    }
    let dat_path = out_dir.join("frontier.dat");
    fs::write(&dat_path, dat)?;
    files.push(dat_path);

    Ok(SweepOutput { records: records.to_vec(), summary, files })
}

/// End-to-end entry point: run the sweep and write all report files.
pub fn run_and_report(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let records = run_sweep(cfg)?;
    emit_report(&records, &cfg.out_dir)
}
