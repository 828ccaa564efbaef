//! Controlled Gaussian mixture generator with analytic ground truth.
//!
//! A shared latent intent `Z ~ N(0, I)` is observed through per-modality
//! orthonormal maps plus isotropic noise: `X_m = A_m Z + eta_m`,
//! `eta_m ~ N(0, sigma^2 I)`. The redundancy knob is `rho = sigma^{-2}`.
//! Because each `A_m` has orthonormal columns, all covariances have known
//! eigenstructure, so per-modality entropy and pairwise mutual information
//! have closed forms that serve as oracles for the estimators.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::infotheory::LOG2_2PIE;
use crate::model::{Corpus, ModalitySpec, MultimodalVector, RetrievalDataset};
use crate::{rng, RdError, Result};

/// Mutual information is reported at most this large; the sigma -> 0 limit
/// is genuinely infinite and gets flagged instead of propagated. The
/// divergence is logarithmic in sigma, so the cap has to sit well below
/// what the widest representable exponent could produce.
pub const MI_CAP_BITS: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub latent_dim: usize,
    pub obs_dim: usize,
    pub modalities: usize,
    pub sigma: f64,
    /// Redundancy knob; linked to sigma by `rho * sigma^2 = 1`.
    pub rho: f64,
    pub n_pairs: usize,
    pub corpus_n: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl MixtureConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn from_rho(
        latent_dim: usize,
        obs_dim: usize,
        modalities: usize,
        rho: f64,
        n_pairs: usize,
        corpus_n: usize,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(RdError::Config(format!("rho must be positive, got {rho}")));
        }
        let cfg = Self {
            latent_dim,
            obs_dim,
            modalities,
            sigma: rho.powf(-0.5),
            rho,
            n_pairs,
            corpus_n,
            test_fraction,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_sigma(
        latent_dim: usize,
        obs_dim: usize,
        modalities: usize,
        sigma: f64,
        n_pairs: usize,
        corpus_n: usize,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(RdError::Config(format!("sigma must be positive, got {sigma}")));
        }
        let cfg = Self {
            latent_dim,
            obs_dim,
            modalities,
            sigma,
            rho: sigma.powi(-2),
            n_pairs,
            corpus_n,
            test_fraction,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The benchmark default setting: latent 32, observed 64, two modalities,
    /// rho = 0.4, corpus 1000, 100k pairs, 15% test.
    pub fn benchmark_default(seed: u64) -> Self {
        Self::from_rho(32, 64, 2, 0.4, 100_000, 1000, 0.15, seed).expect("default config")
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.obs_dim == 0 {
            return Err(RdError::Config("latent and observed dims must be >= 1".into()));
        }
        if self.obs_dim < self.latent_dim {
            return Err(RdError::Config(format!(
                "observed dim {} smaller than latent dim {}",
                self.obs_dim, self.latent_dim
            )));
        }
        if self.modalities == 0 {
            return Err(RdError::Config("need at least one modality".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(RdError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if (self.rho * self.sigma * self.sigma - 1.0).abs() > 1e-9 {
            return Err(RdError::Config(format!(
                "rho and sigma are linked by rho * sigma^2 = 1; got rho = {}, sigma = {}",
                self.rho, self.sigma
            )));
        }
        if self.corpus_n > self.n_pairs {
            return Err(RdError::Config(format!(
                "corpus_n {} exceeds n_pairs {}",
                self.corpus_n, self.n_pairs
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(RdError::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// The generating maps and their analytic information quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub maps: Vec<DMatrix<f64>>,
    pub entropies_bits: Vec<f64>,
    pub pairwise_mi_bits: f64,
    pub mi_capped: bool,
}

/// Q from the QR decomposition of a standard Gaussian draw, sign-normalized
/// so the R diagonal is positive. Columns are orthonormal and the result is
/// a deterministic function of the rng state.
pub fn orthonormal_matrix<R: Rng>(rows: usize, cols: usize, r: &mut R) -> Result<DMatrix<f64>> {
    if rows < cols {
        return Err(RdError::InvalidInput(format!(
            "orthonormal columns need rows >= cols, got {rows} x {cols}"
        )));
    }
    let g = DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..cols {
        if rr[(j, j)] < 0.0 {
            for i in 0..rows {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Closed-form per-modality differential entropy and pairwise mutual
/// information, in bits, from the known covariance eigenstructure.
///
/// Sigma_m = A_m A_m^T + sigma^2 I has eigenvalue 1 + sigma^2 with
/// multiplicity latent_dim and sigma^2 with multiplicity obs_dim - latent_dim.
/// The canonical correlations between any two modalities are 1/(1 + sigma^2)
/// with multiplicity latent_dim, independent of the particular maps.
pub fn analytic_entropies(config: &MixtureConfig) -> (Vec<f64>, f64, bool) {
    let d = config.obs_dim as f64;
    let dl = config.latent_dim as f64;
    let s2 = config.sigma * config.sigma;
    let h = 0.5 * (d * LOG2_2PIE + dl * (1.0 + s2).log2() + (d - dl) * s2.log2());
    let mi_raw = (dl / 2.0) * ((1.0 + s2) * (1.0 + s2) / (s2 * (s2 + 2.0))).log2();
    let capped = !mi_raw.is_finite() || mi_raw > MI_CAP_BITS;
    let mi = if capped { MI_CAP_BITS } else { mi_raw };
    (vec![h; config.modalities], mi, capped)
}

fn noisy_image<R: Rng>(
    maps: &[DMatrix<f64>],
    z: &nalgebra::DVector<f64>,
    sigma: f64,
    r: &mut R,
) -> Vec<Vec<f64>> {
    maps.iter()
        .map(|a| {
            let mean = a * z;
            mean.iter().map(|&v| v + sigma * r.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect()
}

/// Draw the full synthetic benchmark: a fixed corpus of `corpus_n` documents
/// (one latent each) and `n_pairs` queries, each a re-noised image of a
/// uniformly chosen corpus latent, so exactly one relevant document exists
/// per query. Deterministic given the seed; matrices, latents, and noise use
/// separate substreams.
pub fn generate(config: &MixtureConfig) -> Result<(RetrievalDataset, Corpus, GroundTruth)> {
    config.validate()?;
    let seed = config.seed;

    let maps: Vec<DMatrix<f64>> = (0..config.modalities)
        .map(|m| {
            let mut r = rng::stream(seed, "matrix", m as u64);
            orthonormal_matrix(config.obs_dim, config.latent_dim, &mut r)
        })
        .collect::<Result<_>>()?;

    let mut latent_rng = rng::stream(seed, "corpus_latent", 0);
    let latents: Vec<nalgebra::DVector<f64>> = (0..config.corpus_n)
        .map(|_| {
            nalgebra::DVector::from_fn(config.latent_dim, |_, _| {
                latent_rng.sample::<f64, _>(StandardNormal)
            })
        })
        .collect();

    let documents: Vec<MultimodalVector> = latents
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let mut r = rng::stream(seed, "corpus_noise", k as u64);
            MultimodalVector::new(noisy_image(&maps, z, config.sigma, &mut r))
        })
        .collect::<Result<_>>()?;

    let specs: Vec<ModalitySpec> = (0..config.modalities)
        .map(|m| ModalitySpec::new(format!("modality_{m}"), config.obs_dim))
        .collect::<Result<_>>()?;
    let corpus = Corpus::new(specs, documents)?;

    let mut choice_rng = rng::stream(seed, "query_choice", 0);
    let relevant_index: Vec<usize> =
        (0..config.n_pairs).map(|_| choice_rng.gen_range(0..config.corpus_n)).collect();

    let queries: Vec<MultimodalVector> = relevant_index
        .iter()
        .enumerate()
        .map(|(q, &k)| {
            let mut r = rng::stream(seed, "query_noise", q as u64);
            MultimodalVector::new(noisy_image(&maps, &latents[k], config.sigma, &mut r))
        })
        .collect::<Result<_>>()?;

    let mut dataset = RetrievalDataset::new(queries, relevant_index, corpus.len(), seed)?;
    crate::model::split_dataset(&mut dataset, config.test_fraction, seed)?;

    let (entropies_bits, pairwise_mi_bits, mi_capped) = analytic_entropies(config);
    let truth = GroundTruth { maps, entropies_bits, pairwise_mi_bits, mi_capped };
    Ok((dataset, corpus, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{score_and_rank, CorpusEmbeddings, ScoringMode, TemperatureVector};
    use crate::infotheory::estimate_entropy_gaussian;

    fn small_config(sigma: f64, seed: u64) -> MixtureConfig {
        MixtureConfig::from_sigma(4, 8, 2, sigma, 64, 16, 0.25, seed).unwrap()
    }

    #[test]
    fn rho_sigma_link_is_enforced() {
        let c = MixtureConfig::from_rho(32, 64, 2, 0.4, 1000, 100, 0.15, 1).unwrap();
        assert!((c.sigma - 1.5811388300841898).abs() < 1e-12);
        let mut broken = c.clone();
        broken.rho = 0.5;
        assert!(broken.validate().is_err());
        assert!(MixtureConfig::from_sigma(8, 4, 2, 1.0, 100, 10, 0.2, 1).is_err()); // obs < latent
        assert!(MixtureConfig::from_rho(32, 64, 2, 0.4, 50, 100, 0.15, 1).is_err()); // corpus > pairs
    }

    #[test]
    fn orthonormal_columns() {
        let mut r = rng::stream(5, "matrix", 0);
        let q = orthonormal_matrix(64, 32, &mut r).unwrap();
        let gram = q.transpose() * &q;
        for i in 0..32 {
            for j in 0..32 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-10);
            }
            assert!((q.column(i).norm() - 1.0).abs() < 1e-12);
        }
        let mut r2 = rng::stream(5, "matrix", 0);
        assert_eq!(q, orthonormal_matrix(64, 32, &mut r2).unwrap());
        assert!(orthonormal_matrix(4, 8, &mut r).is_err());
    }

    #[test]
    fn analytic_values_at_default_setting() {
        let cfg = MixtureConfig::benchmark_default(1);
        let (h, mi, capped) = analytic_entropies(&cfg);
        assert!(!capped);
        assert_eq!(h.len(), 2);
        assert!((h[0] - 181.08264572268047).abs() < 1e-9);
        assert!((mi - 1.965707964568534).abs() < 1e-9);
    }

    #[test]
    fn mi_limits() {
        let (_, mi_weak, capped) = analytic_entropies(&small_config(100.0, 1));
        assert!(!capped);
        assert!(mi_weak < 1e-3);
        let (_, mi_cap, capped) = analytic_entropies(&small_config(1e-80, 1));
        assert!(capped);
        assert_eq!(mi_cap, MI_CAP_BITS);
    }

    #[test]
    fn same_seed_same_dataset() {
        let cfg = small_config(1.0, 9);
        let (d1, c1, _) = generate(&cfg).unwrap();
        let (d2, c2, _) = generate(&cfg).unwrap();
        assert_eq!(d1.queries, d2.queries);
        assert_eq!(d1.relevant_index, d2.relevant_index);
        assert_eq!(d1.split, d2.split);
        assert_eq!(c1.documents, c2.documents);
        let (d3, _, _) = generate(&small_config(1.0, 10)).unwrap();
        assert_ne!(d1.queries, d3.queries);
    }

    #[test]
    fn noiseless_limit_ranks_pair_first() {
        // latent norm^2 ~ chi^2_24 dominates cross terms, so inner-product
        // scoring puts the zero-noise image first
        let cfg = MixtureConfig::from_sigma(24, 32, 2, 1e-9, 64, 16, 0.25, 11).unwrap();
        let (data, corpus, _) = generate(&cfg).unwrap();
        let emb = CorpusEmbeddings::from_documents(&corpus.documents).unwrap();
        let taus = TemperatureVector::uniform(1.0, 2).unwrap();
        for q in 0..data.queries.len() {
            let r = score_and_rank(
                &data.queries[q].parts,
                &emb,
                &taus,
                data.relevant_index[q],
                ScoringMode::PerModality,
            )
            .unwrap();
            assert_eq!(r.result.relevant_rank, 1);
        }
    }

    #[test]
    fn sample_covariance_converges() {
        let cfg = MixtureConfig::from_sigma(4, 8, 1, 0.8, 40_000, 40_000, 0.5, 13).unwrap();
        let (data, _, truth) = generate(&cfg).unwrap();
        let n = data.queries.len();
        let d = cfg.obs_dim;
        let mut cov = DMatrix::zeros(d, d);
        let mut mean = nalgebra::DVector::zeros(d);
        for q in &data.queries {
            mean += nalgebra::DVector::from_row_slice(&q.parts[0]);
        }
        mean /= n as f64;
        for q in &data.queries {
            let x = nalgebra::DVector::from_row_slice(&q.parts[0]) - &mean;
            cov += &x * x.transpose();
        }
        cov /= (n - 1) as f64;
        let s2 = cfg.sigma * cfg.sigma;
        let target = &truth.maps[0] * truth.maps[0].transpose() + DMatrix::identity(d, d) * s2;
        let rel = (&cov - &target).norm() / target.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn gaussian_estimator_matches_analytic_entropy() {
        let cfg = MixtureConfig::from_sigma(4, 8, 1, 1.2, 50_000, 50_000, 0.5, 14).unwrap();
        let (data, _, truth) = generate(&cfg).unwrap();
        let samples: Vec<Vec<f64>> = data.queries.iter().map(|q| q.parts[0].clone()).collect();
        let est = estimate_entropy_gaussian(&samples).unwrap();
        let rel = (est.value_bits - truth.entropies_bits[0]).abs() / truth.entropies_bits[0].abs();
        assert!(rel < 0.02, "estimated {} vs analytic {}", est.value_bits, truth.entropies_bits[0]);
    }

    #[test]
    fn query_and_document_noise_are_independent() {
        // residuals (X - A Z-hat is unavailable; use X_query - Y_doc for
        // paired items, whose coordinates are differences of independent
        // noise draws) should show near-zero cross-correlation between the
        // query and document residual channels.
        let cfg = MixtureConfig::from_sigma(4, 8, 1, 1.0, 20_000, 100, 0.25, 15).unwrap();
        let (data, corpus, _) = generate(&cfg).unwrap();
        // correlate first coordinate of query noise proxy with second
        // coordinate: independence within the isotropic noise model
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (q, &k) in data.queries.iter().zip(&data.relevant_index) {
            xs.push(q.parts[0][0] - corpus.documents[k].parts[0][0]);
            ys.push(q.parts[0][1] - corpus.documents[k].parts[0][1]);
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 =
            xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0);
        let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / (n - 1.0);
        let vy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / (n - 1.0);
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.02, "residual cross-correlation {corr}");
    }
}
