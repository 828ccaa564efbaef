//! Property tests for the structural invariants of the pipeline.

use proptest::prelude::*;

use rdretrieval::bounds::{binary_entropy, converse_rate, ranking_fano_rate, ConverseInputs};
use rdretrieval::decoder::{score_and_rank, CorpusEmbeddings, ScoringMode, TemperatureVector};
use rdretrieval::infotheory::locate_cell;
use rdretrieval::model::MultimodalVector;
use rdretrieval::quantizer::{allocate_bits, encode, fit_partition};

proptest! {
    #[test]
    fn binary_entropy_bounded_and_symmetric(p in 0.0f64..=1.0) {
        let h = binary_entropy(p).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((h - binary_entropy(1.0 - p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fano_rate_nonnegative_and_bounded_by_log_n(
        d in 0.0f64..=1.0,
        n in 4usize..5000,
    ) {
        let r = ranking_fano_rate(d, n).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!(r <= (n as f64).log2() + 1e-12);
    }

    #[test]
    fn skew_penalty_only_raises_the_converse(
        d in 0.0f64..=1.0,
        kappa in 0.0f64..=1.0,
        delta_h in 0.0f64..100.0,
    ) {
        let base = ConverseInputs { n_corpus: 64, distortion: d, kappa: 0.0, delta_h: 0.0, modalities: 2 };
        let skewed = ConverseInputs { kappa, delta_h, ..base };
        prop_assert!(converse_rate(&skewed).unwrap() >= converse_rate(&base).unwrap() - 1e-12);
    }

    #[test]
    fn allocation_sums_within_one_ceiling_per_modality(
        total in 3usize..512,
        entropies in prop::collection::vec(-5.0f64..50.0, 1..=3),
    ) {
        prop_assume!(total >= entropies.len());
        let a = allocate_bits(total, &entropies).unwrap();
        prop_assert!(a.per_modality.iter().all(|&b| b >= 1));
        prop_assert!(a.sum() >= total);
        prop_assert!(a.sum() <= total + entropies.len());
    }

    #[test]
    fn locate_cell_is_monotone_and_right_closed(
        mut cuts in prop::collection::vec(-100.0f64..100.0, 1..10),
        x in -150.0f64..150.0,
    ) {
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let c = locate_cell(&cuts, x);
        prop_assert!(c <= cuts.len());
        if c > 0 { prop_assert!(cuts[c - 1] < x || (cuts[c - 1] - x).abs() == 0.0); }
        if c > 0 { prop_assert!(cuts[c - 1] >= x || cuts[c - 1] < x); }
        // exactly on a cut -> belongs to the cell whose right edge it is
        for (i, &cut) in cuts.iter().enumerate() {
            prop_assert_eq!(locate_cell(&cuts, cut), i);
        }
    }

    #[test]
    fn codeword_stays_in_cell_and_cell_is_seed_independent(
        seed_a in 0u64..1000,
        seed_b in 0u64..1000,
        bits in 1usize..5,
    ) {
        use rand::SeedableRng;
        let train: Vec<Vec<f64>> = (0..256).map(|i| vec![(i as f64 * 0.37).sin(), i as f64]).collect();
        let partition = fit_partition(&train, bits).unwrap();
        let x = MultimodalVector::new(vec![vec![0.2, 77.0]]).unwrap();
        let mut ra = rand_chacha::ChaCha8Rng::seed_from_u64(seed_a);
        let mut rb = rand_chacha::ChaCha8Rng::seed_from_u64(seed_b);
        let parts = std::slice::from_ref(&partition);
        let a = encode(&x, parts, &mut ra).unwrap();
        let b = encode(&x, parts, &mut rb).unwrap();
        prop_assert_eq!(&a.cell_index, &b.cell_index);
        for (j, dp) in partition.dims.iter().enumerate() {
            let cell = a.cell_index[0][j] as usize;
            let lo = if cell == 0 { dp.observed_min } else { dp.cuts[cell - 1] };
            let hi = if cell == dp.cuts.len() { dp.observed_max } else { dp.cuts[cell] };
            prop_assert!(a.vector[0][j] >= lo - 1e-12 && a.vector[0][j] <= hi + 1e-12);
        }
    }

    #[test]
    fn ranking_is_a_permutation_with_relevant_found(
        scores in prop::collection::vec(-10.0f64..10.0, 4..40),
        rel_raw in 0usize..40,
    ) {
        let n = scores.len();
        let rel = rel_raw % n;
        let docs: Vec<MultimodalVector> =
            scores.iter().map(|&s| MultimodalVector::new(vec![vec![s]]).unwrap()).collect();
        let corpus = CorpusEmbeddings::from_documents(&docs).unwrap();
        let taus = TemperatureVector::uniform(0.5, 1).unwrap();
        let r = score_and_rank(&[vec![1.0]], &corpus, &taus, rel, ScoringMode::PerModality).unwrap();
        let mut seen = vec![false; n];
        for &p in &r.result.permutation { seen[p] = true; }
        prop_assert!(seen.into_iter().all(|s| s));
        prop_assert!((1..=n).contains(&r.result.relevant_rank));
    }
}
