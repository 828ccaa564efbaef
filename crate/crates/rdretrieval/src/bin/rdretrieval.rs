//! Command-line front end.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 internal
//! invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rdretrieval::bounds::invert_rate_to_distortion;
use rdretrieval::harness::{self, io as hio, ExperimentConfig, Mode};
use rdretrieval::{synth, RdError};

#[derive(Parser)]
#[command(name = "rdretrieval", about = "Rate-distortion sweeps for multimodal retrieval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Config file (flat key = value lines, # comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print results as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured rate sweep and write report files.
    Sweep(Overrides),
    /// Evaluate the theoretical frontier at one rate.
    Bounds {
        /// Corpus size.
        #[arg(long = "N")]
        n: usize,
        /// Modality-skew coefficient.
        #[arg(long)]
        kappa: f64,
        /// Entropy imbalance in bits.
        #[arg(long = "deltaH")]
        delta_h: f64,
        /// Rate in bits per query.
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        json: bool,
    },
    /// Generate the synthetic benchmark and export it as matrix files.
    Gen(Overrides),
    /// Validate ingest files and print their shapes.
    Ingest(Overrides),
}

fn load_config(ov: &Overrides) -> rdretrieval::Result<ExperimentConfig> {
    let mut cfg = match &ov.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default_synth(17),
    };
    if let Some(seed) = ov.seed {
        cfg.mixture.seed = seed;
        cfg.derive_seeds(seed);
    }
    if let Some(trials) = ov.trials {
        cfg.trials = trials;
        let base = cfg.mixture.seed;
        cfg.derive_seeds(base);
    }
    if let Some(out) = &ov.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> rdretrieval::Result<()> {
    match cli.command {
        Command::Sweep(ov) => {
            let cfg = load_config(&ov)?;
            let out = harness::run_and_report(&cfg)?;
            if ov.json {
                println!("{}", serde_json::to_string_pretty(&out.summary)?);
            } else {
                for st in &out.summary {
                    println!(
                        "{:<18} R={:<5} mrr={:.4}{} distortion={:.4} gap={:.4}",
                        st.method,
                        st.rate,
                        st.mean_mrr,
                        st.se_mrr.map(|s| format!("+/-{s:.4}")).unwrap_or_default(),
                        st.mean_distortion,
                        st.mean_gap
                    );
                }
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
            }
            Ok(())
        }
        Command::Bounds { n, kappa, delta_h, rate, json } => {
            let d = invert_rate_to_distortion(rate, n, kappa, delta_h)?;
            if json {
                println!(
                    "{}",
                    serde_json::json!({ "rate": rate, "n": n, "kappa": kappa, "delta_h": delta_h, "frontier_distortion": d })
                );
            } else {
                println!("D*({rate} bits, N={n}, kappa={kappa}, deltaH={delta_h}) = {d}");
            }
            Ok(())
        }
        Command::Gen(ov) => {
            let cfg = load_config(&ov)?;
            let (dataset, corpus, truth) = synth::generate(&cfg.mixture)?;
            let paths = hio::export_dataset(&dataset, &corpus, &cfg.out_dir)?;
            println!(
                "exported {} queries x {} documents ({} modalities) to {}",
                dataset.queries.len(),
                corpus.len(),
                corpus.specs.len(),
                cfg.out_dir.display()
            );
            if ov.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "query_files": paths.query_files,
                        "doc_files": paths.doc_files,
                        "relevance_file": paths.relevance_file,
                        "analytic_entropies_bits": truth.entropies_bits,
                        "analytic_pairwise_mi_bits": truth.pairwise_mi_bits,
                    })
                );
            }
            Ok(())
        }
        Command::Ingest(ov) => {
            let cfg = load_config(&ov)?;
            if cfg.mode != Mode::Ingest || cfg.ingest.is_none() {
                return Err(RdError::Config(
                    "ingest needs mode = ingest with query_files, doc_files, relevance_file".into(),
                ));
            }
            let paths = cfg.ingest.as_ref().unwrap();
            let (queries, docs, relevance) = hio::load_embeddings(paths)?;
            let dims: Vec<usize> = queries[0].parts.iter().map(Vec::len).collect();
            if ov.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "queries": queries.len(),
                        "documents": docs.len(),
                        "relevance_pairs": relevance.len(),
                        "dims_per_modality": dims,
                    })
                );
            } else {
                println!(
                    "ok: {} queries, {} documents, {} relevance pairs, dims {:?}",
                    queries.len(),
                    docs.len(),
                    relevance.len(),
                    dims
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                RdError::Config(_) | RdError::InvalidInput(_) => 2,
                RdError::Data(_) | RdError::Io(_) | RdError::Serialize(_) => 3,
                RdError::Internal(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
