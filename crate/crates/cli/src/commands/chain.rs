//! Chain construction: one checkpoint chain per instance, built by descent
//! at the anchor and saved under `<out>/chains/`.

use rayon::prelude::*;

use fh_core::homotopy::{build_chain, ChainParams};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

use super::{anchor_for, chain_path, chains_dir, ensure_dir, load_instances, worker_pool};

pub fn run(config: &ExperimentConfig, workers: usize) -> CliResult<String> {
    let instances = load_instances(config)?;
    ensure_dir(&chains_dir(&config.output_dir))?;
    let params = ChainParams {
        lr: config.chain.lr,
        max_steps: config.chain.max_steps,
        keep_every: config.chain.keep_every,
        allow_partial: config.chain.allow_partial,
    };

    let pool = worker_pool(workers)?;
    let lines: Vec<String> = pool.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(index, instance)| -> CliResult<String> {
                let anchor = anchor_for(config, instance)?;
                let threshold = config.chain.threshold.unwrap_or(instance.threshold);
                let chain = build_chain(&instance.net, &anchor, threshold, &params)?;
                chain.save(&chain_path(&config.output_dir, index))?;
                let endpoint = fh_core::TwoLayerNet::from_params(chain.state(chain.t()))?
                    .forward(&anchor)?;
                Ok(format!(
                    "instance {index}: t={} steps={} endpoint={endpoint}{}",
                    chain.t(),
                    chain.total_steps(),
                    if chain.reached() { "" } else { " (partial)" }
                ))
            })
            .collect::<CliResult<Vec<String>>>()
    })?;

    let mut out = lines.join("\n");
    out.push_str(&format!("\nchain: wrote {} chains to {}", instances.len(),
        chains_dir(&config.output_dir).display()));
    Ok(out)
}
