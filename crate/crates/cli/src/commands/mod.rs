pub mod attack;
pub mod chain;
pub mod gen;
pub mod rankeval;
pub mod report;
pub mod verify;

use std::path::{Path, PathBuf};

use fh_core::cnf::CompiledInstance;
use fh_core::TokenSequence;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub fn instances_dir(out: &Path) -> PathBuf {
    out.join("instances")
}

pub fn chains_dir(out: &Path) -> PathBuf {
    out.join("chains")
}

pub fn instance_stem(index: usize) -> String {
    format!("instance_{index:03}")
}

pub fn chain_path(out: &Path, index: usize) -> PathBuf {
    chains_dir(out).join(format!("{}.chain.jsonl", instance_stem(index)))
}

/// Load the compiled instances materialized by the gen command, in index
/// order.
pub fn load_instances(config: &ExperimentConfig) -> CliResult<Vec<CompiledInstance>> {
    let dir = instances_dir(&config.output_dir);
    let count = config.instances.count();
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let path = dir.join(format!("{}.json", instance_stem(index)));
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::config(format!(
                "cannot read instance {} (run the gen command first): {e}",
                path.display()
            ))
        })?;
        out.push(CompiledInstance::from_json(&text)?);
    }
    Ok(out)
}

/// The anchor sequence for an instance: all zeros unless the config pins one.
pub fn anchor_for(config: &ExperimentConfig, instance: &CompiledInstance) -> CliResult<TokenSequence> {
    let positions = instance.net.shape.positions;
    let vocab = instance.net.shape.vocab;
    match &config.anchor {
        None => Ok(TokenSequence::zeros(positions, vocab)?),
        Some(tokens) => {
            if tokens.len() != positions {
                return Err(CliError::config(format!(
                    "anchor has {} tokens but the instance has {positions} positions",
                    tokens.len()
                )));
            }
            Ok(TokenSequence::new(tokens.clone(), vocab)?)
        }
    }
}

/// Worker pool honoring the configured width. Every output is collected and
/// sorted before writing, so the worker count never changes a byte.
pub fn worker_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config(format!("cannot build worker pool: {e}")))
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}
