//! Benchmark runs: execute the configured arms over the instance set with
//! matched seeds and write per-instance rows plus an aggregate summary.

use rayon::prelude::*;

use fh_core::cnf::CompiledInstance;
use fh_core::homotopy::{fh_attack, fh_binary_search, CheckpointChain};
use fh_core::search::{greedy_search, SearchBudget, SearchStrategy};
use fh_core::seeds::mix_seed;
use fh_core::SuffixProblem;

use crate::config::{Arm, ExperimentConfig};
use crate::data::{summarize_attack, write_attack_csv, AttackRow, AttackSummary};
use crate::error::{CliError, CliResult};

use super::{anchor_for, chain_path, ensure_dir, load_instances, worker_pool, write_file};

fn strategy_for(config: &ExperimentConfig, arm: Arm, vocab: usize, seed: u64) -> SearchStrategy {
    match arm {
        Arm::Gr | Arm::FhGr => {
            SearchStrategy::GreedyRandom { batch: config.batch_for(vocab), seed }
        }
        Arm::GradientGreedy | Arm::FhGradientGreedy | Arm::FhBinary => {
            SearchStrategy::GradientGreedy { top_k: config.top_k_for(vocab), seed }
        }
    }
}

fn binary_strategy_for(config: &ExperimentConfig, vocab: usize, seed: u64) -> SearchStrategy {
    // The binary-search scheduler uses the greedy-random inner search.
    SearchStrategy::GreedyRandom { batch: config.batch_for(vocab), seed }
}

fn run_instance(
    config: &ExperimentConfig,
    index: usize,
    instance: &CompiledInstance,
) -> CliResult<Vec<AttackRow>> {
    let threshold = config.chain.threshold.unwrap_or(instance.threshold);
    let problem = SuffixProblem::for_net(&instance.net, threshold)?;
    let base = instance.net.to_params(0);
    let anchor = anchor_for(config, instance)?;
    let vocab = instance.net.shape.vocab;
    // Matched seeds: every arm of one instance starts from the same seed.
    let seed = mix_seed(config.seed, index as u64, 0);
    let total = config.budget.total_iterations;

    let needs_chain = config.arms.iter().any(|a| a.is_staged());
    let chain = if needs_chain {
        let path = chain_path(&config.output_dir, index);
        if !path.exists() {
            return Err(CliError::config(format!(
                "missing chain file {} (run the chain command first)",
                path.display()
            )));
        }
        Some(CheckpointChain::load(&path)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(config.arms.len());
    for &arm in &config.arms {
        let row = match arm {
            Arm::Gr | Arm::GradientGreedy => {
                let strategy = strategy_for(config, arm, vocab, seed);
                let budget = SearchBudget::new(total, threshold);
                let trace = greedy_search(&problem, &base, &anchor, &budget, &strategy)?;
                AttackRow {
                    instance: index,
                    arm,
                    success: trace.success,
                    iterations: trace.iterations_used,
                    final_value: trace.final_value,
                    candidate_evals: trace.candidate_evals,
                    gradient_evals: trace.gradient_evals,
                }
            }
            Arm::FhGr | Arm::FhGradientGreedy => {
                let chain = chain.as_ref().expect("chain loaded for staged arms");
                let strategy = strategy_for(config, arm, vocab, seed);
                let result = fh_attack(
                    chain,
                    &problem,
                    Some(&anchor),
                    total,
                    &strategy,
                    config.chain.stride,
                )?;
                AttackRow {
                    instance: index,
                    arm,
                    success: result.success,
                    iterations: result.counted_iterations,
                    final_value: result.final_value,
                    candidate_evals: result
                        .stages
                        .iter()
                        .map(|s| s.trace.candidate_evals)
                        .sum(),
                    gradient_evals: result.stages.iter().map(|s| s.trace.gradient_evals).sum(),
                }
            }
            Arm::FhBinary => {
                let chain = chain.as_ref().expect("chain loaded for staged arms");
                let strategy = binary_strategy_for(config, vocab, seed);
                let result = fh_binary_search(
                    chain,
                    &problem,
                    Some(&anchor),
                    threshold,
                    config.chain.binary_attempt_iterations,
                    config.chain.cumulative_cap(),
                    &strategy,
                )?;
                AttackRow {
                    instance: index,
                    arm,
                    success: result.success,
                    iterations: result.counted_iterations,
                    final_value: result.final_value,
                    candidate_evals: result
                        .stages
                        .iter()
                        .map(|s| s.trace.candidate_evals)
                        .sum(),
                    gradient_evals: result.stages.iter().map(|s| s.trace.gradient_evals).sum(),
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn run(config: &ExperimentConfig, workers: usize) -> CliResult<String> {
    let instances = load_instances(config)?;
    let dir = config.output_dir.join("attack");
    ensure_dir(&dir)?;

    let pool = worker_pool(workers)?;
    let per_instance: Vec<Vec<AttackRow>> = pool.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(index, instance)| run_instance(config, index, instance))
            .collect::<CliResult<Vec<_>>>()
    })?;

    // Rows are already ordered: instance-major (indexed collect) with arms
    // in configured order inside each instance.
    let rows: Vec<AttackRow> = per_instance.into_iter().flatten().collect();
    let summary = AttackSummary {
        config: config.clone(),
        arms: summarize_attack(&rows, &config.arms, &config.budget.cuts),
    };

    write_file(&dir.join("rows.csv"), &write_attack_csv(&rows))?;
    let summary_json =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::config(e.to_string()))?;
    write_file(&dir.join("summary.json"), &(summary_json + "\n"))?;

    let mut out = String::new();
    for arm in &summary.arms {
        let cuts: Vec<String> = arm
            .success_at
            .iter()
            .map(|c| format!("@{}: {}/{}", c.cut, c.successes, arm.instances))
            .collect();
        out.push_str(&format!(
            "{}: {}/{} successes ({})\n",
            arm.arm,
            arm.successes,
            arm.instances,
            cuts.join(", ")
        ));
    }
    out.push_str(&format!("attack: wrote {} rows to {}", rows.len(), dir.display()));
    Ok(out)
}
