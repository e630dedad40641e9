//! Verify: re-derive every aggregate from its row data and re-check chain
//! invariants. Any mismatch is an integrity failure (exit code 4).

use std::path::Path;

use fh_core::homotopy::CheckpointChain;

use crate::data::{read_attack_csv, read_rank_csv, summarize_attack, summarize_rank};
use crate::data::{AttackSummary, RankSummary};
use crate::error::{CliError, CliResult};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::integrity(format!("{}: {e}", path.display())))
}

pub fn run(dir: &Path) -> CliResult<String> {
    let mut checks = Vec::new();

    let attack_summary = dir.join("attack").join("summary.json");
    if attack_summary.exists() {
        let summary: AttackSummary = read_json(&attack_summary)?;
        let rows = read_attack_csv(&dir.join("attack").join("rows.csv"))?;
        let recomputed =
            summarize_attack(&rows, &summary.config.arms, &summary.config.budget.cuts);
        if recomputed != summary.arms {
            return Err(CliError::integrity(
                "attack summary does not match aggregates recomputed from rows.csv",
            ));
        }
        checks.push(format!("attack: {} rows consistent with summary", rows.len()));
    }

    let rank_summary = dir.join("rankeval").join("summary.json");
    if rank_summary.exists() {
        let summary: RankSummary = read_json(&rank_summary)?;
        let rows = read_rank_csv(&dir.join("rankeval").join("rows.csv"))?;
        if summarize_rank(&rows) != summary.methods {
            return Err(CliError::integrity(
                "rankeval summary does not match aggregates recomputed from rows.csv",
            ));
        }
        checks.push(format!("rankeval: {} rows consistent with summary", rows.len()));
    }

    let chains = dir.join("chains");
    if chains.is_dir() {
        let mut paths: Vec<_> = std::fs::read_dir(&chains)
            .map_err(|e| CliError::config(format!("cannot list {}: {e}", chains.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        paths.sort();
        for path in &paths {
            // Loading re-runs the descent-replay and endpoint invariants.
            CheckpointChain::load(path)?;
        }
        checks.push(format!("chains: {} files pass invariant checks", paths.len()));
    }

    if checks.is_empty() {
        return Ok(format!("verify: nothing to verify under {}", dir.display()));
    }
    Ok(format!("verify: OK\n{}", checks.join("\n")))
}
