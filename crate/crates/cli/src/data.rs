//! Row and summary records shared by the attack, report and verify commands.
//!
//! CSV schemas are stable and documented here; aggregate summaries embed the
//! resolved configuration and are recomputable from the row data alone, which
//! the verify command checks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Arm, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub const ATTACK_CSV_HEADER: &str =
    "instance,arm,success,iterations,final_value,candidate_evals,gradient_evals";

pub const RANK_CSV_HEADER: &str = "instance,position,method,rbo,p,depth";

/// One benchmark outcome: one instance attacked by one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub instance: usize,
    pub arm: Arm,
    pub success: bool,
    /// Counted iterations (the binary-search scheduler excludes discarded
    /// attempts from this total).
    pub iterations: usize,
    pub final_value: f64,
    pub candidate_evals: usize,
    pub gradient_evals: usize,
}

impl AttackRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.instance,
            self.arm,
            self.success,
            self.iterations,
            self.final_value,
            self.candidate_evals,
            self.gradient_evals
        )
    }

    pub fn from_csv_line(line: &str, lineno: usize) -> CliResult<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::config(format!(
                "attack row at line {lineno} has {} fields, expected 7",
                fields.len()
            )));
        }
        let parse_err =
            |what: &str| CliError::config(format!("bad {what} in attack row at line {lineno}"));
        Ok(Self {
            instance: fields[0].parse().map_err(|_| parse_err("instance"))?,
            arm: fields[1].parse().map_err(|_| parse_err("arm"))?,
            success: fields[2].parse().map_err(|_| parse_err("success"))?,
            iterations: fields[3].parse().map_err(|_| parse_err("iterations"))?,
            final_value: fields[4].parse().map_err(|_| parse_err("final_value"))?,
            candidate_evals: fields[5].parse().map_err(|_| parse_err("candidate_evals"))?,
            gradient_evals: fields[6].parse().map_err(|_| parse_err("gradient_evals"))?,
        })
    }
}

pub fn write_attack_csv(rows: &[AttackRow]) -> String {
    let mut out = String::from(ATTACK_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn read_attack_csv(path: &Path) -> CliResult<Vec<AttackRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == ATTACK_CSV_HEADER => {}
        _ => {
            return Err(CliError::config(format!(
                "{} does not start with the attack row header",
                path.display()
            )))
        }
    }
    lines.map(|(i, line)| AttackRow::from_csv_line(line, i + 1)).collect()
}

/// Success counts of one arm at one budget cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCount {
    pub cut: usize,
    pub successes: usize,
}

/// Aggregate over all instances of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub instances: usize,
    pub successes: usize,
    pub success_at: Vec<CutCount>,
    pub mean_iterations_on_success: Option<f64>,
    pub total_candidate_evals: usize,
    pub total_gradient_evals: usize,
}

/// The attack summary document: resolved config plus per-arm aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub config: ExperimentConfig,
    pub arms: Vec<ArmSummary>,
}

/// Recompute per-arm aggregates from rows. Arms appear in `arm_order`;
/// within an arm, rows are consumed in their stored order, so identical rows
/// give identical aggregates bit for bit.
pub fn summarize_attack(rows: &[AttackRow], arm_order: &[Arm], cuts: &[usize]) -> Vec<ArmSummary> {
    arm_order
        .iter()
        .map(|&arm| {
            let arm_rows: Vec<&AttackRow> = rows.iter().filter(|r| r.arm == arm).collect();
            let successes = arm_rows.iter().filter(|r| r.success).count();
            let success_at = cuts
                .iter()
                .map(|&cut| CutCount {
                    cut,
                    successes: arm_rows
                        .iter()
                        .filter(|r| r.success && r.iterations <= cut)
                        .count(),
                })
                .collect();
            let mean_iterations_on_success = if successes > 0 {
                let total: usize =
                    arm_rows.iter().filter(|r| r.success).map(|r| r.iterations).sum();
                Some(total as f64 / successes as f64)
            } else {
                None
            };
            ArmSummary {
                arm,
                instances: arm_rows.len(),
                successes,
                success_at,
                mean_iterations_on_success,
                total_candidate_evals: arm_rows.iter().map(|r| r.candidate_evals).sum(),
                total_gradient_evals: arm_rows.iter().map(|r| r.gradient_evals).sum(),
            }
        })
        .collect()
}

/// One ranking-evaluation outcome: one instance, position and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub instance: String,
    pub position: usize,
    pub method: String,
    pub rbo: f64,
    pub p: f64,
    pub depth: usize,
}

impl RankRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.instance, self.position, self.method, self.rbo, self.p, self.depth
        )
    }

    pub fn from_csv_line(line: &str, lineno: usize) -> CliResult<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::config(format!(
                "rank row at line {lineno} has {} fields, expected 6",
                fields.len()
            )));
        }
        let parse_err =
            |what: &str| CliError::config(format!("bad {what} in rank row at line {lineno}"));
        Ok(Self {
            instance: fields[0].to_string(),
            position: fields[1].parse().map_err(|_| parse_err("position"))?,
            method: fields[2].to_string(),
            rbo: fields[3].parse().map_err(|_| parse_err("rbo"))?,
            p: fields[4].parse().map_err(|_| parse_err("p"))?,
            depth: fields[5].parse().map_err(|_| parse_err("depth"))?,
        })
    }
}

pub fn write_rank_csv(rows: &[RankRow]) -> String {
    let mut out = String::from(RANK_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn read_rank_csv(path: &Path) -> CliResult<Vec<RankRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RANK_CSV_HEADER => {}
        _ => {
            return Err(CliError::config(format!(
                "{} does not start with the rank row header",
                path.display()
            )))
        }
    }
    lines.map(|(i, line)| RankRow::from_csv_line(line, i + 1)).collect()
}

/// Mean RBO of one method over one instance group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMean {
    pub group: String,
    pub method: String,
    pub rows: usize,
    pub mean_rbo: Option<f64>,
}

/// The rank-evaluation summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub config: ExperimentConfig,
    pub methods: Vec<MethodMean>,
}

/// Group means in a fixed (group, method) order.
pub fn summarize_rank(rows: &[RankRow]) -> Vec<MethodMean> {
    let mut out = Vec::new();
    for group in ["main", "control"] {
        for method in ["gradient", "random"] {
            let selected: Vec<&RankRow> = rows
                .iter()
                .filter(|r| r.method == method && group_of(&r.instance) == group)
                .collect();
            let mean_rbo = if selected.is_empty() {
                None
            } else {
                Some(selected.iter().map(|r| r.rbo).sum::<f64>() / selected.len() as f64)
            };
            out.push(MethodMean {
                group: group.to_string(),
                method: method.to_string(),
                rows: selected.len(),
                mean_rbo,
            });
        }
    }
    out
}

fn group_of(instance: &str) -> &'static str {
    if instance.starts_with("control") {
        "control"
    } else {
        "main"
    }
}
