//! Report: merge attack row files into success-rate tables and iteration
//! histograms (text and CSV, no plotting).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::config::Arm;
use crate::data::{read_attack_csv, AttackRow};
use crate::error::{CliError, CliResult};

use super::{ensure_dir, write_file};

pub struct ReportArgs {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub bin_width: usize,
    pub cuts: Vec<usize>,
}

fn arms_in(rows: &[AttackRow]) -> Vec<Arm> {
    let mut seen = BTreeSet::new();
    let mut arms = Vec::new();
    for row in rows {
        if seen.insert(row.arm.to_string()) {
            arms.push(row.arm);
        }
    }
    arms
}

pub fn run(args: &ReportArgs) -> CliResult<String> {
    if args.bin_width == 0 {
        return Err(CliError::config("bin width must be >= 1"));
    }
    if args.inputs.is_empty() {
        return Err(CliError::config("report needs at least one rows.csv input"));
    }
    let mut rows = Vec::new();
    for path in &args.inputs {
        rows.extend(read_attack_csv(path)?);
    }
    ensure_dir(&args.out)?;

    let mut text = String::new();
    let mut success_csv = String::from("arm,cut,successes,total,rate\n");
    let mut hist_csv = String::from("arm,bin_start,bin_end,count\n");

    if rows.is_empty() {
        text.push_str("report: no rows in the merged inputs (empty report)\n");
    } else {
        let arms = arms_in(&rows);
        text.push_str(&format!(
            "report over {} rows from {} file(s)\n\n",
            rows.len(),
            args.inputs.len()
        ));
        text.push_str("success rates\n");
        for &arm in &arms {
            let arm_rows: Vec<&AttackRow> = rows.iter().filter(|r| r.arm == arm).collect();
            let total = arm_rows.len();
            for &cut in &args.cuts {
                let successes =
                    arm_rows.iter().filter(|r| r.success && r.iterations <= cut).count();
                let rate = successes as f64 / total as f64;
                text.push_str(&format!(
                    "  {arm:<20} @{cut:<6} {successes:>4}/{total:<4} ({:.1}%)\n",
                    100.0 * rate
                ));
                success_csv.push_str(&format!("{arm},{cut},{successes},{total},{rate}\n"));
            }
        }

        text.push_str(&format!(
            "\niteration histogram of successful runs (bin width {})\n",
            args.bin_width
        ));
        for &arm in &arms {
            let iterations: Vec<usize> = rows
                .iter()
                .filter(|r| r.arm == arm && r.success)
                .map(|r| r.iterations)
                .collect();
            text.push_str(&format!("  {arm}\n"));
            if iterations.is_empty() {
                text.push_str("    (no successes)\n");
                continue;
            }
            let max_bin = iterations.iter().max().unwrap() / args.bin_width;
            for bin in 0..=max_bin {
                let lo = bin * args.bin_width;
                let hi = lo + args.bin_width;
                let count = iterations.iter().filter(|&&i| i >= lo && i < hi).count();
                if count > 0 {
                    text.push_str(&format!(
                        "    [{lo:>5}, {hi:>5}) {count:>4} {}\n",
                        "#".repeat(count.min(60))
                    ));
                    hist_csv.push_str(&format!("{arm},{lo},{hi},{count}\n"));
                }
            }
        }
    }

    write_file(&args.out.join("report.txt"), &text)?;
    write_file(&args.out.join("success.csv"), &success_csv)?;
    write_file(&args.out.join("histogram.csv"), &hist_csv)?;
    Ok(format!("{text}\nreport: wrote outputs to {}", args.out.display()))
}

/// Convenience for tests: the default report location inside a run directory.
pub fn default_out(run_dir: &Path) -> PathBuf {
    run_dir.join("report")
}
