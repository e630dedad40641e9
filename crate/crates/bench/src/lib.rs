//! Shared fixtures for the benchmark targets.

use fh_core::cnf::{compile_to_network, planted_3cnf, CompiledInstance};
use fh_core::{ParamState, SuffixProblem, TokenSequence};

/// The benchmark workload: one planted suite-sized instance (m = 12, k = 50)
/// with its problem, base parameters and anchor.
pub struct Workload {
    pub instance: CompiledInstance,
    pub problem: SuffixProblem,
    pub params: ParamState,
    pub anchor: TokenSequence,
}

pub fn suite_workload(seed: u64) -> Workload {
    let (formula, _) = planted_3cnf(12, 50, seed).expect("valid generator arguments");
    let instance = compile_to_network(&formula).expect("compilation succeeds");
    let problem =
        SuffixProblem::for_net(&instance.net, instance.threshold).expect("valid problem");
    let params = instance.net.to_params(0);
    let anchor = TokenSequence::zeros(12, 2).expect("valid anchor");
    Workload { instance, problem, params, anchor }
}
