//! Easy-to-hard problem chains via parameter-space descent, and the staged
//! searches that walk them back.
//!
//! [`build_chain`] runs plain gradient descent on `p -> F(p, anchor)` from a
//! base network, saving every intermediate parameter state until the anchor
//! value reaches the threshold. Because consecutive states differ by a single
//! small update, the induced objectives `F(p_i, .)` deform gradually, so a
//! solution of stage `i + 1` warm-starts stage `i` cheaply. [`fh_attack`]
//! visits stages from the easy end back to the base objective;
//! [`fh_binary_search`] schedules the visited checkpoints by binary search
//! instead of walking every index.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FhError, Result};
use crate::objective::{sgd_step, NetShape, ParamState, SuffixProblem, TokenSequence, TwoLayerNet};
use crate::search::{greedy_search, SearchBudget, SearchStrategy, SearchTrace};
use crate::seeds::mix_seed;

/// Tolerance of the consecutive-step identity `p_{i+1} = p_i - lr * g_i`.
pub const CHAIN_STEP_TOLERANCE: f64 = 1e-12;

/// Descent controls for [`build_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub lr: f64,
    pub max_steps: usize,
    /// Retain every `keep_every`-th state (the endpoint is always kept).
    pub keep_every: usize,
    /// Return the partial chain instead of failing when the threshold is not
    /// reached within `max_steps`.
    pub allow_partial: bool,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self { lr: 0.05, max_steps: 2000, keep_every: 1, allow_partial: false }
    }
}

/// Header of a serialized chain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainHeader {
    anchor: Vec<usize>,
    vocab: usize,
    threshold: f64,
    lr: f64,
    keep_every: usize,
    total_steps: usize,
    reached: bool,
    shape: NetShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainRecord {
    step: usize,
    values: Vec<f64>,
}

/// Ordered parameter states `p_0 .. p_t` produced by descent at an anchor
/// input, together with the anchor, threshold and learning rate. Index 0 is
/// the base (hard) objective; the last index is the easy end.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointChain {
    states: Vec<ParamState>,
    anchor: TokenSequence,
    threshold: f64,
    lr: f64,
    keep_every: usize,
    total_steps: usize,
    reached: bool,
}

impl CheckpointChain {
    /// Index of the last retained state (the easy end of the chain).
    pub fn t(&self) -> usize {
        self.states.len() - 1
    }

    pub fn states(&self) -> &[ParamState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &ParamState {
        &self.states[index]
    }

    pub fn anchor(&self) -> &TokenSequence {
        &self.anchor
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Number of descent steps taken (equals `t()` when every state is kept).
    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Whether descent reached the threshold (false only for partial chains).
    pub fn reached(&self) -> bool {
        self.reached
    }

    /// Re-verify the structural invariants: consecutive retained states are
    /// connected by exact descent replay (entrywise within
    /// [`CHAIN_STEP_TOLERANCE`]) and, unless the chain is partial, the easy
    /// end satisfies the threshold at the anchor.
    pub fn verify(&self) -> Result<()> {
        for (i, pair) in self.states.windows(2).enumerate() {
            let (from, to) = (&pair[0], &pair[1]);
            if to.step <= from.step {
                return Err(FhError::Integrity(format!(
                    "chain invariant violated: step indices not increasing at state {i}"
                )));
            }
            let mut replayed = from.clone();
            for _ in 0..(to.step - from.step) {
                let net = TwoLayerNet::from_params(&replayed)?;
                let g = net.grad_params(&self.anchor)?;
                replayed = sgd_step(&replayed, &g, self.lr)?;
            }
            for (a, b) in replayed.values.iter().zip(&to.values) {
                if (a - b).abs() > CHAIN_STEP_TOLERANCE {
                    return Err(FhError::Integrity(format!(
                        "chain invariant violated: state {} is not the descent successor of state {i} (entry differs by {})",
                        i + 1,
                        (a - b).abs()
                    )));
                }
            }
        }
        if self.reached {
            let net = TwoLayerNet::from_params(self.states.last().expect("chain is nonempty"))?;
            let endpoint = net.forward(&self.anchor)?;
            if endpoint > self.threshold {
                return Err(FhError::Integrity(format!(
                    "chain invariant violated: endpoint value {endpoint} exceeds threshold {}",
                    self.threshold
                )));
            }
        }
        Ok(())
    }

    /// Write as JSON lines: one header record, then one record per retained
    /// state. Serialization is canonical, so identical chains produce
    /// byte-identical files.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let header = ChainHeader {
            anchor: self.anchor.tokens().to_vec(),
            vocab: self.anchor.vocab(),
            threshold: self.threshold,
            lr: self.lr,
            keep_every: self.keep_every,
            total_steps: self.total_steps,
            reached: self.reached,
            shape: self.states[0].shape,
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for state in &self.states {
            let record = ChainRecord { step: state.step, values: state.values.clone() };
            writeln!(out, "{}", serde_json::to_string(&record)?)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Load a chain file and re-verify its invariants.
    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| FhError::Integrity("chain file is empty".into()))??;
        let header: ChainHeader = serde_json::from_str(&header_line)?;
        let anchor = TokenSequence::new(header.anchor.clone(), header.vocab)?;
        let mut states = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let record: ChainRecord = serde_json::from_str(&line)?;
            if record.values.len() != header.shape.param_count() {
                return Err(FhError::Integrity(format!(
                    "chain record at step {} has {} values, shape expects {}",
                    record.step,
                    record.values.len(),
                    header.shape.param_count()
                )));
            }
            states.push(ParamState { shape: header.shape, values: record.values, step: record.step });
        }
        if states.is_empty() {
            return Err(FhError::Integrity("chain file has no states".into()));
        }
        let chain = Self {
            states,
            anchor,
            threshold: header.threshold,
            lr: header.lr,
            keep_every: header.keep_every,
            total_steps: header.total_steps,
            reached: header.reached,
        };
        chain.verify()?;
        Ok(chain)
    }
}

/// Gradient descent on `p -> F(p, anchor)` from the base network, saving
/// intermediate states, until the anchor value reaches `threshold`. Fails
/// after `max_steps` with the best value reached unless `allow_partial` is
/// set, in which case the partial chain is returned for study.
pub fn build_chain(
    base: &TwoLayerNet,
    anchor: &TokenSequence,
    threshold: f64,
    params: &ChainParams,
) -> Result<CheckpointChain> {
    if !params.lr.is_finite() || params.lr <= 0.0 {
        return Err(FhError::InvalidParameter(format!(
            "learning rate must be positive, got {}",
            params.lr
        )));
    }
    if !threshold.is_finite() {
        return Err(FhError::NonFinite("chain threshold must be finite".into()));
    }
    if params.max_steps == 0 || params.keep_every == 0 {
        return Err(FhError::InvalidParameter(
            "max_steps and keep_every must be >= 1".into(),
        ));
    }
    let mut current = base.to_params(0);
    let mut net = base.clone();
    let mut value = net.forward(anchor)?;
    let mut best = value;
    let mut states = vec![current.clone()];
    let mut reached = value <= threshold;

    while !reached {
        if current.step == params.max_steps {
            if params.allow_partial {
                break;
            }
            return Err(FhError::InvalidParameter(format!(
                "descent did not reach threshold {threshold} within {} steps (best value {best})",
                params.max_steps
            )));
        }
        let g = net.grad_params(anchor)?;
        current = sgd_step(&current, &g, params.lr)?;
        net = TwoLayerNet::from_params(&current)?;
        value = net.forward(anchor)?;
        best = best.min(value);
        reached = value <= threshold;
        if reached || current.step.is_multiple_of(params.keep_every) {
            states.push(current.clone());
        }
    }
    // A partial chain may stop off-stride; always retain the last state.
    if states.last().map(|s| s.step) != Some(current.step) {
        states.push(current.clone());
    }

    Ok(CheckpointChain {
        states,
        anchor: anchor.clone(),
        threshold,
        lr: params.lr,
        keep_every: params.keep_every,
        total_steps: current.step,
        reached,
    })
}

/// One stage of a staged run: which checkpoint was attacked, its search
/// trace, and whether its iterations count toward the reported total
/// (discarded binary-search failures do not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRun {
    pub state_index: usize,
    pub trace: SearchTrace,
    pub counted: bool,
}

/// Outcome of a staged homotopy run.
///
/// `counted_iterations` follows the discard rule of the binary-search
/// scheduler; `raw_iterations` counts every iteration actually spent. For
/// the plain staged walk the two totals coincide. In binary-search mode the
/// indices of *accepted* stages decrease toward 0; discarded attempts may
/// move upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhResult {
    pub final_seq: TokenSequence,
    pub final_value: f64,
    pub stages: Vec<StageRun>,
    pub counted_iterations: usize,
    pub raw_iterations: usize,
    pub success: bool,
    /// Set when a cumulative re-attack hit its retry cap.
    pub cumulative_cap_hit: bool,
}

impl FhResult {
    /// Checkpoint indices in attack order.
    pub fn visited_indices(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.state_index).collect()
    }
}

/// Checkpoint indices visited by [`fh_attack`] on a chain with easy end `t`:
/// every `stride`-th index walking down from the easy end, with stage 0
/// always included.
pub fn visited_stage_indices(t: usize, stride: usize) -> Vec<usize> {
    let mut indices = Vec::new();
    let mut i = t as i64 - stride as i64;
    while i > 0 {
        indices.push(i as usize);
        i -= stride as i64;
    }
    indices.push(0);
    indices
}

fn run_stage(
    problem: &SuffixProblem,
    state: &ParamState,
    init: &TokenSequence,
    iterations: usize,
    threshold: f64,
    strategy: &SearchStrategy,
    seed_salt: (u64, u64),
) -> Result<SearchTrace> {
    let budget = SearchBudget::new(iterations, threshold);
    let strategy = match strategy {
        SearchStrategy::GreedyRandom { seed, .. } | SearchStrategy::GradientGreedy { seed, .. } => {
            strategy.with_seed(mix_seed(*seed, seed_salt.0, seed_salt.1))
        }
        SearchStrategy::BruteForce => *strategy,
    };
    greedy_search(problem, state, init, &budget, &strategy)
}

/// Walk the chain from the easy end back to the base objective, visiting
/// every `stride`-th checkpoint (stage 0 always included). Each stage runs a
/// greedy search warm-started from the previous stage's final sequence; a
/// failed stage is non-fatal and its incumbent still seeds the next stage.
/// Success means the stage-0 value reaches the problem threshold.
///
/// `total_budget` is split equally over the *remaining* stages: each stage
/// is capped at `remaining / remaining_stages` iterations and anything it
/// does not spend (stages whose warm start already succeeds exit at zero)
/// rolls over, so the final stage receives everything left.
pub fn fh_attack(
    chain: &CheckpointChain,
    problem: &SuffixProblem,
    x_init: Option<&TokenSequence>,
    total_budget: usize,
    strategy: &SearchStrategy,
    stride: usize,
) -> Result<FhResult> {
    if stride == 0 {
        return Err(FhError::InvalidParameter("stride must be >= 1".into()));
    }
    let init = x_init.unwrap_or(chain.anchor());
    problem.validate_seq(init)?;
    let mut current = init.clone();
    let mut stages = Vec::new();
    let mut counted = 0usize;
    let mut remaining = total_budget;

    let indices = visited_stage_indices(chain.t(), stride);
    let stage_count = indices.len();
    for (stage, index) in indices.into_iter().enumerate() {
        let stages_left = stage_count - stage;
        let alloc = if stages_left == 1 { remaining } else { remaining / stages_left };
        let trace = run_stage(
            problem,
            chain.state(index),
            &current,
            alloc,
            problem.threshold,
            strategy,
            (index as u64, 0),
        )?;
        counted += trace.iterations_used;
        remaining = remaining.saturating_sub(trace.iterations_used);
        // Warm start the next stage from the incumbent even on failure.
        current = trace.final_seq.clone();
        stages.push(StageRun { state_index: index, trace, counted: true });
    }

    let last = stages.last().expect("at least stage 0 runs");
    Ok(FhResult {
        final_seq: current,
        final_value: last.trace.final_value,
        success: last.trace.success,
        stages,
        counted_iterations: counted,
        raw_iterations: counted,
        cumulative_cap_hit: false,
    })
}

/// Binary-search checkpoint scheduler.
///
/// Keeps a right extreme `R` (initially the easy end `t`) holding the best
/// known solution and attacks the midpoint candidate `C = floor(R/2)`:
///
/// * success: `R <- C`, `C <- floor(R/2)`; the new solution becomes the warm
///   start.
/// * failure away from the boundary: the candidate string is discarded, its
///   iterations are not counted toward the reported total, and the scheduler
///   retreats toward the right extreme with `C <- floor((C+R)/2)`.
/// * failure at the boundary (`C == R - 1`): the string is retained and the
///   same checkpoint is re-attacked cumulatively, up to `cumulative_cap`
///   iterations per checkpoint.
///
/// When `C` reaches 0 the loop ends and state 0 is attacked (cumulatively,
/// under the same cap) from the final warm start. `raw_iterations` also
/// includes the discarded attempts.
pub fn fh_binary_search(
    chain: &CheckpointChain,
    problem: &SuffixProblem,
    x_init: Option<&TokenSequence>,
    threshold: f64,
    per_attempt_iterations: usize,
    cumulative_cap: usize,
    strategy: &SearchStrategy,
) -> Result<FhResult> {
    if per_attempt_iterations == 0 {
        return Err(FhError::InvalidParameter(
            "per-attempt iteration cap must be >= 1".into(),
        ));
    }
    if cumulative_cap < per_attempt_iterations {
        return Err(FhError::InvalidParameter(
            "cumulative cap must be at least one attempt".into(),
        ));
    }
    let init = x_init.unwrap_or(chain.anchor());
    problem.validate_seq(init)?;

    let t = chain.t();
    let left = 0usize;
    let mut right = t;
    let mut candidate = right / 2;
    let mut warm = init.clone();
    let mut stages: Vec<StageRun> = Vec::new();
    let mut counted = 0usize;
    let mut raw = 0usize;
    let mut attempt = 0u64;
    let mut cumulative_here = 0usize;
    let mut cap_hit = false;

    while left != candidate {
        let trace = run_stage(
            problem,
            chain.state(candidate),
            &warm,
            per_attempt_iterations,
            threshold,
            strategy,
            (candidate as u64, attempt),
        )?;
        attempt += 1;
        raw += trace.iterations_used;
        let boundary = candidate + 1 == right;
        if trace.success {
            counted += trace.iterations_used;
            warm = trace.final_seq.clone();
            stages.push(StageRun { state_index: candidate, trace, counted: true });
            right = candidate;
            candidate = right / 2;
            cumulative_here = 0;
        } else if boundary {
            // Retain the string and re-attack the same checkpoint.
            counted += trace.iterations_used;
            cumulative_here += trace.iterations_used;
            warm = trace.final_seq.clone();
            stages.push(StageRun { state_index: candidate, trace, counted: true });
            if cumulative_here >= cumulative_cap {
                cap_hit = true;
                break;
            }
        } else {
            // Discard the candidate string; do not count its iterations.
            stages.push(StageRun { state_index: candidate, trace, counted: false });
            candidate = (candidate + right) / 2;
            cumulative_here = 0;
        }
    }

    // Final stage at the left extreme (state 0, or state t for a chain of
    // length 1), attacked cumulatively from the warm start.
    let mut final_success = false;
    if !cap_hit {
        cumulative_here = 0;
        loop {
            let trace = run_stage(
                problem,
                chain.state(candidate),
                &warm,
                per_attempt_iterations,
                threshold,
                strategy,
                (candidate as u64, attempt),
            )?;
            attempt += 1;
            raw += trace.iterations_used;
            counted += trace.iterations_used;
            cumulative_here += trace.iterations_used;
            warm = trace.final_seq.clone();
            let success = trace.success;
            stages.push(StageRun { state_index: candidate, trace, counted: true });
            if success {
                final_success = true;
                break;
            }
            if cumulative_here >= cumulative_cap {
                cap_hit = true;
                break;
            }
        }
    }

    let final_value = stages.last().expect("at least one stage runs").trace.final_value;
    Ok(FhResult {
        final_seq: warm,
        final_value,
        success: final_success,
        stages,
        counted_iterations: counted,
        raw_iterations: raw,
        cumulative_cap_hit: cap_hit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{compile_to_network, random_3cnf};
    use crate::objective::Activation;
    use crate::test_support::{finite_difference_params, random_net};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn compiled(seed: u64, m: usize, k: usize) -> (SuffixProblem, TwoLayerNet, f64) {
        let f = random_3cnf(m, k, seed).unwrap();
        let inst = compile_to_network(&f).unwrap();
        let problem = SuffixProblem::for_net(&inst.net, inst.threshold).unwrap();
        (problem, inst.net, inst.threshold)
    }

    #[test]
    fn chain_is_trivial_when_anchor_already_succeeds() {
        let (_, net, _) = compiled(3, 6, 10);
        let anchor = TokenSequence::zeros(6, 2).unwrap();
        let value = net.forward(&anchor).unwrap();
        let chain =
            build_chain(&net, &anchor, value + 1.0, &ChainParams::default()).unwrap();
        assert_eq!(chain.t(), 0);
        assert_eq!(chain.total_steps(), 0);
        chain.verify().unwrap();
    }

    #[test]
    fn smooth_descent_decreases_every_step_and_matches_fd() {
        // Identity activation: the anchor objective is a smooth function of
        // the parameters; every descent step must strictly decrease it, and
        // each saved transition must match a finite-difference replay.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = random_net(&mut rng, 3, 2, 3, Activation::Identity);
        let anchor = TokenSequence::zeros(3, 2).unwrap();
        let start = net.forward(&anchor).unwrap();
        let params = ChainParams { lr: 0.01, max_steps: 40, keep_every: 1, allow_partial: true };
        let chain = build_chain(&net, &anchor, start - 5.0, &params).unwrap();
        assert!(chain.t() >= 2);
        let mut prev = f64::INFINITY;
        for state in chain.states() {
            let snet = TwoLayerNet::from_params(state).unwrap();
            let v = snet.forward(&anchor).unwrap();
            assert!(v < prev, "descent not strict: {v} !< {prev}");
            prev = v;
        }
        // Independent replay of the first transition with the FD gradient.
        let first = TwoLayerNet::from_params(chain.state(0)).unwrap();
        let fd = finite_difference_params(&first, &anchor, 1e-6);
        for ((a, g), b) in chain.state(0).values.iter().zip(&fd).zip(&chain.state(1).values) {
            assert!((a - 0.01 * g - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn clause_chain_reaches_threshold_and_verifies() {
        let (_, net, threshold) = compiled(7, 10, 40);
        let anchor = TokenSequence::zeros(10, 2).unwrap();
        let chain = build_chain(&net, &anchor, threshold, &ChainParams::default()).unwrap();
        assert!(chain.reached());
        chain.verify().unwrap();
        let easy = TwoLayerNet::from_params(chain.state(chain.t())).unwrap();
        assert!(easy.forward(&anchor).unwrap() <= threshold);
    }

    #[test]
    fn chain_failure_reports_best_value_and_partial_flag_works() {
        let (_, net, threshold) = compiled(11, 8, 30);
        let anchor = TokenSequence::zeros(8, 2).unwrap();
        let params = ChainParams { lr: 0.01, max_steps: 3, keep_every: 1, allow_partial: false };
        let err = build_chain(&net, &anchor, threshold, &params).unwrap_err();
        assert!(err.to_string().contains("best value"));

        let partial = build_chain(
            &net,
            &anchor,
            threshold,
            &ChainParams { allow_partial: true, ..params },
        )
        .unwrap();
        assert!(!partial.reached());
        assert_eq!(partial.total_steps(), 3);
        partial.verify().unwrap();
    }

    #[test]
    fn keep_every_retains_endpoint_and_verifies_by_replay() {
        let (_, net, threshold) = compiled(13, 9, 35);
        let anchor = TokenSequence::zeros(9, 2).unwrap();
        let params = ChainParams { lr: 0.02, max_steps: 2000, keep_every: 3, allow_partial: false };
        let chain = build_chain(&net, &anchor, threshold, &params).unwrap();
        chain.verify().unwrap();
        assert_eq!(chain.states().last().unwrap().step, chain.total_steps());
        if chain.total_steps() >= 3 {
            assert!(chain.t() < chain.total_steps());
        }
    }

    #[test]
    fn single_state_chain_degenerates_to_plain_search() {
        let (problem, net, threshold) = compiled(17, 8, 12);
        let anchor = TokenSequence::zeros(8, 2).unwrap();
        let value = net.forward(&anchor).unwrap();
        // Threshold just below the anchor value so the chain is length 1 but
        // search still has work to do at stage 0... unless already satisfied.
        let chain = build_chain(&net, &anchor, value + 1.0, &ChainParams::default()).unwrap();
        assert_eq!(chain.t(), 0);
        let strategy = SearchStrategy::GreedyRandom { batch: 2, seed: 5 };
        let result =
            fh_attack(&chain, &problem, None, 200, &strategy, 1).unwrap();
        assert_eq!(result.stages.len(), 1);
        assert_eq!(result.stages[0].state_index, 0);

        let plain = greedy_search(
            &problem,
            chain.state(0),
            &anchor,
            &SearchBudget::new(200, threshold),
            &strategy.with_seed(mix_seed(5, 0, 0)),
        )
        .unwrap();
        assert_eq!(result.stages[0].trace, plain);
    }

    #[test]
    fn staged_walk_records_descending_stages_and_coherent_warm_starts() {
        let (problem, net, threshold) = compiled(19, 10, 42);
        let anchor = TokenSequence::zeros(10, 2).unwrap();
        let chain = build_chain(&net, &anchor, threshold, &ChainParams::default()).unwrap();
        let strategy = SearchStrategy::GreedyRandom { batch: 2, seed: 2 };
        let result = fh_attack(&chain, &problem, None, 50, &strategy, 1).unwrap();
        let indices = result.visited_indices();
        assert!(indices.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(*indices.last().unwrap(), 0);
        assert_eq!(
            result.counted_iterations,
            result.stages.iter().map(|s| s.trace.iterations_used).sum::<usize>()
        );
        assert_eq!(result.success, result.stages.last().unwrap().trace.success);
        assert_eq!(result.final_value, result.stages.last().unwrap().trace.final_value);
    }

    #[test]
    fn stage_failure_is_non_fatal() {
        let (problem, net, threshold) = compiled(23, 10, 42);
        let anchor = TokenSequence::zeros(10, 2).unwrap();
        let chain = build_chain(&net, &anchor, threshold, &ChainParams::default()).unwrap();
        // A one-iteration stage budget forces some failures; the walk must
        // still complete and report every stage.
        let strategy = SearchStrategy::GreedyRandom { batch: 1, seed: 3 };
        let result = fh_attack(&chain, &problem, None, 1, &strategy, 1).unwrap();
        assert_eq!(result.stages.len(), chain.t().max(1));
        assert!(result.stages.iter().any(|s| !s.trace.success));
    }

    #[test]
    fn stride_visits_every_kth_stage_plus_zero() {
        assert_eq!(visited_stage_indices(10, 3), vec![7, 4, 1, 0]);
        assert_eq!(visited_stage_indices(6, 2), vec![4, 2, 0]);
        assert_eq!(visited_stage_indices(5, 1), vec![4, 3, 2, 1, 0]);
        assert_eq!(visited_stage_indices(0, 1), vec![0]);
    }

    fn fixed_length_chain(steps: usize) -> (SuffixProblem, CheckpointChain) {
        let (problem, net, _) = compiled(29, 8, 30);
        let anchor = TokenSequence::zeros(8, 2).unwrap();
        let params =
            ChainParams { lr: 0.01, max_steps: steps, keep_every: 1, allow_partial: true };
        // An unreachably low target makes descent run for exactly max_steps.
        let chain = build_chain(&net, &anchor, -1e18, &params).unwrap();
        assert_eq!(chain.t(), steps);
        (problem, chain)
    }

    #[test]
    fn binary_search_all_easy_visits_logarithmic_schedule() {
        let (problem, chain) = fixed_length_chain(500);
        // Threshold above every stage value at the anchor: every attack
        // succeeds immediately and the schedule halves down to zero.
        let worst = chain
            .states()
            .iter()
            .map(|s| {
                TwoLayerNet::from_params(s).unwrap().forward(chain.anchor()).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let easy = worst + 1.0;
        let strategy = SearchStrategy::GreedyRandom { batch: 2, seed: 7 };
        let result =
            fh_binary_search(&chain, &problem, None, easy, 50, 500, &strategy).unwrap();
        assert!(result.success);
        assert_eq!(result.visited_indices(), vec![250, 125, 62, 31, 15, 7, 3, 1, 0]);
        assert_eq!(result.counted_iterations, 0);
        assert_eq!(result.raw_iterations, 0);
    }

    #[test]
    fn binary_search_thresholded_chain_terminates_and_discards_failures() {
        let (problem, chain) = fixed_length_chain(60);
        // Tight per-attempt budget on the real threshold: low stages fail,
        // the candidate drifts toward the right extreme, and the run must
        // still terminate with exact iteration accounting.
        let strategy = SearchStrategy::GreedyRandom { batch: 1, seed: 11 };
        let result = fh_binary_search(
            &chain,
            &problem,
            None,
            problem.threshold,
            2,
            8,
            &strategy,
        )
        .unwrap();
        let counted: usize = result
            .stages
            .iter()
            .filter(|s| s.counted)
            .map(|s| s.trace.iterations_used)
            .sum();
        let raw: usize = result.stages.iter().map(|s| s.trace.iterations_used).sum();
        assert_eq!(result.counted_iterations, counted);
        assert_eq!(result.raw_iterations, raw);
        assert!(result.stages.iter().any(|s| !s.counted), "expected discarded attempts");
        assert!(raw > counted);
        if !result.success {
            assert!(result.cumulative_cap_hit);
        }
        // Accepted stages walk monotonically toward the base model.
        let accepted: Vec<usize> = result
            .stages
            .iter()
            .filter(|s| s.counted && s.trace.success)
            .map(|s| s.state_index)
            .collect();
        assert!(accepted.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let (_, net, threshold) = compiled(31, 8, 26);
        let anchor = TokenSequence::zeros(8, 2).unwrap();
        let chain = build_chain(&net, &anchor, threshold, &ChainParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("chain_a.jsonl");
        let path_b = dir.path().join("chain_b.jsonl");
        chain.save(&path_a).unwrap();
        let loaded = CheckpointChain::load(&path_a).unwrap();
        assert_eq!(loaded, chain);
        loaded.save(&path_b).unwrap();
        assert_eq!(std::fs::read(&path_a).unwrap(), std::fs::read(&path_b).unwrap());
    }

    #[test]
    fn tampered_chain_fails_integrity_on_load() {
        let (_, net, threshold) = compiled(37, 7, 24);
        let anchor = TokenSequence::zeros(7, 2).unwrap();
        let chain = build_chain(&net, &anchor, threshold, &ChainParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.jsonl");
        chain.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // Corrupt one weight in the middle record.
        let mid = lines.len() / 2;
        let mut record: ChainRecord = serde_json::from_str(&lines[mid]).unwrap();
        record.values[0] += 0.5;
        lines[mid] = serde_json::to_string(&record).unwrap();
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = CheckpointChain::load(&path).unwrap_err();
        match err {
            FhError::Integrity(msg) => assert!(msg.contains("descent successor")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn long_chain_round_trips_quickly() {
        let (_, chain) = fixed_length_chain(500);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.jsonl");
        let started = std::time::Instant::now();
        chain.save(&path).unwrap();
        let loaded = CheckpointChain::load(&path).unwrap();
        assert_eq!(loaded.t(), 500);
        assert!(
            started.elapsed() < std::time::Duration::from_secs(5),
            "round trip took {:?}",
            started.elapsed()
        );
    }
}
