//! Inner discrete-search strategies under an iteration-budget contract.
//!
//! One iteration fixes a single free position and evaluates a batch of
//! candidate single-token substitutions there, keeping the best greedily:
//! either a uniform random batch (greedy random) or the top candidates of the
//! input-gradient ranking (gradient greedy). Accepted incumbent values are
//! nonincreasing, iteration accounting is exact, and a fixed seed reproduces
//! a search bit-identically. An exhaustive minimizer serves as the
//! ground-truth oracle on small spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FhError, Result};
use crate::objective::{ParamState, SuffixProblem, TokenSequence, TwoLayerNet};

/// Enumeration guard for [`brute_force_min`]: at most 2^24 assignments.
pub const MIN_ORACLE_MAX_SPACE: f64 = 16_777_216.0;

/// Iteration cap and stop threshold for one search run. The search stops as
/// soon as the incumbent value is at or below `stop_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_iterations: usize,
    pub stop_threshold: f64,
}

impl SearchBudget {
    pub fn new(max_iterations: usize, stop_threshold: f64) -> Self {
        Self { max_iterations, stop_threshold }
    }
}

/// Which inner search to run and its per-iteration candidate source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Sample `batch` tokens uniformly with replacement at a random free
    /// position each iteration.
    GreedyRandom { batch: usize, seed: u64 },
    /// Evaluate the `top_k` tokens of the gradient ranking at a random free
    /// position each iteration.
    GradientGreedy { top_k: usize, seed: u64 },
    /// Exhaustive oracle passthrough (no iterations consumed).
    BruteForce,
}

impl SearchStrategy {
    /// Sensible desk-scale batch default: the full vocabulary when it is
    /// tiny, 64 otherwise.
    pub fn default_batch(vocab: usize) -> usize {
        if vocab <= 8 {
            vocab
        } else {
            64
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            SearchStrategy::GreedyRandom { batch, .. } => SearchStrategy::GreedyRandom { batch, seed },
            SearchStrategy::GradientGreedy { top_k, .. } => {
                SearchStrategy::GradientGreedy { top_k, seed }
            }
            SearchStrategy::BruteForce => SearchStrategy::BruteForce,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SearchStrategy::GreedyRandom { batch, .. } => *batch >= 1,
            SearchStrategy::GradientGreedy { top_k, .. } => *top_k >= 1,
            SearchStrategy::BruteForce => true,
        };
        if ok {
            Ok(())
        } else {
            Err(FhError::InvalidParameter("strategy batch sizes must be >= 1".into()))
        }
    }
}

/// One row of a search log: the position tried, the best candidate token
/// seen there, the incumbent value after the iteration and whether the
/// incumbent changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub position: usize,
    pub token: usize,
    pub value: f64,
    pub accepted: bool,
}

/// Complete log of one search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub records: Vec<IterRecord>,
    pub final_seq: TokenSequence,
    pub final_value: f64,
    pub success: bool,
    pub iterations_used: usize,
    /// Objective evaluations spent on candidates (budget-normalizing data:
    /// one iteration costs `batch` or `top_k` of these).
    pub candidate_evals: usize,
    /// Input-gradient computations (gradient-greedy only).
    pub gradient_evals: usize,
}

impl SearchTrace {
    /// Stable CSV schema: `iter,position,token,value,accepted`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,position,token,value,accepted\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iter, r.position, r.token, r.value, r.accepted
            ));
        }
        out
    }
}

/// Best candidate among `(token, value)` pairs evaluated in order: minimal
/// value, ties broken by the lower token index.
fn best_candidate(evals: &[(usize, f64)]) -> (usize, f64) {
    let mut best = evals[0];
    for &(tok, val) in &evals[1..] {
        if val < best.1 || (val == best.1 && tok < best.0) {
            best = (tok, val);
        }
    }
    best
}

/// Evaluate every vocabulary token at one position. Returns `(token, value)`
/// in token order. This is the exhaustive single-position sweep shared by the
/// ground-truth ranking and the test oracles.
pub fn sweep_position(
    problem: &SuffixProblem,
    net: &TwoLayerNet,
    current: &TokenSequence,
    position: usize,
) -> Result<Vec<(usize, f64)>> {
    problem.validate_seq(current)?;
    if !problem.is_free(position) {
        return Err(FhError::InvalidParameter(format!("position {position} is not free")));
    }
    (0..problem.vocab())
        .map(|tok| Ok((tok, net.forward(&current.substitute(position, tok))?)))
        .collect()
}

/// Exhaustive-best substitution at one position: the sweep minimum with ties
/// broken by lower token index.
pub fn best_substitution(
    problem: &SuffixProblem,
    net: &TwoLayerNet,
    current: &TokenSequence,
    position: usize,
) -> Result<(TokenSequence, f64)> {
    let sweep = sweep_position(problem, net, current, position)?;
    let (tok, val) = best_candidate(&sweep);
    Ok((current.substitute(position, tok), val))
}

/// Internal outcome of one greedy iteration.
struct StepOutcome {
    seq: TokenSequence,
    value: f64,
    position: usize,
    token: usize,
    accepted: bool,
    evals: usize,
    grad_evals: usize,
}

fn evaluate_candidates(
    net: &TwoLayerNet,
    current: &TokenSequence,
    current_value: f64,
    position: usize,
    candidates: &[usize],
) -> Result<StepOutcome> {
    let mut evals = Vec::with_capacity(candidates.len());
    for &tok in candidates {
        let value = net.forward(&current.substitute(position, tok))?;
        evals.push((tok, value));
    }
    let (tok, val) = best_candidate(&evals);
    // The incumbent wins value ties: only a strict improvement is accepted.
    let accepted = val < current_value;
    let (seq, value, token) = if accepted {
        (current.substitute(position, tok), val, tok)
    } else {
        (current.clone(), current_value, current.tokens()[position])
    };
    Ok(StepOutcome {
        seq,
        value,
        position,
        token,
        accepted,
        evals: candidates.len(),
        grad_evals: 0,
    })
}

fn pick_free_position(problem: &SuffixProblem, rng: &mut ChaCha8Rng) -> Result<usize> {
    let free = problem.free_positions();
    if free.is_empty() {
        return Err(FhError::InvalidParameter("problem has no free positions".into()));
    }
    Ok(free[rng.gen_range(0..free.len())])
}

fn greedy_random_outcome(
    problem: &SuffixProblem,
    net: &TwoLayerNet,
    current: &TokenSequence,
    current_value: f64,
    rng: &mut ChaCha8Rng,
    batch: usize,
) -> Result<StepOutcome> {
    let position = pick_free_position(problem, rng)?;
    let candidates: Vec<usize> =
        (0..batch).map(|_| rng.gen_range(0..problem.vocab())).collect();
    evaluate_candidates(net, current, current_value, position, &candidates)
}

/// One greedy-random iteration: pick a free position uniformly, sample
/// `batch` candidate tokens uniformly with replacement, evaluate every
/// substitution and keep the best (the incumbent wins value ties).
pub fn greedy_random_step(
    problem: &SuffixProblem,
    net: &TwoLayerNet,
    current: &TokenSequence,
    rng: &mut ChaCha8Rng,
    batch: usize,
) -> Result<(TokenSequence, f64)> {
    if batch == 0 {
        return Err(FhError::InvalidParameter("batch must be >= 1".into()));
    }
    problem.validate_seq(current)?;
    let current_value = net.forward(current)?;
    let out = greedy_random_outcome(problem, net, current, current_value, rng, batch)?;
    Ok((out.seq, out.value))
}

/// Top candidate tokens at one position under the input-gradient ranking:
/// ascending partial derivative, i.e. descending predicted decrease of the
/// objective; ties broken by lower token index.
pub fn gradient_ranked_candidates(
    problem: &SuffixProblem,
    net: &TwoLayerNet,
    current: &TokenSequence,
    position: usize,
    top_k: usize,
) -> Result<Vec<usize>> {
    problem.validate_seq(current)?;
    if !problem.is_free(position) {
        return Err(FhError::InvalidParameter(format!("position {position} is not free")));
    }
    if top_k == 0 || top_k > problem.vocab() {
        return Err(FhError::InvalidParameter(format!(
            "top_k must be in [1, {}], got {top_k}",
            problem.vocab()
        )));
    }
    let grad = net.grad_input(current)?;
    let mut order = grad.ranked_tokens(position);
    order.truncate(top_k);
    Ok(order)
}

fn gradient_greedy_outcome(
    problem: &SuffixProblem,
    net: &TwoLayerNet,
    current: &TokenSequence,
    current_value: f64,
    rng: &mut ChaCha8Rng,
    top_k: usize,
) -> Result<StepOutcome> {
    let position = pick_free_position(problem, rng)?;
    let candidates = gradient_ranked_candidates(problem, net, current, position, top_k)?;
    let mut out = evaluate_candidates(net, current, current_value, position, &candidates)?;
    out.grad_evals = 1;
    Ok(out)
}

/// Greedy single-substitution search until the stop threshold is reached or
/// the iteration budget is exhausted. The trace records every iteration;
/// accepted incumbent values are nonincreasing; a fixed strategy seed makes
/// the run bit-reproducible.
pub fn greedy_search(
    problem: &SuffixProblem,
    p: &ParamState,
    init: &TokenSequence,
    budget: &SearchBudget,
    strategy: &SearchStrategy,
) -> Result<SearchTrace> {
    strategy.validate()?;
    problem.validate_params(p)?;
    problem.validate_seq(init)?;
    let net = TwoLayerNet::from_params(p)?;

    if let SearchStrategy::BruteForce = strategy {
        let (seq, value) = brute_force_min_with_net(problem, &net, init)?;
        return Ok(SearchTrace {
            records: Vec::new(),
            final_value: value,
            success: value <= budget.stop_threshold,
            final_seq: seq,
            iterations_used: 0,
            candidate_evals: 0,
            gradient_evals: 0,
        });
    }

    let mut current = init.clone();
    let mut value = net.forward(&current)?;
    let mut records = Vec::new();
    let mut candidate_evals = 0;
    let mut gradient_evals = 0;
    let mut iterations_used = 0;
    let mut success = value <= budget.stop_threshold;

    if !success {
        let mut rng = match strategy {
            SearchStrategy::GreedyRandom { seed, .. }
            | SearchStrategy::GradientGreedy { seed, .. } => ChaCha8Rng::seed_from_u64(*seed),
            SearchStrategy::BruteForce => unreachable!(),
        };
        for iter in 0..budget.max_iterations {
            let out = match strategy {
                SearchStrategy::GreedyRandom { batch, .. } => {
                    greedy_random_outcome(problem, &net, &current, value, &mut rng, *batch)?
                }
                SearchStrategy::GradientGreedy { top_k, .. } => {
                    gradient_greedy_outcome(problem, &net, &current, value, &mut rng, *top_k)?
                }
                SearchStrategy::BruteForce => unreachable!(),
            };
            current = out.seq;
            value = out.value;
            candidate_evals += out.evals;
            gradient_evals += out.grad_evals;
            iterations_used = iter + 1;
            records.push(IterRecord {
                iter,
                position: out.position,
                token: out.token,
                value,
                accepted: out.accepted,
            });
            if value <= budget.stop_threshold {
                success = true;
                break;
            }
        }
    }

    Ok(SearchTrace {
        records,
        final_seq: current,
        final_value: value,
        success,
        iterations_used,
        candidate_evals,
        gradient_evals,
    })
}

fn brute_force_min_with_net(
    problem: &SuffixProblem,
    net: &TwoLayerNet,
    template: &TokenSequence,
) -> Result<(TokenSequence, f64)> {
    let free = problem.free_positions();
    let space = (free.len() as f64) * (problem.vocab() as f64).ln();
    if space > MIN_ORACLE_MAX_SPACE.ln() + 1e-9 {
        return Err(FhError::GuardExceeded(format!(
            "brute_force_min enumerates |V|^free assignments and is limited to {MIN_ORACLE_MAX_SPACE} (2^24); got {}^{}",
            problem.vocab(),
            free.len()
        )));
    }
    // Odometer over free positions: the leftmost free position is the most
    // significant digit, so assignments appear in ascending lexicographic
    // order and the first strict minimum is the lexicographic minimizer.
    let mut digits = vec![0usize; free.len()];
    let mut current = template.clone();
    for &pos in free {
        current = current.substitute(pos, 0);
    }
    let mut best_seq = current.clone();
    let mut best_val = net.forward(&current)?;
    loop {
        // Advance the odometer (rightmost digit fastest).
        let mut carry_at = free.len();
        for di in (0..free.len()).rev() {
            if digits[di] + 1 < problem.vocab() {
                digits[di] += 1;
                current = current.substitute(free[di], digits[di]);
                carry_at = di;
                break;
            }
            digits[di] = 0;
            current = current.substitute(free[di], 0);
        }
        if carry_at == free.len() {
            break; // wrapped: enumeration complete
        }
        let val = net.forward(&current)?;
        if val < best_val {
            best_val = val;
            best_seq = current.clone();
        }
    }
    Ok((best_seq, best_val))
}

/// Exact global minimizer over all assignments of the free positions
/// (lexicographic tie-break). Guarded to spaces of at most 2^24 points.
pub fn brute_force_min(problem: &SuffixProblem, p: &ParamState) -> Result<(TokenSequence, f64)> {
    problem.validate_params(p)?;
    let net = TwoLayerNet::from_params(p)?;
    let mut template = TokenSequence::zeros(problem.positions(), problem.vocab())?;
    for (pos, &tok) in problem.prefix().iter().enumerate() {
        template = template.substitute(pos, tok);
    }
    brute_force_min_with_net(problem, &net, &template)
}
