//! Per-position token rankings and rank-biased overlap scoring.
//!
//! Three rankings of the vocabulary at a position are compared: the ground
//! truth (every substitution evaluated, best objective first), the gradient
//! ranking (predicted decrease under the linear approximation) and a uniform
//! random permutation baseline. Agreement is scored with extrapolated
//! rank-biased overlap, a top-weighted similarity in [0, 1] with persistence
//! parameter `p`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FhError, Result};
use crate::objective::{ParamState, SuffixProblem, TokenSequence, TwoLayerNet};
use crate::search::sweep_position;

/// Sweep guard: positions are only ranked exhaustively for vocabularies up
/// to this size.
pub const SWEEP_GUARD_MAX_VOCAB: usize = 65_536;

/// An ordered list of distinct token indices drawn from `0..universe`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
    universe: usize,
}

impl Ranking {
    pub fn new(order: Vec<usize>, universe: usize) -> Result<Self> {
        let mut seen = vec![false; universe];
        for &tok in &order {
            if tok >= universe {
                return Err(FhError::InvalidParameter(format!(
                    "token {tok} outside universe of size {universe}"
                )));
            }
            if seen[tok] {
                return Err(FhError::InvalidParameter(format!("duplicate token {tok}")));
            }
            seen[tok] = true;
        }
        Ok(Self { order, universe })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Persistence and evaluation depth for rank-biased overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboParams {
    /// Probability of looking one rank deeper; must lie in (0, 1).
    pub persistence: f64,
    /// Prefix depth evaluated; must be >= 1 and within both lists.
    pub depth: usize,
}

impl RboParams {
    pub fn new(persistence: f64, depth: usize) -> Result<Self> {
        if !(persistence > 0.0 && persistence < 1.0) {
            return Err(FhError::InvalidParameter(format!(
                "persistence must lie in (0, 1), got {persistence}"
            )));
        }
        if depth == 0 {
            return Err(FhError::InvalidParameter("depth must be >= 1".into()));
        }
        Ok(Self { persistence, depth })
    }

    /// Full-depth comparison at the conventional persistence 0.99.
    pub fn full_depth(universe: usize) -> Result<Self> {
        Self::new(0.99, universe)
    }
}

fn order_by_scores(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(FhError::NonFinite("ranking scores must be finite".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    Ok(order)
}

fn check_sweep(problem: &SuffixProblem, position: usize) -> Result<()> {
    if !problem.is_free(position) {
        return Err(FhError::InvalidParameter(format!("position {position} is not free")));
    }
    if problem.vocab() > SWEEP_GUARD_MAX_VOCAB {
        return Err(FhError::GuardExceeded(format!(
            "per-position sweeps are limited to vocabularies of {SWEEP_GUARD_MAX_VOCAB}, got {}",
            problem.vocab()
        )));
    }
    Ok(())
}

/// Ground-truth ranking: every token substituted at the position, objective
/// evaluated, tokens ordered best (lowest value) first; ties broken by lower
/// token index.
pub fn ground_truth_ranking(
    problem: &SuffixProblem,
    p: &ParamState,
    x: &TokenSequence,
    position: usize,
) -> Result<Ranking> {
    check_sweep(problem, position)?;
    problem.validate_params(p)?;
    let net = TwoLayerNet::from_params(p)?;
    let sweep = sweep_position(problem, &net, x, position)?;
    let values: Vec<f64> = sweep.iter().map(|&(_, v)| v).collect();
    Ranking::new(order_by_scores(&values)?, problem.vocab())
}

/// Gradient ranking: tokens ordered by descending predicted decrease of the
/// objective, i.e. ascending partial derivative at the relaxed one-hot
/// input; ties broken by lower token index.
pub fn gradient_ranking(
    problem: &SuffixProblem,
    p: &ParamState,
    x: &TokenSequence,
    position: usize,
) -> Result<Ranking> {
    check_sweep(problem, position)?;
    problem.validate_params(p)?;
    problem.validate_seq(x)?;
    let net = TwoLayerNet::from_params(p)?;
    let grad = net.grad_input(x)?;
    Ranking::new(grad.ranked_tokens(position), problem.vocab())
}

/// Uniform random permutation of the universe, deterministic given the seed
/// (rand's Fisher-Yates shuffle, swapping from the back).
pub fn random_ranking(universe: usize, seed: u64) -> Result<Ranking> {
    if universe == 0 {
        return Err(FhError::InvalidParameter("universe must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..universe).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    Ranking::new(order, universe)
}

/// Extrapolated rank-biased overlap.
///
/// With `X_d` the size of the intersection of the two depth-`d` prefixes,
/// `A_d = X_d / d` the agreement at depth `d`, and `k` the evaluation depth:
///
/// ```text
/// rbo_ext = A_k * p^k + ((1 - p) / p) * sum_{d=1..k} A_d * p^d
/// ```
///
/// Symmetric in its arguments and lies in [0, 1]. Evaluated as the backward
/// Horner recurrence `acc_k = A_k`, `acc_d = (1 - p) * A_d + p * acc_{d+1}`,
/// which is the same polynomial but returns exactly 1.0 when the prefixes
/// agree at every depth up to `k`.
pub fn rbo_ext(s: &Ranking, t: &Ranking, params: &RboParams) -> Result<f64> {
    if s.universe != t.universe {
        return Err(FhError::DimensionMismatch(format!(
            "rankings over different universes ({} vs {})",
            s.universe, t.universe
        )));
    }
    let k = params.depth;
    if k > s.len() || k > t.len() {
        return Err(FhError::InvalidParameter(format!(
            "depth {k} exceeds a ranking length ({}, {})",
            s.len(),
            t.len()
        )));
    }
    let p = params.persistence;
    let mut seen_s = vec![false; s.universe];
    let mut seen_t = vec![false; t.universe];
    let mut overlap = 0usize;
    let mut agreement = Vec::with_capacity(k);
    for d in 1..=k {
        let si = s.order[d - 1];
        let ti = t.order[d - 1];
        if si == ti {
            overlap += 1;
        } else {
            if seen_t[si] {
                overlap += 1;
            }
            if seen_s[ti] {
                overlap += 1;
            }
        }
        seen_s[si] = true;
        seen_t[ti] = true;
        agreement.push(overlap as f64 / d as f64);
    }
    let mut acc = agreement[k - 1];
    for d in (0..k - 1).rev() {
        acc = (1.0 - p) * agreement[d] + p * acc;
    }
    Ok(acc)
}
