//! 3CNF formulas and their compilation into two-layer network objectives.
//!
//! A formula with `m` variables and `k` clauses compiles to a net over
//! vocabulary {0, 1} (token index = truth value) with one hidden clause node
//! per clause. The clause node computes the saturating ramp of the sum of its
//! literal values, which on binary inputs is exactly the clause truth value,
//! and the output negates the sum of all clause nodes. The formula is
//! satisfiable exactly when some binary input drives the output to `-k`,
//! which makes compiled instances ground-truth-checkable by enumeration.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FhError, Result};
use crate::objective::{flat_index, Activation, NetShape, TwoLayerNet};

/// Enumeration guard for the satisfiability oracle.
pub const SAT_ORACLE_MAX_VARS: usize = 24;

/// A variable or its negation. Variable indices are 1-based as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn new(var: usize, negated: bool) -> Result<Self> {
        if var == 0 {
            return Err(FhError::InvalidParameter("variable indices are 1-based".into()));
        }
        Ok(Self { var, negated })
    }

    fn from_dimacs(value: i64) -> Result<Self> {
        if value == 0 {
            return Err(FhError::InvalidParameter("literal 0 is reserved".into()));
        }
        Ok(Self { var: value.unsigned_abs() as usize, negated: value < 0 })
    }

    fn to_dimacs(self) -> i64 {
        let v = self.var as i64;
        if self.negated {
            -v
        } else {
            v
        }
    }

    pub fn satisfied_by(self, assignment: &[bool]) -> bool {
        assignment[self.var - 1] != self.negated
    }
}

/// A disjunction of exactly three literals (repetition allowed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause(pub [Literal; 3]);

impl Clause {
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.0.iter().any(|l| l.satisfied_by(assignment))
    }
}

/// A 3CNF instance: `num_vars` variables and at least one clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        if clauses.is_empty() {
            return Err(FhError::InvalidParameter("a formula needs at least one clause".into()));
        }
        if num_vars == 0 {
            return Err(FhError::InvalidParameter("a formula needs at least one variable".into()));
        }
        for clause in &clauses {
            if let Some(l) = clause.0.iter().find(|l| l.var > num_vars) {
                return Err(FhError::InvalidParameter(format!(
                    "literal references variable {} but the formula has {num_vars}",
                    l.var
                )));
            }
        }
        Ok(Self { num_vars, clauses })
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        assignment.len() == self.num_vars && self.clauses.iter().all(|c| c.satisfied_by(assignment))
    }

    /// Serialize in the same simplified DIMACS dialect accepted by
    /// [`parse_dimacs`].
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            let l = clause.0;
            out.push_str(&format!(
                "{} {} {} 0\n",
                l[0].to_dimacs(),
                l[1].to_dimacs(),
                l[2].to_dimacs()
            ));
        }
        out
    }
}

/// Parse the simplified DIMACS CNF dialect: optional `c` comment lines, one
/// `p cnf <vars> <clauses>` header, then clauses of exactly three literals
/// each terminated by `0`. A clause must not span lines.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(FhError::Parse { line: lineno, msg: "duplicate p-line".into() });
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[1] != "cnf" {
                return Err(FhError::Parse {
                    line: lineno,
                    msg: format!("malformed header {line:?}, expected 'p cnf <vars> <clauses>'"),
                });
            }
            let vars = fields[2].parse::<usize>().map_err(|_| FhError::Parse {
                line: lineno,
                msg: format!("bad variable count {:?}", fields[2]),
            })?;
            let count = fields[3].parse::<usize>().map_err(|_| FhError::Parse {
                line: lineno,
                msg: format!("bad clause count {:?}", fields[3]),
            })?;
            header = Some((vars, count));
            continue;
        }

        let (num_vars, _) = header.ok_or(FhError::Parse {
            line: lineno,
            msg: "clause before the p-line".into(),
        })?;
        let mut literals = Vec::new();
        let mut terminated = false;
        for field in line.split_whitespace() {
            let value = field.parse::<i64>().map_err(|_| FhError::Parse {
                line: lineno,
                msg: format!("bad literal {field:?}"),
            })?;
            if value == 0 {
                terminated = true;
                break;
            }
            let lit = Literal::from_dimacs(value)
                .map_err(|e| FhError::Parse { line: lineno, msg: e.to_string() })?;
            if lit.var > num_vars {
                return Err(FhError::Parse {
                    line: lineno,
                    msg: format!("variable {} out of range (header declares {num_vars})", lit.var),
                });
            }
            literals.push(lit);
        }
        if !terminated {
            return Err(FhError::Parse { line: lineno, msg: "clause not terminated by 0".into() });
        }
        if literals.len() != 3 {
            return Err(FhError::Parse {
                line: lineno,
                msg: format!("clause has {} literals, expected exactly 3", literals.len()),
            });
        }
        clauses.push(Clause([literals[0], literals[1], literals[2]]));
    }

    let (num_vars, declared) =
        header.ok_or(FhError::Parse { line: 1, msg: "missing p-line".into() })?;
    if clauses.len() != declared {
        return Err(FhError::Parse {
            line: 1,
            msg: format!("header declares {declared} clauses but {} were given", clauses.len()),
        });
    }
    CnfFormula::new(num_vars, clauses)
        .map_err(|e| FhError::Parse { line: 1, msg: e.to_string() })
}

/// A formula together with its compiled network objective. The threshold is
/// `-k`: the formula is satisfiable iff some binary input reaches it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledInstance {
    pub net: TwoLayerNet,
    pub formula: CnfFormula,
    pub threshold: f64,
}

impl CompiledInstance {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: CompiledInstance = serde_json::from_str(text)?;
        if inst.net.shape.positions != inst.formula.num_vars
            || inst.net.shape.vocab != 2
            || inst.threshold != -(inst.formula.num_clauses() as f64)
        {
            return Err(FhError::Integrity(
                "compiled instance metadata disagrees with its formula".into(),
            ));
        }
        Ok(inst)
    }
}

/// Compile a formula into its network objective.
///
/// Literal affine maps are folded into W1: a positive literal on variable `v`
/// puts weight 1 on the true-token column of position `v - 1`, a negated one
/// on the false-token column (`1 - x` equals the false indicator on one-hot
/// rows). Each clause node is the ramp of its literal sum; the single output
/// is the negated sum of clause nodes with zero bias. Compilation is
/// deterministic: the same formula yields a bit-identical network.
pub fn compile_to_network(formula: &CnfFormula) -> Result<CompiledInstance> {
    let m = formula.num_vars;
    let k = formula.num_clauses();
    let shape = NetShape {
        positions: m,
        vocab: 2,
        hidden: k,
        outputs: 1,
        activation: Activation::StepLike,
    };
    let d = shape.input_dim();
    let mut w1 = vec![0.0; k * d];
    for (j, clause) in formula.clauses.iter().enumerate() {
        for lit in &clause.0 {
            let column = flat_index(2, lit.var - 1, usize::from(!lit.negated));
            w1[j * d + column] += 1.0;
        }
    }
    let net = TwoLayerNet::new(shape, w1, vec![0.0; k], vec![-1.0; k], vec![0.0])?;
    Ok(CompiledInstance { net, formula: formula.clone(), threshold: -(k as f64) })
}

/// Assignment enumerated at index `u`: X1-major, false before true, so
/// assignments appear in ascending lexicographic order as `u` counts up.
fn assignment_at(u: u64, num_vars: usize) -> Vec<bool> {
    (0..num_vars).map(|i| (u >> (num_vars - 1 - i)) & 1 == 1).collect()
}

/// Exhaustive satisfiability oracle. Returns the lexicographically first
/// model (X1-major, false-before-true ordering) or `None`.
pub fn brute_force_sat(formula: &CnfFormula) -> Result<Option<Vec<bool>>> {
    let m = formula.num_vars;
    if m > SAT_ORACLE_MAX_VARS {
        return Err(FhError::GuardExceeded(format!(
            "brute_force_sat enumerates 2^m assignments and is limited to m <= {SAT_ORACLE_MAX_VARS}, got m = {m}"
        )));
    }
    for u in 0..(1u64 << m) {
        let assignment = assignment_at(u, m);
        if formula.satisfied_by(&assignment) {
            return Ok(Some(assignment));
        }
    }
    Ok(None)
}

fn check_generator_args(m: usize, k: usize) -> Result<()> {
    if m < 3 {
        return Err(FhError::InvalidParameter(format!(
            "need at least 3 variables to draw distinct literals, got m = {m}"
        )));
    }
    if k == 0 {
        return Err(FhError::InvalidParameter("need at least one clause".into()));
    }
    Ok(())
}

fn random_clause(rng: &mut ChaCha8Rng, m: usize) -> Clause {
    let vars = sample(rng, m, 3);
    let mut literals = [Literal { var: 1, negated: false }; 3];
    for (slot, var) in literals.iter_mut().zip(vars.iter()) {
        *slot = Literal { var: var + 1, negated: rng.gen_bool(0.5) };
    }
    Clause(literals)
}

/// Uniform random 3CNF: every clause draws 3 distinct variables, each negated
/// with probability 1/2. Deterministic given the seed.
pub fn random_3cnf(m: usize, k: usize, seed: u64) -> Result<CnfFormula> {
    check_generator_args(m, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..k).map(|_| random_clause(&mut rng, m)).collect();
    CnfFormula::new(m, clauses)
}

/// Planted random 3CNF: draws a hidden assignment, then samples clauses
/// uniformly among those it satisfies (rejection sampling), so the result is
/// satisfiable by construction. Returns the formula and the hidden model.
pub fn planted_3cnf(m: usize, k: usize, seed: u64) -> Result<(CnfFormula, Vec<bool>)> {
    check_generator_args(m, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
    let mut clauses = Vec::with_capacity(k);
    while clauses.len() < k {
        let clause = random_clause(&mut rng, m);
        if clause.satisfied_by(&hidden) {
            clauses.push(clause);
        }
    }
    Ok((CnfFormula::new(m, clauses)?, hidden))
}

/// Token sequence for an assignment under the instance vocabulary (token
/// index = truth value).
pub fn assignment_to_tokens(assignment: &[bool]) -> crate::objective::TokenSequence {
    let tokens = assignment.iter().map(|&b| usize::from(b)).collect();
    crate::objective::TokenSequence::new(tokens, 2).expect("binary tokens are always valid")
}
