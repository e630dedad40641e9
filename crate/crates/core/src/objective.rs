//! Parameterized differentiable objectives over one-hot encoded token
//! sequences.
//!
//! The objective family is a one-hidden-layer network
//! `f(e) = W2 s(W1 e + b1) + b2` evaluated on the flattened one-hot encoding
//! `e` of a token sequence. Both gradients are exact:
//! [`TwoLayerNet::grad_params`] backpropagates into every trainable entry and
//! [`TwoLayerNet::grad_input`] differentiates with respect to the relaxed
//! one-hot coordinates. All arithmetic is `f64`; all operations are pure.

use serde::{Deserialize, Serialize};

use crate::error::{FhError, Result};

/// One-hot flattening order: position-major, vocabulary index within a
/// position. Used everywhere an encoding is flattened.
#[inline]
pub fn flat_index(vocab: usize, position: usize, token: usize) -> usize {
    position * vocab + token
}

// ---------------------------------------------------------------------------
// Token sequences and encodings
// ---------------------------------------------------------------------------

/// A fixed-length sequence of token indices from a finite vocabulary; the
/// discrete optimization variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<usize>,
    vocab: usize,
}

impl TokenSequence {
    /// Build a sequence, checking every index against the vocabulary size.
    pub fn new(tokens: Vec<usize>, vocab: usize) -> Result<Self> {
        if vocab == 0 {
            return Err(FhError::InvalidParameter("vocabulary size must be >= 1".into()));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab) {
            return Err(FhError::InvalidParameter(format!(
                "token index {bad} out of range for vocabulary of size {vocab}"
            )));
        }
        Ok(Self { tokens, vocab })
    }

    /// The all-zeros sequence of length `n`.
    pub fn zeros(n: usize, vocab: usize) -> Result<Self> {
        Self::new(vec![0; n], vocab)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    /// Copy of `self` with one position substituted.
    ///
    /// Panics if `position` or `token` is out of range; callers validate at
    /// the search boundary.
    pub fn substitute(&self, position: usize, token: usize) -> Self {
        assert!(position < self.tokens.len() && token < self.vocab);
        let mut tokens = self.tokens.clone();
        tokens[position] = token;
        Self { tokens, vocab: self.vocab }
    }

    /// Flattened one-hot encoding (length `n * vocab`, entries 0.0/1.0).
    pub fn one_hot(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.tokens.len() * self.vocab];
        for (pos, &tok) in self.tokens.iter().enumerate() {
            e[flat_index(self.vocab, pos, tok)] = 1.0;
        }
        e
    }

    /// Inverse of [`TokenSequence::one_hot`]. Requires exactly one 1.0 per row.
    pub fn from_one_hot(encoding: &[f64], positions: usize, vocab: usize) -> Result<Self> {
        if encoding.len() != positions * vocab {
            return Err(FhError::DimensionMismatch(format!(
                "encoding length {} != {positions} x {vocab}",
                encoding.len()
            )));
        }
        let mut tokens = Vec::with_capacity(positions);
        for pos in 0..positions {
            let row = &encoding[pos * vocab..(pos + 1) * vocab];
            let ones: Vec<usize> =
                row.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| i).collect();
            if ones.len() != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(FhError::InvalidParameter(format!(
                    "row {pos} is not a one-hot row"
                )));
            }
            tokens.push(ones[0]);
        }
        Self::new(tokens, vocab)
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// Hidden-layer activation.
///
/// `StepLike` is the saturating ramp `relu(z) - relu(z - 1)`: 0 for z <= 0,
/// z on (0, 1), 1 for z >= 1. Slope conventions at the nondifferentiable
/// points are fixed: `Relu` uses 0 at z = 0; `StepLike` uses the right
/// derivative 1 at z = 0 (the secant slope of the whole ramp, so a unit flip
/// from the foot of the ramp is predicted exactly) and 0 at z = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    StepLike,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::StepLike => z.clamp(0.0, 1.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative used by backpropagation (see type docs for kink choices).
    pub fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::StepLike => {
                if (0.0..1.0).contains(&z) {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Network, parameter vectors, gradients
// ---------------------------------------------------------------------------

/// Shape metadata shared by a network and its flattened parameter vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub positions: usize,
    pub vocab: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl NetShape {
    pub fn input_dim(&self) -> usize {
        self.positions * self.vocab
    }

    /// Number of trainable entries: W1, b1, W2, b2.
    pub fn param_count(&self) -> usize {
        self.hidden * self.input_dim() + self.hidden + self.outputs * self.hidden + self.outputs
    }
}

/// One-hidden-layer network over flattened one-hot inputs.
///
/// `w1` is `hidden x input_dim` row-major, `w2` is `outputs x hidden`
/// row-major. The scalar objective is output component 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerNet {
    pub shape: NetShape,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl TwoLayerNet {
    pub fn new(
        shape: NetShape,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        let d = shape.input_dim();
        if w1.len() != shape.hidden * d
            || b1.len() != shape.hidden
            || w2.len() != shape.outputs * shape.hidden
            || b2.len() != shape.outputs
        {
            return Err(FhError::DimensionMismatch(format!(
                "weight lengths ({}, {}, {}, {}) inconsistent with shape {:?}",
                w1.len(),
                b1.len(),
                w2.len(),
                b2.len(),
                shape
            )));
        }
        if shape.outputs == 0 || shape.hidden == 0 || d == 0 {
            return Err(FhError::InvalidParameter("all net dimensions must be >= 1".into()));
        }
        for (name, arr) in [("w1", &w1), ("b1", &b1), ("w2", &w2), ("b2", &b2)] {
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(FhError::NonFinite(format!("{name} contains a non-finite entry")));
            }
        }
        Ok(Self { shape, w1, b1, w2, b2 })
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    fn check_input(&self, x: &TokenSequence) -> Result<()> {
        if x.len() != self.shape.positions || x.vocab() != self.shape.vocab {
            return Err(FhError::DimensionMismatch(format!(
                "sequence ({} positions, vocab {}) does not match net ({} positions, vocab {})",
                x.len(),
                x.vocab(),
                self.shape.positions,
                self.shape.vocab
            )));
        }
        Ok(())
    }

    /// Hidden pre-activations at a one-hot input. Only the active column per
    /// position contributes, so this is O(hidden * positions).
    fn pre_activations(&self, x: &TokenSequence) -> Vec<f64> {
        let d = self.shape.input_dim();
        let v = self.shape.vocab;
        let mut z = self.b1.clone();
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &self.w1[i * d..(i + 1) * d];
            for (pos, &tok) in x.tokens().iter().enumerate() {
                *zi += row[flat_index(v, pos, tok)];
            }
        }
        z
    }

    fn output_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        let mut y = self.b2.clone();
        for (j, yj) in y.iter_mut().enumerate() {
            let row = &self.w2[j * self.shape.hidden..(j + 1) * self.shape.hidden];
            for (i, &hi) in h.iter().enumerate() {
                *yj += row[i] * hi;
            }
        }
        y
    }

    /// Objective value `f(x)`: output component 0.
    pub fn forward(&self, x: &TokenSequence) -> Result<f64> {
        self.check_input(x)?;
        let z = self.pre_activations(x);
        let h: Vec<f64> = z.iter().map(|&zi| self.shape.activation.apply(zi)).collect();
        Ok(self.output_from_hidden(&h)[0])
    }

    /// Objective value at a relaxed (not necessarily one-hot) encoding.
    /// Used by finite-difference oracles and the linear-approximation checks.
    pub fn forward_relaxed(&self, encoding: &[f64]) -> Result<f64> {
        let d = self.shape.input_dim();
        if encoding.len() != d {
            return Err(FhError::DimensionMismatch(format!(
                "encoding length {} != input dim {d}",
                encoding.len()
            )));
        }
        let mut z = self.b1.clone();
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &self.w1[i * d..(i + 1) * d];
            for (col, &e) in encoding.iter().enumerate() {
                *zi += row[col] * e;
            }
        }
        let h: Vec<f64> = z.iter().map(|&zi| self.shape.activation.apply(zi)).collect();
        Ok(self.output_from_hidden(&h)[0])
    }

    /// Exact gradient of `forward` with respect to every trainable entry,
    /// flattened in [`ParamState`] order.
    pub fn grad_params(&self, x: &TokenSequence) -> Result<ParamGradient> {
        self.check_input(x)?;
        let shape = self.shape;
        let d = shape.input_dim();
        let v = shape.vocab;
        let z = self.pre_activations(x);
        let h: Vec<f64> = z.iter().map(|&zi| shape.activation.apply(zi)).collect();

        // d f / d z_i, backpropagated from output 0 through the activation.
        let gz: Vec<f64> =
            (0..shape.hidden).map(|i| self.w2[i] * shape.activation.slope(z[i])).collect();

        let mut gw1 = vec![0.0; shape.hidden * d];
        for (i, &gzi) in gz.iter().enumerate() {
            if gzi == 0.0 {
                continue;
            }
            // e is one-hot: only the active column per position is nonzero.
            for (pos, &tok) in x.tokens().iter().enumerate() {
                gw1[i * d + flat_index(v, pos, tok)] = gzi;
            }
        }
        let gb1 = gz.clone();

        let mut gw2 = vec![0.0; shape.outputs * shape.hidden];
        gw2[..shape.hidden].copy_from_slice(&h);
        let mut gb2 = vec![0.0; shape.outputs];
        gb2[0] = 1.0;

        let mut values = Vec::with_capacity(shape.param_count());
        values.extend_from_slice(&gw1);
        values.extend_from_slice(&gb1);
        values.extend_from_slice(&gw2);
        values.extend_from_slice(&gb2);
        Ok(ParamGradient { shape, values })
    }

    /// Exact gradient of `forward` with respect to the relaxed one-hot
    /// coordinates: an `n x vocab` matrix of partials.
    pub fn grad_input(&self, x: &TokenSequence) -> Result<InputGradient> {
        self.check_input(x)?;
        let shape = self.shape;
        let d = shape.input_dim();
        let z = self.pre_activations(x);
        let gz: Vec<f64> =
            (0..shape.hidden).map(|i| self.w2[i] * shape.activation.slope(z[i])).collect();

        let mut values = vec![0.0; d];
        for (i, &gzi) in gz.iter().enumerate() {
            if gzi == 0.0 {
                continue;
            }
            let row = &self.w1[i * d..(i + 1) * d];
            for (col, val) in values.iter_mut().enumerate() {
                *val += gzi * row[col];
            }
        }
        Ok(InputGradient { positions: shape.positions, vocab: shape.vocab, values })
    }

    /// Flatten into a parameter vector with the given step index.
    pub fn to_params(&self, step: usize) -> ParamState {
        let mut values = Vec::with_capacity(self.shape.param_count());
        values.extend_from_slice(&self.w1);
        values.extend_from_slice(&self.b1);
        values.extend_from_slice(&self.w2);
        values.extend_from_slice(&self.b2);
        ParamState { shape: self.shape, values, step }
    }

    /// Rebuild a network from a flattened parameter vector.
    pub fn from_params(p: &ParamState) -> Result<Self> {
        let shape = p.shape;
        let d = shape.input_dim();
        if p.values.len() != shape.param_count() {
            return Err(FhError::DimensionMismatch(format!(
                "parameter vector length {} != {}",
                p.values.len(),
                shape.param_count()
            )));
        }
        let mut at = 0;
        let mut take = |n: usize| {
            let s = p.values[at..at + n].to_vec();
            at += n;
            s
        };
        let w1 = take(shape.hidden * d);
        let b1 = take(shape.hidden);
        let w2 = take(shape.outputs * shape.hidden);
        let b2 = take(shape.outputs);
        Self::new(shape, w1, b1, w2, b2)
    }

    /// Self-describing JSON document: shape metadata, activation kind, flat
    /// weight arrays. Round-trips bit-exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("net serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: TwoLayerNet = serde_json::from_str(text)?;
        // Re-run construction checks on untrusted input.
        TwoLayerNet::new(net.shape, net.w1, net.b1, net.w2, net.b2)
    }
}

/// Flattened trainable parameters plus shape metadata and a step index.
/// Flattening order: W1 row-major, b1, W2 row-major, b2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamState {
    pub shape: NetShape,
    pub values: Vec<f64>,
    pub step: usize,
}

/// Gradient with the same flattening as [`ParamState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub shape: NetShape,
    pub values: Vec<f64>,
}

/// One plain gradient-descent step: `p' = p - lr * g`, step index + 1.
pub fn sgd_step(p: &ParamState, g: &ParamGradient, lr: f64) -> Result<ParamState> {
    if !lr.is_finite() || lr <= 0.0 {
        return Err(FhError::InvalidParameter(format!("learning rate must be positive, got {lr}")));
    }
    if p.shape != g.shape || p.values.len() != g.values.len() {
        return Err(FhError::DimensionMismatch(
            "parameter and gradient shapes disagree".into(),
        ));
    }
    if g.values.iter().any(|v| !v.is_finite()) {
        return Err(FhError::NonFinite("gradient contains a non-finite entry".into()));
    }
    let values = p.values.iter().zip(&g.values).map(|(pi, gi)| pi - lr * gi).collect();
    Ok(ParamState { shape: p.shape, values, step: p.step + 1 })
}

/// Gradient with respect to the relaxed one-hot input, as an
/// `positions x vocab` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub positions: usize,
    pub vocab: usize,
    values: Vec<f64>,
}

impl InputGradient {
    pub fn at(&self, position: usize, token: usize) -> f64 {
        self.values[flat_index(self.vocab, position, token)]
    }

    pub fn row(&self, position: usize) -> &[f64] {
        &self.values[position * self.vocab..(position + 1) * self.vocab]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Tokens of one position ordered by ascending partial derivative, i.e.
    /// by descending predicted decrease of the objective under a one-token
    /// substitution; ties broken by lower token index.
    ///
    /// The predicted change of substituting token `b` for the current token
    /// `a` is `h_b - h_a` where `h` is this row; the `h_a` term is constant
    /// per position, so ordering by `h_b` alone suffices.
    pub fn ranked_tokens(&self, position: usize) -> Vec<usize> {
        let row = self.row(position);
        let mut order: Vec<usize> = (0..self.vocab).collect();
        order.sort_by(|&a, &b| {
            row[a].partial_cmp(&row[b]).expect("finite gradient entries").then(a.cmp(&b))
        });
        order
    }
}

// ---------------------------------------------------------------------------
// Surrogate loss
// ---------------------------------------------------------------------------

/// Log-probability surrogate `log(exp(f) / (exp(f) + C))`, evaluated with a
/// stable rearrangement (`-log1p(C * exp(-f))` for f > 0). Strictly
/// increasing in `f` and bounded above by 0, so it preserves minimizers and
/// sublevel-set membership under a transformed threshold.
pub fn surrogate_loss(f_value: f64, c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(FhError::InvalidParameter(format!("surrogate constant must be > 0, got {c}")));
    }
    if !f_value.is_finite() {
        return Err(FhError::NonFinite("surrogate input must be finite".into()));
    }
    if f_value > 0.0 {
        Ok(-(c * (-f_value).exp()).ln_1p())
    } else {
        Ok(f_value - (f_value.exp() + c).ln())
    }
}

// ---------------------------------------------------------------------------
// Suffix problems
// ---------------------------------------------------------------------------

/// A discrete minimization problem over a token sequence: a fixed prefix
/// (possibly empty) and the remaining free positions, with a success
/// threshold `a`. A sequence `x` succeeds when `F(p, x) <= a`, i.e. when it
/// lies in the threshold sublevel set of the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffixProblem {
    positions: usize,
    vocab: usize,
    prefix: Vec<usize>,
    free_positions: Vec<usize>,
    pub threshold: f64,
}

impl SuffixProblem {
    /// Prefix occupies positions `0..prefix.len()`; every remaining position
    /// is free. (Free positions are exactly the complement of the prefix, so
    /// every sequence is fully determined by prefix + free assignments.)
    pub fn new(positions: usize, vocab: usize, prefix: Vec<usize>, threshold: f64) -> Result<Self> {
        if prefix.len() > positions {
            return Err(FhError::InvalidParameter(format!(
                "prefix length {} exceeds sequence length {positions}",
                prefix.len()
            )));
        }
        if let Some(&bad) = prefix.iter().find(|&&t| t >= vocab) {
            return Err(FhError::InvalidParameter(format!(
                "prefix token {bad} out of range for vocabulary of size {vocab}"
            )));
        }
        if !threshold.is_finite() {
            return Err(FhError::NonFinite("threshold must be finite".into()));
        }
        if prefix.len() == positions {
            return Err(FhError::InvalidParameter(
                "no free positions: prefix covers the whole sequence".into(),
            ));
        }
        let free_positions = (prefix.len()..positions).collect();
        Ok(Self { positions, vocab, prefix, free_positions, threshold })
    }

    /// Problem over the full sequence (empty prefix), as used by compiled
    /// formula instances.
    pub fn full(positions: usize, vocab: usize, threshold: f64) -> Result<Self> {
        Self::new(positions, vocab, Vec::new(), threshold)
    }

    /// Problem matching a network's input shape.
    pub fn for_net(net: &TwoLayerNet, threshold: f64) -> Result<Self> {
        Self::full(net.shape.positions, net.shape.vocab, threshold)
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn free_positions(&self) -> &[usize] {
        &self.free_positions
    }

    pub fn is_free(&self, position: usize) -> bool {
        position >= self.prefix.len() && position < self.positions
    }

    /// Sublevel-set membership test: success means `value <= a`.
    pub fn is_success(&self, value: f64) -> bool {
        value <= self.threshold
    }

    /// Check a sequence against the problem dimensions and pinned prefix.
    pub fn validate_seq(&self, x: &TokenSequence) -> Result<()> {
        if x.len() != self.positions || x.vocab() != self.vocab {
            return Err(FhError::DimensionMismatch(format!(
                "sequence ({} positions, vocab {}) does not match problem ({}, {})",
                x.len(),
                x.vocab(),
                self.positions,
                self.vocab
            )));
        }
        for (pos, &want) in self.prefix.iter().enumerate() {
            if x.tokens()[pos] != want {
                return Err(FhError::InvalidParameter(format!(
                    "position {pos} is pinned to token {want} but sequence has {}",
                    x.tokens()[pos]
                )));
            }
        }
        Ok(())
    }

    /// Check that a parameter state can evaluate sequences of this problem.
    pub fn validate_params(&self, p: &ParamState) -> Result<()> {
        if p.shape.positions != self.positions || p.shape.vocab != self.vocab {
            return Err(FhError::DimensionMismatch(format!(
                "parameter shape ({} positions, vocab {}) does not match problem ({}, {})",
                p.shape.positions, p.shape.vocab, self.positions, self.vocab
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{finite_difference_input, finite_difference_params, random_net};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    fn single_clause_net() -> TwoLayerNet {
        // (X1 v X2 v X3) compiled by hand: one clause node over 3 positions,
        // vocab {0, 1}, true-literal columns 1, 3, 5.
        let shape = NetShape {
            positions: 3,
            vocab: 2,
            hidden: 1,
            outputs: 1,
            activation: Activation::StepLike,
        };
        let mut w1 = vec![0.0; 6];
        w1[1] = 1.0;
        w1[3] = 1.0;
        w1[5] = 1.0;
        TwoLayerNet::new(shape, w1, vec![0.0], vec![-1.0], vec![0.0]).unwrap()
    }

    #[test]
    fn forward_single_clause_values() {
        let net = single_clause_net();
        let sat = TokenSequence::new(vec![1, 0, 0], 2).unwrap();
        let unsat = TokenSequence::new(vec![0, 0, 0], 2).unwrap();
        assert_eq!(net.forward(&sat).unwrap(), -1.0);
        assert_eq!(net.forward(&unsat).unwrap(), 0.0);
    }

    #[test]
    fn forward_identity_matches_hand_affine() {
        // 2 positions, vocab 2, hidden 2, identity activation. The composite
        // is affine: f(e) = w2 . (W1 e + b1) + b2, computed by hand below.
        let shape = NetShape {
            positions: 2,
            vocab: 2,
            hidden: 2,
            outputs: 1,
            activation: Activation::Identity,
        };
        let w1 = vec![0.5, -1.0, 2.0, 0.25, 1.5, 0.75, -0.5, 1.0];
        let b1 = vec![0.1, -0.2];
        let w2 = vec![2.0, -3.0];
        let b2 = vec![0.4];
        let net = TwoLayerNet::new(shape, w1.clone(), b1.clone(), w2.clone(), b2.clone()).unwrap();

        for tokens in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let x = TokenSequence::new(tokens.to_vec(), 2).unwrap();
            let e = x.one_hot();
            let z0: f64 = b1[0] + (0..4).map(|c| w1[c] * e[c]).sum::<f64>();
            let z1: f64 = b1[1] + (0..4).map(|c| w1[4 + c] * e[c]).sum::<f64>();
            let expected = w2[0] * z0 + w2[1] * z1 + b2[0];
            // Association order differs between the oracle and the net.
            assert!((net.forward(&x).unwrap() - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = single_clause_net();
        let wrong_len = TokenSequence::new(vec![0, 0], 2).unwrap();
        assert!(matches!(net.forward(&wrong_len), Err(FhError::DimensionMismatch(_))));
        let wrong_vocab = TokenSequence::new(vec![0, 0, 0], 3).unwrap();
        assert!(matches!(net.forward(&wrong_vocab), Err(FhError::DimensionMismatch(_))));
    }

    #[test]
    fn step_like_matches_relu_difference() {
        for z in [-2.0, -0.5, 0.0, 0.25, 0.5, 0.99, 1.0, 1.5, 7.0] {
            let via_relu = Activation::Relu.apply(z) - Activation::Relu.apply(z - 1.0);
            assert_eq!(Activation::StepLike.apply(z), via_relu);
        }
    }

    #[test]
    fn grad_b2_is_one_for_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = random_net(&mut rng, 3, 4, 5, Activation::Identity);
        let x = TokenSequence::new(vec![1, 0, 3], 4).unwrap();
        let g = net.grad_params(&x).unwrap();
        let b2_at = net.shape.param_count() - net.shape.outputs;
        assert_eq!(g.values[b2_at], 1.0);
    }

    #[test]
    fn zero_w2_kills_w1_gradient() {
        let shape = NetShape {
            positions: 2,
            vocab: 3,
            hidden: 4,
            outputs: 1,
            activation: Activation::Sigmoid,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w1: Vec<f64> = (0..4 * 6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b1: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let net = TwoLayerNet::new(shape, w1, b1, vec![0.0; 4], vec![0.2]).unwrap();
        let x = TokenSequence::new(vec![2, 1], 3).unwrap();
        let g = net.grad_params(&x).unwrap();
        let w1_len = 4 * 6;
        assert!(g.values[..w1_len].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_params_matches_finite_differences() {
        // 20 random generic points for the smooth activations; kink-avoiding
        // points for the piecewise-linear ones.
        for activation in
            [Activation::Identity, Activation::Sigmoid, Activation::Relu, Activation::StepLike]
        {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut checked = 0;
            while checked < 20 {
                let net = random_net(&mut rng, 3, 3, 4, activation);
                let tokens = (0..3).map(|_| rng.gen_range(0..3)).collect();
                let x = TokenSequence::new(tokens, 3).unwrap();
                if matches!(activation, Activation::Relu | Activation::StepLike) {
                    let z = net.pre_activations(&x);
                    if z.iter().any(|&zi| zi.abs() < 1e-3 || (zi - 1.0).abs() < 1e-3) {
                        continue;
                    }
                }
                let analytic = net.grad_params(&x).unwrap();
                let numeric = finite_difference_params(&net, &x, 1e-5);
                for (a, n) in analytic.values.iter().zip(&numeric) {
                    let scale = a.abs().max(n.abs()).max(1.0);
                    assert!(
                        (a - n).abs() <= 1e-6 * scale,
                        "{activation:?}: analytic {a} vs numeric {n}"
                    );
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn grad_input_matches_finite_differences() {
        for activation in
            [Activation::Identity, Activation::Sigmoid, Activation::Relu, Activation::StepLike]
        {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut checked = 0;
            while checked < 20 {
                let net = random_net(&mut rng, 3, 3, 4, activation);
                let tokens = (0..3).map(|_| rng.gen_range(0..3)).collect();
                let x = TokenSequence::new(tokens, 3).unwrap();
                if matches!(activation, Activation::Relu | Activation::StepLike) {
                    let z = net.pre_activations(&x);
                    if z.iter().any(|&zi| zi.abs() < 1e-3 || (zi - 1.0).abs() < 1e-3) {
                        continue;
                    }
                }
                let analytic = net.grad_input(&x).unwrap();
                let numeric = finite_difference_input(&net, &x, 1e-5);
                for (a, n) in analytic.as_flat().iter().zip(&numeric) {
                    let scale = a.abs().max(n.abs()).max(1.0);
                    assert!(
                        (a - n).abs() <= 1e-6 * scale,
                        "{activation:?}: analytic {a} vs numeric {n}"
                    );
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn grad_input_constant_for_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = random_net(&mut rng, 4, 3, 5, Activation::Identity);
        let a = TokenSequence::new(vec![0, 1, 2, 0], 3).unwrap();
        let b = TokenSequence::new(vec![2, 2, 0, 1], 3).unwrap();
        assert_eq!(net.grad_input(&a).unwrap(), net.grad_input(&b).unwrap());
    }

    #[test]
    fn single_flip_prediction_on_clause_net() {
        // At x = (0,0,0) the clause sum sits at the foot of the ramp; the
        // right-slope convention makes the predicted change of flipping X1
        // false -> true match the actual change exactly.
        let net = single_clause_net();
        let x0 = TokenSequence::new(vec![0, 0, 0], 2).unwrap();
        let x1 = TokenSequence::new(vec![1, 0, 0], 2).unwrap();
        let g = net.grad_input(&x0).unwrap();
        let predicted = g.at(0, 1) - g.at(0, 0);
        let actual = net.forward(&x1).unwrap() - net.forward(&x0).unwrap();
        assert_eq!(predicted, -1.0);
        assert_eq!(actual, -1.0);
    }

    #[test]
    fn linear_exactness_for_identity() {
        // For a linear objective, f(E') = f(E0) + v . Df(E0) for every
        // single-token substitution.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let net = random_net(&mut rng, 4, 4, 3, Activation::Identity);
            let tokens: Vec<usize> = (0..4).map(|_| rng.gen_range(0..4)).collect();
            let x = TokenSequence::new(tokens, 4).unwrap();
            let f0 = net.forward(&x).unwrap();
            let g = net.grad_input(&x).unwrap();
            for pos in 0..4 {
                for tok in 0..4 {
                    let predicted = f0 + g.at(pos, tok) - g.at(pos, x.tokens()[pos]);
                    let actual = net.forward(&x.substitute(pos, tok)).unwrap();
                    let scale = actual.abs().max(1.0);
                    assert!((predicted - actual).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn surrogate_loss_reference_values() {
        let v = surrogate_loss(0.0, 1.0).unwrap();
        assert!((v - 0.5f64.ln()).abs() <= 1e-15);
        // Large argument: stable path agrees with the asymptotic value.
        let v = surrogate_loss(30.0, 1.0).unwrap();
        assert!((v - (-(-30.0f64).exp())).abs() <= 1e-12);
        assert!(matches!(surrogate_loss(1.0, 0.0), Err(FhError::InvalidParameter(_))));
        assert!(matches!(surrogate_loss(1.0, -2.0), Err(FhError::InvalidParameter(_))));
    }

    #[test]
    fn surrogate_loss_monotone_and_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let a = rng.gen_range(-40.0..40.0);
            let b = rng.gen_range(-40.0..40.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if lo == hi {
                continue;
            }
            let c = rng.gen_range(0.01..10.0);
            let llo = surrogate_loss(lo, c).unwrap();
            let lhi = surrogate_loss(hi, c).unwrap();
            assert!(llo < lhi, "loss({lo}) = {llo} !< loss({hi}) = {lhi}");
            assert!(lhi < 0.0);
        }
    }

    #[test]
    fn sgd_step_contract() {
        let shape = NetShape {
            positions: 1,
            vocab: 1,
            hidden: 1,
            outputs: 1,
            activation: Activation::Identity,
        };
        // Scalar-friendly little state: four entries.
        let p = ParamState { shape, values: vec![2.0, 0.0, 0.0, 0.0], step: 3 };
        let zero = ParamGradient { shape, values: vec![0.0; 4] };
        let stepped = sgd_step(&p, &zero, 0.5).unwrap();
        assert_eq!(stepped.values, p.values);
        assert_eq!(stepped.step, 4);

        let g = ParamGradient { shape, values: vec![0.5, 0.0, 0.0, 0.0] };
        let one = sgd_step(&p, &g, 1.0).unwrap();
        assert_eq!(one.values[0], 1.5);

        // Two successive steps with constant g equal one step at twice the rate.
        let twice = sgd_step(&sgd_step(&p, &g, 0.3).unwrap(), &g, 0.3).unwrap();
        let double = sgd_step(&p, &g, 0.6).unwrap();
        for (a, b) in twice.values.iter().zip(&double.values) {
            assert!((a - b).abs() <= 1e-15);
        }

        let bad = ParamGradient { shape, values: vec![f64::NAN, 0.0, 0.0, 0.0] };
        assert!(matches!(sgd_step(&p, &bad, 0.1), Err(FhError::NonFinite(_))));
        assert!(matches!(sgd_step(&p, &g, 0.0), Err(FhError::InvalidParameter(_))));
        let other_shape = NetShape { hidden: 2, ..shape };
        let mismatched = ParamGradient { shape: other_shape, values: vec![0.0; 4] };
        assert!(matches!(sgd_step(&p, &mismatched, 0.1), Err(FhError::DimensionMismatch(_))));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let net = random_net(&mut rng, 3, 5, 4, Activation::Sigmoid);
        let p = net.to_params(9);
        let back = TwoLayerNet::from_params(&p).unwrap();
        assert_eq!(net, back);
        assert_eq!(p.step, 9);
    }

    #[test]
    fn net_json_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let net = random_net(&mut rng, 2, 3, 3, Activation::StepLike);
        let text = net.to_json();
        let back = TwoLayerNet::from_json(&text).unwrap();
        assert_eq!(net, back);
        assert_eq!(text, back.to_json());
        for (a, b) in net.w1.iter().zip(&back.w1) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn forward_and_grads_are_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let net = random_net(&mut rng, 3, 4, 6, Activation::Sigmoid);
        let x = TokenSequence::new(vec![3, 0, 2], 4).unwrap();
        let f1 = net.forward(&x).unwrap();
        let f2 = net.forward(&x).unwrap();
        assert_eq!(f1.to_bits(), f2.to_bits());
        let g1 = net.grad_params(&x).unwrap();
        let g2 = net.grad_params(&x).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn suffix_problem_contract() {
        let p = SuffixProblem::new(5, 3, vec![2, 1], -1.0).unwrap();
        assert_eq!(p.free_positions(), &[2, 3, 4]);
        assert!(p.is_free(3));
        assert!(!p.is_free(0));
        assert!(p.is_success(-1.0));
        assert!(!p.is_success(-0.5));

        let ok = TokenSequence::new(vec![2, 1, 0, 0, 0], 3).unwrap();
        p.validate_seq(&ok).unwrap();
        let bad_prefix = TokenSequence::new(vec![0, 1, 0, 0, 0], 3).unwrap();
        assert!(p.validate_seq(&bad_prefix).is_err());

        assert!(SuffixProblem::new(2, 3, vec![0, 1], 0.0).is_err());
        assert!(SuffixProblem::new(2, 3, vec![5], 0.0).is_err());
        assert!(SuffixProblem::new(2, 3, vec![], f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn one_hot_round_trips(vocab in 1usize..6, tokens in proptest::collection::vec(0usize..6, 1..8)) {
            let tokens: Vec<usize> = tokens.into_iter().map(|t| t % vocab).collect();
            let n = tokens.len();
            let x = TokenSequence::new(tokens, vocab).unwrap();
            let e = x.one_hot();
            for pos in 0..n {
                let row = &e[pos * vocab..(pos + 1) * vocab];
                prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
            }
            let back = TokenSequence::from_one_hot(&e, n, vocab).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn step_like_stays_in_unit_interval(z in -10.0f64..10.0) {
            let s = Activation::StepLike.apply(z);
            prop_assert!((0.0..=1.0).contains(&s));
            let via_relu = Activation::Relu.apply(z) - Activation::Relu.apply(z - 1.0);
            prop_assert_eq!(s, via_relu);
        }
    }
}
