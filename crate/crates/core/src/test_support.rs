//! Oracles and fixtures for tests.
//!
//! The finite-difference routines below are deliberately independent of the
//! backpropagation code in [`crate::objective`]: they only ever call the
//! forward evaluation on perturbed copies. Test suites across the workspace
//! check the analytic gradients against them. Not intended for production
//! use.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::objective::{Activation, NetShape, ParamState, TokenSequence, TwoLayerNet};

/// Random dense net with entries uniform in [-1, 1).
pub fn random_net(
    rng: &mut ChaCha8Rng,
    positions: usize,
    vocab: usize,
    hidden: usize,
    activation: Activation,
) -> TwoLayerNet {
    let shape = NetShape { positions, vocab, hidden, outputs: 1, activation };
    let d = shape.input_dim();
    let w1 = (0..hidden * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b1 = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w2 = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b2 = vec![rng.gen_range(-1.0..1.0)];
    TwoLayerNet::new(shape, w1, b1, w2, b2).unwrap()
}

/// Random token sequence for a given problem size.
pub fn random_sequence(rng: &mut ChaCha8Rng, positions: usize, vocab: usize) -> TokenSequence {
    let tokens = (0..positions).map(|_| rng.gen_range(0..vocab)).collect();
    TokenSequence::new(tokens, vocab).unwrap()
}

/// Central finite differences of `forward` with respect to every trainable
/// entry, in [`ParamState`] flattening order.
pub fn finite_difference_params(net: &TwoLayerNet, x: &TokenSequence, h: f64) -> Vec<f64> {
    let base = net.to_params(0);
    let mut out = Vec::with_capacity(base.values.len());
    for i in 0..base.values.len() {
        let eval = |delta: f64| {
            let mut values = base.values.clone();
            values[i] += delta;
            let p = ParamState { shape: base.shape, values, step: 0 };
            TwoLayerNet::from_params(&p).unwrap().forward(x).unwrap()
        };
        out.push((eval(h) - eval(-h)) / (2.0 * h));
    }
    out
}

/// Central finite differences of `forward` with respect to the relaxed
/// one-hot coordinates, flattened position-major.
pub fn finite_difference_input(net: &TwoLayerNet, x: &TokenSequence, h: f64) -> Vec<f64> {
    let base = x.one_hot();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let eval = |delta: f64| {
            let mut e = base.clone();
            e[i] += delta;
            net.forward_relaxed(&e).unwrap()
        };
        out.push((eval(h) - eval(-h)) / (2.0 * h));
    }
    out
}

/// True when every hidden pre-activation is at least `margin` away from the
/// nondifferentiable points {0, 1} of the piecewise-linear activations.
pub fn kink_free(net: &TwoLayerNet, x: &TokenSequence, margin: f64) -> bool {
    // Recomputed here from the public surface so the oracle does not share
    // code with the gradient path.
    let shape = net.shape;
    let d = shape.input_dim();
    let e = x.one_hot();
    (0..shape.hidden).all(|i| {
        let z: f64 = net.b1()[i]
            + e.iter().enumerate().map(|(c, &v)| net.w1()[i * d + c] * v).sum::<f64>();
        z.abs() >= margin && (z - 1.0).abs() >= margin
    })
}
