//! End-to-end checks of the public API on suffix-style problems: a pinned
//! prefix, free tail positions, oracle floors and the monotone surrogate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fh_core::search::{brute_force_min, greedy_search, SearchBudget, SearchStrategy};
use fh_core::test_support::{random_net, random_sequence};
use fh_core::{surrogate_loss, Activation, SuffixProblem, TokenSequence};

#[test]
fn prefix_stays_pinned_and_oracle_bounds_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for trial in 0..10 {
        let net = random_net(&mut rng, 8, 4, 6, Activation::Sigmoid);
        let prefix = vec![1usize, 3, 0];
        let problem = SuffixProblem::new(8, 4, prefix.clone(), -1e18).unwrap();
        let p = net.to_params(0);

        let (oracle_seq, oracle_val) = brute_force_min(&problem, &p).unwrap();
        assert_eq!(&oracle_seq.tokens()[..3], &prefix[..], "oracle respects the prefix");

        let mut init = random_sequence(&mut rng, 8, 4);
        for (pos, &tok) in prefix.iter().enumerate() {
            init = init.substitute(pos, tok);
        }
        let budget = SearchBudget::new(300, oracle_val);
        let strategy = SearchStrategy::GreedyRandom { batch: 4, seed: trial };
        let trace = greedy_search(&problem, &p, &init, &budget, &strategy).unwrap();
        assert_eq!(&trace.final_seq.tokens()[..3], &prefix[..], "search respects the prefix");
        assert!(trace.final_value >= oracle_val);

        // The exhaustive strategy lands exactly on the oracle.
        let brute = greedy_search(&problem, &p, &init, &budget, &SearchStrategy::BruteForce)
            .unwrap();
        assert_eq!(brute.final_value, oracle_val);
        assert_eq!(brute.final_seq, oracle_seq);
        assert_eq!(brute.iterations_used, 0);
    }
}

#[test]
fn monotone_surrogate_preserves_search_decisions() {
    // The surrogate is strictly increasing, so it preserves minimizers and
    // sublevel membership under the transformed threshold.
    let mut rng = ChaCha8Rng::seed_from_u64(65);
    let net = random_net(&mut rng, 5, 3, 4, Activation::Sigmoid);
    let x = random_sequence(&mut rng, 5, 3);
    let c = 2.5;
    let threshold = net.forward(&x).unwrap();
    let surrogate_threshold = surrogate_loss(threshold, c).unwrap();
    for _ in 0..200 {
        let y = random_sequence(&mut rng, 5, 3);
        let value = net.forward(&y).unwrap();
        let mapped = surrogate_loss(value, c).unwrap();
        assert_eq!(value <= threshold, mapped <= surrogate_threshold);
    }

    // Argmin over a sweep is invariant under the transform.
    let problem = SuffixProblem::for_net(&net, threshold).unwrap();
    let sweep = fh_core::search::sweep_position(&problem, &net, &x, 2).unwrap();
    let raw_best = sweep
        .iter()
        .fold(sweep[0], |acc, &cand| if cand.1 < acc.1 { cand } else { acc });
    let mapped_best = sweep
        .iter()
        .map(|&(tok, v)| (tok, surrogate_loss(v, c).unwrap()))
        .fold((sweep[0].0, surrogate_loss(sweep[0].1, c).unwrap()), |acc, cand| {
            if cand.1 < acc.1 {
                cand
            } else {
                acc
            }
        });
    assert_eq!(raw_best.0, mapped_best.0);
}

#[test]
fn token_sequence_validates_public_boundaries() {
    assert!(TokenSequence::new(vec![0, 2], 2).is_err());
    assert!(TokenSequence::new(vec![0, 1], 0).is_err());
    let x = TokenSequence::new(vec![0, 1], 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let net = random_net(&mut rng, 3, 2, 2, Activation::Identity);
    assert!(net.forward(&x).is_err());
}
