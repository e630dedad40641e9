//! Ranking evaluation: ground-truth vs gradient vs random rankings at
//! sampled positions, scored with rank-biased overlap.
//!
//! Alongside the configured instances, random identity-activation control
//! instances are evaluated: on a linear objective the gradient ranking must
//! reproduce the ground truth exactly (RBO 1.0), which pins the protocol
//! itself.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use fh_core::cnf::CompiledInstance;
use fh_core::ranking::{
    gradient_ranking, ground_truth_ranking, random_ranking, rbo_ext, RboParams,
};
use fh_core::seeds::mix_seed;
use fh_core::{Activation, NetShape, SuffixProblem, TokenSequence, TwoLayerNet};

use crate::config::ExperimentConfig;
use crate::data::{summarize_rank, write_rank_csv, RankRow, RankSummary};
use crate::error::{CliError, CliResult};

use super::{ensure_dir, load_instances, worker_pool, write_file};

fn random_identity_net(rng: &mut ChaCha8Rng, positions: usize, vocab: usize, hidden: usize) -> TwoLayerNet {
    let shape = NetShape { positions, vocab, hidden, outputs: 1, activation: Activation::Identity };
    let d = shape.input_dim();
    let w1 = (0..hidden * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b1 = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w2 = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b2 = vec![rng.gen_range(-1.0..1.0)];
    TwoLayerNet::new(shape, w1, b1, w2, b2).expect("generated dimensions are consistent")
}

fn eval_net(
    config: &ExperimentConfig,
    label: String,
    net: &TwoLayerNet,
    threshold: f64,
    seed: u64,
) -> CliResult<Vec<RankRow>> {
    let positions = net.shape.positions;
    let vocab = net.shape.vocab;
    let problem = SuffixProblem::for_net(net, threshold)?;
    let p = net.to_params(0);
    let depth = config.rankeval.depth.unwrap_or(vocab);
    let params = RboParams::new(config.rankeval.persistence, depth)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens: Vec<usize> = (0..positions).map(|_| rng.gen_range(0..vocab)).collect();
    let x = TokenSequence::new(tokens, vocab)?;
    let wanted = config.rankeval.positions_per_instance.min(positions);
    let mut chosen: Vec<usize> = sample(&mut rng, positions, wanted).into_vec();
    chosen.sort_unstable();

    let mut rows = Vec::with_capacity(2 * chosen.len());
    for position in chosen {
        let truth = ground_truth_ranking(&problem, &p, &x, position)?;
        let gradient = gradient_ranking(&problem, &p, &x, position)?;
        let random = random_ranking(vocab, rng.gen())?;
        rows.push(RankRow {
            instance: label.clone(),
            position,
            method: "gradient".into(),
            rbo: rbo_ext(&gradient, &truth, &params)?,
            p: params.persistence,
            depth,
        });
        rows.push(RankRow {
            instance: label.clone(),
            position,
            method: "random".into(),
            rbo: rbo_ext(&random, &truth, &params)?,
            p: params.persistence,
            depth,
        });
    }
    Ok(rows)
}

pub fn run(config: &ExperimentConfig, workers: usize) -> CliResult<String> {
    let instances = load_instances(config)?;
    let dir = config.output_dir.join("rankeval");
    ensure_dir(&dir)?;

    let pool = worker_pool(workers)?;
    let main_rows: Vec<Vec<RankRow>> = pool.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(index, instance): (usize, &CompiledInstance)| {
                eval_net(
                    config,
                    super::instance_stem(index),
                    &instance.net,
                    instance.threshold,
                    mix_seed(config.seed, index as u64, 200),
                )
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let control_rows: Vec<Vec<RankRow>> = (0..config.rankeval.identity_controls)
        .map(|index| {
            let seed = mix_seed(config.seed, index as u64, 300);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_identity_net(
                &mut rng,
                12,
                config.rankeval.control_vocab,
                config.rankeval.control_hidden,
            );
            eval_net(config, format!("control_{index:03}"), &net, 0.0, seed ^ 1)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let rows: Vec<RankRow> =
        main_rows.into_iter().chain(control_rows).flatten().collect();
    let summary = RankSummary { config: config.clone(), methods: summarize_rank(&rows) };

    write_file(&dir.join("rows.csv"), &write_rank_csv(&rows))?;
    let summary_json =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::config(e.to_string()))?;
    write_file(&dir.join("summary.json"), &(summary_json + "\n"))?;

    let mut out = String::new();
    for m in &summary.methods {
        let mean = m.mean_rbo.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        out.push_str(&format!("{}/{}: mean rbo {} over {} rows\n", m.group, m.method, mean, m.rows));
    }
    out.push_str(&format!("rankeval: wrote {} rows to {}", rows.len(), dir.display()));
    Ok(out)
}
