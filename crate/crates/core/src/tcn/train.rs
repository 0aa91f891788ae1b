//! Mini-batch training loop.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::adam::OptimizerState;
use super::loss::compute_loss;
use super::network::{Network, TcnError};
use super::tensor::SeqTensor;
use super::Mode;

/// One training pair: a `1 x C_in x (P+F)` input and a `1 x C_out x F` target.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub input: SeqTensor,
    pub target: SeqTensor,
}

/// Runs one epoch of shuffled mini-batch training; returns the epoch-mean
/// training loss. BN running statistics are updated after every batch.
pub fn train_epoch(
    net: &mut Network,
    examples: &[TrainExample],
    opt: &mut OptimizerState,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64, TcnError> {
    if examples.is_empty() {
        return Err(TcnError::EmptyDataset);
    }
    assert!(batch_size >= 1);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);

    let mut total_loss = 0.0;
    for batch in order.chunks(batch_size) {
        let inputs: Vec<SeqTensor> = batch.iter().map(|&i| examples[i].input.clone()).collect();
        let targets: Vec<SeqTensor> = batch.iter().map(|&i| examples[i].target.clone()).collect();
        let x = SeqTensor::stack_batch(&inputs)?;
        let y = SeqTensor::stack_batch(&targets)?;

        let (pred, cache) = net.forward(&x, Mode::Train, Some(rng))?;
        let (loss, grad) = compute_loss(&pred, &y, net.config.loss_kind, &net.config.wl2_weights)?;
        total_loss += loss * batch.len() as f64;

        let grads = net.backward(&cache, &grad, Mode::Train);
        net.update_running_stats(&cache);

        let mut flat = net.params_to_vec();
        let flat_grads = net.grads_to_vec(&grads);
        if flat_grads.iter().any(|g| !g.is_finite()) {
            return Err(TcnError::NonFinite {
                location: "parameter gradients".into(),
            });
        }
        opt.step(&mut flat, &flat_grads);
        net.set_params_from_vec(&flat);
    }
    Ok(total_loss / examples.len() as f64)
}

/// Mean loss over a dataset without updating anything (eval mode).
pub fn evaluate_loss(net: &Network, examples: &[TrainExample]) -> Result<f64, TcnError> {
    if examples.is_empty() {
        return Err(TcnError::EmptyDataset);
    }
    let mut total = 0.0;
    for ex in examples {
        let pred = net.predict(&ex.input)?;
        let (loss, _) =
            compute_loss(&pred, &ex.target, net.config.loss_kind, &net.config.wl2_weights)?;
        total += loss;
    }
    Ok(total / examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadstate::{AUG_DIM, TRUNC_DIM};
    use crate::tcn::loss::LossKind;
    use crate::tcn::network::NetworkConfig;
    use rand::SeedableRng;

    fn tiny_net(seed: u64) -> Network {
        let cfg = NetworkConfig {
            num_blocks: 2,
            kernel_size: 2,
            channels: vec![8, 8],
            past_steps: 4,
            future_steps: 4,
            input_channels: AUG_DIM,
            output_channels: TRUNC_DIM,
            use_batchnorm: false,
            dropout_rate: 0.0,
            loss_kind: LossKind::L2,
            wl2_weights: vec![1.0; 6],
            shortened_gradient: false,
            injection_layer: 1,
            seed,
        };
        Network::init(cfg).unwrap()
    }

    fn one_example() -> TrainExample {
        let input = SeqTensor::from_data(
            1,
            AUG_DIM,
            8,
            (0..AUG_DIM * 8).map(|i| ((i * 13 % 29) as f64) / 29.0).collect(),
        )
        .unwrap();
        let target = SeqTensor::from_data(
            1,
            TRUNC_DIM,
            4,
            (0..TRUNC_DIM * 4).map(|i| ((i * 7 % 11) as f64) / 11.0 - 0.5).collect(),
        )
        .unwrap();
        TrainExample { input, target }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut net = tiny_net(3);
        let before = net.params_to_vec();
        let mut opt = OptimizerState::new(net.param_count(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = vec![one_example()];
        let loss = train_epoch(&mut net, &ex, &mut opt, 1, &mut rng).unwrap();
        assert_eq!(net.params_to_vec(), before);
        let eval = evaluate_loss(&net, &ex).unwrap();
        assert!((loss - eval).abs() < 1e-12);
    }

    #[test]
    fn memorizes_a_single_sample() {
        let mut net = tiny_net(5);
        let mut opt = OptimizerState::new(net.param_count(), 1e-2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = vec![one_example()];
        let initial = train_epoch(&mut net, &ex, &mut opt, 1, &mut rng).unwrap();
        let mut last = initial;
        for _ in 0..199 {
            last = train_epoch(&mut net, &ex, &mut opt, 1, &mut rng).unwrap();
        }
        assert!(
            last <= initial / 100.0,
            "loss {} did not drop 100x from {}",
            last,
            initial
        );
    }

    #[test]
    fn fixed_seed_reproduces_loss_curve() {
        let run = || {
            let mut net = tiny_net(9);
            let mut opt = OptimizerState::new(net.param_count(), 1e-3);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let exs: Vec<TrainExample> = (0..5).map(|_| one_example()).collect();
            (0..5)
                .map(|_| train_epoch(&mut net, &exs, &mut opt, 2, &mut rng).unwrap())
                .collect::<Vec<f64>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let mut net = tiny_net(1);
        let mut opt = OptimizerState::new(net.param_count(), 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            train_epoch(&mut net, &[], &mut opt, 4, &mut rng),
            Err(TcnError::EmptyDataset)
        ));
    }
}
