//! Analytic gradients versus central finite differences, across a spread of
//! network shapes, loss functions and feature flags.

use e2e_tcn::tcn::{compute_loss, LossKind, Mode, Network, NetworkConfig, SeqTensor};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

struct Case {
    config: NetworkConfig,
    batch: usize,
}

fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    let mk = |num_blocks: usize,
              kernel: usize,
              width: usize,
              bn: bool,
              dropout: f64,
              loss: LossKind,
              sg: bool,
              past: usize,
              future: usize,
              seed: u64| {
        let mut cfg = NetworkConfig::default_e2e(past, future);
        cfg.num_blocks = num_blocks;
        cfg.kernel_size = kernel;
        cfg.channels = vec![width; num_blocks];
        cfg.use_batchnorm = bn;
        cfg.dropout_rate = dropout;
        cfg.loss_kind = loss;
        cfg.shortened_gradient = sg;
        cfg.injection_layer = num_blocks / 2;
        cfg.seed = seed;
        cfg
    };
    out.push(Case { config: mk(1, 2, 4, false, 0.0, LossKind::L2, false, 4, 2, 1), batch: 1 });
    out.push(Case { config: mk(2, 3, 5, false, 0.0, LossKind::L2, false, 5, 3, 2), batch: 2 });
    out.push(Case { config: mk(2, 3, 6, true, 0.0, LossKind::L2, false, 5, 3, 3), batch: 2 });
    out.push(Case { config: mk(3, 2, 4, true, 0.0, LossKind::L1, false, 6, 2, 4), batch: 1 });
    out.push(Case { config: mk(2, 3, 6, true, 0.0, LossKind::WL2, false, 4, 4, 5), batch: 3 });
    out.push(Case { config: mk(2, 2, 5, false, 0.0, LossKind::WL2, false, 6, 3, 6), batch: 2 });
    out.push(Case { config: mk(2, 3, 6, true, 0.0, LossKind::L2, true, 5, 3, 7), batch: 2 });
    out.push(Case { config: mk(3, 3, 4, false, 0.0, LossKind::L2, true, 6, 4, 8), batch: 1 });
    out.push(Case { config: mk(2, 3, 5, true, 0.1, LossKind::L2, false, 5, 3, 9), batch: 2 });
    out.push(Case { config: mk(1, 3, 8, true, 0.1, LossKind::WL2, true, 6, 2, 10), batch: 2 });
    out
}

/// Loss under the current parameters with a deterministic dropout draw.
fn loss_of(net: &Network, input: &SeqTensor, target: &SeqTensor, rng_seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (pred, _) = net.forward(input, Mode::Train, Some(&mut rng)).unwrap();
    let weights = &net.config.wl2_weights;
    let (loss, _) = compute_loss(&pred, target, net.config.loss_kind, weights).unwrap();
    loss
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let started = std::time::Instant::now();
    for (case_idx, case) in cases().iter().enumerate() {
        let cfg = case.config.clone();
        let mut net = Network::init(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case_idx as u64);
        let window = cfg.past_steps + cfg.future_steps;
        let mut input = SeqTensor::zeros(case.batch, cfg.input_channels, window);
        for v in input.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut target = SeqTensor::zeros(case.batch, cfg.output_channels, cfg.future_steps);
        for v in target.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }

        // Analytic gradient, with the same dropout draw the FD probe uses.
        let dropout_seed = 7 * (case_idx as u64 + 1);
        let mut fwd_rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let (pred, cache) = net.forward(&input, Mode::Train, Some(&mut fwd_rng)).unwrap();
        let (_, grad_pred) =
            compute_loss(&pred, &target, cfg.loss_kind, &cfg.wl2_weights).unwrap();
        let grads = net.backward(&cache, &grad_pred, Mode::Train);
        let grad_vec = net.grads_to_vec(&grads);
        let mut params = net.params_to_vec();
        assert_eq!(grad_vec.len(), params.len());

        // Probe a deterministic subset of parameters.
        let n = params.len();
        let probes: Vec<usize> = (0..20).map(|i| (i * 7919) % n).collect();
        for &p in &probes {
            let saved = params[p];
            params[p] = saved + FD_STEP;
            net.set_params_from_vec(&params);
            let up = loss_of(&net, &input, &target, dropout_seed);
            params[p] = saved - FD_STEP;
            net.set_params_from_vec(&params);
            let down = loss_of(&net, &input, &target, dropout_seed);
            params[p] = saved;
            net.set_params_from_vec(&params);
            let fd = (up - down) / (2.0 * FD_STEP);
            let denom = fd.abs().max(grad_vec[p].abs()).max(1e-6);
            let rel = (fd - grad_vec[p]).abs() / denom;
            assert!(
                rel < REL_TOL,
                "case {case_idx} param {p}: analytic {} vs fd {fd} (rel {rel:.2e})",
                grad_vec[p]
            );
        }
    }
    assert!(
        started.elapsed().as_secs() < 30,
        "gradient check too slow: {:?}",
        started.elapsed()
    );
}
