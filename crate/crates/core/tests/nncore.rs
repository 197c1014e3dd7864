mod common;

use common::{fd_gradient_error, fd_gradient_error_on, perturb, random_batch, rng};
use lmcl_core::continual::{fit, plain_objective};
use lmcl_core::linalg::Mat;
use lmcl_core::nncore::{
    backward, evaluate, lora_merge, loss_bce, predict, Activation, Batch, DenseLayer, LoraAdapter, Network,
};
use rand::Rng;

/// Forward pass written out with explicit loops, independent of `Mat`.
fn loop_forward(net: &Network, x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    for layer in net.layers() {
        let w = layer.effective_weight();
        let mut h = vec![0.0; layer.out_dim()];
        for (i, hi) in h.iter_mut().enumerate() {
            let mut s = layer.bias.as_ref().map_or(0.0, |b| b[i]);
            for (j, aj) in a.iter().enumerate() {
                s += w[(i, j)] * aj;
            }
            *hi = layer.activation.apply(s);
        }
        a = h;
    }
    a[0]
}

#[test]
fn forward_matches_loop_oracle() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let net = Network::random(2, &[4], Activation::Relu, true, &mut r).unwrap();
        let mut theta = net.flatten();
        for v in theta.values_mut() {
            *v = r.random_range(-1.0..1.0);
        }
        let net = net.with_weights(&theta).unwrap();
        let batch = random_batch(&mut r, 16, 2);
        let logits = net.logits(&batch).unwrap();
        for (i, z) in logits.iter().enumerate() {
            assert!((z - loop_forward(&net, batch.sample(i))).abs() < 1e-12);
        }
    }
}

#[test]
fn bce_matches_high_precision_reference() {
    // -ln σ(2) = ln(1 + e^-2), evaluated to 40 digits
    let reference = 0.126_928_011_042_972_496_443_726_806_358_304_431_f64;
    assert!((loss_bce(2.0, 1) - reference).abs() < 1e-15);
}

#[test]
fn gradients_match_finite_differences_for_every_layer_kind() {
    let kinds = [
        (Activation::Relu, true),
        (Activation::Relu, false),
        (Activation::Sigmoid, true),
        (Activation::Identity, true),
        (Activation::Identity, false),
    ];
    for seed in 0..10 {
        for (act, bias) in kinds {
            let mut r = rng(100 + seed);
            let net = Network::random(5, &[6, 4], act, bias, &mut r).unwrap();
            // zero-initialized biases can park a pre-activation exactly on the ReLU kink
            let net = net.with_weights(&perturb(&net.flatten(), &mut r, 0.1)).unwrap();
            let batch = random_batch(&mut r, 12, 5);
            let err = fd_gradient_error(&net, &batch, 1e-5);
            assert!(err < 1e-4, "seed {seed} {act:?} bias={bias}: {err}");
        }
    }
}

#[test]
fn lora_gradients_touch_only_adapters_and_match_fd() {
    for seed in 0..10 {
        let mut r = rng(200 + seed);
        let mut net = Network::random(6, &[5, 4], Activation::Sigmoid, true, &mut r).unwrap();
        net.attach_lora(&[true, true, false], 2, &mut r).unwrap();
        // give B nonzero values so gradients on A are nonzero too
        let mut theta = net.flatten();
        let layout = theta.layout().clone();
        for slots in layout.layers() {
            if let Some(rb) = &slots.lora_b {
                for k in rb.clone() {
                    theta.values_mut()[k] = r.random_range(-0.5..0.5);
                }
            }
        }
        let net = net.with_weights(&theta).unwrap();
        let batch = random_batch(&mut r, 10, 6);
        let g = backward(&net, &batch).unwrap().grads;

        let mut adapter_coords = Vec::new();
        for slots in layout.layers() {
            match (&slots.lora_a, &slots.lora_b) {
                (Some(ra), Some(rb)) => {
                    for k in slots.weight.clone().chain(slots.bias.clone().unwrap_or(0..0)) {
                        assert_eq!(g.values()[k], 0.0, "frozen base received a gradient");
                    }
                    adapter_coords.extend(ra.clone());
                    adapter_coords.extend(rb.clone());
                }
                _ => {}
            }
        }
        assert!(adapter_coords.iter().any(|&k| g.values()[k] != 0.0));
        let err = fd_gradient_error_on(&net, &batch, 1e-5, &adapter_coords);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn merged_adapter_forward_equivalence() {
    let mut r = rng(7);
    let mut layer = DenseLayer::random(16, 16, Activation::Identity, true, &mut r).unwrap();
    let mut adapter = LoraAdapter::new(16, 16, 8, &mut r).unwrap();
    for v in adapter.b.as_mut_slice() {
        *v = r.random_range(-0.3..0.3);
    }
    layer.adapter = Some(adapter);
    let merged = lora_merge(&layer).unwrap();
    let head = DenseLayer::random(16, 1, Activation::Identity, true, &mut r).unwrap();
    let with = Network::from_layers(vec![layer, head.clone()]).unwrap();
    let without = Network::from_layers(vec![merged, head]).unwrap();
    let inputs = random_batch(&mut r, 100, 16);
    let a = with.forward(&inputs).unwrap();
    let b = without.forward(&inputs).unwrap();
    for (x, y) in a.pre[0].as_slice().iter().zip(b.pre[0].as_slice()) {
        assert!((x - y).abs() < 1e-12);
    }
    for (x, y) in a.logits.iter().zip(&b.logits) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let run = || {
        let mut r = rng(9);
        let mut net = Network::random(4, &[8], Activation::Relu, true, &mut r).unwrap();
        let data = random_batch(&mut r, 64, 4);
        let mut log = Vec::new();
        fit(&mut net, &data, 5, 1e-2, 16, 1, &mut r, &mut log, plain_objective).unwrap();
        net.flatten()
    };
    let a = run();
    let b = run();
    assert!(a
        .values()
        .iter()
        .zip(b.values())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn accuracy_matches_recount_and_separable_data_trains_to_one() {
    let mut r = rng(11);
    let net = Network::random(3, &[5], Activation::Relu, true, &mut r).unwrap();
    let batch = random_batch(&mut r, 200, 3);
    let logits = net.logits(&batch).unwrap();
    let correct = logits
        .iter()
        .zip(batch.labels())
        .filter(|(z, y)| u8::from(**z > 0.0) == **y)
        .count();
    assert_eq!(evaluate(&net, &batch).unwrap(), correct as f64 / 200.0);
    assert_eq!(predict(0.0), 0);

    // label = [x0 > 0], with a margin
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|i| {
            let s = if i % 2 == 0 { -1.0 } else { 1.0 };
            vec![s * r.random_range(0.5..1.5), r.random_range(-1.0..1.0)]
        })
        .collect();
    let labels = (0..100).map(|i| (i % 2) as u8).collect();
    let data = Batch::from_rows(&rows, labels).unwrap();
    let mut net = Network::random(2, &[], Activation::Identity, true, &mut r).unwrap();
    let mut log = Vec::new();
    fit(&mut net, &data, 50, 5e-2, 20, 1, &mut r, &mut log, plain_objective).unwrap();
    assert_eq!(evaluate(&net, &data).unwrap(), 1.0);
}

#[test]
fn zero_weight_gradient_closed_form() {
    let layer = DenseLayer {
        weight: Mat::zeros(1, 3),
        bias: None,
        activation: Activation::Identity,
        adapter: None,
    };
    let net = Network::from_layers(vec![layer]).unwrap();
    let x = [0.5, -2.0, 3.0];
    let batch = Batch::from_rows(&[x.to_vec()], vec![1]).unwrap();
    let g = backward(&net, &batch).unwrap().grads;
    for (gi, xi) in g.values().iter().zip(x) {
        assert_eq!(*gi, -0.5 * xi);
    }
}
