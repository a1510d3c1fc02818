//! Runs the staged pipeline on the synthetic two-class 8×8 task and reports
//! per-epoch metrics, final sparsity and the core estimate.

use symkernel::trainer::{
    estimate_cores, measure_sparsity, synthetic, train, ActivationMode, AnnealShape, Hyperparameters, InputShape,
    LayerSpec, NetworkSpec, ReplacementPlan, WeightMode,
};

fn layer(patch: usize, stride: usize, fin: usize, fout: usize, groups: usize) -> LayerSpec {
    LayerSpec {
        patch,
        stride,
        padding: 0,
        in_features: fin,
        out_features: fout,
        groups,
        weight_mode: WeightMode::Unconstrained,
        activation: ActivationMode::NoisyRelu,
    }
}

fn main() {
    let spec = NetworkSpec {
        input: InputShape {
            channels: 1,
            height: 8,
            width: 8,
        },
        layers: vec![layer(3, 1, 1, 8, 1), layer(3, 1, 8, 16, 2), layer(2, 2, 16, 16, 2)],
        classes: 2,
        logit_scale: 8.0,
        t: 1.0,
    };
    let hyper = Hyperparameters {
        learning_rate: 0.05,
        momentum: 0.9,
        weight_decay: 1e-6,
        batch_size: 16,
        dropout: 0.0,
        seed: 11,
    };
    let plan = ReplacementPlan {
        unconstrained_epochs: 6,
        epochs_per_replacement: 1,
        binarize_epochs: 2,
        epochs_per_threshold: 1,
        snap_threshold: 0.5,
        stop_after: None,
    };
    let data = synthetic(256, 0.15, 11);
    let run = train(&spec, &data, &hyper, &plan, AnnealShape::Linear).unwrap();
    for m in &run.metrics {
        println!(
            "epoch {:2} {:<14} eps {:.3} loss {:.4} acc {:.3}",
            m.epoch,
            format!("{:?}", m.stage),
            m.epsilon,
            m.loss,
            m.accuracy
        );
    }
    println!("sparsity {:.3}", measure_sparsity(&run.network, &data).unwrap());
    println!("cores {}", estimate_cores(&run.network.spec).unwrap().total);
}
