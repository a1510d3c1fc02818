//! Core estimates for frozen networks at CIFAR-like scale.

use symkernel::trainer::{estimate_cores, ActivationMode, InputShape, LayerSpec, NetworkSpec, WeightMode};

fn layer(patch: usize, stride: usize, padding: usize, fin: usize, fout: usize, groups: usize) -> LayerSpec {
    LayerSpec {
        patch,
        stride,
        padding,
        in_features: fin,
        out_features: fout,
        groups,
        weight_mode: WeightMode::FrozenSymmetric,
        activation: ActivationMode::Threshold,
    }
}

fn main() {
    let spec = NetworkSpec {
        input: InputShape {
            channels: 3,
            height: 32,
            width: 32,
        },
        layers: vec![
            layer(3, 1, 1, 3, 12, 1),
            layer(4, 2, 1, 12, 252, 2),
            layer(1, 1, 0, 252, 256, 2),
            layer(2, 2, 0, 256, 256, 8),
        ],
        classes: 8,
        logit_scale: 8.0,
        t: 1.0,
    };
    let estimate = estimate_cores(&spec).unwrap();
    for (i, l) in estimate.layers.iter().enumerate() {
        println!(
            "layer {i}: tile {}, feature chunk {}, {} cores",
            l.tile, l.feature_chunk, l.cores
        );
    }
    println!("total {}", estimate.total);
}
