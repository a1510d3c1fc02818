//! Binary-network training with symmetric-kernel replacement.

pub mod activation;
pub mod cores;
pub mod data;
pub mod network;
pub mod sparsity;
pub mod train;

pub use activation::{
    activation_backward, anneal, noisy_relu_forward, threshold_forward, AnnealShape, NoisyReluConfig,
};
pub use cores::{estimate_cores, CoreEstimate};
pub use data::{encode_cifar, parse_cifar, read_cifar, synthetic, write_cifar, Dataset, CIFAR_RECORD};
pub use network::{
    ActivationMode, InputShape, LayerGradients, LayerSpec, LayerState, Network, NetworkSpec, StepOptions, Tensor4,
    WeightMode,
};
pub use sparsity::{firing_rate, measure_sparsity, record_traces, sparsity_from_traces, ActivationTrace};
pub use train::{
    evaluate, train, DataSource, EpochMetrics, EvalReport, Hyperparameters, ReplacementPlan, Stage, TrainConfig,
    TrainingRun,
};
