//! Fraction of active binary neurons.

use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::network::{ActivationMode, Network, Tensor4};
use crate::error::{Error, Result};

const EVAL_BATCH: usize = 256;

fn for_each_batch(net: &Network, data: &Dataset, mut f: impl FnMut(usize, &[Tensor4])) -> Result<()> {
    let indices: Vec<usize> = (0..data.len()).collect();
    for (b, chunk) in indices.chunks(EVAL_BATCH).enumerate() {
        let outs = net.forward_eval(&Network::batch(data, chunk))?;
        f(b * EVAL_BATCH, &outs);
    }
    Ok(())
}

/// Fraction of activations at or above `T/2`, over every layer and sample.
/// Equals [`measure_sparsity`] once all layers are threshold neurons.
pub fn firing_rate(net: &Network, data: &Dataset) -> Result<f64> {
    let half = net.t() / 2.0;
    let (mut on, mut total) = (0usize, 0usize);
    for_each_batch(net, data, |_, outs| {
        for o in outs {
            on += o.data.iter().filter(|&&v| v >= half).count();
            total += o.data.len();
        }
    })?;
    Ok(if total == 0 { 0.0 } else { on as f64 / total as f64 })
}

fn require_threshold(net: &Network) -> Result<()> {
    if let Some(i) = net
        .spec
        .layers
        .iter()
        .position(|l| l.activation != ActivationMode::Threshold)
    {
        return Err(Error::Config(format!("layer {i} is not a threshold layer")));
    }
    Ok(())
}

/// Mean fraction of 1-valued outputs over all binary neurons and samples.
pub fn measure_sparsity(net: &Network, data: &Dataset) -> Result<f64> {
    require_threshold(net)?;
    firing_rate(net, data)
}

/// Binary outputs of one layer for every sample, `[channel][row][col]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationTrace {
    pub layer: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub samples: Vec<Vec<u8>>,
}

pub fn record_traces(net: &Network, data: &Dataset) -> Result<Vec<ActivationTrace>> {
    require_threshold(net)?;
    let shapes = net.spec.validate()?;
    let mut traces: Vec<ActivationTrace> = shapes
        .iter()
        .enumerate()
        .map(|(layer, &(channels, height, width))| ActivationTrace {
            layer,
            channels,
            height,
            width,
            samples: Vec::with_capacity(data.len()),
        })
        .collect();
    for_each_batch(net, data, |_, outs| {
        for (trace, o) in traces.iter_mut().zip(outs) {
            for n in 0..o.n {
                trace.samples.push(o.sample(n).iter().map(|&v| v as u8).collect());
            }
        }
    })?;
    Ok(traces)
}

pub fn sparsity_from_traces(traces: &[ActivationTrace]) -> f64 {
    let (mut on, mut total) = (0usize, 0usize);
    for t in traces {
        for s in &t.samples {
            on += s.iter().filter(|&&v| v == 1).count();
            total += s.len();
        }
    }
    if total == 0 {
        0.0
    } else {
        on as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::data::synthetic;
    use crate::trainer::network::{InputShape, LayerSpec, NetworkSpec, WeightMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn threshold_net(seed: u64) -> Network {
        let layer = |fin, fout| LayerSpec {
            patch: 3,
            stride: 1,
            padding: 0,
            in_features: fin,
            out_features: fout,
            groups: 1,
            weight_mode: WeightMode::Unconstrained,
            activation: ActivationMode::Threshold,
        };
        let spec = NetworkSpec {
            input: InputShape {
                channels: 1,
                height: 8,
                width: 8,
            },
            layers: vec![layer(1, 4), layer(4, 2)],
            classes: 2,
            logit_scale: 8.0,
            t: 1.0,
        };
        Network::new(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_input_is_silent() {
        let net = threshold_net(1);
        let mut data = synthetic(4, 0.0, 0);
        data.images.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(measure_sparsity(&net, &data).unwrap(), 0.0);
    }

    #[test]
    fn traces_reproduce_sparsity() {
        let mut net = threshold_net(2);
        for l in &mut net.layers {
            l.beta
                .iter_mut()
                .enumerate()
                .for_each(|(i, b)| *b = 0.3 + 0.1 * i as f64);
        }
        let data = synthetic(300, 0.2, 3);
        let s = measure_sparsity(&net, &data).unwrap();
        assert!((0.0..=1.0).contains(&s));
        let traces = record_traces(&net, &data).unwrap();
        assert_eq!(traces[0].samples.len(), 300);
        let json = serde_json::to_string(&traces).unwrap();
        let back: Vec<ActivationTrace> = serde_json::from_str(&json).unwrap();
        assert!((sparsity_from_traces(&back) - s).abs() < 1e-12);
    }

    #[test]
    fn requires_threshold_mode() {
        let mut net = threshold_net(4);
        net.set_activation(0, ActivationMode::NoisyRelu);
        let data = synthetic(2, 0.0, 0);
        assert!(measure_sparsity(&net, &data).is_err());
        assert!(firing_rate(&net, &data).is_ok());
    }
}
