//! Core-count estimate for a frozen network.
//!
//! Each group of a layer is tiled spatially: an `o × o` block of outputs
//! reads a `((o−1)·s + l)²` input window across the group's input features
//! and produces `o²` neurons per output feature. Output features are split
//! into chunks when `o² · features` exceeds one core. The tile side is chosen
//! to minimize the layer's core count. This is a resource estimate only; it
//! does not model how a real placement would share or route cores.

use serde::{Deserialize, Serialize};

use super::network::{NetworkSpec, WeightMode};
use crate::compiler::{CORE_INPUTS, CORE_NEURONS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCores {
    pub tile: usize,
    pub feature_chunk: usize,
    pub cores: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreEstimate {
    pub total: u64,
    pub layers: Vec<LayerCores>,
}

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

pub fn estimate_cores(spec: &NetworkSpec) -> Result<CoreEstimate> {
    if let Some(i) = spec
        .layers
        .iter()
        .position(|l| l.weight_mode != WeightMode::FrozenSymmetric)
    {
        return Err(Error::Refused(format!("layer {i} is not frozen-symmetric")));
    }
    let shapes = spec.validate()?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (layer, &(_, ho, wo)) in spec.layers.iter().zip(&shapes) {
        let (fin_g, fout_g) = (layer.in_per_group(), layer.out_per_group());
        let mut best: Option<LayerCores> = None;
        for o in 1..=ho.max(wo) {
            let window = (o - 1) * layer.stride + layer.patch;
            if window * window * fin_g > CORE_INPUTS || o * o > CORE_NEURONS {
                break;
            }
            let chunk = fout_g.min(CORE_NEURONS / (o * o));
            let per_group = div_ceil(fout_g, chunk) * div_ceil(ho, o) * div_ceil(wo, o);
            let cores = (per_group * layer.groups) as u64;
            if best.as_ref().is_none_or(|b| cores <= b.cores) {
                best = Some(LayerCores {
                    tile: o,
                    feature_chunk: chunk,
                    cores,
                });
            }
        }
        // validate() bounds the o = 1 window by the core input limit
        layers.push(best.expect("a 1x1 tile always fits"));
    }
    Ok(CoreEstimate {
        total: layers.iter().map(|l| l.cores).sum(),
        layers,
    })
}
