//! Staged training: unconstrained with noise annealing, layer-by-layer
//! symmetric replacement, gradual mask binarization, then layer-by-layer
//! swap to threshold neurons.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{anneal, AnnealShape};
use super::data::{read_cifar, synthetic, Dataset};
use super::network::{ActivationMode, Network, NetworkSpec, StepOptions};
use super::sparsity::firing_rate;
use crate::error::{Error, Result};
use crate::kernels::StrengthFunction;

fn default_momentum() -> f64 {
    0.9
}

fn default_decay() -> f64 {
    1e-6
}

fn default_one() -> usize {
    1
}

fn default_snap() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_decay")]
    pub weight_decay: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be nonnegative".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch_size must be at least 2 for batch statistics".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Unconstrained,
    Project,
    Binarize,
    Threshold,
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Parse(format!("unknown stage {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplacementPlan {
    pub unconstrained_epochs: usize,
    /// Epochs trained after each layer's projection before the next one.
    #[serde(default = "default_one")]
    pub epochs_per_replacement: usize,
    /// Epochs over which the snap radius grows from 0 to 0.5.
    #[serde(default = "default_one")]
    pub binarize_epochs: usize,
    /// Epochs trained after each layer's threshold swap.
    #[serde(default = "default_one")]
    pub epochs_per_threshold: usize,
    /// Final `B ≥ snap_threshold → 1` cut.
    #[serde(default = "default_snap")]
    pub snap_threshold: f64,
    /// Last stage to run; all stages when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after: Option<Stage>,
}

impl ReplacementPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_per_replacement == 0 || self.epochs_per_threshold == 0 || self.binarize_epochs == 0 {
            return Err(Error::Config("every replacement step needs at least one epoch".into()));
        }
        if !(0.0..=1.0).contains(&self.snap_threshold) {
            return Err(Error::Config("snap_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn runs(&self, stage: Stage) -> bool {
        self.stop_after.is_none_or(|s| stage <= s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    Synthetic {
        samples: usize,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    Cifar {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Synthetic { samples, noise, seed } => Ok(synthetic(*samples, *noise, *seed)),
            DataSource::Cifar { path, limit } => read_cifar(path, *limit),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub network: NetworkSpec,
    pub data: DataSource,
    pub hyper: Hyperparameters,
    pub plan: ReplacementPlan,
    #[serde(default)]
    pub anneal: AnnealShape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub stage: Stage,
    pub epsilon: f64,
    /// Mean minibatch training loss.
    pub loss: f64,
    /// Inference accuracy on the training set after the epoch.
    pub accuracy: f64,
    /// Fraction of activations at or above `T/2` at inference.
    pub sparsity: f64,
    pub projection_distances: Vec<Option<f64>>,
    pub threshold_layers: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced_layer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholded_layer: Option<usize>,
    pub snap_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRun {
    pub network: Network,
    pub metrics: Vec<EpochMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    pub sparsity: f64,
}

pub fn evaluate(net: &Network, data: &Dataset) -> Result<EvalReport> {
    if data.classes != net.spec.classes {
        return Err(Error::Config(format!(
            "dataset has {} classes, network {}",
            data.classes, net.spec.classes
        )));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in indices.chunks(256) {
        let pred = net.predict(&Network::batch(data, chunk))?;
        correct += chunk
            .iter()
            .zip(&pred)
            .filter(|(&i, &p)| data.labels[i] as usize == p)
            .count();
    }
    Ok(EvalReport {
        samples: data.len(),
        accuracy: if data.is_empty() {
            0.0
        } else {
            correct as f64 / data.len() as f64
        },
        sparsity: firing_rate(net, data)?,
    })
}

struct Session<'a> {
    net: Network,
    data: &'a Dataset,
    hp: &'a Hyperparameters,
    rng: ChaCha8Rng,
    metrics: Vec<EpochMetrics>,
    distances: Vec<Option<f64>>,
}

impl Session<'_> {
    fn epoch(
        &mut self,
        stage: Stage,
        epsilon: f64,
        snap: f64,
        replaced: Option<usize>,
        thresholded: Option<usize>,
    ) -> Result<()> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut self.rng);
        let opts = StepOptions {
            epsilon,
            dropout: self.hp.dropout,
        };
        let (mut total, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(self.hp.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let x = Network::batch(self.data, chunk);
            let labels: Vec<u8> = chunk.iter().map(|&i| self.data.labels[i]).collect();
            let (loss, grads) = self.net.loss_and_gradients(&x, &labels, &opts, &mut self.rng)?;
            self.net.apply_gradients(
                &grads,
                self.hp.learning_rate,
                self.hp.momentum,
                self.hp.weight_decay,
                snap,
            );
            total += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let report = evaluate(&self.net, self.data)?;
        let threshold_layers = (0..self.net.spec.layers.len())
            .filter(|&i| self.net.spec.layers[i].activation == ActivationMode::Threshold)
            .collect();
        self.metrics.push(EpochMetrics {
            epoch: self.metrics.len(),
            stage,
            epsilon,
            loss: if seen == 0 { 0.0 } else { total / seen as f64 },
            accuracy: report.accuracy,
            sparsity: report.sparsity,
            projection_distances: self.distances.clone(),
            threshold_layers,
            replaced_layer: replaced,
            thresholded_layer: thresholded,
            snap_radius: snap,
        });
        Ok(())
    }
}

/// Runs the staged pipeline from a freshly initialized network.
pub fn train(
    spec: &NetworkSpec,
    data: &Dataset,
    hp: &Hyperparameters,
    plan: &ReplacementPlan,
    shape: AnnealShape,
) -> Result<TrainingRun> {
    hp.validate()?;
    plan.validate()?;
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    if (data.channels, data.height, data.width) != (spec.input.channels, spec.input.height, spec.input.width) {
        return Err(Error::Config(
            "dataset image shape does not match the network input".into(),
        ));
    }
    if data.classes != spec.classes {
        return Err(Error::Config(format!(
            "dataset has {} classes, network {}",
            data.classes, spec.classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let net = Network::new(spec.clone(), &mut rng)?;
    let layers = spec.layers.len();
    let t = spec.t;
    let mut s = Session {
        net,
        data,
        hp,
        rng,
        metrics: Vec::new(),
        distances: vec![None; layers],
    };

    let e_u = plan.unconstrained_epochs;
    for e in 0..e_u {
        let progress = if e_u <= 1 { 1.0 } else { e as f64 / (e_u - 1) as f64 };
        s.epoch(Stage::Unconstrained, anneal(progress, t, shape), 0.0, None, None)?;
    }
    let eps = anneal(1.0, t, shape);

    if plan.runs(Stage::Project) {
        let choices = StrengthFunction::ternary_choices();
        for li in 0..layers {
            s.distances[li] = Some(s.net.project_layer(li, &choices)?);
            for e in 0..plan.epochs_per_replacement {
                s.epoch(Stage::Project, eps, 0.0, (e == 0).then_some(li), None)?;
            }
        }
    }

    if plan.runs(Stage::Binarize) {
        for e in 0..plan.binarize_epochs {
            let snap = 0.5 * (e + 1) as f64 / plan.binarize_epochs as f64;
            s.epoch(Stage::Binarize, eps, snap, None, None)?;
        }
        for li in 0..layers {
            s.net.freeze_layer(li, plan.snap_threshold)?;
        }
    }

    if plan.runs(Stage::Threshold) {
        for li in 0..layers {
            s.net.set_activation(li, ActivationMode::Threshold);
            for e in 0..plan.epochs_per_threshold {
                s.epoch(Stage::Threshold, eps, 0.0, None, (e == 0).then_some(li))?;
            }
        }
    }

    Ok(TrainingRun {
        network: s.net,
        metrics: s.metrics,
    })
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.plan.validate()?;
        self.network.validate()?;
        Ok(())
    }

    pub fn run(&self) -> Result<TrainingRun> {
        let data = self.data.load()?;
        train(&self.network, &data, &self.hyper, &self.plan, self.anneal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::network::{InputShape, LayerSpec, WeightMode};

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

    fn two_layer() -> NetworkSpec {
        NetworkSpec {
            input: InputShape {
                channels: 1,
                height: 8,
                width: 8,
            },
            layers: vec![layer(3, 1, 1, 8, 1), layer(2, 2, 8, 8, 2)],
            classes: 2,
            logit_scale: 8.0,
            t: 1.0,
        }
    }

    fn hp() -> Hyperparameters {
        Hyperparameters {
            learning_rate: 0.05,
            momentum: 0.9,
            weight_decay: 1e-6,
            batch_size: 16,
            dropout: 0.0,
            seed: 5,
        }
    }

    fn plan() -> ReplacementPlan {
        ReplacementPlan {
            unconstrained_epochs: 4,
            epochs_per_replacement: 1,
            binarize_epochs: 2,
            epochs_per_threshold: 1,
            snap_threshold: 0.5,
            stop_after: None,
        }
    }

    #[test]
    fn config_errors_before_training() {
        let data = synthetic(32, 0.1, 0);
        let mut spec = two_layer();
        spec.layers[1].groups = 3;
        assert!(matches!(
            train(&spec, &data, &hp(), &plan(), AnnealShape::Linear),
            Err(Error::Config(_))
        ));
        let mut bad = hp();
        bad.momentum = 1.0;
        assert!(bad.validate().is_err());
        let mut p = plan();
        p.epochs_per_replacement = 0;
        assert!(p.validate().is_err());
        assert!(train(&two_layer(), &synthetic(0, 0.0, 0), &hp(), &plan(), AnnealShape::Linear).is_err());
    }

    #[test]
    fn pipeline_schedule_and_accuracy() {
        let data = synthetic(128, 0.15, 1);
        let run = train(&two_layer(), &data, &hp(), &plan(), AnnealShape::Linear).unwrap();
        let m = &run.metrics;
        assert_eq!(m.len(), 4 + 2 + 2 + 2);
        let unconstrained = m
            .iter()
            .filter(|e| e.stage == Stage::Unconstrained)
            .next_back()
            .unwrap();
        assert!(unconstrained.accuracy >= 0.99, "{}", unconstrained.accuracy);

        // epsilon is nondecreasing and capped at T/2
        assert!(m.windows(2).all(|w| w[1].epsilon >= w[0].epsilon));
        assert!(m.iter().all(|e| e.epsilon <= 0.5));
        assert_eq!(m[0].epsilon, 0.0);

        // replacements happen in layer order with at least one epoch between
        let replaced: Vec<(usize, usize)> = m
            .iter()
            .filter_map(|e| e.replaced_layer.map(|l| (e.epoch, l)))
            .collect();
        assert_eq!(replaced.iter().map(|r| r.1).collect::<Vec<_>>(), vec![0, 1]);
        assert!(replaced.windows(2).all(|w| w[1].0 > w[0].0));
        let swapped: Vec<usize> = m.iter().filter_map(|e| e.thresholded_layer).collect();
        assert_eq!(swapped, vec![0, 1]);
        assert_eq!(m.last().unwrap().threshold_layers, vec![0, 1]);

        let last = m.last().unwrap();
        assert!(last.accuracy >= unconstrained.accuracy - 0.05, "{}", last.accuracy);
        for layer in &run.network.layers {
            assert!(layer.mask.iter().all(|&b| b == 0.0 || b == 1.0));
        }
        assert!(run
            .network
            .spec
            .layers
            .iter()
            .all(|l| l.weight_mode == WeightMode::FrozenSymmetric));
    }

    #[test]
    fn stop_after_stage() {
        let data = synthetic(32, 0.1, 2);
        let mut p = plan();
        p.stop_after = Some(Stage::Unconstrained);
        let run = train(&two_layer(), &data, &hp(), &p, AnnealShape::Linear).unwrap();
        assert_eq!(run.metrics.len(), 4);
        assert!(run
            .network
            .spec
            .layers
            .iter()
            .all(|l| l.weight_mode == WeightMode::Unconstrained));
        assert_eq!("binarize".parse::<Stage>().unwrap(), Stage::Binarize);
        assert!("later".parse::<Stage>().is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data = synthetic(32, 0.1, 3);
        let mut p = plan();
        p.unconstrained_epochs = 2;
        let a = train(&two_layer(), &data, &hp(), &p, AnnealShape::Linear).unwrap();
        let b = train(&two_layer(), &data, &hp(), &p, AnnealShape::Linear).unwrap();
        assert_eq!(
            serde_json::to_string(&a.metrics).unwrap(),
            serde_json::to_string(&b.metrics).unwrap()
        );
        assert_eq!(a.network.to_json().unwrap(), b.network.to_json().unwrap());
    }
}
