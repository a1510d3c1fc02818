//! Nearest symmetric kernel to an unconstrained real kernel.
//!
//! The objective is `‖K − B ∘ P(f, ρ, σ1, σ2)‖_F` with a relaxed mask
//! `B ∈ [0,1]`. For a fixed pattern `P` the optimal `B` is elementwise, and
//! for fixed `(σ1, σ2, f)` each slice picks its own seed, so exact search
//! costs `120 · |f| · 4 · m` slice evaluations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{label_matrix, StrengthFunction, SymmetricKernelSpec, SymmetricStructure};
use crate::permutation::{enumerate_commuting_pairs, Permutation, LABELS};
use crate::tensor::{Kernel, Matrix};

/// `(f, ρ, σ1, σ2)` with a real mask in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxedKernelSpec {
    pub f: StrengthFunction,
    pub rho: Vec<u8>,
    pub sigma1: Permutation,
    pub sigma2: Permutation,
    #[serde(rename = "B")]
    pub mask: Kernel<f64>,
}

impl RelaxedKernelSpec {
    pub fn structure(&self) -> SymmetricStructure {
        SymmetricStructure {
            f: self.f,
            rho: self.rho.clone(),
            sigma1: self.sigma1,
            sigma2: self.sigma2,
        }
    }

    pub fn pattern(&self) -> Kernel<i32> {
        self.structure().pattern(self.mask.side())
    }

    pub fn materialize(&self) -> Kernel<f64> {
        self.pattern()
            .zip_map(&self.mask, |p, b| f64::from(p) * b)
            .expect("mask and pattern share a shape")
    }

    pub fn binarize(&self, threshold: f64) -> SymmetricKernelSpec {
        SymmetricKernelSpec {
            f: self.f,
            rho: self.rho.clone(),
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            mask: binarize_mask(&self.mask, threshold),
        }
    }
}

impl From<&SymmetricKernelSpec> for RelaxedKernelSpec {
    fn from(spec: &SymmetricKernelSpec) -> Self {
        Self {
            f: spec.f,
            rho: spec.rho.clone(),
            sigma1: spec.sigma1,
            sigma2: spec.sigma2,
            mask: spec.mask.map(f64::from),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub spec: RelaxedKernelSpec,
    pub distance: f64,
    pub candidates_examined: u64,
    /// Distance after each alternating iteration; empty for exact search.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

/// `‖a − b‖_F`.
pub fn frobenius_distance(a: &Kernel<f64>, b: &Kernel<f64>) -> Result<f64> {
    let diff = a.zip_map(b, |x, y| (x - y) * (x - y))?;
    Ok(diff.as_slice().iter().sum::<f64>().sqrt())
}

#[inline]
fn mask_entry(k: f64, p: i32) -> f64 {
    if p == 0 {
        0.0
    } else {
        (k / f64::from(p)).clamp(0.0, 1.0)
    }
}

#[inline]
fn residual_sq(k: f64, p: i32) -> f64 {
    let r = k - mask_entry(k, p) * f64::from(p);
    r * r
}

/// Elementwise minimizer of `Σ (K − B·P)²` over `B ∈ [0,1]`; 0 where `P = 0`.
pub fn optimal_mask(kernel: &Kernel<f64>, pattern: &Kernel<i32>) -> Result<Kernel<f64>> {
    kernel.zip_map(pattern, mask_entry)
}

/// 1 where `B ≥ threshold`, else 0.
pub fn binarize_mask(mask: &Kernel<f64>, threshold: f64) -> Kernel<u8> {
    mask.map(|b| u8::from(b >= threshold))
}

fn sorted_choices(f_choices: &[StrengthFunction]) -> Result<Vec<StrengthFunction>> {
    if f_choices.is_empty() {
        return Err(Error::EmptyChoices);
    }
    let mut fs = f_choices.to_vec();
    fs.sort();
    fs.dedup();
    Ok(fs)
}

/// Label matrices `G_ρ` (`l × l`) for one commuting pair, indexed by `ρ − 1`.
fn seed_labels(sigma1: &Permutation, sigma2: &Permutation, l: usize) -> [Matrix<u8>; LABELS] {
    std::array::from_fn(|r| label_matrix(sigma1, sigma2, r as u8 + 1, l))
}

struct Search<'a> {
    kernel: &'a Kernel<f64>,
    pairs: Vec<(Permutation, Permutation)>,
    labels: Vec<[Matrix<u8>; LABELS]>,
    fs: Vec<StrengthFunction>,
    evaluated: u64,
}

impl<'a> Search<'a> {
    fn new(kernel: &'a Kernel<f64>, f_choices: &[StrengthFunction]) -> Result<Self> {
        let fs = sorted_choices(f_choices)?;
        if kernel.is_empty() {
            return Err(Error::Dimension("cannot project an empty kernel".into()));
        }
        let pairs = enumerate_commuting_pairs();
        let labels = pairs.iter().map(|(a, b)| seed_labels(a, b, kernel.side())).collect();
        Ok(Self {
            kernel,
            pairs,
            labels,
            fs,
            evaluated: 0,
        })
    }

    fn slice_cost(&mut self, pair: usize, f: &StrengthFunction, rho: u8, k: usize) -> f64 {
        self.evaluated += 1;
        let g = &self.labels[pair][(rho - 1) as usize];
        let l = self.kernel.side();
        let mut cost = 0.0;
        for i in 0..l {
            for j in 0..l {
                cost += residual_sq(self.kernel.get(i, j, k), f.apply(g.get(i, j)));
            }
        }
        cost
    }

    /// Best seed per slice (lowest seed on ties) and the summed cost.
    fn best_seeds(&mut self, pair: usize, f_index: usize) -> (f64, Vec<u8>) {
        let f = self.fs[f_index];
        let mut total = 0.0;
        let mut rho = Vec::with_capacity(self.kernel.depth());
        for k in 0..self.kernel.depth() {
            let mut best = (f64::INFINITY, 1u8);
            for r in 1..=LABELS as u8 {
                let c = self.slice_cost(pair, &f, r, k);
                if c < best.0 {
                    best = (c, r);
                }
            }
            total += best.0;
            rho.push(best.1);
        }
        (total, rho)
    }

    fn finish(&self, pair: usize, f_index: usize, rho: Vec<u8>, history: Vec<f64>) -> Result<ProjectionResult> {
        let (sigma1, sigma2) = self.pairs[pair];
        let structure = SymmetricStructure {
            f: self.fs[f_index],
            rho,
            sigma1,
            sigma2,
        };
        let mask = optimal_mask(self.kernel, &structure.pattern(self.kernel.side()))?;
        let spec = RelaxedKernelSpec {
            f: structure.f,
            rho: structure.rho,
            sigma1,
            sigma2,
            mask,
        };
        let distance = frobenius_distance(self.kernel, &spec.materialize())?;
        Ok(ProjectionResult {
            spec,
            distance,
            candidates_examined: self.evaluated,
            history,
        })
    }
}

/// Exact minimizer over every commuting pair, every `f` in `f_choices` and
/// every seed per slice.
///
/// Ties go to the lexicographically smallest `(σ1, σ2, f, ρ)`.
pub fn project_exact(kernel: &Kernel<f64>, f_choices: &[StrengthFunction]) -> Result<ProjectionResult> {
    let mut search = Search::new(kernel, f_choices)?;
    let mut best: Option<(f64, usize, usize, Vec<u8>)> = None;
    for pair in 0..search.pairs.len() {
        for fi in 0..search.fs.len() {
            let (cost, rho) = search.best_seeds(pair, fi);
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, pair, fi, rho));
            }
        }
    }
    let (_, pair, fi, rho) = best.expect("at least one candidate");
    search.finish(pair, fi, rho, Vec::new())
}

/// Block coordinate descent from a seeded random start.
///
/// Each iteration first re-optimizes `(f, ρ, B)` with `(σ1, σ2)` held, then
/// sweeps all commuting pairs with `f` held (seeds and mask re-optimized).
/// A candidate replaces the incumbent only on strict improvement, so the
/// recorded distance never increases. Stops at a fixpoint or `max_iters`.
pub fn project_alternating(
    kernel: &Kernel<f64>,
    f_choices: &[StrengthFunction],
    max_iters: usize,
    seed: u64,
) -> Result<ProjectionResult> {
    let mut search = Search::new(kernel, f_choices)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pair = rng.gen_range(0..search.pairs.len());
    let mut fi = rng.gen_range(0..search.fs.len());
    let (mut cost, mut rho) = search.best_seeds(pair, fi);
    let mut history = Vec::new();

    for _ in 0..max_iters {
        let before = (pair, fi);
        for cand in 0..search.fs.len() {
            let (c, r) = search.best_seeds(pair, cand);
            if c < cost {
                (cost, rho, fi) = (c, r, cand);
            }
        }
        for cand in 0..search.pairs.len() {
            let (c, r) = search.best_seeds(cand, fi);
            if c < cost {
                (cost, rho, pair) = (c, r, cand);
            }
        }
        history.push(cost.sqrt());
        if (pair, fi) == before {
            break;
        }
    }
    search.finish(pair, fi, rho, history)
}
