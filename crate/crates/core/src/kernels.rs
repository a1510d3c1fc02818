//! Symmetric kernels: construction, membership and family counting.
//!
//! A symmetric kernel is parameterized by a strength table `f`, seed labels
//! `ρ` (one per slice), a commuting pair `(σ1, σ2)` and a binary mask `B`:
//!
//! ```text
//! K[i][j][k] = B[i][j][k] · f(σ1^(i-1) σ2^(j-1) ρ_k)      (1-based i, j)
//! ```

use std::collections::HashSet;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::permutation::{self, enumerate_commuting_pairs, Permutation, LABELS};
use crate::tensor::{Kernel, Matrix};

/// Largest magnitude a crossbar strength entry can hold.
pub const MAX_STRENGTH: i32 = 255;

/// A 4-entry signed lookup table `f : {1,2,3,4} → [-255, 255]`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrengthFunction {
    table: [i32; LABELS],
}

impl StrengthFunction {
    pub fn new(table: [i32; LABELS]) -> Result<Self> {
        if let Some(&bad) = table.iter().find(|v| v.abs() > MAX_STRENGTH) {
            return Err(Error::StrengthRange(bad as i64));
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> [i32; LABELS] {
        self.table
    }

    #[inline]
    pub fn apply(&self, label: u8) -> i32 {
        self.table[(label - 1) as usize]
    }

    /// True when every entry is `-1` or `1`, the training regime.
    pub fn is_ternary(&self) -> bool {
        self.table.iter().all(|v| v.abs() == 1)
    }

    /// The 16 `{-1, 1}`-valued tables in lexicographic order.
    pub fn ternary_choices() -> Vec<StrengthFunction> {
        (0..16u32)
            .map(|bits| {
                let mut table = [0i32; LABELS];
                for (t, slot) in table.iter_mut().enumerate() {
                    *slot = if bits & (1 << (3 - t)) != 0 { 1 } else { -1 };
                }
                StrengthFunction { table }
            })
            .collect()
    }

    /// `f ∘ p` as a table: `(f ∘ p)(x) = f(p(x))`.
    pub fn after(&self, p: &Permutation) -> StrengthFunction {
        let mut table = [0i32; LABELS];
        for (x, slot) in table.iter_mut().enumerate() {
            *slot = self.apply(p.apply(x as u8 + 1));
        }
        StrengthFunction { table }
    }
}

impl Serialize for StrengthFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.table.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StrengthFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let table = <[i32; LABELS]>::deserialize(deserializer)?;
        StrengthFunction::new(table).map_err(serde::de::Error::custom)
    }
}

/// The mask-free part of a symmetric kernel: `(f, ρ, σ1, σ2)`.
///
/// This is what gets frozen once a trained kernel has been projected.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymmetricStructure {
    pub f: StrengthFunction,
    pub rho: Vec<u8>,
    pub sigma1: Permutation,
    pub sigma2: Permutation,
}

impl SymmetricStructure {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma1.commutes(&self.sigma2) {
            return Err(Error::InvalidSpec(format!(
                "sigma1 {} and sigma2 {} do not commute",
                self.sigma1, self.sigma2
            )));
        }
        if self.rho.is_empty() {
            return Err(Error::InvalidSpec("rho must have at least one seed".into()));
        }
        for &r in &self.rho {
            permutation::check_label(r)?;
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.rho.len()
    }

    /// Label `σ1^i σ2^j ρ_k` for 0-based `(i, j)`.
    #[inline]
    pub fn label(&self, i: usize, j: usize, k: usize) -> u8 {
        self.sigma1
            .power(i as u64)
            .apply(self.sigma2.power(j as u64).apply(self.rho[k]))
    }

    /// Unmasked `l × l × m` pattern `f(σ1^(i-1) σ2^(j-1) ρ_k)`.
    pub fn pattern(&self, l: usize) -> Kernel<i32> {
        let rows: Vec<Permutation> = (0..l).map(|i| self.sigma1.power(i as u64)).collect();
        let cols: Vec<Permutation> = (0..l).map(|j| self.sigma2.power(j as u64)).collect();
        Kernel::from_fn(l, self.depth(), |i, j, k| {
            self.f.apply(rows[i].apply(cols[j].apply(self.rho[k])))
        })
    }
}

/// `(f, ρ, σ1, σ2, B)` with a finalized binary mask.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricKernelSpec {
    pub f: StrengthFunction,
    pub rho: Vec<u8>,
    pub sigma1: Permutation,
    pub sigma2: Permutation,
    #[serde(rename = "B")]
    pub mask: Kernel<u8>,
}

impl SymmetricKernelSpec {
    pub fn new(structure: SymmetricStructure, mask: Kernel<u8>) -> Result<Self> {
        let spec = Self {
            f: structure.f,
            rho: structure.rho,
            sigma1: structure.sigma1,
            sigma2: structure.sigma2,
            mask,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn structure(&self) -> SymmetricStructure {
        SymmetricStructure {
            f: self.f,
            rho: self.rho.clone(),
            sigma1: self.sigma1,
            sigma2: self.sigma2,
        }
    }

    pub fn side(&self) -> usize {
        self.mask.side()
    }

    pub fn depth(&self) -> usize {
        self.rho.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.structure().validate()?;
        if self.mask.side() == 0 {
            return Err(Error::InvalidSpec("kernel side must be at least 1".into()));
        }
        if self.mask.depth() != self.rho.len() {
            return Err(Error::InvalidSpec(format!(
                "mask has {} slices but rho has {} seeds",
                self.mask.depth(),
                self.rho.len()
            )));
        }
        if self.mask.as_slice().iter().any(|&b| b > 1) {
            return Err(Error::InvalidSpec("mask entries must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Draws a random spec with commuting permutations, uniform seeds, a
    /// Bernoulli(1/2) mask and `f` uniform over the ternary tables (or over
    /// `[-range, range]` when `range > 1`).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, l: usize, m: usize, range: i32) -> Self {
        let pairs = enumerate_commuting_pairs();
        let (sigma1, sigma2) = pairs[rng.gen_range(0..pairs.len())];
        let f = if range <= 1 {
            StrengthFunction::ternary_choices()[rng.gen_range(0..16)]
        } else {
            let range = range.min(MAX_STRENGTH);
            StrengthFunction {
                table: std::array::from_fn(|_| rng.gen_range(-range..=range)),
            }
        };
        let rho = (0..m).map(|_| rng.gen_range(1..=4u8)).collect();
        let mask = Kernel::from_fn(l, m, |_, _, _| rng.gen_range(0..=1u8));
        Self {
            f,
            rho,
            sigma1,
            sigma2,
            mask,
        }
    }
}

/// `P[i][j] = f(σ1^(i-1)(σ2^(j-1)(ρ)))`, i.e. the kernel with an all-ones mask.
pub fn pattern_matrix(
    sigma1: &Permutation,
    sigma2: &Permutation,
    rho: u8,
    f: &StrengthFunction,
    l: usize,
) -> Result<Kernel<i32>> {
    let structure = SymmetricStructure {
        f: *f,
        rho: vec![rho],
        sigma1: *sigma1,
        sigma2: *sigma2,
    };
    structure.validate()?;
    Ok(structure.pattern(l))
}

/// The `n × n` type-label matrix `G[i][j] = σ1^(i-1)(σ2^(j-1)(ρ))`.
pub fn label_matrix(sigma1: &Permutation, sigma2: &Permutation, rho: u8, n: usize) -> Matrix<u8> {
    let rows: Vec<Permutation> = (0..n).map(|i| sigma1.power(i as u64)).collect();
    let cols: Vec<Permutation> = (0..n).map(|j| sigma2.power(j as u64)).collect();
    Matrix::from_fn(n, n, |i, j| rows[i].apply(cols[j].apply(rho)))
}

/// Materializes an `l × l` kernel; the spec must have a single seed.
pub fn materialize_2d(spec: &SymmetricKernelSpec) -> Result<Kernel<i32>> {
    if spec.depth() != 1 {
        return Err(Error::InvalidSpec(format!(
            "2-D materialization needs a scalar seed, got {} seeds",
            spec.depth()
        )));
    }
    materialize(spec)
}

/// Materializes an `l × l × m` kernel, one slice per seed.
pub fn materialize_3d(spec: &SymmetricKernelSpec) -> Result<Kernel<i32>> {
    materialize(spec)
}

pub fn materialize(spec: &SymmetricKernelSpec) -> Result<Kernel<i32>> {
    spec.validate()?;
    let pattern = spec.structure().pattern(spec.side());
    pattern.zip_map(&spec.mask, |p, b| p * i32::from(b))
}

/// Returns a spec that materializes exactly to `kernel`, if one exists.
///
/// Tries every commuting pair and seed in lexicographic order and reads `f`
/// directly off the nonzero entries; labels that never appear on a nonzero
/// entry get strength 1.
pub fn is_symmetric_kernel(kernel: &Kernel<i32>) -> Option<SymmetricKernelSpec> {
    if kernel.depth() != 1 || kernel.side() == 0 {
        return None;
    }
    if kernel.as_slice().iter().any(|v| v.abs() > MAX_STRENGTH) {
        return None;
    }
    let distinct: HashSet<i32> = kernel.as_slice().iter().copied().filter(|&v| v != 0).collect();
    if distinct.len() > LABELS {
        return None;
    }
    let l = kernel.side();
    let mask = kernel.map(|v| u8::from(v != 0));
    for (sigma1, sigma2) in enumerate_commuting_pairs() {
        'seed: for rho in 1..=LABELS as u8 {
            let g = label_matrix(&sigma1, &sigma2, rho, l);
            let mut table: [Option<i32>; LABELS] = [None; LABELS];
            for i in 0..l {
                for j in 0..l {
                    let v = kernel.at(i, j);
                    if v == 0 {
                        continue;
                    }
                    let slot = &mut table[(g.get(i, j) - 1) as usize];
                    match *slot {
                        None => *slot = Some(v),
                        Some(w) if w == v => {}
                        Some(_) => continue 'seed,
                    }
                }
            }
            let f = StrengthFunction {
                table: table.map(|t| t.unwrap_or(1)),
            };
            let spec = SymmetricKernelSpec {
                f,
                rho: vec![rho],
                sigma1,
                sigma2,
                mask: mask.clone(),
            };
            if materialize(&spec).map(|k| &k == kernel).unwrap_or(false) {
                return Some(spec);
            }
        }
    }
    None
}

/// Number of parameter tuples `2^(m·l²) · |f| · 120 · 4^m`.
///
/// `|f|` is 16 in the ternary regime and `511^4` otherwise. Distinct
/// tuples can produce the same kernel; see [`count_distinct`].
pub fn count_family(l: u32, m: u32, ternary: bool) -> BigUint {
    let masks = BigUint::from(2u32).pow(m * l * l);
    let f_choices = if ternary {
        BigUint::from(16u32)
    } else {
        BigUint::from((2 * MAX_STRENGTH + 1) as u32).pow(LABELS as u32)
    };
    let pairs = BigUint::from(enumerate_commuting_pairs().len());
    let seeds = BigUint::from(LABELS as u32).pow(m);
    masks * f_choices * pairs * seeds
}

/// Exhaustively counts distinct ternary-regime kernels of shape `l × l × m`.
///
/// Only feasible for tiny shapes; `l² · m` is capped at 8.
pub fn count_distinct(l: usize, m: usize) -> Result<u64> {
    if l == 0 || m == 0 || l * l * m > 8 {
        return Err(Error::Dimension(format!(
            "exhaustive count supports l*l*m in 1..=8, got {l}x{l}x{m}"
        )));
    }
    let cells = l * l * m;
    let mut seen: HashSet<Vec<i32>> = HashSet::new();
    let pairs = enumerate_commuting_pairs();
    let fs = StrengthFunction::ternary_choices();
    for (sigma1, sigma2) in &pairs {
        for f in &fs {
            for seeds in 0..LABELS.pow(m as u32) {
                let rho: Vec<u8> = (0..m)
                    .map(|k| ((seeds / LABELS.pow(k as u32)) % LABELS) as u8 + 1)
                    .collect();
                let pattern = SymmetricStructure {
                    f: *f,
                    rho,
                    sigma1: *sigma1,
                    sigma2: *sigma2,
                }
                .pattern(l);
                for bits in 0u32..(1 << cells) {
                    let kernel: Vec<i32> = pattern
                        .as_slice()
                        .iter()
                        .enumerate()
                        .map(|(c, &p)| if bits & (1 << c) != 0 { p } else { 0 })
                        .collect();
                    seen.insert(kernel);
                }
            }
        }
    }
    Ok(seen.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn double_swap() -> Permutation {
        Permutation::new([2, 1, 4, 3]).unwrap()
    }

    pub(crate) fn laplacian_spec() -> SymmetricKernelSpec {
        SymmetricKernelSpec {
            f: StrengthFunction::new([4, -1, 4, 4]).unwrap(),
            rho: vec![1],
            sigma1: double_swap(),
            sigma2: double_swap(),
            mask: Kernel::from_rows(vec![vec![0, 1, 0], vec![1, 1, 1], vec![0, 1, 0]]).unwrap(),
        }
    }

    fn prewitt_spec() -> SymmetricKernelSpec {
        SymmetricKernelSpec {
            f: StrengthFunction::new([-1, -1, 1, 1]).unwrap(),
            rho: vec![1],
            sigma1: Permutation::IDENTITY,
            sigma2: Permutation::four_cycle(),
            mask: Kernel::from_rows(vec![vec![1, 0, 1], vec![1, 0, 1], vec![1, 0, 1]]).unwrap(),
        }
    }

    #[test]
    fn laplacian_and_prewitt() {
        let k = materialize_2d(&laplacian_spec()).unwrap();
        assert_eq!(k.to_rows(), vec![vec![0, -1, 0], vec![-1, 4, -1], vec![0, -1, 0]]);
        let k = materialize_2d(&prewitt_spec()).unwrap();
        assert_eq!(k.to_rows(), vec![vec![-1, 0, 1], vec![-1, 0, 1], vec![-1, 0, 1]]);
    }

    #[test]
    fn zero_mask_gives_zero_kernel() {
        let mut spec = laplacian_spec();
        spec.mask = Kernel::filled(3, 1, 0);
        assert!(materialize_2d(&spec).unwrap().as_slice().iter().all(|&v| v == 0));
    }

    #[test]
    fn rejects_non_commuting_pair() {
        let mut spec = laplacian_spec();
        spec.sigma1 = Permutation::swap(1, 2).unwrap();
        spec.sigma2 = Permutation::four_cycle();
        assert!(matches!(materialize_2d(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn strength_range_enforced() {
        assert!(StrengthFunction::new([256, 0, 0, 0]).is_err());
        assert!(serde_json::from_str::<StrengthFunction>("[1,2,3,-300]").is_err());
        assert_eq!(StrengthFunction::ternary_choices().len(), 16);
        assert!(StrengthFunction::ternary_choices()
            .iter()
            .all(StrengthFunction::is_ternary));
    }

    #[test]
    fn pattern_matrix_examples() {
        let ident = StrengthFunction::new([1, 2, 3, 4]).unwrap();
        let p = pattern_matrix(&double_swap(), &double_swap(), 1, &ident, 3).unwrap();
        assert_eq!(p.to_rows(), vec![vec![1, 2, 1], vec![2, 1, 2], vec![1, 2, 1]]);
        let f = StrengthFunction::new([7, -3, 2, 9]).unwrap();
        let p = pattern_matrix(&Permutation::IDENTITY, &Permutation::IDENTITY, 2, &f, 4).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == -3));
        let p = pattern_matrix(&double_swap(), &double_swap(), 3, &f, 1).unwrap();
        assert_eq!(p.to_rows(), vec![vec![2]]);
    }

    #[test]
    fn materialize_3d_slices() {
        let mut spec = laplacian_spec();
        assert_eq!(materialize_3d(&spec).unwrap(), materialize_2d(&spec).unwrap());

        spec.rho = vec![1, 1];
        let mask2 = laplacian_spec().mask;
        spec.mask = Kernel::stack(&[mask2.clone(), mask2]).unwrap();
        let k = materialize_3d(&spec).unwrap();
        assert_eq!(k.slice(0), k.slice(1));
        assert!(materialize_2d(&spec).is_err());
    }

    #[test]
    fn materialize_3d_matches_per_slice_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let spec = SymmetricKernelSpec::random(&mut rng, 3, 4, 9);
            let k = materialize_3d(&spec).unwrap();
            for s in 0..4 {
                for i in 0..3 {
                    for j in 0..3 {
                        // direct evaluation with explicit loops over compositions
                        let mut label = spec.rho[s];
                        for _ in 0..j {
                            label = spec.sigma2.apply(label);
                        }
                        for _ in 0..i {
                            label = spec.sigma1.apply(label);
                        }
                        let want = i32::from(spec.mask.get(i, j, s)) * spec.f.apply(label);
                        assert_eq!(k.get(i, j, s), want);
                    }
                }
            }
        }
    }

    #[test]
    fn membership_examples() {
        let lap = materialize_2d(&laplacian_spec()).unwrap();
        let found = is_symmetric_kernel(&lap).expect("laplacian is symmetric");
        assert_eq!(materialize_2d(&found).unwrap(), lap);
        let dense = Kernel::from_rows(vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]).unwrap();
        assert!(is_symmetric_kernel(&dense).is_none());
    }

    #[test]
    fn membership_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let range = if trial % 2 == 0 { 1 } else { 255 };
            let spec = SymmetricKernelSpec::random(&mut rng, 1 + trial % 4, 1, range);
            let k = materialize_2d(&spec).unwrap();
            let found = is_symmetric_kernel(&k).unwrap_or_else(|| panic!("trial {trial}: {spec:?}"));
            assert_eq!(materialize_2d(&found).unwrap(), k);
        }
    }

    #[test]
    fn value_count_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let spec = SymmetricKernelSpec::random(&mut rng, 5, 1, 1);
            let k = materialize_2d(&spec).unwrap();
            let distinct: HashSet<i32> = k.as_slice().iter().copied().filter(|&v| v != 0).collect();
            assert!(distinct.len() <= 2);
            let spec = SymmetricKernelSpec::random(&mut rng, 5, 1, 200);
            let k = materialize_2d(&spec).unwrap();
            let distinct: HashSet<i32> = k.as_slice().iter().copied().filter(|&v| v != 0).collect();
            assert!(distinct.len() <= 4);
        }
    }

    #[test]
    fn zeroing_one_mask_entry_is_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let spec = SymmetricKernelSpec::random(&mut rng, 4, 1, 50);
            let base = materialize_2d(&spec).unwrap();
            let (i, j) = (rng.gen_range(0..4), rng.gen_range(0..4));
            let mut zeroed = spec.clone();
            zeroed.mask.set(i, j, 0, 0);
            let k = materialize_2d(&zeroed).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    let want = if (a, b) == (i, j) { 0 } else { base.at(a, b) };
                    assert_eq!(k.at(a, b), want);
                }
            }
        }
    }

    #[test]
    fn family_counts() {
        assert_eq!(count_family(3, 1, true), BigUint::from(3_932_160u64));
        assert_eq!(count_family(1, 1, true), BigUint::from(15_360u64));
        let big = count_family(3, 8, true);
        let expected = BigUint::from(2u32).pow(72) * 16u32 * 120u32 * BigUint::from(4u32).pow(8);
        assert_eq!(big, expected);
        assert_eq!(big.to_string(), "594211218856982531951579627520");
        assert_eq!(count_family(1, 1, false), BigUint::from(2u64 * 511u64.pow(4) * 120 * 4));
    }

    #[test]
    fn distinct_count_is_smaller() {
        // l = 1: kernels are B·f(ρ) ∈ {-1, 0, 1}.
        assert_eq!(count_distinct(1, 1).unwrap(), 3);
        assert!(BigUint::from(count_distinct(1, 1).unwrap()) < count_family(1, 1, true));
        let d = count_distinct(2, 1).unwrap();
        assert!(BigUint::from(d) < count_family(2, 1, true));
        assert!(count_distinct(3, 1).is_err());
    }

    #[test]
    fn spec_json_format() {
        let json = serde_json::to_string(&laplacian_spec()).unwrap();
        assert_eq!(
            json,
            r#"{"f":[4,-1,4,4],"rho":[1],"sigma1":[2,1,4,3],"sigma2":[2,1,4,3],"B":[[0,1,0],[1,1,1],[0,1,0]]}"#
        );
        let back: SymmetricKernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, laplacian_spec());
    }
}
