//! Lowering symmetric kernels onto a 256 × 256 crossbar core and back.
//!
//! A core's weight matrix factors as `M = [s_1(g) … s_N(g)] ∘ C`: a type
//! label per input line (`g`), a binary connectivity matrix (`C`) and a
//! 4-entry strength table per neuron (`s_r`). [`compile`] builds that
//! factorization for a symmetric kernel so that `M` equals the block Toeplitz
//! convolution matrix; [`decompile`] recovers kernel parameters from a
//! kernel by coloring the rows of its convolution matrix.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{label_matrix, materialize, StrengthFunction, SymmetricKernelSpec, MAX_STRENGTH};
use crate::permutation::{Permutation, LABELS};
use crate::tensor::{Kernel, Matrix};
use crate::toeplitz::{build_block_toeplitz, structural_entries, BlockToeplitzMatrix};

/// Input lines per core.
pub const CORE_INPUTS: usize = 256;
/// Neurons per core.
pub const CORE_NEURONS: usize = 256;

fn one() -> usize {
    1
}

fn is_one(m: &usize) -> bool {
    *m == 1
}

/// The `(g, C, {s_r})` triple for one core, plus the convolution geometry it
/// was compiled for. Serialized as the hardware configuration file.
///
/// Values are stored raw so that out-of-range programs can be loaded and
/// diagnosed with [`check_core_constraints`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreProgram {
    pub n: usize,
    pub l: usize,
    /// Number of kernel slices sharing the core; slice `k` occupies input
    /// lines `k·n² .. (k+1)·n²`.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub m: usize,
    pub g: Vec<u8>,
    #[serde(rename = "C")]
    pub connectivity: Matrix<u8>,
    pub strengths: Vec<[i32; LABELS]>,
}

impl CoreProgram {
    pub fn input_lines(&self) -> usize {
        self.g.len()
    }

    pub fn neurons(&self) -> usize {
        self.strengths.len()
    }

    pub fn outputs_per_side(&self) -> usize {
        self.n + 1 - self.l
    }

    fn check_shape(&self) -> Result<()> {
        if self.connectivity.rows() != self.g.len() || self.connectivity.cols() != self.strengths.len() {
            return Err(Error::Dimension(format!(
                "C is {}x{} but g has {} lines and there are {} strength tables",
                self.connectivity.rows(),
                self.connectivity.cols(),
                self.g.len(),
                self.strengths.len()
            )));
        }
        Ok(())
    }
}

/// One violated core constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostic {
    InputLines { lines: usize, limit: usize },
    Neurons { neurons: usize, limit: usize },
    StrengthRange { neuron: usize, entry: usize, value: i32 },
    TypeRange { line: usize, value: u8 },
    Shape { detail: String },
}

/// Empty iff the program fits one core and every table entry is in range.
pub fn check_core_constraints(program: &CoreProgram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if program.input_lines() > CORE_INPUTS {
        out.push(Diagnostic::InputLines {
            lines: program.input_lines(),
            limit: CORE_INPUTS,
        });
    }
    if program.neurons() > CORE_NEURONS {
        out.push(Diagnostic::Neurons {
            neurons: program.neurons(),
            limit: CORE_NEURONS,
        });
    }
    for (neuron, table) in program.strengths.iter().enumerate() {
        for (entry, &value) in table.iter().enumerate() {
            if value.abs() > MAX_STRENGTH {
                out.push(Diagnostic::StrengthRange { neuron, entry, value });
            }
        }
    }
    for (line, &value) in program.g.iter().enumerate() {
        if !(1..=LABELS as u8).contains(&value) {
            out.push(Diagnostic::TypeRange { line, value });
        }
    }
    if let Err(e) = program.check_shape() {
        out.push(Diagnostic::Shape { detail: e.to_string() });
    }
    out
}

/// Builds the core program for `spec` on `n × n` inputs without enforcing
/// core capacity.
pub fn build_program(spec: &SymmetricKernelSpec, n: usize) -> Result<CoreProgram> {
    spec.validate()?;
    let l = spec.side();
    if n < l {
        return Err(Error::Dimension(format!(
            "input side {n} is smaller than kernel side {l}"
        )));
    }
    let m = spec.depth();
    let out = n + 1 - l;
    let lines = m * n * n;

    let mut g = Vec::with_capacity(lines);
    for &rho in &spec.rho {
        g.extend(label_matrix(&spec.sigma1, &spec.sigma2, rho, n).vect());
    }

    let mut connectivity = Matrix::filled(lines, out * out, 0u8);
    for k in 0..m {
        for e in structural_entries(n, l) {
            connectivity.set(k * n * n + e.row, e.col, spec.mask.get(e.ki, e.kj, k));
        }
    }

    let sigma1_inv = spec.sigma1.inverse();
    let sigma2_inv = spec.sigma2.inverse();
    let mut strengths = Vec::with_capacity(out * out);
    for b in 0..out {
        let col_shift = sigma2_inv.power(b as u64);
        for a in 0..out {
            // s_r = f · (σ1^a)⁻¹ · (σ2^b)⁻¹
            let undo = sigma1_inv.power(a as u64).compose(&col_shift);
            strengths.push(spec.f.after(&undo).table());
        }
    }

    Ok(CoreProgram {
        n,
        l,
        m,
        g,
        connectivity,
        strengths,
    })
}

/// Compiles `spec` for `n × n` inputs, refusing programs that overflow a core.
pub fn compile(spec: &SymmetricKernelSpec, n: usize) -> Result<CoreProgram> {
    let l = spec.side();
    let lines = spec.depth() * n * n;
    if lines > CORE_INPUTS {
        return Err(Error::Capacity(format!("{lines} input lines > {CORE_INPUTS}")));
    }
    if n >= l {
        let neurons = (n + 1 - l).pow(2);
        if neurons > CORE_NEURONS {
            return Err(Error::Capacity(format!("{neurons} neurons > {CORE_NEURONS}")));
        }
    }
    build_program(spec, n)
}

/// `M(g, C, {s_r})`: column `r` is `s_r(g) ∘ C_r`.
pub fn assemble_weight_matrix(program: &CoreProgram) -> Result<Matrix<i32>> {
    program.check_shape()?;
    if let Some(d) = check_core_constraints(program)
        .into_iter()
        .find(|d| matches!(d, Diagnostic::TypeRange { .. }))
    {
        return Err(Error::InvalidSpec(format!("{d:?}")));
    }
    Ok(Matrix::from_fn(program.input_lines(), program.neurons(), |p, r| {
        let label = program.g[p];
        i32::from(program.connectivity.get(p, r)) * program.strengths[r][(label - 1) as usize]
    }))
}

/// Runs the core on a vector of input-line values: `xᵀ · M`.
pub fn simulate_lines(program: &CoreProgram, lines: &[i64]) -> Result<Vec<i64>> {
    let m = assemble_weight_matrix(program)?.map(i64::from);
    m.left_mul(lines)
}

/// Runs an `m = 1` core on an `n × n` input, returning one value per neuron.
pub fn simulate_core(program: &CoreProgram, x: &Matrix<i64>) -> Result<Vec<i64>> {
    if program.m != 1 || x.rows() != program.n || x.cols() != program.n {
        return Err(Error::Dimension(format!(
            "core expects a single {0}x{0} input, got {1}x{2}",
            program.n,
            x.rows(),
            x.cols()
        )));
    }
    simulate_lines(program, &x.vect())
}

/// Runs a multi-slice core on one `n × n` input per slice.
pub fn simulate_core_slices(program: &CoreProgram, slices: &[Matrix<i64>]) -> Result<Vec<i64>> {
    if slices.len() != program.m || slices.iter().any(|x| x.rows() != program.n || x.cols() != program.n) {
        return Err(Error::Dimension(format!(
            "core expects {} inputs of size {}x{}",
            program.m, program.n, program.n
        )));
    }
    let lines: Vec<i64> = slices.iter().flat_map(Matrix::vect).collect();
    simulate_lines(program, &lines)
}

/// First place where no type assignment can satisfy a column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    /// Column (neuron) index of `W` being processed.
    pub column: usize,
    /// The row that could not be satisfied.
    pub row: usize,
    /// The row already holding the clashing color, if any.
    pub other_row: Option<usize>,
    pub color: Option<u8>,
    pub value: i32,
    pub other_value: Option<i32>,
}

/// Type assignment for the rows of a convolution matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coloring {
    /// Color in `1..=4` per row, `None` for rows that are zero in every column.
    pub colors: Vec<Option<u8>>,
    /// Per column, the unique nonzero value demanded by each color.
    pub tables: Vec<[Option<i32>; LABELS]>,
    pub conflict: Option<Conflict>,
}

impl Coloring {
    pub fn is_conflict_free(&self) -> bool {
        self.conflict.is_none()
    }

    pub fn colors_used(&self) -> usize {
        self.colors.iter().flatten().collect::<BTreeSet<_>>().len()
    }

    /// Type vector with uncolored rows assigned label 1.
    pub fn type_vector(&self) -> Vec<u8> {
        self.colors.iter().map(|c| c.unwrap_or(1)).collect()
    }

    /// Strength tables with unused colors set to 0.
    pub fn strength_tables(&self) -> Vec<[i32; LABELS]> {
        self.tables.iter().map(|t| t.map(|v| v.unwrap_or(0))).collect()
    }
}

/// Colors the rows of `target` column by column.
///
/// Within a column, rows that already carry a color are checked first (a
/// color may demand only one nonzero value per column); each uncolored row
/// then takes the color already bound to its value, or else the lowest color
/// not yet bound in that column. Colors therefore appear in first-use order.
/// Processing stops at the first conflict.
pub fn greedy_color(target: &BlockToeplitzMatrix<i32>) -> Coloring {
    color_matrix(&target.matrix)
}

pub fn color_matrix(target: &Matrix<i32>) -> Coloring {
    let rows = target.rows();
    let mut colors: Vec<Option<u8>> = vec![None; rows];
    let mut tables = Vec::with_capacity(target.cols());

    for column in 0..target.cols() {
        let mut bound: [Option<(i32, usize)>; LABELS] = [None; LABELS];
        let mut pending = Vec::new();
        for row in 0..rows {
            let value = target.get(row, column);
            if value == 0 {
                continue;
            }
            let Some(color) = colors[row] else {
                pending.push(row);
                continue;
            };
            let slot = &mut bound[(color - 1) as usize];
            match *slot {
                None => *slot = Some((value, row)),
                Some((v, _)) if v == value => {}
                Some((v, other)) => {
                    tables.push(bound.map(|b| b.map(|(v, _)| v)));
                    return Coloring {
                        colors,
                        tables,
                        conflict: Some(Conflict {
                            column,
                            row,
                            other_row: Some(other),
                            color: Some(color),
                            value,
                            other_value: Some(v),
                        }),
                    };
                }
            }
        }
        for row in pending {
            let value = target.get(row, column);
            let choice = bound
                .iter()
                .position(|b| matches!(b, Some((v, _)) if *v == value))
                .or_else(|| bound.iter().position(Option::is_none));
            match choice {
                Some(c) => {
                    colors[row] = Some(c as u8 + 1);
                    if bound[c].is_none() {
                        bound[c] = Some((value, row));
                    }
                }
                None => {
                    tables.push(bound.map(|b| b.map(|(v, _)| v)));
                    return Coloring {
                        colors,
                        tables,
                        conflict: Some(Conflict {
                            column,
                            row,
                            other_row: None,
                            color: None,
                            value,
                            other_value: None,
                        }),
                    };
                }
            }
        }
        tables.push(bound.map(|b| b.map(|(v, _)| v)));
    }

    Coloring {
        colors,
        tables,
        conflict: None,
    }
}

/// Builds the program induced by a conflict-free coloring of `target`:
/// `g` from the colors, `C` from the nonzero pattern, `s_r` from the tables.
pub fn program_from_coloring(target: &BlockToeplitzMatrix<i32>, coloring: &Coloring) -> Result<CoreProgram> {
    if let Some(conflict) = &coloring.conflict {
        return Err(Error::NotRepresentable {
            reason: format!("coloring conflict in column {}", conflict.column),
            conflict: Some(conflict.clone()),
        });
    }
    Ok(CoreProgram {
        n: target.n,
        l: target.l,
        m: 1,
        g: coloring.type_vector(),
        connectivity: target.matrix.map(|v| u8::from(v != 0)),
        strengths: coloring.strength_tables(),
    })
}

fn not_representable(reason: impl Into<String>) -> Error {
    Error::NotRepresentable {
        reason: reason.into(),
        conflict: None,
    }
}

/// Inverts a table that maps the four colors bijectively onto values.
fn invert_table(table: &[Option<i32>; LABELS], values: &[i32]) -> Option<[u8; LABELS]> {
    // result[v_index] = color whose value is values[v_index]
    let mut out = [0u8; LABELS];
    for (vi, &v) in values.iter().enumerate() {
        let colors: Vec<usize> = (0..LABELS).filter(|&c| table[c] == Some(v)).collect();
        if colors.len() != 1 {
            return None;
        }
        out[vi] = colors[0] as u8 + 1;
    }
    Some(out)
}

/// Recovers `(f, ρ, σ1, σ2)` for a kernel with no zeros and four distinct
/// entries, using the coloring of `W(K)` on `n × n` inputs.
///
/// With `s_r` the strength tables read off the coloring, `f = s_1`,
/// `σ1 = s_2⁻¹ · s_1`, `σ2 = s_{n−l+2}⁻¹ · s_1` and `ρ` is the color of the
/// first input line. The returned mask is all ones. Recovery is up to a
/// relabeling of the four types.
pub fn decompile(kernel: &Kernel<i32>, n: usize) -> Result<SymmetricKernelSpec> {
    if kernel.depth() != 1 {
        return Err(Error::Dimension("decompile takes a 2-D kernel".into()));
    }
    let l = kernel.side();
    if kernel.as_slice().contains(&0) {
        return Err(Error::InvalidSpec("decompile requires a kernel without zeros".into()));
    }
    let distinct: BTreeSet<i32> = kernel.as_slice().iter().copied().collect();
    if distinct.len() < LABELS {
        return Err(Error::InvalidSpec(format!(
            "decompile requires at least four distinct entries, found {}",
            distinct.len()
        )));
    }
    if n < l + 1 {
        return Err(Error::Dimension(format!(
            "decompile needs n >= l + 1 to observe both shifts, got n={n}, l={l}"
        )));
    }
    if n * n > CORE_INPUTS {
        return Err(Error::Capacity(format!("{} input lines > {CORE_INPUTS}", n * n)));
    }

    let w = build_block_toeplitz(kernel, n)?;
    let coloring = greedy_color(&w);
    if let Some(conflict) = coloring.conflict {
        let reason = match conflict.other_row {
            Some(other) => format!(
                "rows {other} and {} cannot share a type in column {}",
                conflict.row, conflict.column
            ),
            None => format!("row {} needs a fifth type in column {}", conflict.row, conflict.column),
        };
        return Err(Error::NotRepresentable {
            reason,
            conflict: Some(conflict),
        });
    }

    let out = n + 1 - l;
    let s1 = &coloring.tables[0];
    let s_down = &coloring.tables[1];
    let s_right = &coloring.tables[out];
    let values: Vec<i32> = distinct.into_iter().collect();

    let f_table = s1.map(|v| v.unwrap_or(0));
    let f = StrengthFunction::new(f_table).map_err(|e| not_representable(e.to_string()))?;
    let by_value = |table: &[Option<i32>; LABELS]| {
        invert_table(table, &values).ok_or_else(|| not_representable("strength tables are not bijections"))
    };
    let s_down_inv = by_value(s_down)?;
    let s_right_inv = by_value(s_right)?;
    let compose_with_f = |inv: &[u8; LABELS]| -> Result<Permutation> {
        let mut image = [0u8; LABELS];
        for (c, slot) in image.iter_mut().enumerate() {
            let v = f_table[c];
            let vi = values
                .iter()
                .position(|&x| x == v)
                .ok_or_else(|| not_representable("first strength table misses a value"))?;
            *slot = inv[vi];
        }
        Permutation::new(image).map_err(|e| not_representable(e.to_string()))
    };
    let sigma1 = compose_with_f(&s_down_inv)?;
    let sigma2 = compose_with_f(&s_right_inv)?;
    if !sigma1.commutes(&sigma2) {
        return Err(not_representable(format!(
            "recovered {sigma1} and {sigma2} do not commute"
        )));
    }
    let rho = coloring.colors[0].ok_or_else(|| not_representable("first input line has no type"))?;

    let spec = SymmetricKernelSpec {
        f,
        rho: vec![rho],
        sigma1,
        sigma2,
        mask: Kernel::filled(l, 1, 1),
    };
    if &materialize(&spec)? != kernel {
        return Err(not_representable("recovered parameters do not reproduce the kernel"));
    }
    Ok(spec)
}

/// Reshapes neuron outputs (column `b·N + a` holds `Y[a][b]`) into the
/// `N × N` output image.
pub fn outputs_as_matrix(program: &CoreProgram, outputs: &[i64]) -> Result<Matrix<i64>> {
    let side = program.outputs_per_side();
    Matrix::from_vect(side, side, outputs)
}

/// Accepts a 2-D kernel that is exactly symmetric; otherwise reports the
/// first coloring conflict of its convolution matrix on `(l+1) × (l+1)`
/// inputs when there is one.
pub fn check_kernel(kernel: &Kernel<i32>) -> Result<SymmetricKernelSpec> {
    if kernel.depth() != 1 {
        return Err(Error::Dimension("membership check takes a 2-D kernel".into()));
    }
    if let Some(spec) = crate::kernels::is_symmetric_kernel(kernel) {
        return Ok(spec);
    }
    let w = build_block_toeplitz(kernel, kernel.side() + 1)?;
    Err(Error::NotRepresentable {
        reason: "no commuting pair, seed and strength table reproduce the kernel".into(),
        conflict: greedy_color(&w).conflict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{is_symmetric_kernel, materialize_2d};
    use crate::toeplitz::conv2d_valid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_spec() -> SymmetricKernelSpec {
        let ds = Permutation::new([2, 1, 4, 3]).unwrap();
        SymmetricKernelSpec {
            f: StrengthFunction::new([4, -1, 4, 4]).unwrap(),
            rho: vec![1],
            sigma1: ds,
            sigma2: ds,
            mask: Kernel::from_rows(vec![vec![0, 1, 0], vec![1, 1, 1], vec![0, 1, 0]]).unwrap(),
        }
    }

    fn toy_kernel() -> Kernel<i32> {
        Kernel::from_rows(vec![vec![-1, 2, -1], vec![-2, 4, -2], vec![-1, 2, -1]]).unwrap()
    }

    #[test]
    fn laplacian_core_matches_toeplitz() {
        let spec = laplacian_spec();
        let program = compile(&spec, 16).unwrap();
        assert_eq!((program.input_lines(), program.neurons()), (256, 196));
        assert!(check_core_constraints(&program).is_empty());
        let m = assemble_weight_matrix(&program).unwrap();
        let w = build_block_toeplitz(&materialize_2d(&spec).unwrap(), 16).unwrap();
        assert_eq!(m, w.matrix);
        // G alternates 1, 2 for this spec
        assert_eq!(&program.g[..4], &[1, 2, 1, 2]);
    }

    #[test]
    fn toy_strength_tables() {
        let spec = decompile(&toy_kernel(), 4).unwrap();
        let program = compile(&spec, 4).unwrap();
        assert_eq!(
            program.strengths,
            vec![[-1, -2, 2, 4], [-2, -1, 4, 2], [2, 4, -1, -2], [4, 2, -2, -1]]
        );
        assert_eq!(program.g, vec![1, 2, 1, 2, 3, 4, 3, 4, 1, 2, 1, 2, 3, 4, 3, 4]);
    }

    #[test]
    fn single_tap_program() {
        let spec = SymmetricKernelSpec {
            f: StrengthFunction::new([3, 3, 3, 3]).unwrap(),
            rho: vec![2],
            sigma1: Permutation::IDENTITY,
            sigma2: Permutation::IDENTITY,
            mask: Kernel::filled(1, 1, 1),
        };
        let program = compile(&spec, 5).unwrap();
        assert_eq!(program.connectivity, Matrix::from_fn(25, 25, |r, c| u8::from(r == c)));
        assert!(program.strengths.iter().all(|t| t.iter().all(|&v| v == 3)));
    }

    #[test]
    fn zero_connectivity_assembles_to_zero() {
        let mut program = compile(&laplacian_spec(), 6).unwrap();
        program.connectivity = program.connectivity.map(|_| 0);
        assert!(assemble_weight_matrix(&program)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0));
    }

    #[test]
    fn simulate_examples() {
        let program = compile(&laplacian_spec(), 8).unwrap();
        let zero = Matrix::filled(8, 8, 0i64);
        assert!(simulate_core(&program, &zero).unwrap().iter().all(|&v| v == 0));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_fn(8, 8, |_, _| rng.gen_range(-20i64..=20));
        let k = materialize_2d(&laplacian_spec()).unwrap().map(i64::from);
        assert_eq!(
            simulate_core(&program, &x).unwrap(),
            conv2d_valid(&x, &k, 1).unwrap().vect()
        );

        // impulse at (a+1, b+1) lights the centre tap of output (a, b)
        let (a, b) = (2, 3);
        let mut x = Matrix::filled(8, 8, 0i64);
        x.set(a + 1, b + 1, 1);
        let y = simulate_core(&program, &x).unwrap();
        assert_eq!(y[b * 6 + a], 4);
        assert!(simulate_core(&program, &Matrix::filled(7, 7, 0)).is_err());
    }

    #[test]
    fn capacity_diagnostics() {
        let spec = laplacian_spec();
        assert!(matches!(compile(&spec, 17), Err(Error::Capacity(_))));
        let program = build_program(&spec, 17).unwrap();
        let diags = check_core_constraints(&program);
        assert!(diags.contains(&Diagnostic::InputLines { lines: 289, limit: 256 }));

        let mut program = compile(&spec, 4).unwrap();
        program.strengths[1][2] = 300;
        assert_eq!(
            check_core_constraints(&program),
            vec![Diagnostic::StrengthRange {
                neuron: 1,
                entry: 2,
                value: 300
            }]
        );
        program.strengths[1][2] = 0;
        program.g[3] = 9;
        assert_eq!(
            check_core_constraints(&program),
            vec![Diagnostic::TypeRange { line: 3, value: 9 }]
        );
    }

    #[test]
    fn compile_rejects_non_commuting() {
        let mut spec = laplacian_spec();
        spec.sigma1 = Permutation::swap(1, 2).unwrap();
        spec.sigma2 = Permutation::four_cycle();
        assert!(matches!(compile(&spec, 8), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn sufficiency_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let l = rng.gen_range(1..=3);
            let n = rng.gen_range(8..=16);
            let spec = SymmetricKernelSpec::random(&mut rng, l, 1, 255);
            let program = compile(&spec, n).unwrap();
            let w = build_block_toeplitz(&materialize_2d(&spec).unwrap(), n).unwrap();
            assert_eq!(assemble_weight_matrix(&program).unwrap(), w.matrix);
        }
    }

    #[test]
    fn multi_slice_core_sums_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let spec = SymmetricKernelSpec::random(&mut rng, 3, 3, 1);
            let program = compile(&spec, 8).unwrap();
            assert!(check_core_constraints(&program).is_empty());
            let k = materialize(&spec).unwrap().map(i64::from);
            let xs: Vec<Matrix<i64>> = (0..3)
                .map(|_| Matrix::from_fn(8, 8, |_, _| rng.gen_range(-3..=3)))
                .collect();
            let mut want = vec![0i64; 36];
            for (s, x) in xs.iter().enumerate() {
                for (acc, v) in want.iter_mut().zip(conv2d_valid(x, &k.slice(s), 1).unwrap().vect()) {
                    *acc += v;
                }
            }
            assert_eq!(simulate_core_slices(&program, &xs).unwrap(), want);
        }
        let spec = SymmetricKernelSpec::random(&mut rng, 3, 5, 1);
        assert!(matches!(compile(&spec, 8), Err(Error::Capacity(_))));
    }

    #[test]
    fn greedy_toy_coloring_matches_first_appearance() {
        let w = build_block_toeplitz(&toy_kernel(), 4).unwrap();
        let coloring = greedy_color(&w);
        assert!(coloring.is_conflict_free());
        assert_eq!(
            coloring.type_vector(),
            vec![1, 2, 1, 2, 3, 4, 3, 4, 1, 2, 1, 2, 3, 4, 3, 4]
        );
        let program = program_from_coloring(&w, &coloring).unwrap();
        assert_eq!(assemble_weight_matrix(&program).unwrap(), w.matrix);
    }

    #[test]
    fn greedy_constant_kernel_uses_one_color() {
        let k = Kernel::filled(2, 1, 1);
        let coloring = greedy_color(&build_block_toeplitz(&k, 5).unwrap());
        assert!(coloring.is_conflict_free());
        assert_eq!(coloring.colors_used(), 1);
    }

    #[test]
    fn greedy_matches_label_matrix_up_to_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 50 {
            let mut spec = SymmetricKernelSpec::random(&mut rng, 3, 1, 1000);
            spec.mask = Kernel::filled(3, 1, 1);
            let k = materialize_2d(&spec).unwrap();
            if k.as_slice().contains(&0) || k.as_slice().iter().collect::<BTreeSet<_>>().len() != 4 {
                continue;
            }
            checked += 1;
            let n = 6;
            let coloring = greedy_color(&build_block_toeplitz(&k, n).unwrap());
            assert!(coloring.is_conflict_free());
            assert!(coloring.colors_used() <= 4);
            let g = label_matrix(&spec.sigma1, &spec.sigma2, spec.rho[0], n).vect();
            let mut relabel: [Option<u8>; 4] = [None; 4];
            for (c, t) in coloring.type_vector().iter().zip(&g) {
                let slot = &mut relabel[(*c - 1) as usize];
                assert_eq!(*slot.get_or_insert(*t), *t);
            }
        }
    }

    #[test]
    fn decompile_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 100 {
            let l = rng.gen_range(2..=4);
            let mut spec = SymmetricKernelSpec::random(&mut rng, l, 1, 255);
            spec.mask = Kernel::filled(l, 1, 1);
            let k = materialize_2d(&spec).unwrap();
            if k.as_slice().contains(&0) || k.as_slice().iter().collect::<BTreeSet<_>>().len() < 4 {
                continue;
            }
            checked += 1;
            let n = rng.gen_range(l + 1..=16);
            let found = decompile(&k, n).unwrap_or_else(|e| panic!("{spec:?} n={n}: {e}"));
            assert_eq!(materialize_2d(&found).unwrap(), k);
        }
    }

    #[test]
    fn decompile_rejects() {
        let dense = Kernel::from_rows(vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]).unwrap();
        let err = decompile(&dense, 4).unwrap_err();
        assert!(matches!(err, Error::NotRepresentable { conflict: Some(_), .. }));
        let with_zero = Kernel::from_rows(vec![vec![0, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]).unwrap();
        assert!(matches!(decompile(&with_zero, 4), Err(Error::InvalidSpec(_))));
        let few = Kernel::from_rows(vec![vec![1, 2], vec![2, 1]]).unwrap();
        assert!(matches!(decompile(&few, 4), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn crafted_asymmetric_kernel_conflicts() {
        let k = crafted_asymmetric();
        assert!(is_symmetric_kernel(&k).is_none());
        let coloring = greedy_color(&build_block_toeplitz(&k, 4).unwrap());
        assert!(coloring.conflict.is_some());
    }

    #[test]
    fn check_kernel_reports_conflict() {
        let spec = laplacian_spec();
        assert!(check_kernel(&materialize_2d(&spec).unwrap()).is_ok());
        match check_kernel(&crafted_asymmetric()) {
            Err(Error::NotRepresentable { conflict: Some(c), .. }) => assert!(c.column < 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn outputs_reshape_column_major() {
        let program = compile(&laplacian_spec(), 4).unwrap();
        let m = outputs_as_matrix(&program, &[1, 2, 3, 4]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1, 3], vec![2, 4]]);
    }

    fn crafted_asymmetric() -> Kernel<i32> {
        Kernel::from_rows(vec![vec![1, 2, 3], vec![4, 1, 2], vec![3, 4, 4]]).unwrap()
    }
}
