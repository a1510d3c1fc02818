//! Valid 2-D convolution and its block Toeplitz matrix form.
//!
//! With column-major vectorization, `vect(X ∗ K)ᵀ = vect(X)ᵀ · W(K)` where
//! `W(K)` has one row per input pixel and one column per output position.
//! Row `c·n + r` carries pixel `X[r][c]`; column `b·(n−l+1) + a` carries
//! output `Y[a][b]` (all 0-based).

use std::ops::{Add, Mul};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Kernel, Matrix};

/// Sliding correlation without padding: `Y[a][b] = Σ X[a·s+i][b·s+j] · K[i][j]`.
pub fn conv2d_valid<T>(x: &Matrix<T>, k: &Kernel<T>, stride: usize) -> Result<Matrix<T>>
where
    T: Copy + Zero + Add<Output = T> + Mul<Output = T>,
{
    if k.depth() != 1 {
        return Err(Error::Dimension("conv2d_valid takes a 2-D kernel".into()));
    }
    if stride == 0 {
        return Err(Error::Dimension("stride must be positive".into()));
    }
    let l = k.side();
    if l == 0 || x.rows() < l || x.cols() < l {
        return Err(Error::Dimension(format!(
            "kernel {l}x{l} does not fit input {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let out_rows = (x.rows() - l) / stride + 1;
    let out_cols = (x.cols() - l) / stride + 1;
    Ok(Matrix::from_fn(out_rows, out_cols, |a, b| {
        let mut acc = T::zero();
        for i in 0..l {
            for j in 0..l {
                acc = acc + x.get(a * stride + i, b * stride + j) * k.at(i, j);
            }
        }
        acc
    }))
}

/// A structural entry of `W(K)`: matrix position and the kernel tap it holds.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct StructuralEntry {
    pub row: usize,
    pub col: usize,
    pub ki: usize,
    pub kj: usize,
}

/// All structural (kernel-carrying) positions of the `n² × (n−l+1)²` matrix,
/// column by column, rows ascending within a column.
pub fn structural_entries(n: usize, l: usize) -> impl Iterator<Item = StructuralEntry> {
    let out = n + 1 - l;
    (0..out * out).flat_map(move |col| {
        let (a, b) = (col % out, col / out);
        (0..l).flat_map(move |kj| {
            (0..l).map(move |ki| StructuralEntry {
                row: (b + kj) * n + (a + ki),
                col,
                ki,
                kj,
            })
        })
    })
}

/// `W(K)` together with the dimensions it was built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct BlockToeplitzMatrix<T: Copy> {
    pub n: usize,
    pub l: usize,
    #[serde(rename = "W")]
    pub matrix: Matrix<T>,
}

impl<T: Copy> BlockToeplitzMatrix<T> {
    pub fn outputs_per_side(&self) -> usize {
        self.n + 1 - self.l
    }

    /// The `n × (n−l+1)` Toeplitz block built from kernel column `i` (0-based).
    pub fn block(&self, block_row: usize, block_col: usize) -> Matrix<T> {
        let out = self.outputs_per_side();
        Matrix::from_fn(self.n, out, |r, c| {
            self.matrix.get(block_row * self.n + r, block_col * out + c)
        })
    }
}

fn check_toeplitz_dims(l: usize, n: usize) -> Result<()> {
    if l == 0 || n < l {
        return Err(Error::Dimension(format!("need n >= l >= 1, got n={n}, l={l}")));
    }
    Ok(())
}

/// Builds the stride-1 block Toeplitz convolution matrix of a 2-D kernel.
pub fn build_block_toeplitz<T>(k: &Kernel<T>, n: usize) -> Result<BlockToeplitzMatrix<T>>
where
    T: Copy + Zero,
{
    if k.depth() != 1 {
        return Err(Error::Dimension("block Toeplitz form takes a 2-D kernel".into()));
    }
    let l = k.side();
    check_toeplitz_dims(l, n)?;
    let out = n + 1 - l;
    let mut matrix = Matrix::filled(n * n, out * out, T::zero());
    for e in structural_entries(n, l) {
        matrix.set(e.row, e.col, k.at(e.ki, e.kj));
    }
    Ok(BlockToeplitzMatrix { n, l, matrix })
}

/// 1 at every structural position of `W`, regardless of the kernel values.
pub fn nonzero_mask<T: Copy>(w: &BlockToeplitzMatrix<T>) -> Matrix<u8> {
    structural_mask(w.n, w.l)
}

pub fn structural_mask(n: usize, l: usize) -> Matrix<u8> {
    let out = n + 1 - l;
    let mut mask = Matrix::filled(n * n, out * out, 0u8);
    for e in structural_entries(n, l) {
        mask.set(e.row, e.col, 1);
    }
    mask
}
