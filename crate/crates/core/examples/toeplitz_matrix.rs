//! Prints the block Toeplitz matrix of a 3×3 kernel on a 4×4 input and checks
//! `vect(X)ᵀ·W = vect(conv(X, K))` on one image.

use symkernel::{build_block_toeplitz, conv2d_valid, Kernel, Matrix};

fn main() {
    let k = Kernel::from_rows(vec![vec![1i64, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]).unwrap();
    let w = build_block_toeplitz(&k, 4).unwrap();
    println!("W is {}×{}", w.matrix.rows(), w.matrix.cols());
    for row in w.matrix.to_rows() {
        println!("  {row:?}");
    }
    let x = Matrix::from_fn(4, 4, |r, c| (r * 4 + c) as i64);
    let lhs = w.matrix.left_mul(&x.vect()).unwrap();
    let rhs = conv2d_valid(&x, &k, 1).unwrap().vect();
    println!("vect(X)ᵀ·W   = {lhs:?}");
    println!("vect(X ⋆ K)  = {rhs:?}");
    assert_eq!(lhs, rhs);
}
