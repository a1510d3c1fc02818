//! Builds the Laplacian and vertical Prewitt operators from permutation specs.

use symkernel::kernels::materialize_2d;
use symkernel::{Kernel, Permutation, StrengthFunction, SymmetricKernelSpec};

fn show(name: &str, spec: &SymmetricKernelSpec) {
    let k = materialize_2d(spec).expect("valid spec");
    println!("{name}:");
    for row in k.to_rows() {
        println!("  {row:?}");
    }
}

fn main() {
    let swap = Permutation::new([2, 1, 4, 3]).unwrap();
    show(
        "Laplacian",
        &SymmetricKernelSpec {
            f: StrengthFunction::new([4, -1, 4, 4]).unwrap(),
            rho: vec![1],
            sigma1: swap,
            sigma2: swap,
            mask: Kernel::from_rows(vec![vec![0, 1, 0], vec![1, 1, 1], vec![0, 1, 0]]).unwrap(),
        },
    );
    show(
        "vertical Prewitt",
        &SymmetricKernelSpec {
            f: StrengthFunction::new([-1, -1, 1, 1]).unwrap(),
            rho: vec![1],
            sigma1: Permutation::identity(),
            sigma2: Permutation::four_cycle(),
            mask: Kernel::from_rows(vec![vec![1, 0, 1]; 3]).unwrap(),
        },
    );
}
