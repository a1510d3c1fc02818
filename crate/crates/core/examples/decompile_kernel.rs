//! Recovers a permutation spec from an integer kernel by coloring its
//! convolution matrix, and shows the conflict for a kernel outside the family.

use symkernel::{compile, decompile, materialize, Error, Kernel};

fn main() {
    let k = Kernel::from_rows(vec![vec![-1, 2, -1], vec![-2, 4, -2], vec![-1, 2, -1]]).unwrap();
    let spec = decompile(&k, 4).unwrap();
    println!("f = {:?}, rho = {:?}", spec.f.table(), spec.rho);
    println!("sigma1 = {:?}, sigma2 = {:?}", spec.sigma1.image(), spec.sigma2.image());
    println!("re-materializes: {}", materialize(&spec).unwrap() == k);
    let program = compile(&spec, 4).unwrap();
    println!("g = {:?}", program.g);
    for (i, s) in program.strengths.iter().enumerate() {
        println!("s{} = {s:?}", i + 1);
    }

    let bad = Kernel::from_rows(vec![vec![1, 2, 3], vec![4, 1, 2], vec![3, 4, 4]]).unwrap();
    match decompile(&bad, 4) {
        Err(Error::NotRepresentable { reason, conflict }) => println!("rejected: {reason}\n  {conflict:?}"),
        other => println!("unexpected: {other:?}"),
    }
}
