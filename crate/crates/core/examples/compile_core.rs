//! Lowers the Laplacian onto a 256-input core for 16×16 images, checks the
//! core constraints and runs the core against direct convolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symkernel::{
    check_core_constraints, compile, conv2d_valid, materialize, simulate_core, Kernel, Matrix, Permutation,
    StrengthFunction, SymmetricKernelSpec,
};

fn main() {
    let swap = Permutation::new([2, 1, 4, 3]).unwrap();
    let spec = SymmetricKernelSpec {
        f: StrengthFunction::new([4, -1, 4, 4]).unwrap(),
        rho: vec![1],
        sigma1: swap,
        sigma2: swap,
        mask: Kernel::from_rows(vec![vec![0, 1, 0], vec![1, 1, 1], vec![0, 1, 0]]).unwrap(),
    };
    let program = compile(&spec, 16).unwrap();
    println!("{} input lines, {} neurons", program.input_lines(), program.neurons());
    println!("diagnostics: {:?}", check_core_constraints(&program));
    println!("first input types: {:?}", &program.g[..8]);
    let mut tables = program.strengths.clone();
    tables.sort_unstable();
    tables.dedup();
    println!(
        "distinct strength tables over {} neurons: {tables:?}",
        program.neurons()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Matrix::from_fn(16, 16, |_, _| rng.gen_range(0..=9i64));
    let core = simulate_core(&program, &x).unwrap();
    let direct = conv2d_valid(&x, &materialize(&spec).unwrap().map(i64::from), 1)
        .unwrap()
        .vect();
    println!("core output matches convolution: {}", core == direct);
}
