//! Projects a random real kernel onto the ternary symmetric family with the
//! exact search and with the alternating search, then binarizes the mask.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symkernel::projection::{frobenius_distance, project_alternating, project_exact};
use symkernel::{materialize, Kernel, StrengthFunction};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let k = Kernel::from_fn(3, 2, |_, _, _| rng.gen_range(-1.0..1.0));
    let choices = StrengthFunction::ternary_choices();

    let exact = project_exact(&k, &choices).unwrap();
    println!(
        "exact: distance {:.4}, {} candidates",
        exact.distance, exact.candidates_examined
    );
    let alt = project_alternating(&k, &choices, 20, 0).unwrap();
    println!("alternating: distance {:.4}, history {:?}", alt.distance, alt.history);

    let snapped = exact.spec.binarize(0.5);
    let binary = materialize(&snapped).unwrap().to_f64();
    println!(
        "binarized mask distance {:.4}",
        frobenius_distance(&k, &binary).unwrap()
    );
}
