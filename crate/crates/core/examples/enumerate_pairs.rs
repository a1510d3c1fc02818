//! Lists the commuting permutation pairs of S4 and counts the kernel family.

use symkernel::{count_family, enumerate_commuting_pairs};

fn main() {
    let pairs = enumerate_commuting_pairs();
    println!("{} commuting pairs", pairs.len());
    for (s1, s2) in pairs.iter().take(8) {
        println!("  {:?} {:?}", s1.image(), s2.image());
    }
    println!("  ...");
    for (l, m) in [(3, 1), (3, 8), (5, 1)] {
        println!("ternary kernels, l={l} m={m}: {}", count_family(l, m, true));
    }
    println!("general kernels, l=3 m=1: {}", count_family(3, 1, false));
}
