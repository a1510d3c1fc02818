//! Writes a small dataset in the CIFAR-10 binary layout and reads it back.

use symkernel::trainer::{read_cifar, write_cifar, Dataset};

fn main() {
    let samples = 4;
    let data = Dataset {
        channels: 3,
        height: 32,
        width: 32,
        classes: 10,
        images: (0..samples * 3 * 32 * 32).map(|i| (i % 256) as f64 / 255.0).collect(),
        labels: (0..samples as u8).collect(),
    };
    let path = std::env::temp_dir().join("symkernel_cifar_example.bin");
    write_cifar(&path, &data).unwrap();
    let back = read_cifar(&path, None).unwrap();
    println!("{} records, labels {:?}", back.len(), back.labels);
    println!("round trip exact: {}", back == data);
    std::fs::remove_file(&path).ok();
}
