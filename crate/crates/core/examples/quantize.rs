//! One-bit quantization of a few measurements against three threshold
//! sequences, and the inequality each bit encodes.

use onebit_feas::onebit::{dynamic_range, generate_thresholds, quantize, stacked_rhs};

fn main() {
    let y = [1.5, -0.2, 0.7, -2.0, 0.1];
    let thresholds = generate_thresholds(y.len(), 3, dynamic_range(&y), 7).unwrap();
    let record = quantize(&y, &thresholds).unwrap();

    println!("sigma = {:.3}", thresholds.sigma());
    for (j, yj) in y.iter().enumerate() {
        let bits: Vec<String> = (0..record.m1())
            .map(|l| format!("{:+.3} -> {:+}", thresholds.get(j, l), record.sign(j, l)))
            .collect();
        println!("y[{j}] = {yj:+.2}: {}", bits.join(", "));
    }

    // every bit r is the half-space r * (y - tau) >= 0
    assert!(record.is_consistent_with(&y));
    let rhs = stacked_rhs(&record);
    println!("stacked r * tau: {:?}", rhs.as_slice().iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
}
