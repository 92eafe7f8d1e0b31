//! Fixtures shared by the benchmarks.

use genbound_core::{ChainSpec, FunctionClass};

/// Reversible birth-death chain on `k` states with holding probability `hold`.
pub fn birth_death(k: usize, hold: f64) -> ChainSpec {
    let mut rows = vec![vec![0.0; k]; k];
    for (i, row) in rows.iter_mut().enumerate() {
        let up = if i + 1 < k { (1.0 - hold) / 2.0 } else { 0.0 };
        let down = if i > 0 { (1.0 - hold) / 2.0 } else { 0.0 };
        if i + 1 < k {
            row[i + 1] = up;
        }
        if i > 0 {
            row[i - 1] = down;
        }
        row[i] = 1.0 - up - down;
    }
    let nu = vec![1.0 / k as f64; k];
    ChainSpec::from_rows(&rows, &nu).expect("valid chain")
}

/// `count` functions on `k` states with values in `[-1, 1]`.
pub fn wave_class(k: usize, count: usize) -> FunctionClass {
    let values = (0..count)
        .map(|j| (0..k).map(|x| ((x * (j + 1)) as f64 * 0.7).sin()).collect())
        .collect();
    FunctionClass::with_bound(values, 1.0).expect("valid class")
}
