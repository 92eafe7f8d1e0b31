#![allow(dead_code)]

use genbound_core::rng::stream;
use genbound_core::{ChainSpec, FunctionClass};
use rand::Rng;

/// Sizes of the random reversible chains, one per seed.
pub const REVERSIBLE_SIZES: [usize; 5] = [3, 4, 5, 3, 4];
pub const TWO_STATE_P: [f64; 3] = [0.1, 0.25, 0.4];
pub const SAMPLE_SIZES: [usize; 3] = [16, 64, 256];

/// Reversible chain from a random symmetric weight matrix with a heavy
/// diagonal, so it is aperiodic; started from state 0.
pub fn random_reversible(k: usize, seed: u64) -> ChainSpec {
    let mut rng = stream(seed, 0);
    let mut w = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v: f64 = rng.random_range(0.1..1.0);
            w[i][j] = v;
            w[j][i] = v;
        }
        w[i][i] += 0.5;
    }
    let rows: Vec<Vec<f64>> = w
        .iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    let mut nu = vec![0.0; k];
    nu[0] = 1.0;
    ChainSpec::from_rows(&rows, &nu).unwrap()
}

pub fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// The chain battery: i.i.d. uniform, symmetric two-state chains and random
/// reversible chains.
pub fn battery() -> Vec<(String, ChainSpec)> {
    let mut out = vec![("iid-3".to_string(), ChainSpec::iid(&uniform(3), &[1.0, 0.0, 0.0]).unwrap())];
    for p in TWO_STATE_P {
        out.push((format!("two-state p={p}"), ChainSpec::two_state(p, [1.0, 0.0]).unwrap()));
    }
    for (i, &k) in REVERSIBLE_SIZES.iter().enumerate() {
        let seed = 1000 + i as u64;
        out.push((format!("reversible k={k} seed={seed}"), random_reversible(k, seed)));
    }
    out
}

/// Random class of `count` functions on `k` states with values in `[-1, 1]`.
pub fn random_class(k: usize, count: usize, seed: u64) -> FunctionClass {
    let mut rng = stream(seed, 1);
    let values = (0..count)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    FunctionClass::with_bound(values, 1.0).unwrap()
}

/// Singleton, 3-function and 8-function classes on `k` states.
pub fn classes(k: usize, seed: u64) -> Vec<(String, FunctionClass)> {
    [1usize, 3, 8]
        .iter()
        .map(|&c| (format!("|F|={c}"), random_class(k, c, seed.wrapping_mul(31).wrapping_add(c as u64))))
        .collect()
}
