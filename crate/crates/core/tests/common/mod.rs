#![allow(dead_code)]

use simta::numerics::{Activation, Matrix, Rng};
use simta::simta::{build_attention, elapsed_matrix, AsyncSeries, SimTAModuleParams, SimTAStack};
use simta::train::auc;

/// A random series with dyadic timestamps plus a stack with non-default
/// decay parameters.
pub struct AttnInstance {
    pub series: AsyncSeries,
    pub stack: SimTAStack,
    pub module: SimTAModuleParams,
    /// Steps after this one get perturbed in the causality check.
    pub pivot: usize,
    /// Dyadic shift, so shifted intervals stay exact.
    pub shift: f64,
    pub seed: u64,
}

fn dyadic(rng: &mut Rng, max_units: usize) -> f64 {
    rng.below(max_units) as f64 / 64.0
}

pub fn attention_instance(seed: u64) -> AttnInstance {
    let mut rng = Rng::new(seed);
    let t = 2 + rng.below(11);
    let c = 1 + rng.below(4);
    let mut stamps = vec![dyadic(&mut rng, 1024)];
    for _ in 1..t {
        let last = *stamps.last().unwrap();
        stamps.push(last + (1 + rng.below(256)) as f64 / 64.0);
    }
    let values = Matrix::from_vec(t, c, (0..t * c).map(|_| rng.normal()).collect()).unwrap();
    let series = AsyncSeries::new(values, stamps).unwrap();
    let dims: Vec<usize> = (0..1 + rng.below(2)).map(|_| 1 + rng.below(5)).collect();
    let mut stack = SimTAStack::new(&mut rng, c, &dims, Activation::Tanh).unwrap();
    for m in &mut stack.modules {
        m.lambda_raw = rng.normal() * 2.0;
        m.beta = rng.normal();
    }
    let out = 1 + rng.below(4);
    let mut module = SimTAModuleParams::new(&mut rng, c, out);
    module.lambda_raw = rng.normal() * 2.0;
    module.beta = rng.normal();
    let pivot = rng.below(t);
    let shift = (rng.below(1 << 16) as f64 - 32768.0) / 64.0;
    AttnInstance {
        series,
        stack,
        module,
        pivot,
        shift,
        seed,
    }
}

/// Attention rows sum to one and put no weight on the future.
pub fn check_row_stochastic(inst: &AttnInstance) -> Result<(), String> {
    let gap = elapsed_matrix(&inst.series.intervals()).unwrap();
    let (_, cache) = inst
        .module
        .forward_with_gap(inst.series.values(), &gap, Activation::Tanh)
        .unwrap();
    let a = cache.attention();
    for i in 0..a.rows() {
        let sum: f64 = a.row(i).iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(format!("seed {}: row {i} sums to {sum}", inst.seed));
        }
        for j in 0..a.cols() {
            let w = a[(i, j)];
            if j > i && w != 0.0 {
                return Err(format!(
                    "seed {}: future weight {w} at ({i}, {j})",
                    inst.seed
                ));
            }
            if w < 0.0 {
                return Err(format!(
                    "seed {}: negative weight {w} at ({i}, {j})",
                    inst.seed
                ));
            }
        }
    }
    Ok(())
}

/// Changing values after the pivot leaves outputs up to the pivot unchanged.
pub fn check_causality(inst: &AttnInstance) -> Result<(), String> {
    let (base, _) = inst.stack.forward_all(&inst.series).unwrap();
    let pivot = inst.pivot;
    let perturbed = inst.series.map_values(|c, v| v + 10.0 * (c as f64 + 1.0));
    let mixed = {
        let mut vals = inst.series.values().clone();
        for i in pivot + 1..vals.rows() {
            vals.row_mut(i).copy_from_slice(perturbed.values().row(i));
        }
        AsyncSeries::new(vals, inst.series.timestamps().to_vec()).unwrap()
    };
    let (after, _) = inst.stack.forward_all(&mixed).unwrap();
    for i in 0..=pivot {
        if base.row(i) != after.row(i) {
            return Err(format!(
                "seed {}: row {i} changed by a later perturbation",
                inst.seed
            ));
        }
    }
    Ok(())
}

/// Shifting every timestamp changes nothing, bit for bit.
pub fn check_translation(inst: &AttnInstance) -> Result<(), String> {
    let shifted = inst.series.shifted(inst.shift).unwrap();
    if shifted.intervals() != inst.series.intervals() {
        return Err(format!(
            "seed {}: shift {} is not exact",
            inst.seed, inst.shift
        ));
    }
    let (a, _) = inst.stack.forward_all(&inst.series).unwrap();
    let (b, _) = inst.stack.forward_all(&shifted).unwrap();
    if a.data() != b.data() {
        return Err(format!(
            "seed {}: output moved under shift {}",
            inst.seed, inst.shift
        ));
    }
    Ok(())
}

/// Scaling intervals by `k` equals scaling the decay by `k` in the
/// pre-softmax scores.
pub fn check_scaling(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let t = 2 + rng.below(10);
    let tau: Vec<f64> = (0..t - 1).map(|_| rng.uniform(0.01, 2.0)).collect();
    let lambda = rng.uniform(0.05, 3.0);
    let beta = rng.normal();
    let k = rng.uniform(0.25, 4.0);
    let scaled: Vec<f64> = tau.iter().map(|x| x * k).collect();
    let (a, mask) = build_attention(&scaled, lambda, beta).unwrap();
    let (b, _) = build_attention(&tau, lambda * k, beta).unwrap();
    for i in 0..t {
        for j in 0..t {
            if !mask.is_masked(i, j) && (a[(i, j)] - b[(i, j)]).abs() > 1e-12 {
                return Err(format!(
                    "seed {seed}: ({i}, {j}) {} vs {} (k = {k})",
                    a[(i, j)],
                    b[(i, j)]
                ));
            }
        }
    }
    Ok(())
}

/// AUC by comparing every positive with every negative.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice = 0u64;
    let (mut np, mut nn) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            np += 1;
        } else {
            nn += 1;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                if scores[i] > scores[j] {
                    twice += 2;
                } else if scores[i] == scores[j] {
                    twice += 1;
                }
            }
        }
    }
    twice as f64 / 2.0 / (np as f64 * nn as f64)
}

/// Rank AUC against the pairwise oracle on a random instance with ties.
pub fn check_auc(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let n = 2 + rng.below(80);
    let coarse = rng.bernoulli(0.5);
    let scores: Vec<f64> = (0..n)
        .map(|_| {
            let s = rng.normal();
            if coarse {
                (s * 4.0).round() / 4.0
            } else {
                s
            }
        })
        .collect();
    let mut labels: Vec<u8> = (0..n).map(|_| rng.bernoulli(0.4) as u8).collect();
    labels[0] = 1;
    labels[1] = 0;
    let fast = auc(&scores, &labels).map_err(|e| e.to_string())?;
    let slow = pairwise_auc(&scores, &labels);
    if fast != slow {
        return Err(format!("seed {seed}: rank {fast} vs pairwise {slow}"));
    }
    Ok(())
}
