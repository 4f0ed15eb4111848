//! Seeded random grabs.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `trial_seed(master_seed, trial_index)`, so results do not depend on how
//! trials are scheduled across threads. Aggregates are sums of per-trial
//! values and therefore order independent.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GrabOutcome, PopulationSpec, Requirement};
use crate::sizing::{Method, SizingResult};

/// SplitMix64 finaliser.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index` under `master_seed`.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    mix64(master_seed ^ mix64(trial_index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master_seed, trial_index))
}

/// Lazily evaluated Fisher-Yates shuffle of `0..n`.
///
/// Only displaced slots are stored, so drawing `r` elements costs `O(r)`
/// regardless of `n`.
pub struct LazyShuffle<R> {
    rng: R,
    len: usize,
    next: usize,
    displaced: HashMap<usize, usize>,
}

impl<R: Rng> LazyShuffle<R> {
    pub fn new(len: usize, rng: R) -> Self {
        Self { rng, len, next: 0, displaced: HashMap::new() }
    }
}

impl<R: Rng> Iterator for LazyShuffle<R> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.next >= self.len {
            return None;
        }
        let i = self.next;
        let j = i + self.rng.gen_range(0..(self.len - i) as u64) as usize;
        let picked = self.displaced.get(&j).copied().unwrap_or(j);
        if j != i {
            let current = self.displaced.remove(&i).unwrap_or(i);
            self.displaced.insert(j, current);
        } else {
            self.displaced.remove(&i);
        }
        self.next += 1;
        Some(picked)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.len - self.next;
        (left, Some(left))
    }
}

/// Uniform `r`-subset of `0..n` for trial `trial_index`, in draw order.
pub fn sample_grab(n: usize, r: usize, seed: u64, trial_index: u64) -> Result<Vec<usize>> {
    if r > n {
        return Err(Error::domain(format!("grab size {r} exceeds population {n}")));
    }
    Ok(LazyShuffle::new(n, trial_rng(seed, trial_index)).take(r).collect())
}

/// Hit counts of one seeded grab.
pub fn grab_outcome(spec: &PopulationSpec, r: usize, seed: u64, trial_index: u64) -> Result<GrabOutcome> {
    let indices = sample_grab(spec.total_points(), r, seed, trial_index)?;
    Ok(GrabOutcome::tally(spec, &indices))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub successes: usize,
    pub trials: usize,
    pub p_hat: f64,
    pub std_err: f64,
    pub master_seed: u64,
}

impl McEstimate {
    fn new(successes: usize, trials: usize, master_seed: u64) -> Self {
        let p_hat = successes as f64 / trials as f64;
        let std_err = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
        Self { successes, trials, p_hat, std_err, master_seed }
    }
}

/// Fraction of `trials` seeded grabs of size `r` that give every structure `dof` points.
pub fn estimate_success(spec: &PopulationSpec, dof: usize, r: usize, trials: usize, seed: u64) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let n = spec.total_points();
    if r > n {
        return Err(Error::domain(format!("grab size {r} exceeds population {n}")));
    }
    let labels = spec.labels();
    let structures = spec.structure_count();
    let successes = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || vec![0usize; structures],
            |hits, t| {
                hits.iter_mut().for_each(|h| *h = 0);
                for idx in LazyShuffle::new(n, trial_rng(seed, t)).take(r) {
                    if let Some(s) = labels[idx] {
                        hits[s] += 1;
                    }
                }
                usize::from(hits.iter().all(|&h| h >= dof))
            },
        )
        .sum();
    Ok(McEstimate::new(successes, trials, seed))
}

/// Prefix length of a random permutation at which every structure first holds `dof` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverageSample {
    pub coverage_time: usize,
}

pub fn coverage_time(spec: &PopulationSpec, dof: usize, seed: u64, trial_index: u64) -> Result<CoverageSample> {
    spec.check_feasible(dof)?;
    Ok(CoverageSample { coverage_time: coverage_with_labels(spec, &spec.labels(), dof, seed, trial_index) })
}

fn coverage_with_labels(spec: &PopulationSpec, labels: &[Option<usize>], dof: usize, seed: u64, trial: u64) -> usize {
    if dof == 0 {
        return 0;
    }
    let mut hits = vec![0usize; spec.structure_count()];
    let mut uncovered = spec.structure_count();
    for (step, idx) in LazyShuffle::new(spec.total_points(), trial_rng(seed, trial)).enumerate() {
        if let Some(s) = labels[idx] {
            hits[s] += 1;
            if hits[s] == dof {
                uncovered -= 1;
                if uncovered == 0 {
                    return step + 1;
                }
            }
        }
    }
    unreachable!("feasibility was checked")
}

/// Coverage times of trials `0..trials`, in trial order.
pub fn coverage_samples(spec: &PopulationSpec, dof: usize, trials: usize, seed: u64) -> Result<Vec<usize>> {
    spec.check_feasible(dof)?;
    let labels = spec.labels();
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|t| coverage_with_labels(spec, &labels, dof, seed, t))
        .collect())
}

/// The `ceil(p * len)`-th smallest value of `sorted`.
pub fn empirical_quantile(sorted: &[usize], p: f64) -> usize {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let rank = ((p * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Empirical minimal grab size: the upper `P`-quantile of `trials` coverage times.
pub fn estimate_min_r(spec: &PopulationSpec, req: &Requirement, trials: usize, seed: u64) -> Result<SizingResult> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let mut samples = coverage_samples(spec, req.dof(), trials, seed)?;
    samples.sort_unstable();
    let r = empirical_quantile(&samples, req.confidence());
    let covered = samples.partition_point(|&t| t <= r);
    Ok(SizingResult {
        r,
        method: Method::MonteCarlo,
        achieved: covered as f64 / trials as f64,
        evaluations: 0,
        verification_evaluations: 0,
        fallback_used: false,
        variant: None,
        exact_substituted: false,
    })
}

/// Seed of repetition `rep` when an estimate is repeated, as the curve protocol does.
pub fn repetition_seed(master_seed: u64, rep: u64) -> u64 {
    mix64(master_seed.wrapping_add(mix64(rep ^ 0xA076_1D64_78BD_642F)))
}
