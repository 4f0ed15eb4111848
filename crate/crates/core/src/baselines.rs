//! Sample counts of iterative hypothesize-and-verify samplers, for comparison
//! with a single grab.
//!
//! These are reconstructions of the textbook iteration-count model, not
//! implementations of any particular published multi-model method.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PopulationSpec;

/// Iterations needed to draw one all-inlier minimal sample with probability `confidence`.
///
/// `ceil(ln(1 - P) / ln(1 - w^dof))`, or 1 when every point is an inlier.
pub fn ransac_iterations(inlier_ratio: f64, dof: usize, confidence: f64) -> Result<u64> {
    if !(inlier_ratio > 0.0 && inlier_ratio <= 1.0) {
        return Err(Error::domain(format!("inlier ratio must lie in (0, 1], got {inlier_ratio}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    if dof == 0 {
        return Err(Error::domain("dof must be at least 1"));
    }
    if inlier_ratio == 1.0 {
        return Ok(1);
    }
    let all_inlier = inlier_ratio.powi(dof as i32);
    let iterations = ((-confidence).ln_1p() / (-all_inlier).ln_1p()).ceil();
    if !iterations.is_finite() || iterations > u64::MAX as f64 {
        return Err(Error::domain("iteration count overflows"));
    }
    Ok((iterations as u64).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub population: usize,
    pub inlier_ratio: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub method_name: String,
    pub hypotheses: u64,
    pub points_touched: u64,
    pub per_stage: Vec<Stage>,
}

/// Fit-and-remove sampling: structures are found largest first and removed from the pool.
pub fn sequential_total(spec: &PopulationSpec, dof: usize, confidence: f64) -> Result<BaselineReport> {
    spec.check_feasible(dof)?;
    let mut order: Vec<usize> = spec.structure_sizes().to_vec();
    order.sort_by(|a, b| b.cmp(a));
    let mut population = spec.total_points();
    let mut per_stage = Vec::with_capacity(order.len());
    for theta in order {
        let inlier_ratio = theta as f64 / population as f64;
        per_stage.push(Stage { population, inlier_ratio, iterations: ransac_iterations(inlier_ratio, dof, confidence)? });
        population -= theta;
    }
    Ok(report("sequential", dof, per_stage))
}

/// Each structure searched independently in the full population.
pub fn independent_total(spec: &PopulationSpec, dof: usize, confidence: f64) -> Result<BaselineReport> {
    spec.check_feasible(dof)?;
    let population = spec.total_points();
    let per_stage = spec
        .structure_sizes()
        .iter()
        .map(|&theta| {
            let inlier_ratio = theta as f64 / population as f64;
            Ok(Stage { population, inlier_ratio, iterations: ransac_iterations(inlier_ratio, dof, confidence)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report("independent", dof, per_stage))
}

/// One grab of `r` points; every `dof`-subset of the grab is a hypothesis.
pub fn one_grab(method_name: &str, r: usize, dof: usize) -> BaselineReport {
    BaselineReport {
        method_name: method_name.to_string(),
        hypotheses: saturating_choose(r as u64, dof as u64),
        points_touched: r as u64,
        per_stage: Vec::new(),
    }
}

fn report(name: &str, dof: usize, per_stage: Vec<Stage>) -> BaselineReport {
    let hypotheses = per_stage.iter().map(|s| s.iterations).fold(0u64, u64::saturating_add);
    BaselineReport {
        method_name: name.to_string(),
        hypotheses,
        points_touched: hypotheses.saturating_mul(dof as u64),
        per_stage,
    }
}

fn saturating_choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}
