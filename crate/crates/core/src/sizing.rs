//! Minimal grab size search.
//!
//! The success predicates are non-decreasing in the grab size, so the minimal
//! size is found by bisection over `[C * dof, N]`. Monotonicity of the exact
//! predicate follows from a coupling argument; the bound predicate is only
//! checked, which is what the verification probes in [`find_min_true`] do.

use serde::Serialize;

use crate::bounds::joint_lower_bound;
use crate::error::{Error, Result};
use crate::hypergeom::{joint_success_exact_with, Backend};
use crate::model::{BoundVariant, P0Form, PopulationSpec, Requirement};
use crate::montecarlo;

/// Number of interior probes checked by the verification pass.
pub const VERIFY_PROBES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bound,
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOutcome {
    pub value: usize,
    /// Predicate calls made by the bisection itself.
    pub evaluations: usize,
    /// Predicate calls made by verification and, if engaged, the linear scan.
    pub verification_evaluations: usize,
    pub fallback_used: bool,
}

/// Smallest `x` in `[lo, hi]` with `predicate(x)`, assuming the predicate is monotone.
///
/// With `verify` set, the result is checked against `predicate(x - 1)` and
/// [`VERIFY_PROBES`] evenly spaced interior points; any inconsistency triggers
/// a forward linear scan from `lo`.
pub fn find_min_true<F>(lo: usize, hi: usize, mut predicate: F, verify: bool) -> Result<SearchOutcome>
where
    F: FnMut(usize) -> Result<bool>,
{
    if lo > hi {
        return Err(Error::domain(format!("empty search range [{lo}, {hi}]")));
    }
    let mut evaluations = 1;
    if !predicate(hi)? {
        return Err(Error::infeasible(format!("predicate is false at the upper end {hi}")));
    }
    let (mut left, mut right) = (lo, hi);
    while left < right {
        let mid = left + (right - left) / 2;
        evaluations += 1;
        if predicate(mid)? {
            right = mid;
        } else {
            left = mid + 1;
        }
    }
    let mut outcome = SearchOutcome { value: left, evaluations, verification_evaluations: 0, fallback_used: false };
    if !verify {
        return Ok(outcome);
    }

    let found = outcome.value;
    let mut consistent = true;
    if found > lo {
        outcome.verification_evaluations += 1;
        consistent = !predicate(found - 1)?;
    }
    let span = hi - lo;
    for i in 1..=VERIFY_PROBES {
        if !consistent {
            break;
        }
        let probe = lo + span * i / (VERIFY_PROBES + 1);
        if probe == found || (found > lo && probe == found - 1) {
            continue;
        }
        outcome.verification_evaluations += 1;
        consistent = predicate(probe)? == (probe >= found);
    }
    if !consistent {
        outcome.fallback_used = true;
        for x in lo..=hi {
            outcome.verification_evaluations += 1;
            if predicate(x)? {
                outcome.value = x;
                break;
            }
        }
    }
    Ok(outcome)
}

/// Trials and seed for the Monte Carlo method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McOptions {
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SizingOptions {
    pub variant: BoundVariant,
    /// Defaults to on for the bound method and off otherwise.
    pub verify: Option<bool>,
    pub backend: Backend,
    pub mc: Option<McOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizingResult {
    pub r: usize,
    pub method: Method,
    /// Bound value, exact probability or empirical coverage fraction at `r`.
    pub achieved: f64,
    pub evaluations: usize,
    pub verification_evaluations: usize,
    pub fallback_used: bool,
    pub variant: Option<BoundVariant>,
    /// Bound method only: some `Delta_i` at `r` came from the exact tail.
    pub exact_substituted: bool,
}

/// Minimal grab size meeting `req` under the chosen method.
pub fn min_grab_size(
    spec: &PopulationSpec,
    req: &Requirement,
    method: Method,
    options: &SizingOptions,
) -> Result<SizingResult> {
    let dof = req.dof();
    spec.check_feasible(dof)?;
    if dof == 0 {
        return Ok(SizingResult {
            r: 0,
            method,
            achieved: 1.0,
            evaluations: 0,
            verification_evaluations: 0,
            fallback_used: false,
            variant: (method == Method::Bound).then_some(options.variant),
            exact_substituted: false,
        });
    }
    let lo = spec.structure_count() * dof;
    let target = req.confidence();
    match method {
        Method::Exact => {
            let verify = options.verify.unwrap_or(false);
            let prob = |r: usize| joint_success_exact_with(spec, dof, r, options.backend).map(|p| p.linear);
            let outcome = find_min_true(lo, spec.total_points(), |r| Ok(prob(r)? >= target), verify)?;
            Ok(SizingResult {
                r: outcome.value,
                method,
                achieved: prob(outcome.value)?,
                evaluations: outcome.evaluations,
                verification_evaluations: outcome.verification_evaluations,
                fallback_used: outcome.fallback_used,
                variant: None,
                exact_substituted: false,
            })
        }
        Method::Bound => {
            let variant = options.variant;
            let verify = options.verify.unwrap_or(true);
            let mut hi = spec.total_points();
            if variant.p0_form == P0Form::PaperLiteral {
                // the literal P0 is undefined past C * theta
                hi = hi.min(spec.structure_count() * spec.min_structure_size());
            }
            let bound = |r: usize| joint_lower_bound(spec, dof, r, variant);
            let outcome = find_min_true(lo, hi, |r| Ok(bound(r)?.joint_lower_bound >= target), verify)
                .map_err(|e| match e {
                    Error::Infeasible(_) => Error::infeasible(format!(
                        "the bound never reaches {target} for r <= {hi}; the exact method may still succeed"
                    )),
                    other => other,
                })?;
            let breakdown = bound(outcome.value)?;
            Ok(SizingResult {
                r: outcome.value,
                method,
                achieved: breakdown.joint_lower_bound,
                evaluations: outcome.evaluations,
                verification_evaluations: outcome.verification_evaluations,
                fallback_used: outcome.fallback_used,
                variant: Some(variant),
                exact_substituted: breakdown.any_substituted(),
            })
        }
        Method::MonteCarlo => {
            let mc = options
                .mc
                .ok_or_else(|| Error::domain("the Monte Carlo method needs trials and a seed"))?;
            montecarlo::estimate_min_r(spec, req, mc.trials, mc.seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_population;

    #[test]
    fn constant_true_predicate() {
        let out = find_min_true(3, 20, |_| Ok(true), true).unwrap();
        assert_eq!(out.value, 3);
        assert!(!out.fallback_used);
    }

    #[test]
    fn step_predicate() {
        let out = find_min_true(0, 20, |r| Ok(r >= 7), false).unwrap();
        assert_eq!(out.value, 7);
        let out = find_min_true(0, 20, |r| Ok(r >= 7), true).unwrap();
        assert_eq!(out.value, 7);
        assert!(!out.fallback_used);
    }

    #[test]
    fn non_monotone_predicate_falls_back() {
        let pred = |r: usize| Ok(r == 5 || r >= 7);
        let out = find_min_true(0, 20, pred, true).unwrap();
        assert_eq!(out.value, 5);
        assert!(out.fallback_used);
    }

    #[test]
    fn fallback_finds_smallest_true() {
        // bisection lands on 12; probe 4 disagrees and the scan finds 4
        let pred = |r: usize| Ok(r == 4 || r >= 12);
        let out = find_min_true(0, 20, pred, true).unwrap();
        assert_eq!(out.value, 4);
        assert!(out.fallback_used);
    }

    #[test]
    fn false_at_upper_end_is_infeasible() {
        assert!(matches!(find_min_true(0, 10, |_| Ok(false), false), Err(Error::Infeasible(_))));
        assert!(find_min_true(5, 4, |_| Ok(true), false).is_err());
    }

    #[test]
    fn bisection_cost() {
        for hi in 1..200usize {
            for target in 0..=hi {
                let out = find_min_true(0, hi, |r| Ok(r >= target), false).unwrap();
                assert_eq!(out.value, target);
                let budget = ((hi + 1) as f64).log2().ceil() as usize + 2;
                assert!(out.evaluations <= budget, "hi = {hi}, target = {target}");
            }
        }
    }

    #[test]
    fn exact_example() {
        let spec = validate_population(10, &[3, 3]).unwrap();
        let req = Requirement::new(1, 0.8).unwrap();
        let res = min_grab_size(&spec, &req, Method::Exact, &SizingOptions::default()).unwrap();
        assert_eq!(res.r, 5);
        assert!((res.achieved - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn zero_dof() {
        let spec = validate_population(10, &[3, 3]).unwrap();
        let req = Requirement::new(0, 0.99).unwrap();
        for method in [Method::Exact, Method::Bound, Method::MonteCarlo] {
            let res = min_grab_size(&spec, &req, method, &SizingOptions::default()).unwrap();
            assert_eq!(res.r, 0);
            assert_eq!(res.achieved, 1.0);
        }
    }

    #[test]
    fn infeasible_dof() {
        let spec = validate_population(10, &[1, 1]).unwrap();
        let req = Requirement::new(2, 0.9).unwrap();
        let res = min_grab_size(&spec, &req, Method::Exact, &SizingOptions::default());
        assert!(matches!(res, Err(Error::Infeasible(_))));
    }

    #[test]
    fn bound_is_conservative() {
        let spec = validate_population(60, &[12, 12, 12]).unwrap();
        for dof in 1..=3 {
            for p in [0.5, 0.9, 0.99] {
                let req = Requirement::new(dof, p).unwrap();
                let exact = min_grab_size(&spec, &req, Method::Exact, &SizingOptions::default()).unwrap();
                let bound = min_grab_size(&spec, &req, Method::Bound, &SizingOptions::default()).unwrap();
                assert!(bound.r >= exact.r);
                assert!(bound.achieved >= p);
                assert!(!bound.fallback_used);
            }
        }
    }

    #[test]
    fn paper_literal_search_stays_in_range() {
        let spec = validate_population(100, &[10, 10, 10]).unwrap();
        let req = Requirement::new(2, 0.9).unwrap();
        let options = SizingOptions { variant: BoundVariant::PAPER_LITERAL, ..Default::default() };
        let res = min_grab_size(&spec, &req, Method::Bound, &options).unwrap();
        assert!(res.r <= 30);
        assert!(res.achieved >= 0.9);
    }

    #[test]
    fn monte_carlo_needs_options() {
        let spec = validate_population(10, &[3, 3]).unwrap();
        let req = Requirement::new(1, 0.8).unwrap();
        assert!(min_grab_size(&spec, &req, Method::MonteCarlo, &SizingOptions::default()).is_err());
        let options = SizingOptions { mc: Some(McOptions { trials: 500, seed: 9 }), ..Default::default() };
        let res = min_grab_size(&spec, &req, Method::MonteCarlo, &options).unwrap();
        assert!((4..=6).contains(&res.r));
    }
}
