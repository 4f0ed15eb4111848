//! Closed-form bounds on the probability that a grab misses a structure.
//!
//! For a grab of `r` points:
//!
//! * `P0` bounds the probability that a structure receives no points,
//! * `Delta = P0 * sum_{k < dof} B(k) * (theta / (N - r - theta + k'))^k` bounds the
//!   probability that it receives fewer than `dof` points,
//! * the union bound turns the per-structure `Delta_i` into
//!   `P(all d_i >= dof) >= 1 - sum_i Delta_i`.
//!
//! [`BoundVariant`] picks the forms of `P0` and `B(k)`. Only `Safe` + `Strict`
//! provably dominates the exact tail for every population; the other forms are
//! kept for comparison.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergeom::{log_choose, structure_tail_exact, LogSumExp};
use crate::model::{BoundVariant, DeltaBinomial, P0Form, PopulationSpec};

/// Bound on the probability that a structure of size `theta` receives no point of an `r`-grab.
///
/// `PaperLiteral` is only defined for `r <= C * theta`; outside that range it
/// fails unless [`p0_bound_clamped`] is used.
pub fn p0_bound(grab: usize, structures: usize, theta: usize, total: usize, form: P0Form) -> Result<f64> {
    Ok(log_p0(grab, structures, theta, total, form, false)?.exp().clamp(0.0, 1.0))
}

/// Like [`p0_bound`] but maps the out-of-range paper-literal case to 0.
pub fn p0_bound_clamped(grab: usize, structures: usize, theta: usize, total: usize, form: P0Form) -> Result<f64> {
    Ok(log_p0(grab, structures, theta, total, form, true)?.exp().clamp(0.0, 1.0))
}

fn log_p0(grab: usize, structures: usize, theta: usize, total: usize, form: P0Form, clamp: bool) -> Result<f64> {
    if grab == 0 {
        return Ok(0.0);
    }
    if structures == 0 {
        return Err(Error::domain("P0 needs at least one structure"));
    }
    let r = grab as f64;
    match form {
        P0Form::PaperLiteral => {
            let capacity = structures * theta;
            if grab > capacity {
                if clamp {
                    return Ok(f64::NEG_INFINITY);
                }
                return Err(Error::domain(format!(
                    "paper-literal P0 requires r <= C * theta ({grab} > {capacity})"
                )));
            }
            Ok(theta as f64 * (-r / capacity as f64).ln_1p())
        }
        P0Form::Safe => {
            if grab > total {
                return Err(Error::domain(format!("safe P0 requires r <= N ({grab} > {total})")));
            }
            Ok(theta as f64 * (-r / total as f64).ln_1p())
        }
        P0Form::Exponential => Ok(-r / structures as f64),
    }
}

/// Bound on `P(d < dof)` for one structure of size `theta`.
///
/// Fails with [`Error::DenominatorViolation`] when `dof >= 2` and
/// `N - r - theta + 1 <= 0`; in that regime the grab is forced to contain
/// points of the structure and the exact tail should be used instead.
pub fn delta_bound(
    grab: usize,
    total: usize,
    structures: usize,
    theta: usize,
    dof: usize,
    variant: BoundVariant,
) -> Result<f64> {
    if dof == 0 {
        return Ok(0.0);
    }
    let ln_p0 = log_p0(grab, structures, theta, total, variant.p0_form, false)?;
    if dof == 1 {
        return Ok(ln_p0.exp().clamp(0.0, 1.0));
    }
    let base = total as i64 - grab as i64 - theta as i64;
    if base < 0 {
        return Err(Error::DenominatorViolation(base + 1));
    }
    let ln_theta = (theta as f64).ln();
    let mut acc = LogSumExp::default();
    acc.push(0.0);
    for k in 1..dof {
        let ln_binom = match variant.delta_binomial {
            DeltaBinomial::GrabChoose | DeltaBinomial::Strict if k > grab => continue,
            DeltaBinomial::StructureChoose if k > theta => continue,
            DeltaBinomial::GrabChoose | DeltaBinomial::Strict => log_choose(grab, k)?,
            DeltaBinomial::StructureChoose => log_choose(theta, k)?,
        };
        let denominator = match variant.delta_binomial {
            DeltaBinomial::Strict => base + 1,
            _ => base + k as i64,
        };
        acc.push(ln_binom + k as f64 * (ln_theta - (denominator as f64).ln()));
    }
    Ok((ln_p0 + acc.value()).exp().clamp(0.0, 1.0))
}

/// Per-structure bounds and the joint lower bound `max(0, 1 - sum_i Delta_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundBreakdown {
    pub p0_per_structure: Vec<f64>,
    pub delta_per_structure: Vec<f64>,
    /// Structures whose `Delta_i` was replaced by the exact tail after a denominator violation.
    pub exact_substituted: Vec<bool>,
    pub delta_sum: f64,
    pub joint_lower_bound: f64,
    pub variant: BoundVariant,
}

impl BoundBreakdown {
    pub fn any_substituted(&self) -> bool {
        self.exact_substituted.iter().any(|&s| s)
    }
}

/// Union-bound lower bound on the probability that every structure receives at least `dof` points.
pub fn joint_lower_bound(spec: &PopulationSpec, dof: usize, grab: usize, variant: BoundVariant) -> Result<BoundBreakdown> {
    let total = spec.total_points();
    if grab > total {
        return Err(Error::domain(format!("grab size {grab} exceeds population {total}")));
    }
    let structures = spec.structure_count();
    let mut p0_per_structure = Vec::with_capacity(structures);
    let mut delta_per_structure = Vec::with_capacity(structures);
    let mut exact_substituted = Vec::with_capacity(structures);
    for &theta in spec.structure_sizes() {
        p0_per_structure.push(p0_bound(grab, structures, theta, total, variant.p0_form)?);
        match delta_bound(grab, total, structures, theta, dof, variant) {
            Ok(delta) => {
                delta_per_structure.push(delta);
                exact_substituted.push(false);
            }
            Err(Error::DenominatorViolation(_)) => {
                delta_per_structure.push(structure_tail_exact(total, theta, grab, dof)?.linear);
                exact_substituted.push(true);
            }
            Err(e) => return Err(e),
        }
    }
    let delta_sum = grouped_sum(spec.structure_sizes(), &delta_per_structure);
    Ok(BoundBreakdown {
        p0_per_structure,
        delta_per_structure,
        exact_substituted,
        delta_sum,
        joint_lower_bound: (1.0 - delta_sum).max(0.0),
        variant,
    })
}

// Sums values grouped by structure size as count * value, so equal sizes give exactly C * Delta.
fn grouped_sum(sizes: &[usize], values: &[f64]) -> f64 {
    let mut groups: Vec<(usize, f64, usize)> = Vec::new();
    for (&size, &value) in sizes.iter().zip(values) {
        match groups.iter_mut().find(|(s, v, _)| *s == size && *v == value) {
            Some(group) => group.2 += 1,
            None => groups.push((size, value, 1)),
        }
    }
    groups.iter().map(|&(_, value, count)| count as f64 * value).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergeom::{choose_exact, joint_success_exact};
    use crate::model::validate_population;
    use num_traits::ToPrimitive;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn p0_forms() {
        for form in [P0Form::PaperLiteral, P0Form::Safe, P0Form::Exponential] {
            assert_eq!(p0_bound(0, 2, 5, 20, form).unwrap(), 1.0);
        }
        assert!(close(p0_bound(4, 2, 5, 20, P0Form::PaperLiteral).unwrap(), 0.077_76, 1e-12));
        assert!(close(p0_bound(4, 2, 5, 20, P0Form::Exponential).unwrap(), (-2.0f64).exp(), 1e-15));
        assert!(close(p0_bound(4, 2, 5, 20, P0Form::Safe).unwrap(), 0.327_68, 1e-12));
    }

    #[test]
    fn safe_p0_dominates_exact_example() {
        let exact = (choose_exact(15, 4).unwrap().to_f64().unwrap()) / choose_exact(20, 4).unwrap().to_f64().unwrap();
        assert!(close(exact, 0.281_733_746_130_030_9, 1e-12));
        assert!(p0_bound(4, 2, 5, 20, P0Form::Safe).unwrap() >= exact);
        assert!(p0_bound(4, 2, 5, 20, P0Form::PaperLiteral).unwrap() < exact);
    }

    #[test]
    fn paper_literal_out_of_range() {
        assert!(matches!(p0_bound(11, 2, 5, 20, P0Form::PaperLiteral), Err(Error::Domain(_))));
        assert_eq!(p0_bound_clamped(11, 2, 5, 20, P0Form::PaperLiteral).unwrap(), 0.0);
        assert_eq!(p0_bound(10, 2, 5, 20, P0Form::PaperLiteral).unwrap(), 0.0);
        assert!(p0_bound(21, 2, 5, 20, P0Form::Safe).is_err());
    }

    #[test]
    fn delta_collapses_to_p0_for_single_dof() {
        for delta_binomial in [DeltaBinomial::GrabChoose, DeltaBinomial::StructureChoose, DeltaBinomial::Strict] {
            let variant = BoundVariant::new(P0Form::Safe, delta_binomial);
            let p0 = p0_bound(20, 3, 10, 100, P0Form::Safe).unwrap();
            assert_eq!(delta_bound(20, 100, 3, 10, 1, variant).unwrap(), p0);
        }
        assert_eq!(delta_bound(20, 100, 3, 10, 0, BoundVariant::default()).unwrap(), 0.0);
    }

    #[test]
    fn delta_examples() {
        let literal = delta_bound(20, 100, 3, 10, 2, BoundVariant::PAPER_LITERAL).unwrap();
        assert!(close(literal, 6.463_956_050_823_388e-5, 1e-12));
        let safe = BoundVariant::new(P0Form::Safe, DeltaBinomial::GrabChoose);
        let safe = delta_bound(20, 100, 3, 10, 2, safe).unwrap();
        assert!(close(safe, 0.409_836_668_033_803, 1e-12));
        let exact = structure_tail_exact(100, 10, 20, 2).unwrap().linear;
        assert!(safe >= exact);
        assert!(delta_bound(20, 100, 3, 10, 2, BoundVariant::STRICT_SAFE).unwrap() >= exact);
    }

    #[test]
    fn structure_choose_uses_theta() {
        // C(10, 1) = 10 against C(20, 1) = 20
        let variant = BoundVariant::new(P0Form::Safe, DeltaBinomial::StructureChoose);
        let got = delta_bound(20, 100, 3, 10, 2, variant).unwrap();
        let want = 0.8f64.powi(10) * (1.0 + 10.0 * 10.0 / 71.0);
        assert!(close(got, want, 1e-12));
    }

    #[test]
    fn denominator_violation() {
        // N - r - theta + 1 = 100 - 91 - 10 + 1 = 0
        assert_eq!(
            delta_bound(91, 100, 3, 10, 2, BoundVariant::STRICT_SAFE),
            Err(Error::DenominatorViolation(0))
        );
        assert!(delta_bound(91, 100, 3, 10, 1, BoundVariant::STRICT_SAFE).is_ok());
    }

    #[test]
    fn joint_bound_examples() {
        let spec = validate_population(100, &[10, 10, 10]).unwrap();
        let b = joint_lower_bound(&spec, 2, 20, BoundVariant::PAPER_LITERAL).unwrap();
        assert!(close(b.joint_lower_bound, 0.999_806_081_318_475_3, 1e-12));
        assert_eq!(b.delta_sum, 3.0 * b.delta_per_structure[0]);
        assert!(b.p0_per_structure.iter().zip(&b.delta_per_structure).all(|(p, d)| d >= p));

        let b = joint_lower_bound(&spec, 0, 20, BoundVariant::STRICT_SAFE).unwrap();
        assert_eq!(b.joint_lower_bound, 1.0);

        let b = joint_lower_bound(&spec, 2, 5, BoundVariant::STRICT_SAFE).unwrap();
        assert!(b.delta_sum > 1.0);
        assert_eq!(b.joint_lower_bound, 0.0);
    }

    #[test]
    fn joint_bound_substitutes_exact_tail() {
        let spec = validate_population(100, &[10, 10, 10]).unwrap();
        let b = joint_lower_bound(&spec, 2, 95, BoundVariant::STRICT_SAFE).unwrap();
        assert!(b.any_substituted());
        assert_eq!(b.joint_lower_bound, 1.0);
        let exact = joint_success_exact(&spec, 2, 95).unwrap().linear;
        assert!(b.joint_lower_bound <= exact + 1e-12);
    }

    #[test]
    fn grouped_sum_handles_unequal_sizes() {
        let spec = validate_population(100, &[10, 20, 10]).unwrap();
        let b = joint_lower_bound(&spec, 2, 30, BoundVariant::STRICT_SAFE).unwrap();
        let direct: f64 = b.delta_per_structure.iter().sum();
        assert!(close(b.delta_sum, direct, 1e-15));
    }
}
