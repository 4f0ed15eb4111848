//! Exact hypergeometric probabilities for one-grab coverage.
//!
//! Two backends compute the same quantities:
//!
//! * [`Backend::Rational`] works with big-integer binomials and returns the
//!   probability as a reduced fraction. It is exact and the default for small
//!   populations.
//! * [`Backend::LogSpace`] evaluates the same sums on natural-log magnitudes,
//!   accumulating with a running-maximum log-sum-exp so `C(10000, r)` never
//!   overflows.
//!
//! The joint success probability `P(d_i >= dof for every structure)` is built
//! from the generating polynomial `prod_i sum_{k=dof..theta_i} C(theta_i, k) x^k`,
//! convolved structure by structure and truncated at the grab size. Its
//! coefficient `t` counts the ways to place `t` hits on the structures; the
//! remaining `r - t` hits come from the outliers.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PopulationSpec;

/// Largest population handled by the rational backend under [`Backend::Auto`].
pub const EXACT_BACKEND_LIMIT: usize = 300;

/// Upper limit on `C(N, r)` for [`joint_success_bruteforce`].
pub const BRUTEFORCE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Rational for `N <= EXACT_BACKEND_LIMIT`, log-space above.
    #[default]
    Auto,
    Rational,
    LogSpace,
}

impl Backend {
    fn resolve(self, total_points: usize) -> Backend {
        match self {
            Backend::Auto if total_points <= EXACT_BACKEND_LIMIT => Backend::Rational,
            Backend::Auto => Backend::LogSpace,
            other => other,
        }
    }
}

/// A probability carried in linear and log form, plus the exact fraction when known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityValue {
    pub linear: f64,
    pub log_value: f64,
    #[serde(skip)]
    pub exact: Option<BigRational>,
}

impl ProbabilityValue {
    pub fn zero() -> Self {
        Self::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_log(log_value: f64) -> Self {
        let log_value = log_value.min(0.0);
        Self { linear: log_value.exp(), log_value, exact: None }
    }

    pub fn from_rational(value: BigRational) -> Self {
        let linear = value.to_f64().unwrap_or(f64::NAN);
        let log_value = if value.is_zero() { f64::NEG_INFINITY } else { ratio_ln(&value) };
        Self { linear, log_value, exact: Some(value) }
    }

    pub fn from_counts(numerator: BigUint, denominator: BigUint) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(numerator), BigInt::from(denominator)))
    }

    /// `1 - p`, staying exact when possible.
    pub fn complement(&self) -> Self {
        match &self.exact {
            Some(q) => Self::from_rational(BigRational::one() - q),
            None => Self::from_log((-self.linear).ln_1p()),
        }
    }
}

// ln(a/b) without converting the (possibly huge) ratio to f64 first.
fn ratio_ln(value: &BigRational) -> f64 {
    let numer = value.numer().magnitude();
    let denom = value.denom().magnitude();
    biguint_ln(numer) - biguint_ln(denom)
}

fn biguint_ln(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits <= 1000 {
        return value.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (value >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Adds `a` and `b` given as natural logs.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Streaming log-sum-exp against a running maximum.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled_sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled_sum: 0.0 }
    }
}

impl LogSumExp {
    #[inline]
    pub fn push(&mut self, value: f64) {
        if value == f64::NEG_INFINITY {
            return;
        }
        if value > self.max {
            self.scaled_sum = self.scaled_sum * (self.max - value).exp() + 1.0;
            self.max = value;
        } else {
            self.scaled_sum += (value - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.scaled_sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled_sum.ln()
        }
    }
}

impl FromIterator<f64> for LogSumExp {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        iter.into_iter().for_each(|v| acc.push(v));
        acc
    }
}

/// `ln C(n, k)` computed as a compensated sum of `ln((n - k + i) / i)`.
pub fn log_choose(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("C({n}, {k}) requires k <= n")));
    }
    let k = k.min(n - k);
    let base = (n - k) as f64;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 1..=k {
        let term = ((base + i as f64) / i as f64).ln();
        let t = sum + term;
        // Neumaier
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// `C(n, k)` as an exact integer.
pub fn choose_exact(n: usize, k: usize) -> Result<BigUint> {
    if k > n {
        return Err(Error::domain(format!("C({n}, {k}) requires k <= n")));
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    Ok(acc)
}

/// Row `C(n, 0..=n)` of Pascal's triangle.
fn binomial_row(n: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n + 1);
    let mut current = BigUint::one();
    row.push(current.clone());
    for k in 0..n {
        current = current * (n - k) / (k + 1);
        row.push(current.clone());
    }
    row
}

/// Table of `ln k!` for `k <= n`, built with compensated summation.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in 1..=n {
            let term = (i as f64).ln();
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
            table.push(sum + comp);
        }
        Self { table }
    }

    #[inline]
    pub fn ln_factorial(&self, n: usize) -> f64 {
        self.table[n]
    }

    /// `ln C(n, k)`, or `-inf` outside `0 <= k <= n`.
    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        if k > n {
            f64::NEG_INFINITY
        } else {
            self.table[n] - self.table[k] - self.table[n - k]
        }
    }
}

/// Exact `P(d < dof)` for the hit count `d` of one structure of size `theta`.
pub fn structure_tail_exact(total: usize, theta: usize, grab: usize, dof: usize) -> Result<ProbabilityValue> {
    structure_tail_exact_with(total, theta, grab, dof, Backend::Auto)
}

pub fn structure_tail_exact_with(
    total: usize,
    theta: usize,
    grab: usize,
    dof: usize,
    backend: Backend,
) -> Result<ProbabilityValue> {
    if theta > total || grab > total {
        return Err(Error::domain(format!(
            "tail needs theta <= N and r <= N (N = {total}, theta = {theta}, r = {grab})"
        )));
    }
    let rest = total - theta;
    // feasible k: k <= theta, k <= r, r - k <= rest
    let k_lo = grab.saturating_sub(rest);
    let k_hi = dof.min(theta + 1).min(grab + 1);
    if dof == 0 || k_lo >= k_hi {
        return Ok(ProbabilityValue::zero());
    }
    match backend.resolve(total) {
        Backend::Rational => {
            let mut numerator = BigUint::zero();
            for k in k_lo..k_hi {
                numerator += choose_exact(theta, k)? * choose_exact(rest, grab - k)?;
            }
            Ok(ProbabilityValue::from_counts(numerator, choose_exact(total, grab)?))
        }
        _ => {
            let lf = LnFactorials::new(total);
            let acc: LogSumExp =
                (k_lo..k_hi).map(|k| lf.ln_choose(theta, k) + lf.ln_choose(rest, grab - k)).collect();
            Ok(ProbabilityValue::from_log(acc.value() - lf.ln_choose(total, grab)))
        }
    }
}

/// Exact `P(every structure receives at least dof points)` for a uniform grab of `grab` points.
pub fn joint_success_exact(spec: &PopulationSpec, dof: usize, grab: usize) -> Result<ProbabilityValue> {
    joint_success_exact_with(spec, dof, grab, Backend::Auto)
}

pub fn joint_success_exact_with(
    spec: &PopulationSpec,
    dof: usize,
    grab: usize,
    backend: Backend,
) -> Result<ProbabilityValue> {
    let total = spec.total_points();
    if grab > total {
        return Err(Error::domain(format!("grab size {grab} exceeds population {total}")));
    }
    if dof == 0 {
        return Ok(ProbabilityValue::one());
    }
    if spec.structure_count() * dof > grab || spec.min_structure_size() < dof {
        return Ok(ProbabilityValue::zero());
    }
    match backend.resolve(total) {
        Backend::Rational => {
            let coeffs = rational_coverage_polynomial(spec, dof, grab);
            Ok(rational_success(spec, &coeffs, &binomial_row(spec.outlier_count()), grab))
        }
        _ => {
            let lf = LnFactorials::new(total);
            let coeffs = log_coverage_polynomial(spec, dof, grab, &lf);
            Ok(log_success(spec, &coeffs, &lf, grab))
        }
    }
}

/// Joint success probability for every grab size `0..=N` from a single convolution.
pub fn joint_success_curve(spec: &PopulationSpec, dof: usize, backend: Backend) -> Vec<ProbabilityValue> {
    let total = spec.total_points();
    if dof == 0 {
        return vec![ProbabilityValue::one(); total + 1];
    }
    if spec.min_structure_size() < dof {
        return vec![ProbabilityValue::zero(); total + 1];
    }
    match backend.resolve(total) {
        Backend::Rational => {
            let coeffs = rational_coverage_polynomial(spec, dof, total);
            let outlier_row = binomial_row(spec.outlier_count());
            (0..=total).map(|r| rational_success(spec, &coeffs, &outlier_row, r)).collect()
        }
        _ => {
            let lf = LnFactorials::new(total);
            let coeffs = log_coverage_polynomial(spec, dof, total, &lf);
            (0..=total).map(|r| log_success(spec, &coeffs, &lf, r)).collect()
        }
    }
}

// Coefficients of prod_i sum_{k=dof..min(theta_i, max_degree)} C(theta_i, k) x^k, truncated at max_degree.
fn rational_coverage_polynomial(spec: &PopulationSpec, dof: usize, max_degree: usize) -> Vec<BigUint> {
    let mut poly = vec![BigUint::one()];
    for &theta in spec.structure_sizes() {
        let row = binomial_row(theta);
        let k_hi = theta.min(max_degree);
        let degree = (poly.len() - 1 + k_hi).min(max_degree);
        let mut next = vec![BigUint::zero(); degree + 1];
        for (t, coeff) in poly.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            for k in dof..=k_hi.min(max_degree.saturating_sub(t)) {
                next[t + k] += coeff * &row[k];
            }
        }
        poly = next;
    }
    poly
}

fn rational_success(spec: &PopulationSpec, coeffs: &[BigUint], outlier_row: &[BigUint], grab: usize) -> ProbabilityValue {
    let outliers = spec.outlier_count();
    let mut numerator = BigUint::zero();
    for (t, coeff) in coeffs.iter().enumerate().take(grab + 1) {
        let rest = grab - t;
        if rest <= outliers && !coeff.is_zero() {
            numerator += coeff * &outlier_row[rest];
        }
    }
    let denominator = choose_exact(spec.total_points(), grab).expect("grab <= N");
    ProbabilityValue::from_counts(numerator, denominator)
}

fn log_coverage_polynomial(spec: &PopulationSpec, dof: usize, max_degree: usize, lf: &LnFactorials) -> Vec<f64> {
    let mut poly = vec![0.0f64];
    for &theta in spec.structure_sizes() {
        let k_hi = theta.min(max_degree);
        let ln_row: Vec<f64> = (0..=k_hi).map(|k| lf.ln_choose(theta, k)).collect();
        let degree = (poly.len() - 1 + k_hi).min(max_degree);
        let mut acc = vec![LogSumExp::default(); degree + 1];
        for (t, &coeff) in poly.iter().enumerate() {
            if coeff == f64::NEG_INFINITY {
                continue;
            }
            for k in dof..=k_hi.min(max_degree.saturating_sub(t)) {
                acc[t + k].push(coeff + ln_row[k]);
            }
        }
        poly = acc.iter().map(LogSumExp::value).collect();
    }
    poly
}

fn log_success(spec: &PopulationSpec, coeffs: &[f64], lf: &LnFactorials, grab: usize) -> ProbabilityValue {
    let outliers = spec.outlier_count();
    let acc: LogSumExp = coeffs
        .iter()
        .enumerate()
        .take(grab + 1)
        .filter(|&(t, _)| grab - t <= outliers)
        .map(|(t, &c)| c + lf.ln_choose(outliers, grab - t))
        .collect();
    ProbabilityValue::from_log(acc.value() - lf.ln_choose(spec.total_points(), grab))
}

/// Brute-force joint success: enumerates every `grab`-subset of the labelled population.
pub fn joint_success_bruteforce(spec: &PopulationSpec, dof: usize, grab: usize) -> Result<ProbabilityValue> {
    let total = spec.total_points();
    if grab > total {
        return Err(Error::domain(format!("grab size {grab} exceeds population {total}")));
    }
    let subsets = choose_exact(total, grab)?;
    if subsets > BigUint::from(BRUTEFORCE_LIMIT) {
        return Err(Error::TooLarge { n: total, r: grab, limit: BRUTEFORCE_LIMIT });
    }
    let labels = spec.labels();
    let mut hits = vec![0usize; spec.structure_count()];
    let mut good = 0u64;
    enumerate_subsets(&labels, 0, grab, &mut hits, dof, &mut good);
    Ok(ProbabilityValue::from_counts(BigUint::from(good), subsets))
}

fn enumerate_subsets(
    labels: &[Option<usize>],
    start: usize,
    remaining: usize,
    hits: &mut [usize],
    dof: usize,
    good: &mut u64,
) {
    if remaining == 0 {
        if hits.iter().all(|&h| h >= dof) {
            *good += 1;
        }
        return;
    }
    for i in start..=labels.len() - remaining {
        if let Some(s) = labels[i] {
            hits[s] += 1;
        }
        enumerate_subsets(labels, i + 1, remaining - 1, hits, dof, good);
        if let Some(s) = labels[i] {
            hits[s] -= 1;
        }
    }
}
