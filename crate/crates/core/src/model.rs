//! Population and requirement types shared by the rest of the crate.
//!
//! Structures are disjoint: structure `i` owns the contiguous index range
//! `[start_i, start_i + theta_i)` and outliers occupy the tail of `0..N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The sampled universe: `N` points, `C` disjoint structures and the outliers left over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PopulationSpec {
    total_points: usize,
    structure_sizes: Vec<usize>,
    outlier_count: usize,
}

impl PopulationSpec {
    pub fn new(total_points: usize, structure_sizes: Vec<usize>) -> Result<Self> {
        validate_population(total_points, &structure_sizes)
    }

    /// Population made of `structures` equally sized structures.
    pub fn uniform(total_points: usize, structures: usize, size: usize) -> Result<Self> {
        validate_population(total_points, &vec![size; structures])
    }

    pub fn total_points(&self) -> usize {
        self.total_points
    }

    pub fn structure_sizes(&self) -> &[usize] {
        &self.structure_sizes
    }

    pub fn structure_count(&self) -> usize {
        self.structure_sizes.len()
    }

    pub fn outlier_count(&self) -> usize {
        self.outlier_count
    }

    pub fn inlier_count(&self) -> usize {
        self.total_points - self.outlier_count
    }

    pub fn min_structure_size(&self) -> usize {
        // non-empty by construction
        self.structure_sizes.iter().copied().min().unwrap_or(0)
    }

    /// Index ranges owned by each structure, in order.
    pub fn structure_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.structure_sizes
            .iter()
            .map(|&size| {
                let range = start..start + size;
                start += size;
                range
            })
            .collect()
    }

    /// Structure index of point `index`, or `None` for an outlier.
    pub fn label_of(&self, index: usize) -> Option<usize> {
        let mut end = 0;
        for (i, &size) in self.structure_sizes.iter().enumerate() {
            end += size;
            if index < end {
                return Some(i);
            }
        }
        None
    }

    /// Labels for every point; `None` marks an outlier.
    pub fn labels(&self) -> Vec<Option<usize>> {
        let mut labels = Vec::with_capacity(self.total_points);
        for (i, &size) in self.structure_sizes.iter().enumerate() {
            labels.extend(std::iter::repeat_n(Some(i), size));
        }
        labels.resize(self.total_points, None);
        labels
    }

    /// Fails with `Infeasible` when some structure is smaller than `dof`.
    pub fn check_feasible(&self, dof: usize) -> Result<()> {
        match self.structure_sizes.iter().position(|&t| t < dof) {
            Some(i) => Err(Error::infeasible(format!(
                "structure {i} has {} points, fewer than dof = {dof}",
                self.structure_sizes[i]
            ))),
            None => Ok(()),
        }
    }
}

/// Builds a [`PopulationSpec`], rejecting empty structures and oversubscribed populations.
pub fn validate_population(total_points: usize, structure_sizes: &[usize]) -> Result<PopulationSpec> {
    if total_points == 0 {
        return Err(Error::SizeViolation("population must contain at least one point".into()));
    }
    if structure_sizes.is_empty() {
        return Err(Error::EmptyStructures);
    }
    if let Some(i) = structure_sizes.iter().position(|&t| t == 0) {
        return Err(Error::SizeViolation(format!("structure {i} is empty")));
    }
    let inliers = structure_sizes
        .iter()
        .try_fold(0usize, |acc, &t| acc.checked_add(t))
        .ok_or_else(|| Error::SizeViolation("structure sizes overflow".into()))?;
    if inliers > total_points {
        return Err(Error::SizeViolation(format!(
            "structures hold {inliers} points but the population has only {total_points}"
        )));
    }
    Ok(PopulationSpec {
        total_points,
        structure_sizes: structure_sizes.to_vec(),
        outlier_count: total_points - inliers,
    })
}

/// Minimal points per structure (`dof`) and the target probability of covering all of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Requirement {
    dof: usize,
    confidence: f64,
}

impl Requirement {
    pub fn new(dof: usize, confidence: f64) -> Result<Self> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::domain(format!("confidence must lie in (0, 1), got {confidence}")));
        }
        Ok(Self { dof, confidence })
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }
}

/// Hit counts of one grab.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrabOutcome {
    pub structure_hits: Vec<usize>,
    pub outlier_hits: usize,
    pub grab_size: usize,
}

impl GrabOutcome {
    /// Tallies the grabbed `indices` against the structure ranges of `spec`.
    pub fn tally(spec: &PopulationSpec, indices: &[usize]) -> Self {
        let mut structure_hits = vec![0; spec.structure_count()];
        let mut outlier_hits = 0;
        for &idx in indices {
            match spec.label_of(idx) {
                Some(s) => structure_hits[s] += 1,
                None => outlier_hits += 1,
            }
        }
        Self { structure_hits, outlier_hits, grab_size: indices.len() }
    }

    pub fn covers(&self, dof: usize) -> bool {
        self.structure_hits.iter().all(|&d| d >= dof)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P0Form {
    /// `(1 - r / (C theta))^theta`, assumes no outliers.
    PaperLiteral,
    /// `(1 - r / N)^theta`, dominates the exact zero-hit probability.
    #[default]
    Safe,
    /// `exp(-r / C)`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaBinomial {
    /// `C(r, k)` with denominator `N - r - theta + k`.
    GrabChoose,
    /// `C(theta, k)` with denominator `N - r - theta + k`.
    StructureChoose,
    /// `C(r, k)` with the fixed denominator `N - r - theta + 1`.
    #[default]
    Strict,
}

/// Selects which reading of the per-structure bounds is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BoundVariant {
    pub p0_form: P0Form,
    pub delta_binomial: DeltaBinomial,
}

impl BoundVariant {
    pub const STRICT_SAFE: Self = Self { p0_form: P0Form::Safe, delta_binomial: DeltaBinomial::Strict };
    pub const PAPER_LITERAL: Self =
        Self { p0_form: P0Form::PaperLiteral, delta_binomial: DeltaBinomial::GrabChoose };

    pub fn new(p0_form: P0Form, delta_binomial: DeltaBinomial) -> Self {
        Self { p0_form, delta_binomial }
    }
}
