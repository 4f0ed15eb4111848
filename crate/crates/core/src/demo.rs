//! Synthetic line and plane scenes used to exercise one-grab sampling end to end.
//!
//! A scene holds `C` models inside the box `[-1, 1]^d`, inliers scattered along
//! each model with Gaussian perpendicular noise, and uniform outliers. Point
//! order follows [`PopulationSpec`] labelling: structure 0 first, outliers last.
//!
//! A trial grabs `r` points once, fits every minimal subset of the grab, and
//! greedily extracts the best-supported models.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GrabOutcome, PopulationSpec};
use crate::montecarlo::{sample_grab, trial_rng, trial_seed};

pub const SEPARATION_ATTEMPTS: usize = 1000;
pub const MIN_NORMAL_ANGLE_DEG: f64 = 15.0;
pub const MIN_OFFSET_GAP_SIGMAS: f64 = 10.0;
pub const MAX_HYPOTHESES: u64 = 1_000_000;
pub const RECOVERY_OVERLAP: f64 = 0.8;
pub const DEGENERACY_TOL: f64 = 1e-9;

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Line2d,
    Plane3d,
}

impl Geometry {
    /// Points needed to instantiate one model.
    pub fn dof(self) -> usize {
        match self {
            Geometry::Line2d => 2,
            Geometry::Plane3d => 3,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Geometry::Line2d => 2,
            Geometry::Plane3d => 3,
        }
    }
}

/// Hyperplane `{x : normal . x = offset}` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Model {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Model {
    fn canonical(normal: [f64; 3], offset: f64) -> Self {
        let flip = normal.iter().find(|c| c.abs() > 0.0).is_some_and(|&c| c < 0.0);
        if flip {
            Self { normal: normal.map(|c| -c), offset: -offset }
        } else {
            Self { normal, offset }
        }
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Perpendicular distance from `point` to `model`.
pub fn residual(model: &Model, point: &Point) -> f64 {
    (dot(&model.normal, point) - model.offset).abs()
}

/// Line through two points or plane through three.
pub fn fit_minimal(points: &[Point], geometry: Geometry) -> Result<Model> {
    if points.len() != geometry.dof() {
        return Err(Error::domain(format!(
            "{geometry:?} needs exactly {} points, got {}",
            geometry.dof(),
            points.len()
        )));
    }
    let normal = match geometry {
        Geometry::Line2d => {
            let d = sub(&points[1], &points[0]);
            [-d[1], d[0], 0.0]
        }
        Geometry::Plane3d => cross(&sub(&points[1], &points[0]), &sub(&points[2], &points[0])),
    };
    let length = norm(&normal);
    if length < DEGENERACY_TOL {
        return Err(Error::Degenerate);
    }
    let normal = normal.map(|c| c / length);
    Ok(Model::canonical(normal, dot(&normal, &points[0])))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticScene {
    pub geometry: Geometry,
    pub spec: PopulationSpec,
    pub ground_truth_models: Vec<Model>,
    pub points: Vec<Point>,
    pub labels: Vec<Option<usize>>,
    pub noise_sigma: f64,
}

impl SyntheticScene {
    /// Writes one point per line as `x y [z] label`, with `-1` for outliers.
    pub fn export<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (p, label) in self.points.iter().zip(&self.labels) {
            let label = label.map_or(-1, |l| l as i64);
            match self.geometry {
                Geometry::Line2d => writeln!(out, "{} {} {}", p[0], p[1], label)?,
                Geometry::Plane3d => writeln!(out, "{} {} {} {}", p[0], p[1], p[2], label)?,
            }
        }
        Ok(())
    }
}

fn random_model<R: Rng>(rng: &mut R, geometry: Geometry) -> Model {
    let normal = match geometry {
        Geometry::Line2d => {
            let phi = rng.gen_range(0.0..std::f64::consts::PI);
            [phi.cos(), phi.sin(), 0.0]
        }
        Geometry::Plane3d => loop {
            let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let len = norm(&v);
            if len > 1e-6 {
                break v.map(|c| c / len);
            }
        },
    };
    Model::canonical(normal, rng.gen_range(-0.5..0.5))
}

fn well_separated(models: &[Model], sigma: f64) -> bool {
    let min_cos = MIN_NORMAL_ANGLE_DEG.to_radians().cos();
    models.iter().enumerate().all(|(i, a)| {
        models[i + 1..].iter().all(|b| {
            dot(&a.normal, &b.normal).abs() <= min_cos && (a.offset - b.offset).abs() >= MIN_OFFSET_GAP_SIGMAS * sigma
        })
    })
}

fn in_box(p: &Point, dim: usize) -> bool {
    p[..dim].iter().all(|c| c.abs() <= 1.0)
}

fn point_on_model<R: Rng>(rng: &mut R, model: &Model, geometry: Geometry) -> Point {
    let n = model.normal;
    let anchor = n.map(|c| c * model.offset);
    match geometry {
        Geometry::Line2d => {
            let d = [-n[1], n[0], 0.0];
            // intersect the line with the box, slab by slab
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for axis in 0..2 {
                if d[axis].abs() > 1e-12 {
                    let a = (-1.0 - anchor[axis]) / d[axis];
                    let b = (1.0 - anchor[axis]) / d[axis];
                    lo = lo.max(a.min(b));
                    hi = hi.min(a.max(b));
                }
            }
            let t = rng.gen_range(lo..=hi);
            [anchor[0] + t * d[0], anchor[1] + t * d[1], 0.0]
        }
        Geometry::Plane3d => {
            let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let u = cross(&n, &helper);
            let u = u.map(|c| c / norm(&u));
            let v = cross(&n, &u);
            let reach = 3f64.sqrt();
            loop {
                let s = rng.gen_range(-reach..reach);
                let t = rng.gen_range(-reach..reach);
                let p = [0, 1, 2].map(|i| anchor[i] + s * u[i] + t * v[i]);
                if in_box(&p, 3) {
                    break p;
                }
            }
        }
    }
}

/// Draws a scene matching `spec`; identical seeds give identical scenes.
pub fn generate_scene(spec: &PopulationSpec, geometry: Geometry, noise_sigma: f64, seed: u64) -> Result<SyntheticScene> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::domain(format!("noise sigma must be finite and non-negative, got {noise_sigma}")));
    }
    let mut rng = trial_rng(seed, u64::MAX);
    let mut models = Vec::new();
    let mut separated = false;
    for _ in 0..SEPARATION_ATTEMPTS {
        models = (0..spec.structure_count()).map(|_| random_model(&mut rng, geometry)).collect();
        if well_separated(&models, noise_sigma) {
            separated = true;
            break;
        }
    }
    if !separated {
        return Err(Error::SeparationFailure(SEPARATION_ATTEMPTS));
    }

    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::domain(e.to_string()))?;
    let dim = geometry.dim();
    let mut points = Vec::with_capacity(spec.total_points());
    for (model, &size) in models.iter().zip(spec.structure_sizes()) {
        for _ in 0..size {
            let p = point_on_model(&mut rng, model, geometry);
            let e = noise.sample(&mut rng);
            points.push([0, 1, 2].map(|i| p[i] + e * model.normal[i]));
        }
    }
    for _ in 0..spec.outlier_count() {
        let mut p = [0.0; 3];
        for c in p.iter_mut().take(dim) {
            *c = rng.gen_range(-1.0..=1.0);
        }
        points.push(p);
    }
    Ok(SyntheticScene {
        geometry,
        spec: spec.clone(),
        ground_truth_models: models,
        points,
        labels: spec.labels(),
        noise_sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoOutcome {
    /// The grab held at least `dof` ground-truth points of every structure.
    pub coverage_success: bool,
    /// Structures whose best extracted model explains at least [`RECOVERY_OVERLAP`] of their points.
    pub recovered_models: usize,
    pub overlap_scores: Vec<f64>,
    pub extracted: Vec<Model>,
    pub grab: GrabOutcome,
}

// Support of a hypothesis among unclaimed points; ordered so the best compares greatest.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    inliers: usize,
    residual_sum: f64,
    index: usize,
}

impl Score {
    fn better(self, other: Self) -> Self {
        let self_wins = match self.inliers.cmp(&other.inliers) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => match self.residual_sum.total_cmp(&other.residual_sum) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => self.index < other.index,
            },
        };
        if self_wins {
            self
        } else {
            other
        }
    }
}

fn hypotheses(scene: &SyntheticScene, grab: &[usize], seed: u64) -> Vec<Model> {
    let dof = scene.geometry.dof();
    let r = grab.len();
    let fit = |positions: &[usize]| {
        let pts: Vec<Point> = positions.iter().map(|&i| scene.points[grab[i]]).collect();
        fit_minimal(&pts, scene.geometry).ok()
    };
    if count_subsets(r, dof) <= MAX_HYPOTHESES {
        let mut out = Vec::new();
        let mut combo: Vec<usize> = (0..dof).collect();
        if dof > r {
            return out;
        }
        loop {
            out.extend(fit(&combo));
            // next combination in lexicographic order
            let Some(i) = (0..dof).rev().find(|&i| combo[i] < r - dof + i) else {
                break;
            };
            combo[i] += 1;
            for j in i + 1..dof {
                combo[j] = combo[j - 1] + 1;
            }
        }
        out
    } else {
        let sub_seed = trial_seed(seed, u64::MAX - 1);
        (0..MAX_HYPOTHESES)
            .into_par_iter()
            .filter_map(|h| fit(&sample_grab(r, dof, sub_seed, h).expect("dof <= r")))
            .collect()
    }
}

fn count_subsets(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// One grab of `r` points followed by greedy model extraction at inlier threshold `tau`.
pub fn run_demo_trial(scene: &SyntheticScene, r: usize, tau: f64, seed: u64) -> Result<DemoOutcome> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::domain(format!("inlier threshold must be positive, got {tau}")));
    }
    let spec = &scene.spec;
    let grab = sample_grab(spec.total_points(), r, seed, 0)?;
    let tally = GrabOutcome::tally(spec, &grab);
    let coverage_success = tally.covers(scene.geometry.dof());

    let hyps = hypotheses(scene, &grab, seed);
    let mut claimed = vec![false; scene.points.len()];
    let mut extracted = Vec::new();
    for _ in 0..spec.structure_count() {
        let best = hyps
            .par_iter()
            .enumerate()
            .map(|(index, model)| {
                let mut inliers = 0;
                let mut residual_sum = 0.0;
                for (p, _) in scene.points.iter().zip(&claimed).filter(|(_, &c)| !c) {
                    let d = residual(model, p);
                    if d <= tau {
                        inliers += 1;
                        residual_sum += d;
                    }
                }
                Score { inliers, residual_sum, index }
            })
            .reduce_with(Score::better);
        let Some(best) = best.filter(|s| s.inliers > 0) else {
            break;
        };
        let model = hyps[best.index];
        for (p, c) in scene.points.iter().zip(claimed.iter_mut()) {
            if residual(&model, p) <= tau {
                *c = true;
            }
        }
        extracted.push(model);
    }

    let overlap_scores: Vec<f64> = spec
        .structure_ranges()
        .into_iter()
        .map(|range| {
            let size = range.len() as f64;
            extracted
                .iter()
                .map(|m| scene.points[range.clone()].iter().filter(|p| residual(m, p) <= tau).count() as f64 / size)
                .fold(0.0, f64::max)
        })
        .collect();
    let recovered_models = overlap_scores.iter().filter(|&&o| o >= RECOVERY_OVERLAP).count();
    Ok(DemoOutcome { coverage_success, recovered_models, overlap_scores, extracted, grab: tally })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoSummary {
    pub coverage_rate: f64,
    pub recovery_rate: f64,
    pub r_used: usize,
    pub trials: usize,
}

/// Runs `trials` independent trials; trial `t` uses `trial_seed(seed, t)`.
pub fn run_demo(scene: &SyntheticScene, r: usize, tau: f64, trials: usize, seed: u64) -> Result<DemoSummary> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_demo_trial(scene, r, tau, trial_seed(seed, t)))
        .collect::<Result<Vec<_>>>()?;
    let covered = outcomes.iter().filter(|o| o.coverage_success).count();
    let recovered: usize = outcomes.iter().map(|o| o.recovered_models).sum();
    Ok(DemoSummary {
        coverage_rate: covered as f64 / trials as f64,
        recovery_rate: recovered as f64 / (trials * scene.spec.structure_count()) as f64,
        r_used: r,
        trials,
    })
}
