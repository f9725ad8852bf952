//! Quadrature weights on scattered sites in `[-1,1]^d`.
//!
//! Grid-based approximation formulas need functionals like "integrate
//! against the Chebyshev measure" or "apply a fixed finite-difference
//! stencil" evaluated from whatever samples are available. This module
//! replaces such functionals by weights on a subset of the scattered sites:
//!
//! 1. measure how dense the sites are ([`fill_distance`]),
//! 2. thin them to one representative per subcube ([`select_representatives`]),
//! 3. solve a small moment system for minimum-norm weights ([`solve_moments`]),
//!    choosing the polynomial degree by a downward search when it is not
//!    dictated by the caller ([`exactness_degree_search`]).
//!
//! Moment systems are underdetermined by design; the minimum-Euclidean-norm
//! solution keeps the weights small and the functional stable.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::chebyshev::cheb_value;
use crate::error::{AtlasError, Result};
use crate::linalg::{min_norm_solve, MinNormSolution};

/// Metric used by [`fill_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Sup-norm on `[-1,1]^d`.
    SupNorm,
    /// Sup-norm between coordinatewise arccosines, i.e. on `[0,pi]^d`.
    /// This is the natural density measure for Chebyshev-style quadrature,
    /// which needs sites crowded near the cube faces.
    Arccos,
}

/// Polynomial basis for moment systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Monomial,
    Chebyshev,
}

/// Multi-indices `k` with `max_i k_i <= degree`, in row-major order
/// (last coordinate fastest). This is the canonical ordering shared by
/// moment targets and coefficient tensors.
pub fn multi_indices(d: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity((degree + 1).pow(d as u32));
    let mut k = vec![0usize; d];
    loop {
        out.push(k.clone());
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if k[axis] < degree {
                k[axis] += 1;
                for v in &mut k[axis + 1..] {
                    *v = 0;
                }
                break;
            }
        }
    }
}

/// Evaluate one basis element `k` at a point of the cube.
pub fn basis_value(basis: Basis, k: &[usize], point: &[f64]) -> f64 {
    match basis {
        Basis::Monomial => k
            .iter()
            .zip(point)
            .map(|(&ki, &x)| x.powi(ki as i32))
            .product(),
        Basis::Chebyshev => k.iter().zip(point).map(|(&ki, &x)| cheb_value(ki, x)).product(),
    }
}

/// Target moments for every multi-index up to a coordinatewise degree.
#[derive(Debug, Clone)]
pub struct MomentSpec {
    pub basis: Basis,
    pub d: usize,
    pub degree: usize,
    /// Aligned with [`multi_indices`]`(d, degree)`.
    pub targets: Vec<f64>,
}

impl MomentSpec {
    pub fn new<F>(basis: Basis, d: usize, degree: usize, target: F) -> Self
    where
        F: Fn(&[usize]) -> f64,
    {
        let targets = multi_indices(d, degree).iter().map(|k| target(k)).collect();
        MomentSpec { basis, d, degree, targets }
    }

    /// Chebyshev moments of the probability-normalized Chebyshev measure:
    /// 1 for the zero index, 0 otherwise.
    pub fn chebyshev_delta(d: usize, degree: usize) -> Self {
        Self::new(Basis::Chebyshev, d, degree, |k| {
            if k.iter().all(|&ki| ki == 0) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Monomial moments of the mass-one uniform measure on the cube:
    /// product of `1/(k_i + 1)` over even `k_i`, zero if any `k_i` is odd.
    pub fn monomial_uniform(d: usize, degree: usize) -> Self {
        Self::new(Basis::Monomial, d, degree, |k| {
            let mut m = 1.0;
            for &ki in k {
                if ki % 2 == 1 {
                    return 0.0;
                }
                m /= (ki + 1) as f64;
            }
            m
        })
    }
}

/// Default targets used by the degree search for each basis.
fn default_targets(basis: Basis, d: usize, degree: usize) -> MomentSpec {
    match basis {
        Basis::Chebyshev => MomentSpec::chebyshev_delta(d, degree),
        Basis::Monomial => MomentSpec::monomial_uniform(d, degree),
    }
}

/// Numerical thresholds for moment solves.
#[derive(Debug, Clone)]
pub struct QuadratureConfig {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_rel_tol: f64,
    /// Condition-number cap used by the degree search.
    pub condition_cap: f64,
    /// Residual at or below which a weight set counts as exact.
    pub residual_tolerance: f64,
    /// Residual above which a moment system is declared infeasible.
    pub infeasible_threshold: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rank_rel_tol: crate::linalg::RANK_REL_TOL,
            condition_cap: 1e8,
            residual_tolerance: 1e-10,
            infeasible_threshold: 1e-6,
        }
    }
}

/// Weights on a support of site indices, with the attained moment residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureWeights {
    pub basis: Basis,
    pub degree: usize,
    /// Indices into the caller's full site list; weights off this support are zero.
    #[serde(rename = "indices")]
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    /// `max_k |sum_j w_j b_k(x_j) - target_k|`.
    pub residual: f64,
}

impl QuadratureWeights {
    /// Whether the moment conditions hold to within `tol`.
    pub fn exact_within(&self, tol: f64) -> bool {
        self.residual <= tol
    }

    /// Apply the functional to values sampled on the full site list.
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.support.iter().zip(&self.weights).map(|(&i, w)| w * values[i]).sum()
    }
}

const DEFAULT_GRID_CELLS: usize = 32;

/// Fill distance of the sites: the sup over the domain of the distance to
/// the nearest site, approximated on a refinement grid (at least 32 cells
/// per axis). For [`Metric::Arccos`] both sites and grid live in `[0,pi]^d`
/// after a coordinatewise arccosine.
pub fn fill_distance(points: &[Vec<f64>], metric: Metric) -> Result<f64> {
    fill_distance_with(points, metric, DEFAULT_GRID_CELLS)
}

pub fn fill_distance_with(points: &[Vec<f64>], metric: Metric, cells: usize) -> Result<f64> {
    let d = check_cube_points(points)?;
    let cells = cells.max(DEFAULT_GRID_CELLS);
    let mapped: Vec<Vec<f64>> = points.iter().map(|p| map_point(p, metric)).collect();
    let (lo, hi) = match metric {
        Metric::SupNorm => (-1.0, 1.0),
        Metric::Arccos => (0.0, std::f64::consts::PI),
    };
    let step = (hi - lo) / cells as f64;
    let mut node = vec![0usize; d];
    let mut worst: f64 = 0.0;
    let mut probe = vec![0.0; d];
    loop {
        for (axis, &i) in node.iter().enumerate() {
            probe[axis] = lo + step * i as f64;
        }
        let nearest = mapped
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&probe)
                    .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
        // Odometer over grid nodes, last axis fastest.
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(worst);
            }
            axis -= 1;
            if node[axis] < cells {
                node[axis] += 1;
                for v in &mut node[axis + 1..] {
                    *v = 0;
                }
                break;
            }
        }
    }
}

fn map_point(p: &[f64], metric: Metric) -> Vec<f64> {
    match metric {
        Metric::SupNorm => p.to_vec(),
        Metric::Arccos => p.iter().map(|&x| x.clamp(-1.0, 1.0).acos()).collect(),
    }
}

pub(crate) fn check_cube_points(points: &[Vec<f64>]) -> Result<usize> {
    if points.is_empty() {
        return Err(AtlasError::Validation("site list must be non-empty".into()));
    }
    let d = points[0].len();
    if d == 0 {
        return Err(AtlasError::Validation("sites must have dimension at least 1".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(AtlasError::Validation(format!(
                "site {i} has {} coordinates, expected {d}",
                p.len()
            )));
        }
        if p.iter().any(|&x| !(x.abs() <= 1.0 + 1e-9)) {
            return Err(AtlasError::Validation(format!(
                "site {i} lies outside [-1,1]^{d}"
            )));
        }
    }
    Ok(d)
}

/// Partition the cube into congruent subcubes of side at most `subcube_side`
/// and keep the lowest point index in each nonempty subcube.
pub fn select_representatives(points: &[Vec<f64>], subcube_side: f64) -> Result<Vec<usize>> {
    let d = check_cube_points(points)?;
    if !(subcube_side > 0.0) {
        return Err(AtlasError::Validation(format!(
            "subcube side must be positive, got {subcube_side}"
        )));
    }
    let cells = ((2.0 / subcube_side).ceil() as usize).max(1);
    let cell_side = 2.0 / cells as f64;
    let mut chosen: std::collections::BTreeMap<Vec<usize>, usize> = Default::default();
    for (i, p) in points.iter().enumerate() {
        let key: Vec<usize> = p
            .iter()
            .map(|&x| (((x + 1.0) / cell_side).floor() as isize).clamp(0, cells as isize - 1) as usize)
            .collect();
        chosen.entry(key).or_insert(i);
        let _ = d;
    }
    let mut reps: Vec<usize> = chosen.into_values().collect();
    reps.sort_unstable();
    Ok(reps)
}

/// Minimum-norm weights on `support` matching the given moments.
///
/// Returns an infeasible-moments error when even the least-squares optimum
/// misses the targets by more than the configured threshold; smaller
/// residuals are recorded on the result so callers can decide whether the
/// weights count as exact.
pub fn solve_moments(
    points: &[Vec<f64>],
    support: &[usize],
    spec: &MomentSpec,
    config: &QuadratureConfig,
) -> Result<QuadratureWeights> {
    Ok(solve_moments_full(points, support, spec, config)?.0)
}

fn solve_moments_full(
    points: &[Vec<f64>],
    support: &[usize],
    spec: &MomentSpec,
    config: &QuadratureConfig,
) -> Result<(QuadratureWeights, MinNormSolution)> {
    let d = check_cube_points(points)?;
    if d != spec.d {
        return Err(AtlasError::Validation(format!(
            "moment spec is {}-dimensional, sites are {d}-dimensional",
            spec.d
        )));
    }
    if support.is_empty() {
        return Err(AtlasError::InsufficientData("weight support is empty".into()));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= points.len()) {
        return Err(AtlasError::Validation(format!(
            "support index {bad} out of range for {} sites",
            points.len()
        )));
    }
    let indices = multi_indices(spec.d, spec.degree);
    if spec.targets.len() != indices.len() {
        return Err(AtlasError::Validation(format!(
            "{} targets for {} multi-indices",
            spec.targets.len(),
            indices.len()
        )));
    }
    let mut a = DMatrix::zeros(indices.len(), support.len());
    for (row, k) in indices.iter().enumerate() {
        for (col, &j) in support.iter().enumerate() {
            a[(row, col)] = basis_value(spec.basis, k, &points[j]);
        }
    }
    let b = DVector::from_row_slice(&spec.targets);
    let solution = min_norm_solve(&a, &b, config.rank_rel_tol)?;
    if solution.max_residual > config.infeasible_threshold {
        return Err(AtlasError::InfeasibleMoments {
            residual: solution.max_residual,
            threshold: config.infeasible_threshold,
        });
    }
    let weights = QuadratureWeights {
        basis: spec.basis,
        degree: spec.degree,
        support: support.to_vec(),
        weights: solution.x.iter().copied().collect(),
        residual: solution.max_residual,
    };
    Ok((weights, solution))
}

/// Largest degree `<= start_degree` whose default moment system is solvable
/// with residual within tolerance and acceptable conditioning.
pub fn exactness_degree_search(
    points: &[Vec<f64>],
    support: &[usize],
    basis: Basis,
    start_degree: usize,
    config: &QuadratureConfig,
) -> Result<usize> {
    let d = check_cube_points(points)?;
    for degree in (0..=start_degree).rev() {
        let spec = default_targets(basis, d, degree);
        match solve_moments_full(points, support, &spec, config) {
            Ok((weights, info)) => {
                if weights.residual <= config.residual_tolerance
                    && info.condition() <= config.condition_cap
                {
                    return Ok(degree);
                }
            }
            Err(AtlasError::InfeasibleMoments { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Err(AtlasError::InfeasibleMoments {
        residual: f64::INFINITY,
        threshold: config.residual_tolerance,
    })
}
