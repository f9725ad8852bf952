//! Local coordinate charts built from squared Euclidean distances.
//!
//! A chart is determined by a *coordinate star*: a center `x0` together with
//! `d` anchor points `x1..xd` drawn from the data at a comparable distance
//! from the center. Writing `psi(x) = (|x - xl|^2)_l` for the vector of
//! squared anchor distances, the chart map is the recentred, rescaled
//!
//! ```text
//! phi(x) = (sqrt(d) / beta) * (psi(x) - psi(x0))
//! ```
//!
//! which sends a neighborhood of the center into the cube `[-1,1]^d`. No
//! spectral decomposition is involved; evaluating a chart costs `d` squared
//! distances. The scale `beta` is calibrated from data so that most of the
//! center's nearest neighbors land inside the cube while the map stays
//! bi-Lipschitz in an empirical sense (bounded spread of secant ratios).

use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::cloud::{distance, squared_distance, PointCloud};
use crate::error::{AtlasError, Result};
use crate::linalg::smallest_singular_value;

/// Center plus `d` anchors, with the calibrated cube scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateStar {
    center: Vec<f64>,
    anchors: Vec<Vec<f64>>,
    beta_star: f64,
    /// Smallest singular value of the raw anchor-difference matrix.
    gamma_proxy: f64,
}

/// Default threshold on the smallest singular value of the column-normalized
/// anchor-difference matrix, below which a star is rejected as degenerate.
pub const GAMMA_THRESHOLD: f64 = 0.1;

impl CoordinateStar {
    pub fn new(center: Vec<f64>, anchors: Vec<Vec<f64>>, beta_star: f64) -> Result<Self> {
        Self::with_threshold(center, anchors, beta_star, GAMMA_THRESHOLD)
    }

    pub fn with_threshold(
        center: Vec<f64>,
        anchors: Vec<Vec<f64>>,
        beta_star: f64,
        gamma_threshold: f64,
    ) -> Result<Self> {
        let big_d = center.len();
        let d = anchors.len();
        if d == 0 {
            return Err(AtlasError::Validation("a star needs at least one anchor".into()));
        }
        if d > big_d {
            return Err(AtlasError::Validation(format!(
                "{d} anchors in ambient dimension {big_d}: anchor differences cannot be independent"
            )));
        }
        if anchors.iter().any(|a| a.len() != big_d) {
            return Err(AtlasError::Validation("anchors must match the center's dimension".into()));
        }
        if !(beta_star > 0.0) {
            return Err(AtlasError::Validation(format!("beta_star must be positive, got {beta_star}")));
        }
        if anchors.iter().any(|a| squared_distance(a, &center) == 0.0) {
            return Err(AtlasError::Validation("anchors must be distinct from the center".into()));
        }
        let raw = difference_matrix(&center, &anchors, false);
        let normalized = difference_matrix(&center, &anchors, true);
        let gamma_proxy = smallest_singular_value(&raw);
        let sigma_min = smallest_singular_value(&normalized);
        if sigma_min < gamma_threshold {
            return Err(AtlasError::DegenerateStar { sigma_min, threshold: gamma_threshold });
        }
        Ok(CoordinateStar { center, anchors, beta_star, gamma_proxy })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    /// Intrinsic dimension `d` (number of anchors).
    pub fn dim(&self) -> usize {
        self.anchors.len()
    }

    pub fn beta_star(&self) -> f64 {
        self.beta_star
    }

    pub fn gamma_proxy(&self) -> f64 {
        self.gamma_proxy
    }
}

fn difference_matrix(center: &[f64], anchors: &[Vec<f64>], normalize: bool) -> DMatrix<f64> {
    let big_d = center.len();
    let mut m = DMatrix::zeros(big_d, anchors.len());
    for (j, a) in anchors.iter().enumerate() {
        let norm = if normalize { distance(a, center) } else { 1.0 };
        for i in 0..big_d {
            m[(i, j)] = (a[i] - center[i]) / norm;
        }
    }
    m
}

/// A coordinate star with its chart map into `[-1,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChartJson", into = "ChartJson")]
pub struct ChartMap {
    star: CoordinateStar,
    psi0: Vec<f64>,
    scale: f64,
}

impl ChartMap {
    pub fn new(star: CoordinateStar) -> Self {
        let psi0: Vec<f64> =
            star.anchors.iter().map(|a| squared_distance(&star.center, a)).collect();
        let scale = (star.dim() as f64).sqrt() / star.beta_star;
        ChartMap { star, psi0, scale }
    }

    pub fn star(&self) -> &CoordinateStar {
        &self.star
    }

    pub fn dim(&self) -> usize {
        self.star.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.star.center.len()
    }

    /// Squared anchor distances of the center, `psi(x0)`.
    pub fn psi0(&self) -> &[f64] {
        &self.psi0
    }

    /// Unscaled squared-distance coordinates `psi(x) = (|x - xl|^2)_l`.
    pub fn psi(&self, x: &[f64]) -> Vec<f64> {
        self.star.anchors.iter().map(|a| squared_distance(x, a)).collect()
    }

    /// Chart coordinates `phi(x) = (sqrt(d)/beta) (psi(x) - psi0)`.
    pub fn phi(&self, x: &[f64]) -> Vec<f64> {
        self.star
            .anchors
            .iter()
            .zip(&self.psi0)
            .map(|(a, p0)| self.scale * (squared_distance(x, a) - p0))
            .collect()
    }

    /// Membership test: `|phi(x)|_inf <= 1`.
    pub fn in_chart(&self, x: &[f64]) -> bool {
        self.phi_sup_norm(x) <= 1.0
    }

    pub fn phi_sup_norm(&self, x: &[f64]) -> f64 {
        self.phi(x).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Serialized form of a chart.
#[derive(Serialize, Deserialize, Clone)]
struct ChartJson {
    center: Vec<f64>,
    anchors: Vec<Vec<f64>>,
    beta_star: f64,
    psi0: Vec<f64>,
    d: usize,
}

impl From<ChartMap> for ChartJson {
    fn from(chart: ChartMap) -> Self {
        ChartJson {
            d: chart.dim(),
            center: chart.star.center,
            anchors: chart.star.anchors,
            beta_star: chart.star.beta_star,
            psi0: chart.psi0,
        }
    }
}

impl TryFrom<ChartJson> for ChartMap {
    type Error = AtlasError;

    fn try_from(json: ChartJson) -> Result<Self> {
        if json.d != json.anchors.len() {
            return Err(AtlasError::Validation(format!(
                "chart declares d={} but has {} anchors",
                json.d,
                json.anchors.len()
            )));
        }
        let star = CoordinateStar::new(json.center, json.anchors, json.beta_star)?;
        let chart = ChartMap::new(star);
        if json.psi0.len() != chart.psi0.len() {
            return Err(AtlasError::Validation("psi0 length does not match anchor count".into()));
        }
        for (stored, computed) in json.psi0.iter().zip(&chart.psi0) {
            let tol = 1e-9 * computed.abs().max(1.0);
            if (stored - computed).abs() > tol {
                return Err(AtlasError::Validation(format!(
                    "stored psi0 entry {stored} disagrees with center-anchor distance {computed}"
                )));
            }
        }
        Ok(chart)
    }
}

/// Knobs for star selection and atlas construction.
#[derive(Debug, Clone)]
pub struct ChartConfig {
    /// `k` for the median k-nearest-neighbor radius that sets the anchor annulus scale.
    pub knn: usize,
    /// Anchor annulus `[c1 * r, c2 * r]` around the center.
    pub c1: f64,
    pub c2: f64,
    /// Explicit annulus scale, overriding the median k-NN radius.
    pub annulus_radius: Option<f64>,
    /// Number of nearest neighbors used to calibrate `beta`.
    pub calibration_k: usize,
    /// Minimum fraction of those neighbors that must land inside the cube.
    pub coverage_fraction: f64,
    /// Maximum allowed max/min spread of secant ratios among the captured neighbors.
    pub spread_bound: f64,
    /// Degeneracy threshold on the normalized anchor-difference singular value.
    pub gamma_threshold: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        ChartConfig {
            knn: 8,
            c1: 1.0,
            c2: 2.0,
            annulus_radius: None,
            calibration_k: 24,
            coverage_fraction: 0.8,
            spread_bound: 10.0,
            gamma_threshold: GAMMA_THRESHOLD,
        }
    }
}

/// Median over all points of the distance to the k-th nearest neighbor.
pub fn median_knn_radius(cloud: &PointCloud, k: usize) -> Result<f64> {
    let n = cloud.len();
    if k == 0 || n < k + 1 {
        return Err(AtlasError::InsufficientData(format!(
            "median {k}-NN radius needs at least {} points, have {n}",
            k + 1
        )));
    }
    let mut radii = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        for j in 0..n {
            if j != i {
                dists.push(distance(cloud.point(i), cloud.point(j)));
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.push(dists[k - 1]);
    }
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(radii[n / 2])
}

/// Pick a coordinate star for the given center: anchors are drawn from the
/// annulus `[c1 r, c2 r]`, chosen greedily to maximize the smallest singular
/// value of the accumulated (column-normalized) difference matrix, and `beta`
/// is calibrated on the center's nearest neighbors.
pub fn select_star(
    cloud: &PointCloud,
    center_index: usize,
    d: usize,
    config: &ChartConfig,
) -> Result<CoordinateStar> {
    let n = cloud.len();
    if center_index >= n {
        return Err(AtlasError::Validation(format!(
            "center index {center_index} out of range for {n} points"
        )));
    }
    if d == 0 || d > cloud.dim() {
        return Err(AtlasError::Validation(format!(
            "chart dimension must lie in 1..={}, got {d}",
            cloud.dim()
        )));
    }
    let center = cloud.point(center_index);
    let r = match config.annulus_radius {
        Some(r) if r > 0.0 => r,
        Some(r) => {
            return Err(AtlasError::Validation(format!("annulus radius must be positive, got {r}")))
        }
        None => median_knn_radius(cloud, config.knn)?,
    };
    let (lo, hi) = (config.c1 * r, config.c2 * r);
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            if i == center_index {
                return false;
            }
            let dist = distance(cloud.point(i), center);
            dist > 0.0 && dist >= lo && dist <= hi
        })
        .collect();
    if candidates.len() < d {
        return Err(AtlasError::InsufficientData(format!(
            "only {} annulus candidates in [{lo:.4}, {hi:.4}] around point {center_index}, need {d}",
            candidates.len()
        )));
    }

    // Greedy anchor choice: at each step take the candidate that maximizes the
    // smallest singular value of the normalized difference matrix; ties go to
    // the lowest index.
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut best: Option<(usize, f64)> = None;
        for &i in &candidates {
            if chosen.contains(&i) {
                continue;
            }
            let mut anchors: Vec<Vec<f64>> =
                chosen.iter().map(|&j| cloud.point(j).to_vec()).collect();
            anchors.push(cloud.point(i).to_vec());
            let sigma = smallest_singular_value(&difference_matrix(center, &anchors, true));
            if best.map_or(true, |(_, s)| sigma > s) {
                best = Some((i, sigma));
            }
        }
        chosen.push(best.expect("candidate list is non-empty").0);
    }
    let anchors: Vec<Vec<f64>> = chosen.iter().map(|&j| cloud.point(j).to_vec()).collect();

    let beta = calibrate_beta(cloud, center_index, &anchors, config)?;
    CoordinateStar::with_threshold(center.to_vec(), anchors, beta, config.gamma_threshold)
}

/// Largest cube scale such that at least `coverage_fraction` of the center's
/// `calibration_k` nearest neighbors map into `[-1,1]^d` while the secant-ratio
/// spread over the captured neighbors stays below `spread_bound`. When no
/// scale meets the spread bound the smallest admissible scale (the coverage
/// quantile) is used.
fn calibrate_beta(
    cloud: &PointCloud,
    center_index: usize,
    anchors: &[Vec<f64>],
    config: &ChartConfig,
) -> Result<f64> {
    let center = cloud.point(center_index);
    let d = anchors.len();
    let psi = |x: &[f64]| -> Vec<f64> { anchors.iter().map(|a| squared_distance(x, a)).collect() };
    let psi0 = psi(center);

    // Nearest neighbors of the center, excluding duplicates of it.
    let mut order: Vec<(f64, usize)> = (0..cloud.len())
        .filter(|&i| i != center_index)
        .map(|i| (distance(cloud.point(i), center), i))
        .filter(|&(dist, _)| dist > 0.0)
        .collect();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = config.calibration_k.min(order.len());
    if k == 0 {
        return Err(AtlasError::InsufficientData(
            "beta calibration needs at least one neighbor distinct from the center".into(),
        ));
    }
    let neighbors: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();

    // Scale at which neighbor i sits exactly on the cube boundary.
    let mut boundary: Vec<f64> = neighbors
        .iter()
        .map(|&i| {
            let p = psi(cloud.point(i));
            let diff_sup =
                p.iter().zip(&psi0).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
            (d as f64).sqrt() * diff_sup
        })
        .collect();
    let mut sorted = boundary.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let need = ((config.coverage_fraction * k as f64).ceil() as usize).clamp(1, k);
    let spread = |beta: f64| -> f64 {
        let mut included: Vec<&[f64]> = vec![center];
        for (b, &i) in boundary.iter().zip(&neighbors) {
            if *b <= beta {
                included.push(cloud.point(i));
            }
        }
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio: f64 = 0.0;
        for i in 0..included.len() {
            for j in i + 1..included.len() {
                let chord = distance(included[i], included[j]);
                if chord == 0.0 {
                    continue;
                }
                let pi = psi(included[i]);
                let pj = psi(included[j]);
                let dpsi: f64 =
                    pi.iter().zip(&pj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let ratio = dpsi / chord;
                min_ratio = min_ratio.min(ratio);
                max_ratio = max_ratio.max(ratio);
            }
        }
        if min_ratio > 0.0 && min_ratio.is_finite() {
            max_ratio / min_ratio
        } else {
            f64::INFINITY
        }
    };

    // Try the largest coverage first, backing down to the required quantile.
    for j in (need - 1..k).rev() {
        let beta = sorted[j];
        if beta > 0.0 && spread(beta) <= config.spread_bound {
            return Ok(beta);
        }
    }
    let fallback = sorted[need - 1];
    if fallback > 0.0 {
        return Ok(fallback);
    }
    boundary.retain(|&b| b > 0.0);
    boundary
        .first()
        .copied()
        .ok_or_else(|| AtlasError::InsufficientData("all calibration neighbors coincide with the center".into()))
}

/// A covering family of charts with a chart index assigned to every point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atlas {
    charts: Vec<ChartMap>,
    assignment: Vec<usize>,
}

impl Atlas {
    pub fn charts(&self) -> &[ChartMap] {
        &self.charts
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Indices of the points assigned to chart `idx`.
    pub fn chart_points(&self, idx: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == idx)
            .map(|(i, _)| i)
            .collect()
    }

    /// Chart containing `x`; among charts whose cube contains the point, the
    /// one where `|phi(x)|_inf` is smallest.
    pub fn assign_chart(&self, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for (i, chart) in self.charts.iter().enumerate() {
            let phi = chart.phi(x);
            let norm = phi.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if norm <= 1.0 && best.as_ref().map_or(true, |(_, _, n)| norm < *n) {
                best = Some((i, phi, norm));
            }
        }
        best.map(|(i, phi, _)| (i, phi))
    }

    /// Chart minimizing `|phi(x)|_inf`, with that norm (no membership requirement).
    pub fn nearest_chart(&self, x: &[f64]) -> (usize, Vec<f64>, f64) {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for (i, chart) in self.charts.iter().enumerate() {
            let phi = chart.phi(x);
            let norm = phi.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if best.as_ref().map_or(true, |(_, _, n)| norm < *n) {
                best = Some((i, phi, norm));
            }
        }
        best.expect("atlas contains at least one chart")
    }

    pub fn validate_against(&self, cloud: &PointCloud) -> Result<()> {
        if self.assignment.len() != cloud.len() {
            return Err(AtlasError::Validation(format!(
                "atlas assigns {} points, cloud has {}",
                self.assignment.len(),
                cloud.len()
            )));
        }
        if let Some(&bad) = self.assignment.iter().find(|&&c| c >= self.charts.len()) {
            return Err(AtlasError::Validation(format!(
                "assignment references chart {bad} but the atlas has {} charts",
                self.charts.len()
            )));
        }
        Ok(())
    }
}

/// Greedy cover: repeatedly pick the uncovered point with the most uncovered
/// neighbors within the annulus radius, build a star there, and absorb every
/// uncovered point its chart contains.
pub fn build_atlas(cloud: &PointCloud, d: usize, config: &ChartConfig) -> Result<Atlas> {
    let n = cloud.len();
    let mut config = config.clone();
    if config.annulus_radius.is_none() {
        config.annulus_radius = Some(median_knn_radius(cloud, config.knn)?);
    }
    let reach = config.c2 * config.annulus_radius.unwrap();

    let mut assignment = vec![usize::MAX; n];
    let mut charts: Vec<ChartMap> = Vec::new();
    let mut unusable = vec![false; n];
    let mut covered = 0usize;

    while covered < n {
        // Rank uncovered candidates by how many uncovered points they reach.
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            if assignment[i] != usize::MAX || unusable[i] {
                continue;
            }
            let count = (0..n)
                .filter(|&j| {
                    assignment[j] == usize::MAX && distance(cloud.point(i), cloud.point(j)) <= reach
                })
                .count();
            if best.map_or(true, |(_, c)| count > c) {
                best = Some((i, count));
            }
        }
        let Some((center, _)) = best else {
            let orphans: Vec<usize> =
                (0..n).filter(|&i| assignment[i] == usize::MAX).collect();
            return Err(coverage_error(&orphans));
        };
        match select_star(cloud, center, d, &config) {
            Ok(star) => {
                let chart = ChartMap::new(star);
                let idx = charts.len();
                for j in 0..n {
                    if assignment[j] == usize::MAX && chart.in_chart(cloud.point(j)) {
                        assignment[j] = idx;
                        covered += 1;
                    }
                }
                debug_assert_eq!(assignment[center], idx);
                charts.push(chart);
            }
            Err(AtlasError::InsufficientData(_)) | Err(AtlasError::DegenerateStar { .. }) => {
                unusable[center] = true;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Atlas { charts, assignment })
}

fn coverage_error(orphans: &[usize]) -> AtlasError {
    let shown: Vec<String> = orphans.iter().take(10).map(|i| i.to_string()).collect();
    let suffix = if orphans.len() > 10 { ", ..." } else { "" };
    AtlasError::Coverage(format!(
        "{} points cannot be covered by any star (indices {}{suffix})",
        orphans.len(),
        shown.join(", ")
    ))
}

/// Extreme ratios of chart secants to true geodesic distances.
#[derive(Debug, Clone, Copy)]
pub struct DistortionReport {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Compare `|psi(p) - psi(q)|_2` (unscaled squared-distance coordinates)
/// against an oracle geodesic distance, over all pairs of in-chart points.
///
/// The oracle receives cloud indices and returns `None` where it has no
/// answer; pairs at geodesic distance zero are skipped.
pub fn distortion_report<F>(chart: &ChartMap, cloud: &PointCloud, oracle: F) -> Result<DistortionReport>
where
    F: Fn(usize, usize) -> Option<f64>,
{
    let members: Vec<usize> =
        (0..cloud.len()).filter(|&i| chart.in_chart(cloud.point(i))).collect();
    if members.len() < 2 {
        return Err(AtlasError::InsufficientData(format!(
            "distortion report needs at least two in-chart points, found {}",
            members.len()
        )));
    }
    let mut pairs = 0usize;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for (a, &i) in members.iter().enumerate() {
        let psi_i = chart.psi(cloud.point(i));
        for &j in &members[a + 1..] {
            let Some(rho) = oracle(i, j) else { continue };
            if rho <= 0.0 {
                continue;
            }
            let psi_j = chart.psi(cloud.point(j));
            let secant: f64 =
                psi_i.iter().zip(&psi_j).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let ratio = secant / rho;
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(AtlasError::InsufficientData(
            "no in-chart pair has a defined, positive geodesic distance".into(),
        ));
    }
    Ok(DistortionReport { pairs, min_ratio, max_ratio })
}
