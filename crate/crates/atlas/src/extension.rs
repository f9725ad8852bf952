//! Pre-images, tubular neighborhoods, and out-of-sample extension.
//!
//! A chart maps manifold samples into the cube; three facilities here go
//! the other way or beyond the manifold:
//!
//! * [`fit_preimage`] approximates the inverse chart, one Chebyshev model
//!   per ambient coordinate, all sharing a single quadrature solve;
//! * [`build_tubular`] widens a chart with an orthonormal frame normal to
//!   the anchor directions, so nearby off-manifold points get coordinates
//!   in a higher-dimensional cube (the tube);
//! * [`msn_fit`] interpolates scattered constraints with the polynomial of
//!   minimal smoothing energy (identity, Laplacian, or bilaplacian), the
//!   backbone of [`fit_extension`] on tubular coordinates.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::chart::{Atlas, ChartMap};
use crate::chebyshev::{auto_weights, clenshaw_tensor, compute_coeffs, ChebConfig, ChebModel};
use crate::cloud::PointCloud;
use crate::error::{AtlasError, Result};
use crate::linalg::{min_norm_solve, nullspace_basis};
use crate::quadrature::{check_cube_points, multi_indices};

/// Inverse chart: one coordinate model per ambient dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreImageModel {
    pub dim: usize,
    pub ambient_dim: usize,
    pub models: Vec<ChebModel>,
}

impl PreImageModel {
    /// Ambient point whose chart coordinates are approximately `y`.
    pub fn preimage(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.eval(y)).collect()
    }
}

/// Per-chart inverse models covering a whole atlas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreImageAtlas {
    pub models: Vec<PreImageModel>,
}

/// Fit one inverse model per chart, each from the samples assigned to the
/// chart.
pub fn fit_preimage_atlas(
    atlas: &Atlas,
    cloud: &PointCloud,
    config: &ChebConfig,
) -> Result<PreImageAtlas> {
    let models = atlas
        .charts()
        .iter()
        .enumerate()
        .map(|(idx, chart)| {
            let points: Vec<Vec<f64>> = atlas
                .chart_points(idx)
                .into_iter()
                .map(|i| cloud.point(i).to_vec())
                .collect();
            fit_preimage(&points, chart, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreImageAtlas { models })
}

/// Fit the inverse chart from ambient samples lying in the chart.
///
/// All coordinate fits share one quadrature weight solve on the mapped
/// sites, so the model family is only marginally more expensive than a
/// single scalar fit.
pub fn fit_preimage(
    points: &[Vec<f64>],
    chart: &ChartMap,
    config: &ChebConfig,
) -> Result<PreImageModel> {
    let inside: Vec<&Vec<f64>> = points.iter().filter(|x| chart.in_chart(x)).collect();
    if inside.is_empty() {
        return Err(AtlasError::InsufficientData(
            "no samples fall inside the chart".into(),
        ));
    }
    let sites: Vec<Vec<f64>> = inside.iter().map(|x| chart.phi(x)).collect();
    let (weights, n) = auto_weights(&sites, config)?;
    let models = (0..chart.ambient_dim())
        .map(|j| {
            let values: Vec<f64> = inside.iter().map(|x| x[j]).collect();
            let coeffs = compute_coeffs(&sites, &values, &weights, n, config.filter)?;
            Ok(ChebModel {
                n,
                dim: chart.dim(),
                filter: config.filter,
                coeffs,
                exactness: weights.degree,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreImageModel {
        dim: chart.dim(),
        ambient_dim: chart.ambient_dim(),
        models,
    })
}

/// A chart widened by unit normals: coordinates for a tube around the
/// manifold patch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TubularChart {
    pub chart: ChartMap,
    /// Orthonormal vectors spanning the complement of the anchor
    /// differences; empty when the chart already fills the ambient space.
    pub frame: Vec<Vec<f64>>,
    pub tube_radius: f64,
}

impl TubularChart {
    /// Tangential chart coordinates followed by scaled normal offsets.
    /// Offsets are measured from the nearest of the star's own points,
    /// which is all a chart carries.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.chart.phi(x);
        if self.frame.is_empty() {
            return out;
        }
        let star = self.chart.star();
        let mut base = star.center();
        let mut best = crate::cloud::squared_distance(x, base);
        for anchor in star.anchors() {
            let d2 = crate::cloud::squared_distance(x, anchor);
            if d2 < best {
                best = d2;
                base = anchor;
            }
        }
        for nu in &self.frame {
            let offset: f64 = nu.iter().zip(x).zip(base).map(|((n, xi), bi)| n * (xi - bi)).sum();
            out.push(offset / self.tube_radius);
        }
        out
    }

    /// Dimension of the tube coordinates, `d + (D - d)`.
    pub fn total_dim(&self) -> usize {
        self.chart.dim() + self.frame.len()
    }

    pub fn sup_norm(&self, x: &[f64]) -> f64 {
        self.coordinates(x).iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }

    pub fn in_tube(&self, x: &[f64]) -> bool {
        self.sup_norm(x) <= 1.0
    }
}

/// Widen a chart with an orthonormal normal frame of `s - d` vectors.
///
/// The standard basis is projected off the anchor-difference span and
/// orthonormalized in index order; `s` defaults to the full ambient
/// dimension and the tube radius to the chart's calibration scale
/// `beta_star`.
pub fn build_tubular(
    chart: &ChartMap,
    s: Option<usize>,
    tube_radius: Option<f64>,
) -> Result<TubularChart> {
    let big_d = chart.ambient_dim();
    let d = chart.dim();
    let s = s.unwrap_or(big_d);
    if s < d || s > big_d {
        return Err(AtlasError::Validation(format!(
            "tubular dimension {s} must lie between the chart dimension {d} \
             and the ambient dimension {big_d}"
        )));
    }
    let radius = tube_radius.unwrap_or(chart.star().beta_star());
    if !(radius > 0.0) {
        return Err(AtlasError::Validation(format!(
            "tube radius must be positive, got {radius}"
        )));
    }
    // Orthonormal tangent basis from the anchor differences.
    let star = chart.star();
    let mut tangent: Vec<Vec<f64>> = Vec::with_capacity(d);
    for anchor in star.anchors() {
        let mut v: Vec<f64> =
            anchor.iter().zip(star.center()).map(|(a, c)| a - c).collect();
        for t in &tangent {
            let dot: f64 = t.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, ti) in v.iter_mut().zip(t) {
                *vi -= dot * ti;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Err(AtlasError::Numerical(
                "anchor differences are numerically dependent".into(),
            ));
        }
        for vi in &mut v {
            *vi /= norm;
        }
        tangent.push(v);
    }
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(s - d);
    for i in 0..big_d {
        if frame.len() == s - d {
            break;
        }
        let mut v = vec![0.0; big_d];
        v[i] = 1.0;
        for t in tangent.iter().chain(frame.iter()) {
            let dot: f64 = t.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, ti) in v.iter_mut().zip(t) {
                *vi -= dot * ti;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vi in &mut v {
                *vi /= norm;
            }
            frame.push(v);
        }
    }
    if frame.len() != s - d {
        return Err(AtlasError::Numerical(format!(
            "found {} normal directions, expected {}",
            frame.len(),
            s - d
        )));
    }
    Ok(TubularChart { chart: chart.clone(), frame, tube_radius: radius })
}

/// Smoothing operator whose energy the interpolant minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoother {
    Identity,
    Laplacian,
    Bilaplacian,
}

impl Smoother {
    fn max_derivative(&self) -> usize {
        match self {
            Smoother::Identity => 0,
            Smoother::Laplacian => 2,
            Smoother::Bilaplacian => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MsnConfig {
    pub smoother: Smoother,
    /// Force the coordinatewise degree instead of deriving it from the
    /// constraint count.
    pub degree: Option<usize>,
    /// Extra basis room beyond the constraint count when choosing the degree.
    pub slack: usize,
    /// Per-axis Gauss node count for the energy integrals; raised to
    /// `2 degree + 2` when smaller, which is already exact.
    pub quadrature_order: Option<usize>,
    pub rank_rel_tol: f64,
}

impl Default for MsnConfig {
    fn default() -> Self {
        MsnConfig {
            smoother: Smoother::Laplacian,
            degree: None,
            slack: 5,
            quadrature_order: None,
            rank_rel_tol: crate::linalg::RANK_REL_TOL,
        }
    }
}

/// Minimum-energy interpolant in the tensor Chebyshev basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MsnPolynomial {
    pub dim: usize,
    /// Coordinatewise degree; coefficients run over all indices `<= degree`.
    pub degree: usize,
    pub smoother: Smoother,
    pub coeffs: Vec<f64>,
    pub energy: f64,
    /// `max_j |P(y_j) - g_j|` over the fitted constraints.
    pub constraint_residual: f64,
    /// Stationarity defect of the optimality system.
    pub kkt_residual: f64,
    /// Set when the constraints outnumber the basis and are only matched in
    /// the least-squares sense.
    pub least_squares: bool,
}

impl MsnPolynomial {
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(AtlasError::Validation(format!(
                "point has {} coordinates, polynomial is {}-dimensional",
                y.len(),
                self.dim
            )));
        }
        Ok(clenshaw_tensor(&self.coeffs, self.degree + 1, y))
    }
}

/// `T_k^(p)(t)` for all `k <= max_k`, `p <= max_p`, via
/// `T_k^(p) = 2p T_(k-1)^(p-1) + 2t T_(k-1)^(p) - T_(k-2)^(p)`.
fn derivative_table(t: f64, max_k: usize, max_p: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; max_k + 1]; max_p + 1];
    table[0][0] = 1.0;
    if max_k >= 1 {
        table[0][1] = t;
        if max_p >= 1 {
            table[1][1] = 1.0;
        }
    }
    for k in 2..=max_k {
        table[0][k] = 2.0 * t * table[0][k - 1] - table[0][k - 2];
        for p in 1..=max_p {
            table[p][k] = 2.0 * p as f64 * table[p - 1][k - 1] + 2.0 * t * table[p][k - 1]
                - table[p][k - 2];
        }
    }
    table
}

const MAX_MSN_BASIS: usize = 2000;

/// Energy Gram matrix of the smoothed tensor basis under the normalized
/// Chebyshev measure, by tensor Gauss quadrature of at least order
/// `2 degree + 2` per axis (exact for these polynomial integrands).
/// `coeffs^T G coeffs` is the objective [`msn_fit`] minimizes, so callers
/// can score alternative coefficient vectors against a fit.
pub fn energy_gram(
    dim: usize,
    degree: usize,
    smoother: Smoother,
    order: Option<usize>,
) -> Result<DMatrix<f64>> {
    let basis = multi_indices(dim, degree);
    let b = basis.len();
    if b > MAX_MSN_BASIS {
        return Err(AtlasError::Unsupported(format!(
            "{b} basis elements exceed the supported {MAX_MSN_BASIS}"
        )));
    }
    let m = order.unwrap_or(0).max(2 * degree + 2);
    let nodes: Vec<f64> = (0..m)
        .map(|i| ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos())
        .collect();
    let tables: Vec<Vec<Vec<f64>>> = nodes
        .iter()
        .map(|&t| derivative_table(t, degree, smoother.max_derivative()))
        .collect();
    let node_count = m.pow(dim as u32);
    let mut v = DMatrix::zeros(b, node_count);
    let mut node = vec![0usize; dim];
    for flat in 0..node_count {
        for (row, k) in basis.iter().enumerate() {
            let value = match smoother {
                Smoother::Identity => {
                    let mut prod = 1.0;
                    for (axis, &ka) in k.iter().enumerate() {
                        prod *= tables[node[axis]][0][ka];
                    }
                    prod
                }
                Smoother::Laplacian => {
                    let mut total = 0.0;
                    for a in 0..dim {
                        let mut prod = 1.0;
                        for (axis, &ka) in k.iter().enumerate() {
                            let p = if axis == a { 2 } else { 0 };
                            prod *= tables[node[axis]][p][ka];
                        }
                        total += prod;
                    }
                    total
                }
                Smoother::Bilaplacian => {
                    let mut total = 0.0;
                    for a in 0..dim {
                        for bx in 0..dim {
                            let mut prod = 1.0;
                            for (axis, &ka) in k.iter().enumerate() {
                                let p = if axis == a && axis == bx {
                                    4
                                } else if axis == a || axis == bx {
                                    2
                                } else {
                                    0
                                };
                                prod *= tables[node[axis]][p][ka];
                            }
                            total += prod;
                        }
                    }
                    total
                }
            };
            v[(row, flat)] = value;
        }
        for axis in (0..dim).rev() {
            if node[axis] + 1 < m {
                node[axis] += 1;
                for rest in &mut node[axis + 1..] {
                    *rest = 0;
                }
                break;
            }
        }
    }
    let weight = 1.0 / node_count as f64;
    Ok(&v * v.transpose() * weight)
}

/// Fit the minimum-energy interpolant of scattered constraints in the cube.
///
/// Duplicate constraint points with matching values collapse to one;
/// conflicting values are rejected. Among all energy minimizers the
/// smallest-coefficient-norm one is returned, and both the constraint and
/// stationarity residuals are reported on the result.
pub fn msn_fit(constraints: &[(Vec<f64>, f64)], config: &MsnConfig) -> Result<MsnPolynomial> {
    if constraints.is_empty() {
        return Err(AtlasError::InsufficientData("no constraints to fit".into()));
    }
    let points: Vec<Vec<f64>> = constraints.iter().map(|(p, _)| p.clone()).collect();
    let dim = check_cube_points(&points)?;
    // Dedupe identical points.
    let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
    for (p, g) in constraints {
        match kept.iter().find(|(q, _)| {
            q.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-12)
        }) {
            Some((_, existing)) => {
                if (existing - g).abs() > 1e-9 * existing.abs().max(1.0) {
                    return Err(AtlasError::Validation(format!(
                        "conflicting constraints at {p:?}: {existing} vs {g}"
                    )));
                }
            }
            None => kept.push((p.clone(), *g)),
        }
    }
    let m = kept.len();
    let degree = match config.degree {
        Some(n) => n,
        None => {
            let mut n = 0usize;
            while (n + 1).pow(dim as u32) < m + config.slack {
                n += 1;
            }
            n
        }
    };
    let basis = multi_indices(dim, degree);
    let b = basis.len();
    if b > MAX_MSN_BASIS {
        return Err(AtlasError::Unsupported(format!(
            "{b} basis elements exceed the supported {MAX_MSN_BASIS}"
        )));
    }
    let least_squares = m > b;

    let mut a = DMatrix::zeros(m, b);
    for (row, (p, _)) in kept.iter().enumerate() {
        let tables: Vec<Vec<Vec<f64>>> =
            p.iter().map(|&t| derivative_table(t, degree, 0)).collect();
        for (col, k) in basis.iter().enumerate() {
            let mut prod = 1.0;
            for (axis, &ka) in k.iter().enumerate() {
                prod *= tables[axis][0][ka];
            }
            a[(row, col)] = prod;
        }
    }
    let rhs = DVector::from_iterator(m, kept.iter().map(|(_, g)| *g));

    let q = energy_gram(dim, degree, config.smoother, config.quadrature_order)?;
    let base = min_norm_solve(&a, &rhs, config.rank_rel_tol)?;
    let z = nullspace_basis(&a, config.rank_rel_tol)?;
    let c = if z.ncols() == 0 {
        base.x
    } else {
        let zq = z.transpose() * &q;
        let reduced = &zq * &z;
        let reduced_rhs = -(&zq * &base.x);
        let u = min_norm_solve(&reduced, &reduced_rhs, config.rank_rel_tol)?;
        base.x + z * u.x
    };

    let constraint_residual = (&a * &c - &rhs).amax();
    let grad = &q * &c * 2.0;
    let at = a.transpose();
    let lambda = min_norm_solve(&at, &grad, config.rank_rel_tol)?;
    let kkt_residual = (&grad - &at * lambda.x).amax();
    let energy = (c.transpose() * &q * &c)[(0, 0)];

    Ok(MsnPolynomial {
        dim,
        degree,
        smoother: config.smoother,
        coeffs: c.iter().copied().collect(),
        energy,
        constraint_residual,
        kkt_residual,
        least_squares,
    })
}

/// A tubular chart together with its fitted extension polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionModel {
    pub tubular: TubularChart,
    pub polynomial: MsnPolynomial,
}

/// Fit an extension over the tube from ambient samples.
///
/// Samples outside the tube are ignored; the rest become interpolation
/// constraints in tube coordinates.
pub fn fit_extension(
    points: &[Vec<f64>],
    values: &[f64],
    tubular: &TubularChart,
    config: &MsnConfig,
) -> Result<ExtensionModel> {
    if points.len() != values.len() {
        return Err(AtlasError::Validation(format!(
            "{} values for {} points",
            values.len(),
            points.len()
        )));
    }
    let constraints: Vec<(Vec<f64>, f64)> = points
        .iter()
        .zip(values)
        .filter(|(x, _)| tubular.in_tube(x))
        .map(|(x, &g)| (tubular.coordinates(x), g))
        .collect();
    if constraints.is_empty() {
        return Err(AtlasError::InsufficientData(
            "no samples fall inside the tube".into(),
        ));
    }
    let polynomial = msn_fit(&constraints, config)?;
    Ok(ExtensionModel { tubular: tubular.clone(), polynomial })
}

/// Evaluate an extension at an ambient point of the tube.
pub fn extend_evaluate(model: &ExtensionModel, x: &[f64]) -> Result<f64> {
    let norm = model.tubular.sup_norm(x);
    if norm > 1.0 {
        return Err(AtlasError::OutOfTube { norm });
    }
    model.polynomial.eval(&model.tubular.coordinates(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::CoordinateStar;
    use crate::manifold::ManifoldKind;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plane_chart() -> ChartMap {
        // x(t) = (t1, t2, 0.5, -0.2): a flat sheet in four dimensions.
        let embed = |t1: f64, t2: f64| vec![t1, t2, 0.5, -0.2];
        let star = CoordinateStar::new(
            embed(0.0, 0.0),
            vec![embed(0.4, 0.0), embed(0.0, 0.4)],
            1.0,
        )
        .unwrap();
        ChartMap::new(star)
    }

    #[test]
    fn normal_frame_is_orthonormal_and_normal() {
        let chart = plane_chart();
        let tubular = build_tubular(&chart, None, None).unwrap();
        assert_eq!(tubular.frame.len(), 2);
        for (i, u) in tubular.frame.iter().enumerate() {
            for (j, v) in tubular.frame.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(dot, want, epsilon = 1e-10);
            }
            let star = tubular.chart.star();
            for anchor in star.anchors() {
                let diff: f64 = u
                    .iter()
                    .zip(anchor.iter().zip(star.center()))
                    .map(|(ui, (a, c))| ui * (a - c))
                    .sum();
                assert!(diff.abs() <= 1e-8, "frame not normal: {diff}");
            }
        }
    }

    #[test]
    fn points_on_a_flat_sheet_have_zero_normal_coordinates() {
        let chart = plane_chart();
        let tubular = build_tubular(&chart, None, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..40 {
            let t1 = rng.gen::<f64>() * 0.8 - 0.4;
            let t2 = rng.gen::<f64>() * 0.8 - 0.4;
            let x = vec![t1, t2, 0.5, -0.2];
            let coords = tubular.coordinates(&x);
            assert_eq!(coords.len(), 4);
            assert!(coords[2].abs() <= 1e-12);
            assert!(coords[3].abs() <= 1e-12);
        }
    }

    #[test]
    fn full_dimensional_charts_have_no_frame() {
        let star =
            CoordinateStar::new(vec![0.0, 0.0], vec![vec![0.5, 0.0], vec![0.0, 0.5]], 1.0)
                .unwrap();
        let chart = ChartMap::new(star);
        let tubular = build_tubular(&chart, None, None).unwrap();
        assert!(tubular.frame.is_empty());
        let x = vec![0.2, -0.1];
        assert_eq!(tubular.coordinates(&x), chart.phi(&x));
    }

    #[test]
    fn chebyshev_derivatives_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        for _ in 0..50 {
            let t = rng.gen::<f64>() * 2.0 - 1.0;
            let table = derivative_table(t, 4, 2);
            // T2'' = 4, T3'' = 24 t, T4'' = 96 t^2 - 16.
            assert_relative_eq!(table[2][2], 4.0, epsilon = 1e-12);
            assert_relative_eq!(table[2][3], 24.0 * t, epsilon = 1e-12);
            assert_relative_eq!(table[2][4], 96.0 * t * t - 16.0, epsilon = 1e-12);
            // First derivatives: T2' = 4t, T4' = 32 t^3 - 16 t.
            assert_relative_eq!(table[1][2], 4.0 * t, epsilon = 1e-12);
            assert_relative_eq!(table[1][4], 32.0 * t.powi(3) - 16.0 * t, epsilon = 1e-11);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let h = 1e-5;
        for _ in 0..30 {
            let t = rng.gen::<f64>() * 1.6 - 0.8;
            for k in 0..=8usize {
                let up = derivative_table(t + h, k, 1);
                let down = derivative_table(t - h, k, 1);
                let mid = derivative_table(t, k, 1);
                let fd = (up[0][k] - down[0][k]) / (2.0 * h);
                assert_relative_eq!(mid[1][k], fd, epsilon = 1e-5, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn one_point_constraint_picks_the_minimum_norm_affine_interpolant() {
        // Zero Laplacian energy leaves the affine family a + b t with
        // a + 0.3 b = 2; the smallest-coefficient solution is
        // 2 (1, 0.3) / 1.09.
        let config = MsnConfig { degree: Some(5), ..MsnConfig::default() };
        let fit = msn_fit(&[(vec![0.3], 2.0)], &config).unwrap();
        assert_relative_eq!(fit.coeffs[0], 200.0 / 109.0, epsilon = 1e-8);
        assert_relative_eq!(fit.coeffs[1], 60.0 / 109.0, epsilon = 1e-8);
        for &c in &fit.coeffs[2..] {
            assert!(c.abs() <= 1e-8, "stray coefficient {c}");
        }
        assert!(fit.constraint_residual <= 1e-10);
        assert!(fit.energy.abs() <= 1e-12);
        // A constraint at the origin leaves no slope incentive at all.
        let centered = msn_fit(&[(vec![0.0], 2.0)], &config).unwrap();
        assert_relative_eq!(centered.coeffs[0], 2.0, epsilon = 1e-8);
        for &c in &centered.coeffs[1..] {
            assert!(c.abs() <= 1e-8, "stray coefficient {c}");
        }
    }

    #[test]
    fn one_point_constraint_yields_the_constant_in_two_dimensions_at_low_degree() {
        let config = MsnConfig { degree: Some(3), ..MsnConfig::default() };
        let fit = msn_fit(&[(vec![0.0, 0.0], 1.0)], &config).unwrap();
        assert_relative_eq!(fit.coeffs[0], 1.0, epsilon = 1e-8);
        for &c in &fit.coeffs[1..] {
            assert!(c.abs() <= 1e-8, "stray coefficient {c}");
        }
    }

    #[test]
    fn two_constraints_recover_a_line() {
        let config = MsnConfig { degree: Some(5), ..MsnConfig::default() };
        let fit =
            msn_fit(&[(vec![-0.5], -0.5), (vec![0.5], 0.5)], &config).unwrap();
        // Zero Laplacian energy forces an affine function; the data pin t.
        for step in 0..=10 {
            let t = -0.9 + 0.18 * step as f64;
            assert_relative_eq!(fit.eval(&[t]).unwrap(), t, epsilon = 1e-7);
        }
    }

    #[test]
    fn identity_smoother_minimizes_the_weighted_coefficient_norm() {
        // min c0^2 + c1^2/2 + c2^2/2 subject to P(0) = c0 - c2 = 1
        // has the closed-form solution (1/3, 0, -2/3).
        let config = MsnConfig {
            smoother: Smoother::Identity,
            degree: Some(2),
            ..MsnConfig::default()
        };
        let fit = msn_fit(&[(vec![0.0], 1.0)], &config).unwrap();
        assert_relative_eq!(fit.coeffs[0], 1.0 / 3.0, epsilon = 1e-9);
        assert!(fit.coeffs[1].abs() <= 1e-9);
        assert_relative_eq!(fit.coeffs[2], -2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn bilaplacian_recovers_cubics_from_four_points() {
        let f = |t: f64| 0.5 * t.powi(3) - t + 0.25;
        let constraints: Vec<(Vec<f64>, f64)> =
            [-0.8, -0.2, 0.3, 0.7].iter().map(|&t| (vec![t], f(t))).collect();
        let config = MsnConfig {
            smoother: Smoother::Bilaplacian,
            degree: Some(6),
            ..MsnConfig::default()
        };
        let fit = msn_fit(&constraints, &config).unwrap();
        for step in 0..=20 {
            let t = -1.0 + 0.1 * step as f64;
            assert_relative_eq!(fit.eval(&[t]).unwrap(), f(t), epsilon = 1e-6);
        }
    }

    #[test]
    fn enough_constraints_recover_a_harmonic_polynomial() {
        // x^3 - 3 x y^2 is harmonic, so it has zero Laplacian energy; with
        // more constraints than the dimension of low-degree harmonics the
        // minimizer must coincide with it.
        let f = |x: f64, y: f64| x.powi(3) - 3.0 * x * y * y;
        let mut rng = ChaCha8Rng::seed_from_u64(94);
        let constraints: Vec<(Vec<f64>, f64)> = (0..20)
            .map(|_| {
                let x = rng.gen::<f64>() * 2.0 - 1.0;
                let y = rng.gen::<f64>() * 2.0 - 1.0;
                (vec![x, y], f(x, y))
            })
            .collect();
        let config = MsnConfig { degree: Some(6), ..MsnConfig::default() };
        let fit = msn_fit(&constraints, &config).unwrap();
        assert!(fit.constraint_residual <= 1e-8, "residual {}", fit.constraint_residual);
        for _ in 0..40 {
            let x = rng.gen::<f64>() * 2.0 - 1.0;
            let y = rng.gen::<f64>() * 2.0 - 1.0;
            assert_relative_eq!(fit.eval(&[x, y]).unwrap(), f(x, y), epsilon = 1e-6);
        }
    }

    #[test]
    fn stationarity_and_feasibility_hold_at_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(95);
        let constraints: Vec<(Vec<f64>, f64)> = (0..10)
            .map(|_| {
                (
                    vec![rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0],
                    rng.gen::<f64>() * 2.0 - 1.0,
                )
            })
            .collect();
        let config = MsnConfig { degree: Some(6), ..MsnConfig::default() };
        let fit = msn_fit(&constraints, &config).unwrap();
        assert!(fit.constraint_residual <= 1e-8);
        assert!(fit.kkt_residual <= 1e-6 * fit.energy.max(1.0), "kkt {}", fit.kkt_residual);
        assert!(!fit.least_squares);
    }

    #[test]
    fn feasible_perturbations_do_not_lower_the_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(96);
        let constraints: Vec<(Vec<f64>, f64)> = (0..8)
            .map(|_| {
                (
                    vec![rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0],
                    rng.gen::<f64>() * 2.0 - 1.0,
                )
            })
            .collect();
        let config = MsnConfig { degree: Some(4), ..MsnConfig::default() };
        let fit = msn_fit(&constraints, &config).unwrap();

        // Rebuild the machinery to probe the null space of the constraints.
        let basis = multi_indices(2, 4);
        let mut a = DMatrix::zeros(constraints.len(), basis.len());
        for (row, (p, _)) in constraints.iter().enumerate() {
            for (col, k) in basis.iter().enumerate() {
                a[(row, col)] = crate::chebyshev::cheb_value(k[0], p[0])
                    * crate::chebyshev::cheb_value(k[1], p[1]);
            }
        }
        let z = nullspace_basis(&a, 1e-12).unwrap();
        let q = energy_gram(2, 4, Smoother::Laplacian, None).unwrap();
        let c = DVector::from_iterator(fit.coeffs.len(), fit.coeffs.iter().copied());
        let optimal = (c.transpose() * &q * &c)[(0, 0)];
        for _ in 0..100 {
            let u = DVector::from_iterator(
                z.ncols(),
                (0..z.ncols()).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * 1e-3),
            );
            let probe = &c + &z * u;
            let energy = (probe.transpose() * &q * &probe)[(0, 0)];
            assert!(energy >= optimal - 1e-12, "{energy} < {optimal}");
        }
    }

    #[test]
    fn duplicate_constraints_are_deduplicated_and_conflicts_rejected() {
        let config = MsnConfig { degree: Some(3), ..MsnConfig::default() };
        let fit = msn_fit(
            &[(vec![0.2], 1.0), (vec![0.2], 1.0), (vec![-0.4], 0.5)],
            &config,
        )
        .unwrap();
        assert!(fit.constraint_residual <= 1e-9);

        let err = msn_fit(&[(vec![0.2], 1.0), (vec![0.2], 2.0)], &config).unwrap_err();
        assert!(matches!(err, AtlasError::Validation(_)));
    }

    #[test]
    fn surplus_constraints_switch_to_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let constraints: Vec<(Vec<f64>, f64)> = (0..12)
            .map(|_| (vec![rng.gen::<f64>() * 2.0 - 1.0], rng.gen::<f64>()))
            .collect();
        let config = MsnConfig { degree: Some(2), ..MsnConfig::default() };
        let fit = msn_fit(&constraints, &config).unwrap();
        assert!(fit.least_squares);
        assert!(fit.constraint_residual > 1e-6);
    }

    #[test]
    fn automatic_degree_covers_the_constraints_with_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(98);
        let constraints: Vec<(Vec<f64>, f64)> = (0..10)
            .map(|_| {
                (
                    vec![rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0],
                    rng.gen::<f64>(),
                )
            })
            .collect();
        let fit = msn_fit(&constraints, &MsnConfig::default()).unwrap();
        // (N+1)^2 >= 10 + 5 forces N = 3.
        assert_eq!(fit.degree, 3);
        assert!(!fit.least_squares);
    }

    fn helix_chart(center_s: f64, anchor_offset: f64, beta: f64) -> ChartMap {
        let helix = ManifoldKind::Helix { a: 0.8 };
        let star = CoordinateStar::new(
            helix.embed(&[center_s]).unwrap(),
            vec![helix.embed(&[center_s + anchor_offset]).unwrap()],
            beta,
        )
        .unwrap();
        ChartMap::new(star)
    }

    #[test]
    fn preimage_inverts_a_helix_chart() {
        // Distance coordinates fold at the anchor, so the invertible patch
        // sits on one side of it: a narrow scale keeps the whole band there.
        let helix = ManifoldKind::Helix { a: 0.8 };
        let chart = helix_chart(2.0, 0.4, 0.12);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let points: Vec<Vec<f64>> = (0..2000)
            .map(|_| helix.embed(&[1.85 + rng.gen::<f64>() * 0.4]).unwrap())
            .collect();
        let model = fit_preimage(&points, &chart, &ChebConfig::default()).unwrap();
        assert_eq!(model.models.len(), 3);
        for step in 0..=36 {
            let y = -0.9 + 1.8 * step as f64 / 36.0;
            let x = model.preimage(&[y]).unwrap();
            let back = chart.phi(&x);
            assert!(
                (back[0] - y).abs() <= 5e-2,
                "roundtrip at {y}: {}",
                back[0]
            );
        }
    }

    #[test]
    fn extension_interpolates_on_the_helix_and_degrades_gracefully_off_it() {
        let helix = ManifoldKind::Helix { a: 0.8 };
        let chart = helix_chart(1.0, 0.35, 0.9);
        let tubular = build_tubular(&chart, None, None).unwrap();
        assert_eq!(tubular.frame.len(), 2);
        let f = |s: f64| (2.0 * s).sin();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        // Stay on one side of the anchor at 1.35 so tube coordinates are
        // distinct across the samples.
        let params: Vec<f64> = (0..40).map(|_| 0.45 + rng.gen::<f64>() * 0.85).collect();
        let points: Vec<Vec<f64>> =
            params.iter().map(|&s| helix.embed(&[s]).unwrap()).collect();
        let values: Vec<f64> = params.iter().map(|&s| f(s)).collect();
        let model = fit_extension(&points, &values, &tubular, &MsnConfig::default()).unwrap();
        assert!(model.polynomial.constraint_residual <= 1e-6);

        // At the fitted on-manifold points the extension reproduces f.
        for (x, &want) in points.iter().zip(&values) {
            if tubular.in_tube(x) {
                let got = extend_evaluate(&model, x).unwrap();
                assert!((got - want).abs() <= 1e-5, "{got} vs {want}");
            }
        }
        // Off the manifold the extension varies continuously: the deviation
        // shrinks with the normal offset and vanishes in the limit.
        let base = helix.embed(&[1.1]).unwrap();
        let on_value = extend_evaluate(&model, &base).unwrap();
        let mut deviations = Vec::new();
        for &step in &[0.2, 0.05, 0.0125] {
            let mut off = base.clone();
            for (o, nu) in off.iter_mut().zip(&tubular.frame[0]) {
                *o += step * tubular.tube_radius * nu;
            }
            assert!(tubular.in_tube(&off));
            let off_value = extend_evaluate(&model, &off).unwrap();
            deviations.push((on_value - off_value).abs());
        }
        // Roughly linear decay in the offset.
        assert!(deviations[1] <= deviations[0] / 2.0, "{deviations:?}");
        assert!(deviations[2] <= deviations[1] / 2.0, "{deviations:?}");
        assert!(deviations[2] <= 0.25, "{deviations:?}");
    }

    #[test]
    fn leaving_the_tube_is_an_error() {
        let chart = plane_chart();
        let tubular = build_tubular(&chart, None, Some(0.1)).unwrap();
        let x = vec![0.0, 0.0, 0.5 + 1.0, -0.2];
        let err = extend_evaluate(
            &ExtensionModel {
                tubular: tubular.clone(),
                polynomial: msn_fit(
                    &[(vec![0.0, 0.0, 0.0, 0.0], 1.0)],
                    &MsnConfig { degree: Some(1), ..MsnConfig::default() },
                )
                .unwrap(),
            },
            &x,
        )
        .unwrap_err();
        match err {
            AtlasError::OutOfTube { norm } => assert!(norm > 1.0),
            other => panic!("expected out-of-tube, got {other:?}"),
        }
    }

    #[test]
    fn tubular_chart_serializes_and_round_trips() {
        let chart = plane_chart();
        let tubular = build_tubular(&chart, None, Some(0.7)).unwrap();
        let json = serde_json::to_string(&tubular).unwrap();
        let back: TubularChart = serde_json::from_str(&json).unwrap();
        let x = vec![0.1, -0.2, 0.55, -0.15];
        assert_eq!(back.coordinates(&x), tubular.coordinates(&x));
        assert_eq!(back.tube_radius, 0.7);
    }

    #[test]
    fn tube_dimension_is_validated_and_controls_the_frame() {
        let chart = plane_chart();
        assert_eq!(build_tubular(&chart, Some(2), None).unwrap().frame.len(), 0);
        assert_eq!(build_tubular(&chart, Some(3), None).unwrap().frame.len(), 1);
        assert_eq!(build_tubular(&chart, Some(4), None).unwrap().frame.len(), 2);
        for bad in [1, 5] {
            match build_tubular(&chart, Some(bad), None) {
                Err(AtlasError::Validation(_)) => {}
                other => panic!("expected a validation error, got {other:?}"),
            }
        }
    }

    #[test]
    fn tangential_tube_fits_match_the_unique_chart_interpolant() {
        // Six constraints, degree five: one polynomial fits them, so the
        // tube fit with no normal directions and the weighted projection on
        // chart coordinates must produce it both.
        let helix = ManifoldKind::Helix { a: 0.8 };
        let chart = helix_chart(2.0, 0.4, 0.12);
        let phi_at = |s: f64| chart.phi(&helix.embed(&[s]).unwrap())[0];
        // phi is strictly decreasing across the band, so bisection recovers
        // the parameter of any target coordinate.
        let param_at = |target: f64| {
            let (mut lo, mut hi) = (1.80_f64, 2.36_f64);
            assert!(phi_at(lo) > target && phi_at(hi) < target);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if phi_at(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let nodes: Vec<f64> = (0..6)
            .map(|i| ((2 * i + 1) as f64 * std::f64::consts::PI / 12.0).cos())
            .collect();
        let f = |s: f64| (2.0 * s).sin() + 0.3 * (5.0 * s).cos();
        let params: Vec<f64> = nodes.iter().map(|&t| param_at(t)).collect();
        let points: Vec<Vec<f64>> =
            params.iter().map(|&s| helix.embed(&[s]).unwrap()).collect();
        let values: Vec<f64> = params.iter().map(|&s| f(s)).collect();

        let tubular = build_tubular(&chart, Some(1), None).unwrap();
        assert!(tubular.frame.is_empty());
        let config = MsnConfig { degree: Some(5), ..MsnConfig::default() };
        let model = fit_extension(&points, &values, &tubular, &config).unwrap();
        assert!(!model.polynomial.least_squares);
        assert!(model.polynomial.constraint_residual <= 1e-9);

        let sites: Vec<Vec<f64>> = points.iter().map(|x| chart.phi(x)).collect();
        let weights = crate::quadrature::QuadratureWeights {
            basis: crate::quadrature::Basis::Chebyshev,
            degree: 11,
            support: (0..6).collect(),
            weights: vec![1.0 / 6.0; 6],
            residual: 0.0,
        };
        let coeffs = compute_coeffs(
            &sites,
            &values,
            &weights,
            6,
            crate::chebyshev::Filter::None,
        )
        .unwrap();
        let cheb = ChebModel {
            n: 6,
            dim: 1,
            filter: crate::chebyshev::Filter::None,
            coeffs,
            exactness: 11,
        };

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = 1.88 + rng.gen::<f64>() * 0.31;
            let x = helix.embed(&[s]).unwrap();
            let via_tube = extend_evaluate(&model, &x).unwrap();
            let via_chart = cheb.eval(&chart.phi(&x)).unwrap();
            assert!(
                (via_tube - via_chart).abs() <= 1e-8,
                "at s = {s}: {via_tube} vs {via_chart}"
            );
        }
    }

    #[test]
    fn atlas_preimages_give_one_model_per_chart() {
        use crate::chart::{build_atlas, ChartConfig};
        use crate::manifold::{sample_manifold, ManifoldSpec};

        let spec = ManifoldSpec {
            kind: ManifoldKind::Helix { a: 0.8 },
            count: 1500,
            seed: 4242,
            noise: 0.0,
        };
        let cloud = sample_manifold(&spec).unwrap();
        let atlas = build_atlas(&cloud, 1, &ChartConfig::default()).unwrap();
        let pre = fit_preimage_atlas(&atlas, &cloud, &ChebConfig::default()).unwrap();
        assert_eq!(pre.models.len(), atlas.charts().len());

        // The inverse collapses the fold each chart carries, so its error is
        // bounded by the chart's own extent rather than by a fixed scale.
        for (idx, model) in pre.models.iter().enumerate() {
            assert_eq!(model.dim, 1);
            assert_eq!(model.ambient_dim, 3);
            let assigned = atlas.chart_points(idx);
            let mut extent = 0.0_f64;
            for &i in &assigned {
                for &j in &assigned {
                    extent = extent
                        .max(crate::cloud::squared_distance(cloud.point(i), cloud.point(j)));
                }
            }
            let extent = extent.sqrt();
            let chart = &atlas.charts()[idx];
            for &i in &assigned {
                let x = cloud.point(i);
                let back = model.preimage(&chart.phi(x)).unwrap();
                let err = crate::cloud::squared_distance(&back, x).sqrt();
                assert!(
                    err <= 2.0 * extent + 1e-9,
                    "chart {idx}: error {err} for extent {extent}"
                );
            }
        }

        let json = serde_json::to_string(&pre).unwrap();
        let back: PreImageAtlas = serde_json::from_str(&json).unwrap();
        assert_eq!(back.models.len(), pre.models.len());
    }
}
