//! Filtered Chebyshev projections on `[-1,1]^d` from scattered samples.
//!
//! Coefficients of the degree-`n` tensor projection are integrals against
//! the Chebyshev measure; here they are computed with scattered-site
//! quadrature weights matching Chebyshev moments, then damped by a low-pass
//! filter that leaves every index below half the bandwidth untouched. The
//! result reproduces polynomials up to degree `floor(n/2)` whenever the
//! weights are exact far enough, and converges at the rate allowed by the
//! smoothness of the data.

use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::quadrature::{
    check_cube_points, exactness_degree_search, fill_distance, multi_indices,
    select_representatives, solve_moments, Basis, Metric, MomentSpec, QuadratureConfig,
    QuadratureWeights,
};

/// `T_m(t)` by the three-term recursion.
pub fn cheb_value(m: usize, t: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut curr = t;
    for _ in 1..m {
        let next = 2.0 * t * curr - prev;
        prev = curr;
        curr = next;
    }
    curr
}

/// Monomial coefficients of `T_m`, ascending (index = power).
///
/// Uses the coefficient recursion `T_{m+1} = 2 t T_m - T_{m-1}`; the entries
/// are integers, exact in floating point through the supported range.
pub fn cheb_monomial_coeffs(m: usize) -> Vec<f64> {
    assert!(m <= 40, "monomial expansion limited to degree 40");
    if m == 0 {
        return vec![1.0];
    }
    let mut prev = vec![1.0];
    let mut curr = vec![0.0, 1.0];
    for _ in 1..m {
        let mut next = vec![0.0; curr.len() + 1];
        for (p, &c) in curr.iter().enumerate() {
            next[p + 1] += 2.0 * c;
        }
        for (p, &c) in prev.iter().enumerate() {
            next[p] -= c;
        }
        prev = std::mem::take(&mut curr);
        curr = next;
    }
    curr
}

/// Low-pass coefficient filter: 1 below half the bandwidth, 0 at and past
/// the bandwidth, a fixed bridge in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filter {
    /// Bridge built from `psi(s) = exp(-1/s)`, infinitely smooth.
    SmoothExp,
    /// Raised-cosine bridge `cos^2(pi (u - 1/2))`.
    Cosine,
    /// No damping.
    None,
}

impl Filter {
    pub fn apply(&self, u: f64) -> f64 {
        match self {
            Filter::None => 1.0,
            _ if u <= 0.5 => 1.0,
            _ if u >= 1.0 => 0.0,
            Filter::Cosine => {
                let c = (std::f64::consts::PI * (u - 0.5)).cos();
                c * c
            }
            Filter::SmoothExp => {
                let psi = |s: f64| (-1.0 / s).exp();
                let up = psi(2.0 * (1.0 - u));
                let down = psi(2.0 * u - 1.0);
                up / (up + down)
            }
        }
    }
}

/// Filtered Chebyshev model: coefficients for all `|k|_inf <= n - 1`,
/// row-major (last index fastest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChebModel {
    pub n: usize,
    #[serde(rename = "d")]
    pub dim: usize,
    pub filter: Filter,
    pub coeffs: Vec<f64>,
    /// Moment-exactness degree of the quadrature behind the coefficients.
    pub exactness: usize,
}

impl ChebModel {
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(AtlasError::Validation(format!(
                "point has {} coordinates, model is {}-dimensional",
                y.len(),
                self.dim
            )));
        }
        Ok(clenshaw_tensor(&self.coeffs, self.n, y))
    }
}

/// Evaluate a row-major coefficient tensor (extent `n` per axis) by nested
/// Clenshaw recurrences, innermost axis first.
pub(crate) fn clenshaw_tensor(coeffs: &[f64], n: usize, y: &[f64]) -> f64 {
    let d = y.len();
    debug_assert_eq!(coeffs.len(), n.pow(d as u32));
    let mut current = coeffs.to_vec();
    for axis in (0..d).rev() {
        let blocks = current.len() / n;
        let mut reduced = Vec::with_capacity(blocks);
        for b in 0..blocks {
            reduced.push(clenshaw_1d(&current[b * n..(b + 1) * n], y[axis]));
        }
        current = reduced;
    }
    current[0]
}

fn clenshaw_1d(c: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b = ck + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b;
    }
    c[0] + t * b1 - b2
}

/// Coefficients of the filtered projection from weighted samples.
///
/// The weights must match Chebyshev moments at least to degree `n - 1`.
pub fn compute_coeffs(
    sites: &[Vec<f64>],
    values: &[f64],
    weights: &QuadratureWeights,
    n: usize,
    filter: Filter,
) -> Result<Vec<f64>> {
    let d = check_cube_points(sites)?;
    if values.len() != sites.len() {
        return Err(AtlasError::Validation(format!(
            "{} values for {} sites",
            values.len(),
            sites.len()
        )));
    }
    if n == 0 {
        return Err(AtlasError::Validation("bandwidth must be positive".into()));
    }
    if weights.degree + 1 < n {
        return Err(AtlasError::Validation(format!(
            "weights exact to degree {} cannot support bandwidth {n}",
            weights.degree
        )));
    }
    let indices = multi_indices(d, n - 1);
    let mut coeffs = vec![0.0; indices.len()];
    // Per-site Chebyshev values, one table per axis, degree < n.
    let tables: Vec<Vec<f64>> = weights
        .support
        .iter()
        .map(|&i| {
            let mut row = Vec::with_capacity(d * n);
            for axis in 0..d {
                let t = sites[i][axis];
                let mut prev = 1.0;
                let mut curr = t;
                for m in 0..n {
                    if m == 0 {
                        row.push(1.0);
                    } else if m == 1 {
                        row.push(t);
                    } else {
                        let next = 2.0 * t * curr - prev;
                        prev = curr;
                        curr = next;
                        row.push(curr);
                    }
                }
            }
            row
        })
        .collect();
    for (slot, k) in indices.iter().enumerate() {
        let normalizer: f64 = k.iter().map(|&ki| if ki >= 1 { 2.0 } else { 1.0 }).product();
        let mut integral = 0.0;
        for ((&i, &w), table) in weights.support.iter().zip(&weights.weights).zip(&tables) {
            let mut prod = 1.0;
            for (axis, &ki) in k.iter().enumerate() {
                prod *= table[axis * n + ki];
            }
            integral += w * values[i] * prod;
        }
        let u = k.iter().copied().max().unwrap_or(0) as f64 / n as f64;
        coeffs[slot] = normalizer * integral * filter.apply(u);
    }
    Ok(coeffs)
}

/// Fitting controls: a forced bandwidth, or automatic selection from the
/// sample density.
#[derive(Debug, Clone)]
pub struct ChebConfig {
    pub filter: Filter,
    /// Force the bandwidth instead of deriving it from the fill distance.
    pub bandwidth: Option<usize>,
    /// Cap on the automatically chosen bandwidth.
    pub max_bandwidth: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for ChebConfig {
    fn default() -> Self {
        ChebConfig {
            filter: Filter::SmoothExp,
            bandwidth: None,
            max_bandwidth: 16,
            quadrature: QuadratureConfig::default(),
        }
    }
}

/// Quadrature weights plus the bandwidth they can support.
///
/// Representatives are thinned at the scale of the arccos fill distance and
/// the exactness degree is searched downward; the supported bandwidth `n`
/// satisfies `2n - 1 <=` exactness (with `n = 1` always available).
pub fn auto_weights(
    sites: &[Vec<f64>],
    config: &ChebConfig,
) -> Result<(QuadratureWeights, usize)> {
    let d = check_cube_points(sites)?;
    if sites.len() == 1 {
        let spec = MomentSpec::chebyshev_delta(d, 0);
        let w = solve_moments(sites, &[0], &spec, &config.quadrature)?;
        return Ok((w, 1));
    }
    let fill = fill_distance(sites, Metric::Arccos)?;
    let side = (2.0 * fill).min(2.0);
    let reps = select_representatives(sites, side)?;
    let per_axis = (reps.len() as f64).powf(1.0 / d as f64).floor() as usize;
    let start = (2 * config.max_bandwidth.min(per_axis.max(1)) - 1).min(31);
    let exactness =
        exactness_degree_search(sites, &reps, Basis::Chebyshev, start, &config.quadrature)?;
    let n = (((exactness + 1) / 2).max(1)).min(config.max_bandwidth);
    let spec = MomentSpec::chebyshev_delta(d, exactness);
    let weights = solve_moments(sites, &reps, &spec, &config.quadrature)?;
    Ok((weights, n))
}

/// Fit a filtered Chebyshev model to scattered samples.
pub fn fit_cheb(sites: &[Vec<f64>], values: &[f64], config: &ChebConfig) -> Result<ChebModel> {
    let d = check_cube_points(sites)?;
    let (weights, auto_n) = auto_weights(sites, config)?;
    let n = match config.bandwidth {
        Some(forced) => {
            if forced == 0 {
                return Err(AtlasError::Validation("bandwidth must be positive".into()));
            }
            if weights.degree + 1 < forced {
                return Err(AtlasError::InsufficientData(format!(
                    "samples support moment degree {}, bandwidth {forced} needs {}",
                    weights.degree,
                    forced - 1
                )));
            }
            forced
        }
        None => auto_n,
    };
    let coeffs = compute_coeffs(sites, values, &weights, n, config.filter)?;
    Ok(ChebModel {
        n,
        dim: d,
        filter: config.filter,
        coeffs,
        exactness: weights.degree,
    })
}
