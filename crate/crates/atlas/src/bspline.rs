//! Cardinal B-spline quasi-interpolation from scattered samples.
//!
//! The order-`m` cardinal B-spline `N_m` (support `[0, m]`) is combined with
//! a small reproduction stencil so that the grid operator
//!
//! ```text
//! Q(f)(y) = sum_k  lambda(f at grid h(k + .)) * N_m(y/h + m/2 - k)
//! ```
//!
//! reproduces polynomials up to degree `m - 1`. Off-grid data is handled by
//! replacing the stencil at each shift with minimum-norm quadrature weights
//! on the samples falling in a window around that shift, matched to the
//! stencil's monomial moments. Wherever every contributing shift got usable
//! weights, polynomial reproduction survives, so interior accuracy is
//! `O(h^m)` for smooth data.

use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::quadrature::{
    check_cube_points, multi_indices, solve_moments, Basis, MomentSpec, QuadratureConfig,
};

/// `N_m(t)` via the alternating truncated-power sum, exactly zero off `[0, m]`.
pub fn eval_bspline(m: usize, t: f64) -> f64 {
    assert!(m >= 2, "spline order must be at least 2");
    if !(t > 0.0 && t < m as f64) {
        // Endpoint values vanish for m >= 2 by continuity.
        return 0.0;
    }
    let mut factorial = 1.0;
    for i in 2..m {
        factorial *= i as f64;
    }
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 0..=m {
        let base = t - k as f64;
        if base > 0.0 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom * base.powi(m as i32 - 1);
        }
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    sum / factorial
}

/// Point-evaluation stencil `lambda(f) = sum_j c_j f(j)`, `|j| <= (m-1)/2`,
/// chosen so the quasi-interpolant reproduces degree `m - 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaStencil {
    pub m: usize,
    /// Coefficient of offset `j` lives at position `j + half_width()`.
    pub coefficients: Vec<f64>,
}

impl LambdaStencil {
    pub fn half_width(&self) -> usize {
        (self.m - 1) / 2
    }

    /// `sum_j c_j (j * scale)^q`.
    pub fn moment(&self, q: usize, scale: f64) -> f64 {
        let half = self.half_width() as isize;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let j = idx as isize - half;
                c * (j as f64 * scale).powi(q as i32)
            })
            .sum()
    }
}

/// Solve for the reproduction stencil of order `m`.
///
/// The defining identities `Q(t^q) = t^q`, `q < m`, are imposed on a sample
/// of evaluation points in `[0, 1]` and solved in the least-squares sense;
/// anything but a negligible residual is reported as a numerical failure.
pub fn lambda_star(m: usize) -> Result<LambdaStencil> {
    if m < 2 {
        return Err(AtlasError::Validation(format!(
            "spline order must be at least 2, got {m}"
        )));
    }
    let half = (m - 1) / 2;
    let width = 2 * half + 1;
    let samples = 3 * m + 1;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for q in 0..m {
        for s in 0..samples {
            let y = s as f64 / (samples - 1) as f64;
            let mut row = vec![0.0; width];
            for k in shift_range(y, m) {
                let bump = eval_bspline(m, y + m as f64 / 2.0 - k as f64);
                if bump == 0.0 {
                    continue;
                }
                for (idx, slot) in row.iter_mut().enumerate() {
                    let j = idx as isize - half as isize;
                    *slot += bump * ((k + j) as f64).powi(q as i32);
                }
            }
            rows.push(row);
            rhs.push(y.powi(q as i32));
        }
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_vec(rhs);
    let solution = crate::linalg::min_norm_solve(&a, &b, 1e-12)?;
    if solution.max_residual > 1e-9 {
        return Err(AtlasError::Numerical(format!(
            "order-{m} reproduction stencil residual {:.3e}",
            solution.max_residual
        )));
    }
    Ok(LambdaStencil {
        m,
        coefficients: solution.x.iter().copied().collect(),
    })
}

/// Integer shifts whose bump is supported at `t` (in grid units).
fn shift_range(t: f64, m: usize) -> std::ops::RangeInclusive<isize> {
    let half = m as f64 / 2.0;
    let lo = (t - half).floor() as isize;
    let hi = (t + half).ceil() as isize;
    lo..=hi
}

/// Per-shift quadrature: indices into the fitting sites and their weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftWeights {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// A fitted spline quasi-interpolant on `[-1,1]^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineModel {
    pub m: usize,
    pub h: f64,
    pub dim: usize,
    /// Lexicographically sorted integer shifts `k`.
    pub shifts: Vec<Vec<i64>>,
    /// Coefficient of each shift's bump `N_m(y/h + m/2 - k)`.
    pub coefficients: Vec<f64>,
    /// The quadrature behind each coefficient, kept for refits and audits.
    pub shift_weights: Vec<ShiftWeights>,
}

impl SplineModel {
    /// Half-width of the boundary layer: full accuracy holds on
    /// `[-1 + m h, 1 - m h]^d`.
    pub fn interior_bound(&self) -> f64 {
        1.0 - self.m as f64 * self.h
    }

    fn shift_coefficient(&self, key: &[i64]) -> Option<f64> {
        self.shifts
            .binary_search_by(|probe| probe.as_slice().cmp(key))
            .ok()
            .map(|pos| self.coefficients[pos])
    }

    /// Evaluate at a point of the cube.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(AtlasError::Validation(format!(
                "point has {} coordinates, model is {}-dimensional",
                y.len(),
                self.dim
            )));
        }
        let half = self.m as f64 / 2.0;
        let t: Vec<f64> = y.iter().map(|&v| v / self.h).collect();
        let ranges: Vec<_> = t.iter().map(|&ti| shift_range(ti, self.m)).collect();
        let mut key = vec![0i64; self.dim];
        let mut cursor: Vec<isize> = ranges.iter().map(|r| *r.start()).collect();
        let mut total = 0.0;
        'outer: loop {
            let mut bump = 1.0;
            for axis in 0..self.dim {
                bump *= eval_bspline(self.m, t[axis] + half - cursor[axis] as f64);
                if bump == 0.0 {
                    break;
                }
            }
            if bump != 0.0 {
                for (slot, &c) in key.iter_mut().zip(&cursor) {
                    *slot = c as i64;
                }
                match self.shift_coefficient(&key) {
                    Some(g) => total += g * bump,
                    None => {
                        return Err(AtlasError::Coverage(format!(
                            "shift {key:?} contributes at {y:?} but is missing from the model"
                        )))
                    }
                }
            }
            for axis in (0..self.dim).rev() {
                if cursor[axis] < *ranges[axis].end() {
                    cursor[axis] += 1;
                    for r in axis + 1..self.dim {
                        cursor[r] = *ranges[r].start();
                    }
                    continue 'outer;
                }
            }
            return Ok(total);
        }
    }
}

/// Fit the order-`m`, spacing-`h` quasi-interpolant to scattered samples.
///
/// Every shift whose bump can touch the cube must find samples in its window
/// `|xi/h - k|_inf <= m/2 + 1` admitting moment-matched weights; otherwise
/// the fit fails with a coverage error naming the offending shifts.
pub fn fit_scattered(
    sites: &[Vec<f64>],
    values: &[f64],
    h: f64,
    m: usize,
    config: &QuadratureConfig,
) -> Result<SplineModel> {
    let d = check_cube_points(sites)?;
    if values.len() != sites.len() {
        return Err(AtlasError::Validation(format!(
            "{} values for {} sites",
            values.len(),
            sites.len()
        )));
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(AtlasError::Validation(format!(
            "grid spacing must lie in (0, 1], got {h}"
        )));
    }
    let stencil = lambda_star(m)?;
    let window = m as f64 / 2.0 + 1.0;
    // Per-axis moments of the stencil in window-local coordinates; the
    // d-dimensional targets are their products.
    let axis_moments: Vec<f64> = (0..m).map(|q| stencil.moment(q, 1.0 / window)).collect();
    let spec = MomentSpec {
        basis: Basis::Monomial,
        d,
        degree: m - 1,
        targets: multi_indices(d, m - 1)
            .iter()
            .map(|k| k.iter().map(|&ki| axis_moments[ki]).product())
            .collect(),
    };

    // Shifts whose bump meets the cube: k in (-1/h - m/2, 1/h + m/2).
    let reach = 1.0 / h + m as f64 / 2.0;
    let k_min = (-reach).floor() as i64 + 1;
    let k_max = reach.ceil() as i64 - 1;

    let scaled: Vec<Vec<f64>> = sites
        .iter()
        .map(|p| p.iter().map(|&x| x / h).collect())
        .collect();

    let mut shifts = Vec::new();
    let mut coefficients = Vec::new();
    let mut shift_weights = Vec::new();
    let mut failed: Vec<(Vec<i64>, &'static str)> = Vec::new();

    let mut k = vec![k_min; d];
    loop {
        let mut local = Vec::new();
        let mut owners = Vec::new();
        for (i, s) in scaled.iter().enumerate() {
            let inside = s
                .iter()
                .zip(&k)
                .all(|(&si, &ki)| (si - ki as f64).abs() <= window);
            if inside {
                local.push(
                    s.iter()
                        .zip(&k)
                        .map(|(&si, &ki)| ((si - ki as f64) / window).clamp(-1.0, 1.0))
                        .collect::<Vec<f64>>(),
                );
                owners.push(i);
            }
        }
        if local.is_empty() {
            failed.push((k.clone(), "no samples in window"));
        } else {
            let support: Vec<usize> = (0..local.len()).collect();
            match solve_moments(&local, &support, &spec, config) {
                Ok(w) => {
                    let coeff: f64 = w
                        .support
                        .iter()
                        .zip(&w.weights)
                        .map(|(&j, wi)| wi * values[owners[j]])
                        .sum();
                    shifts.push(k.clone());
                    coefficients.push(coeff);
                    shift_weights.push(ShiftWeights {
                        indices: w.support.iter().map(|&j| owners[j]).collect(),
                        weights: w.weights.clone(),
                    });
                }
                Err(AtlasError::InfeasibleMoments { .. }) => {
                    failed.push((k.clone(), "moment system infeasible"));
                }
                Err(e) => return Err(e),
            }
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                if !failed.is_empty() {
                    let head: Vec<String> = failed
                        .iter()
                        .take(8)
                        .map(|(k, why)| format!("{k:?} ({why})"))
                        .collect();
                    return Err(AtlasError::Coverage(format!(
                        "{} of {} spline shifts unusable at h = {h}, m = {m}: {}",
                        failed.len(),
                        (k_max - k_min + 1).pow(d as u32),
                        head.join(", ")
                    )));
                }
                return Ok(SplineModel {
                    m,
                    h,
                    dim: d,
                    shifts,
                    coefficients,
                    shift_weights,
                });
            }
            axis -= 1;
            if k[axis] < k_max {
                k[axis] += 1;
                for v in &mut k[axis + 1..] {
                    *v = k_min;
                }
                break;
            }
        }
    }
}
