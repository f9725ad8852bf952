//! Exact compilation of approximants into layered squared-ReLU networks.
//!
//! The activation is `sigma(t) = max(t, 0)^2`. Two identities make exact
//! compilation possible: `t^2 = sigma(t) + sigma(-t)` turns squares into one
//! activation layer, and `x y = ((x+y)^2 - (x-y)^2) / 4` turns products into
//! squares. Polynomials are first rewritten as combinations of ridge powers
//! `(w . x + b)^N` with `N` a power of two, then each power is realized by
//! repeated squaring; nothing here is a numerical approximation beyond the
//! one linear solve that finds the ridge coefficients, whose residual is
//! recorded on the result.
//!
//! Networks serialize as a JSON list of layers, each either
//! `{"kind": "affine", "weights": [[...]], "biases": [...]}` (rows are
//! output units) or `{"kind": "requ"}`.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::bspline::SplineModel;
use crate::chart::ChartMap;
use crate::chebyshev::{cheb_monomial_coeffs, ChebModel};
use crate::error::{AtlasError, Result};
use crate::linalg::min_norm_solve;
use crate::quadrature::multi_indices;

/// The squared rectifier.
pub fn sigma(t: f64) -> f64 {
    if t > 0.0 {
        t * t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer {
    Affine {
        /// Row-major: `weights[i]` feeds output unit `i`.
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
    Requ,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayeredNetwork {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

impl LayeredNetwork {
    pub fn output_dim(&self) -> usize {
        for layer in self.layers.iter().rev() {
            if let Layer::Affine { weights, .. } = layer {
                return weights.len();
            }
        }
        self.input_dim
    }

    /// Number of activation layers.
    pub fn depth(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Requ)).count()
    }

    /// Total number of activation units.
    pub fn unit_count(&self) -> usize {
        let mut width = self.input_dim;
        let mut units = 0;
        for layer in &self.layers {
            match layer {
                Layer::Affine { weights, .. } => width = weights.len(),
                Layer::Requ => units += width,
            }
        }
        units
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(AtlasError::Validation(format!(
                "input has {} coordinates, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut state = x.to_vec();
        for (pos, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Requ => {
                    for v in &mut state {
                        *v = sigma(*v);
                    }
                }
                Layer::Affine { weights, biases } => {
                    if weights.len() != biases.len()
                        || weights.iter().any(|row| row.len() != state.len())
                    {
                        return Err(AtlasError::Validation(format!(
                            "affine layer {pos} does not accept width {}",
                            state.len()
                        )));
                    }
                    state = weights
                        .iter()
                        .zip(biases)
                        .map(|(row, b)| row.iter().zip(&state).map(|(w, s)| w * s).sum::<f64>() + b)
                        .collect();
                }
            }
        }
        Ok(state)
    }

    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        let out = self.eval(x)?;
        if out.len() != 1 {
            return Err(AtlasError::Validation(format!(
                "expected a scalar output, network produces {}",
                out.len()
            )));
        }
        Ok(out[0])
    }
}

fn identity_affine(n: usize) -> Layer {
    Layer::Affine {
        weights: (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
        biases: vec![0.0; n],
    }
}

/// Merge `second * (first) + bias` of two consecutive affine layers.
fn merge_affine(first: &Layer, second: &Layer) -> Layer {
    let (w1, b1) = match first {
        Layer::Affine { weights, biases } => (weights, biases),
        Layer::Requ => unreachable!("merge requires affine layers"),
    };
    let (w2, b2) = match second {
        Layer::Affine { weights, biases } => (weights, biases),
        Layer::Requ => unreachable!("merge requires affine layers"),
    };
    let weights = w2
        .iter()
        .map(|row| {
            (0..w1[0].len())
                .map(|j| row.iter().zip(w1.iter()).map(|(r, col)| r * col[j]).sum())
                .collect()
        })
        .collect();
    let biases = w2
        .iter()
        .zip(b2)
        .map(|(row, b)| row.iter().zip(b1).map(|(r, b1)| r * b1).sum::<f64>() + b)
        .collect();
    Layer::Affine { weights, biases }
}

/// Networks in this module keep the invariant affine, requ, affine, ...,
/// affine (strict alternation, affine at both ends).
fn chain(mut first: LayeredNetwork, second: &LayeredNetwork) -> LayeredNetwork {
    let mut tail = second.layers.clone();
    let boundary = merge_affine(first.layers.last().unwrap(), &tail[0]);
    first.layers.pop();
    tail[0] = boundary;
    first.layers.extend(tail);
    first
}

/// One exact squaring stage on every coordinate: `u -> u^2` via
/// `u^2 = sigma(u) + sigma(-u)`.
fn squaring_stage(width: usize) -> LayeredNetwork {
    let mut expand = Vec::with_capacity(2 * width);
    for i in 0..width {
        let mut plus = vec![0.0; width];
        plus[i] = 1.0;
        let mut minus = vec![0.0; width];
        minus[i] = -1.0;
        expand.push(plus);
        expand.push(minus);
    }
    let collect = (0..width)
        .map(|i| {
            let mut row = vec![0.0; 2 * width];
            row[2 * i] = 1.0;
            row[2 * i + 1] = 1.0;
            row
        })
        .collect();
    LayeredNetwork {
        input_dim: width,
        layers: vec![
            Layer::Affine { weights: expand, biases: vec![0.0; 2 * width] },
            Layer::Requ,
            Layer::Affine { weights: collect, biases: vec![0.0; width] },
        ],
    }
}

/// Exact `t -> t^p` for `p` a power of two, by repeated squaring.
pub fn compile_power(p: usize) -> Result<LayeredNetwork> {
    if p == 0 || !p.is_power_of_two() {
        return Err(AtlasError::Validation(format!(
            "power must be a positive power of two, got {p}"
        )));
    }
    let mut net = LayeredNetwork { input_dim: 1, layers: vec![identity_affine(1)] };
    let stages = p.trailing_zeros();
    for _ in 0..stages {
        net = chain(net, &squaring_stage(1));
    }
    Ok(net)
}

/// Exact two-input product `(x, y) -> x y` by polarization.
pub fn compile_product() -> LayeredNetwork {
    LayeredNetwork {
        input_dim: 2,
        layers: vec![
            Layer::Affine {
                weights: vec![
                    vec![1.0, 1.0],
                    vec![-1.0, -1.0],
                    vec![1.0, -1.0],
                    vec![-1.0, 1.0],
                ],
                biases: vec![0.0; 4],
            },
            Layer::Requ,
            Layer::Affine {
                weights: vec![vec![0.25, 0.25, -0.25, -0.25]],
                biases: vec![0.0],
            },
        ],
    }
}

/// Append one activation stage that multiplies chosen output pairs and
/// passes chosen outputs through unchanged (both exactly).
fn product_stage(
    net: LayeredNetwork,
    pairs: &[(usize, usize)],
    passthrough: &[usize],
) -> LayeredNetwork {
    let width = net.output_dim();
    let mut expand: Vec<Vec<f64>> = Vec::new();
    let mut biases: Vec<f64> = Vec::new();
    let mut collect: Vec<Vec<f64>> = Vec::new();
    let mut collect_biases: Vec<f64> = Vec::new();
    let unit_total = 4 * (pairs.len() + passthrough.len());
    for &(i, j) in pairs {
        let mut sum = vec![0.0; width];
        sum[i] += 1.0;
        sum[j] += 1.0;
        let neg_sum: Vec<f64> = sum.iter().map(|v| -v).collect();
        let mut diff = vec![0.0; width];
        diff[i] += 1.0;
        diff[j] -= 1.0;
        let neg_diff: Vec<f64> = diff.iter().map(|v| -v).collect();
        let base = expand.len();
        expand.extend([sum, neg_sum, diff, neg_diff]);
        biases.extend([0.0; 4]);
        let mut row = vec![0.0; unit_total];
        row[base] = 0.25;
        row[base + 1] = 0.25;
        row[base + 2] = -0.25;
        row[base + 3] = -0.25;
        collect.push(row);
        collect_biases.push(0.0);
    }
    for &p in passthrough {
        // u = (sigma(u+1) + sigma(-u-1) - sigma(u-1) - sigma(1-u)) / 4.
        let mut up = vec![0.0; width];
        up[p] = 1.0;
        let down: Vec<f64> = up.iter().map(|v| -v).collect();
        let base = expand.len();
        expand.extend([up.clone(), down.clone(), up, down]);
        biases.extend([1.0, -1.0, -1.0, 1.0]);
        let mut row = vec![0.0; unit_total];
        row[base] = 0.25;
        row[base + 1] = 0.25;
        row[base + 2] = -0.25;
        row[base + 3] = -0.25;
        collect.push(row);
        collect_biases.push(0.0);
    }
    let stage = LayeredNetwork {
        input_dim: width,
        layers: vec![
            Layer::Affine { weights: expand, biases },
            Layer::Requ,
            Layer::Affine { weights: collect, biases: collect_biases },
        ],
    };
    chain(net, &stage)
}

/// Stack same-depth networks over a shared input.
fn parallel(nets: &[LayeredNetwork]) -> LayeredNetwork {
    let input_dim = nets[0].input_dim;
    let depth = nets[0].depth();
    assert!(nets.iter().all(|n| n.input_dim == input_dim && n.depth() == depth));
    let segments = 2 * depth + 1;
    let mut layers = Vec::with_capacity(segments);
    for seg in 0..segments {
        if seg % 2 == 1 {
            layers.push(Layer::Requ);
            continue;
        }
        let parts: Vec<(&Vec<Vec<f64>>, &Vec<f64>)> = nets
            .iter()
            .map(|n| match &n.layers[seg] {
                Layer::Affine { weights, biases } => (weights, biases),
                Layer::Requ => unreachable!("alternation invariant"),
            })
            .collect();
        let in_widths: Vec<usize> = parts.iter().map(|(w, _)| w[0].len()).collect();
        let total_in: usize = if seg == 0 { input_dim } else { in_widths.iter().sum() };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut offset = 0;
        for (idx, (w, b)) in parts.iter().enumerate() {
            for row in w.iter() {
                let mut full = vec![0.0; total_in];
                if seg == 0 {
                    full.copy_from_slice(row);
                } else {
                    full[offset..offset + row.len()].copy_from_slice(row);
                }
                weights.push(full);
            }
            biases.extend(b.iter().copied());
            if seg != 0 {
                offset += in_widths[idx];
            }
        }
        layers.push(Layer::Affine { weights, biases });
    }
    LayeredNetwork { input_dim, layers }
}

/// Exponent vectors in `d` variables with total degree at most `n`,
/// lexicographic.
fn simplex_indices(d: usize, n: usize) -> Vec<Vec<usize>> {
    multi_indices(d, n)
        .into_iter()
        .filter(|k| k.iter().sum::<usize>() <= n)
        .collect()
}

/// One ridge power `coefficient * (weights . x + bias)^power`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeTerm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub coefficient: f64,
}

/// A polynomial rewritten as a combination of `(w . x + b)^power` with a
/// direction family that depends only on the dimension and the power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeDecomposition {
    pub dim: usize,
    /// Common power, a power of two at least the total degree.
    pub power: usize,
    pub terms: Vec<RidgeTerm>,
    /// Max mismatch against the input polynomial on a fixed random probe,
    /// relative to its scale.
    pub verification_residual: f64,
}

fn eval_terms(terms: &[(Vec<usize>, f64)], x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(gamma, a)| {
            a * gamma.iter().zip(x).map(|(&g, &xi)| xi.powi(g as i32)).product::<f64>()
        })
        .sum()
}

impl RidgeDecomposition {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let arg: f64 =
                    t.weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + t.bias;
                t.coefficient * arg.powi(self.power as i32)
            })
            .sum()
    }

    /// Realize the decomposition as a network: one affine layer of ridge
    /// arguments, `log2(power)` squaring stages, a combining row.
    pub fn to_network(&self) -> LayeredNetwork {
        let rows: Vec<Vec<f64>> = self.terms.iter().map(|t| t.weights.clone()).collect();
        let biases: Vec<f64> = self.terms.iter().map(|t| t.bias).collect();
        let width = self.terms.len();
        let mut net = LayeredNetwork {
            input_dim: self.dim,
            layers: vec![Layer::Affine { weights: rows, biases }],
        };
        for _ in 0..self.power.trailing_zeros() {
            net = chain(net, &squaring_stage(width));
        }
        let combine = LayeredNetwork {
            input_dim: width,
            layers: vec![Layer::Affine {
                weights: vec![self.terms.iter().map(|t| t.coefficient).collect()],
                biases: vec![0.0],
            }],
        };
        chain(net, &combine)
    }
}

const MAX_RIDGE_POWER: usize = 16;
const MAX_RIDGE_TERMS: usize = 20_000;

/// Rewrite a polynomial (sparse monomial form) as ridge powers.
///
/// Directions are the lattice vectors `v` of the simplex `|v|_1 = N` in
/// `d + 1` homogenizing variables, scaled to `(w, b) = v / N`; the
/// coefficients come from matching monomial coefficients, a square linear
/// system that is provably nonsingular. The verification residual is
/// checked on random points before returning.
pub fn decompose_poly(d: usize, terms: &[(Vec<usize>, f64)]) -> Result<RidgeDecomposition> {
    if d == 0 {
        return Err(AtlasError::Validation("polynomial dimension must be positive".into()));
    }
    if let Some((gamma, _)) = terms.iter().find(|(g, _)| g.len() != d) {
        return Err(AtlasError::Validation(format!(
            "exponent {gamma:?} does not have {d} entries"
        )));
    }
    let total_degree = terms
        .iter()
        .filter(|(_, a)| *a != 0.0)
        .map(|(g, _)| g.iter().sum::<usize>())
        .max()
        .unwrap_or(0);
    let power = total_degree.max(2).next_power_of_two();
    if power > MAX_RIDGE_POWER {
        return Err(AtlasError::Unsupported(format!(
            "total degree {total_degree} needs ridge power {power}, beyond the supported {MAX_RIDGE_POWER}"
        )));
    }
    let gammas = simplex_indices(d, power);
    if gammas.len() > MAX_RIDGE_TERMS {
        return Err(AtlasError::Unsupported(format!(
            "{} ridge directions exceed the supported {MAX_RIDGE_TERMS}",
            gammas.len()
        )));
    }
    let n = gammas.len();
    let nf = power as f64;
    let fact = |k: usize| -> f64 { (1..=k).map(|i| i as f64).product() };
    // Column v, row gamma: multinomial(N; gamma, N - |gamma|) (v/N)^(gamma, N-|gamma|).
    let mut a = DMatrix::zeros(n, n);
    for (col, v) in gammas.iter().enumerate() {
        let v_last = power - v.iter().sum::<usize>();
        for (row, gamma) in gammas.iter().enumerate() {
            let g_last = power - gamma.iter().sum::<usize>();
            let mut multinom = fact(power) / fact(g_last);
            for &gi in gamma {
                multinom /= fact(gi);
            }
            let mut value = multinom * (v_last as f64 / nf).powi(g_last as i32);
            for (&gi, &vi) in gamma.iter().zip(v) {
                value *= (vi as f64 / nf).powi(gi as i32);
            }
            a[(row, col)] = value;
        }
    }
    let mut rhs = DVector::zeros(n);
    for (gamma, coeff) in terms {
        let row = gammas
            .iter()
            .position(|g| g == gamma)
            .expect("total degree bound keeps exponents inside the simplex");
        rhs[row] += coeff;
    }
    let solution = min_norm_solve(&a, &rhs, 1e-13)?;
    let decomposition = RidgeDecomposition {
        dim: d,
        power,
        terms: gammas
            .iter()
            .zip(solution.x.iter())
            .map(|(v, &c)| RidgeTerm {
                weights: v.iter().map(|&vi| vi as f64 / nf).collect(),
                bias: (power - v.iter().sum::<usize>()) as f64 / nf,
                coefficient: c,
            })
            .collect(),
        verification_residual: 0.0,
    };
    // Probe against the input on a fixed pseudo-random set.
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e3779b9);
    let mut scale: f64 = 1.0;
    let mut worst: f64 = 0.0;
    for _ in 0..64 {
        let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let want = eval_terms(terms, &x);
        scale = scale.max(want.abs());
        worst = worst.max((decomposition.eval(&x) - want).abs());
    }
    let residual = worst / scale;
    if residual > 1e-7 {
        return Err(AtlasError::Numerical(format!(
            "ridge coefficients verify to {residual:.3e} only"
        )));
    }
    Ok(RidgeDecomposition { verification_residual: residual, ..decomposition })
}

/// Compile a polynomial directly to a network.
pub fn compile_polynomial(d: usize, terms: &[(Vec<usize>, f64)]) -> Result<LayeredNetwork> {
    Ok(decompose_poly(d, terms)?.to_network())
}

/// Monomial form of a Chebyshev model's polynomial.
pub fn monomial_terms(model: &ChebModel) -> Vec<(Vec<usize>, f64)> {
    let n = model.n;
    let d = model.dim;
    let tables: Vec<Vec<f64>> = (0..n).map(cheb_monomial_coeffs).collect();
    let indices = multi_indices(d, n - 1);
    let mut dense = vec![0.0; model.coeffs.len()];
    for (slot, k) in indices.iter().enumerate() {
        let c = model.coeffs[slot];
        if c == 0.0 {
            continue;
        }
        // Expand the tensor product of per-axis monomial expansions.
        let mut partial: Vec<(usize, f64)> = vec![(0, c)];
        for (axis, &ki) in k.iter().enumerate() {
            let stride = n.pow((d - 1 - axis) as u32);
            let mut next = Vec::with_capacity(partial.len() * (ki + 1));
            for &(flat, val) in &partial {
                for (p, &mono) in tables[ki].iter().enumerate() {
                    if mono != 0.0 {
                        next.push((flat + p * stride, val * mono));
                    }
                }
            }
            partial = next;
        }
        for (flat, val) in partial {
            dense[flat] += val;
        }
    }
    indices
        .into_iter()
        .zip(dense)
        .filter(|(_, c)| *c != 0.0)
        .collect()
}

/// Compile a Chebyshev model to a network.
pub fn compile_chebyshev(model: &ChebModel) -> Result<LayeredNetwork> {
    let terms = monomial_terms(model);
    compile_polynomial(model.dim, &terms)
}

/// Compile the cardinal bump `N_m` to an exact scalar network.
///
/// Truncated powers need an even exponent to be squares of the activation:
/// `(t)_+^(m-1) = sigma(t)^((m-1)/2)` requires `m - 1` to be a power of two,
/// so only orders 3, 5, and 9 compile.
pub fn compile_bspline(m: usize) -> Result<LayeredNetwork> {
    if m < 2 || !(m - 1).is_power_of_two() || m == 2 {
        return Err(AtlasError::Unsupported(format!(
            "order {m} does not compile exactly; the bump degree m - 1 must be a power of two (m = 3, 5, or 9)"
        )));
    }
    let knots = m + 1;
    // sigma(t - k) = (t - k)_+^2, then square up to the bump degree.
    let expand = Layer::Affine {
        weights: (0..knots).map(|_| vec![1.0]).collect(),
        biases: (0..knots).map(|k| -(k as f64)).collect(),
    };
    let mut net = LayeredNetwork { input_dim: 1, layers: vec![expand, Layer::Requ, identity_affine(knots)] };
    let extra_squarings = ((m - 1) / 2).trailing_zeros();
    for _ in 0..extra_squarings {
        net = chain(net, &squaring_stage(knots));
    }
    let mut factorial = 1.0;
    for i in 2..m {
        factorial *= i as f64;
    }
    let mut binom = 1.0;
    let mut row = Vec::with_capacity(knots);
    for k in 0..knots {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        row.push(sign * binom / factorial);
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    let combine = LayeredNetwork {
        input_dim: knots,
        layers: vec![Layer::Affine { weights: vec![row], biases: vec![0.0] }],
    };
    Ok(chain(net, &combine))
}

const MAX_SPLINE_UNITS: usize = 500_000;

/// Compile a fitted spline model to an exact network (orders 3, 5, 9).
pub fn compile_spline_model(model: &SplineModel) -> Result<LayeredNetwork> {
    let bump = compile_bspline(model.m)?;
    let d = model.dim;
    // Distinct per-axis shifts, each one bump subnet reading one coordinate.
    let mut axis_shifts: Vec<Vec<i64>> = vec![Vec::new(); d];
    for shift in &model.shifts {
        for (axis, &k) in shift.iter().enumerate() {
            if let Err(pos) = axis_shifts[axis].binary_search(&k) {
                axis_shifts[axis].insert(pos, k);
            }
        }
    }
    let bump_nets: Vec<LayeredNetwork> = (0..d)
        .flat_map(|axis| axis_shifts[axis].iter().map(move |&k| (axis, k)))
        .map(|(axis, k)| {
            let mut reader = vec![0.0; d];
            reader[axis] = 1.0 / model.h;
            let front = LayeredNetwork {
                input_dim: d,
                layers: vec![Layer::Affine {
                    weights: vec![reader],
                    biases: vec![model.m as f64 / 2.0 - k as f64],
                }],
            };
            chain(front, &bump)
        })
        .collect();
    let mut net = parallel(&bump_nets);

    // Positions of (axis, shift) bump outputs in the stacked vector.
    let mut offsets = vec![0usize; d];
    for axis in 1..d {
        offsets[axis] = offsets[axis - 1] + axis_shifts[axis - 1].len();
    }
    fn position(offsets: &[usize], axis_shifts: &[Vec<i64>], axis: usize, k: i64) -> usize {
        offsets[axis] + axis_shifts[axis].binary_search(&k).unwrap()
    }

    if d == 1 {
        let width = net.output_dim();
        let mut row = vec![0.0; width];
        for (shift, &g) in model.shifts.iter().zip(&model.coefficients) {
            row[position(&offsets, &axis_shifts, 0, shift[0])] += g;
        }
        let combine = LayeredNetwork {
            input_dim: width,
            layers: vec![Layer::Affine { weights: vec![row], biases: vec![0.0] }],
        };
        return Ok(chain(net, &combine));
    }

    // Fold axes pairwise: after fold j the leading outputs are the partial
    // products over axes 0..=j for every distinct prefix among the shifts.
    let mut prefixes: Vec<Vec<i64>> = model
        .shifts
        .iter()
        .map(|s| vec![s[0]])
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut partial_pos: Vec<usize> =
        prefixes.iter().map(|p| position(&offsets, &axis_shifts, 0, p[0])).collect();
    for axis in 1..d {
        let mut next_prefixes: Vec<Vec<i64>> = model
            .shifts
            .iter()
            .map(|s| s[..=axis].to_vec())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let pairs: Vec<(usize, usize)> = next_prefixes
            .iter()
            .map(|p| {
                let head = prefixes.binary_search(&p[..axis].to_vec()).unwrap();
                (partial_pos[head], position(&offsets, &axis_shifts, axis, p[axis]))
            })
            .collect();
        // Later folds still need the raw bumps of the remaining axes.
        let mut passthrough = Vec::new();
        for a in axis + 1..d {
            for &k in &axis_shifts[a] {
                passthrough.push(position(&offsets, &axis_shifts, a, k));
            }
        }
        if net.unit_count() + 4 * (pairs.len() + passthrough.len()) > MAX_SPLINE_UNITS {
            return Err(AtlasError::Unsupported(format!(
                "spline network exceeds {MAX_SPLINE_UNITS} units"
            )));
        }
        // After this stage the layout is: products first, passthroughs after.
        net = product_stage(net, &pairs, &passthrough);
        let mut new_offsets = vec![0usize; d];
        let mut cursor = pairs.len();
        for a in axis + 1..d {
            new_offsets[a] = cursor;
            cursor += axis_shifts[a].len();
        }
        offsets = new_offsets;
        partial_pos = (0..next_prefixes.len()).collect();
        prefixes = std::mem::take(&mut next_prefixes);
    }
    let width = net.output_dim();
    let mut row = vec![0.0; width];
    for (shift, &g) in model.shifts.iter().zip(&model.coefficients) {
        let pos = prefixes.binary_search(shift).unwrap();
        row[partial_pos[pos]] += g;
    }
    let combine = LayeredNetwork {
        input_dim: width,
        layers: vec![Layer::Affine { weights: vec![row], biases: vec![0.0] }],
    };
    Ok(chain(net, &combine))
}

/// Compile a chart map to a network with one activation layer.
///
/// Each squared distance splits as
/// `(x_i - c)^2 = sigma(x_i - c) + sigma(c - x_i)`, giving `2 d D` units,
/// and the output affine recentres and scales.
pub fn compile_chart(chart: &ChartMap) -> LayeredNetwork {
    let big_d = chart.ambient_dim();
    let d = chart.dim();
    let scale = (d as f64).sqrt() / chart.star().beta_star();
    let mut expand = Vec::with_capacity(2 * d * big_d);
    let mut biases = Vec::with_capacity(2 * d * big_d);
    for anchor in chart.star().anchors() {
        for (i, &c) in anchor.iter().enumerate() {
            let mut plus = vec![0.0; big_d];
            plus[i] = 1.0;
            let mut minus = vec![0.0; big_d];
            minus[i] = -1.0;
            expand.push(plus);
            expand.push(minus);
            biases.push(-c);
            biases.push(c);
        }
    }
    let combine = chart
        .psi0()
        .iter()
        .enumerate()
        .map(|(l, _)| {
            let mut row = vec![0.0; 2 * d * big_d];
            for u in 2 * l * big_d..2 * (l + 1) * big_d {
                row[u] = scale;
            }
            row
        })
        .collect();
    let combine_biases = chart.psi0().iter().map(|p0| -scale * p0).collect();
    LayeredNetwork {
        input_dim: big_d,
        layers: vec![
            Layer::Affine { weights: expand, biases },
            Layer::Requ,
            Layer::Affine { weights: combine, biases: combine_biases },
        ],
    }
}
