//! End-to-end acceptance checks, one printed pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the table;
//! each criterion that carries a wall-clock budget fails if it blows it.

use atlas::bspline::{eval_bspline, fit_scattered, lambda_star};
use atlas::chart::{ChartMap, CoordinateStar};
use atlas::chebyshev::{
    cheb_monomial_coeffs, cheb_value, compute_coeffs, ChebConfig, ChebModel, Filter,
};
use atlas::cloud;
use atlas::extension::{energy_gram, fit_preimage, msn_fit, MsnConfig, Smoother};
use atlas::manifold::ManifoldKind;
use atlas::network::{compile_bspline, compile_chart, compile_chebyshev, compile_power};
use atlas::quadrature::{
    basis_value, multi_indices, solve_moments, Basis, MomentSpec, QuadratureConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

type CheckResult = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>() * 2.0 - 1.0
}

fn cube_sites(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| unit(rng)).collect()).collect()
}

/// Helix chart whose anchor sits outside the covered band, so the
/// coordinate is injective there and the band pulls back onto [-1, 1].
fn helix_band_chart() -> (ManifoldKind, ChartMap) {
    let helix = ManifoldKind::Helix { a: 0.8 };
    let star = CoordinateStar::new(
        helix.embed(&[2.0]).unwrap(),
        vec![helix.embed(&[2.4]).unwrap()],
        0.12,
    )
    .unwrap();
    (helix, ChartMap::new(star))
}

fn in_chart_points(
    manifold: &ManifoldKind,
    chart: &ChartMap,
    count: usize,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let s = lo + rng.gen::<f64>() * (hi - lo);
        let x = manifold.embed(&[s]).unwrap();
        if chart.in_chart(&x) {
            points.push(x);
        }
    }
    points
}

fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

// 1. Squared-distance coordinates on the helix keep secant ratios of the
//    parameter inside fixed two-sided bounds for every legal star layout.
fn chart_secant_ratios() -> CheckResult {
    let s0 = 1.0;
    for &a in &[0.5, 0.8, 0.9] {
        let helix = ManifoldKind::Helix { a };
        let mut rng = seeded(101);
        for trial in 0..10_000 {
            let delta = PI / 4.0 + rng.gen::<f64>() * PI / 8.0;
            let anchor = helix.embed(&[s0 + delta]).unwrap();
            let draw = |rng: &mut ChaCha8Rng| s0 + (rng.gen::<f64>() - 0.5) * PI / 4.0;
            let t1 = draw(&mut rng);
            let mut t2 = draw(&mut rng);
            while (t1 - t2).abs() < 1e-6 {
                t2 = draw(&mut rng);
            }
            let psi = |t: f64| {
                let r = cloud::distance(&helix.embed(&[t]).unwrap(), &anchor);
                r * r
            };
            let ratio = (psi(t1) - psi(t2)).abs() / (t1 - t2).abs();
            ensure!(
                (0.5..=PI).contains(&ratio),
                "a={a}, trial {trial}: secant ratio {ratio:.6} left [0.5, pi]"
            );
        }
    }
    Ok(())
}

// 2. Moment systems on random 200-point clouds solve to tiny residuals and
//    the weights integrate random polynomials exactly.
fn quadrature_exactness() -> CheckResult {
    let config = QuadratureConfig::default();
    for d in [1usize, 2] {
        let mut rng = seeded(200 + d as u64);
        let sites = cube_sites(d, 200, &mut rng);
        let support: Vec<usize> = (0..sites.len()).collect();
        for basis in [Basis::Monomial, Basis::Chebyshev] {
            let mut hardest = None;
            for degree in [2usize, 4, 6] {
                let spec = match basis {
                    Basis::Monomial => MomentSpec::monomial_uniform(d, degree),
                    Basis::Chebyshev => MomentSpec::chebyshev_delta(d, degree),
                };
                let w = solve_moments(&sites, &support, &spec, &config)
                    .map_err(|e| format!("d={d} {basis:?} degree {degree}: {e}"))?;
                ensure!(
                    w.residual <= 1e-10,
                    "d={d} {basis:?} degree {degree}: residual {:.3e}",
                    w.residual
                );
                hardest = Some((spec, w));
            }
            let (spec, w) = hardest.unwrap();
            let indices = multi_indices(d, spec.degree);
            for poly in 0..100 {
                let coeffs: Vec<f64> = (0..indices.len()).map(|_| unit(&mut rng)).collect();
                let values: Vec<f64> = sites
                    .iter()
                    .map(|y| {
                        indices
                            .iter()
                            .zip(&coeffs)
                            .map(|(k, c)| c * basis_value(basis, k, y))
                            .sum()
                    })
                    .collect();
                let quad = w.apply(&values);
                let exact: f64 = coeffs.iter().zip(&spec.targets).map(|(c, t)| c * t).sum();
                ensure!(
                    (quad - exact).abs() <= 1e-8,
                    "d={d} {basis:?} polynomial {poly}: {quad:.6e} vs integral {exact:.6e}"
                );
            }
        }
    }
    Ok(())
}

// 3. Scattered spline fits on a helix pullback converge at the order of the
//    stencil as the grid refines.
fn spline_convergence_order() -> CheckResult {
    let (helix, chart) = helix_band_chart();
    let points = in_chart_points(&helix, &chart, 4000, 1.86, 2.21, 303);
    let sites: Vec<Vec<f64>> = points.iter().map(|x| chart.phi(x)).collect();
    let target = |u: f64| (0.8 * (2.2 * u).sin()).exp();
    let values: Vec<f64> = sites.iter().map(|y| target(y[0])).collect();
    let config = QuadratureConfig::default();
    for (m, wanted) in [(2usize, 1.7), (4usize, 3.5)] {
        let spacings = [0.125, 0.0625, 0.03125, 0.015625];
        let mut models = Vec::new();
        let mut bound: f64 = 1.0;
        for &h in &spacings {
            let model = fit_scattered(&sites, &values, h, m, &config)
                .map_err(|e| format!("m={m} h={h}: {e}"))?;
            bound = bound.min(model.interior_bound());
            models.push((h, model));
        }
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for (h, model) in &models {
            let mut err: f64 = 0.0;
            for step in 0..=400 {
                let u = -bound + 2.0 * bound * step as f64 / 400.0;
                let got = model.eval(&[u]).map_err(|e| format!("m={m}: {e}"))?;
                err = err.max((got - target(u)).abs());
            }
            lx.push(h.ln());
            ly.push(err.ln());
        }
        let slope = fitted_slope(&lx, &ly);
        ensure!(slope >= wanted, "order-{m} slope {slope:.3} below {wanted}");
    }
    Ok(())
}

// 4. Filtered projections leave polynomials below half the bandwidth intact
//    and at least halve the uniform error for exp on each bandwidth doubling.
fn chebyshev_reproduction_and_decay() -> CheckResult {
    let config = QuadratureConfig::default();
    for (d, n, count) in [(1usize, 16usize, 200usize), (2, 8, 400)] {
        let mut rng = seeded(400 + d as u64);
        let sites = cube_sites(d, count, &mut rng);
        let support: Vec<usize> = (0..sites.len()).collect();
        let wdeg = (n - 1) + n / 2;
        let spec = MomentSpec::chebyshev_delta(d, wdeg);
        let w = solve_moments(&sites, &support, &spec, &config)
            .map_err(|e| format!("d={d}: {e}"))?;
        ensure!(w.residual <= 1e-10, "d={d}: weight residual {:.3e}", w.residual);
        let low = multi_indices(d, n / 2);
        for poly in 0..20 {
            let pcoef: Vec<f64> = (0..low.len()).map(|_| unit(&mut rng)).collect();
            let p = |y: &[f64]| -> f64 {
                low.iter()
                    .zip(&pcoef)
                    .map(|(k, c)| c * basis_value(Basis::Chebyshev, k, y))
                    .sum()
            };
            let values: Vec<f64> = sites.iter().map(|y| p(y)).collect();
            let coeffs = compute_coeffs(&sites, &values, &w, n, Filter::SmoothExp)
                .map_err(|e| format!("d={d}: {e}"))?;
            let model = ChebModel { n, dim: d, filter: Filter::SmoothExp, coeffs, exactness: wdeg };
            for _ in 0..50 {
                let y: Vec<f64> = (0..d).map(|_| unit(&mut rng)).collect();
                let got = model.eval(&y).unwrap();
                ensure!(
                    (got - p(&y)).abs() <= 1e-8,
                    "d={d} polynomial {poly}: reproduction error {:.3e}",
                    (got - p(&y)).abs()
                );
            }
        }
    }

    let (helix, chart) = helix_band_chart();
    let points = in_chart_points(&helix, &chart, 2000, 1.86, 2.21, 404);
    let sites: Vec<Vec<f64>> = points.iter().map(|x| chart.phi(x)).collect();
    let values: Vec<f64> = sites.iter().map(|y| y[0].exp()).collect();
    let support: Vec<usize> = (0..sites.len()).collect();
    let mut errors = Vec::new();
    for n in [4usize, 8, 16, 32] {
        let spec = MomentSpec::chebyshev_delta(1, 2 * n);
        let w = solve_moments(&sites, &support, &spec, &config)
            .map_err(|e| format!("n={n}: {e}"))?;
        let coeffs = compute_coeffs(&sites, &values, &w, n, Filter::SmoothExp)
            .map_err(|e| format!("n={n}: {e}"))?;
        let model = ChebModel { n, dim: 1, filter: Filter::SmoothExp, coeffs, exactness: 2 * n };
        let mut err: f64 = 0.0;
        for step in 0..=400 {
            let u = -0.97 + 1.94 * step as f64 / 400.0;
            err = err.max((model.eval(&[u]).unwrap() - u.exp()).abs());
        }
        errors.push((n, err));
    }
    for pair in errors.windows(2) {
        let (n0, e0) = pair[0];
        let (n1, e1) = pair[1];
        if e0 > 1e-12 {
            ensure!(
                e1 <= 0.5 * e0,
                "bandwidth {n0} -> {n1}: error {e0:.3e} -> {e1:.3e} missed the halving"
            );
        }
    }
    Ok(())
}

// 5. Compiled networks reproduce their sources: random Chebyshev models,
//    raw powers, the cardinal B-spline, and a chart's coordinate map.
fn network_equivalence() -> CheckResult {
    let mut rng = seeded(500);
    for case in 0..50usize {
        let d = 1 + case % 2;
        let n = 1 + case % 4;
        let coeffs: Vec<f64> = (0..n.pow(d as u32)).map(|_| unit(&mut rng)).collect();
        let model = ChebModel { n, dim: d, filter: Filter::None, coeffs, exactness: 0 };
        let net = compile_chebyshev(&model).map_err(|e| format!("case {case}: {e}"))?;
        for _ in 0..40 {
            let x: Vec<f64> = (0..d).map(|_| unit(&mut rng)).collect();
            let direct = model.eval(&x).unwrap();
            let via = net.eval_scalar(&x).map_err(|e| format!("case {case}: {e}"))?;
            ensure!(
                (via - direct).abs() <= 1e-6 * (1.0 + direct.abs()),
                "case {case}: network {via:.9e} vs direct {direct:.9e}"
            );
        }
    }
    for p in [1usize, 2, 4, 8, 16] {
        let net = compile_power(p).map_err(|e| format!("power {p}: {e}"))?;
        for step in 0..=200 {
            let t = -1.5 + 3.0 * step as f64 / 200.0;
            let via = net.eval_scalar(&[t]).unwrap();
            let direct = t.powi(p as i32);
            ensure!(
                (via - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                "power {p} at {t:.3}: {via:.12e} vs {direct:.12e}"
            );
        }
    }
    let net = compile_bspline(3).map_err(|e| e.to_string())?;
    for step in 0..500 {
        let t = -0.5 + 4.0 * step as f64 / 499.0;
        let via = net.eval_scalar(&[t]).unwrap();
        let direct = eval_bspline(3, t);
        ensure!(
            (via - direct).abs() <= 1e-8,
            "bump at {t:.4}: {via:.10e} vs {direct:.10e}"
        );
    }
    let (helix, chart) = helix_band_chart();
    let net = compile_chart(&chart);
    for probe in 0..200 {
        let s = 1.7 + 0.8 * probe as f64 / 199.0;
        let mut x = helix.embed(&[s]).unwrap();
        for c in x.iter_mut() {
            *c += 0.05 * unit(&mut rng);
        }
        let via = net.eval(&x).map_err(|e| e.to_string())?;
        let direct = chart.phi(&x);
        for (a, b) in via.iter().zip(&direct) {
            ensure!(
                (a - b).abs() <= 1e-9,
                "chart network at s={s:.3}: {a:.12e} vs {b:.12e}"
            );
        }
    }
    Ok(())
}

// 6. The three Chebyshev evaluation routes agree: recurrence, monomial
//    expansion, and Clenshaw on coefficient tensors.
fn chebyshev_consistency() -> CheckResult {
    for m in 0..=6usize {
        let mono = cheb_monomial_coeffs(m);
        for step in 0..=200 {
            let t = -1.0 + step as f64 / 100.0;
            let direct = cheb_value(m, t);
            let expanded = mono.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            ensure!(
                (direct - expanded).abs() <= 1e-10,
                "degree {m} at {t:.3}: recurrence {direct:.12e} vs expansion {expanded:.12e}"
            );
        }
    }
    let mut rng = seeded(600);
    let n = 6usize;
    let indices = multi_indices(2, n - 1);
    for tensor in 0..5 {
        let coeffs: Vec<f64> = (0..indices.len()).map(|_| unit(&mut rng)).collect();
        let model =
            ChebModel { n, dim: 2, filter: Filter::None, coeffs: coeffs.clone(), exactness: 0 };
        for _ in 0..100 {
            let y = [unit(&mut rng), unit(&mut rng)];
            let direct: f64 = indices
                .iter()
                .zip(&coeffs)
                .map(|(k, c)| c * cheb_value(k[0], y[0]) * cheb_value(k[1], y[1]))
                .sum();
            let clenshaw = model.eval(&y).unwrap();
            ensure!(
                (clenshaw - direct).abs() <= 1e-11,
                "tensor {tensor}: clenshaw {clenshaw:.13e} vs direct {direct:.13e}"
            );
        }
    }
    Ok(())
}

// 7. B-spline identities: partition of unity, exact support, and stencil
//    reproduction of low-degree monomials on exact grid data.
fn bspline_identities() -> CheckResult {
    let mut rng = seeded(700);
    for m in [2usize, 3, 4] {
        for _ in 0..1000 {
            let x = rng.gen::<f64>() * 20.0 - 10.0;
            let base = x.floor() as isize;
            let mut total = 0.0;
            for j in (base - m as isize - 1)..=(base + 1) {
                total += eval_bspline(m, x - j as f64);
            }
            ensure!(
                (total - 1.0).abs() <= 1e-10,
                "m={m} at {x:.4}: shifted bumps sum to {total:.12}"
            );
        }
        ensure!(
            eval_bspline(m, 0.0) == 0.0 && eval_bspline(m, m as f64) == 0.0,
            "m={m}: support endpoints are not exactly zero"
        );
        ensure!(
            eval_bspline(m, -0.25) == 0.0 && eval_bspline(m, m as f64 + 0.25) == 0.0,
            "m={m}: support leaks outside (0, m)"
        );
        for step in 1..40 {
            let t = m as f64 * step as f64 / 40.0;
            ensure!(eval_bspline(m, t) > 0.0, "m={m}: vanishes inside its support at {t:.3}");
        }

        let stencil = lambda_star(m).map_err(|e| e.to_string())?;
        let half = stencil.half_width() as isize;
        for q in 0..m {
            let f = |t: f64| t.powi(q as i32);
            for step in 0..=40 {
                let y = -2.0 + 4.0 * step as f64 / 40.0;
                let shifted = y + m as f64 / 2.0;
                let mut total = 0.0;
                for k in (shifted.floor() as isize - m as isize)..=(shifted.ceil() as isize + 1) {
                    let bump = eval_bspline(m, shifted - k as f64);
                    if bump == 0.0 {
                        continue;
                    }
                    let gamma: f64 = stencil
                        .coefficients
                        .iter()
                        .enumerate()
                        .map(|(idx, &c)| c * f((k + idx as isize - half) as f64))
                        .sum();
                    total += gamma * bump;
                }
                ensure!(
                    (total - f(y)).abs() <= 1e-9 * (1.0 + f(y).abs()),
                    "m={m} q={q} at {y:.3}: {total:.12e} vs {:.12e}",
                    f(y)
                );
            }
        }
    }
    Ok(())
}

// 8. Minimum-energy extension fits: constraints hold, the optimality system
//    is stationary, feasible perturbations never lower the energy, and
//    zero-energy targets (constant, linear) are recovered exactly.
fn msn_optimality() -> CheckResult {
    let mut rng = seeded(800);
    let config = MsnConfig { degree: Some(6), ..MsnConfig::default() };
    let sites = cube_sites(2, 18, &mut rng);
    let constraints: Vec<(Vec<f64>, f64)> =
        sites.iter().map(|y| (y.clone(), unit(&mut rng))).collect();
    let fit = msn_fit(&constraints, &config).map_err(|e| e.to_string())?;
    ensure!(!fit.least_squares, "generic fit fell back to least squares");
    ensure!(fit.constraint_residual <= 1e-8, "constraint residual {:.3e}", fit.constraint_residual);
    ensure!(fit.kkt_residual <= 1e-6, "stationarity defect {:.3e}", fit.kkt_residual);

    let basis = multi_indices(2, 6);
    let mut a = DMatrix::zeros(constraints.len(), basis.len());
    for (i, (y, _)) in constraints.iter().enumerate() {
        for (j, k) in basis.iter().enumerate() {
            a[(i, j)] = basis_value(Basis::Chebyshev, k, y);
        }
    }
    let gram = energy_gram(2, 6, Smoother::Laplacian, None).map_err(|e| e.to_string())?;
    let c = DVector::from_column_slice(&fit.coeffs);
    let base = (c.transpose() * &gram * &c)[(0, 0)];
    ensure!(
        (base - fit.energy).abs() <= 1e-9 * (1.0 + base.abs()),
        "energy bookkeeping drifted: {base:.9e} vs {:.9e}",
        fit.energy
    );
    let svd = a.clone().svd(true, true);
    let step = 1e-3;
    let slack = 4.0 * step * fit.kkt_residual + 1e-12 * (1.0 + base.abs());
    let mut probes = 0;
    while probes < 100 {
        let v = DVector::from_fn(basis.len(), |_, _| unit(&mut rng));
        let x = svd.solve(&(&a * &v), 1e-10).map_err(|e| e.to_string())?;
        let mut dir = v - x;
        let norm = dir.norm();
        if norm < 1e-9 {
            continue;
        }
        dir /= norm;
        ensure!((&a * &dir).norm() <= 1e-8, "perturbation direction left the feasible set");
        let shifted = &c + step * &dir;
        let energy = (shifted.transpose() * &gram * &shifted)[(0, 0)];
        ensure!(
            energy >= base - slack,
            "probe {probes}: feasible step lowered the energy {base:.9e} -> {energy:.9e}"
        );
        probes += 1;
    }

    let targets: [(&str, Box<dyn Fn(&[f64]) -> f64>); 2] = [
        ("constant", Box::new(|_| 0.7)),
        ("linear", Box::new(|y| 0.3 * y[0] - 0.8 * y[1] + 0.1)),
    ];
    for (label, g) in targets {
        let mut rng = seeded(801);
        let pts = cube_sites(2, 20, &mut rng);
        let constraints: Vec<(Vec<f64>, f64)> = pts.iter().map(|y| (y.clone(), g(y))).collect();
        let fit = msn_fit(&constraints, &config).map_err(|e| format!("{label}: {e}"))?;
        for _ in 0..50 {
            let y = [unit(&mut rng), unit(&mut rng)];
            let got = fit.eval(&y).unwrap();
            ensure!(
                (got - g(&y)).abs() <= 1e-8,
                "{label} recovery off by {:.3e}",
                (got - g(&y)).abs()
            );
        }
    }
    Ok(())
}

// 9. Fitted inverses of injective charts round-trip random cube
//    coordinates on noiseless helix and circle clouds.
fn preimage_roundtrip() -> CheckResult {
    let cases: [(&str, ManifoldKind, f64, f64, f64, f64); 2] = [
        ("helix", ManifoldKind::Helix { a: 0.8 }, 2.0, 2.4, 1.85, 2.25),
        ("circle", ManifoldKind::Circle { radius: 1.0, dim: 2 }, 1.0, 1.4, 0.84, 1.21),
    ];
    for (label, manifold, center, anchor, lo, hi) in cases {
        let star = CoordinateStar::new(
            manifold.embed(&[center]).unwrap(),
            vec![manifold.embed(&[anchor]).unwrap()],
            0.12,
        )
        .map_err(|e| format!("{label}: {e}"))?;
        let chart = ChartMap::new(star);
        let mut rng = seeded(900);
        let points: Vec<Vec<f64>> = (0..2500)
            .map(|_| {
                let s = lo + rng.gen::<f64>() * (hi - lo);
                manifold.embed(&[s]).unwrap()
            })
            .collect();
        let model = fit_preimage(&points, &chart, &ChebConfig::default())
            .map_err(|e| format!("{label}: {e}"))?;
        ensure!(
            model.ambient_dim == manifold.ambient_dim(),
            "{label}: inverse has {} components",
            model.ambient_dim
        );
        for probe in 0..100 {
            let y = unit(&mut rng);
            let x = model.preimage(&[y]).map_err(|e| format!("{label}: {e}"))?;
            let back = chart.phi(&x)[0];
            ensure!(
                (back - y).abs() <= 5e-2,
                "{label} probe {probe}: y={y:.4} came back as {back:.4}"
            );
        }
    }
    Ok(())
}

// 10. The convergence verb is deterministic: identical configuration and
//     seed give byte-identical tables.
fn converge_determinism() -> CheckResult {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_atlas"))
            .args([
                "converge",
                "--manifold",
                "helix",
                "--sizes",
                "300,600",
                "--seed",
                "3",
                "--test-n",
                "60",
            ])
            .output()
            .map_err(|e| e.to_string())
    };
    let first = run()?;
    let second = run()?;
    ensure!(
        first.status.success(),
        "first run failed: {}",
        String::from_utf8_lossy(&first.stderr)
    );
    ensure!(second.status.success(), "second run failed");
    ensure!(!first.stdout.is_empty(), "no table on stdout");
    ensure!(first.stdout == second.stdout, "outputs differ between identical runs");
    let text = String::from_utf8_lossy(&first.stdout);
    ensure!(
        text.starts_with("size,charts,covered,total,max_error"),
        "unexpected table header: {}",
        text.lines().next().unwrap_or_default()
    );
    Ok(())
}

struct Outcome {
    line: String,
    passed: bool,
}

fn run_criterion(idx: usize, label: &str, budget: Option<f64>, body: fn() -> CheckResult) -> Outcome {
    let start = Instant::now();
    let result = body();
    let secs = start.elapsed().as_secs_f64();
    let (passed, note) = match result {
        Ok(()) => match budget {
            Some(b) if secs > b => (false, format!("exceeded the {b:.0} s budget")),
            _ => (true, String::new()),
        },
        Err(msg) => (false, msg),
    };
    let status = if passed { "PASS" } else { "FAIL" };
    let mut line = format!("criterion {idx:>2} {status} {secs:>7.2}s  {label}");
    if !note.is_empty() {
        line.push_str(": ");
        line.push_str(&note);
    }
    Outcome { line, passed }
}

#[test]
fn acceptance() {
    let criteria: [(usize, &str, Option<f64>, fn() -> CheckResult); 10] = [
        (1, "helix secant ratios stay within [0.5, pi]", Some(5.0), chart_secant_ratios),
        (2, "moment systems are exact on random clouds", Some(10.0), quadrature_exactness),
        (3, "scattered spline fits converge at stencil order", Some(60.0), spline_convergence_order),
        (4, "filtered projections reproduce and decay", Some(30.0), chebyshev_reproduction_and_decay),
        (5, "compiled networks match their sources", Some(20.0), network_equivalence),
        (6, "chebyshev recursion, expansion, clenshaw agree", None, chebyshev_consistency),
        (7, "b-spline unity, support, and stencil identities", None, bspline_identities),
        (8, "minimum-energy fits are feasible and optimal", Some(10.0), msn_optimality),
        (9, "chart inversion round-trips the cube", Some(30.0), preimage_roundtrip),
        (10, "convergence runs are byte-identical", None, converge_determinism),
    ];
    let mut lines = Vec::new();
    let mut all_passed = true;
    for (idx, label, budget, body) in criteria {
        let outcome = run_criterion(idx, label, budget, body);
        println!("{}", outcome.line);
        all_passed &= outcome.passed;
        lines.push(outcome.line);
    }
    assert!(all_passed, "acceptance failures:\n{}", lines.join("\n"));
}
