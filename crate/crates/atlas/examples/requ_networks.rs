//! Compile polynomial models into exact rectified-quadratic networks.
//!
//! The unit is `sigma(t) = max(t, 0)^2`. Squares, products, powers of two,
//! and therefore arbitrary polynomials have exact finite-depth network
//! forms: no training and no approximation error beyond float roundoff.
//! Chart coordinate maps are quadratic in the ambient point, so they
//! compile too.

use atlas::chart::{ChartMap, CoordinateStar};
use atlas::chebyshev::{ChebModel, Filter};
use atlas::error::Result;
use atlas::manifold::ManifoldKind;
use atlas::network::{
    compile_bspline, compile_chart, compile_chebyshev, compile_power, compile_product,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);

    let eighth = compile_power(8)?;
    println!(
        "t -> t^8: depth {}, {} units",
        eighth.depth(),
        eighth.unit_count()
    );
    let product = compile_product();
    println!(
        "(x, y) -> x y: depth {}, {} units",
        product.depth(),
        product.unit_count()
    );

    // A random bivariate Chebyshev model, compiled and compared.
    let n = 4usize;
    let coeffs: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let model = ChebModel { n, dim: 2, filter: Filter::None, coeffs, exactness: 0 };
    let net = compile_chebyshev(&model)?;
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let x = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0];
        worst = worst.max((net.eval_scalar(&x)? - model.eval(&x)?).abs());
    }
    println!(
        "degree-3 tensor model: depth {}, {} units, max |net - direct| = {worst:.2e}",
        net.depth(),
        net.unit_count()
    );

    // Piecewise polynomials work through their truncated-power form.
    let bump = compile_bspline(3)?;
    println!(
        "order-3 B-spline bump: depth {}, {} units",
        bump.depth(),
        bump.unit_count()
    );

    // A helix chart's coordinate map, exactly as a network.
    let helix = ManifoldKind::Helix { a: 0.8 };
    let star = CoordinateStar::new(
        helix.embed(&[2.0])?,
        vec![helix.embed(&[2.4])?],
        0.12,
    )?;
    let chart = ChartMap::new(star);
    let chart_net = compile_chart(&chart);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let s = 1.7 + rng.gen::<f64>() * 0.8;
        let mut x = helix.embed(&[s])?;
        for c in x.iter_mut() {
            *c += 0.05 * (rng.gen::<f64>() * 2.0 - 1.0);
        }
        worst = worst.max((chart_net.eval(&x)?[0] - chart.phi(&x)[0]).abs());
    }
    println!(
        "chart coordinates: depth {}, {} units, max |net - phi| = {worst:.2e}",
        chart_net.depth(),
        chart_net.unit_count()
    );
    Ok(())
}
