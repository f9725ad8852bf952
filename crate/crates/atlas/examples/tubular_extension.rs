//! Extend a function sampled on a curve to a tube around it.
//!
//! The chart coordinates are widened by unit normals into coordinates for a
//! tubular neighborhood, and a minimum-energy polynomial interpolates the
//! samples in those coordinates. On the curve the extension matches the
//! data; off the curve it degrades smoothly with the normal offset.

use atlas::chart::{ChartMap, CoordinateStar};
use atlas::error::Result;
use atlas::extension::{build_tubular, extend_evaluate, fit_extension, MsnConfig};
use atlas::manifold::ManifoldKind;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let helix = ManifoldKind::Helix { a: 0.8 };
    let star = CoordinateStar::new(
        helix.embed(&[1.0])?,
        vec![helix.embed(&[1.35])?],
        0.9,
    )?;
    let chart = ChartMap::new(star);

    // Widen the chart to all of R^3: one tangential + two normal directions.
    let tubular = build_tubular(&chart, Some(3), Some(0.5))?;
    println!(
        "tube: {} tangential + {} normal coordinates, radius {}",
        tubular.chart.dim(),
        tubular.frame.len(),
        tubular.tube_radius
    );

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let samples: Vec<Vec<f64>> = (0..60)
        .map(|_| helix.embed(&[0.4 + rng.gen::<f64>() * 1.4]).unwrap())
        .collect();
    let field = |x: &[f64]| (2.0 * x[2]).sin() + x[0];
    let values: Vec<f64> = samples.iter().map(|x| field(x)).collect();

    let model = fit_extension(&samples, &values, &tubular, &MsnConfig::default())?;
    println!(
        "fitted degree-{} polynomial, constraint residual {:.1e}\n",
        model.polynomial.degree, model.polynomial.constraint_residual
    );

    // Walk away from the curve along a normal direction and watch the error.
    let base = helix.embed(&[1.1])?;
    println!("offset   |extension - field at foot|");
    for step in 0..=5 {
        let t = step as f64 * 0.08;
        let mut x = base.clone();
        for (axis, v) in tubular.frame[0].iter().enumerate() {
            x[axis] += t * v;
        }
        if !tubular.in_tube(&x) {
            println!("{t:.2}     (left the tube)");
            break;
        }
        let got = extend_evaluate(&model, &x)?;
        println!("{t:.2}     {:.3e}", (got - field(&base)).abs());
    }
    Ok(())
}
