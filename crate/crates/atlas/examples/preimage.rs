//! Recover ambient points from chart coordinates.
//!
//! A chart maps a patch of the manifold into [-1, 1]^d; the pre-image
//! problem goes the other way. Each ambient coordinate is fitted as a
//! Chebyshev model of the chart coordinate, which works when the chart is
//! injective on the patch. Squared-distance coordinates fold at their
//! anchor, so the anchor is placed outside the band being inverted.

use atlas::chart::{ChartMap, CoordinateStar};
use atlas::chebyshev::ChebConfig;
use atlas::error::Result;
use atlas::extension::fit_preimage;
use atlas::manifold::ManifoldKind;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let helix = ManifoldKind::Helix { a: 0.8 };
    let star = CoordinateStar::new(
        helix.embed(&[2.0])?,
        vec![helix.embed(&[2.4])?],
        0.12,
    )?;
    let chart = ChartMap::new(star);

    // Noiseless samples covering the injective band on one side of the anchor.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let points: Vec<Vec<f64>> = (0..2500)
        .map(|_| helix.embed(&[1.85 + rng.gen::<f64>() * 0.4]).unwrap())
        .collect();

    let model = fit_preimage(&points, &chart, &ChebConfig::default())?;
    println!(
        "inverse model: {} ambient components, bandwidth {}\n",
        model.ambient_dim, model.models[0].n
    );

    println!("    y     ->  recovered ambient point          -> phi(x)   roundtrip");
    let mut worst: f64 = 0.0;
    for step in 0..=10 {
        let y = -1.0 + 0.2 * step as f64;
        let x = model.preimage(&[y])?;
        let back = chart.phi(&x)[0];
        let gap = (back - y).abs();
        worst = worst.max(gap);
        println!(
            "{y:+.2}  ->  ({:+.4}, {:+.4}, {:+.4})  ->  {back:+.4}   {gap:.1e}",
            x[0], x[1], x[2]
        );
    }
    println!("\nworst roundtrip gap: {worst:.2e}");
    Ok(())
}
