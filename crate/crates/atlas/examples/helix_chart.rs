//! Build distance-based coordinate charts on a sampled helix.
//!
//! Charts here never see the curve's parametrization: each one is a center
//! plus one anchor point, and the coordinate of `x` is its squared distance
//! to the anchor, recentred and scaled into [-1, 1]. The demo prints the
//! cover the builder finds and how well chart coordinates track arclength.

use atlas::chart::{build_atlas, distortion_report, ChartConfig};
use atlas::error::Result;
use atlas::manifold::{sample_manifold, ManifoldKind, ManifoldSpec};

fn main() -> Result<()> {
    let spec = ManifoldSpec {
        kind: ManifoldKind::Helix { a: 0.8 },
        count: 1500,
        seed: 11,
        noise: 0.0,
    };
    let cloud = sample_manifold(&spec)?;
    println!("sampled {} helix points in R^{}", cloud.len(), cloud.dim());

    let atlas = build_atlas(&cloud, 1, &ChartConfig::default())?;
    println!("atlas: {} charts, every point assigned\n", atlas.charts().len());

    println!("chart  assigned  beta*      gamma");
    for (idx, chart) in atlas.charts().iter().enumerate().take(8) {
        let assigned = atlas.chart_points(idx).len();
        println!(
            "{idx:>5}  {assigned:>8}  {:<9.4}  {:.4}",
            chart.star().beta_star(),
            chart.star().gamma_proxy()
        );
    }
    if atlas.charts().len() > 8 {
        println!("  ... {} more", atlas.charts().len() - 8);
    }

    // Distance distortion of chart 0 against true arclength gaps. The
    // helix is unit speed, so parameter differences are geodesic distances.
    let params = cloud.params().expect("sampler keeps parameters");
    let report = distortion_report(&atlas.charts()[0], &cloud, |i, j| {
        Some((params[i][0] - params[j][0]).abs())
    })?;
    println!(
        "\nchart 0 secant ratios over {} pairs: [{:.4}, {:.4}]",
        report.pairs, report.min_ratio, report.max_ratio
    );

    // Where a few points land in their chart.
    println!("\npoint  chart  phi");
    for idx in [0usize, 200, 400, 800] {
        match atlas.assign_chart(cloud.point(idx)) {
            Some((chart, phi)) => println!("{idx:>5}  {chart:>5}  {:+.4}", phi[0]),
            None => println!("{idx:>5}  (outside every chart)"),
        }
    }
    Ok(())
}
