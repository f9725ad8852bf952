//! Full pipeline: sample a manifold, build charts, fit per-chart models,
//! predict held-out points, and print a convergence sweep.

use atlas::error::Result;
use atlas::manifold::{sample_field, sample_manifold, Field, ManifoldKind, ManifoldSpec};
use atlas::pipeline::{fit_pipeline, predict, run_convergence, ConvergenceConfig, PipelineConfig};

fn main() -> Result<()> {
    let spec = ManifoldSpec {
        kind: ManifoldKind::Helix { a: 0.8 },
        count: 1200,
        seed: 7,
        noise: 0.0,
    };
    let field = Field::Trig { frequency: 1 };
    let cloud = sample_field(&sample_manifold(&spec)?, &field)?;

    let config = PipelineConfig::default();
    let (fitted, reports) = fit_pipeline(&cloud, 1, &config)?;
    println!(
        "built {} charts over {} points",
        fitted.atlas.charts().len(),
        cloud.len()
    );
    for r in reports.iter().take(5) {
        println!(
            "  chart {:>2}: {:>4} samples, model size {:>3}, residual {:.2e}",
            r.chart, r.samples, r.size, r.residual
        );
    }
    if reports.len() > 5 {
        println!("  ... {} more", reports.len() - 5);
    }

    // Held-out points from the same curve, different seed.
    let probe_spec = ManifoldSpec { count: 200, seed: 8, ..spec.clone() };
    let probes = sample_field(&sample_manifold(&probe_spec)?, &field)?;
    let truth = probes.values().unwrap().to_vec();
    let mut worst = 0.0f64;
    let mut fallbacks = 0usize;
    let mut uncovered = 0usize;
    for i in 0..probes.len() {
        match predict(&fitted, probes.point(i), 0.1) {
            Ok(p) => {
                if p.fallback {
                    fallbacks += 1;
                }
                worst = worst.max((p.value - truth[i]).abs());
            }
            Err(_) => uncovered += 1,
        }
    }
    println!(
        "\nheld-out: worst error {worst:.3e}, {fallbacks} fallback predictions, {uncovered} outside every chart"
    );

    // Error as the sample budget grows.
    let sweep = ConvergenceConfig {
        spec: ManifoldSpec { count: 0, ..spec },
        field,
        dim: 1,
        sizes: vec![300, 600, 1200, 2400],
        test_count: 150,
        pipeline: PipelineConfig::default(),
    };
    let report = run_convergence(&sweep)?;
    println!("\n{}", report.render());
    Ok(())
}
