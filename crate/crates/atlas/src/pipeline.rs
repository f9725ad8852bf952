//! End-to-end fitting: an atlas of charts with one approximant per chart,
//! prediction with a coverage fallback, and convergence studies.

use serde::{Deserialize, Serialize};

use crate::bspline::{fit_scattered, SplineModel};
use crate::chart::{build_atlas, Atlas, ChartConfig};
use crate::chebyshev::{fit_cheb, ChebConfig, ChebModel};
use crate::cloud::{format_float, PointCloud};
use crate::error::{AtlasError, Result};
use crate::manifold::{sample_field, sample_manifold, Field, ManifoldSpec};

/// Which approximant family to fit on each chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Cheb,
    Spline,
}

/// One chart's fitted approximant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChartModel {
    Cheb(ChebModel),
    Spline(SplineModel),
}

impl ChartModel {
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        match self {
            ChartModel::Cheb(m) => m.eval(y),
            ChartModel::Spline(m) => m.eval(y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub chart: ChartConfig,
    pub method: FitMethod,
    pub cheb: ChebConfig,
    /// Spline grid spacing and order, used when `method` is `Spline`.
    pub spline_h: f64,
    pub spline_m: usize,
    /// How far past the cube boundary prediction will still stretch the
    /// nearest chart.
    pub fallback_tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chart: ChartConfig::default(),
            method: FitMethod::Cheb,
            cheb: ChebConfig::default(),
            spline_h: 0.25,
            spline_m: 3,
            fallback_tolerance: 0.1,
        }
    }
}

/// An atlas together with one model per chart, the saved fit artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedAtlas {
    pub dim: usize,
    pub atlas: Atlas,
    pub models: Vec<ChartModel>,
}

/// Per-chart summary of a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartFitReport {
    pub chart: usize,
    /// Samples assigned to the chart and used for its fit.
    pub samples: usize,
    /// Bandwidth for Chebyshev models, shift count for splines.
    pub size: usize,
    /// Largest training deviation over the chart's samples.
    pub residual: f64,
}

/// Build charts and fit one approximant per chart.
///
/// Each chart's model is trained on the samples assigned to it. The cube
/// membership test alone can admit a second, geodesically distant band of
/// the manifold (squared distances to an anchor are symmetric around it), and
/// the assignment partition is what keeps each fit single-valued.
pub fn fit_pipeline(
    cloud: &PointCloud,
    dim: usize,
    config: &PipelineConfig,
) -> Result<(FittedAtlas, Vec<ChartFitReport>)> {
    let values = cloud
        .values()
        .ok_or_else(|| AtlasError::Validation("cloud carries no function values".into()))?;
    let atlas = build_atlas(cloud, dim, &config.chart)?;
    let mut models = Vec::with_capacity(atlas.charts().len());
    let mut reports = Vec::with_capacity(atlas.charts().len());
    for (idx, chart) in atlas.charts().iter().enumerate() {
        let mut sites = Vec::new();
        let mut targets = Vec::new();
        for i in atlas.chart_points(idx) {
            sites.push(chart.phi(cloud.point(i)));
            targets.push(values[i]);
        }
        if sites.is_empty() {
            return Err(AtlasError::InsufficientData(format!(
                "chart {idx} contains no samples"
            )));
        }
        let model = match config.method {
            FitMethod::Cheb => ChartModel::Cheb(fit_cheb(&sites, &targets, &config.cheb)?),
            FitMethod::Spline => ChartModel::Spline(fit_scattered(
                &sites,
                &targets,
                config.spline_h,
                config.spline_m,
                &config.cheb.quadrature,
            )?),
        };
        let size = match &model {
            ChartModel::Cheb(m) => m.n,
            ChartModel::Spline(m) => m.coefficients.len(),
        };
        let mut residual = 0.0_f64;
        for (y, &t) in sites.iter().zip(&targets) {
            // Spline windows may not cover every training site; skip those.
            if let Ok(v) = model.eval(y) {
                residual = residual.max((v - t).abs());
            }
        }
        reports.push(ChartFitReport { chart: idx, samples: sites.len(), size, residual });
        models.push(model);
    }
    Ok((FittedAtlas { dim, atlas, models }, reports))
}

/// A prediction and where it came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub chart: usize,
    /// `|phi(x)|_inf` in the chart that produced the value.
    pub sup_norm: f64,
    /// Set when no chart contained the point and the nearest one was
    /// stretched past its cube.
    pub fallback: bool,
}

/// Evaluate the fitted atlas at an ambient point.
///
/// Charts containing the point compete by smallest sup-norm; failing that,
/// the nearest chart is used as long as it misses by no more than
/// `fallback_tolerance`.
pub fn predict(fitted: &FittedAtlas, x: &[f64], fallback_tolerance: f64) -> Result<Prediction> {
    if let Some((idx, phi)) = fitted.atlas.assign_chart(x) {
        let norm = phi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let value = fitted.models[idx].eval(&phi)?;
        return Ok(Prediction { value, chart: idx, sup_norm: norm, fallback: false });
    }
    let (idx, phi, norm) = fitted.atlas.nearest_chart(x);
    if norm <= 1.0 + fallback_tolerance {
        let value = fitted.models[idx].eval(&phi)?;
        return Ok(Prediction { value, chart: idx, sup_norm: norm, fallback: true });
    }
    Err(AtlasError::OutOfCoverage { norm })
}

/// Inputs for a convergence study over increasing sample sizes.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub spec: ManifoldSpec,
    pub field: Field,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub test_count: usize,
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub size: usize,
    pub charts: usize,
    pub covered: usize,
    pub total: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log least-squares rate of `max_error` against `size`; absent when
    /// every error is at the noise floor.
    pub slope: Option<f64>,
    /// All errors at or below `1e-10`.
    pub exact: bool,
}

impl ConvergenceReport {
    /// Fixed-format text table, identical bytes for identical inputs.
    pub fn render(&self) -> String {
        let mut out = String::from("size,charts,covered,total,max_error\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.size,
                row.charts,
                row.covered,
                row.total,
                format_float(row.max_error)
            ));
        }
        if self.exact {
            out.push_str("exact\n");
        } else if let Some(slope) = self.slope {
            out.push_str(&format!("slope,{:.6}\n", slope));
        } else {
            out.push_str("slope,none\n");
        }
        out
    }
}

/// Fit at each size and measure held-out error on a fresh draw.
///
/// The test cloud is noise-free so the reference values are exact; points no
/// chart covers (even with the fallback stretch) are skipped and counted.
pub fn run_convergence(config: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if config.sizes.is_empty() {
        return Err(AtlasError::Validation("no sizes to run".into()));
    }
    let test_spec = ManifoldSpec {
        kind: config.spec.kind.clone(),
        count: config.test_count,
        seed: config.spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        noise: 0.0,
    };
    let test_cloud = sample_field(&sample_manifold(&test_spec)?, &config.field)?;
    let truth = test_cloud.values().expect("field evaluation attaches values");

    let mut rows = Vec::with_capacity(config.sizes.len());
    for &size in &config.sizes {
        let train_spec = ManifoldSpec { count: size, ..config.spec.clone() };
        let train = sample_field(&sample_manifold(&train_spec)?, &config.field)?;
        let (fitted, _) = fit_pipeline(&train, config.dim, &config.pipeline)?;
        let mut covered = 0usize;
        let mut max_error = 0.0_f64;
        for (i, x) in test_cloud.points().iter().enumerate() {
            match predict(&fitted, x, config.pipeline.fallback_tolerance) {
                Ok(p) => {
                    covered += 1;
                    max_error = max_error.max((p.value - truth[i]).abs());
                }
                Err(AtlasError::OutOfCoverage { .. }) | Err(AtlasError::Coverage(_)) => {}
                Err(other) => return Err(other),
            }
        }
        rows.push(ConvergenceRow {
            size,
            charts: fitted.atlas.charts().len(),
            covered,
            total: test_cloud.len(),
            max_error,
        });
    }

    let exact = rows.iter().all(|r| r.max_error <= 1e-10);
    let slope = if exact {
        None
    } else {
        fit_slope(
            &rows.iter().map(|r| r.size as f64).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.max_error).collect::<Vec<_>>(),
        )
    };
    Ok(ConvergenceReport { rows, slope, exact })
}

/// Least-squares slope of `ln err` against `ln size`, ignoring floor values.
fn fit_slope(sizes: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 1e-14)
        .map(|(&s, &e)| (s.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
