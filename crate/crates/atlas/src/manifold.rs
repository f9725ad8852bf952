//! Synthetic sampled manifolds with known parametrizations.
//!
//! These provide ground truth for experiments: exact embeddings, exact
//! geodesic distances where closed forms exist, and a small family of test
//! fields with controlled smoothness. Sampling is fully deterministic for a
//! fixed seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{squared_distance, PointCloud};
use crate::error::{AtlasError, Result};

use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldKind {
    /// Unit-speed circular helix in `R^3`: `s -> (cos(a s), sin(a s), sqrt(1-a^2) s)`
    /// with pitch parameter `0 < a < 1` and arclength `s` in `[0, 4*pi]`.
    Helix { a: f64 },
    /// Circle of the given radius in the first two coordinates of `R^dim`.
    Circle { radius: f64, dim: usize },
    /// Unit 2-sphere in the first three coordinates of `R^dim`,
    /// sampled uniformly by surface area; parameters are (polar, azimuth).
    Sphere { dim: usize },
    /// Torus with minor/major radii in the first three coordinates of `R^dim`;
    /// parameters are (minor angle, major angle).
    Torus { minor: f64, major: f64, dim: usize },
}

impl ManifoldKind {
    /// Intrinsic dimension.
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldKind::Helix { .. } | ManifoldKind::Circle { .. } => 1,
            ManifoldKind::Sphere { .. } | ManifoldKind::Torus { .. } => 2,
        }
    }

    /// Ambient dimension.
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldKind::Helix { .. } => 3,
            ManifoldKind::Circle { dim, .. } => *dim,
            ManifoldKind::Sphere { dim } => *dim,
            ManifoldKind::Torus { dim, .. } => *dim,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ManifoldKind::Helix { a } => {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(AtlasError::Validation(format!(
                        "helix pitch parameter must lie in (0, 1), got {a}"
                    )));
                }
            }
            ManifoldKind::Circle { radius, dim } => {
                if !(*radius > 0.0) {
                    return Err(AtlasError::Validation(format!(
                        "circle radius must be positive, got {radius}"
                    )));
                }
                if *dim < 2 {
                    return Err(AtlasError::Validation(format!(
                        "circle needs ambient dimension >= 2, got {dim}"
                    )));
                }
            }
            ManifoldKind::Sphere { dim } => {
                if *dim < 3 {
                    return Err(AtlasError::Validation(format!(
                        "sphere needs ambient dimension >= 3, got {dim}"
                    )));
                }
            }
            ManifoldKind::Torus { minor, major, dim } => {
                if !(*minor > 0.0 && minor < major) {
                    return Err(AtlasError::Validation(format!(
                        "torus radii must satisfy 0 < minor < major, got {minor}, {major}"
                    )));
                }
                if *dim < 3 {
                    return Err(AtlasError::Validation(format!(
                        "torus needs ambient dimension >= 3, got {dim}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact embedding of one intrinsic parameter vector.
    pub fn embed(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if params.len() != self.intrinsic_dim() {
            return Err(AtlasError::Validation(format!(
                "expected {} intrinsic parameters, got {}",
                self.intrinsic_dim(),
                params.len()
            )));
        }
        let mut x = vec![0.0; self.ambient_dim()];
        match self {
            ManifoldKind::Helix { a } => {
                let s = params[0];
                x[0] = (a * s).cos();
                x[1] = (a * s).sin();
                x[2] = (1.0 - a * a).sqrt() * s;
            }
            ManifoldKind::Circle { radius, .. } => {
                let t = params[0];
                x[0] = radius * t.cos();
                x[1] = radius * t.sin();
            }
            ManifoldKind::Sphere { .. } => {
                let (theta, phi) = (params[0], params[1]);
                x[0] = theta.sin() * phi.cos();
                x[1] = theta.sin() * phi.sin();
                x[2] = theta.cos();
            }
            ManifoldKind::Torus { minor, major, .. } => {
                let (theta, phi) = (params[0], params[1]);
                let ring = major + minor * theta.cos();
                x[0] = ring * phi.cos();
                x[1] = ring * phi.sin();
                x[2] = minor * theta.sin();
            }
        }
        Ok(x)
    }

    fn draw_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            ManifoldKind::Helix { .. } => vec![rng.gen::<f64>() * 4.0 * PI],
            ManifoldKind::Circle { .. } => vec![rng.gen::<f64>() * TAU],
            ManifoldKind::Sphere { .. } => {
                let theta = (1.0 - 2.0 * rng.gen::<f64>()).clamp(-1.0, 1.0).acos();
                let phi = rng.gen::<f64>() * TAU;
                vec![theta, phi]
            }
            ManifoldKind::Torus { .. } => {
                vec![rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU]
            }
        }
    }

    /// Exact geodesic distance between two sampled parameter vectors.
    ///
    /// Supported in closed form for the helix (arclength), circle
    /// (shorter arc) and sphere (great circle). The torus has no elementary
    /// closed form and is rejected.
    pub fn geodesic_distance(&self, p1: &[f64], p2: &[f64]) -> Result<f64> {
        self.validate()?;
        let d = self.intrinsic_dim();
        if p1.len() != d || p2.len() != d {
            return Err(AtlasError::Validation(format!(
                "expected {d} intrinsic parameters per point, got {} and {}",
                p1.len(),
                p2.len()
            )));
        }
        match self {
            // The helix embedding is unit speed, so arclength is |s1 - s2|.
            ManifoldKind::Helix { .. } => Ok((p1[0] - p2[0]).abs()),
            ManifoldKind::Circle { radius, .. } => {
                let gap = (p1[0] - p2[0]).rem_euclid(TAU);
                Ok(radius * gap.min(TAU - gap))
            }
            ManifoldKind::Sphere { .. } => {
                let u = self.embed(p1)?;
                let v = self.embed(p2)?;
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                Ok(dot.clamp(-1.0, 1.0).acos())
            }
            ManifoldKind::Torus { .. } => Err(AtlasError::Unsupported(
                "exact geodesics on the torus have no closed form".into(),
            )),
        }
    }
}

/// Recipe for one synthetic cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub count: usize,
    pub seed: u64,
    /// Standard deviation of isotropic Gaussian noise added in ambient space.
    pub noise: f64,
}

/// Draw `spec.count` points: parameters uniformly over the canonical ranges,
/// embedded exactly, then perturbed by ambient Gaussian noise.
pub fn sample_manifold(spec: &ManifoldSpec) -> Result<PointCloud> {
    spec.kind.validate()?;
    if spec.count == 0 {
        return Err(AtlasError::Validation("sample count must be positive".into()));
    }
    if !(spec.noise >= 0.0) {
        return Err(AtlasError::Validation(format!(
            "noise amplitude must be non-negative, got {}",
            spec.noise
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let params: Vec<Vec<f64>> = (0..spec.count).map(|_| spec.kind.draw_params(&mut rng)).collect();
    let mut points = Vec::with_capacity(spec.count);
    for p in &params {
        points.push(spec.kind.embed(p)?);
    }
    if spec.noise > 0.0 {
        for x in &mut points {
            for xi in x.iter_mut() {
                *xi += spec.noise * standard_normal(&mut rng);
            }
        }
    }
    PointCloud::new(points, None, Some(params))
}

/// Box-Muller draw from the standard normal distribution.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Scalar test fields evaluated on a sampled cloud.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    /// `f(x) = sum_i x_i` on the ambient coordinates.
    CoordinateSum,
    /// `f(x) = exp(-|x - center|^2 / (2 width^2))`, peak value 1 at the center.
    GaussianBump { center: Vec<f64>, width: f64 },
    /// Trigonometric function of the intrinsic parameters:
    /// `sin(k p1)` for curves, `sin(k p1) cos(k p2)` for surfaces.
    Trig { frequency: u32 },
    /// Truncated power `(p1 - kink)_+^{r+1}` of the first parameter: a function
    /// with exactly `r` continuous derivatives across the kink.
    Smoothness { r: u32, kink: f64 },
}

impl Field {
    fn eval(&self, point: &[f64], params: Option<&[f64]>) -> Result<f64> {
        match self {
            Field::CoordinateSum => Ok(point.iter().sum()),
            Field::GaussianBump { center, width } => {
                if center.len() != point.len() {
                    return Err(AtlasError::Validation(format!(
                        "bump center has {} coordinates, points have {}",
                        center.len(),
                        point.len()
                    )));
                }
                if !(*width > 0.0) {
                    return Err(AtlasError::Validation("bump width must be positive".into()));
                }
                Ok((-squared_distance(point, center) / (2.0 * width * width)).exp())
            }
            Field::Trig { frequency } => {
                let p = params.ok_or_else(|| {
                    AtlasError::Validation("trig field needs intrinsic parameters".into())
                })?;
                let k = *frequency as f64;
                let mut f = (k * p[0]).sin();
                if p.len() > 1 {
                    f *= (k * p[1]).cos();
                }
                Ok(f)
            }
            Field::Smoothness { r, kink } => {
                let p = params.ok_or_else(|| {
                    AtlasError::Validation("smoothness field needs intrinsic parameters".into())
                })?;
                let t = p[0] - kink;
                Ok(if t > 0.0 { t.powi(*r as i32 + 1) } else { 0.0 })
            }
        }
    }
}

/// Evaluate `field` at every point, returning a cloud with values attached.
pub fn sample_field(cloud: &PointCloud, field: &Field) -> Result<PointCloud> {
    let mut values = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        let params = cloud.params().map(|p| p[i].as_slice());
        values.push(field.eval(cloud.point(i), params)?);
    }
    PointCloud::new(cloud.points().to_vec(), Some(values), cloud.params().map(|p| p.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const HELIX: ManifoldKind = ManifoldKind::Helix { a: 0.8 };

    #[test]
    fn helix_start_point() {
        let x = HELIX.embed(&[0.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn helix_points_stay_on_unit_cylinder() {
        for i in 0..50 {
            let s = i as f64 * 0.25;
            let x = HELIX.embed(&[s]).unwrap();
            assert_relative_eq!(x[0] * x[0] + x[1] * x[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn helix_geodesic_is_arclength_and_chord_is_shorter() {
        // A full turn in angle takes arclength 2*pi/0.8 = 2.5*pi; the chord
        // then comes only from the axial coordinate, 2.5*pi*sqrt(1 - 0.64).
        let span = TAU / 0.8;
        let g = HELIX.geodesic_distance(&[0.0], &[span]).unwrap();
        assert_relative_eq!(g, span, epsilon = 1e-15);
        let a = HELIX.embed(&[0.0]).unwrap();
        let b = HELIX.embed(&[span]).unwrap();
        let chord = crate::cloud::distance(&a, &b);
        assert_relative_eq!(chord, span * 0.6, epsilon = 1e-12);
        assert_relative_eq!(chord, 4.712_388_980_384_690, epsilon = 1e-12);
        assert!(chord < g);
    }

    #[test]
    fn circle_geodesic_takes_the_shorter_arc() {
        let circle = ManifoldKind::Circle { radius: 1.0, dim: 2 };
        let quarter = circle.geodesic_distance(&[0.0], &[PI / 2.0]).unwrap();
        assert_relative_eq!(quarter, PI / 2.0, epsilon = 1e-15);
        let wrap = circle.geodesic_distance(&[0.1], &[TAU - 0.1]).unwrap();
        assert_relative_eq!(wrap, 0.2, epsilon = 1e-12);
        let scaled = ManifoldKind::Circle { radius: 2.5, dim: 4 };
        assert_relative_eq!(
            scaled.geodesic_distance(&[0.0], &[PI]).unwrap(),
            2.5 * PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sphere_geodesic_is_the_great_circle_angle() {
        let sphere = ManifoldKind::Sphere { dim: 3 };
        let d = sphere.geodesic_distance(&[PI / 2.0, 0.0], &[PI / 2.0, PI]).unwrap();
        assert_relative_eq!(d, PI, epsilon = 1e-12);
        let same = sphere.geodesic_distance(&[0.3, 1.0], &[0.3, 1.0]).unwrap();
        assert!(same.abs() < 1e-12);
    }

    #[test]
    fn torus_geodesics_are_rejected() {
        let torus = ManifoldKind::Torus { minor: 1.0, major: 3.0, dim: 3 };
        let err = torus.geodesic_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, AtlasError::Unsupported(_)));
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let spec = ManifoldSpec { kind: HELIX, count: 64, seed: 7, noise: 0.01 };
        let a = sample_manifold(&spec).unwrap();
        let b = sample_manifold(&spec).unwrap();
        assert_eq!(a, b);
        let c = sample_manifold(&ManifoldSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_parameters_stay_in_range() {
        let spec = ManifoldSpec {
            kind: ManifoldKind::Sphere { dim: 5 },
            count: 200,
            seed: 3,
            noise: 0.0,
        };
        let cloud = sample_manifold(&spec).unwrap();
        assert_eq!(cloud.dim(), 5);
        for p in cloud.params().unwrap() {
            assert!((0.0..=PI).contains(&p[0]));
            assert!((0.0..TAU).contains(&p[1]));
        }
        // Trailing coordinates of the embedding are identically zero.
        for x in cloud.points() {
            assert_eq!(&x[3..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn trig_field_on_the_helix_parameter() {
        let cloud = PointCloud::new(
            vec![vec![0.0, 1.0, 0.0]],
            None,
            Some(vec![vec![PI / 2.0]]),
        )
        .unwrap();
        let with_f = sample_field(&cloud, &Field::Trig { frequency: 1 }).unwrap();
        assert_relative_eq!(with_f.values().unwrap()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bump_peaks_at_its_center() {
        let cloud = PointCloud::new(vec![vec![0.5, -1.0]], None, None).unwrap();
        let field = Field::GaussianBump { center: vec![0.5, -1.0], width: 0.3 };
        let with_f = sample_field(&cloud, &field).unwrap();
        assert_eq!(with_f.values().unwrap()[0], 1.0);
    }

    #[test]
    fn coordinate_sum_field() {
        let cloud = PointCloud::new(vec![vec![1.0, 2.0, -0.5]], None, None).unwrap();
        let with_f = sample_field(&cloud, &Field::CoordinateSum).unwrap();
        assert_eq!(with_f.values().unwrap()[0], 2.5);
    }

    #[test]
    fn smoothness_field_is_a_truncated_power() {
        let cloud = PointCloud::new(
            vec![vec![0.0; 3], vec![0.0; 3]],
            None,
            Some(vec![vec![-1.0], vec![2.0]]),
        )
        .unwrap();
        let with_f = sample_field(&cloud, &Field::Smoothness { r: 2, kink: 0.0 }).unwrap();
        assert_eq!(with_f.values().unwrap(), &[0.0, 8.0]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ManifoldKind::Helix { a: 1.0 }.embed(&[0.0]).is_err());
        assert!(ManifoldKind::Circle { radius: 0.0, dim: 2 }.embed(&[0.0]).is_err());
        let spec = ManifoldSpec { kind: HELIX, count: 0, seed: 0, noise: 0.0 };
        assert!(sample_manifold(&spec).is_err());
        let spec = ManifoldSpec { kind: HELIX, count: 1, seed: 0, noise: -0.1 };
        assert!(sample_manifold(&spec).is_err());
    }
}
