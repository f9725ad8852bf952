//! Point clouds in ambient space and their CSV form.
//!
//! The on-disk format is a plain comma-separated file with header
//! `x1,...,xD[,f][,param...]` and LF line endings. Floats are written in
//! scientific notation with 17 significant digits so that save/load is a
//! round-trip identity at the bit level for finite values.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{AtlasError, Result};

/// Scattered samples `x_j` in `R^D`, optionally with scalar values `f(x_j)`
/// and the intrinsic parameters that generated each point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    values: Option<Vec<f64>>,
    params: Option<Vec<Vec<f64>>>,
}

impl PointCloud {
    pub fn new(
        points: Vec<Vec<f64>>,
        values: Option<Vec<f64>>,
        params: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(AtlasError::Validation("point cloud must contain at least one point".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(AtlasError::Validation("ambient dimension must be at least 1".into()));
        }
        if let Some(bad) = points.iter().position(|p| p.len() != dim) {
            return Err(AtlasError::Validation(format!(
                "point {bad} has {} coordinates, expected {dim}",
                points[bad].len()
            )));
        }
        if let Some(v) = &values {
            if v.len() != points.len() {
                return Err(AtlasError::Validation(format!(
                    "{} values for {} points",
                    v.len(),
                    points.len()
                )));
            }
        }
        if let Some(p) = &params {
            if p.len() != points.len() {
                return Err(AtlasError::Validation(format!(
                    "{} parameter rows for {} points",
                    p.len(),
                    points.len()
                )));
            }
            let width = p[0].len();
            if width == 0 || p.iter().any(|row| row.len() != width) {
                return Err(AtlasError::Validation("parameter rows must share a positive width".into()));
            }
        }
        Ok(PointCloud { points, values, params })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ambient dimension `D`.
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn params(&self) -> Option<&[Vec<f64>]> {
        self.params.as_deref()
    }

    /// New cloud keeping only the rows in `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let values = self.values.as_ref().map(|v| indices.iter().map(|&i| v[i]).collect());
        let params = self.params.as_ref().map(|p| indices.iter().map(|&i| p[i].clone()).collect());
        PointCloud::new(points, values, params)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let mut out = String::new();
        for i in 0..dim {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "x{}", i + 1);
        }
        if self.values.is_some() {
            out.push_str(",f");
        }
        if let Some(p) = &self.params {
            let width = p[0].len();
            if width == 1 {
                out.push_str(",param");
            } else {
                for i in 0..width {
                    let _ = write!(out, ",param{}", i + 1);
                }
            }
        }
        out.push('\n');
        for (row, point) in self.points.iter().enumerate() {
            for (i, x) in point.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format_float(*x));
            }
            if let Some(v) = &self.values {
                out.push(',');
                out.push_str(&format_float(v[row]));
            }
            if let Some(p) = &self.params {
                for x in &p[row] {
                    out.push(',');
                    out.push_str(&format_float(*x));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| AtlasError::Validation("empty csv: missing header".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();

        let mut dim = 0;
        while dim < columns.len() && columns[dim] == format!("x{}", dim + 1) {
            dim += 1;
        }
        if dim == 0 {
            return Err(AtlasError::Validation(format!(
                "csv header must start with x1,x2,...; found {:?}",
                columns.first().copied().unwrap_or("")
            )));
        }
        let mut next = dim;
        let has_values = next < columns.len() && columns[next] == "f";
        if has_values {
            next += 1;
        }
        let param_width = if next < columns.len() && columns[next] == "param" {
            next += 1;
            1
        } else {
            let mut width = 0;
            while next < columns.len() && columns[next] == format!("param{}", width + 1) {
                width += 1;
                next += 1;
            }
            width
        };
        if next != columns.len() {
            return Err(AtlasError::Validation(format!(
                "unexpected csv column {:?} at position {}",
                columns[next],
                next + 1
            )));
        }

        let mut points = Vec::new();
        let mut values = if has_values { Some(Vec::new()) } else { None };
        let mut params = if param_width > 0 { Some(Vec::new()) } else { None };
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(AtlasError::Validation(format!(
                    "line {line_no}: expected {} columns, found {}",
                    columns.len(),
                    fields.len()
                )));
            }
            let mut parsed = Vec::with_capacity(fields.len());
            for (col, field) in fields.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    AtlasError::Validation(format!(
                        "line {line_no}, column {}: cannot parse {field:?} as a number",
                        col + 1
                    ))
                })?;
                parsed.push(v);
            }
            points.push(parsed[..dim].to_vec());
            if let Some(values) = &mut values {
                values.push(parsed[dim]);
            }
            if let Some(params) = &mut params {
                params.push(parsed[parsed.len() - param_width..].to_vec());
            }
        }
        PointCloud::new(points, values, params)
    }
}

/// 17 significant digits: enough to reproduce any finite f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}
