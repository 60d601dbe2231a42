use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::hyptest::check_finite;

/// Gaussian kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `σ̂ · n^(-1/5)`
    #[default]
    Scott,
    /// `0.9 · min(σ̂, IQR / 1.34) · n^(-1/5)`
    Silverman,
    Fixed(f64),
}

/// Density estimate evaluated on an equally spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
}

impl KdeCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn bandwidth(values: &[f64], rule: Bandwidth) -> Result<f64> {
    if let Bandwidth::Fixed(h) = rule {
        if !(h > 0.0 && h.is_finite()) {
            return Err(AuditError::Invalid(format!("KDE bandwidth must be positive, got {h}")));
        }
        return Ok(h);
    }
    let n = values.len();
    if n < 2 {
        return Err(AuditError::Invalid(format!(
            "automatic KDE bandwidth needs at least 2 values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(AuditError::Degenerate(
            "KDE: sample has zero variance, no automatic bandwidth".into(),
        ));
    }
    let factor = nf.powf(-0.2);
    Ok(match rule {
        Bandwidth::Scott => sd * factor,
        Bandwidth::Silverman => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * factor
        }
        Bandwidth::Fixed(_) => unreachable!(),
    })
}

/// Gaussian KDE of `values` on `grid_points` points spanning
/// `[min - 4h, max + 4h]`.
pub fn kde(values: &[f64], grid_points: usize, rule: Bandwidth) -> Result<KdeCurve> {
    if values.is_empty() {
        return Err(AuditError::Invalid("KDE needs at least one value".into()));
    }
    if grid_points < 2 {
        return Err(AuditError::Invalid(format!(
            "KDE grid needs at least 2 points, got {grid_points}"
        )));
    }
    check_finite(values, "KDE")?;
    let h = bandwidth(values, rule)?;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (start, end) = (lo - 4.0 * h, hi + 4.0 * h);
    let step = (end - start) / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| start + step * i as f64).collect();
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let inv_h = 1.0 / h;
    let density = grid
        .par_iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| {
                    let u = (x - v) * inv_h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
        n: values.len(),
    })
}
