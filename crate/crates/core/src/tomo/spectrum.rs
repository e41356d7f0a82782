//! Eigenvalues of superoperators and statistics of their moduli.

use serde::{Deserialize, Serialize};

use super::Superoperator;
use crate::linalg::{c64, eig_general};
use crate::{Error, Result};

/// Equal-width bins on `[0, max]` for the modulus histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSpec {
    pub width: f64,
    pub max: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec { width: 0.05, max: 1.2 }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.max > 0.0 && self.width.is_finite() && self.max.is_finite()) {
            return Err(Error::Config(format!("histogram width {} and max {} must be positive", self.width, self.max)));
        }
        if self.max / self.width > 1e6 {
            return Err(Error::Config("histogram has too many bins".into()));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        (self.max / self.width - 1e-9).ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Moduli at or beyond the last edge.
    pub overflow: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralStats {
    pub count: usize,
    /// Radius of the mean-modulus circle.
    pub mean_modulus: f64,
    /// Central second moment (variance) of `|λ|`.
    pub second_moment: f64,
    pub mean_square_modulus: f64,
    pub max_modulus: f64,
    /// Eigenvalues with `|λ| > 1`, physically forbidden but kept.
    pub above_unit_circle: usize,
    pub histogram: Histogram,
}

/// Eigenvalues of `Λ`, sorted by argument then modulus.
pub fn lambda_spectrum(lambda: &Superoperator) -> Result<Vec<c64>> {
    let mut ev = eig_general(lambda.matrix())?;
    ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
    Ok(ev)
}

pub fn spectral_stats(spectrum: &[c64], spec: &HistogramSpec) -> Result<SpectralStats> {
    spec.validate()?;
    if spectrum.is_empty() {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    let mods: Vec<f64> = spectrum.iter().map(|z| z.norm()).collect();
    let n = mods.len() as f64;
    let mean = mods.iter().sum::<f64>() / n;
    let var = mods.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
    let bins = spec.num_bins();
    let mut counts = vec![0usize; bins];
    let mut overflow = 0;
    for &m in &mods {
        let k = (m / spec.width).floor() as usize;
        if m >= spec.max || k >= bins {
            overflow += 1;
        } else {
            counts[k] += 1;
        }
    }
    Ok(SpectralStats {
        count: mods.len(),
        mean_modulus: mean,
        second_moment: var,
        mean_square_modulus: mods.iter().map(|m| m * m).sum::<f64>() / n,
        max_modulus: mods.iter().copied().fold(0.0, f64::max),
        above_unit_circle: mods.iter().filter(|&&m| m > 1.0).count(),
        histogram: Histogram { edges: (0..=bins).map(|k| (k as f64 * spec.width).min(spec.max)).collect(), counts, overflow },
    })
}

/// Distinct eigenvalue angles (merged within `tol`), e.g. of the ideal
/// channel, marking where noisy clusters should sit.
pub fn cluster_angles(spectrum: &[c64], tol: f64) -> Vec<f64> {
    let mut angles: Vec<f64> = spectrum.iter().filter(|z| z.norm() > tol).map(|z| z.arg()).collect();
    angles.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for a in angles {
        if out.last().map_or(true, |&b| a - b > tol) {
            out.push(a);
        }
    }
    // -π and π are the same direction
    if out.len() > 1 && (out[0] + std::f64::consts::PI).abs() < tol && (out[out.len() - 1] - std::f64::consts::PI).abs() < tol {
        out.remove(0);
    }
    out
}
