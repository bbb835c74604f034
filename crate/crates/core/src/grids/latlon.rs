//! Inclusive-pole equiangular latitude/longitude grids.

use super::{Ring, RingPixels};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Equiangular grid with colatitudes 0..π inclusive and longitudes
/// 0..2π exclusive, row-major storage (colatitude-major).
///
/// `area_weights` holds one per-pixel quadrature weight per row. The
/// weight is the exact area of the row's colatitude band divided by the
/// row's pixel count: band boundaries sit at colatitude midpoints, the
/// two polar caps are folded into the first and last non-pole rows, and
/// the pole rows themselves (sin θ = 0) carry exactly zero weight. Row
/// areas therefore sum to exactly 4π while interior rows stay exactly
/// proportional to sin θ.
#[derive(Debug, Clone, PartialEq)]
pub struct LatLonGrid {
    n_lat: usize,
    n_lon: usize,
    colatitudes: Vec<f64>,
    longitudes: Vec<f64>,
    area_weights: Vec<f64>,
    rings: Vec<Ring>,
}

impl LatLonGrid {
    pub fn build(n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat < 2 {
            return Err(Error::domain("lat/lon grid needs n_lat >= 2"));
        }
        if n_lon < 1 {
            return Err(Error::domain("lat/lon grid needs n_lon >= 1"));
        }
        let colatitudes: Vec<f64> = (0..n_lat)
            .map(|i| PI * i as f64 / (n_lat - 1) as f64)
            .collect();
        let longitudes: Vec<f64> = (0..n_lon)
            .map(|j| 2.0 * PI * j as f64 / n_lon as f64)
            .collect();
        let delta_phi = 2.0 * PI / n_lon as f64;

        // cos of colatitude-midpoint band boundaries; caps extended to z=±1.
        let mut area_weights = vec![0.0; n_lat];
        if n_lat > 2 {
            for i in 1..n_lat - 1 {
                let upper = if i == 1 {
                    1.0
                } else {
                    ((colatitudes[i - 1] + colatitudes[i]) / 2.0).cos()
                };
                let lower = if i == n_lat - 2 {
                    -1.0
                } else {
                    ((colatitudes[i] + colatitudes[i + 1]) / 2.0).cos()
                };
                area_weights[i] = (upper - lower) * delta_phi;
            }
        }

        let rings = colatitudes
            .iter()
            .zip(area_weights.iter())
            .map(|(&theta, &w)| Ring {
                colatitude: theta,
                count: n_lon,
                phi_0: 0.0,
                quadrature_weight: w,
            })
            .collect();

        Ok(LatLonGrid {
            n_lat,
            n_lon,
            colatitudes,
            longitudes,
            area_weights,
            rings,
        })
    }

    pub fn n_lat(&self) -> usize {
        self.n_lat
    }

    pub fn n_lon(&self) -> usize {
        self.n_lon
    }

    pub fn n_pixels(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn colatitudes(&self) -> &[f64] {
        &self.colatitudes
    }

    pub fn longitudes(&self) -> &[f64] {
        &self.longitudes
    }

    /// Per-row quadrature weight (one value per pixel of that row).
    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn ring_pixels(&self, ring: usize) -> RingPixels<'_> {
        RingPixels::Contiguous {
            start: ring * self.n_lon,
            count: self.n_lon,
        }
    }

    /// (θ, φ) per pixel, row-major.
    pub fn pixel_centers(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_pixels());
        for &theta in &self.colatitudes {
            for &phi in &self.longitudes {
                out.push((theta, phi));
            }
        }
        out
    }

    /// Per-cell metric weights proportional to sin θ, normalized so the
    /// whole grid sums to 1 (one value per pixel, row-major expansion of
    /// the per-row weight).
    pub fn cell_weights_normalized(&self) -> Vec<f64> {
        let row = cell_area_weights(self);
        let mut out = Vec::with_capacity(self.n_pixels());
        for &w in &row {
            out.extend(std::iter::repeat_n(w, self.n_lon));
        }
        out
    }
}

/// Per-row metric weights a_i ∝ sin(colatitude_i), normalized so that the
/// sum over all grid cells (each row counted n_lon times) equals 1.
///
/// Pole rows get exactly zero. These are the weights of the area-weighted
/// error metrics, separate from the transform quadrature weights.
pub fn cell_area_weights(grid: &LatLonGrid) -> Vec<f64> {
    let sines: Vec<f64> = grid
        .colatitudes
        .iter()
        .map(|&theta| {
            if theta == 0.0 || theta == PI {
                0.0
            } else {
                theta.sin()
            }
        })
        .collect();
    let total: f64 = sines.iter().sum::<f64>() * grid.n_lon as f64;
    sines.iter().map(|&s| s / total).collect()
}
