//! Field movement between lat/lon and HEALPix representations.
//!
//! Forward: bilinear interpolation in (cos θ, φ) — cos θ rather than θ, so
//! the interpolation weights track cell areas near the poles — samples the
//! lat/lon field at HEALPix pixel centers, or at every cell of the padded
//! overset tiles. Overlapping padded tiles are stitched back into a single
//! HEALPix field by blend-weighted averaging. Backward: spherical harmonic
//! analysis of the HEALPix field followed by synthesis on the lat/lon grid
//! (one inverse FFT per output row).

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grids::{Grid, LatLonGrid, PaddedTileGeometry};
use crate::legendre::LegendreTable;
use crate::sht;
use rayon::prelude::*;
use std::sync::Arc;

/// Bilinear sampler over a lat/lon field in (cos θ, φ) coordinates with
/// longitude wrap-around.
struct BilinearSampler<'a> {
    values: &'a [f64],
    cos_colat: Vec<f64>,
    n_lon: usize,
    delta_phi: f64,
}

impl<'a> BilinearSampler<'a> {
    fn new(field: &'a ScalarField) -> Result<Self> {
        let grid = match field.grid.as_ref() {
            Grid::LatLon(g) => g,
            _ => return Err(Error::mismatch("bilinear source must be a lat/lon field")),
        };
        // Type invariant: colatitudes run 0..π inclusive, so cos spans the
        // full [-1, 1] range and every target is bracketed.
        let cos_colat: Vec<f64> = grid.colatitudes().iter().map(|&t| t.cos()).collect();
        Ok(BilinearSampler {
            values: &field.values,
            cos_colat,
            n_lon: grid.n_lon(),
            delta_phi: 2.0 * std::f64::consts::PI / grid.n_lon() as f64,
        })
    }

    fn sample(&self, theta: f64, phi: f64) -> f64 {
        let z = theta.cos();
        // cos_colat decreases; find the bracketing row pair.
        let idx = self.cos_colat.partition_point(|&c| c > z);
        let (i0, i1) = if idx == 0 {
            (0, 1)
        } else if idx >= self.cos_colat.len() {
            (self.cos_colat.len() - 2, self.cos_colat.len() - 1)
        } else {
            (idx - 1, idx)
        };
        let span = self.cos_colat[i0] - self.cos_colat[i1];
        let u = ((self.cos_colat[i0] - z) / span).clamp(0.0, 1.0);

        let x = phi.rem_euclid(2.0 * std::f64::consts::PI) / self.delta_phi;
        let j0 = (x as usize).min(self.n_lon - 1);
        let v = x - j0 as f64;
        let j1 = (j0 + 1) % self.n_lon;

        let row0 = &self.values[i0 * self.n_lon..(i0 + 1) * self.n_lon];
        let row1 = &self.values[i1 * self.n_lon..(i1 + 1) * self.n_lon];
        // Lerp form reproduces constants exactly.
        let top = row0[j0] + v * (row0[j1] - row0[j0]);
        let bottom = row1[j0] + v * (row1[j1] - row1[j0]);
        top + u * (bottom - top)
    }
}

/// Project a lat/lon field onto a HEALPix grid by bilinear sampling at the
/// pixel centers.
pub fn latlon_to_healpix(field: &ScalarField, grid: &Arc<Grid>) -> Result<ScalarField> {
    let hp = match grid.as_ref() {
        Grid::Healpix(h) => h,
        _ => return Err(Error::mismatch("projection target must be a HEALPix grid")),
    };
    let sampler = BilinearSampler::new(field)?;
    let values: Vec<f64> = hp
        .pixel_centers()
        .par_iter()
        .map(|&(theta, phi)| sampler.sample(theta, phi))
        .collect();
    ScalarField::from_computation(grid.clone(), values, field.units.clone())
}

/// Sample a lat/lon field at every cell of the 12 padded tiles.
///
/// The central t x t block of each tile is sampled at the exact pixel
/// centers, so it coincides with [`latlon_to_healpix`] restricted to the
/// tile.
pub fn sample_padded_tiles(
    field: &ScalarField,
    geom: &PaddedTileGeometry,
) -> Result<Vec<Vec<f64>>> {
    let sampler = BilinearSampler::new(field)?;
    let side = geom.side();
    Ok((0..12usize)
        .into_par_iter()
        .map(|tile| {
            let angles = geom.angles(tile);
            (0..side * side)
                .map(|i| sampler.sample(angles[i].0, angles[i].1))
                .collect()
        })
        .collect())
}

/// Stitch 12 padded tiles into one HEALPix field by blend-weighted
/// averaging.
///
/// Every pixel receives its own tile's central value with weight 1, plus
/// one contribution from each neighboring tile whose padded margin covers
/// it: the margin cell that falls inside the pixel (nearest cell when
/// several do), weighted by that cell's blend weight. The output is a
/// convex combination, so blended values stay inside the contributing
/// range.
pub fn blend_padded_tiles(tiles: &[Vec<f64>], geom: &PaddedTileGeometry) -> Result<ScalarField> {
    let side = geom.side();
    let t = geom.tile_size();
    let pad = geom.pad();
    if tiles.len() != 12 || tiles.iter().any(|x| x.len() != side * side) {
        return Err(Error::shape(format!(
            "expected 12 tiles of {side}x{side} values"
        )));
    }
    let hp = geom.healpix();
    let weights_grid = geom.blend_weights();

    // Own-tile contribution: the central block, weight 1.
    let mut sum = vec![0.0f64; hp.n_pixels()];
    let mut weight = vec![0.0f64; hp.n_pixels()];
    for tile in 0..12 {
        for row in 0..t {
            for col in 0..t {
                let p = hp.pixel_index(tile, row, col);
                sum[p] = tiles[tile][(pad + row) * side + (pad + col)];
                weight[p] = 1.0;
            }
        }
    }

    // Margin contributions, resolved per (source tile, covered pixel) to
    // the angularly nearest margin cell. Tiles are scanned in parallel and
    // merged in tile order, so the reduction is deterministic.
    struct Contribution {
        pixel: u32,
        dot: f64,
        weight: f64,
        value: f64,
    }
    let per_tile: Vec<Vec<Contribution>> = (0..12usize)
        .into_par_iter()
        .map(|tile| {
            let angles = geom.angles(tile);
            let coords = geom.coords(tile);
            let mut best: std::collections::HashMap<u32, Contribution> =
                std::collections::HashMap::new();
            for r in 0..side {
                for c in 0..side {
                    if geom.margin_depth(r, c) == 0 {
                        continue;
                    }
                    let i = r * side + c;
                    let (theta, phi) = angles[i];
                    let q = hp.ang_to_pixel(theta, phi);
                    if q / (t * t) == tile {
                        continue; // margin folding back onto its own tile
                    }
                    let qv = hp.pixel_unit_vector(q);
                    let cv = coords[i];
                    let d = qv[0] * cv[0] + qv[1] * cv[1] + qv[2] * cv[2];
                    let cand = Contribution {
                        pixel: q as u32,
                        dot: d,
                        weight: weights_grid[i],
                        value: tiles[tile][i],
                    };
                    match best.get(&(q as u32)) {
                        Some(prev) if prev.dot >= d => {}
                        _ => {
                            best.insert(q as u32, cand);
                        }
                    }
                }
            }
            let mut list: Vec<Contribution> = best.into_values().collect();
            list.sort_unstable_by_key(|c| c.pixel);
            list
        })
        .collect();

    for list in per_tile {
        for c in list {
            sum[c.pixel as usize] += c.weight * c.value;
            weight[c.pixel as usize] += c.weight;
        }
    }

    let values: Vec<f64> = sum
        .iter()
        .zip(weight.iter())
        .map(|(&s, &w)| {
            assert!(w > 0.0, "pixel received zero blend weight");
            s / w
        })
        .collect();
    ScalarField::from_computation(geom.grid().clone(), values, "")
}

/// Validate reprojection degree bounds: l_max ≤ 2·nside (quadrature
/// sanity, overridable) and l_max ≤ n_lon/2 − 1 (synthesis Nyquist,
/// always enforced).
pub fn check_reprojection_bounds(
    nside: usize,
    l_max: usize,
    n_lon: usize,
    allow_lmax_above_quadrature: bool,
) -> Result<()> {
    if l_max > 2 * nside && !allow_lmax_above_quadrature {
        return Err(Error::domain(format!(
            "l_max {l_max} exceeds quadrature sanity bound 2*nside = {} (override to force)",
            2 * nside
        )));
    }
    if l_max + 1 > n_lon / 2 {
        return Err(Error::domain(format!(
            "l_max {l_max} exceeds synthesis Nyquist (n_lon/2 - 1 = {})",
            n_lon / 2 - 1
        )));
    }
    Ok(())
}

/// Reproject a HEALPix field onto a lat/lon grid through spherical
/// harmonics: analyze, then synthesize row by row.
pub fn healpix_to_latlon(
    field: &ScalarField,
    l_max: usize,
    n_lat: usize,
    n_lon: usize,
    allow_lmax_above_quadrature: bool,
) -> Result<ScalarField> {
    let hp = match field.grid.as_ref() {
        Grid::Healpix(h) => h,
        _ => return Err(Error::mismatch("reprojection source must be HEALPix")),
    };
    check_reprojection_bounds(hp.nside(), l_max, n_lon, allow_lmax_above_quadrature)?;
    let hp_table = LegendreTable::build(l_max, &field.grid.ring_colatitudes())?;
    let coeffs = sht::analyze(field, l_max, &hp_table)?;

    let out_grid = Arc::new(Grid::LatLon(LatLonGrid::build(n_lat, n_lon)?));
    let out_table = LegendreTable::build(l_max, &out_grid.ring_colatitudes())?;
    let mut out = sht::synthesize(&coeffs, &out_grid, &out_table)?;
    out.units = field.units.clone();
    Ok(out)
}

/// Largest |difference| across angularly adjacent pixel pairs that span a
/// tile boundary: the seam-discontinuity diagnostic.
pub fn max_cross_tile_seam_jump(field: &ScalarField) -> Result<f64> {
    let hp = match field.grid.as_ref() {
        Grid::Healpix(h) => h,
        _ => return Err(Error::mismatch("seam metric needs a HEALPix field")),
    };
    Ok(hp
        .cross_tile_adjacent_pairs()
        .into_iter()
        .map(|(a, b)| (field.values[a] - field.values[b]).abs())
        .fold(0.0, f64::max))
}
