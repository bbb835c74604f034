//! Overset padding geometry for HEALPix tiles.
//!
//! Each nside x nside tile is extended by `pad` pixels on every side, so a
//! 256-pixel tile with pad 16 becomes a 288 x 288 grid. There is no closed
//! form for the padded coordinates: the tile's pixel-center unit vectors
//! are continued linearly in Cartesian space beyond each edge (rows first,
//! then columns, which also fills the corner blocks bilinearly) and
//! renormalized onto the sphere. Blend weights are 1 on the central block
//! and decay linearly with margin depth k to 1/(pad+1) on the outermost
//! ring, so overlapping-tile weight sums never vanish.

use super::healpix::{unit_vector, HealpixGrid};
use super::Grid;
use crate::error::{Error, Result};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct PaddedTileGeometry {
    grid: Arc<Grid>,
    pad: usize,
    /// Unit-sphere position of every padded cell, tile-major row-major;
    /// side = nside + 2 pad.
    coords: Vec<[f64; 3]>,
    /// (θ, φ) of every padded cell. Central cells carry the exact grid
    /// pixel centers; margin cells are derived from the extrapolated
    /// coordinates.
    angles: Vec<(f64, f64)>,
    /// Blend weight per (row, col) of a padded tile, shared by all tiles.
    blend_weights: Vec<f64>,
}

impl PaddedTileGeometry {
    pub fn build(grid: Arc<Grid>, pad: usize) -> Result<Self> {
        let hp = match grid.as_ref() {
            Grid::Healpix(h) => h,
            Grid::LatLon(_) => {
                return Err(Error::mismatch("padded tile geometry needs a HEALPix grid"))
            }
        };
        let t = hp.nside();
        if pad >= t {
            return Err(Error::domain(format!(
                "pad {pad} must be smaller than nside {t}"
            )));
        }
        let side = t + 2 * pad;
        let mut coords = vec![[0.0f64; 3]; 12 * side * side];
        let mut angles = vec![(0.0f64, 0.0f64); 12 * side * side];

        for tile in 0..12 {
            let base = tile * side * side;
            let at = |r: usize, c: usize| base + r * side + c;

            for row in 0..t {
                for col in 0..t {
                    let p = hp.pixel_index(tile, row, col);
                    let (theta, phi) = hp.pixel_centers()[p];
                    coords[at(pad + row, pad + col)] = unit_vector(theta, phi);
                    angles[at(pad + row, pad + col)] = (theta, phi);
                }
            }
            if pad > 0 {
                // Continue each central row outward, then every column of
                // the widened array; corners are filled by the column pass.
                for r in pad..pad + t {
                    for k in 1..=pad {
                        coords[at(r, pad - k)] =
                            extrapolate(coords[at(r, pad)], coords[at(r, pad + 1)], k);
                        coords[at(r, pad + t - 1 + k)] =
                            extrapolate(coords[at(r, pad + t - 1)], coords[at(r, pad + t - 2)], k);
                    }
                }
                for c in 0..side {
                    for k in 1..=pad {
                        coords[at(pad - k, c)] =
                            extrapolate(coords[at(pad, c)], coords[at(pad + 1, c)], k);
                        coords[at(pad + t - 1 + k, c)] =
                            extrapolate(coords[at(pad + t - 1, c)], coords[at(pad + t - 2, c)], k);
                    }
                }
                for r in 0..side {
                    for c in 0..side {
                        let margin = r < pad || c < pad || r >= pad + t || c >= pad + t;
                        if margin {
                            let v = normalize(coords[at(r, c)]);
                            coords[at(r, c)] = v;
                            let theta = v[2].clamp(-1.0, 1.0).acos();
                            let phi = v[1].atan2(v[0]).rem_euclid(2.0 * std::f64::consts::PI);
                            angles[at(r, c)] = (theta, phi);
                        }
                    }
                }
            }
        }

        let mut blend_weights = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                blend_weights[r * side + c] = blend_weight(t, pad, r, c);
            }
        }

        Ok(PaddedTileGeometry {
            grid,
            pad,
            coords,
            angles,
            blend_weights,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// The HEALPix view of the grid (construction guarantees the variant).
    pub fn healpix(&self) -> &HealpixGrid {
        match self.grid.as_ref() {
            Grid::Healpix(h) => h,
            Grid::LatLon(_) => unreachable!("geometry is always built on HEALPix"),
        }
    }

    pub fn tile_size(&self) -> usize {
        self.healpix().nside()
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Side length of a padded tile: nside + 2 pad.
    pub fn side(&self) -> usize {
        self.tile_size() + 2 * self.pad
    }

    pub fn coords(&self, tile: usize) -> &[[f64; 3]] {
        let n = self.side() * self.side();
        &self.coords[tile * n..(tile + 1) * n]
    }

    pub fn angles(&self, tile: usize) -> &[(f64, f64)] {
        let n = self.side() * self.side();
        &self.angles[tile * n..(tile + 1) * n]
    }

    /// Blend weight at padded-cell (row, col); identical for all tiles.
    pub fn blend_weights(&self) -> &[f64] {
        &self.blend_weights
    }

    /// Margin depth of a padded cell: 0 on the central block, k on the
    /// k-th padding ring (Chebyshev distance past the block edge).
    pub fn margin_depth(&self, row: usize, col: usize) -> usize {
        margin_depth(self.tile_size(), self.pad, row, col)
    }
}

fn extrapolate(edge: [f64; 3], inner: [f64; 3], k: usize) -> [f64; 3] {
    let k = k as f64;
    [
        edge[0] + k * (edge[0] - inner[0]),
        edge[1] + k * (edge[1] - inner[1]),
        edge[2] + k * (edge[2] - inner[2]),
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn margin_depth(t: usize, pad: usize, row: usize, col: usize) -> usize {
    let d = |i: usize| -> usize {
        if i < pad {
            pad - i
        } else if i >= pad + t {
            i - (pad + t - 1)
        } else {
            0
        }
    };
    d(row).max(d(col))
}

fn blend_weight(t: usize, pad: usize, row: usize, col: usize) -> f64 {
    let k = margin_depth(t, pad, row, col);
    if k == 0 {
        1.0
    } else {
        (pad + 1 - k) as f64 / (pad + 1) as f64
    }
}
