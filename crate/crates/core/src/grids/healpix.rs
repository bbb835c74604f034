//! HEALPix grids in the ring-structured, tile-addressed form the pipeline
//! uses.
//!
//! Geometry follows the standard Górski ring-scheme closed forms:
//! north polar cap rings i = 1..nside−1 at z = 1 − i²/(3 nside²) with 4i
//! pixels offset by π/(4i); equatorial belt rings i = nside..3 nside at
//! z = 2(2 nside − i)/(3 nside) with 4 nside pixels and alternating
//! half-pixel offsets; south cap mirrored. Pixel values are stored
//! (tile, row, col) row-major — the same layout the binary field container
//! uses for {12, t, t} tile stacks — and each ring records its member pixel
//! indices in increasing-longitude order.

use super::{Ring, RingPixels};
use crate::error::{Error, Result};
use std::f64::consts::{FRAC_PI_2, PI};

/// Ring index (from the north, 1-based) of the southernmost corner of each
/// base tile, in units of nside.
const JRLL: [i64; 12] = [2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4];
/// Longitude phase of each base tile in units of π/4.
const JPLL: [i64; 12] = [1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7];

#[derive(Debug, Clone, PartialEq)]
pub struct HealpixGrid {
    nside: usize,
    rings: Vec<Ring>,
    ring_members: Vec<Vec<u32>>,
    /// (θ, φ) per pixel, (tile, row, col) row-major.
    pixel_centers: Vec<(f64, f64)>,
    /// Pixel index → ring index.
    pixel_ring: Vec<u32>,
}

impl HealpixGrid {
    pub fn build(nside: usize) -> Result<Self> {
        if nside == 0 || !nside.is_power_of_two() {
            return Err(Error::domain(format!(
                "nside must be a power of two, got {nside}"
            )));
        }
        let n_rings = 4 * nside - 1;
        let z: Vec<f64> = (1..=n_rings).map(|jr| ring_z(nside, jr)).collect();

        // Ring structure from the closed forms.
        let mut rings = Vec::with_capacity(n_rings);
        for jr in 1..=n_rings {
            let count = ring_count(nside, jr);
            let kshift = ring_kshift(nside, jr);
            let nr = count / 4;
            let phi_0 = if kshift == 0 {
                PI / (4.0 * nr as f64)
            } else {
                0.0
            };
            rings.push(Ring {
                colatitude: z[jr - 1].acos(),
                count,
                phi_0,
                quadrature_weight: 0.0,
            });
        }

        // Quadrature: each ring owns its true cos-colatitude band — the one
        // bounded by the actual pixel boundaries, whose center is exactly
        // the ring's z — so sin θ·Δθ is the band width Δz, the per-pixel
        // weight is exactly the pixel area 4π/n_pix, and ring areas sum to
        // exactly 4π.
        let pixel_area = 4.0 * PI / (12 * nside * nside) as f64;
        for r in rings.iter_mut() {
            r.quadrature_weight = pixel_area;
        }

        // Pixel centers and ring membership from the tile coordinates.
        let n_pix = 12 * nside * nside;
        let mut pixel_centers = vec![(0.0, 0.0); n_pix];
        let mut pixel_ring = vec![0u32; n_pix];
        let mut slots: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_rings];
        for (jr, slot) in slots.iter_mut().enumerate() {
            slot.reserve(ring_count(nside, jr + 1));
        }
        for tile in 0..12 {
            for row in 0..nside {
                for col in 0..nside {
                    let p = (tile * nside + row) * nside + col;
                    let (jr, jp) = tile_to_ring(nside, tile, col, row);
                    let ring = &rings[jr - 1];
                    let pos = jp - 1;
                    let phi = ring.phi_0 + pos as f64 * (2.0 * PI / ring.count as f64);
                    pixel_centers[p] = (ring.colatitude, phi);
                    pixel_ring[p] = (jr - 1) as u32;
                    slots[jr - 1].push((pos as u32, p as u32));
                }
            }
        }
        let mut ring_members = Vec::with_capacity(n_rings);
        for (jr, mut slot) in slots.into_iter().enumerate() {
            debug_assert_eq!(slot.len(), ring_count(nside, jr + 1));
            slot.sort_unstable();
            ring_members.push(slot.into_iter().map(|(_, p)| p).collect());
        }

        Ok(HealpixGrid {
            nside,
            rings,
            ring_members,
            pixel_centers,
            pixel_ring,
        })
    }

    pub fn nside(&self) -> usize {
        self.nside
    }

    pub fn n_pixels(&self) -> usize {
        12 * self.nside * self.nside
    }

    pub fn n_rings(&self) -> usize {
        self.rings.len()
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn ring_pixels(&self, ring: usize) -> RingPixels<'_> {
        RingPixels::Indices(&self.ring_members[ring])
    }

    pub fn pixel_centers(&self) -> &[(f64, f64)] {
        &self.pixel_centers
    }

    /// Ring index of a pixel.
    pub fn pixel_ring(&self, pixel: usize) -> usize {
        self.pixel_ring[pixel] as usize
    }

    /// Grid-native index of tile-local (row, col).
    #[inline]
    pub fn pixel_index(&self, tile: usize, row: usize, col: usize) -> usize {
        (tile * self.nside + row) * self.nside + col
    }

    /// Pixel containing the direction (θ, φ).
    ///
    /// Standard ring-scheme point location; used to resolve which pixel a
    /// padded-tile margin cell falls into when blending.
    pub fn ang_to_pixel(&self, theta: f64, phi: f64) -> usize {
        let nside = self.nside as i64;
        let z = theta.cos();
        let za = z.abs();
        let phi = phi.rem_euclid(2.0 * PI);
        let tt = phi / FRAC_PI_2; // in [0, 4)

        let (jr, pos) = if za <= 2.0 / 3.0 {
            let temp1 = nside as f64 * (0.5 + tt);
            let temp2 = nside as f64 * z * 0.75;
            let jp = (temp1 - temp2) as i64;
            let jm = (temp1 + temp2) as i64;
            let ir = nside + 1 + jp - jm; // in 1..=2 nside+1
            let kshift = 1 - (ir & 1);
            let ip = ((jp + jm - nside + kshift + 1) / 2).rem_euclid(4 * nside);
            ((ir + nside - 1) as usize, ip as usize)
        } else {
            let tp = tt.fract();
            let tmp = nside as f64 * (3.0 * (1.0 - za)).sqrt();
            let jp = (tp * tmp) as i64;
            let jm = ((1.0 - tp) * tmp) as i64;
            let ir = (jp + jm + 1).min(nside); // ring counted from nearest pole
            let ip = ((tt * ir as f64) as i64).rem_euclid(4 * ir);
            if z > 0.0 {
                (ir as usize, ip as usize)
            } else {
                ((4 * nside - ir) as usize, ip as usize)
            }
        };
        self.ring_members[jr - 1][pos] as usize
    }

    /// Unit vector of a pixel center.
    pub fn pixel_unit_vector(&self, pixel: usize) -> [f64; 3] {
        let (theta, phi) = self.pixel_centers[pixel];
        unit_vector(theta, phi)
    }

    /// Pairs of angularly adjacent pixels that live in different tiles.
    ///
    /// For every pixel on a tile border, the nearest pixel of any other
    /// tile is found by brute force over all border pixels; each unordered
    /// pair is reported once. Used by the seam-discontinuity diagnostics.
    pub fn cross_tile_adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let t = self.nside;
        let mut border = Vec::new();
        for tile in 0..12 {
            for row in 0..t {
                for col in 0..t {
                    if row == 0 || col == 0 || row == t - 1 || col == t - 1 {
                        border.push(self.pixel_index(tile, row, col));
                    }
                }
            }
        }
        let vecs: Vec<[f64; 3]> = border.iter().map(|&p| self.pixel_unit_vector(p)).collect();
        let tile_of = |p: usize| p / (t * t);

        let mut pairs = Vec::new();
        for (i, &p) in border.iter().enumerate() {
            let mut best = usize::MAX;
            let mut best_dot = f64::MIN;
            for (j, &q) in border.iter().enumerate() {
                if tile_of(p) == tile_of(q) {
                    continue;
                }
                let d = dot(vecs[i], vecs[j]);
                if d > best_dot {
                    best_dot = d;
                    best = q;
                }
            }
            if best != usize::MAX {
                pairs.push((p.min(best), p.max(best)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    let s = theta.sin();
    [s * phi.cos(), s * phi.sin(), theta.cos()]
}

/// z = cos(colatitude) of ring `jr` (1-based from the north pole).
fn ring_z(nside: usize, jr: usize) -> f64 {
    let n = nside as f64;
    if jr < nside {
        1.0 - (jr * jr) as f64 / (3.0 * n * n)
    } else if jr <= 3 * nside {
        2.0 * (2.0 * n - jr as f64) / (3.0 * n)
    } else {
        let i = 4 * nside - jr;
        -(1.0 - (i * i) as f64 / (3.0 * n * n))
    }
}

fn ring_count(nside: usize, jr: usize) -> usize {
    if jr < nside {
        4 * jr
    } else if jr <= 3 * nside {
        4 * nside
    } else {
        4 * (4 * nside - jr)
    }
}

/// 0 when the ring's first pixel sits half a spacing off φ = 0, 1 when a
/// pixel sits exactly on the tile meridian (belt rings alternate).
fn ring_kshift(nside: usize, jr: usize) -> usize {
    if jr < nside || jr > 3 * nside {
        0
    } else {
        (jr - nside) & 1
    }
}

/// Ring index jr (1-based from north) and in-ring position jp (1-based in
/// longitude order) of tile-local (x, y), x running toward the tile's
/// east corner and y toward its west; the tile anti-diagonals x + y = const
/// are exactly the isolatitude sets.
fn tile_to_ring(nside: usize, tile: usize, x: usize, y: usize) -> (usize, usize) {
    let ns = nside as i64;
    let (x, y) = (x as i64, y as i64);
    let jr = JRLL[tile] * ns - x - y - 1;

    let (nr, kshift) = if jr < ns {
        (jr, 0)
    } else if jr > 3 * ns {
        (4 * ns - jr, 0)
    } else {
        (ns, (jr - ns) & 1)
    };

    // Numerator is always even (tile parity argument), so /2 is exact.
    let mut jp = (JPLL[tile] * nr + x - y + 1 + kshift) / 2;
    if jp > 4 * nr {
        jp -= 4 * nr;
    }
    if jp < 1 {
        jp += 4 * nr;
    }
    (jr as usize, jp as usize)
}
