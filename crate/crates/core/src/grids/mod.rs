//! Sphere pixelizations with isolatitude ring structure.
//!
//! Two grid families are supported: inclusive-pole equiangular lat/lon
//! grids and HEALPix grids (12 equal-area base tiles subdivided
//! nside x nside). Both expose their pixels as a list of colatitude rings,
//! each ring equally spaced in longitude, which is what lets the transform
//! module run one FFT per ring.

mod healpix;
mod latlon;
mod padding;

pub use healpix::HealpixGrid;
pub use latlon::{cell_area_weights, LatLonGrid};
pub use padding::PaddedTileGeometry;

use serde::{Deserialize, Serialize};

/// One isolatitude ring: every member pixel shares `colatitude` and the
/// pixels are equally spaced in longitude starting at `phi_0`.
///
/// `quadrature_weight` is the sin θ·Δθ·Δφ factor assigned to each pixel of
/// the ring, with sin θ·Δθ realized as the width of the ring's cos-colatitude
/// band so that ring areas sum to exactly 4π.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub colatitude: f64,
    pub count: usize,
    pub phi_0: f64,
    pub quadrature_weight: f64,
}

/// Pixel membership of one ring, ordered by increasing longitude.
pub enum RingPixels<'a> {
    /// Pixels `start..start + count` in grid-native order (lat/lon rows).
    Contiguous { start: usize, count: usize },
    /// Explicit indices into grid-native order (HEALPix).
    Indices(&'a [u32]),
}

impl RingPixels<'_> {
    pub fn len(&self) -> usize {
        match self {
            RingPixels::Contiguous { count, .. } => *count,
            RingPixels::Indices(ix) => ix.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel index of the k-th member (k in longitude order).
    #[inline]
    pub fn get(&self, k: usize) -> usize {
        match self {
            RingPixels::Contiguous { start, .. } => start + k,
            RingPixels::Indices(ix) => ix[k] as usize,
        }
    }
}

/// Either grid family, as carried by a [`crate::field::ScalarField`].
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    LatLon(LatLonGrid),
    Healpix(HealpixGrid),
}

impl Grid {
    pub fn n_pixels(&self) -> usize {
        match self {
            Grid::LatLon(g) => g.n_pixels(),
            Grid::Healpix(g) => g.n_pixels(),
        }
    }

    pub fn rings(&self) -> &[Ring] {
        match self {
            Grid::LatLon(g) => g.rings(),
            Grid::Healpix(g) => g.rings(),
        }
    }

    pub fn ring_pixels(&self, ring: usize) -> RingPixels<'_> {
        match self {
            Grid::LatLon(g) => g.ring_pixels(ring),
            Grid::Healpix(g) => g.ring_pixels(ring),
        }
    }

    /// Unique ring colatitudes in ring order (what a Legendre table needs).
    pub fn ring_colatitudes(&self) -> Vec<f64> {
        self.rings().iter().map(|r| r.colatitude).collect()
    }

    /// (θ, φ) of every pixel in grid-native order.
    pub fn pixel_centers(&self) -> Vec<(f64, f64)> {
        match self {
            Grid::LatLon(g) => g.pixel_centers(),
            Grid::Healpix(g) => g.pixel_centers().to_vec(),
        }
    }

    pub fn descriptor(&self) -> GridDescriptor {
        match self {
            Grid::LatLon(g) => GridDescriptor::Latlon {
                n_lat: g.n_lat(),
                n_lon: g.n_lon(),
            },
            Grid::Healpix(g) => GridDescriptor::Healpix {
                nside: g.nside(),
                pad: 0,
            },
        }
    }
}

/// JSON-serializable grid identity; geometry is regenerated on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridDescriptor {
    Latlon {
        n_lat: usize,
        n_lon: usize,
    },
    Healpix {
        nside: usize,
        #[serde(default)]
        pad: usize,
    },
}
