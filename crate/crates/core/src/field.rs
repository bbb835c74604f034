//! Scalar fields bound to a grid, and the binary field container.
//!
//! The container layout is
//! `FLD1 | rank: u32 | dims: u32 x rank | dtype: u32 | grid_tag: u32 |
//!  meta_len: u32 | meta: UTF-8 JSON | payload`, payload row-major
//! little-endian. dtype 0 = f32, 1 = f64; grid_tag 0 = latlon,
//! 1 = healpix, 2 = healpix_padded. NaN payloads are rejected on load.

use crate::error::{Error, Result};
use crate::grids::{Grid, GridDescriptor, HealpixGrid, LatLonGrid};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// One real-valued variable sampled on a grid, values in grid-native order
/// (row-major for lat/lon, (tile, row, col) row-major for HEALPix).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub units: String,
}

impl ScalarField {
    /// Bind values to a grid, rejecting count mismatches and non-finite
    /// samples.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, units: impl Into<String>) -> Result<Self> {
        if values.len() != grid.n_pixels() {
            return Err(Error::shape(format!(
                "{} values for a grid of {} pixels",
                values.len(),
                grid.n_pixels()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite sample in field"));
        }
        Ok(ScalarField {
            grid,
            values,
            units: units.into(),
        })
    }

    /// Bind values produced by a computation. Shape errors are still
    /// shape errors, but a non-finite sample here is a numeric-contract
    /// violation (the pipeline generated it), not bad input data.
    pub fn from_computation(
        grid: Arc<Grid>,
        values: Vec<f64>,
        units: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != grid.n_pixels() {
            return Err(Error::shape(format!(
                "{} values for a grid of {} pixels",
                values.len(),
                grid.n_pixels()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericContract("non-finite value produced".into()));
        }
        Ok(ScalarField {
            grid,
            values,
            units: units.into(),
        })
    }

    pub fn constant(grid: Arc<Grid>, value: f64, units: impl Into<String>) -> Result<Self> {
        let n = grid.n_pixels();
        Self::new(grid, vec![value; n], units)
    }
}

/// Numeric type of a container payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn tag(self) -> u32 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(Error::Format(format!("unknown dtype tag {other}"))),
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Grid family tag carried in the container header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridTag {
    Latlon,
    Healpix,
    HealpixPadded,
}

impl GridTag {
    fn tag(self) -> u32 {
        match self {
            GridTag::Latlon => 0,
            GridTag::Healpix => 1,
            GridTag::HealpixPadded => 2,
        }
    }

    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(GridTag::Latlon),
            1 => Ok(GridTag::Healpix),
            2 => Ok(GridTag::HealpixPadded),
            other => Err(Error::Format(format!("unknown grid tag {other}"))),
        }
    }
}

/// In-memory form of a field container file.
#[derive(Debug, Clone)]
pub struct FieldContainer {
    pub dims: Vec<usize>,
    pub dtype: Dtype,
    pub grid_tag: GridTag,
    pub meta: FieldMeta,
    /// Row-major payload, widened to f64 in memory for f32 files.
    pub values: Vec<f64>,
}

/// JSON metadata block. `grid` makes a file self-describing; `extra`
/// carries free-form caller data (seeds, variable names, levels).
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct FieldMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDescriptor>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub units: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl FieldContainer {
    pub fn n_values(&self) -> usize {
        self.dims.iter().product()
    }

    /// Wrap a lat/lon field, payload shape {n_lat, n_lon}.
    pub fn from_latlon_field(field: &ScalarField, dtype: Dtype) -> Result<Self> {
        let grid = match field.grid.as_ref() {
            Grid::LatLon(g) => g,
            _ => return Err(Error::mismatch("field is not on a lat/lon grid")),
        };
        Ok(FieldContainer {
            dims: vec![grid.n_lat(), grid.n_lon()],
            dtype,
            grid_tag: GridTag::Latlon,
            meta: FieldMeta {
                grid: Some(field.grid.descriptor()),
                units: field.units.clone(),
                extra: Default::default(),
            },
            values: round_trip_dtype(&field.values, dtype),
        })
    }

    /// Wrap a HEALPix field as a {12, t, t} tile stack.
    pub fn from_healpix_field(field: &ScalarField, dtype: Dtype) -> Result<Self> {
        let grid = match field.grid.as_ref() {
            Grid::Healpix(g) => g,
            _ => return Err(Error::mismatch("field is not on a HEALPix grid")),
        };
        let t = grid.nside();
        Ok(FieldContainer {
            dims: vec![12, t, t],
            dtype,
            grid_tag: GridTag::Healpix,
            meta: FieldMeta {
                grid: Some(GridDescriptor::Healpix { nside: t, pad: 0 }),
                units: field.units.clone(),
                extra: Default::default(),
            },
            values: round_trip_dtype(&field.values, dtype),
        })
    }

    /// Wrap padded tile arrays as a {12, side, side} stack.
    pub fn from_padded_tiles(
        tiles: &[Vec<f64>],
        nside: usize,
        pad: usize,
        units: &str,
        dtype: Dtype,
    ) -> Result<Self> {
        let side = nside + 2 * pad;
        if tiles.len() != 12 || tiles.iter().any(|t| t.len() != side * side) {
            return Err(Error::shape("expected 12 padded tiles of side^2 values"));
        }
        let mut values = Vec::with_capacity(12 * side * side);
        for tile in tiles {
            values.extend_from_slice(tile);
        }
        Ok(FieldContainer {
            dims: vec![12, side, side],
            dtype,
            grid_tag: GridTag::HealpixPadded,
            meta: FieldMeta {
                grid: Some(GridDescriptor::Healpix { nside, pad }),
                units: units.to_string(),
                extra: Default::default(),
            },
            values: round_trip_dtype(&values, dtype),
        })
    }

    /// Rebuild the grid object this container describes and bind the
    /// payload as a [`ScalarField`]. Errors on padded stacks (those are
    /// tile arrays, not sphere-covering fields).
    pub fn to_field(&self) -> Result<ScalarField> {
        match self.grid_tag {
            GridTag::Latlon => {
                let (n_lat, n_lon) = match self.dims.as_slice() {
                    [a, b] => (*a, *b),
                    _ => return Err(Error::Format("lat/lon container must be rank 2".into())),
                };
                let grid = Arc::new(Grid::LatLon(LatLonGrid::build(n_lat, n_lon)?));
                ScalarField::new(grid, self.values.clone(), self.meta.units.clone())
            }
            GridTag::Healpix => {
                let t = match self.dims.as_slice() {
                    [12, a, b] if a == b => *a,
                    _ => {
                        return Err(Error::Format(
                            "HEALPix container must have shape {12, t, t}".into(),
                        ))
                    }
                };
                let grid = Arc::new(Grid::Healpix(HealpixGrid::build(t)?));
                ScalarField::new(grid, self.values.clone(), self.meta.units.clone())
            }
            GridTag::HealpixPadded => Err(Error::mismatch(
                "padded tile stack is not a sphere-covering field",
            )),
        }
    }

    /// Split a {12, side, side} stack into per-tile vectors.
    pub fn to_padded_tiles(&self) -> Result<Vec<Vec<f64>>> {
        if self.grid_tag != GridTag::HealpixPadded {
            return Err(Error::mismatch("container is not a padded tile stack"));
        }
        let side = match self.dims.as_slice() {
            [12, a, b] if a == b => *a,
            _ => return Err(Error::Format("padded stack must be {12, s, s}".into())),
        };
        Ok(self
            .values
            .chunks(side * side)
            .map(|c| c.to_vec())
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if self.values.len() != self.n_values() {
            return Err(Error::shape(format!(
                "payload has {} values, dims promise {}",
                self.values.len(),
                self.n_values()
            )));
        }
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| Error::Format(format!("meta serialization: {e}")))?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"FLD1")?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&self.dtype.tag().to_le_bytes())?;
        w.write_all(&self.grid_tag.tag().to_le_bytes())?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;
        match self.dtype {
            Dtype::F32 => {
                for &v in &self.values {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
            }
            Dtype::F64 => {
                for &v in &self.values {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"FLD1" {
            return Err(Error::Format("not a FLD1 field container".into()));
        }
        let rank = read_u32(&mut r)? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::Format(format!("implausible rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(&mut r)? as usize);
        }
        let dtype = Dtype::from_tag(read_u32(&mut r)?)?;
        let grid_tag = GridTag::from_tag(read_u32(&mut r)?)?;
        let meta_len = read_u32(&mut r)? as usize;
        let mut meta_buf = vec![0u8; meta_len];
        r.read_exact(&mut meta_buf)?;
        let meta: FieldMeta = serde_json::from_slice(&meta_buf)
            .map_err(|e| Error::Format(format!("meta json: {e}")))?;

        let n: usize = dims.iter().product();
        let mut payload = vec![0u8; n * dtype.size()];
        r.read_exact(&mut payload)?;
        let values: Vec<f64> = match dtype {
            Dtype::F32 => payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect(),
            Dtype::F64 => payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        };
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::data("NaN in field container payload"));
        }
        Ok(FieldContainer {
            dims,
            dtype,
            grid_tag,
            meta,
            values,
        })
    }
}

/// Widening round trip so the in-memory values match what a reader of the
/// file will see (f32 containers quantize on write).
fn round_trip_dtype(values: &[f64], dtype: Dtype) -> Vec<f64> {
    match dtype {
        Dtype::F32 => values.iter().map(|&v| v as f32 as f64).collect(),
        Dtype::F64 => values.to_vec(),
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
