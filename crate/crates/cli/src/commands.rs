//! Command implementations: each runs one pipeline from a validated
//! config and writes its artifacts. All outputs are deterministic
//! functions of the config (no timestamps, no thread-count dependence).

use crate::config::*;
use healpipe_core::codec::{self, CodeSpec, Codebook, InputSpec, QuantizedTile, TileStackShape};
use healpipe_core::error::{Error, Result};
use healpipe_core::field::{Dtype, FieldContainer, FieldMeta, GridTag, ScalarField};
use healpipe_core::grids::{Grid, GridDescriptor, HealpixGrid, LatLonGrid, PaddedTileGeometry};
use healpipe_core::legendre::LegendreTable;
use healpipe_core::metrics::{self, MetricRecord};
use healpipe_core::projection;
use healpipe_core::rng::{derive_seed, SplitMix64};
use healpipe_core::sht::{self, SphericalCoeffs};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Seed stream tags, so module-level seeds are derivable from the root.
const STREAM_FIELD: u64 = 1;
const STREAM_CODEBOOK: u64 = 2;

fn ensure_finite(values: &[f64], stage: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericContract(format!(
            "non-finite value produced during {stage}"
        )));
    }
    Ok(())
}

fn build_grid(desc: &GridDescriptor) -> Result<Arc<Grid>> {
    match *desc {
        GridDescriptor::Latlon { n_lat, n_lon } => {
            Ok(Arc::new(Grid::LatLon(LatLonGrid::build(n_lat, n_lon)?)))
        }
        GridDescriptor::Healpix { nside, .. } => {
            Ok(Arc::new(Grid::Healpix(HealpixGrid::build(nside)?)))
        }
    }
}

fn synthesize_kind(
    grid: &Arc<Grid>,
    kind: &SynthKind,
    seed: u64,
    units: &str,
) -> Result<ScalarField> {
    match *kind {
        SynthKind::Constant { value } => ScalarField::constant(grid.clone(), value, units),
        SynthKind::Harmonic { l, m, amplitude } => {
            if m > l {
                return Err(Error::domain(format!(
                    "harmonic order {m} exceeds degree {l}"
                )));
            }
            let coeffs =
                SphericalCoeffs::from_entries(l, &[(l, m, Complex64::new(amplitude, 0.0))])?;
            let table = LegendreTable::build(l, &grid.ring_colatitudes())?;
            let mut field = sht::synthesize(&coeffs, grid, &table)?;
            field.units = units.to_string();
            Ok(field)
        }
        SynthKind::RandomBandlimited { l_max } => {
            let mut rng = SplitMix64::new(derive_seed(seed, STREAM_FIELD));
            let coeffs = SphericalCoeffs::random(l_max, &mut rng);
            let table = LegendreTable::build(l_max, &grid.ring_colatitudes())?;
            let mut field = sht::synthesize(&coeffs, grid, &table)?;
            field.units = units.to_string();
            Ok(field)
        }
    }
}

fn field_to_container(field: &ScalarField, dtype: Dtype) -> Result<FieldContainer> {
    match field.grid.as_ref() {
        Grid::LatLon(_) => FieldContainer::from_latlon_field(field, dtype),
        Grid::Healpix(_) => FieldContainer::from_healpix_field(field, dtype),
    }
}

pub fn cmd_synth_field(cfg: &SynthFieldConfig) -> Result<()> {
    if let GridDescriptor::Healpix { pad, .. } = cfg.grid {
        if pad != 0 {
            return Err(Error::domain("synth-field does not emit padded stacks"));
        }
    }
    let grid = build_grid(&cfg.grid)?;
    let field = synthesize_kind(&grid, &cfg.kind, cfg.seed, &cfg.units)?;
    ensure_finite(&field.values, "field synthesis")?;
    let mut container = field_to_container(&field, cfg.dtype)?;
    container
        .meta
        .extra
        .insert("seed".into(), serde_json::json!(cfg.seed));
    container.save(&cfg.out)
}

pub fn cmd_project(cfg: &ProjectConfig) -> Result<()> {
    let source = FieldContainer::load(&cfg.input)?.to_field()?;
    if !matches!(source.grid.as_ref(), Grid::LatLon(_)) {
        return Err(Error::mismatch("project expects a lat/lon input field"));
    }
    let target = Arc::new(Grid::Healpix(HealpixGrid::build(cfg.nside)?));
    let container = if cfg.padded {
        let geom = PaddedTileGeometry::build(target, cfg.pad)?;
        let tiles = projection::sample_padded_tiles(&source, &geom)?;
        for tile in &tiles {
            ensure_finite(tile, "padded sampling")?;
        }
        FieldContainer::from_padded_tiles(&tiles, cfg.nside, cfg.pad, &source.units, cfg.dtype)?
    } else {
        let projected = projection::latlon_to_healpix(&source, &target)?;
        ensure_finite(&projected.values, "projection")?;
        FieldContainer::from_healpix_field(&projected, cfg.dtype)?
    };
    container.save(&cfg.out)
}

/// Load a HEALPix field from a container, blending padded stacks first.
fn healpix_field_from_container(container: &FieldContainer) -> Result<ScalarField> {
    match container.grid_tag {
        GridTag::Healpix => container.to_field(),
        GridTag::HealpixPadded => {
            let (nside, pad) = padded_descriptor(container)?;
            let grid = Arc::new(Grid::Healpix(HealpixGrid::build(nside)?));
            let geom = PaddedTileGeometry::build(grid, pad)?;
            let tiles = container.to_padded_tiles()?;
            let mut blended = projection::blend_padded_tiles(&tiles, &geom)?;
            blended.units = container.meta.units.clone();
            Ok(blended)
        }
        GridTag::Latlon => Err(Error::mismatch("expected a HEALPix input, got lat/lon")),
    }
}

fn padded_descriptor(container: &FieldContainer) -> Result<(usize, usize)> {
    match container.meta.grid {
        Some(GridDescriptor::Healpix { nside, pad }) => {
            let side = *container.dims.last().unwrap_or(&0);
            if nside + 2 * pad != side {
                return Err(Error::Format(format!(
                    "padded stack side {side} inconsistent with nside {nside} + 2*pad {pad}"
                )));
            }
            Ok((nside, pad))
        }
        _ => Err(Error::Format(
            "padded stack lacks a HEALPix grid descriptor in its metadata".into(),
        )),
    }
}

pub fn cmd_reproject(cfg: &ReprojectConfig) -> Result<()> {
    let container = FieldContainer::load(&cfg.input)?;
    let field = healpix_field_from_container(&container)?;
    let nside = match field.grid.as_ref() {
        Grid::Healpix(h) => h.nside(),
        _ => unreachable!(),
    };
    projection::check_reprojection_bounds(nside, cfg.l_max, cfg.n_lon, cfg.allow_lmax_override)?;

    let hp_table = load_or_build_table(
        cfg.legendre_cache.as_deref(),
        cfg.l_max,
        &field.grid.ring_colatitudes(),
    )?;
    let coeffs = sht::analyze(&field, cfg.l_max, &hp_table)?;
    let out_grid = Arc::new(Grid::LatLon(LatLonGrid::build(cfg.n_lat, cfg.n_lon)?));
    let out_table = LegendreTable::build(cfg.l_max, &out_grid.ring_colatitudes())?;
    let mut out = sht::synthesize(&coeffs, &out_grid, &out_table)?;
    out.units = field.units.clone();
    ensure_finite(&out.values, "reprojection synthesis")?;
    FieldContainer::from_latlon_field(&out, cfg.dtype)?.save(&cfg.out)
}

/// Use the table cache when it matches; otherwise build and refresh it.
fn load_or_build_table(
    cache: Option<&Path>,
    l_max: usize,
    colatitudes: &[f64],
) -> Result<LegendreTable> {
    if let Some(path) = cache {
        if path.exists() {
            let table = LegendreTable::load(path)?;
            if table.l_max() >= l_max && table.colatitudes() == colatitudes {
                return Ok(table);
            }
        }
        let table = LegendreTable::build(l_max, colatitudes)?;
        table.save(path)?;
        return Ok(table);
    }
    LegendreTable::build(l_max, colatitudes)
}

pub fn cmd_spectrum(cfg: &SpectrumConfig) -> Result<()> {
    let container = FieldContainer::load(&cfg.input)?;
    let field = match container.grid_tag {
        GridTag::Latlon => container.to_field()?,
        _ => healpix_field_from_container(&container)?,
    };
    let table = LegendreTable::build(cfg.l_max, &field.grid.ring_colatitudes())?;
    let coeffs = sht::analyze(&field, cfg.l_max, &table)?;
    let psd = sht::power_spectrum(&coeffs, cfg.mode);
    ensure_finite(&psd.values, "power spectrum")?;
    psd.save_csv(&cfg.out)?;
    if let Some(path) = &cfg.out_coeffs {
        coeffs.save(path)?;
    }
    Ok(())
}

pub fn cmd_metrics(cfg: &MetricsConfig) -> Result<()> {
    let truth = FieldContainer::load(&cfg.truth)?;
    let recon = FieldContainer::load(&cfg.recon)?;
    if truth.grid_tag != recon.grid_tag || truth.dims != recon.dims {
        return Err(Error::mismatch(format!(
            "truth {:?}/{:?} vs recon {:?}/{:?}",
            truth.grid_tag, truth.dims, recon.grid_tag, recon.dims
        )));
    }
    let variable = if cfg.variable.is_empty() {
        truth.meta.units.clone()
    } else {
        cfg.variable.clone()
    };
    let t_frames = [truth.values.as_slice()];
    let r_frames = [recon.values.as_slice()];

    let mut records = Vec::new();
    let mut push = |metric: &str, value: f64| {
        records.push(MetricRecord {
            metric: metric.to_string(),
            variable: variable.clone(),
            level: cfg.level.clone(),
            value,
        });
    };

    match truth.grid_tag {
        GridTag::Latlon => {
            let field = truth.to_field()?;
            let grid = match field.grid.as_ref() {
                Grid::LatLon(g) => g,
                _ => unreachable!(),
            };
            let weights = grid.cell_weights_normalized();
            push("wmae", metrics::wmae(&t_frames, &r_frames, &weights)?);
            push("wrmse", metrics::wrmse(&t_frames, &r_frames, &weights)?);
            push(
                "wrmse_trad",
                metrics::wrmse_trad(&t_frames, &r_frames, &weights)?,
            );
        }
        GridTag::Healpix | GridTag::HealpixPadded => {
            push("mae", metrics::mae_healpix(&t_frames, &r_frames, 12)?);
            push("rmse", metrics::rmse_healpix(&t_frames, &r_frames, 12)?);
        }
    }
    for &threshold in &cfg.thresholds {
        let fraction = metrics::bad_pixel_fraction(&t_frames, &r_frames, threshold)?;
        records.push(MetricRecord {
            metric: format!("bad_pixel_fraction@{threshold}"),
            variable: variable.clone(),
            level: cfg.level.clone(),
            value: fraction,
        });
    }

    if let Some(width) = cfg.histogram_bin_width {
        let (centers, fractions) = metrics::signed_error_histogram(&t_frames, &r_frames, width)?;
        if let Some(path) = &cfg.out_histogram {
            let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
            writeln!(w, "bin_center,fraction")?;
            for (c, f) in centers.iter().zip(fractions.iter()) {
                writeln!(w, "{c},{f}")?;
            }
        }
    }

    if let Some(path) = &cfg.out_json {
        metrics::save_metrics_json(&records, path)?;
    }
    if let Some(path) = &cfg.out_csv {
        metrics::save_metrics_csv(&records, path)?;
    }
    Ok(())
}

/// Channel-major per-tile arrays from a {12,t,t} or {C,12,t,t} container.
fn tile_stack(container: &FieldContainer) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let (channels, t) = match container.dims.as_slice() {
        [12, a, b] if a == b => (1usize, *a),
        [c, 12, a, b] if a == b => (*c, *a),
        other => {
            return Err(Error::Format(format!(
                "compressible stacks are {{12,t,t}} or {{C,12,t,t}}, got {other:?}"
            )))
        }
    };
    let plane = t * t;
    let mut tiles = vec![vec![0.0f64; channels * plane]; 12];
    for c in 0..channels {
        for (tile, tile_values) in tiles.iter_mut().enumerate() {
            let src = (c * 12 + tile) * plane;
            tile_values[c * plane..(c + 1) * plane]
                .copy_from_slice(&container.values[src..src + plane]);
        }
    }
    Ok((channels, t, tiles))
}

fn stack_values(channels: usize, t: usize, tiles: &[Vec<f64>]) -> Vec<f64> {
    let plane = t * t;
    let mut out = vec![0.0f64; channels * 12 * plane];
    for c in 0..channels {
        for (tile, tile_values) in tiles.iter().enumerate() {
            let dst = (c * 12 + tile) * plane;
            out[dst..dst + plane].copy_from_slice(&tile_values[c * plane..(c + 1) * plane]);
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CompressManifest {
    channels: usize,
    tile: usize,
    patch: usize,
    n_codewords: usize,
    calibrate: bool,
    bad_pixel_thresholds: Option<Vec<f64>>,
    bits_per_sample: u32,
    dims: Vec<usize>,
    grid_tag: GridTag,
    dtype: Dtype,
    meta: FieldMeta,
}

/// Rate accounting written by `compress` and `roundtrip`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub channels: usize,
    pub tile: usize,
    pub patch: usize,
    pub n_codewords: usize,
    pub naive_bits_per_index: u32,
    pub mean_entropy_bits_per_index: f64,
    pub input_bits: u64,
    pub code_bits_naive: u64,
    pub calibration_side_bits: u64,
    pub bad_pixel_side_bits: u64,
    pub bad_pixel_count: usize,
    /// `None` when the compressed size is zero (ratio undefined).
    pub naive_ratio: Option<f64>,
    pub effective_ratio: Option<f64>,
    pub per_tile_entropy: Vec<f64>,
}

struct CodecOutput {
    quantized: Vec<QuantizedTile>,
    recon_tiles: Vec<Vec<f64>>,
    codebook: Codebook,
    bad_pixels: Option<codec::BadPixelTable>,
    report: RateReport,
}

/// Quantize a tile stack, reconstruct it, and account for every bit.
fn run_codec(
    tiles: &[Vec<f64>],
    channels: usize,
    t: usize,
    patch: usize,
    codebook: Codebook,
    calibrate: bool,
    bad_pixel_thresholds: Option<&[f64]>,
    bits_per_sample: u32,
) -> Result<CodecOutput> {
    let mut quantized = Vec::with_capacity(12);
    let mut recon_tiles = Vec::with_capacity(12);
    for tile_values in tiles {
        let mut q = codec::quantize(tile_values, channels, t, patch, &codebook)?;
        if calibrate {
            let mean = tile_values.iter().sum::<f64>() / tile_values.len() as f64;
            let var = tile_values
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<f64>()
                / tile_values.len() as f64;
            q.calibration = Some((mean, var.sqrt()));
        }
        let mut recon = codec::dequantize(&q, &codebook, channels, patch)?;
        if let Some((mean, std)) = q.calibration {
            recon = codec::calibrate(&recon, mean, std)?;
        }
        quantized.push(q);
        recon_tiles.push(recon);
    }

    let shape = TileStackShape { channels, tile: t };
    let truth_stack = stack_values(channels, t, tiles);
    let mut recon_stack = stack_values(channels, t, &recon_tiles);
    let bad_pixels = if let Some(thresholds) = bad_pixel_thresholds {
        if thresholds.len() != channels {
            return Err(Error::shape(format!(
                "{} thresholds for {channels} channels",
                thresholds.len()
            )));
        }
        let table = codec::build_bad_pixel_table(&recon_stack, &truth_stack, shape, thresholds)?;
        codec::apply_bad_pixel_table(&mut recon_stack, shape, &table)?;
        // Capping postcondition, asserted per run.
        for c in 0..channels {
            let plane = 12 * t * t;
            for i in 0..plane {
                let idx = c * plane + i;
                assert!(
                    (recon_stack[idx] - truth_stack[idx]).abs() <= thresholds[c],
                    "bad-pixel capping failed at channel {c}"
                );
            }
        }
        Some(table)
    } else {
        None
    };
    // Fold capped pixels back into per-tile reconstructions.
    let recon_tiles: Vec<Vec<f64>> = {
        let plane = t * t;
        (0..12)
            .map(|tile| {
                let mut v = vec![0.0f64; channels * plane];
                for c in 0..channels {
                    let src = (c * 12 + tile) * plane;
                    v[c * plane..(c + 1) * plane].copy_from_slice(&recon_stack[src..src + plane]);
                }
                v
            })
            .collect()
    };

    let per_tile_entropy: Vec<f64> = quantized
        .iter()
        .map(|q| codec::shannon_entropy(&q.index_map))
        .collect();
    let mean_entropy = per_tile_entropy.iter().sum::<f64>() / per_tile_entropy.len() as f64;
    let map_side = t / patch;
    let input = InputSpec {
        channels,
        height: t,
        width: t,
        bits_per_sample,
    };
    let input_bits_total = 12u64 * (channels * t * t) as u64 * bits_per_sample as u64;
    let code_bits_naive = 12u64 * (map_side * map_side) as u64 * codebook.bits_per_index() as u64;
    let calibration_side_bits = if calibrate { 12 * 2 * 32 } else { 0u64 };
    let bad_pixel_side_bits = bad_pixels
        .as_ref()
        .map(|tb| codec::table_storage_bits(tb, shape))
        .unwrap_or(0);
    let side = (calibration_side_bits + bad_pixel_side_bits) as f64 / 12.0;
    let naive_ratio = codec::compression_ratio(
        &input,
        &CodeSpec {
            map_h: map_side,
            map_w: map_side,
            bits_per_index: codebook.bits_per_index() as f64,
        },
        side,
    )
    .ok();
    let effective_ratio = codec::compression_ratio(
        &input,
        &CodeSpec {
            map_h: map_side,
            map_w: map_side,
            bits_per_index: mean_entropy,
        },
        side,
    )
    .ok();

    let report = RateReport {
        channels,
        tile: t,
        patch,
        n_codewords: codebook.n(),
        naive_bits_per_index: codebook.bits_per_index(),
        mean_entropy_bits_per_index: mean_entropy,
        input_bits: input_bits_total,
        code_bits_naive,
        calibration_side_bits,
        bad_pixel_side_bits,
        bad_pixel_count: bad_pixels.as_ref().map(|t| t.entries.len()).unwrap_or(0),
        naive_ratio,
        effective_ratio,
        per_tile_entropy,
    };
    Ok(CodecOutput {
        quantized,
        recon_tiles,
        codebook,
        bad_pixels,
        report,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_codec_artifacts(dir: &Path, out: &CodecOutput, manifest: &CompressManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("manifest.json"), manifest)?;
    write_json(&dir.join("report.json"), &out.report)?;
    out.codebook.save(&dir.join("codebook.cbk"))?;
    for (i, q) in out.quantized.iter().enumerate() {
        q.save(&dir.join(format!("tile_{i:02}.qti")))?;
    }
    let calibrations: Vec<Option<(f64, f64)>> =
        out.quantized.iter().map(|q| q.calibration).collect();
    if calibrations.iter().any(|c| c.is_some()) {
        write_json(&dir.join("calibration.json"), &calibrations)?;
    }
    if let Some(table) = &out.bad_pixels {
        table.save_csv(&dir.join("bad_pixels.csv"))?;
    }
    Ok(())
}

pub fn cmd_compress(cfg: &CompressConfig) -> Result<()> {
    let container = FieldContainer::load(&cfg.input)?;
    let (channels, t, tiles) = tile_stack(&container)?;
    let (codebook, patch) = match &cfg.codebook {
        CodebookSource::Train { n, patch, seed } => {
            let dim = patch * patch * channels;
            let mut patches = Vec::new();
            for tile in &tiles {
                patches.extend(codec::extract_patches(tile, channels, t, *patch)?);
            }
            (codec::train_codebook(&patches, dim, *n, *seed)?, *patch)
        }
        CodebookSource::Load { path, patch } => (Codebook::load(path)?, *patch),
    };
    let out = run_codec(
        &tiles,
        channels,
        t,
        patch,
        codebook,
        cfg.calibrate,
        cfg.bad_pixel_thresholds.as_deref(),
        cfg.bits_per_sample,
    )?;
    let manifest = CompressManifest {
        channels,
        tile: t,
        patch,
        n_codewords: out.codebook.n(),
        calibrate: cfg.calibrate,
        bad_pixel_thresholds: cfg.bad_pixel_thresholds.clone(),
        bits_per_sample: cfg.bits_per_sample,
        dims: container.dims.clone(),
        grid_tag: container.grid_tag,
        dtype: container.dtype,
        meta: container.meta.clone(),
    };
    write_codec_artifacts(&cfg.out_dir, &out, &manifest)
}

pub fn cmd_decompress(cfg: &DecompressConfig) -> Result<()> {
    let dir = &cfg.dir;
    let manifest: CompressManifest = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(dir.join("manifest.json"))?,
    ))
    .map_err(|e| Error::Format(format!("manifest.json: {e}")))?;
    let codebook = Codebook::load(&dir.join("codebook.cbk"))?;
    if codebook.n() != manifest.n_codewords {
        return Err(Error::mismatch("codebook size differs from manifest"));
    }
    let calibrations: Vec<Option<(f64, f64)>> = if dir.join("calibration.json").exists() {
        serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(
            dir.join("calibration.json"),
        )?))
        .map_err(|e| Error::Format(format!("calibration.json: {e}")))?
    } else {
        vec![None; 12]
    };

    let mut recon_tiles = Vec::with_capacity(12);
    for i in 0..12 {
        let q = QuantizedTile::load(&dir.join(format!("tile_{i:02}.qti")))?;
        let mut recon = codec::dequantize(&q, &codebook, manifest.channels, manifest.patch)?;
        if let Some((mean, std)) = calibrations[i] {
            recon = codec::calibrate(&recon, mean, std)?;
        }
        recon_tiles.push(recon);
    }
    let mut values = stack_values(manifest.channels, manifest.tile, &recon_tiles);
    if dir.join("bad_pixels.csv").exists() {
        let thresholds = manifest.bad_pixel_thresholds.clone().unwrap_or_default();
        let table = codec::BadPixelTable::load_csv(&dir.join("bad_pixels.csv"), thresholds)?;
        let shape = TileStackShape {
            channels: manifest.channels,
            tile: manifest.tile,
        };
        codec::apply_bad_pixel_table(&mut values, shape, &table)?;
    }
    ensure_finite(&values, "decompression")?;
    let container = FieldContainer {
        dims: manifest.dims,
        dtype: manifest.dtype,
        grid_tag: manifest.grid_tag,
        meta: manifest.meta,
        values,
    };
    container.save(&cfg.out)
}

#[derive(Debug, Serialize)]
struct RoundtripReport {
    seed: u64,
    n_lat: usize,
    n_lon: usize,
    nside: usize,
    pad: usize,
    l_max: usize,
    wmae: f64,
    wrmse: f64,
    wrmse_trad: f64,
    max_seam_jump: f64,
    rate: Option<RateReport>,
}

pub fn cmd_roundtrip(cfg: &RoundtripConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let out = |name: &str| cfg.out_dir.join(name);

    // 1. Source field on the lat/lon grid.
    let src_grid = Arc::new(Grid::LatLon(LatLonGrid::build(cfg.n_lat, cfg.n_lon)?));
    let source = synthesize_kind(&src_grid, &cfg.kind, cfg.seed, "")?;
    ensure_finite(&source.values, "field synthesis")?;
    FieldContainer::from_latlon_field(&source, cfg.dtype)?.save(&out("field.fld"))?;

    // 2. Padded projection.
    let hp_grid = Arc::new(Grid::Healpix(HealpixGrid::build(cfg.nside)?));
    let geom = PaddedTileGeometry::build(hp_grid, cfg.pad)?;
    let mut tiles = projection::sample_padded_tiles(&source, &geom)?;
    for tile in &tiles {
        ensure_finite(tile, "padded sampling")?;
    }
    FieldContainer::from_padded_tiles(&tiles, cfg.nside, cfg.pad, "", cfg.dtype)?
        .save(&out("padded.fld"))?;

    // 3. Optional quantization of the padded tiles.
    let side = geom.side();
    let rate = if let Some(codec_cfg) = &cfg.codec {
        if side % codec_cfg.patch != 0 {
            return Err(Error::domain(format!(
                "patch {} does not divide padded side {side}",
                codec_cfg.patch
            )));
        }
        let dim = codec_cfg.patch * codec_cfg.patch;
        let mut patches = Vec::new();
        for tile in &tiles {
            patches.extend(codec::extract_patches(tile, 1, side, codec_cfg.patch)?);
        }
        let codebook = codec::train_codebook(
            &patches,
            dim,
            codec_cfg.n,
            derive_seed(cfg.seed, STREAM_CODEBOOK),
        )?;
        let codec_out = run_codec(
            &tiles,
            1,
            side,
            codec_cfg.patch,
            codebook,
            codec_cfg.calibrate,
            codec_cfg.bad_pixel_thresholds.as_deref(),
            32,
        )?;
        let manifest = CompressManifest {
            channels: 1,
            tile: side,
            patch: codec_cfg.patch,
            n_codewords: codec_out.codebook.n(),
            calibrate: codec_cfg.calibrate,
            bad_pixel_thresholds: codec_cfg.bad_pixel_thresholds.clone(),
            bits_per_sample: 32,
            dims: vec![12, side, side],
            grid_tag: GridTag::HealpixPadded,
            dtype: cfg.dtype,
            meta: FieldMeta {
                grid: Some(GridDescriptor::Healpix {
                    nside: cfg.nside,
                    pad: cfg.pad,
                }),
                units: String::new(),
                extra: Default::default(),
            },
        };
        write_codec_artifacts(&out("codec"), &codec_out, &manifest)?;
        tiles = codec_out.recon_tiles;
        Some(codec_out.report)
    } else {
        None
    };

    // 4. Blend into a single HEALPix field.
    let blended = projection::blend_padded_tiles(&tiles, &geom)?;
    ensure_finite(&blended.values, "blending")?;
    FieldContainer::from_healpix_field(&blended, cfg.dtype)?.save(&out("blended.fld"))?;
    let max_seam_jump = projection::max_cross_tile_seam_jump(&blended)?;

    // 5. Analysis, spectrum, synthesis back to lat/lon.
    projection::check_reprojection_bounds(
        cfg.nside,
        cfg.l_max,
        cfg.n_lon,
        cfg.allow_lmax_override,
    )?;
    let hp_table = LegendreTable::build(cfg.l_max, &blended.grid.ring_colatitudes())?;
    let coeffs = sht::analyze(&blended, cfg.l_max, &hp_table)?;
    coeffs.save(&out("coeffs.alm"))?;
    sht::power_spectrum(&coeffs, cfg.spectrum_mode).save_csv(&out("spectrum.csv"))?;

    let out_table = LegendreTable::build(cfg.l_max, &src_grid.ring_colatitudes())?;
    let recon = sht::synthesize(&coeffs, &src_grid, &out_table)?;
    ensure_finite(&recon.values, "reprojection synthesis")?;
    FieldContainer::from_latlon_field(&recon, cfg.dtype)?.save(&out("recon.fld"))?;

    // 6. Score against the source.
    let grid = match src_grid.as_ref() {
        Grid::LatLon(g) => g,
        _ => unreachable!(),
    };
    let weights = grid.cell_weights_normalized();
    let t_frames = [source.values.as_slice()];
    let r_frames = [recon.values.as_slice()];
    let report = RoundtripReport {
        seed: cfg.seed,
        n_lat: cfg.n_lat,
        n_lon: cfg.n_lon,
        nside: cfg.nside,
        pad: cfg.pad,
        l_max: cfg.l_max,
        wmae: metrics::wmae(&t_frames, &r_frames, &weights)?,
        wrmse: metrics::wrmse(&t_frames, &r_frames, &weights)?,
        wrmse_trad: metrics::wrmse_trad(&t_frames, &r_frames, &weights)?,
        max_seam_jump,
        rate,
    };
    let records = vec![
        MetricRecord {
            metric: "wmae".into(),
            variable: String::new(),
            level: String::new(),
            value: report.wmae,
        },
        MetricRecord {
            metric: "wrmse".into(),
            variable: String::new(),
            level: String::new(),
            value: report.wrmse,
        },
        MetricRecord {
            metric: "wrmse_trad".into(),
            variable: String::new(),
            level: String::new(),
            value: report.wrmse_trad,
        },
    ];
    metrics::save_metrics_json(&records, &out("metrics.json"))?;
    write_json(&out("report.json"), &report)
}
