//! Compression bookkeeping: standardization, deterministic codebook
//! quantization of tile patches, entropy rate, compression ratios, tile
//! calibration, and bad-pixel error capping.
//!
//! The quantizer is a classical stand-in for a learned vector-quantization
//! bottleneck: tiles are cut into non-overlapping p x p x channels patches
//! (row-major flatten, channel fastest), each mapped to the nearest
//! codeword in Euclidean distance, ties toward the lowest index. The
//! codebook is trained by deterministic k-means — farthest-point
//! initialization from a seeded start, Lloyd iterations to an assignment
//! fixpoint. Every rate and accounting formula downstream (Shannon
//! entropy of the index maps, naive and effective compression ratios,
//! bad-pixel side-information bits) is independent of how the codebook
//! was produced.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use std::io::{BufRead, Read, Write};
use std::path::Path;

/// Per-variable-and-level standardization moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizationStats {
    pub mean: f64,
    pub std: f64,
}

/// Pooled mean and population standard deviation across frames.
pub fn compute_stats(frames: &[&[f64]]) -> Result<StandardizationStats> {
    let n: usize = frames.iter().map(|f| f.len()).sum();
    if n == 0 {
        return Err(Error::domain("no samples to standardize"));
    }
    let mean = frames.iter().flat_map(|f| f.iter()).sum::<f64>() / n as f64;
    let var = frames
        .iter()
        .flat_map(|f| f.iter())
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(Error::domain("zero-variance level cannot be standardized"));
    }
    Ok(StandardizationStats { mean, std })
}

pub fn standardize(values: &[f64], stats: &StandardizationStats) -> Vec<f64> {
    values
        .iter()
        .map(|&v| (v - stats.mean) / stats.std)
        .collect()
}

pub fn destandardize(values: &[f64], stats: &StandardizationStats) -> Vec<f64> {
    values.iter().map(|&v| v * stats.std + stats.mean).collect()
}

/// N codewords of a fixed dimension, f32 as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    dim: usize,
    seed: u64,
    words: Vec<f32>,
}

impl Codebook {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn word(&self, i: usize) -> &[f32] {
        &self.words[i * self.dim..(i + 1) * self.dim]
    }

    /// Fixed-width bits per index: ceil(log2 N).
    pub fn bits_per_index(&self) -> u32 {
        bits_for(self.n)
    }

    /// Write `CBK1 | N: u32 | dim: u32 | seed: u64 | codewords f32 LE`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"CBK1")?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for &v in &self.words {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CBK1" {
            return Err(Error::Format("not a CBK1 codebook".into()));
        }
        let n = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let seed = u64::from_le_bytes(buf8);
        let mut words = Vec::with_capacity(n * dim);
        let mut buf4 = [0u8; 4];
        for _ in 0..n * dim {
            r.read_exact(&mut buf4)?;
            words.push(f32::from_le_bytes(buf4));
        }
        Ok(Codebook {
            n,
            dim,
            seed,
            words,
        })
    }
}

fn bits_for(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Deterministic k-means: farthest-point initialization from a seeded
/// start, then Lloyd iterations until the assignment reaches a fixpoint
/// (at most 100 iterations). Assignment ties break toward the lowest
/// codeword index. Single-threaded on purpose.
pub fn train_codebook(patches: &[f64], dim: usize, n: usize, seed: u64) -> Result<Codebook> {
    if dim == 0 || patches.len() % dim != 0 {
        return Err(Error::shape(format!(
            "patch buffer of {} values is not a multiple of dim {dim}",
            patches.len()
        )));
    }
    let m = patches.len() / dim;
    if m < n {
        return Err(Error::domain(format!(
            "need at least as many patches ({m}) as codewords ({n})"
        )));
    }
    if n == 0 {
        return Err(Error::domain("codebook needs at least one codeword"));
    }
    let patch = |i: usize| &patches[i * dim..(i + 1) * dim];

    // Farthest-point initialization.
    let mut rng = SplitMix64::new(seed);
    let first = rng.next_range(m);
    let mut centers: Vec<f64> = patch(first).to_vec();
    let mut min_dist: Vec<f64> = (0..m).map(|i| dist_sq(patch(i), patch(first))).collect();
    for _ in 1..n {
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d <= 0.0 {
            return Err(Error::domain(format!(
                "fewer than {n} distinct patches; cannot build a codebook of distinct codewords"
            )));
        }
        centers.extend_from_slice(patch(best));
        for i in 0..m {
            let d = dist_sq(patch(i), patch(best));
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }

    // Lloyd iterations to an assignment fixpoint.
    let mut assignment = vec![usize::MAX; m];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..m {
            let mut best = 0;
            let mut best_d = f64::MAX;
            for c in 0..n {
                let d = dist_sq(patch(i), &centers[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }

        let mut sums = vec![0.0f64; n * dim];
        let mut counts = vec![0usize; n];
        for i in 0..m {
            let c = assignment[i];
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(patch(i)) {
                *s += v;
            }
        }
        // Empty clusters grab the point currently farthest from its
        // codeword, in cluster order; claimed points are skipped.
        let mut claimed = vec![false; m];
        for c in 0..n {
            if counts[c] > 0 {
                for (dst, s) in centers[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = s / counts[c] as f64;
                }
            } else {
                let mut far = 0;
                let mut far_d = -1.0;
                for i in 0..m {
                    if claimed[i] {
                        continue;
                    }
                    let a = assignment[i];
                    let d = dist_sq(patch(i), &centers[a * dim..(a + 1) * dim]);
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                claimed[far] = true;
                centers[c * dim..(c + 1) * dim].copy_from_slice(patch(far));
            }
        }
    }

    let words: Vec<f32> = centers.iter().map(|&v| v as f32).collect();
    Ok(Codebook {
        n,
        dim,
        seed,
        words,
    })
}

/// Quantized form of one tile: a row-major map of codeword indices over
/// the patch grid, plus optional per-tile calibration moments.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTile {
    pub index_map: Vec<u32>,
    pub map_h: usize,
    pub map_w: usize,
    /// Codebook size the indices refer to.
    pub n_codewords: usize,
    /// (mean, std) of the original tile, when calibration is enabled.
    pub calibration: Option<(f64, f64)>,
}

impl QuantizedTile {
    /// Write `QTI1 | h | w | N` + indices as minimal-width LE unsigned
    /// integers (1, 2 or 4 bytes as N requires).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"QTI1")?;
        w.write_all(&(self.map_h as u32).to_le_bytes())?;
        w.write_all(&(self.map_w as u32).to_le_bytes())?;
        w.write_all(&(self.n_codewords as u32).to_le_bytes())?;
        let width = index_byte_width(self.n_codewords);
        for &ix in &self.index_map {
            w.write_all(&ix.to_le_bytes()[..width])?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"QTI1" {
            return Err(Error::Format("not a QTI1 quantized tile".into()));
        }
        let map_h = read_u32(&mut r)? as usize;
        let map_w = read_u32(&mut r)? as usize;
        let n_codewords = read_u32(&mut r)? as usize;
        let width = index_byte_width(n_codewords);
        let mut index_map = Vec::with_capacity(map_h * map_w);
        for _ in 0..map_h * map_w {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf[..width])?;
            let ix = u32::from_le_bytes(buf);
            if ix as usize >= n_codewords {
                return Err(Error::Format(format!(
                    "index {ix} out of range for {n_codewords} codewords"
                )));
            }
            index_map.push(ix);
        }
        Ok(QuantizedTile {
            index_map,
            map_h,
            map_w,
            n_codewords,
            calibration: None,
        })
    }
}

fn index_byte_width(n: usize) -> usize {
    if n <= 1 << 8 {
        1
    } else if n <= 1 << 16 {
        2
    } else {
        4
    }
}

/// Cut a channel-major tile (channels x t x t, row-major) into
/// non-overlapping patch vectors of length patch² x channels, flattened
/// (dy, dx, channel) with channel fastest. Patch cells scan row-major.
pub fn extract_patches(tile: &[f64], channels: usize, t: usize, patch: usize) -> Result<Vec<f64>> {
    if patch == 0 || t % patch != 0 {
        return Err(Error::domain(format!(
            "patch size {patch} does not divide tile size {t}"
        )));
    }
    if tile.len() != channels * t * t {
        return Err(Error::shape(format!(
            "tile of {} values vs channels {channels} x {t}x{t}",
            tile.len()
        )));
    }
    let per_side = t / patch;
    let dim = patch * patch * channels;
    let mut out = Vec::with_capacity(per_side * per_side * dim);
    for py in 0..per_side {
        for px in 0..per_side {
            for dy in 0..patch {
                for dx in 0..patch {
                    for c in 0..channels {
                        let y = py * patch + dy;
                        let x = px * patch + dx;
                        out.push(tile[(c * t + y) * t + x]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Map each patch of a tile to its nearest codeword.
pub fn quantize(
    tile: &[f64],
    channels: usize,
    t: usize,
    patch: usize,
    codebook: &Codebook,
) -> Result<QuantizedTile> {
    let dim = patch * patch * channels;
    if dim != codebook.dim() {
        return Err(Error::mismatch(format!(
            "patch dim {dim} vs codebook dim {}",
            codebook.dim()
        )));
    }
    let patches = extract_patches(tile, channels, t, patch)?;
    let per_side = t / patch;
    let mut index_map = Vec::with_capacity(per_side * per_side);
    for p in patches.chunks_exact(dim) {
        let mut best = 0u32;
        let mut best_d = f64::MAX;
        for c in 0..codebook.n() {
            let w = codebook.word(c);
            let d: f64 = p
                .iter()
                .zip(w.iter())
                .map(|(&x, &y)| (x - y as f64) * (x - y as f64))
                .sum();
            if d < best_d {
                best_d = d;
                best = c as u32;
            }
        }
        index_map.push(best);
    }
    Ok(QuantizedTile {
        index_map,
        map_h: per_side,
        map_w: per_side,
        n_codewords: codebook.n(),
        calibration: None,
    })
}

/// Write codewords back into a channel-major tile.
pub fn dequantize(
    quantized: &QuantizedTile,
    codebook: &Codebook,
    channels: usize,
    patch: usize,
) -> Result<Vec<f64>> {
    if quantized.n_codewords != codebook.n() {
        return Err(Error::mismatch(format!(
            "tile quantized against {} codewords, codebook has {}",
            quantized.n_codewords,
            codebook.n()
        )));
    }
    let dim = patch * patch * channels;
    if dim != codebook.dim() {
        return Err(Error::mismatch(format!(
            "patch dim {dim} vs codebook dim {}",
            codebook.dim()
        )));
    }
    let per_side = quantized.map_h;
    if quantized.map_w != per_side || quantized.index_map.len() != per_side * per_side {
        return Err(Error::shape("index map is not square"));
    }
    let t = per_side * patch;
    let mut tile = vec![0.0f64; channels * t * t];
    for py in 0..per_side {
        for px in 0..per_side {
            let word = codebook.word(quantized.index_map[py * per_side + px] as usize);
            let mut k = 0;
            for dy in 0..patch {
                for dx in 0..patch {
                    for c in 0..channels {
                        let y = py * patch + dy;
                        let x = px * patch + dx;
                        tile[(c * t + y) * t + x] = word[k] as f64;
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(tile)
}

/// Empirical Shannon entropy of an index map, bits per index:
/// H = −Σ_i f_i log2 f_i over observed index frequencies.
pub fn shannon_entropy(index_map: &[u32]) -> f64 {
    if index_map.is_empty() {
        return 0.0;
    }
    let mut counts = std::collections::BTreeMap::new();
    for &ix in index_map {
        *counts.entry(ix).or_insert(0u64) += 1;
    }
    let n = index_map.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let f = c as f64 / n;
            f * f.log2()
        })
        .sum::<f64>()
}

/// Uncompressed side of a compression-ratio computation.
#[derive(Debug, Clone, Copy)]
pub struct InputSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub bits_per_sample: u32,
}

/// Compressed side: a code map of `map_h x map_w` indices, each costing
/// `bits_per_index` bits (⌈log2 N⌉ for the naive ratio, the empirical
/// entropy for the effective one).
#[derive(Debug, Clone, Copy)]
pub struct CodeSpec {
    pub map_h: usize,
    pub map_w: usize,
    pub bits_per_index: f64,
}

/// input bits / (code bits + side-information bits).
pub fn compression_ratio(input: &InputSpec, code: &CodeSpec, side_info_bits: f64) -> Result<f64> {
    if input.channels * input.height * input.width == 0 || input.bits_per_sample == 0 {
        return Err(Error::domain("input spec must be non-empty"));
    }
    let input_bits =
        (input.channels * input.height * input.width) as f64 * input.bits_per_sample as f64;
    let code_bits = (code.map_h * code.map_w) as f64 * code.bits_per_index + side_info_bits;
    if code_bits <= 0.0 {
        return Err(Error::domain("compressed size must be positive"));
    }
    Ok(input_bits / code_bits)
}

/// One stored-verbatim pixel: address within the (channel, tile, row, col)
/// stack plus the original value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BadPixel {
    pub tile: u32,
    pub row: u32,
    pub col: u32,
    pub channel: u32,
    pub value: f32,
}

/// Lookup table of pixels whose reconstruction error exceeded a
/// per-channel threshold, stored uncompressed to cap the maximum error.
#[derive(Debug, Clone, PartialEq)]
pub struct BadPixelTable {
    pub entries: Vec<BadPixel>,
    pub thresholds: Vec<f64>,
}

/// Shape of a channel-major tile stack {channels, 12, t, t}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileStackShape {
    pub channels: usize,
    pub tile: usize,
}

impl TileStackShape {
    pub fn len(&self) -> usize {
        self.channels * 12 * self.tile * self.tile
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    fn index(&self, channel: usize, tile: usize, row: usize, col: usize) -> usize {
        ((channel * 12 + tile) * self.tile + row) * self.tile + col
    }

    /// Bits to address one (channel, tile, row, col) cell as a flat index.
    pub fn address_bits(&self) -> u32 {
        bits_for(self.len())
    }
}

/// Collect every pixel whose |recon − truth| exceeds its channel's
/// threshold, recording the original value.
pub fn build_bad_pixel_table(
    recon: &[f64],
    truth: &[f64],
    shape: TileStackShape,
    thresholds: &[f64],
) -> Result<BadPixelTable> {
    if recon.len() != shape.len() || truth.len() != shape.len() {
        return Err(Error::shape(format!(
            "stack of {} values expected, got recon {} / truth {}",
            shape.len(),
            recon.len(),
            truth.len()
        )));
    }
    if thresholds.len() != shape.channels {
        return Err(Error::shape("one threshold per channel required"));
    }
    let t = shape.tile;
    let mut entries = Vec::new();
    for c in 0..shape.channels {
        for tile in 0..12 {
            for row in 0..t {
                for col in 0..t {
                    let i = shape.index(c, tile, row, col);
                    if (recon[i] - truth[i]).abs() > thresholds[c] {
                        entries.push(BadPixel {
                            tile: tile as u32,
                            row: row as u32,
                            col: col as u32,
                            channel: c as u32,
                            value: truth[i] as f32,
                        });
                    }
                }
            }
        }
    }
    Ok(BadPixelTable {
        entries,
        thresholds: thresholds.to_vec(),
    })
}

/// Overwrite listed pixels with their stored originals.
pub fn apply_bad_pixel_table(
    recon: &mut [f64],
    shape: TileStackShape,
    table: &BadPixelTable,
) -> Result<()> {
    if recon.len() != shape.len() {
        return Err(Error::shape("reconstruction does not match stack shape"));
    }
    for e in &table.entries {
        let i = shape.index(
            e.channel as usize,
            e.tile as usize,
            e.row as usize,
            e.col as usize,
        );
        recon[i] = e.value as f64;
    }
    Ok(())
}

/// Storage cost of the table: entries × (address bits + 32), addresses as
/// flat ⌈log2(12·t²·channels)⌉-bit indices and values as f32.
pub fn table_storage_bits(table: &BadPixelTable, shape: TileStackShape) -> u64 {
    table.entries.len() as u64 * (shape.address_bits() as u64 + 32)
}

impl BadPixelTable {
    /// CSV with header `tile,row,col,channel,value`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "tile,row,col,channel,value")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.tile, e.row, e.col, e.channel, e.value
            )?;
        }
        Ok(())
    }

    pub fn load_csv(path: &Path, thresholds: Vec<f64>) -> Result<Self> {
        let r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "tile,row,col,channel,value" => {}
            _ => return Err(Error::Format("missing bad-pixel CSV header".into())),
        }
        let mut entries = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != 5 {
                return Err(Error::Format(format!("bad CSV row: {line}")));
            }
            entries.push(BadPixel {
                tile: parse(parts[0])?,
                row: parse(parts[1])?,
                col: parse(parts[2])?,
                channel: parse(parts[3])?,
                value: parts[4]
                    .parse::<f32>()
                    .map_err(|e| Error::Format(format!("bad value: {e}")))?,
            });
        }
        Ok(BadPixelTable {
            entries,
            thresholds,
        })
    }
}

fn parse(s: &str) -> Result<u32> {
    s.parse::<u32>()
        .map_err(|e| Error::Format(format!("bad CSV field {s}: {e}")))
}

/// Affine-map a reconstruction so its mean and population std match the
/// targets.
pub fn calibrate(recon: &[f64], target_mean: f64, target_std: f64) -> Result<Vec<f64>> {
    let n = recon.len();
    if n == 0 {
        return Err(Error::domain("cannot calibrate an empty tile"));
    }
    let mean = recon.iter().sum::<f64>() / n as f64;
    let var = recon.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(Error::domain(
            "zero-variance reconstruction cannot be calibrated",
        ));
    }
    let scale = target_std / std;
    Ok(recon
        .iter()
        .map(|&v| (v - mean) * scale + target_mean)
        .collect())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("healpipe_codec_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn stats_of_two_point_field() {
        let s = compute_stats(&[&[1.0, 3.0]]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(standardize(&[1.0, 3.0], &s), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_field_rejected() {
        assert!(compute_stats(&[&[5.0; 10]]).is_err());
    }

    #[test]
    fn standardization_round_trip() {
        let mut rng = SplitMix64::new(8);
        let values: Vec<f64> = (0..500).map(|_| 3.0 + 2.5 * rng.next_gaussian()).collect();
        let s = compute_stats(&[&values]).unwrap();
        let back = destandardize(&standardize(&values, &s), &s);
        for (a, b) in back.iter().zip(values.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn codebook_of_all_distinct_patches_is_the_patches() {
        let patches = vec![
            0.0, 0.0, //
            1.0, 0.0, //
            0.0, 1.0, //
            5.0, 5.0,
        ];
        let cb = train_codebook(&patches, 2, 4, 99).unwrap();
        let mut words: Vec<Vec<f32>> = (0..4).map(|i| cb.word(i).to_vec()).collect();
        words.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            words,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![5.0, 5.0]
            ]
        );
    }

    #[test]
    fn codebook_finds_two_separated_blobs() {
        let mut rng = SplitMix64::new(3);
        let mut patches = Vec::new();
        for _ in 0..200 {
            patches.push(-4.0 + 0.05 * rng.next_gaussian());
            patches.push(1.0 + 0.05 * rng.next_gaussian());
        }
        for _ in 0..200 {
            patches.push(4.0 + 0.05 * rng.next_gaussian());
            patches.push(-1.0 + 0.05 * rng.next_gaussian());
        }
        let cb = train_codebook(&patches, 2, 2, 5).unwrap();
        let mut words: Vec<Vec<f32>> = (0..2).map(|i| cb.word(i).to_vec()).collect();
        words.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((words[0][0] + 4.0).abs() < 0.1 && (words[0][1] - 1.0).abs() < 0.1);
        assert!((words[1][0] - 4.0).abs() < 0.1 && (words[1][1] + 1.0).abs() < 0.1);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = SplitMix64::new(17);
        let patches: Vec<f64> = (0..64 * 4).map(|_| rng.next_gaussian()).collect();
        let a = train_codebook(&patches, 4, 8, 1234).unwrap();
        let b = train_codebook(&patches, 4, 8, 1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_patches_rejected() {
        assert!(train_codebook(&[1.0, 2.0], 1, 3, 0).is_err());
        // Duplicates collapse the distinct count below N.
        assert!(train_codebook(&[1.0, 1.0, 1.0], 1, 2, 0).is_err());
    }

    #[test]
    fn quantize_codeword_tiled_input_exactly() {
        let patches = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0];
        let cb = train_codebook(&patches, 4, 3, 7).unwrap();
        // Word index 1 tiled over a 4x4 single-channel tile (2x2 patches).
        let w = cb.word(1);
        let mut tile = vec![0.0f64; 16];
        for py in 0..2 {
            for px in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        tile[(py * 2 + dy) * 4 + (px * 2 + dx)] = w[dy * 2 + dx] as f64;
                    }
                }
            }
        }
        let q = quantize(&tile, 1, 4, 2, &cb).unwrap();
        assert_eq!(q.index_map, vec![1, 1, 1, 1]);
        let back = dequantize(&q, &cb, 1, 2).unwrap();
        assert_eq!(back, tile);
        // Re-quantizing the reconstruction is a fixpoint.
        let q2 = quantize(&back, 1, 4, 2, &cb).unwrap();
        assert_eq!(q.index_map, q2.index_map);
    }

    #[test]
    fn quantizer_matches_exhaustive_oracle() {
        let mut rng = SplitMix64::new(23);
        let patches: Vec<f64> = (0..32 * 8).map(|_| rng.next_gaussian()).collect();
        let cb = train_codebook(&patches, 8, 6, 11).unwrap();
        let tile: Vec<f64> = (0..8 * 8 * 2).map(|_| rng.next_gaussian()).collect();
        let q = quantize(&tile, 2, 8, 2, &cb).unwrap();
        let vectors = extract_patches(&tile, 2, 8, 2).unwrap();
        for (k, p) in vectors.chunks_exact(8).enumerate() {
            let mut best = 0;
            let mut best_d = f64::MAX;
            for c in 0..cb.n() {
                let d: f64 = p
                    .iter()
                    .zip(cb.word(c).iter())
                    .map(|(&x, &y)| (x - y as f64) * (x - y as f64))
                    .sum();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assert_eq!(q.index_map[k] as usize, best);
            // Nearest-codeword optimality as an explicit inequality.
            let chosen: f64 = p
                .iter()
                .zip(cb.word(q.index_map[k] as usize).iter())
                .map(|(&x, &y)| (x - y as f64) * (x - y as f64))
                .sum();
            for c in 0..cb.n() {
                let d: f64 = p
                    .iter()
                    .zip(cb.word(c).iter())
                    .map(|(&x, &y)| (x - y as f64) * (x - y as f64))
                    .sum();
                assert!(chosen <= d);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let cb = train_codebook(&[0.0, 1.0, 2.0, 3.0], 2, 2, 0).unwrap();
        let tile = vec![0.0; 16];
        assert!(quantize(&tile, 1, 4, 4, &cb).is_err());
    }

    #[test]
    fn entropy_closed_forms() {
        assert_eq!(shannon_entropy(&[5, 5, 5, 5]), 0.0);
        let uniform: Vec<u32> = (0..8192).collect();
        assert_eq!(shannon_entropy(&uniform), 13.0);
        let half_quarter = vec![0, 0, 1, 2];
        assert!((shannon_entropy(&half_quarter) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn entropy_bounds_and_uniformity() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let n = 1 + rng.next_range(16);
            let map: Vec<u32> = (0..200).map(|_| rng.next_range(n) as u32).collect();
            let h = shannon_entropy(&map);
            assert!(h >= 0.0 && h <= (n as f64).log2() + 1e-12);
        }
    }

    #[test]
    fn paper_ratio_arithmetic() {
        // 5 channels x 256² x 32-bit vs 32² x 13-bit indices.
        let input = InputSpec {
            channels: 5,
            height: 256,
            width: 256,
            bits_per_sample: 32,
        };
        let code = CodeSpec {
            map_h: 32,
            map_w: 32,
            bits_per_index: 13.0,
        };
        let r = compression_ratio(&input, &code, 0.0).unwrap();
        assert!((r - 10_485_760.0 / 13_312.0).abs() < 1e-9);
        assert_eq!(r.round(), 788.0);

        // Overset variant: 288² 5-channel 32-bit vs 13-bit 36² maps.
        let input = InputSpec {
            channels: 5,
            height: 288,
            width: 288,
            bits_per_sample: 32,
        };
        let code = CodeSpec {
            map_h: 36,
            map_w: 36,
            bits_per_index: 13.0,
        };
        let r2 = compression_ratio(&input, &code, 0.0).unwrap();
        assert!((r2 - r).abs() < 1e-9);
    }

    #[test]
    fn ratio_limiting_case_is_side_info_only() {
        let input = InputSpec {
            channels: 1,
            height: 64,
            width: 64,
            bits_per_sample: 32,
        };
        let code = CodeSpec {
            map_h: 8,
            map_w: 8,
            bits_per_index: 0.0,
        };
        let r = compression_ratio(&input, &code, 1024.0).unwrap();
        assert_eq!(r, (64.0 * 64.0 * 32.0) / 1024.0);
    }

    #[test]
    fn rate_distortion_is_monotone_in_codebook_size() {
        let mut rng = SplitMix64::new(31);
        let m = 1500;
        let dim = 8;
        let patches: Vec<f64> = (0..m * dim).map(|_| rng.next_gaussian()).collect();
        let mut previous = f64::MAX;
        for n in [16usize, 64, 256, 1024] {
            let cb = train_codebook(&patches, dim, n, 2024).unwrap();
            let mse: f64 = patches
                .chunks_exact(dim)
                .map(|p| {
                    (0..cb.n())
                        .map(|c| {
                            p.iter()
                                .zip(cb.word(c).iter())
                                .map(|(&x, &y)| (x - y as f64) * (x - y as f64))
                                .sum::<f64>()
                        })
                        .fold(f64::MAX, f64::min)
                })
                .sum::<f64>()
                / m as f64;
            assert!(
                mse <= previous,
                "mse {mse} at N={n} above previous {previous}"
            );
            previous = mse;
        }
    }

    #[test]
    fn bad_pixel_capping() {
        let shape = TileStackShape {
            channels: 1,
            tile: 4,
        };
        let truth: Vec<f64> = (0..shape.len()).map(|i| i as f64 * 0.25).collect();
        let mut recon = truth.clone();
        // No violations: empty table.
        let table = build_bad_pixel_table(&recon, &truth, shape, &[1.0]).unwrap();
        assert!(table.entries.is_empty());
        assert_eq!(table_storage_bits(&table, shape), 0);

        // One pixel off by twice the threshold.
        recon[37] += 2.0;
        let table = build_bad_pixel_table(&recon, &truth, shape, &[1.0]).unwrap();
        assert_eq!(table.entries.len(), 1);
        apply_bad_pixel_table(&mut recon, shape, &table).unwrap();
        let max_err = recon
            .iter()
            .zip(truth.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1.0);
        // 12·16 cells → 8 address bits, plus 32 value bits.
        assert_eq!(table_storage_bits(&table, shape), 8 + 32);
    }

    #[test]
    fn random_violators_are_all_capped() {
        let shape = TileStackShape {
            channels: 2,
            tile: 8,
        };
        let mut rng = SplitMix64::new(812);
        let truth: Vec<f64> = (0..shape.len()).map(|_| rng.next_gaussian()).collect();
        let mut recon = truth.clone();
        let mut injected = 0;
        for i in 0..recon.len() {
            if rng.next_f64() < 0.05 {
                recon[i] += 3.0;
                injected += 1;
            }
        }
        let thresholds = [1.0, 1.0];
        let table = build_bad_pixel_table(&recon, &truth, shape, &thresholds).unwrap();
        assert_eq!(table.entries.len(), injected);
        apply_bad_pixel_table(&mut recon, shape, &table).unwrap();
        for (c, chunk) in recon.chunks(shape.len() / 2).enumerate() {
            let t = &truth[c * chunk.len()..(c + 1) * chunk.len()];
            for (a, b) in chunk.iter().zip(t.iter()) {
                assert!((a - b).abs() <= thresholds[c]);
            }
        }
        let expected_bits = injected as u64 * (shape.address_bits() as u64 + 32);
        assert_eq!(table_storage_bits(&table, shape), expected_bits);
    }

    #[test]
    fn bad_pixel_csv_round_trip() {
        let table = BadPixelTable {
            entries: vec![
                BadPixel {
                    tile: 3,
                    row: 10,
                    col: 200,
                    channel: 1,
                    value: -7.25,
                },
                BadPixel {
                    tile: 11,
                    row: 0,
                    col: 0,
                    channel: 0,
                    value: 1.5e-3,
                },
            ],
            thresholds: vec![1.0, 0.5],
        };
        let path = tmpdir().join("bp.csv");
        table.save_csv(&path).unwrap();
        let back = BadPixelTable::load_csv(&path, vec![1.0, 0.5]).unwrap();
        assert_eq!(table, back);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn calibration_examples() {
        let already = vec![0.0, 2.0];
        let out = calibrate(&already, 1.0, 1.0).unwrap();
        for (a, b) in out.iter().zip(already.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let out = calibrate(&[0.0, 2.0], 10.0, 2.0).unwrap();
        assert_eq!(out, vec![8.0, 12.0]);
        assert!(calibrate(&[3.0, 3.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn calibration_moments_verified_post_hoc() {
        let mut rng = SplitMix64::new(6);
        let tile: Vec<f64> = (0..256).map(|_| rng.next_gaussian() * 3.0 + 7.0).collect();
        let out = calibrate(&tile, -2.0, 0.5).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        let std =
            (out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / out.len() as f64).sqrt();
        assert!((mean + 2.0).abs() < 1e-10);
        assert!((std - 0.5).abs() < 1e-10);
    }

    #[test]
    fn codebook_and_tile_files_round_trip() {
        let mut rng = SplitMix64::new(90);
        let patches: Vec<f64> = (0..1600).map(|_| rng.next_gaussian()).collect();
        let cb = train_codebook(&patches, 4, 300, 42).unwrap(); // 2-byte indices
        let dir = tmpdir();
        let cb_path = dir.join("book.cbk");
        cb.save(&cb_path).unwrap();
        let cb2 = Codebook::load(&cb_path).unwrap();
        assert_eq!(cb, cb2);
        assert_eq!(cb2.bits_per_index(), 9);

        let tile: Vec<f64> = (0..16 * 16).map(|_| rng.next_gaussian()).collect();
        let q = quantize(&tile, 1, 16, 2, &cb).unwrap();
        let q_path = dir.join("tile.qti");
        q.save(&q_path).unwrap();
        let q2 = QuantizedTile::load(&q_path).unwrap();
        assert_eq!(q.index_map, q2.index_map);
        assert_eq!(q2.n_codewords, 300);
        std::fs::remove_file(&cb_path).ok();
        std::fs::remove_file(&q_path).ok();
    }
}
