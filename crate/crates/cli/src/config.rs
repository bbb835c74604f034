//! JSON run configurations, one schema per subcommand.
//!
//! Configs carry every parameter that affects results, so a run is
//! reproducible from the config file alone; command-line flags only
//! override paths and the thread count. All randomness derives from the
//! single `seed` field through the splittable counter-based generator.

use healpipe_core::field::Dtype;
use healpipe_core::grids::GridDescriptor;
use healpipe_core::sht::SpectrumMode;
use serde::Deserialize;
use std::path::PathBuf;

fn default_dtype() -> Dtype {
    Dtype::F64
}

fn default_spectrum_mode() -> SpectrumMode {
    SpectrumMode::RealField
}

/// Test-field generator selection.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Constant { value: f64 },
    Harmonic { l: usize, m: usize, amplitude: f64 },
    RandomBandlimited { l_max: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFieldConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridDescriptor,
    pub kind: SynthKind,
    #[serde(default)]
    pub units: String,
    #[serde(default = "default_dtype")]
    pub dtype: Dtype,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub input: PathBuf,
    pub nside: usize,
    #[serde(default)]
    pub pad: usize,
    /// Emit padded {12, t+2p, t+2p} tile stacks instead of a plain
    /// HEALPix field.
    #[serde(default)]
    pub padded: bool,
    #[serde(default = "default_dtype")]
    pub dtype: Dtype,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReprojectConfig {
    /// HEALPix field or padded tile stack (padded stacks are blended
    /// first).
    pub input: PathBuf,
    pub l_max: usize,
    pub n_lat: usize,
    pub n_lon: usize,
    /// Permit l_max above the 2·nside quadrature sanity bound.
    #[serde(default)]
    pub allow_lmax_override: bool,
    #[serde(default = "default_dtype")]
    pub dtype: Dtype,
    /// Optional Legendre table cache for the HEALPix analysis rings.
    #[serde(default)]
    pub legendre_cache: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub input: PathBuf,
    pub l_max: usize,
    #[serde(default = "default_spectrum_mode")]
    pub mode: SpectrumMode,
    pub out: PathBuf,
    /// Also write the analysis coefficients.
    #[serde(default)]
    pub out_coeffs: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub truth: PathBuf,
    pub recon: PathBuf,
    #[serde(default)]
    pub variable: String,
    #[serde(default)]
    pub level: String,
    /// Error thresholds for bad-pixel fractions.
    #[serde(default)]
    pub thresholds: Vec<f64>,
    /// Histogram bin width; no histogram when absent.
    #[serde(default)]
    pub histogram_bin_width: Option<f64>,
    #[serde(default)]
    pub out_json: Option<PathBuf>,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
    #[serde(default)]
    pub out_histogram: Option<PathBuf>,
}

/// Either train a codebook on the input's patches or load one.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookSource {
    Train { n: usize, patch: usize, seed: u64 },
    Load { path: PathBuf, patch: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressConfig {
    /// HEALPix field {12,t,t}, padded stack, or multi-channel {C,12,t,t}.
    pub input: PathBuf,
    pub codebook: CodebookSource,
    /// Store per-tile (mean, std) and restore moments on decompression.
    #[serde(default)]
    pub calibrate: bool,
    /// Per-channel thresholds for the bad-pixel lookup table.
    #[serde(default)]
    pub bad_pixel_thresholds: Option<Vec<f64>>,
    /// Bits per sample of the uncompressed representation for ratio
    /// accounting.
    #[serde(default = "default_bits_per_sample")]
    pub bits_per_sample: u32,
    pub out_dir: PathBuf,
}

fn default_bits_per_sample() -> u32 {
    32
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompressConfig {
    /// Directory written by `compress`.
    pub dir: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripCodec {
    pub n: usize,
    pub patch: usize,
    #[serde(default)]
    pub calibrate: bool,
    #[serde(default)]
    pub bad_pixel_thresholds: Option<Vec<f64>>,
}

/// Composite pipeline: synthesize (or load) a lat/lon field, project onto
/// padded HEALPix tiles, optionally quantize/reconstruct, blend, analyze,
/// synthesize back to lat/lon and score.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripConfig {
    #[serde(default)]
    pub seed: u64,
    pub n_lat: usize,
    pub n_lon: usize,
    pub kind: SynthKind,
    pub nside: usize,
    #[serde(default)]
    pub pad: usize,
    pub l_max: usize,
    #[serde(default)]
    pub allow_lmax_override: bool,
    #[serde(default = "default_spectrum_mode")]
    pub spectrum_mode: SpectrumMode,
    #[serde(default)]
    pub codec: Option<RoundtripCodec>,
    #[serde(default = "default_dtype")]
    pub dtype: Dtype,
    pub out_dir: PathBuf,
}
