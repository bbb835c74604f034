//! Spherical harmonic analysis and synthesis on ring-structured grids.
//!
//! Analysis approximates a_{lm} = ∫ f Ȳ_m^l dΩ by the quadrature sum
//! Σ_i f(θ_i, φ_i) Ȳ_m^l(θ_i, φ_i) sin θ_i Δθ_i Δφ_i, grouped by
//! isolatitude ring: each ring contributes g_m · λ_m^l(cos θ_j) · w_j with
//! g_m the ring DFT Σ_k f_k e^{−i m φ_k}. On equally spaced rings the DFT
//! is one FFT (forward kernel e^{−i2πkn/N}, no normalization — all
//! normalization lives in the quadrature weights) followed by the
//! first-pixel phase e^{−i m φ_0}.
//!
//! Synthesis is the real-valued form
//! f̂ = Re[Σ_l Σ_{m=0}^l (2 − δ_{m0}) a_{lm} Y_m^l], evaluated per ring by
//! an inverse FFT of the folded spectrum.
//!
//! Orders beyond a ring's Nyquist (m > count/2) are truncated — they are
//! not aliased back — both here and in the direct-summation oracles, so the
//! FFT path and the oracles compute the same finite sum.
//!
//! Per-ring work parallelizes freely; cross-ring reductions accumulate in
//! ascending ring order, so results are bit-identical for any thread count.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grids::Grid;
use crate::legendre::{lambda_triangle, tri_column_offset, tri_index, tri_len, LegendreTable};
use crate::rng::SplitMix64;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Spherical harmonic coefficients a_{lm} for 0 ≤ m ≤ l ≤ l_max, m-major
/// triangular storage.
///
/// For coefficients of a real field the stored half determines the rest via
/// a_{l,−m} = (−1)^m conj(a_{lm}); nothing redundant is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCoeffs {
    l_max: usize,
    data: Vec<Complex64>,
}

impl SphericalCoeffs {
    pub fn zeros(l_max: usize) -> Self {
        SphericalCoeffs {
            l_max,
            data: vec![Complex64::new(0.0, 0.0); tri_len(l_max)],
        }
    }

    /// Build from explicit (l, m, value) entries, zeros elsewhere.
    pub fn from_entries(l_max: usize, entries: &[(usize, usize, Complex64)]) -> Result<Self> {
        let mut c = Self::zeros(l_max);
        for &(l, m, v) in entries {
            if m > l || l > l_max {
                return Err(Error::domain(format!(
                    "coefficient (l={l}, m={m}) outside triangle l_max={l_max}"
                )));
            }
            c.data[tri_index(l_max, m, l)] = v;
        }
        Ok(c)
    }

    /// Random band-limited coefficients: unit normal real and imaginary
    /// parts, with Im a_{l0} = 0 so the coefficients describe a real field.
    pub fn random(l_max: usize, rng: &mut SplitMix64) -> Self {
        let mut c = Self::zeros(l_max);
        for m in 0..=l_max {
            for l in m..=l_max {
                let re = rng.next_gaussian();
                let im = if m == 0 { 0.0 } else { rng.next_gaussian() };
                c.data[tri_index(l_max, m, l)] = Complex64::new(re, im);
            }
        }
        c
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.data[tri_index(self.l_max, m, l)]
    }

    pub fn set(&mut self, l: usize, m: usize, v: Complex64) {
        self.data[tri_index(self.l_max, m, l)] = v;
    }

    /// Column m as a contiguous slice over l = m..=l_max.
    pub fn column(&self, m: usize) -> &[Complex64] {
        let off = tri_column_offset(self.l_max, m);
        &self.data[off..off + (self.l_max - m + 1)]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Relative L2 distance to another coefficient set (shared l_max).
    pub fn relative_l2_distance(&self, other: &SphericalCoeffs) -> f64 {
        assert_eq!(self.l_max, other.l_max);
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        (num / den).sqrt()
    }

    /// Write `ALM1 | l_max: u32 | (re, im) f64 LE in m-major order`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"ALM1")?;
        w.write_all(&(self.l_max as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"ALM1" {
            return Err(Error::Format("not an ALM1 coefficient file".into()));
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let l_max = u32::from_le_bytes(buf4) as usize;
        let n = tri_len(l_max);
        let mut data = Vec::with_capacity(n);
        let mut buf8 = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf8)?;
            let re = f64::from_le_bytes(buf8);
            r.read_exact(&mut buf8)?;
            let im = f64::from_le_bytes(buf8);
            data.push(Complex64::new(re, im));
        }
        Ok(SphericalCoeffs { l_max, data })
    }
}

/// Which power-spectrum summation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMode {
    /// I_l = Σ_{m=0}^{l−1} |a_{lm}|² / (2l+1), exactly as printed.
    PaperLiteral,
    /// I_l = Σ_{m=0}^{l} (2 − δ_{m0}) |a_{lm}|² / (2l+1): the full power of
    /// a real field, counting −m partners. Default.
    RealField,
}

/// Per-degree power I_l of an expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub values: Vec<f64>,
    pub mode: SpectrumMode,
}

impl PowerSpectrum {
    /// Emit as CSV with header `l,I_l`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "l,I_l")?;
        for (l, v) in self.values.iter().enumerate() {
            writeln!(w, "{l},{v}")?;
        }
        Ok(())
    }
}

pub fn power_spectrum(coeffs: &SphericalCoeffs, mode: SpectrumMode) -> PowerSpectrum {
    let l_max = coeffs.l_max();
    let mut values = vec![0.0; l_max + 1];
    for (l, out) in values.iter_mut().enumerate() {
        let norm = 1.0 / (2.0 * l as f64 + 1.0);
        let mut acc = 0.0;
        match mode {
            SpectrumMode::PaperLiteral => {
                for m in 0..l {
                    acc += coeffs.get(l, m).norm_sqr();
                }
            }
            SpectrumMode::RealField => {
                for m in 0..=l {
                    let mult = if m == 0 { 1.0 } else { 2.0 };
                    acc += mult * coeffs.get(l, m).norm_sqr();
                }
            }
        }
        *out = acc * norm;
    }
    PowerSpectrum { values, mode }
}

/// Highest order a ring of `count` pixels can resolve, capped at l_max.
#[inline]
fn ring_m_max(l_max: usize, count: usize) -> usize {
    l_max.min(count / 2)
}

fn check_table(grid: &Grid, l_max: usize, table: &LegendreTable) -> Result<()> {
    if l_max > table.l_max() {
        return Err(Error::domain(format!(
            "l_max {l_max} exceeds table l_max {}",
            table.l_max()
        )));
    }
    let ring_colats = grid.ring_colatitudes();
    if table.colatitudes() != ring_colats.as_slice() {
        return Err(Error::mismatch(
            "legendre table colatitudes do not match the grid's rings",
        ));
    }
    Ok(())
}

fn plan_ffts(grid: &Grid, forward: bool) -> HashMap<usize, Arc<dyn Fft<f64>>> {
    let mut planner = FftPlanner::new();
    let mut plans: HashMap<usize, Arc<dyn Fft<f64>>> = HashMap::new();
    for ring in grid.rings() {
        plans.entry(ring.count).or_insert_with(|| {
            if forward {
                planner.plan_fft_forward(ring.count)
            } else {
                planner.plan_fft_inverse(ring.count)
            }
        });
    }
    plans
}

/// Per-ring weighted, phase-corrected spectra: c_{j,m} = g_m e^{−imφ_0} w_j
/// for m = 0..=m_max(j). Rings with zero quadrature weight yield an empty
/// spectrum (lat/lon pole rows contribute nothing to analysis).
fn ring_spectra<F>(grid: &Grid, l_max: usize, dft: F) -> Vec<Vec<Complex64>>
where
    F: Fn(usize) -> Vec<Complex64> + Sync,
{
    let rings = grid.rings();
    (0..rings.len())
        .into_par_iter()
        .map(|j| {
            let ring = &rings[j];
            if ring.quadrature_weight == 0.0 {
                return Vec::new();
            }
            let m_max = ring_m_max(l_max, ring.count);
            let bins = dft(j);
            (0..=m_max)
                .map(|m| {
                    let phase = Complex64::from_polar(1.0, -(m as f64) * ring.phi_0);
                    bins[m] * phase * ring.quadrature_weight
                })
                .collect()
        })
        .collect()
}

/// Accumulate a_{lm} = Σ_j c_{j,m} λ_m^l(cos θ_j), rings in ascending order.
fn accumulate_columns(
    spectra: &[Vec<Complex64>],
    l_max: usize,
    table: &LegendreTable,
) -> SphericalCoeffs {
    let mut coeffs = SphericalCoeffs::zeros(l_max);
    let mut columns: Vec<(usize, &mut [Complex64])> = Vec::with_capacity(l_max + 1);
    let mut rest = coeffs.data.as_mut_slice();
    for m in 0..=l_max {
        let (head, tail) = rest.split_at_mut(l_max - m + 1);
        columns.push((m, head));
        rest = tail;
    }
    columns.into_par_iter().for_each(|(m, column)| {
        for (j, ring_spec) in spectra.iter().enumerate() {
            if m >= ring_spec.len() {
                continue;
            }
            let c = ring_spec[m];
            let lambda = table.column(j, m);
            for (out, &lam) in column.iter_mut().zip(lambda.iter()) {
                *out += c * lam;
            }
        }
    });
    coeffs
}

/// Forward transform (FFT fast path).
pub fn analyze(
    field: &ScalarField,
    l_max: usize,
    table: &LegendreTable,
) -> Result<SphericalCoeffs> {
    let grid = field.grid.as_ref();
    check_table(grid, l_max, table)?;
    let plans = plan_ffts(grid, true);

    let spectra = ring_spectra(grid, l_max, |j| {
        let ring = &grid.rings()[j];
        let pixels = grid.ring_pixels(j);
        let mut buf: Vec<Complex64> = (0..ring.count)
            .map(|k| Complex64::new(field.values[pixels.get(k)], 0.0))
            .collect();
        plans[&ring.count].process(&mut buf);
        buf
    });
    Ok(accumulate_columns(&spectra, l_max, table))
}

/// Forward transform by explicit per-pixel summation (test oracle).
///
/// Identical quadrature and truncation as [`analyze`]; the ring DFT is
/// computed term by term from each pixel's actual longitude, with no FFT
/// and no equal-spacing assumption.
pub fn analyze_direct(
    field: &ScalarField,
    l_max: usize,
    table: &LegendreTable,
) -> Result<SphericalCoeffs> {
    let grid = field.grid.as_ref();
    check_table(grid, l_max, table)?;

    let spectra = ring_spectra(grid, l_max, |j| {
        let ring = &grid.rings()[j];
        let pixels = grid.ring_pixels(j);
        let m_max = ring_m_max(l_max, ring.count);
        let spacing = 2.0 * std::f64::consts::PI / ring.count as f64;
        let mut bins = vec![Complex64::new(0.0, 0.0); m_max + 1];
        for k in 0..ring.count {
            let v = field.values[pixels.get(k)];
            // Relative longitude; phi_0 is applied by the shared phase step.
            let rel = k as f64 * spacing;
            for (m, bin) in bins.iter_mut().enumerate() {
                *bin += v * Complex64::from_polar(1.0, -(m as f64) * rel);
            }
        }
        bins
    });
    Ok(accumulate_columns(&spectra, l_max, table))
}

/// Per-ring order spectra h_{j,m} = Σ_l a_{lm} λ_m^l(cos θ_j).
fn ring_order_spectra(
    coeffs: &SphericalCoeffs,
    grid: &Grid,
    table: &LegendreTable,
) -> Vec<Vec<Complex64>> {
    let l_max = coeffs.l_max();
    let rings = grid.rings();
    (0..rings.len())
        .into_par_iter()
        .map(|j| {
            let m_max = ring_m_max(l_max, rings[j].count);
            (0..=m_max)
                .map(|m| {
                    let lambda = table.column(j, m);
                    let column = coeffs.column(m);
                    column
                        .iter()
                        .zip(lambda.iter())
                        .map(|(a, &lam)| a * lam)
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Inverse transform (FFT fast path). Rings with fewer than 2 l_max + 1
/// pixels truncate the expansion at their Nyquist order.
pub fn synthesize(
    coeffs: &SphericalCoeffs,
    grid: &Arc<Grid>,
    table: &LegendreTable,
) -> Result<ScalarField> {
    check_table(grid, coeffs.l_max(), table)?;
    let spectra = ring_order_spectra(coeffs, grid, table);
    let plans = plan_ffts(grid, false);

    let rings = grid.rings();
    let per_ring: Vec<Vec<f64>> = (0..rings.len())
        .into_par_iter()
        .map(|j| {
            let ring = &rings[j];
            let mut spec = vec![Complex64::new(0.0, 0.0); ring.count];
            for (m, &h) in spectra[j].iter().enumerate() {
                let mult = if m == 0 { 1.0 } else { 2.0 };
                let phase = Complex64::from_polar(1.0, m as f64 * ring.phi_0);
                spec[m] = h * phase * mult;
            }
            plans[&ring.count].process(&mut spec);
            spec.into_iter().map(|v| v.re).collect()
        })
        .collect();

    scatter_rings(grid, per_ring)
}

/// Inverse transform by direct trigonometric summation on a grid, with the
/// same per-ring truncation as [`synthesize`] (test oracle).
pub fn synthesize_direct_on_grid(
    coeffs: &SphericalCoeffs,
    grid: &Arc<Grid>,
    table: &LegendreTable,
) -> Result<ScalarField> {
    check_table(grid, coeffs.l_max(), table)?;
    let spectra = ring_order_spectra(coeffs, grid, table);

    let rings = grid.rings();
    let per_ring: Vec<Vec<f64>> = (0..rings.len())
        .into_par_iter()
        .map(|j| {
            let ring = &rings[j];
            let spacing = 2.0 * std::f64::consts::PI / ring.count as f64;
            (0..ring.count)
                .map(|k| {
                    let phi = ring.phi_0 + k as f64 * spacing;
                    spectra[j]
                        .iter()
                        .enumerate()
                        .map(|(m, &h)| {
                            let mult = if m == 0 { 1.0 } else { 2.0 };
                            mult * (h * Complex64::from_polar(1.0, m as f64 * phi)).re
                        })
                        .sum()
                })
                .collect()
        })
        .collect();

    scatter_rings(grid, per_ring)
}

fn scatter_rings(grid: &Arc<Grid>, per_ring: Vec<Vec<f64>>) -> Result<ScalarField> {
    let mut values = vec![0.0; grid.n_pixels()];
    for (j, ring_values) in per_ring.into_iter().enumerate() {
        let pixels = grid.ring_pixels(j);
        for (k, v) in ring_values.into_iter().enumerate() {
            values[pixels.get(k)] = v;
        }
    }
    ScalarField::from_computation(grid.clone(), values, "")
}

/// Evaluate the real-valued synthesis at scattered (θ, φ) points.
///
/// No ring structure and no truncation: the full triangle contributes to
/// every point.
pub fn synthesize_direct(coeffs: &SphericalCoeffs, points: &[(f64, f64)]) -> Vec<f64> {
    let l_max = coeffs.l_max();
    points
        .par_iter()
        .map(|&(theta, phi)| {
            let tri = lambda_triangle(l_max, theta);
            let mut acc = 0.0;
            for m in 0..=l_max {
                let off = tri_column_offset(l_max, m);
                let column = coeffs.column(m);
                let mut h = Complex64::new(0.0, 0.0);
                for (i, a) in column.iter().enumerate() {
                    h += a * tri[off + i];
                }
                let mult = if m == 0 { 1.0 } else { 2.0 };
                acc += mult * (h * Complex64::from_polar(1.0, m as f64 * phi)).re;
            }
            acc
        })
        .collect()
}
