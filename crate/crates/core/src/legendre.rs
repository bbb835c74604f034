//! Normalized associated Legendre polynomial tables.
//!
//! The quantity tabulated is λ_m^l(cos θ) = sqrt((2l+1)/(4π) · (l−m)!/(l+m)!) · P_m^l(cos θ),
//! the colatitude part of the spherical harmonic Y_m^l. Values are filled with
//! the stability-corrected recurrence set
//!
//!   λ_0^0(x)       = sqrt(1/(4π))
//!   λ_{l+1}^{l+1}  = −μ_{l+1} · sqrt(1−x²) · λ_l^l
//!   λ_l^{l+1}      = ν_{l+1} · x · λ_l^l
//!   λ_m^l          = α_m^l · x · λ_m^{l−1} − β_m^l · λ_m^{l−2}   (m ≤ l−2)
//!
//! which keeps every intermediate in a representable range up to high degree
//! (the unnormalized P_m^l overflow near l ≈ 150). The Condon-Shortley phase
//! is embedded in the −μ diagonal step, matching the sign convention of the
//! factorial-form oracle below and of SciPy's `sph_harm`.
//!
//! Storage is m-major: for each colatitude, column m holds λ_m^l for
//! l = m..l_max contiguously, so the transform's inner loop over l for a
//! fixed Fourier order m walks consecutive memory.

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

/// Default memory budget for table construction (bytes).
pub const DEFAULT_TABLE_BUDGET: usize = 4 << 30;

/// Number of (m, l) pairs with 0 ≤ m ≤ l ≤ l_max.
pub fn tri_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 2) / 2
}

/// Index of (m, l) in the m-major triangular layout.
///
/// Column m starts at offset m·(l_max+1) − m(m−1)/2 and holds l = m..=l_max.
#[inline]
pub fn tri_index(l_max: usize, m: usize, l: usize) -> usize {
    debug_assert!(m <= l && l <= l_max);
    tri_column_offset(l_max, m) + (l - m)
}

/// Offset of column m in the m-major triangular layout.
#[inline]
pub fn tri_column_offset(l_max: usize, m: usize) -> usize {
    m * (2 * l_max + 3 - m) / 2
}

/// μ_l = sqrt(1 + 1/(2l)), the diagonal-step factor.
#[inline]
pub fn coeff_mu(l: usize) -> f64 {
    debug_assert!(l >= 1);
    (1.0 + 1.0 / (2.0 * l as f64)).sqrt()
}

/// ν_l = sqrt(1 + 2l), the off-diagonal-step factor.
#[inline]
pub fn coeff_nu(l: usize) -> f64 {
    debug_assert!(l >= 1);
    (1.0 + 2.0 * l as f64).sqrt()
}

/// α_m^l = sqrt((2l+1)/(2l−3) · (4(l−1)²−1)/(l²−m²)).
#[inline]
fn coeff_alpha(l: usize, m: usize) -> f64 {
    let lf = l as f64;
    let mf = m as f64;
    ((2.0 * lf + 1.0) / (2.0 * lf - 3.0) * (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)
        / (lf * lf - mf * mf))
        .sqrt()
}

/// β_m^l = sqrt((2l+1)/(2l−3) · ((l−1)²−m²)/(l²−m²)).
#[inline]
fn coeff_beta(l: usize, m: usize) -> f64 {
    let lf = l as f64;
    let mf = m as f64;
    ((2.0 * lf + 1.0) / (2.0 * lf - 3.0) * ((lf - 1.0) * (lf - 1.0) - mf * mf)
        / (lf * lf - mf * mf))
        .sqrt()
}

/// The four recurrence factors for a given (l, m).
///
/// `alpha`/`beta` are `None` when their three-term step does not apply,
/// i.e. unless l ≥ 2 and m ≤ l−2 (the diagonal and off-diagonal steps
/// cover m = l and m = l−1).
#[derive(Debug, Clone, Copy)]
pub struct RecurrenceCoeffs {
    pub mu: f64,
    pub nu: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

/// Evaluate μ_l, ν_l and, where defined, α_m^l and β_m^l.
pub fn recurrence_coefficients(l: usize, m: usize) -> Result<RecurrenceCoeffs> {
    if l < 1 {
        return Err(Error::domain("recurrence coefficients require l >= 1"));
    }
    if m > l {
        return Err(Error::domain(format!("order m={m} exceeds degree l={l}")));
    }
    let (alpha, beta) = if l >= 2 && m + 2 <= l {
        (Some(coeff_alpha(l, m)), Some(coeff_beta(l, m)))
    } else {
        (None, None)
    };
    Ok(RecurrenceCoeffs {
        mu: coeff_mu(l),
        nu: coeff_nu(l),
        alpha,
        beta,
    })
}

/// α_m^l and β_m^l, erroring when the three-term window m ≤ l−2 is violated.
pub fn alpha_beta(l: usize, m: usize) -> Result<(f64, f64)> {
    if l < 2 || m + 2 > l {
        return Err(Error::domain(format!(
            "alpha/beta undefined for l={l}, m={m}: three-term step needs m <= l-2"
        )));
    }
    Ok((coeff_alpha(l, m), coeff_beta(l, m)))
}

/// Fill one colatitude's triangle of λ_m^l values, m-major.
///
/// `sqrt(1−x²)` is taken as `sin θ` from the angle itself rather than from
/// x = cos θ, which avoids cancellation near the poles; at θ exactly 0 or π
/// the sine is forced to 0 so that every m > 0 value vanishes exactly.
pub fn lambda_triangle(l_max: usize, colatitude: f64) -> Vec<f64> {
    let mut out = vec![0.0; tri_len(l_max)];
    fill_triangle(l_max, colatitude, &mut out);
    out
}

fn fill_triangle(l_max: usize, colatitude: f64, out: &mut [f64]) {
    let x = colatitude.cos();
    let s = if colatitude == 0.0 || colatitude == std::f64::consts::PI {
        0.0
    } else {
        colatitude.sin()
    };

    let lambda_00 = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();

    // Diagonal chain λ_m^m, then each m-column independently.
    let mut diag = lambda_00;
    for m in 0..=l_max {
        if m > 0 {
            diag = -coeff_mu(m) * s * diag;
        }
        let col = tri_column_offset(l_max, m);
        out[col] = diag;
        if m < l_max {
            out[col + 1] = coeff_nu(m + 1) * x * diag;
        }
        for l in (m + 2)..=l_max {
            let idx = col + (l - m);
            out[idx] = coeff_alpha(l, m) * x * out[idx - 1] - coeff_beta(l, m) * out[idx - 2];
        }
    }
}

/// Precomputed λ_m^l(cos θ) for a fixed colatitude set.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreTable {
    l_max: usize,
    colatitudes: Vec<f64>,
    /// One m-major triangle per colatitude, colatitude-major.
    values: Vec<f64>,
}

impl LegendreTable {
    /// Build the table for all colatitudes with the default memory budget.
    pub fn build(l_max: usize, colatitudes: &[f64]) -> Result<Self> {
        Self::build_with_budget(l_max, colatitudes, DEFAULT_TABLE_BUDGET)
    }

    /// Build the table, refusing to allocate past `budget_bytes`.
    ///
    /// Construction parallelizes over colatitudes; each triangle is filled
    /// by an identical sequential recurrence, so the result is bit-identical
    /// regardless of thread count.
    pub fn build_with_budget(
        l_max: usize,
        colatitudes: &[f64],
        budget_bytes: usize,
    ) -> Result<Self> {
        for &theta in colatitudes {
            if !(0.0..=std::f64::consts::PI).contains(&theta) || theta.is_nan() {
                return Err(Error::domain(format!("colatitude {theta} outside [0, pi]")));
            }
        }
        let triangle = tri_len(l_max);
        let bytes = triangle
            .checked_mul(colatitudes.len())
            .and_then(|n| n.checked_mul(std::mem::size_of::<f64>()))
            .ok_or_else(|| Error::Resource("legendre table size overflows usize".into()))?;
        if bytes > budget_bytes {
            return Err(Error::Resource(format!(
                "legendre table needs {bytes} bytes, budget is {budget_bytes}"
            )));
        }

        let mut values = vec![0.0; triangle * colatitudes.len()];
        values
            .par_chunks_mut(triangle)
            .zip(colatitudes.par_iter())
            .for_each(|(chunk, &theta)| fill_triangle(l_max, theta, chunk));

        Ok(LegendreTable {
            l_max,
            colatitudes: colatitudes.to_vec(),
            values,
        })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn colatitudes(&self) -> &[f64] {
        &self.colatitudes
    }

    /// The full m-major triangle at colatitude index `i`.
    pub fn triangle(&self, i: usize) -> &[f64] {
        let triangle = tri_len(self.l_max);
        &self.values[i * triangle..(i + 1) * triangle]
    }

    /// λ_m^l for l = m..=l_max at colatitude index `i`, contiguous in l.
    pub fn column(&self, i: usize, m: usize) -> &[f64] {
        let tri = self.triangle(i);
        let off = tri_column_offset(self.l_max, m);
        &tri[off..off + (self.l_max - m + 1)]
    }

    /// Single λ_m^l value at colatitude index `i`.
    pub fn value(&self, i: usize, m: usize, l: usize) -> f64 {
        self.triangle(i)[tri_index(self.l_max, m, l)]
    }

    /// Write the binary cache: `LGT1`, l_max, n_theta, colatitudes, values.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"LGT1")?;
        w.write_all(&(self.l_max as u32).to_le_bytes())?;
        w.write_all(&(self.colatitudes.len() as u32).to_le_bytes())?;
        for &theta in &self.colatitudes {
            w.write_all(&theta.to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a binary cache produced by [`LegendreTable::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"LGT1" {
            return Err(Error::Format("not a LGT1 legendre cache".into()));
        }
        let l_max = read_u32(&mut r)? as usize;
        let n_theta = read_u32(&mut r)? as usize;
        let mut colatitudes = Vec::with_capacity(n_theta);
        for _ in 0..n_theta {
            colatitudes.push(read_f64(&mut r)?);
        }
        let n_values = tri_len(l_max) * n_theta;
        let mut values = Vec::with_capacity(n_values);
        for _ in 0..n_values {
            values.push(read_f64(&mut r)?);
        }
        Ok(LegendreTable {
            l_max,
            colatitudes,
            values,
        })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// λ_m^l(x) by the explicit factorial formula, without recurrences.
///
/// P_l is expanded from its integer coefficient form, differentiated m
/// times, and combined with the Condon-Shortley factor (−1)^m (1−x²)^{m/2}
/// and the printed normalization. Exact integer arithmetic (u128/i128)
/// keeps every combinatorial quantity representable for l ≤ 12; this is a
/// test oracle, not a fast path.
pub fn direct_legendre_oracle(l: usize, m: usize, x: f64) -> Result<f64> {
    if l > 12 {
        return Err(Error::domain(format!(
            "direct oracle limited to l <= 12, got {l}"
        )));
    }
    if m > l {
        return Err(Error::domain(format!("order m={m} exceeds degree l={l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("argument {x} outside [-1, 1]")));
    }

    // Coefficients of P_l: P_l(x) = 2^{-l} Σ_k (-1)^k C(l,k) C(2l-2k,l) x^{l-2k}.
    // coeffs[p] holds the (exact, pre-2^{-l}) integer coefficient of x^p.
    let mut coeffs = vec![0i128; l + 1];
    for k in 0..=(l / 2) {
        let sign = if k % 2 == 0 { 1i128 } else { -1i128 };
        let c = sign * binomial(l, k) * binomial(2 * l - 2 * k, l);
        coeffs[l - 2 * k] = c;
    }

    // m-th derivative: coefficient of x^p picks up p!/(p-m)! and shifts down.
    let mut deriv = vec![0i128; l + 1];
    for p in m..=l {
        let mut factor = 1i128;
        for j in 0..m {
            factor *= (p - j) as i128;
        }
        deriv[p - m] = coeffs[p] * factor;
    }

    // Horner evaluation of the derivative polynomial.
    let mut poly = 0.0f64;
    for p in (0..=(l - m)).rev() {
        poly = poly * x + deriv[p] as f64;
    }
    poly /= (1u128 << l) as f64;

    let condon_shortley = if m % 2 == 0 { 1.0 } else { -1.0 };
    let p_ml = condon_shortley * (1.0 - x * x).powf(m as f64 / 2.0) * poly;

    // (l-m)!/(l+m)! as 1 / Π_{j=l-m+1}^{l+m} j, exact in u128 for l <= 12.
    let mut ratio_denom = 1u128;
    for j in (l - m + 1)..=(l + m) {
        ratio_denom *= j as u128;
    }
    let norm = ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) / ratio_denom as f64).sqrt();

    Ok(norm * p_ml)
}

fn binomial(n: usize, k: usize) -> i128 {
    let k = k.min(n - k);
    let mut num = 1i128;
    let mut den = 1i128;
    for j in 0..k {
        num *= (n - j) as i128;
        den *= (j + 1) as i128;
    }
    num / den
}
