//! Eigenvalue spectra of semidiscretizations.
//!
//! Spectra are stored as plain lists of complex eigenvalues. Everything downstream
//! works on the *reduced* spectrum: eigenvalues in the closed upper half-plane,
//! deduplicated, because polynomials with real coefficients satisfy
//! `|P(conj z)| = |P(z)|`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance (w.r.t. `max |λ|`) for clamping spurious positive real parts
/// and for the default deduplication distance.
pub const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    File,
    Generator,
}

/// A validated list of eigenvalues, all with non-positive real part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
    pub label: String,
    pub source: SpectrumSource,
}

impl Spectrum {
    /// Validates the eigenvalues. Real parts up to `REL_TOL * max|λ|` are clamped to
    /// zero, anything larger is rejected.
    pub fn new(eigenvalues: Vec<Complex64>, label: impl Into<String>, source: SpectrumSource) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Empty("spectrum has no eigenvalues".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !l.re.is_finite() || !l.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite eigenvalue {bad}")));
        }
        let tol = REL_TOL * max_modulus(&eigenvalues);
        let mut eigenvalues = eigenvalues;
        for l in eigenvalues.iter_mut() {
            if l.re > tol {
                return Err(Error::PositiveRealPart { value: format!("{l}"), tolerance: tol });
            }
            if l.re > 0.0 {
                l.re = 0.0;
            }
        }
        Ok(Self { eigenvalues, label: label.into(), source })
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        max_modulus(&self.eigenvalues)
    }

    pub fn min_re(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_im(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.im).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Default deduplication distance, `REL_TOL * max|λ|`.
    pub fn default_dedup_tol(&self) -> f64 {
        REL_TOL * self.max_modulus()
    }

    pub fn scale(&self, dt: f64) -> ScaledSpectrum {
        ScaledSpectrum::new(self.clone(), dt)
    }

    /// Writes the spectrum as `re,im` lines with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.label);
        for l in &self.eigenvalues {
            let _ = writeln!(out, "{:.16e},{:.16e}", l.re, l.im);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

fn max_modulus(values: &[Complex64]) -> f64 {
    values.iter().map(|l| l.norm()).fold(0.0, f64::max)
}

/// A spectrum multiplied by a timestep: `values[m] = dt * λ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSpectrum {
    pub base: Spectrum,
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl ScaledSpectrum {
    pub fn new(base: Spectrum, dt: f64) -> Self {
        let values = base.eigenvalues.iter().map(|l| l * dt).collect();
        Self { base, dt, values }
    }
}

/// Parses spectrum CSV text: one `re,im` pair per line, `#` comments and blank lines
/// ignored.
pub fn parse_spectrum_csv(text: &str, label: &str) -> Result<Spectrum> {
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (re, im) = match (fields.next(), fields.next(), fields.next()) {
            (Some(re), Some(im), None) => (re, im),
            _ => return Err(Error::Parse { line: idx + 1, message: format!("expected `re,im`, got `{line}`") }),
        };
        let parse =
            |s: &str| s.parse::<f64>().map_err(|e| Error::Parse { line: idx + 1, message: format!("`{s}`: {e}") });
        values.push(Complex64::new(parse(re)?, parse(im)?));
    }
    if values.is_empty() {
        return Err(Error::Empty(format!("no eigenvalues in {label}")));
    }
    Spectrum::new(values, label, SpectrumSource::File)
}

/// Supported spectrum file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumFormat {
    Csv,
}

/// Loads a raw spectrum from disk. No reduction is applied.
pub fn load_spectrum(path: &Path, fmt: SpectrumFormat) -> Result<Spectrum> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    match fmt {
        SpectrumFormat::Csv => parse_spectrum_csv(&text, &path.display().to_string()),
    }
}

/// Exact eigenvalues of the first-order upwind finite volume discretization of
/// `u_t + a u_x = 0` on a periodic domain: `λ_k = -(a/Δx)(1 - exp(-iθ_k))`,
/// `θ_k = 2πk/cells`. They lie on the circle of radius `a/Δx` centered at `-a/Δx`.
pub fn generate_fv_advection_circle(cells: usize, domain_length: f64, velocity: f64) -> Result<Spectrum> {
    if cells < 2 {
        return Err(Error::InvalidArgument("cells must be at least 2".into()));
    }
    if !(domain_length > 0.0 && velocity > 0.0) {
        return Err(Error::InvalidArgument("domain length and velocity must be positive".into()));
    }
    let dx = domain_length / cells as f64;
    let rate = velocity / dx;
    let eigenvalues = (0..cells)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / cells as f64;
            -rate * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -theta))
        })
        .collect();
    Spectrum::new(
        eigenvalues,
        format!("fv-advection cells={cells} length={domain_length} velocity={velocity}"),
        SpectrumSource::Generator,
    )
}

/// Equally spaced real eigenvalues from `-extent` to `0` inclusive.
pub fn generate_negative_real_line(points: usize, extent: f64) -> Result<Spectrum> {
    if points < 2 {
        return Err(Error::InvalidArgument("points must be at least 2".into()));
    }
    if !(extent > 0.0) {
        return Err(Error::InvalidArgument("extent must be positive".into()));
    }
    let step = extent / (points - 1) as f64;
    let eigenvalues = (0..points)
        .map(|j| {
            let x = if j + 1 == points { 0.0 } else { -extent + step * j as f64 };
            Complex64::new(x, 0.0)
        })
        .collect();
    Spectrum::new(eigenvalues, format!("real-line points={points} extent={extent}"), SpectrumSource::Generator)
}

/// Keeps the closed upper half-plane and removes near-duplicates.
///
/// Imaginary parts within `dedup_tol` of zero are snapped to the real axis so that
/// real eigenvalues carrying round-off in their imaginary part are not lost. Order of
/// first occurrence is preserved.
pub fn reduce_to_upper(s: &Spectrum, dedup_tol: f64) -> Spectrum {
    let tol = dedup_tol.max(0.0);
    let mut kept: Vec<Complex64> = Vec::with_capacity(s.len() / 2 + 1);
    for &l in s.eigenvalues() {
        if l.im < -tol {
            continue;
        }
        let l = if l.im.abs() <= tol { Complex64::new(l.re, 0.0) } else { l };
        if kept.iter().any(|k| (k - l).norm() <= tol) {
            continue;
        }
        kept.push(l);
    }
    Spectrum { eigenvalues: kept, label: s.label.clone(), source: s.source }
}
