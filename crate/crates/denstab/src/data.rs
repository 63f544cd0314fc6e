//! Seeded synthetic data generators and point-set file I/O.
//!
//! Two generators cover the benchmark experiments: a one-dimensional
//! Gaussian mixture and the two-moons arrangement of noisy half-circles.
//! Both are driven by the crate's portable generator, so a spec with a seed
//! reproduces the same points bit for bit on every platform. Point sets
//! travel as headerless CSV, one point per row with `,` separators, `.`
//! decimals, and LF line endings; lines starting with `#` are skipped on
//! read so files may carry comment headers.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::GaussianMixture;
use crate::points::PointSet;
use crate::rng::Rng;

fn default_radius() -> f64 {
    1.0
}

fn default_noise_sd() -> f64 {
    0.1
}

fn default_separation() -> f64 {
    0.5
}

/// Shape-specific generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Univariate Gaussian mixture: a component is drawn by weight, then a
    /// normal deviate with that component's mean and standard deviation.
    Mixture1d { weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64> },
    /// Two interlocking half-circles with isotropic Gaussian noise. The
    /// upper arc has radius `radius` around the origin; the lower arc is
    /// its reflection centered at `(radius, separation)`. Points come out
    /// as one block per moon, upper first.
    Moons2d {
        #[serde(default)]
        n_per_moon: Option<usize>,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
        #[serde(default = "default_separation")]
        separation: f64,
    },
}

/// A complete generation request: what to draw, how many points, and the
/// seed. Accepted as a JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Total point count. For moons it may be omitted when `n_per_moon` is
    /// given; when both appear they must agree.
    #[serde(default)]
    pub n: Option<usize>,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Parses a spec from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::invalid("spec", format!("could not parse generator JSON: {e}")))
    }

    /// Reads and parses a JSON spec file.
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Draws the point set described by `spec`. Deterministic in `spec.seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<PointSet> {
    let mut rng = Rng::seed_from_u64(spec.seed);
    match &spec.kind {
        GeneratorKind::Mixture1d { weights, means, sds } => {
            let n = spec
                .n
                .ok_or_else(|| Error::invalid("n", "mixture generation needs a total count"))?;
            if n == 0 {
                return Err(Error::invalid("n", "total count must be positive"));
            }
            let mix = GaussianMixture::new_1d(weights.clone(), means.clone(), sds.clone())?;
            Ok(mix.sample_n(n, &mut rng))
        }
        GeneratorKind::Moons2d { n_per_moon, radius, noise_sd, separation } => {
            let per_moon = match (n_per_moon, spec.n) {
                (Some(m), Some(n)) if 2 * m != n => {
                    return Err(Error::invalid(
                        "n",
                        format!("n = {n} conflicts with n_per_moon = {m}"),
                    ));
                }
                (Some(m), _) => *m,
                (None, Some(n)) if n % 2 != 0 => {
                    return Err(Error::invalid("n", format!("moons need an even total, got {n}")));
                }
                (None, Some(n)) => n / 2,
                (None, None) => {
                    return Err(Error::invalid("n", "moons generation needs n or n_per_moon"));
                }
            };
            if per_moon == 0 {
                return Err(Error::invalid("n_per_moon", "each moon needs at least one point"));
            }
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(Error::invalid("radius", format!("radius must be positive, got {radius}")));
            }
            if !(noise_sd.is_finite() && *noise_sd >= 0.0) {
                return Err(Error::invalid("noise_sd", format!("noise must be >= 0, got {noise_sd}")));
            }
            if !separation.is_finite() {
                return Err(Error::invalid("separation", "separation must be finite"));
            }
            let mut data = Vec::with_capacity(4 * per_moon);
            for moon in 0..2 {
                for _ in 0..per_moon {
                    let t = std::f64::consts::PI * rng.uniform();
                    let (cx, cy) = if moon == 0 {
                        (radius * t.cos(), radius * t.sin())
                    } else {
                        (radius - radius * t.cos(), separation - radius * t.sin())
                    };
                    data.push(cx + noise_sd * rng.standard_normal());
                    data.push(cy + noise_sd * rng.standard_normal());
                }
            }
            PointSet::new(2, data)
        }
    }
}

/// Reads a point set from headerless CSV. Blank lines and lines starting
/// with `#` are skipped; every remaining row must have the same number of
/// fields. Errors carry one-based line numbers.
pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<PointSet> {
    read_csv_from(BufReader::new(File::open(path)?))
}

/// [`read_csv`] from any buffered reader.
pub fn read_csv_from<R: BufRead>(reader: R) -> Result<PointSet> {
    let mut dim = 0usize;
    let mut data = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Vec<&str> = trimmed.split(',').collect();
        if dim == 0 {
            dim = row.len();
        } else if row.len() != dim {
            return Err(Error::invalid(
                "csv",
                format!("line {}: expected {dim} fields, found {}", idx + 1, row.len()),
            ));
        }
        for field in row {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::invalid("csv", format!("line {}: could not parse '{}'", idx + 1, field.trim()))
            })?;
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::invalid("csv", "no data rows"));
    }
    PointSet::new(dim, data)
}

/// Writes a point set as headerless CSV (LF endings, shortest round-trip
/// float formatting, so read and write compose to the identity).
pub fn write_csv<P: AsRef<Path>>(points: &PointSet, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_to(points, &mut w)?;
    w.flush()?;
    Ok(())
}

/// [`write_csv`] to any writer.
pub fn write_csv_to<W: io::Write>(points: &PointSet, w: &mut W) -> Result<()> {
    for p in points.iter() {
        for (j, c) in p.iter().enumerate() {
            if j > 0 {
                write!(w, ",")?;
            }
            write!(w, "{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
