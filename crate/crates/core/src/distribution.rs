//! Position densities of a single spread particle and the probability of
//! finding it inside a detector's visibility tunnel.
//!
//! All lengths are in detector-radius units.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::error::{check_radius, Error, Result};
use crate::quadrature::{self, trapezoid_richardson};
use crate::special::{erf, erfc};

/// Allowed deviation of a table's trapezoid integral from 1.
pub const TABLE_NORMALIZATION_TOL: f64 = 1e-6;
/// Allowed relative jitter of table abscissae around the uniform step.
pub const TABLE_SPACING_TOL: f64 = 1e-9;

/// A density sampled on a uniform grid, linearly interpolated between
/// nodes and zero outside `[x0, x0 + (len - 1) * step]`.
///
/// Densities are rescaled on construction so the interpolant integrates to
/// exactly one; the pre-scaling trapezoid integral must already be within
/// [`TABLE_NORMALIZATION_TOL`] of one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    x0: f64,
    step: f64,
    density: Vec<f64>,
    /// cumulative[i] = integral from x0 to node i
    cumulative: Vec<f64>,
    richardson_error: f64,
}

impl DensityTable {
    pub fn new(x0: f64, step: f64, density: Vec<f64>) -> Result<Self> {
        if density.len() < 2 {
            return Err(Error::Table("need at least two samples".into()));
        }
        if !(step > 0.0 && step.is_finite() && x0.is_finite()) {
            return Err(Error::Table(format!("bad grid origin {x0} / step {step}")));
        }
        if let Some((i, d)) = density
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
        {
            return Err(Error::Table(format!(
                "density at sample {i} is {d}, must be >= 0"
            )));
        }
        let (total, richardson_error) = trapezoid_richardson(&density, step);
        if (total - 1.0).abs() > TABLE_NORMALIZATION_TOL {
            return Err(Error::Table(format!(
                "density integrates to {total}, not 1 within {TABLE_NORMALIZATION_TOL}"
            )));
        }
        let density: Vec<f64> = density.into_iter().map(|d| d / total).collect();
        let mut cumulative = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * step * (w[0] + w[1]);
            cumulative.push(acc);
        }
        Ok(Self {
            x0,
            step,
            density,
            cumulative,
            richardson_error,
        })
    }

    /// Builds a table from explicit `(x, density)` samples, checking that
    /// the abscissae are strictly increasing and uniformly spaced.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Table("need at least two samples".into()));
        }
        let x0 = samples[0].0;
        let step = (samples[samples.len() - 1].0 - x0) / (samples.len() - 1) as f64;
        for (i, w) in samples.windows(2).enumerate() {
            let dx = w[1].0 - w[0].0;
            if dx <= 0.0 {
                return Err(Error::Table(format!(
                    "x must be strictly increasing (samples {} and {})",
                    i + 1,
                    i + 2
                )));
            }
            if ((dx - step) / step).abs() > TABLE_SPACING_TOL {
                return Err(Error::Table(format!(
                    "x spacing {dx} at sample {} deviates from uniform step {step}",
                    i + 2
                )));
            }
        }
        Self::new(x0, step, samples.iter().map(|s| s.1).collect())
    }

    /// Parses two-column `x,density` CSV text. A first line that does not
    /// parse as numbers is treated as a header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match fields.as_slice() {
                [x, d] => x
                    .parse::<f64>()
                    .and_then(|x| d.parse::<f64>().map(|d| (x, d))),
                _ => {
                    return Err(Error::Table(format!(
                        "line {}: expected 2 columns, found {}",
                        lineno + 1,
                        fields.len()
                    )))
                }
            };
            match parsed {
                Ok(s) => samples.push(s),
                Err(_) if samples.is_empty() && lineno == 0 => {} // header
                Err(e) => return Err(Error::Table(format!("line {}: {e}", lineno + 1))),
            }
        }
        Self::from_samples(&samples)
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.x0,
            self.x0 + self.step * (self.density.len() - 1) as f64,
        )
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.density.len()).map(move |i| self.x0 + self.step * i as f64)
    }

    /// `|T(h) - T(2h)| / 3` of the raw samples: a discretization hint for
    /// the tabulated density.
    pub fn richardson_error(&self) -> f64 {
        self.richardson_error
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let t = (x - self.x0) / self.step;
        let i = (t.floor() as usize).min(self.density.len() - 2);
        let frac = t - i as f64;
        self.density[i] + frac * (self.density[i + 1] - self.density[i])
    }

    /// Integral of the interpolant from the left edge of the support to `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let t = (x - self.x0) / self.step;
        let i = (t.floor() as usize).min(self.density.len() - 2);
        let frac = t - i as f64;
        let (a, b) = (self.density[i], self.density[i + 1]);
        self.cumulative[i] + self.step * frac * (a + 0.5 * frac * (b - a))
    }

    /// Inverse of [`cdf`](Self::cdf) for `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cumulative.len();
        // first node whose cumulative mass reaches u
        let j = self.cumulative.partition_point(|&c| c < u).clamp(1, n - 1);
        let i = j - 1;
        let (a, b) = (self.density[i], self.density[i + 1]);
        let need = (u - self.cumulative[i]) / self.step;
        // solve a*t + (b - a)/2 * t^2 = need for t in [0, 1]
        let slope = b - a;
        let t = if need <= 0.0 {
            0.0
        } else if slope.abs() <= 1e-14 * a.max(b) {
            if a > 0.0 {
                need / a
            } else {
                0.0
            }
        } else {
            let disc = (a * a + 2.0 * slope * need).max(0.0);
            // numerically stable root of the quadratic
            2.0 * need / (a + disc.sqrt())
        };
        self.x0 + self.step * (i as f64 + t.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Gaussian { stdev: f64 },
    Tabulated(Arc<DensityTable>),
}

/// The position density `P(x) = |psi(x)|^2` of one particle.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadDistribution {
    shape: Shape,
    center: f64,
}

impl SpreadDistribution {
    /// Normal density with the given standard deviation, centered at 0.
    pub fn gaussian(stdev: f64) -> Result<Self> {
        if !(stdev > 0.0 && stdev.is_finite()) {
            return Err(Error::Domain {
                name: "stdev",
                value: stdev,
                bound: "stdev > 0 and finite",
            });
        }
        Ok(Self {
            shape: Shape::Gaussian { stdev },
            center: 0.0,
        })
    }

    pub fn tabulated(table: DensityTable) -> Self {
        Self {
            shape: Shape::Tabulated(Arc::new(table)),
            center: 0.0,
        }
    }

    pub fn with_center(&self, center: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            center,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn stdev(&self) -> Option<f64> {
        match self.shape {
            Shape::Gaussian { stdev } => Some(stdev),
            Shape::Tabulated(_) => None,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.shape, Shape::Gaussian { .. })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let y = x - self.center;
        match &self.shape {
            Shape::Gaussian { stdev } => {
                let z = y / stdev;
                (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * stdev)
            }
            Shape::Tabulated(t) => t.eval(y),
        }
    }

    /// Probability of finding the particle in the tunnel `(o - r, o + r)`
    /// of a detector of half-width `r` centered at `o`.
    pub fn interval_probability(&self, o: f64, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.mass_between(o - r, o + r))
    }

    /// Integral of the density over `[lo, hi]`, `lo <= hi`.
    pub(crate) fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo - self.center, hi - self.center);
        let p = match &self.shape {
            Shape::Gaussian { stdev } => gaussian_mass(lo, hi, *stdev),
            Shape::Tabulated(t) => t.cdf(hi) - t.cdf(lo),
        };
        p.clamp(0.0, 1.0)
    }

    /// Same integral as [`interval_probability`](Self::interval_probability)
    /// evaluated by adaptive Gauss-Kronrod on the density itself. Serves as
    /// an independent check of the closed form.
    pub fn interval_probability_numeric(&self, o: f64, r: f64, abs_tol: f64) -> Result<f64> {
        check_radius(r)?;
        let breaks: Vec<f64> = match &self.shape {
            Shape::Gaussian { stdev } => {
                // mark the peak and the +-8 sigma shoulders so narrow packets are found
                [-8.0, -1.0, 0.0, 1.0, 8.0]
                    .iter()
                    .map(|k| self.center + k * stdev)
                    .collect()
            }
            Shape::Tabulated(t) => t.nodes().map(|x| x + self.center).collect(),
        };
        let q = quadrature::integrate(|x| self.pdf(x), o - r, o + r, &breaks, abs_tol, 0.0);
        Ok(q.value)
    }
}

/// `integral_lo^hi N(0, stdev)`, evaluated on whichever side of the mean
/// avoids cancellation.
fn gaussian_mass(lo: f64, hi: f64, stdev: f64) -> f64 {
    let scale = SQRT_2 * stdev;
    let (a, b) = (lo / scale, hi / scale);
    if a >= 0.5 {
        0.5 * (erfc(a) - erfc(b))
    } else if b <= -0.5 {
        0.5 * (erfc(-b) - erfc(-a))
    } else {
        0.5 * (erf(b) - erf(a))
    }
}
