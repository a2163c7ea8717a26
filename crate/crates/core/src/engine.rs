//! Transmittance of one particle, of periodic particle lattices (the
//! non-local product law), of the localized-absorber alternative, and the
//! closed-system limits.
//!
//! A cloud of `n` identical particles spaced `2r` apart is evaluated by
//! "unfolding": one density is cut into `n` tunnel-wide chunks, and the
//! photon survives chunk `k` with probability `1 - g * P_k`. Survivals are
//! independent, so the cloud transmittance is the product over chunks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::SpreadDistribution;
use crate::error::{check_g, check_radius, Error, Result};

/// Chunks whose tunnel probability is below this are left out of products.
pub const NEGLIGIBLE_CHUNK: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorShape {
    Interval1d,
    Square2d,
}

impl FromStr for DetectorShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "interval_1d" => Ok(Self::Interval1d),
            "square_2d" => Ok(Self::Square2d),
            other => Err(Error::Usage(format!(
                "unknown detector shape '{other}' (expected interval_1d or square_2d)"
            ))),
        }
    }
}

/// Detector half-width `r`, its shape, and its displacement from the cloud axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorGeometry {
    pub r: f64,
    pub shape: DetectorShape,
    pub axis_offset: f64,
}

impl DetectorGeometry {
    pub fn new(r: f64, shape: DetectorShape, axis_offset: f64) -> Result<Self> {
        check_radius(r)?;
        if !axis_offset.is_finite() {
            return Err(Error::Domain {
                name: "axis_offset",
                value: axis_offset,
                bound: "finite",
            });
        }
        Ok(Self {
            r,
            shape,
            axis_offset,
        })
    }
}

impl Default for DetectorGeometry {
    fn default() -> Self {
        Self {
            r: 1.0,
            shape: DetectorShape::Interval1d,
            axis_offset: 0.0,
        }
    }
}

/// Offsets of particle centers from the detector center, one per unfolded
/// chunk, uniformly spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleLattice {
    offsets: Vec<f64>,
    spacing: f64,
}

impl ParticleLattice {
    /// `o_k = axis_offset + r * (2k - n - 1)` for `k = 1..=n`.
    ///
    /// For odd `n` and zero offset the lattice is symmetric and contains 0;
    /// for even `n` the detector sits between the two middle particles.
    pub fn centered(n: usize, r: f64, axis_offset: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("lattice needs at least one particle".into()));
        }
        check_radius(r)?;
        let offsets = (1..=n)
            .map(|k| axis_offset + r * (2 * k) as f64 - r * (n + 1) as f64)
            .collect();
        Ok(Self {
            offsets,
            spacing: 2.0 * r,
        })
    }

    /// Wraps explicit offsets, which must be strictly increasing with a
    /// uniform step equal to `spacing` (within 1e-12 relative).
    pub fn from_offsets(offsets: Vec<f64>, spacing: f64) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::Usage("lattice needs at least one particle".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Domain {
                name: "spacing",
                value: spacing,
                bound: "spacing > 0",
            });
        }
        for w in offsets.windows(2) {
            let d = w[1] - w[0];
            if (d - spacing).abs() > 1e-12 * spacing.max(w[1].abs()) {
                return Err(Error::Usage(format!(
                    "lattice offsets {} and {} are not {spacing} apart",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { offsets, spacing })
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

fn require_centered(dist: &SpreadDistribution) -> Result<()> {
    if dist.center() != 0.0 {
        return Err(Error::Usage(format!(
            "lattice products need a shape centered at 0, got center {}",
            dist.center()
        )));
    }
    Ok(())
}

/// `1 - g * P_v(o)`: a single particle seen by a detector offset by `o`.
pub fn single_particle_tr(dist: &SpreadDistribution, o: f64, r: f64, g: f64) -> Result<f64> {
    check_g(g)?;
    let p = dist.interval_probability(o, r)?;
    Ok(1.0 - g * p)
}

/// Tunnel probability of every chunk: mass of the particle centered at
/// `o_k` that lies inside `(-r, r)`.
pub fn chunk_masses(
    lattice: &ParticleLattice,
    dist_shape: &SpreadDistribution,
    r: f64,
) -> Result<Vec<f64>> {
    check_radius(r)?;
    require_centered(dist_shape)?;
    Ok(lattice
        .offsets()
        .iter()
        .map(|&o| dist_shape.with_center(o).mass_between(-r, r))
        .collect())
}

/// `prod (1 - g * p)` accumulated as a sum of `log1p` terms.
pub fn product_of_survivals(masses: impl IntoIterator<Item = f64>, g: f64) -> f64 {
    let log_tr: f64 = masses
        .into_iter()
        .filter(|&p| p >= NEGLIGIBLE_CHUNK)
        .map(|p| (-g * p).ln_1p())
        .sum();
    log_tr.exp()
}

/// `max(0, 1 - g * S)`, the coverage law of localized absorbers.
pub fn coverage_law(mass_sum: f64, g: f64) -> f64 {
    (1.0 - g * mass_sum).max(0.0)
}

/// Non-local cloud transmittance: `prod_k (1 - g * P_v(o_k))`.
pub fn product_tr(
    lattice: &ParticleLattice,
    dist_shape: &SpreadDistribution,
    r: f64,
    g: f64,
) -> Result<f64> {
    check_g(g)?;
    Ok(product_of_survivals(
        chunk_masses(lattice, dist_shape, r)?,
        g,
    ))
}

/// Transmittance predicted when each particle is a localized absorber
/// merely guided by its wave function: `max(0, 1 - g * sum_k P_v(o_k))`.
pub fn pilotwave_tr(
    lattice: &ParticleLattice,
    dist_shape: &SpreadDistribution,
    r: f64,
    g: f64,
) -> Result<f64> {
    check_g(g)?;
    let s: f64 = chunk_masses(lattice, dist_shape, r)?.iter().sum();
    Ok(coverage_law(s, g))
}

/// `(1 - g/k)^k`: `k` equally filled chunks.
pub fn finite_k_limit(g: f64, k: u64) -> Result<f64> {
    check_g(g)?;
    if k == 0 {
        return Err(Error::Usage("finite_k_limit needs k >= 1".into()));
    }
    let k = k as f64;
    Ok((k * (-g / k).ln_1p()).exp())
}

/// `exp(-g)`, the largest transmittance a closed cloud can reach.
pub fn closed_limit(g: f64) -> Result<f64> {
    check_g(g)?;
    Ok((-g).exp())
}

fn square_masses(
    grid_n: usize,
    dist_shape: &SpreadDistribution,
    r: f64,
    axis_offset_x: f64,
    axis_offset_y: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !dist_shape.is_gaussian() {
        return Err(Error::UnsupportedShape(
            "square detector needs a separable (Gaussian) density",
        ));
    }
    let xs = ParticleLattice::centered(grid_n, r, axis_offset_x)?;
    let ys = ParticleLattice::centered(grid_n, r, axis_offset_y)?;
    Ok((
        chunk_masses(&xs, dist_shape, r)?,
        chunk_masses(&ys, dist_shape, r)?,
    ))
}

/// Square `2r x 2r` detector over a `grid_n x grid_n` unfolded plane
/// lattice. Cell probabilities factor into the two 1D tunnel probabilities.
pub fn square_detector_tr(
    grid_n: usize,
    dist_shape: &SpreadDistribution,
    r: f64,
    g: f64,
    axis_offset_x: f64,
    axis_offset_y: f64,
) -> Result<f64> {
    check_g(g)?;
    let (px, py) = square_masses(grid_n, dist_shape, r, axis_offset_x, axis_offset_y)?;
    Ok(product_of_survivals(
        px.iter().flat_map(|&a| py.iter().map(move |&b| a * b)),
        g,
    ))
}

/// Coverage-law counterpart of [`square_detector_tr`].
pub fn square_pilotwave_tr(
    grid_n: usize,
    dist_shape: &SpreadDistribution,
    r: f64,
    g: f64,
    axis_offset_x: f64,
    axis_offset_y: f64,
) -> Result<f64> {
    check_g(g)?;
    let (px, py) = square_masses(grid_n, dist_shape, r, axis_offset_x, axis_offset_y)?;
    Ok(coverage_law(
        px.iter().sum::<f64>() * py.iter().sum::<f64>(),
        g,
    ))
}

/// Curves a [`TransmittanceCurve`] can carry, in output column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelLabel {
    Nonlocal,
    Pilotwave,
    Classic,
    ClosedLimit,
}

impl ModelLabel {
    pub const ALL: [ModelLabel; 4] = [
        Self::Nonlocal,
        Self::Pilotwave,
        Self::Classic,
        Self::ClosedLimit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Nonlocal => "nonlocal",
            Self::Pilotwave => "pilotwave",
            Self::Classic => "classic",
            Self::ClosedLimit => "closed_limit",
        }
    }
}

impl fmt::Display for ModelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown model '{}' (expected nonlocal, pilotwave, classic or closed_limit)",
                    s.trim()
                ))
            })
    }
}

/// Transmittance over a spread grid for several model variants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmittanceCurve {
    pub stdev_grid: Vec<f64>,
    pub values: BTreeMap<ModelLabel, Vec<f64>>,
    /// `S = sum_k P_v(o_k)` at each grid point; 1 for a closed system.
    pub mass_sum: Vec<f64>,
}

impl TransmittanceCurve {
    pub fn get(&self, model: ModelLabel) -> Option<&[f64]> {
        self.values.get(&model).map(Vec::as_slice)
    }
}

/// Geometric grid of `points` values from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    check_grid_bounds(min, max, points)?;
    let (lmin, lmax) = (min.ln(), max.ln());
    let step = (lmax - lmin) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points)
        .map(|i| (lmin + step * i as f64).exp())
        .collect();
    grid[0] = min;
    grid[points - 1] = max;
    Ok(grid)
}

/// Evenly spaced grid of `points` values from `min` to `max` inclusive.
pub fn linear_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    check_grid_bounds(min, max, points)?;
    let step = (max - min) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| min + step * i as f64).collect();
    grid[points - 1] = max;
    Ok(grid)
}

fn check_grid_bounds(min: f64, max: f64, points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::Usage("a grid needs at least 2 points".into()));
    }
    if !(min > 0.0 && max > min && max.is_finite()) {
        return Err(Error::Usage(format!(
            "grid bounds must satisfy 0 < min < max, got {min}..{max}"
        )));
    }
    Ok(())
}

fn validate_curve_request(stdev_grid: &[f64], models: &[ModelLabel]) -> Result<()> {
    if stdev_grid.is_empty() {
        return Err(Error::Usage("empty stdev grid".into()));
    }
    if models.is_empty() {
        return Err(Error::Usage("no models requested".into()));
    }
    if !stdev_grid.iter().all(|&s| s > 0.0 && s.is_finite()) {
        return Err(Error::Usage(
            "stdev grid values must be positive and finite".into(),
        ));
    }
    if stdev_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage(
            "stdev grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Assembles a curve from per-point `(nonlocal, pilotwave, mass_sum)`.
fn assemble_curve<F>(
    stdev_grid: &[f64],
    models: &[ModelLabel],
    g: f64,
    point: F,
) -> Result<TransmittanceCurve>
where
    F: Fn(&SpreadDistribution) -> Result<(f64, f64, f64)> + Sync,
{
    validate_curve_request(stdev_grid, models)?;
    check_g(g)?;
    let rows: Vec<(f64, f64, f64)> = stdev_grid
        .par_iter()
        .map(|&s| point(&SpreadDistribution::gaussian(s)?))
        .collect::<Result<_>>()?;

    let classic = 1.0 - g;
    let limit = closed_limit(g)?;
    let mut values = BTreeMap::new();
    for &m in models {
        let column = match m {
            ModelLabel::Nonlocal => rows.iter().map(|r| r.0).collect(),
            ModelLabel::Pilotwave => rows.iter().map(|r| r.1).collect(),
            ModelLabel::Classic => vec![classic; rows.len()],
            ModelLabel::ClosedLimit => vec![limit; rows.len()],
        };
        values.insert(m, column);
    }
    Ok(TransmittanceCurve {
        stdev_grid: stdev_grid.to_vec(),
        values,
        mass_sum: rows.iter().map(|r| r.2).collect(),
    })
}

/// Transmittance of a centered `n`-particle line cloud over a grid of
/// Gaussian spreads. Grid points are evaluated in parallel; output order
/// follows the grid.
pub fn transmittance_curve(
    n: usize,
    r: f64,
    g: f64,
    axis_offset: f64,
    stdev_grid: &[f64],
    models: &[ModelLabel],
) -> Result<TransmittanceCurve> {
    let lattice = ParticleLattice::centered(n, r, axis_offset)?;
    assemble_curve(stdev_grid, models, g, |dist| {
        let masses = chunk_masses(&lattice, dist, r)?;
        let s: f64 = masses.iter().sum();
        Ok((product_of_survivals(masses, g), coverage_law(s, g), s))
    })
}

/// Square-detector analogue of [`transmittance_curve`] over a
/// `grid_n x grid_n` plane lattice.
pub fn square_transmittance_curve(
    grid_n: usize,
    r: f64,
    g: f64,
    axis_offset_x: f64,
    axis_offset_y: f64,
    stdev_grid: &[f64],
    models: &[ModelLabel],
) -> Result<TransmittanceCurve> {
    check_radius(r)?;
    ParticleLattice::centered(grid_n, r, 0.0)?;
    assemble_curve(stdev_grid, models, g, |dist| {
        let (px, py) = square_masses(grid_n, dist, r, axis_offset_x, axis_offset_y)?;
        let s = px.iter().sum::<f64>() * py.iter().sum::<f64>();
        let tr = product_of_survivals(px.iter().flat_map(|&a| py.iter().map(move |&b| a * b)), g);
        Ok((tr, coverage_law(s, g), s))
    })
}
