//! Physical cloud descriptions turned into layers of artificial particles.
//!
//! A dense cloud is sliced into layers that each hold statistically one
//! particle per detector area. Each layer becomes a lattice of artificial
//! particles spaced `2r` apart whose shared `g` reproduces the layer's
//! classical transmittance. An artificial particle keeps the spread of a
//! single real particle.

use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::SpreadDistribution;
use crate::engine::{self, ParticleLattice};
use crate::error::{check_radius, Error, Result};
use crate::opacity::OpacitySpec;

/// Cap on automatically chosen layers per segment.
pub const MAX_AUTO_LAYERS: usize = 10_000;

/// One homogeneous slab of the cloud. Lengths in detector-radius units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// particles per unit volume
    pub number_density: f64,
    pub cross_section: f64,
    /// extent along the light path
    pub thickness: f64,
    /// cloud diameter perpendicular to the light path
    pub transverse_extent: f64,
}

impl Segment {
    pub fn optical_depth(&self) -> f64 {
        self.number_density * self.thickness * self.cross_section
    }

    fn validate(&self, index: usize) -> Result<()> {
        for (name, v) in [
            ("number_density", self.number_density),
            ("cross_section", self.cross_section),
            ("thickness", self.thickness),
            ("transverse_extent", self.transverse_extent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!(
                    "segment {index}: {name} = {v} must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dimensionality {
    #[default]
    D1,
    D2Projected,
}

impl FromStr for Dimensionality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "d1" => Ok(Self::D1),
            "d2_projected" => Ok(Self::D2Projected),
            other => Err(Error::Usage(format!(
                "unknown dimensionality '{other}' (expected d1 or d2_projected)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    pub segments: Vec<Segment>,
    pub dimensionality: Dimensionality,
}

impl CloudSpec {
    pub fn new(segments: Vec<Segment>, dimensionality: Dimensionality) -> Result<Self> {
        let spec = Self {
            segments,
            dimensionality,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Usage("cloud needs at least one segment".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            s.validate(i)?;
        }
        Ok(())
    }

    fn warn_large_cross_sections(&self, r: f64) {
        let area = (2.0 * r) * (2.0 * r);
        for (i, s) in self.segments.iter().enumerate() {
            if s.cross_section > 0.01 * area {
                warn!(
                    "segment {i}: cross section {} is not small against the detector area {area}",
                    s.cross_section
                );
            }
        }
    }
}

/// Classical (Beer-Lambert) opacity of the whole cloud, `exp(-sum n l sigma)`.
/// An optical depth that overflows yields the opaque spec `g = 1`.
pub fn classic_tr(spec: &CloudSpec) -> Result<OpacitySpec> {
    spec.validate()?;
    let tau: f64 = spec.segments.iter().map(Segment::optical_depth).sum();
    OpacitySpec::from_tau(if tau.is_nan() { f64::INFINITY } else { tau })
}

/// How many layers each homogeneous segment is cut into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayerCount {
    /// `ceil(n l sigma)`, so each layer's `g <= 1 - 1/e`.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub segment: usize,
    pub opacity: OpacitySpec,
    pub lattice: ParticleLattice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub layers: Vec<Layer>,
}

/// Number of artificial particles across `extent`: `ceil(extent / 2r)`,
/// bumped to odd so one sits on the measurement axis.
pub fn lattice_size(extent: f64, r: f64) -> usize {
    if extent < 2.0 * r {
        warn!("transverse extent {extent} is narrower than the detector (2r = {}); using one particle", 2.0 * r);
        return 1;
    }
    let n = (extent / (2.0 * r)).ceil() as usize;
    n.max(1) | 1
}

/// Per-layer opacities for one segment.
fn segment_layers(segment: &Segment, count: LayerCount) -> Result<Vec<OpacitySpec>> {
    let tau = segment.optical_depth();
    if !tau.is_finite() {
        return Ok(vec![OpacitySpec::from_g(1.0)?]);
    }
    let layers = match count {
        LayerCount::Fixed(0) => return Err(Error::Usage("layer count must be >= 1".into())),
        LayerCount::Fixed(l) => l,
        LayerCount::Auto => {
            let l = (tau.ceil() as usize).max(1);
            if l > MAX_AUTO_LAYERS {
                warn!("optical depth {tau} capped at {MAX_AUTO_LAYERS} layers");
            }
            l.min(MAX_AUTO_LAYERS)
        }
    };
    let per_layer = OpacitySpec::from_tau(tau / layers as f64)?;
    Ok(vec![per_layer; layers])
}

/// Splits every segment into layers of artificial particles.
///
/// Per-layer `g = 1 - tr_cl^(1/L)`, so the `L` layers of a segment
/// multiply back to its classical transmittance. Each layer carries a
/// centered lattice spanning the segment's transverse extent.
pub fn plan_layers(spec: &CloudSpec, r: f64, count: LayerCount) -> Result<LayerPlan> {
    check_radius(r)?;
    spec.validate()?;
    spec.warn_large_cross_sections(r);
    let mut layers = Vec::new();
    for (i, seg) in spec.segments.iter().enumerate() {
        let lattice = ParticleLattice::centered(lattice_size(seg.transverse_extent, r), r, 0.0)?;
        for opacity in segment_layers(seg, count)? {
            layers.push(Layer {
                segment: i,
                opacity,
                lattice: lattice.clone(),
            });
        }
    }
    Ok(LayerPlan { layers })
}

/// Product of the layers' non-local transmittances.
pub fn total_tr(plan: &LayerPlan, dist_shape: &SpreadDistribution, r: f64) -> Result<f64> {
    layer_product(plan, |layer| {
        engine::product_tr(&layer.lattice, dist_shape, r, layer.opacity.g)
    })
}

/// Product of the layers' coverage-law (localized absorber) transmittances.
pub fn total_pilotwave_tr(
    plan: &LayerPlan,
    dist_shape: &SpreadDistribution,
    r: f64,
) -> Result<f64> {
    layer_product(plan, |layer| {
        engine::pilotwave_tr(&layer.lattice, dist_shape, r, layer.opacity.g)
    })
}

fn layer_product<F>(plan: &LayerPlan, each: F) -> Result<f64>
where
    F: Fn(&Layer) -> Result<f64> + Sync + Send,
{
    if plan.layers.is_empty() {
        return Err(Error::Usage("layer plan is empty".into()));
    }
    let parts: Vec<f64> = plan.layers.par_iter().map(each).collect::<Result<_>>()?;
    Ok(parts.iter().product())
}

/// One layer of a projected (plane) cloud seen through a square detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareLayer {
    pub segment: usize,
    pub opacity: OpacitySpec,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquarePlan {
    pub layers: Vec<SquareLayer>,
}

/// Casts a cloud onto the detector plane: `grid_n` artificial particles
/// per axis and per-layer `g` as in [`plan_layers`].
pub fn project_3d(spec: &CloudSpec, r: f64, count: LayerCount) -> Result<SquarePlan> {
    check_radius(r)?;
    spec.validate()?;
    if spec.dimensionality != Dimensionality::D2Projected {
        return Err(Error::Usage(
            "projection needs a cloud with dimensionality d2_projected".into(),
        ));
    }
    spec.warn_large_cross_sections(r);
    let mut layers = Vec::new();
    for (i, seg) in spec.segments.iter().enumerate() {
        let grid_n = lattice_size(seg.transverse_extent, r);
        for opacity in segment_layers(seg, count)? {
            layers.push(SquareLayer {
                segment: i,
                opacity,
                grid_n,
            });
        }
    }
    Ok(SquarePlan { layers })
}

/// Product of square-detector transmittances over the projected layers.
pub fn total_square_tr(
    plan: &SquarePlan,
    dist_shape: &SpreadDistribution,
    r: f64,
    axis_offset_x: f64,
    axis_offset_y: f64,
) -> Result<f64> {
    if plan.layers.is_empty() {
        return Err(Error::Usage("layer plan is empty".into()));
    }
    let parts: Vec<f64> = plan
        .layers
        .par_iter()
        .map(|l| {
            engine::square_detector_tr(
                l.grid_n,
                dist_shape,
                r,
                l.opacity.g,
                axis_offset_x,
                axis_offset_y,
            )
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().product())
}
