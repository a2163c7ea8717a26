//! Scenario files: TOML with one table per section.
//!
//! ```toml
//! models = ["nonlocal", "pilotwave", "classic", "closed_limit"]
//!
//! [opacity]
//! kind = "g"
//! value = 0.7
//!
//! [detector]
//! r = 1.0
//! shape = "interval_1d"
//! axis_offset = 0.0
//!
//! [cloud]
//! n_particles = 61
//!
//! [spread]
//! min = 1e-3
//! max = 1e5
//! points = 601
//! scale = "log"
//! ```
//!
//! Lengths are in detector-radius units. Setting `detector.radius_m`
//! switches on SI entry: every `*_m` (`*_m2`, `*_m3`) key is then divided
//! by the matching power of the radius, and plain length keys are refused.

use std::path::Path;

use serde::Deserialize;
use smeared_core::cloud::{CloudSpec, Dimensionality, LayerCount, Segment};
use smeared_core::engine::{linear_grid, log_grid};
use smeared_core::montecarlo::McConfig;
use smeared_core::{DetectorGeometry, DetectorShape, ModelLabel, OpacityKind, OpacitySpec};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    opacity: Option<RawOpacity>,
    #[serde(default)]
    detector: RawDetector,
    #[serde(default)]
    cloud: RawCloud,
    spread: Option<RawSpread>,
    models: Option<Vec<String>>,
    mc: Option<RawMc>,
    #[serde(default)]
    verify: RawVerify,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOpacity {
    kind: String,
    value: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    r: Option<f64>,
    radius_m: Option<f64>,
    shape: Option<String>,
    axis_offset: Option<f64>,
    axis_offset_m: Option<f64>,
    axis_offset_y: Option<f64>,
    axis_offset_y_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawLayers {
    Count(usize),
    Word(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCloud {
    n_particles: Option<usize>,
    dimensionality: Option<String>,
    layers: Option<RawLayers>,
    segment: Option<Vec<RawSegment>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    number_density: Option<f64>,
    number_density_m3: Option<f64>,
    cross_section: Option<f64>,
    cross_section_m2: Option<f64>,
    thickness: Option<f64>,
    thickness_m: Option<f64>,
    transverse_extent: Option<f64>,
    transverse_extent_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpread {
    stdev: Option<f64>,
    stdev_m: Option<f64>,
    min: Option<f64>,
    min_m: Option<f64>,
    max: Option<f64>,
    max_m: Option<f64>,
    points: Option<usize>,
    scale: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    samples: Option<u64>,
    seed: Option<u64>,
    batches: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    n: Option<Vec<usize>>,
    stdev: Option<Vec<f64>>,
    g: Option<Vec<f64>>,
}

/// Where the particles come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CloudSource {
    /// `n` particles of the configured opacity on a centered lattice.
    Line { n: usize },
    /// A physical cloud cut into layers.
    Segments { spec: CloudSpec, layers: LayerCount },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyMatrix {
    pub n: Vec<usize>,
    pub stdev: Vec<f64>,
    pub g: Vec<f64>,
}

impl Default for VerifyMatrix {
    fn default() -> Self {
        Self {
            n: vec![1, 3, 61],
            stdev: vec![1e-8, 1.0, 10.0],
            g: vec![0.1, 0.7, 1.0],
        }
    }
}

/// A validated scenario, all lengths in detector-radius units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub opacity: Option<OpacitySpec>,
    pub detector: DetectorGeometry,
    pub axis_offset_y: f64,
    pub cloud: CloudSource,
    /// strictly increasing stdev values; empty when no spread section
    pub stdev_grid: Vec<f64>,
    pub models: Vec<ModelLabel>,
    pub mc: Option<McConfig>,
    pub verify: VerifyMatrix,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config field `{field}`: {msg}"))
}

/// Picks a length given either plainly or in meters.
struct Units {
    radius_m: Option<f64>,
}

impl Units {
    fn scaled(
        &self,
        field: &str,
        plain: Option<f64>,
        si: Option<f64>,
        power: i32,
    ) -> Result<Option<f64>, CliError> {
        let si_field = match power {
            1 => format!("{field}_m"),
            p => format!("{field}_m{}", p.abs()),
        };
        match (plain, si, self.radius_m) {
            (Some(_), Some(_), _) => Err(invalid(
                field,
                format!("set either `{field}` or `{si_field}`, not both"),
            )),
            (Some(_), None, Some(_)) => Err(invalid(
                field,
                format!("detector.radius_m is set, so give `{si_field}` in SI units"),
            )),
            (None, Some(_), None) => Err(invalid(&si_field, "SI values need detector.radius_m")),
            (None, Some(v), Some(unit)) => Ok(Some(v / unit.powi(power))),
            (plain, None, _) => Ok(plain),
        }
    }

    fn length(
        &self,
        field: &str,
        plain: Option<f64>,
        si: Option<f64>,
    ) -> Result<Option<f64>, CliError> {
        self.scaled(field, plain, si, 1)
    }
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawScenario) -> Result<Scenario, CliError> {
    let units = Units {
        radius_m: match raw.detector.radius_m {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(invalid("detector.radius_m", "must be positive"))
            }
            other => other,
        },
    };

    let r = match (raw.detector.r, units.radius_m) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "detector.r",
                "set either `r` or `radius_m`, not both",
            ))
        }
        (Some(r), None) => r,
        (None, _) => 1.0,
    };
    let shape: DetectorShape = match &raw.detector.shape {
        Some(s) => s.parse().map_err(|e| invalid("detector.shape", e))?,
        None => DetectorShape::Interval1d,
    };
    let axis_offset = units
        .length(
            "detector.axis_offset",
            raw.detector.axis_offset,
            raw.detector.axis_offset_m,
        )?
        .unwrap_or(0.0);
    let axis_offset_y = units
        .length(
            "detector.axis_offset_y",
            raw.detector.axis_offset_y,
            raw.detector.axis_offset_y_m,
        )?
        .unwrap_or(0.0);
    let detector =
        DetectorGeometry::new(r, shape, axis_offset).map_err(|e| invalid("detector", e))?;
    if !axis_offset_y.is_finite() {
        return Err(invalid("detector.axis_offset_y", "must be finite"));
    }

    let opacity = match &raw.opacity {
        Some(o) => {
            let kind: OpacityKind = o.kind.parse().map_err(|e| invalid("opacity.kind", e))?;
            Some(OpacitySpec::new(kind, o.value).map_err(|e| invalid("opacity.value", e))?)
        }
        None => None,
    };

    let cloud = resolve_cloud(&raw.cloud, &units)?;
    if matches!(cloud, CloudSource::Segments { .. }) && opacity.is_some() {
        return Err(invalid(
            "opacity",
            "a cloud given by segments derives its opacity; remove the [opacity] section",
        ));
    }
    let dimensionality = match &cloud {
        CloudSource::Segments { spec, .. } => spec.dimensionality,
        CloudSource::Line { .. } => Dimensionality::D1,
    };
    match (shape, dimensionality, &cloud) {
        (DetectorShape::Square2d, Dimensionality::D1, CloudSource::Segments { .. }) => {
            return Err(invalid(
                "cloud.dimensionality",
                "a square_2d detector needs d2_projected",
            ))
        }
        (DetectorShape::Interval1d, Dimensionality::D2Projected, _) => {
            return Err(invalid(
                "cloud.dimensionality",
                "d2_projected needs a square_2d detector",
            ))
        }
        _ => {}
    }

    let stdev_grid = match &raw.spread {
        Some(s) => resolve_spread(s, &units)?,
        None => Vec::new(),
    };

    let models = match &raw.models {
        Some(list) => {
            let mut models = Vec::with_capacity(list.len());
            for m in list {
                let m: ModelLabel = m.parse().map_err(|e| invalid("models", e))?;
                if !models.contains(&m) {
                    models.push(m);
                }
            }
            if models.is_empty() {
                return Err(invalid("models", "list is empty"));
            }
            models.sort();
            models
        }
        None => ModelLabel::ALL.to_vec(),
    };

    let mc = match &raw.mc {
        Some(m) => {
            let d = McConfig::default();
            Some(
                McConfig::new(
                    m.samples.unwrap_or(d.samples),
                    m.seed.unwrap_or(d.seed),
                    m.batches.unwrap_or(d.batches),
                )
                .map_err(|e| invalid("mc", e))?,
            )
        }
        None => None,
    };

    let verify = resolve_verify(&raw.verify)?;

    Ok(Scenario {
        opacity,
        detector,
        axis_offset_y,
        cloud,
        stdev_grid,
        models,
        mc,
        verify,
    })
}

fn resolve_cloud(raw: &RawCloud, units: &Units) -> Result<CloudSource, CliError> {
    let Some(segments) = &raw.segment else {
        if raw.dimensionality.is_some() || raw.layers.is_some() {
            return Err(invalid(
                "cloud",
                "dimensionality and layers need [[cloud.segment]] entries",
            ));
        }
        let n = raw.n_particles.unwrap_or(61);
        if n == 0 {
            return Err(invalid("cloud.n_particles", "must be >= 1"));
        }
        return Ok(CloudSource::Line { n });
    };
    if raw.n_particles.is_some() {
        return Err(invalid(
            "cloud.n_particles",
            "segments set the particle count from their transverse extent; remove n_particles",
        ));
    }
    let dimensionality: Dimensionality = match &raw.dimensionality {
        Some(s) => s.parse().map_err(|e| invalid("cloud.dimensionality", e))?,
        None => Dimensionality::D1,
    };
    let layers = match &raw.layers {
        None => LayerCount::Auto,
        Some(RawLayers::Word(w)) if w == "auto" => LayerCount::Auto,
        Some(RawLayers::Count(n)) if *n >= 1 => LayerCount::Fixed(*n),
        Some(_) => {
            return Err(invalid(
                "cloud.layers",
                "expected \"auto\" or an integer >= 1",
            ))
        }
    };
    let mut parsed = Vec::with_capacity(segments.len());
    for (i, s) in segments.iter().enumerate() {
        let name = |f: &str| format!("cloud.segment[{i}].{f}");
        let need = |f: &str, v: Option<f64>| v.ok_or_else(|| invalid(&name(f), "missing"));
        parsed.push(Segment {
            number_density: need(
                "number_density",
                units.scaled(
                    &name("number_density"),
                    s.number_density,
                    s.number_density_m3,
                    -3,
                )?,
            )?,
            cross_section: need(
                "cross_section",
                units.scaled(
                    &name("cross_section"),
                    s.cross_section,
                    s.cross_section_m2,
                    2,
                )?,
            )?,
            thickness: need(
                "thickness",
                units.length(&name("thickness"), s.thickness, s.thickness_m)?,
            )?,
            transverse_extent: need(
                "transverse_extent",
                units.length(
                    &name("transverse_extent"),
                    s.transverse_extent,
                    s.transverse_extent_m,
                )?,
            )?,
        });
    }
    let spec = CloudSpec::new(parsed, dimensionality).map_err(|e| invalid("cloud.segment", e))?;
    Ok(CloudSource::Segments { spec, layers })
}

fn resolve_spread(raw: &RawSpread, units: &Units) -> Result<Vec<f64>, CliError> {
    let single = units.length("spread.stdev", raw.stdev, raw.stdev_m)?;
    let min = units.length("spread.min", raw.min, raw.min_m)?;
    let max = units.length("spread.max", raw.max, raw.max_m)?;
    match (single, min, max) {
        (Some(s), None, None) => {
            if raw.points.is_some() || raw.scale.is_some() {
                return Err(invalid(
                    "spread",
                    "points and scale apply to a min/max grid, not a single stdev",
                ));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("spread.stdev", "must be positive and finite"));
            }
            Ok(vec![s])
        }
        (None, Some(min), Some(max)) => {
            let points = raw.points.unwrap_or(601);
            let grid = match raw.scale.as_deref().unwrap_or("log") {
                "log" => log_grid(min, max, points),
                "linear" => linear_grid(min, max, points),
                other => {
                    return Err(invalid(
                        "spread.scale",
                        format!("'{other}' is not log or linear"),
                    ))
                }
            };
            grid.map_err(|e| invalid("spread", e))
        }
        (Some(_), _, _) => Err(invalid("spread", "give either stdev or a min/max grid")),
        _ => Err(invalid("spread", "a grid needs both min and max")),
    }
}

fn resolve_verify(raw: &RawVerify) -> Result<VerifyMatrix, CliError> {
    let d = VerifyMatrix::default();
    let m = VerifyMatrix {
        n: raw.n.clone().unwrap_or(d.n),
        stdev: raw.stdev.clone().unwrap_or(d.stdev),
        g: raw.g.clone().unwrap_or(d.g),
    };
    if m.n.is_empty() || m.n.contains(&0) {
        return Err(invalid("verify.n", "needs particle counts >= 1"));
    }
    if m.stdev.is_empty() || !m.stdev.iter().all(|&s| s > 0.0 && s.is_finite()) {
        return Err(invalid("verify.stdev", "needs positive finite values"));
    }
    if m.g.is_empty() || !m.g.iter().all(|&g| g > 0.0 && g <= 1.0) {
        return Err(invalid("verify.g", "needs values in (0, 1]"));
    }
    Ok(m)
}
