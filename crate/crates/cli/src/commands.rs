use std::path::Path;

use rayon::prelude::*;
use smeared_core::cloud::{self, CloudSpec, Dimensionality, LayerCount};
use smeared_core::engine::{
    chunk_masses, single_particle_tr, square_pilotwave_tr, square_transmittance_curve,
    transmittance_curve,
};
use smeared_core::montecarlo::{coverage_bias, mc_coverage, mc_nonlocal, McReport};
use smeared_core::{
    DensityTable, DetectorShape, ModelLabel, OpacityKind, OpacitySpec, ParticleLattice,
    SpreadDistribution, TransmittanceCurve,
};

use crate::config::{CloudSource, Scenario};
use crate::format;
use crate::CliError;

/// Text for the output sink plus whether a verification check failed.
pub struct Output {
    pub text: String,
    pub failed: bool,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Self {
            text,
            failed: false,
        }
    }
}

pub fn convert(kind: &str, value: f64) -> Result<Output, CliError> {
    let kind: OpacityKind = kind.parse()?;
    let spec = OpacitySpec::new(kind, value)?;
    let mut text = serde_json::to_string(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    Ok(text.into())
}

pub struct SingleArgs<'a> {
    pub stdev: Option<f64>,
    pub table: Option<&'a Path>,
    pub r: f64,
    pub g: f64,
    pub offset_min: f64,
    pub offset_max: f64,
    pub points: usize,
}

/// Tunnel probability and transmittance of one particle as the detector
/// slides over `[offset_min, offset_max]`.
pub fn single(args: &SingleArgs) -> Result<Output, CliError> {
    let dist = match (args.stdev, args.table) {
        (Some(s), None) => SpreadDistribution::gaussian(s)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read table {}: {e}", path.display()))
            })?;
            SpreadDistribution::tabulated(DensityTable::from_csv_str(&text)?)
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --stdev and --table".into(),
            ))
        }
    };
    if args.points < 2 {
        return Err(CliError::Usage("--points must be >= 2".into()));
    }
    if !(args.offset_min < args.offset_max
        && args.offset_min.is_finite()
        && args.offset_max.is_finite())
    {
        return Err(CliError::Usage(format!(
            "offset range {}..{} must be finite and increasing",
            args.offset_min, args.offset_max
        )));
    }
    let step = (args.offset_max - args.offset_min) / (args.points - 1) as f64;
    let mut rows = Vec::with_capacity(args.points);
    for i in 0..args.points {
        let o = if i + 1 == args.points {
            args.offset_max
        } else {
            args.offset_min + step * i as f64
        };
        let p = dist.interval_probability(o, args.r)?;
        rows.push(vec![o, p, single_particle_tr(&dist, o, args.r, args.g)?]);
    }
    Ok(format::csv(&["offset", "p_v", "tr"], rows).into())
}

/// Transmittance curves over the configured stdev grid.
pub fn curve(sc: &Scenario) -> Result<Output, CliError> {
    if sc.stdev_grid.is_empty() {
        return Err(CliError::Usage("curve needs a [spread] section".into()));
    }
    let det = &sc.detector;
    let curve = match &sc.cloud {
        CloudSource::Line { n } => {
            let g = sc
                .opacity
                .ok_or_else(|| CliError::Usage("curve needs an [opacity] section".into()))?
                .g;
            match det.shape {
                DetectorShape::Interval1d => {
                    transmittance_curve(*n, det.r, g, det.axis_offset, &sc.stdev_grid, &sc.models)?
                }
                DetectorShape::Square2d => square_transmittance_curve(
                    *n,
                    det.r,
                    g,
                    det.axis_offset,
                    sc.axis_offset_y,
                    &sc.stdev_grid,
                    &sc.models,
                )?,
            }
        }
        CloudSource::Segments { spec, layers } => layered_curve(sc, spec, *layers)?,
    };
    Ok(render_curve(&curve).into())
}

fn render_curve(curve: &TransmittanceCurve) -> String {
    let mut header = vec!["stdev"];
    header.extend(curve.values.keys().map(|m| m.as_str()));
    header.push("mass_sum");
    let rows = curve.stdev_grid.iter().enumerate().map(|(i, &s)| {
        let mut row = vec![s];
        row.extend(curve.values.values().map(|col| col[i]));
        row.push(curve.mass_sum[i]);
        row
    });
    format::csv(&header, rows)
}

/// A physical cloud: layers multiply, and the reported `mass_sum` is the
/// smallest retained mass among the layers.
fn layered_curve(
    sc: &Scenario,
    spec: &CloudSpec,
    layers: LayerCount,
) -> Result<TransmittanceCurve, CliError> {
    let det = &sc.detector;
    let (ax, ay) = (det.axis_offset, sc.axis_offset_y);
    let classic = cloud::classic_tr(spec)?.tr_cl;

    type Point = (f64, f64, f64);
    let (rows, sum_g): (Vec<Point>, f64) = match spec.dimensionality {
        Dimensionality::D1 => {
            let plan = cloud::plan_layers(spec, det.r, layers)?;
            if ax != 0.0 {
                log::warn!(
                    "layered 1D clouds are centered on the detector; axis_offset is ignored"
                );
            }
            let sum_g = plan.layers.iter().map(|l| l.opacity.g).sum();
            let rows = sc
                .stdev_grid
                .par_iter()
                .map(|&s| -> Result<Point, CliError> {
                    let d = SpreadDistribution::gaussian(s)?;
                    let mut mass = f64::INFINITY;
                    for l in &plan.layers {
                        mass = mass.min(chunk_masses(&l.lattice, &d, det.r)?.iter().sum());
                    }
                    Ok((
                        cloud::total_tr(&plan, &d, det.r)?,
                        cloud::total_pilotwave_tr(&plan, &d, det.r)?,
                        mass,
                    ))
                })
                .collect::<Result<_, _>>()?;
            (rows, sum_g)
        }
        Dimensionality::D2Projected => {
            let plan = cloud::project_3d(spec, det.r, layers)?;
            let sum_g = plan.layers.iter().map(|l| l.opacity.g).sum();
            let rows = sc
                .stdev_grid
                .par_iter()
                .map(|&s| -> Result<Point, CliError> {
                    let d = SpreadDistribution::gaussian(s)?;
                    let mut pilot = 1.0;
                    let mut mass = f64::INFINITY;
                    for l in &plan.layers {
                        pilot *= square_pilotwave_tr(l.grid_n, &d, det.r, l.opacity.g, ax, ay)?;
                        let sx: f64 = chunk_masses(
                            &ParticleLattice::centered(l.grid_n, det.r, ax)?,
                            &d,
                            det.r,
                        )?
                        .iter()
                        .sum();
                        let sy: f64 = chunk_masses(
                            &ParticleLattice::centered(l.grid_n, det.r, ay)?,
                            &d,
                            det.r,
                        )?
                        .iter()
                        .sum();
                        mass = mass.min(sx * sy);
                    }
                    Ok((
                        cloud::total_square_tr(&plan, &d, det.r, ax, ay)?,
                        pilot,
                        mass,
                    ))
                })
                .collect::<Result<_, _>>()?;
            (rows, sum_g)
        }
    };

    let mut values = std::collections::BTreeMap::new();
    for &m in &sc.models {
        let col = match m {
            ModelLabel::Nonlocal => rows.iter().map(|r| r.0).collect(),
            ModelLabel::Pilotwave => rows.iter().map(|r| r.1).collect(),
            ModelLabel::Classic => vec![classic; rows.len()],
            ModelLabel::ClosedLimit => vec![(-sum_g).exp(); rows.len()],
        };
        values.insert(m, col);
    }
    Ok(TransmittanceCurve {
        stdev_grid: sc.stdev_grid.clone(),
        values,
        mass_sum: rows.iter().map(|r| r.2).collect(),
    })
}

/// Monte Carlo runs over the verification matrix.
///
/// Reports come in matrix order (n, then stdev, then g), a non-local run
/// followed by a coverage run for each case. Non-local runs fail at
/// `|z| > 4`. Coverage runs fail when the deviation leaves the expected
/// bias bracket widened by four standard errors.
pub fn verify(sc: &Scenario) -> Result<Output, CliError> {
    let cfg = sc
        .mc
        .ok_or_else(|| CliError::Usage("verify needs an [mc] section".into()))?;
    let r = sc.detector.r;
    let m = &sc.verify;
    let mut reports: Vec<McReport> = Vec::new();
    let mut failed = false;
    for &n in &m.n {
        let lattice = ParticleLattice::centered(n, r, sc.detector.axis_offset)?;
        for &s in &m.stdev {
            let d = SpreadDistribution::gaussian(s)?;
            for &g in &m.g {
                let label = format!("n={n} stdev={} g={}", format::num(s), format::num(g));

                let nl = mc_nonlocal(&lattice, &d, r, g, &cfg)?;
                let ok = nl.z_score.abs() <= 4.0;
                eprintln!(
                    "{} nonlocal {label}: estimate {} analytic {} z {:.2}",
                    verdict(ok),
                    format::num(nl.estimate),
                    format::num(nl.analytic),
                    nl.z_score
                );
                failed |= !ok;
                reports.push(nl);

                let cov = mc_coverage(&lattice, &d, r, g, &cfg)?;
                let bias = coverage_bias(&lattice, &d, r, g)?;
                let sigma = cov.std_error.max(1.0 / cov.samples as f64);
                let diff = cov.estimate - cov.analytic;
                let ok = diff >= bias.lower() - 4.0 * sigma && diff <= bias.upper() + 4.0 * sigma;
                eprintln!(
                    "{} coverage {label}: estimate {} analytic {} deviation {:.3e} expected [{:.3e}, {:.3e}] +- {:.1e}",
                    verdict(ok),
                    format::num(cov.estimate),
                    format::num(cov.analytic),
                    diff,
                    bias.lower(),
                    bias.upper(),
                    4.0 * sigma
                );
                failed |= !ok;
                reports.push(cov);
            }
        }
    }
    let mut text =
        serde_json::to_string_pretty(&reports).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    Ok(Output { text, failed })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok  "
    } else {
        "FAIL"
    }
}
