//! Monte Carlo oracles for the analytic transmittance laws.
//!
//! Photons are simulated one at a time against explicitly sampled particle
//! positions, so the estimates depend on the analytic formulas only
//! through the reported `analytic` field.
//!
//! Each batch owns an independent ChaCha8 stream (`seed`, stream = batch
//! index). Batches run in parallel and their integer counts are summed in
//! batch order, so a report is bit-identical for a given `(seed, batches)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{Shape, SpreadDistribution};
use crate::engine::{self, ParticleLattice};
use crate::error::{check_g, check_radius, Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub batches: u32,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64, batches: u32) -> Result<Self> {
        let cfg = Self {
            samples,
            seed,
            batches,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.batches == 0 {
            return Err(Error::Usage("samples and batches must be >= 1".into()));
        }
        if !self.samples.is_multiple_of(u64::from(self.batches)) {
            return Err(Error::Usage(format!(
                "samples ({}) must be divisible by batches ({})",
                self.samples, self.batches
            )));
        }
        Ok(())
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0x5eed,
            batches: 16,
        }
    }
}

/// Outcome of one Monte Carlo run against its analytic counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub estimate: f64,
    /// binomial standard error of `estimate`
    pub std_error: f64,
    pub analytic: f64,
    pub z_score: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McReport {
    pub fn from_counts(transmitted: u64, samples: u64, analytic: f64, seed: u64) -> Self {
        let n = samples as f64;
        let estimate = transmitted as f64 / n;
        let std_error = (estimate * (1.0 - estimate) / n).sqrt();
        let diff = estimate - analytic;
        let z_score = if std_error > 0.0 {
            diff / std_error
        } else {
            // all photons agreed; fall back to the analytic binomial spread
            let spread = (analytic * (1.0 - analytic) / n).sqrt();
            if spread > 0.0 {
                diff / spread
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        };
        Self {
            estimate,
            std_error,
            analytic,
            z_score,
            samples,
            seed,
        }
    }
}

/// Standard normal quantile by Acklam's rational approximation
/// (relative error below 1.2e-9). Uses no error-function evaluations.
pub fn standard_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |p: f64| {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail(p)
    } else if p > 1.0 - P_LOW {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}

/// Position offset from the packet center, by inverse-CDF transform.
#[inline]
fn sample_displacement(shape: &Shape, rng: &mut ChaCha8Rng) -> f64 {
    let u = open_unit(rng);
    match shape {
        Shape::Gaussian { stdev } => stdev * standard_normal_quantile(u),
        Shape::Tabulated(t) => t.quantile(u),
    }
}

fn check_inputs(dist_shape: &SpreadDistribution, r: f64, g: f64, cfg: &McConfig) -> Result<()> {
    cfg.validate()?;
    check_g(g)?;
    check_radius(r)?;
    if dist_shape.center() != 0.0 {
        return Err(Error::Usage(
            "Monte Carlo needs a shape centered at 0".into(),
        ));
    }
    Ok(())
}

/// Runs `photon` for every sample across the configured batches and
/// returns how many photons were transmitted.
fn run_batches<F>(cfg: &McConfig, photon: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let per_batch = cfg.samples / u64::from(cfg.batches);
    let counts: Vec<u64> = (0..cfg.batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(u64::from(b));
            (0..per_batch).filter(|_| photon(&mut rng)).count() as u64
        })
        .collect();
    counts.iter().sum()
}

/// Photon-by-photon simulation of the non-local law.
///
/// For every chunk the particle position is drawn from its density; a
/// particle inside the tunnel `(-r, r)` absorbs with probability `g`. The
/// photon is transmitted when no chunk absorbs it. Compared against
/// [`engine::product_tr`].
pub fn mc_nonlocal(
    lattice: &ParticleLattice,
    dist_shape: &SpreadDistribution,
    r: f64,
    g: f64,
    cfg: &McConfig,
) -> Result<McReport> {
    check_inputs(dist_shape, r, g, cfg)?;
    let analytic = engine::product_tr(lattice, dist_shape, r, g)?;
    let shape = dist_shape.shape();
    let offsets = lattice.offsets();
    let transmitted = run_batches(cfg, |rng| {
        for &o in offsets {
            let x = o + sample_displacement(shape, rng);
            if x.abs() < r && open_unit(rng) < g {
                return false;
            }
        }
        true
    });
    Ok(McReport::from_counts(
        transmitted,
        cfg.samples,
        analytic,
        cfg.seed,
    ))
}

/// Simulation of localized "ball" absorbers.
///
/// Every ball blocks a sub-interval of width `2 r g` around its sampled
/// position; the photon arrives uniformly on `(-r, r)` and is absorbed if
/// it lands in any blocked sub-interval. Compared against
/// [`engine::pilotwave_tr`]. Overlapping blocks and blocks straddling the
/// tunnel edge bias the estimate; see [`coverage_bias`].
pub fn mc_coverage(
    lattice: &ParticleLattice,
    dist_shape: &SpreadDistribution,
    r: f64,
    g: f64,
    cfg: &McConfig,
) -> Result<McReport> {
    check_inputs(dist_shape, r, g, cfg)?;
    let analytic = engine::pilotwave_tr(lattice, dist_shape, r, g)?;
    let shape = dist_shape.shape();
    let offsets = lattice.offsets();
    let half_block = r * g;
    let transmitted = run_batches(cfg, |rng| {
        let arrival = r * (2.0 * open_unit(rng) - 1.0);
        for &o in offsets {
            let x = o + sample_displacement(shape, rng);
            if (x - arrival).abs() < half_block {
                return false;
            }
        }
        true
    });
    Ok(McReport::from_counts(
        transmitted,
        cfg.samples,
        analytic,
        cfg.seed,
    ))
}

/// Expected deviation of [`mc_coverage`] from the coverage law.
///
/// With `c_k(u)` the chance that ball `k` blocks arrival point `u`:
/// * `edge = g S - mean_u sum_k c_k(u)` comes from blocks that straddle the
///   tunnel boundary,
/// * `overlap = mean_u sum_{j<k} c_j(u) c_k(u)` bounds the double counting
///   of overlapping blocks (Bonferroni).
///
/// The expected estimate minus the analytic value lies in
/// `[edge, edge + overlap]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageBias {
    pub edge: f64,
    pub overlap: f64,
}

impl CoverageBias {
    pub fn lower(&self) -> f64 {
        self.edge
    }

    pub fn upper(&self) -> f64 {
        self.edge + self.overlap
    }
}

pub fn coverage_bias(
    lattice: &ParticleLattice,
    dist_shape: &SpreadDistribution,
    r: f64,
    g: f64,
) -> Result<CoverageBias> {
    check_g(g)?;
    check_radius(r)?;
    let masses = engine::chunk_masses(lattice, dist_shape, r)?;
    let s: f64 = masses.iter().sum();
    let half_block = r * g;
    let balls: Vec<SpreadDistribution> = lattice
        .offsets()
        .iter()
        .map(|&o| dist_shape.with_center(o))
        .collect();

    let mut breaks: Vec<f64> = lattice
        .offsets()
        .iter()
        .flat_map(|&o| [o - half_block, o, o + half_block])
        .collect();
    if let Some(sd) = dist_shape.stdev() {
        // block edges blur over a few stdev; bracket them so no ramp hides between nodes
        for &o in lattice.offsets() {
            for edge in [o - half_block, o + half_block] {
                breaks.extend([edge - 8.0 * sd, edge + 8.0 * sd]);
            }
        }
    }

    let blocking = |u: f64| -> (f64, f64) {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for b in &balls {
            let c = b.mass_between(u - half_block, u + half_block);
            sum += c;
            sum_sq += c * c;
        }
        (sum, sum_sq)
    };
    let width = 2.0 * r;
    let single = quadrature::integrate(|u| blocking(u).0, -r, r, &breaks, 1e-11, 0.0).value / width;
    let pairs = quadrature::integrate(
        |u| {
            let (s1, s2) = blocking(u);
            0.5 * (s1 * s1 - s2)
        },
        -r,
        r,
        &breaks,
        1e-11,
        0.0,
    )
    .value
        / width;
    Ok(CoverageBias {
        edge: g * s - single,
        overlap: pairs.max(0.0),
    })
}
