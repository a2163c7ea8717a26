//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p smeared-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use smeared_core::engine::{
    self, closed_limit, finite_k_limit, log_grid, transmittance_curve, ModelLabel,
};
use smeared_core::montecarlo::{coverage_bias, mc_coverage, mc_nonlocal, McConfig};
use smeared_core::{OpacityKind, OpacitySpec, ParticleLattice, SpreadDistribution};

const N: usize = 61;
const R: f64 = 1.0;
const G: f64 = 0.7;
/// Mass retention above which a configuration counts as closed.
const CLOSED_MASS: f64 = 0.99;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gauss(s: f64) -> SpreadDistribution {
    SpreadDistribution::gaussian(s).unwrap()
}

fn sweep() -> Vec<f64> {
    // 10^-3 r .. 10^4 N r, 60 points per decade
    log_grid(1e-3, 1e4 * N as f64 * R, 60 * 10 + 1).unwrap()
}

fn classical_recovery() -> Outcome {
    let t0 = Instant::now();
    let lattice = ParticleLattice::centered(N, R, 0.0).unwrap();
    let tr = engine::product_tr(&lattice, &gauss(1e-6), R, G).unwrap();
    let dt = t0.elapsed();
    outcome(
        (tr - 0.3).abs() <= 1e-6 && dt < Duration::from_secs(1),
        format!("TR = {tr:.9} (target 0.3 +- 1e-6), {dt:.2?}"),
    )
}

fn closed_plateau() -> Outcome {
    let t0 = Instant::now();
    let limit = closed_limit(G).unwrap();
    let grid = sweep();
    let curve = transmittance_curve(N, R, G, 0.0, &grid, &[ModelLabel::Nonlocal]).unwrap();
    let tr = curve.get(ModelLabel::Nonlocal).unwrap();
    let near = |i: usize| ((tr[i] - limit) / limit).abs() <= 0.02;

    // a decade [s, 10 s] inside [r, N r] with every grid point in it near the limit
    let lo = R;
    let hi = N as f64 * R;
    let mut found = None;
    for &s in &grid {
        if s < lo || 10.0 * s > hi * (1.0 + 1e-12) {
            continue;
        }
        let ok = grid
            .iter()
            .enumerate()
            .filter(|(_, &x)| x >= s && x <= 10.0 * s * (1.0 + 1e-12))
            .all(|(j, _)| near(j));
        if ok {
            found = Some(s);
            break;
        }
    }
    // widest contiguous stretch within 2%, for the report
    let (mut best, mut start): ((f64, f64), Option<usize>) = ((0.0, 0.0), None);
    for i in 0..grid.len() {
        match (near(i), start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                if grid[i - 1] / grid[a] > best.1 / best.0.max(f64::MIN_POSITIVE) {
                    best = (grid[a], grid[i - 1]);
                }
                start = None;
            }
            _ => {}
        }
    }
    let dt = t0.elapsed();
    let detail = format!(
        "2% band spans stdev {:.3}..{:.3} (ratio {:.2}); decade inside [r, {N}r]: {}; {dt:.2?}",
        best.0,
        best.1,
        best.1 / best.0,
        match found {
            Some(s) => format!("[{s:.3}, {:.3}]", 10.0 * s),
            None => "none".into(),
        }
    );
    outcome(found.is_some() && dt < Duration::from_secs(10), detail)
}

/// Largest non-local TR over the closed-system part of the sweep.
fn closed_plateau_value(g: f64) -> (f64, f64) {
    let grid = sweep();
    let curve = transmittance_curve(N, R, g, 0.0, &grid, &[ModelLabel::Nonlocal]).unwrap();
    let tr = curve.get(ModelLabel::Nonlocal).unwrap();
    tr.iter()
        .zip(&grid)
        .zip(&curve.mass_sum)
        .filter(|(_, &s)| s >= CLOSED_MASS)
        .map(|((&t, &x), _)| (t, x))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
}

fn opaque_limit() -> Outcome {
    let (value, at) = closed_plateau_value(1.0);
    outcome(
        (value - 0.3679).abs() <= 0.005,
        format!("closed-system plateau {value:.5} at stdev {at:.2} (target 0.3679 +- 0.005)"),
    )
}

fn open_limit() -> Outcome {
    let s = 1e4 * N as f64 * R;
    let curve = transmittance_curve(N, R, G, 0.0, &[s], &[ModelLabel::Nonlocal]).unwrap();
    let tr = curve.get(ModelLabel::Nonlocal).unwrap()[0];
    let mass = curve.mass_sum[0];
    outcome(
        tr >= 0.999 && mass <= 1e-3,
        format!("TR = {tr:.6} (>= 0.999), mass_sum = {mass:.3e} (<= 1e-3)"),
    )
}

fn finite_k_convergence() -> Outcome {
    let values: Vec<f64> = (1..=1000).map(|k| finite_k_limit(G, k).unwrap()).collect();
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let gap = (values[999] - closed_limit(G).unwrap()).abs();
    outcome(
        increasing && gap <= 5e-4,
        format!("strictly increasing: {increasing}; |f(1000) - e^-g| = {gap:.3e} (<= 5e-4)"),
    )
}

fn off_axis_effect() -> Outcome {
    let grid = sweep();
    let m = [ModelLabel::Nonlocal];
    let on = transmittance_curve(N, R, G, 0.0, &grid, &m).unwrap();
    let off = transmittance_curve(N, R, G, 20.0 * R, &grid, &m).unwrap();
    let (on, off) = (on.get(m[0]).unwrap(), off.get(m[0]).unwrap());
    let excess: Vec<f64> = off.iter().zip(on).map(|(a, b)| a - b).collect();
    let min = excess.iter().cloned().fold(f64::INFINITY, f64::min);
    let (imax, max) = excess
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let first = excess[0].abs();
    let last = excess[excess.len() - 1].abs();
    outcome(
        min >= -1e-12 && max > 1e-3 && first < 1e-6 && last < 1e-6,
        format!(
            "min excess {min:.2e}, max excess {max:.4} at stdev {:.2}, ends {first:.1e} / {last:.1e}",
            grid[imax]
        ),
    )
}

fn interpretation_separation() -> Outcome {
    let grid = sweep();
    let curve = transmittance_curve(
        N,
        R,
        G,
        0.0,
        &grid,
        &[ModelLabel::Nonlocal, ModelLabel::Pilotwave],
    )
    .unwrap();
    let nl = curve.get(ModelLabel::Nonlocal).unwrap();
    let pw = curve.get(ModelLabel::Pilotwave).unwrap();
    let closed: Vec<usize> = (0..grid.len())
        .filter(|&i| curve.mass_sum[i] >= CLOSED_MASS)
        .collect();
    let sep = closed
        .iter()
        .map(|&i| nl[i] - pw[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let drift = closed
        .iter()
        .map(|&i| (pw[i] - 0.3).abs())
        .fold(0.0, f64::max);
    outcome(
        !closed.is_empty() && sep >= 0.15 && drift <= 0.01,
        format!(
            "closed range stdev <= {:.2}: max(nonlocal - pilotwave) = {sep:.4} (>= 0.15), max |pilotwave - 0.3| = {drift:.4} (<= 0.01)",
            closed.last().map(|&i| grid[i]).unwrap_or(f64::NAN)
        ),
    )
}

fn monte_carlo_agreement() -> Outcome {
    let t0 = Instant::now();
    let cfg = McConfig::new(1_000_000, 20_210_701, 16).unwrap();
    let mut worst_z: f64 = 0.0;
    let mut coverage_ok = true;
    let mut failures = Vec::new();
    for n in [1, 3, 61] {
        let lattice = ParticleLattice::centered(n, R, 0.0).unwrap();
        for s in [1e-8, 1.0, 10.0] {
            let d = gauss(s);
            for g in [0.1, 0.7, 1.0] {
                let rep = mc_nonlocal(&lattice, &d, R, g, &cfg).unwrap();
                worst_z = worst_z.max(rep.z_score.abs());
                if rep.z_score.abs() > 4.0 {
                    failures.push(format!("nonlocal n={n} s={s} g={g} z={:.2}", rep.z_score));
                }
                let cov = mc_coverage(&lattice, &d, R, g, &cfg).unwrap();
                let bound = coverage_bias(&lattice, &d, R, g).unwrap().upper().max(0.0);
                let diff = cov.estimate - cov.analytic;
                let four = 4.0 * cov.std_error.max(1.0 / cfg.samples as f64);
                if diff < -four || diff > bound + four {
                    coverage_ok = false;
                    failures.push(format!(
                        "coverage n={n} s={s} g={g} diff={diff:.4} bound={bound:.4}"
                    ));
                }
            }
        }
    }
    let dt = t0.elapsed();
    outcome(
        failures.is_empty() && dt < Duration::from_secs(300),
        format!(
            "27 cases x 10^6 photons: max |z| = {worst_z:.2} (<= 4), coverage brackets ok: {coverage_ok}, {dt:.1?}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
    )
}

fn quadrature_cross_check() -> Outcome {
    let mut worst: f64 = 0.0;
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / 9.0;
    let geo = |a: f64, b: f64, i: usize| a * (b / a).powf(i as f64 / 9.0);
    for i in 0..10 {
        let o = lin(-6.0, 6.0, i);
        for j in 0..10 {
            let r = geo(0.1, 10.0, j);
            for k in 0..10 {
                let d = gauss(geo(0.01, 100.0, k));
                let closed = d.interval_probability(o, r).unwrap();
                let numeric = d.interval_probability_numeric(o, r, 1e-13).unwrap();
                worst = worst.max((closed - numeric).abs());
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |closed - quadrature| = {worst:.2e} over 1000 points (<= 1e-9)"),
    )
}

fn conversion_roundtrips() -> Outcome {
    // Same-kind roundtrips must reproduce every field; the full cycle through
    // all four forms is compared on g, since tau is ill-conditioned as g -> 1.
    let mut worst: f64 = 0.0;
    let cycle = [
        OpacityKind::G,
        OpacityKind::Tau,
        OpacityKind::Abs,
        OpacityKind::TrCl,
    ];
    for kind in OpacityKind::ALL {
        for &v in &[1e-6_f64, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.999_999] {
            let value = match kind {
                OpacityKind::G | OpacityKind::TrCl => v,
                OpacityKind::Tau | OpacityKind::Abs => -v.ln(),
            };
            let a = OpacitySpec::new(kind, value).unwrap();
            let b = OpacitySpec::new(kind, a.get(kind)).unwrap();
            for f in OpacityKind::ALL {
                let (x, y) = (a.get(f), b.get(f));
                worst = worst.max((x - y).abs() / x.abs().max(1.0));
            }
            let start = cycle.iter().position(|&k| k == kind).unwrap();
            let mut c = a;
            for step in 1..=cycle.len() {
                let k = cycle[(start + step) % cycle.len()];
                c = OpacitySpec::new(k, c.get(k)).unwrap();
            }
            worst = worst.max((c.g - a.g).abs());
        }
    }
    let p = OpacitySpec::from_g(0.7).unwrap();
    let worked = (p.tau - 1.20).abs() < 5e-3 && (p.abs - 0.52).abs() < 5e-3;
    outcome(
        worst <= 1e-12 && worked,
        format!(
            "max roundtrip deviation {worst:.1e} (<= 1e-12); g=0.7 -> tau {:.4}, abs {:.4}",
            p.tau, p.abs
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("1 classical recovery", classical_recovery),
        ("2 closed-system plateau", closed_plateau),
        ("3 opaque-cloud limit", opaque_limit),
        ("4 open-system limit", open_limit),
        ("5 finite-K convergence", finite_k_convergence),
        ("6 off-axis effect", off_axis_effect),
        ("7 interpretation separation", interpretation_separation),
        ("8 Monte Carlo agreement", monte_carlo_agreement),
        ("9 quadrature cross-check", quadrature_cross_check),
        ("10 conversion roundtrips", conversion_roundtrips),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
