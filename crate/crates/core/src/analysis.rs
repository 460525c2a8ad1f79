//! Peak finding, barrier heights and feedback scans.

use std::io::Write;

use crate::analytic::{self, OverdampedForm};
use crate::dist::{symmetric_grid, Distribution1D};
use crate::error::{Error, Result};
use crate::fp2d::{build_grid, Evolver, GridSpec, GridStart, WignerField};
use crate::langevin::{self, SdeConfig, SdeMode};
use crate::model::{classify_regime, modulation, Regime, SystemParams};
use crate::scalar::{lit, Real};

pub const MIN_POINTS: usize = 64;
/// Maxima below this fraction of the global maximum are treated as tail noise.
pub const MIN_PEAK_FRACTION: f64 = 1e-3;
pub const HISTOGRAM_WINDOW: usize = 5;
pub const FIXED_POINT_TOL: f64 = 1e-6;
pub const FIXED_POINT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct BistabilityReport<T> {
    /// Refined abscissae of the maxima, ascending.
    pub peaks: Vec<T>,
    pub peak_densities: Vec<T>,
    /// Lowest point strictly between the two maxima of a bistable density.
    pub dip: Option<(T, T)>,
    /// `U(dip) - max U(peaks)` in units of `k_B T`.
    pub barrier: Option<T>,
    pub bistable: bool,
    pub smoothing_window: usize,
    pub gamma_eff: Option<T>,
    pub modulation: Option<T>,
}

fn smooth<T: Real>(v: &[T], window: usize) -> Vec<T> {
    if window <= 1 {
        return v.to_vec();
    }
    let half = window / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(v.len() - 1);
            v[lo..=hi].iter().copied().fold(T::zero(), |a, b| a + b) / T::from_usize_lossy(hi - lo + 1)
        })
        .collect()
}

/// Vertex of the parabola through three points.
fn parabola_vertex<T: Real>(x: [T; 3], y: [T; 3]) -> T {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a >= T::zero() {
        return x[1];
    }
    let v = lit::<T>(0.5) * (x[0] + x[1]) - d1 / (lit::<T>(2.0) * a);
    v.max(x[0]).min(x[2])
}

/// Strict local maxima after a centred moving average of `window` points.
pub fn detect_peaks<T: Real>(dist: &Distribution1D<T>, window: usize) -> Result<BistabilityReport<T>> {
    if dist.len() < MIN_POINTS {
        return Err(Error::domain(
            "detect_peaks",
            format!("need at least {} points, got {}", MIN_POINTS, dist.len()),
        ));
    }
    let d = smooth(&dist.density, window);
    let x = &dist.points;
    let top = d.iter().copied().fold(T::zero(), T::max);
    let floor = top * lit(MIN_PEAK_FRACTION);
    let mut idx = Vec::new();
    for i in 1..d.len() - 1 {
        if d[i] > d[i - 1] && d[i] > d[i + 1] && d[i] >= floor {
            idx.push(i);
        }
    }
    let peaks = idx
        .iter()
        .map(|&i| parabola_vertex([x[i - 1], x[i], x[i + 1]], [d[i - 1], d[i], d[i + 1]]))
        .collect();
    let peak_densities: Vec<T> = idx.iter().map(|&i| d[i]).collect();
    let mut dip = None;
    let mut bistable = false;
    if idx.len() == 2 {
        let (a, b) = (idx[0], idx[1]);
        let (k, v) = (a + 1..b)
            .map(|k| (k, d[k]))
            .fold((a, d[a]), |m, c| if c.1 < m.1 { c } else { m });
        if v < d[a] && v < d[b] {
            bistable = true;
            dip = Some((x[k], v));
        }
    }
    let barrier = match (bistable, dip) {
        (true, Some((_, v))) => {
            let low_peak = peak_densities[0].min(peak_densities[1]);
            let floor = lit::<T>(analytic::DENSITY_FLOOR);
            Some((low_peak.max(floor) / v.max(floor)).ln())
        }
        _ => None,
    };
    Ok(BistabilityReport {
        peaks,
        peak_densities,
        dip,
        barrier,
        bistable,
        smoothing_window: window,
        gamma_eff: None,
        modulation: None,
    })
}

/// Barrier of the potential `-ln W` between the two wells.
pub fn barrier<T: Real>(dist: &Distribution1D<T>, window: usize) -> Result<T> {
    let rep = detect_peaks(dist, window)?;
    if !rep.bistable {
        return Err(Error::domain(
            "barrier",
            format!("density is not bistable ({} maxima)", rep.peaks.len()),
        ));
    }
    let pot = analytic::potential_from_density(&Distribution1D {
        density: smooth(&dist.density, window),
        ..dist.clone()
    });
    let u = &pot.curve.density;
    let (dip_x, _) = rep.dip.expect("bistable report has a dip");
    let at = |y: T| {
        let k = dist
            .points
            .iter()
            .position(|&p| p == y)
            .expect("dip lies on the grid");
        u[k]
    };
    let peak_u = |i: usize| -> T {
        let target = rep.peak_densities[i];
        let d = smooth(&dist.density, window);
        let k = d.iter().position(|&v| v == target).expect("peak lies on the grid");
        u[k]
    };
    Ok(at(dip_x) - peak_u(0).max(peak_u(1)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fp2dScanOptions {
    pub cells: usize,
    pub span_sigmas: f64,
    pub tol: f64,
    pub max_windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinScanOptions {
    pub n_traj: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanEngine {
    /// Overdamped closed form for `gamma_eff >= 1`, low-damping closed form below.
    Analytic,
    Fp2d(Fp2dScanOptions),
    Langevin(LangevinScanOptions),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow<T> {
    pub gamma_eff: T,
    pub gamma_f: T,
    pub big_gamma_f: T,
    pub x_peak_minus: T,
    pub x_peak_plus: T,
    pub barrier: T,
    pub modulation: T,
    pub over_limit: bool,
    pub bistable: bool,
    pub regime: Regime,
}

/// Solves `gamma_eff = (2 gamma_g + 24 gamma_f x2(gamma_f)) / omega_z` for
/// `gamma_f` at fixed `Gamma_f / gamma_f`, by fixed-point iteration on `x2`.
pub fn solve_feedback<T: Real>(base: &SystemParams<T>, gamma_eff: T, ratio: T) -> Result<SystemParams<T>> {
    let drive = gamma_eff * base.omega_z - lit::<T>(2.0) * base.gamma_g;
    let with = |gf: T| SystemParams {
        gamma_f: gf,
        big_gamma_f: gf * ratio,
        ..*base
    };
    if !(drive > T::zero()) {
        return Ok(with(T::zero()));
    }
    let mut gf = T::zero();
    for _ in 0..FIXED_POINT_MAX_ITER {
        let x2 = analytic::x2_scale(&with(gf))?;
        let next = drive / (lit::<T>(24.0) * x2);
        if (next - gf).abs() <= lit::<T>(FIXED_POINT_TOL) * next {
            return Ok(with(next));
        }
        gf = next;
    }
    Err(Error::Numerical(format!(
        "feedback fixed point for gamma_eff = {} did not converge in {} iterations",
        gamma_eff, FIXED_POINT_MAX_ITER
    )))
}

fn row_distribution(params: &SystemParams<f64>, gamma_eff: f64, engine: &ScanEngine) -> Result<(Distribution1D<f64>, usize)> {
    let x2 = analytic::x2_scale(params)?;
    match engine {
        ScanEngine::Analytic => {
            let grid = symmetric_grid(8.0 * x2.sqrt(), 2001);
            let d = if gamma_eff >= crate::model::OVERDAMPED_MIN && params.gamma_f > 0.0 {
                analytic::position_dist_overdamped(params, &grid, OverdampedForm::Full)?
            } else {
                analytic::position_dist_low_damping(params, &grid)?
            };
            Ok((d, 0))
        }
        ScanEngine::Fp2d(o) => {
            let grid = build_grid(params, GridSpec::square(o.cells, o.span_sigmas, GridStart::Steady))?;
            let mut field = WignerField::init_thermal(&grid, (x2 - 0.5).max(0.0))?;
            let mut ev = Evolver::new(params, &grid, None)?;
            let window = crate::fp2d::STEADY_WINDOW_PERIODS * params.trap_period();
            ev.evolve_to_steady(&mut field, o.tol, window, o.max_windows)?;
            Ok((field.marginal_x()?, 0))
        }
        ScanEngine::Langevin(o) => {
            let cfg = SdeConfig::defaults(params, SdeMode::Full2D, o.n_traj, o.dt, o.t_end, o.seed)?;
            let ens = langevin::simulate_full(params, &cfg)?;
            let h = 6.0 * x2.sqrt();
            Ok((langevin::histogram(&ens, langevin::Axis::X, o.bins, Some((-h, h)))?, HISTOGRAM_WINDOW))
        }
    }
}

/// One row per target; targets must be ascending.
pub fn scan_feedback(base: &SystemParams<f64>, targets: &[f64], engine: ScanEngine) -> Result<Vec<ScanRow<f64>>> {
    base.validate()?;
    if targets.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("scan_feedback", "targets must be strictly ascending"));
    }
    let ratio = if base.gamma_f > 0.0 { base.big_gamma_f / base.gamma_f } else { 0.0 };
    let mut rows = Vec::with_capacity(targets.len());
    for &target in targets {
        let p = solve_feedback(base, target, ratio)?;
        let x2 = analytic::x2_scale(&p)?;
        let regime = classify_regime(&p, x2);
        let (dist, window) = row_distribution(&p, target, &engine)?;
        let rep = detect_peaks(&dist, window)?;
        let (xm, xp) = if rep.bistable {
            (rep.peaks[0], rep.peaks[1])
        } else {
            // Highest maximum, or the origin if none qualifies.
            let best = rep
                .peak_densities
                .iter()
                .zip(&rep.peaks)
                .fold(None::<(f64, f64)>, |m, (&d, &x)| match m {
                    Some((md, _)) if md >= d => m,
                    _ => Some((d, x)),
                })
                .map_or(0.0, |(_, x)| x);
            (best, best)
        };
        let m = modulation(&p, analytic::steady_n(&p)?);
        rows.push(ScanRow {
            gamma_eff: target,
            gamma_f: p.gamma_f,
            big_gamma_f: p.big_gamma_f,
            x_peak_minus: xm,
            x_peak_plus: xp,
            barrier: rep.barrier.unwrap_or(0.0),
            modulation: m.value,
            over_limit: m.over_limit,
            bistable: rep.bistable,
            regime: regime.regime,
        });
    }
    Ok(rows)
}

/// `n` targets spaced logarithmically on `[lo, hi]`.
pub fn log_targets(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

/// `gamma_eff` interval bracketing the first bistable row.
pub fn bistability_onset(rows: &[ScanRow<f64>]) -> Option<(f64, f64)> {
    let k = rows.iter().position(|r| r.bistable)?;
    if k == 0 {
        return Some((0.0, rows[0].gamma_eff));
    }
    Some((rows[k - 1].gamma_eff, rows[k].gamma_eff))
}

/// CSV with header `gamma_eff,gamma_f,Gamma_f,x_peak_minus,x_peak_plus,barrier,M,bistable`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow<f64>], mut out: W, header: &str) -> Result<()> {
    for line in header.lines() {
        writeln!(out, "# {}", line)?;
    }
    writeln!(out, "gamma_eff,gamma_f,Gamma_f,x_peak_minus,x_peak_plus,barrier,M,bistable")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.gamma_eff, r.gamma_f, r.big_gamma_f, r.x_peak_minus, r.x_peak_plus, r.barrier, r.modulation, r.bistable
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistAxis;
    use crate::presets::preset;

    fn from_log(points: Vec<f64>, f: impl Fn(f64) -> f64) -> Distribution1D<f64> {
        let l: Vec<f64> = points.iter().map(|&x| f(x)).collect();
        Distribution1D::from_log_density(DistAxis::X, points, &l).unwrap()
    }

    #[test]
    fn gaussian_is_monostable() {
        let d = from_log(symmetric_grid(6.0, 201), |x| -x * x / 2.0);
        let r = detect_peaks(&d, 0).unwrap();
        assert_eq!(r.peaks.len(), 1);
        assert!(r.peaks[0].abs() < 1e-12);
        assert!(!r.bistable);
        assert!(barrier(&d, 0).unwrap_err().is_validation());
    }

    #[test]
    fn flat_density_has_no_peaks() {
        let d = from_log(symmetric_grid(1.0, 100), |_| 0.0);
        let r = detect_peaks(&d, 0).unwrap();
        assert!(r.peaks.is_empty() && !r.bistable);
    }

    #[test]
    fn quartic_double_well_barrier() {
        let ln2 = std::f64::consts::LN_2;
        let d = from_log(symmetric_grid(2.0, 401), |x| -ln2 * (x * x - 1.0).powi(2));
        let r = detect_peaks(&d, 0).unwrap();
        assert!(r.bistable);
        assert!((r.peaks[1] - 1.0).abs() < 1e-3 && (r.peaks[0] + 1.0).abs() < 1e-3);
        let b = barrier(&d, 0).unwrap();
        assert!(((b - ln2) / ln2).abs() < 0.02, "{b}");
        assert!(((r.barrier.unwrap() - ln2) / ln2).abs() < 0.02);
    }

    #[test]
    fn quadratic_refinement_is_sub_bin() {
        let d = from_log(symmetric_grid(5.0, 101), |x| -(x - 0.037) * (x - 0.037) / 2.0);
        let r = detect_peaks(&d, 0).unwrap();
        assert!((r.peaks[0] - 0.037).abs() < 2e-3, "{}", r.peaks[0]);
    }

    #[test]
    fn too_few_points() {
        let d = from_log(symmetric_grid(1.0, 32), |x| -x * x);
        assert!(detect_peaks(&d, 0).is_err());
    }

    #[test]
    fn analytic_fig6_peaks_match_closed_form() {
        let p = preset("fig6").unwrap();
        let grid = symmetric_grid(60.0, 6001);
        let d = analytic::position_dist_overdamped(&p, &grid, OverdampedForm::Simplified).unwrap();
        let r = detect_peaks(&d, 0).unwrap();
        let (_, xp) = analytic::simplified_density_peaks(&p).unwrap();
        assert!(r.bistable);
        assert!(((r.peaks[1] - xp) / xp).abs() < 5e-3);
    }

    #[test]
    fn feedback_fixed_point() {
        let base = preset("fig6").unwrap();
        let ratio = 1.0 / 27.0;
        for target in [1e-3, 0.5, 5.77] {
            let p = solve_feedback(&base, target, ratio).unwrap();
            let x2 = analytic::steady_x2(&p).unwrap().exact;
            let got = (2.0 * p.gamma_g + 24.0 * p.gamma_f * x2) / p.omega_z;
            assert!(((got - target) / target).abs() < 1e-5);
            assert!((p.big_gamma_f / p.gamma_f - ratio).abs() < 1e-15);
        }
        // The fig6 preset itself sits at gamma_eff ~ 5.77.
        let p = solve_feedback(&base, 24.0 * base.gamma_f * 64.95519 / 40.0 + 2.0 * base.gamma_g / 40.0, ratio).unwrap();
        assert!(((p.gamma_f - base.gamma_f) / base.gamma_f).abs() < 1e-4);
        assert_eq!(solve_feedback(&base, 1e-9, ratio).unwrap().gamma_f, 0.0);
    }

    #[test]
    fn analytic_scan_turns_bistable() {
        let base = preset("fig6").unwrap();
        let rows = scan_feedback(&base, &log_targets(1e-3, 10.0, 9), ScanEngine::Analytic).unwrap();
        assert!(!rows[0].bistable);
        assert!(rows[0].x_peak_plus.abs() < 1e-6);
        assert!(rows.last().unwrap().bistable);
        let (lo, hi) = bistability_onset(&rows).unwrap();
        assert!(lo < 1.0 && hi >= 1.0);
        let mut buf = Vec::new();
        write_scan_csv(&rows, &mut buf, "scan").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("gamma_eff,gamma_f,Gamma_f,x_peak_minus,x_peak_plus,barrier,M,bistable\n"));
        assert_eq!(text.lines().count(), 2 + rows.len());
    }

    #[test]
    fn rejects_unsorted_targets() {
        let base = preset("fig6").unwrap();
        assert!(scan_feedback(&base, &[1.0, 0.5], ScanEngine::Analytic).is_err());
    }
}
