//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test --release -p nanolev --test acceptance`. The target is
//! excluded from the default `cargo test` set because it takes minutes and
//! some criteria fail by design of the model (see README).

use std::process::ExitCode;
use std::time::Instant;

use nanolev::analysis::{self, detect_peaks, log_targets, scan_feedback, ScanEngine};
use nanolev::analytic::{self, OverdampedForm};
use nanolev::dist::{linspace, symmetric_grid, Distribution1D};
use nanolev::fp1d;
use nanolev::fp2d::{boundary_ratio, build_grid, Evolver, GridSpec, GridStart, InvariantReport, WignerField};
use nanolev::langevin::{self, Axis, Calculus, SdeConfig, SdeMode};
use nanolev::model::{derive_coefficients, SystemParams};
use nanolev::moments::{self, Closure, MomentState};
use nanolev::presets::preset;

const CELLS: usize = 257;
const STEADY_TOL: f64 = 1e-6;
/// Mass drift and parity defect allowed on every fp2d evolution.
const MASS_TOL: f64 = 1e-9;
const PARITY_TOL: f64 = 1e-9;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn within(a: f64, b: f64, tol: f64) -> bool {
    rel(a, b) <= tol
}

/// Accumulates named sub-checks of one criterion.
struct Criterion {
    id: usize,
    title: &'static str,
    checks: Vec<(bool, String)>,
    start: Instant,
}

impl Criterion {
    fn new(id: usize, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            checks: Vec::new(),
            start: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.checks.push((ok, detail));
    }

    fn fail_with(&mut self, what: &str, err: impl std::fmt::Display) {
        self.checks.push((false, format!("{what}: error {err}")));
    }

    fn finish(self) -> bool {
        let ok = !self.checks.is_empty() && self.checks.iter().all(|c| c.0);
        println!(
            "criterion {} [{}]: {} ({:.1}s)",
            self.id,
            self.title,
            if ok { "PASS" } else { "FAIL" },
            self.start.elapsed().as_secs_f64()
        );
        for (c, d) in &self.checks {
            println!("    {} {}", if *c { "ok  " } else { "FAIL" }, d);
        }
        ok
    }
}

/// Steady fp2d field for `params`, started from a thermal state at `n_init`.
struct SteadyRun {
    field: WignerField<f64>,
    converged: bool,
    residual: f64,
    seconds: f64,
}

fn fp2d_steady(
    params: &SystemParams<f64>,
    span: f64,
    n_init: f64,
    max_windows: usize,
    invariants: &mut Vec<(&'static str, InvariantReport<f64>)>,
    tag: &'static str,
) -> nanolev::Result<SteadyRun> {
    let t0 = Instant::now();
    let grid = build_grid(params, GridSpec::square(CELLS, span, GridStart::Steady))?;
    let mut field = WignerField::init_thermal(&grid, n_init)?;
    let mut ev = Evolver::new(params, &grid, None)?;
    let window = 10.0 * params.trap_period();
    let rep = ev.evolve_to_steady(&mut field, STEADY_TOL, window, max_windows)?;
    invariants.push((tag, field.invariants()));
    Ok(SteadyRun {
        field,
        converged: rep.converged,
        residual: rep.residual,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

fn criterion_1(inv: &mut Vec<(&'static str, InvariantReport<f64>)>) -> bool {
    let mut c = Criterion::new(1, "no-feedback equilibrium");
    let p = preset("fig2").unwrap().without_feedback();
    let exact = analytic::no_feedback_steady(&p).unwrap();
    match fp2d_steady(&p, 8.0, p.n0, 8, inv, "fig2 without feedback") {
        Ok(run) => {
            let m = run.field.moments();
            c.check(run.converged, format!("steady residual {:.2e} < {STEADY_TOL:e}", run.residual));
            c.check(
                within(m.state.x2, exact.x2, 0.01),
                format!("<x^2> {:.6e} vs {:.6e} within 1%", m.state.x2, exact.x2),
            );
            c.check(
                within(m.state.p2, exact.p2, 0.01),
                format!("<p^2> {:.6e} vs {:.6e} within 1%", m.state.p2, exact.p2),
            );
            let scale = (exact.x2 * exact.p2).sqrt();
            c.check(
                (m.state.xp - exact.xp).abs() <= 0.01 * scale,
                format!("<xp> {:.3e} vs {:.3e} within 1% of sqrt(<x^2><p^2>)", m.state.xp, exact.xp),
            );
            c.check(within(m.n, exact.n_ss, 0.01), format!("n {:.6e} vs analytic {:.6e}", m.n, exact.n_ss));
            c.check(within(m.n, p.n0, 0.01), format!("n {:.6e} vs N0 {:.1e} within 1%", m.n, p.n0));
            c.check(run.seconds < 120.0, format!("runtime {:.1}s < 120s", run.seconds));
        }
        Err(e) => c.fail_with("fp2d", e),
    }
    c.finish()
}

/// fp2d fig6 steady state, shared by criteria 2, 3, 6 and 7.
struct Fig6 {
    run: Option<SteadyRun>,
    err: Option<String>,
}

fn fig6_fp2d(inv: &mut Vec<(&'static str, InvariantReport<f64>)>) -> Fig6 {
    let p = preset("fig6").unwrap();
    let x2 = analytic::x2_scale(&p).unwrap();
    // The x-marginal decays only as a power law; span 15 keeps the boundary
    // below 1e-10 of the maximum.
    match fp2d_steady(&p, 15.0, x2 - 0.5, 20, inv, "fig6") {
        Ok(run) => Fig6 { run: Some(run), err: None },
        Err(e) => Fig6 {
            run: None,
            err: Some(e.to_string()),
        },
    }
}

fn criterion_2(f6: &Fig6) -> bool {
    let mut c = Criterion::new(2, "feedback steady phonon number");
    let p = preset("fig6").unwrap();
    let n_an = analytic::steady_n(&p).unwrap();
    c.check((n_an - 65.0).abs() <= 0.5, format!("analytic steady n {n_an:.4} vs 65 +- 0.5"));
    match &f6.run {
        Some(run) => {
            let n = run.field.moments().n;
            c.check(run.converged, format!("steady residual {:.2e} < {STEADY_TOL:e}", run.residual));
            c.check(within(n, 84.0, 0.10), format!("fp2d steady n {n:.3} vs 84 +- 10%"));
            c.check(run.seconds < 900.0, format!("runtime {:.1}s < 900s", run.seconds));
            let b = boundary_ratio(&run.field);
            c.check(b < 1e-10, format!("boundary / max {b:.2e} < 1e-10"));
        }
        None => c.fail_with("fp2d", f6.err.as_deref().unwrap_or("")),
    }
    c.finish()
}

fn criterion_3(f6: &Fig6) -> bool {
    let mut c = Criterion::new(3, "bistability");
    let p = preset("fig6").unwrap();
    let (_, xp) = analytic::peak_positions(&p).unwrap();
    match &f6.run {
        Some(run) => {
            let mx = run.field.marginal_x().unwrap();
            let rep = detect_peaks(&mx, 0).unwrap();
            c.check(rep.peaks.len() == 2, format!("{} maxima in the fp2d x-marginal", rep.peaks.len()));
            for &pk in &rep.peaks {
                c.check(
                    within(pk.abs(), xp, 0.10),
                    format!("fp2d peak {pk:+.3} vs +-{xp:.3} within 10%"),
                );
            }
            let exact = analytic::position_dist_overdamped(&p, &mx.points, OverdampedForm::Full).unwrap();
            match (analysis::barrier(&exact, 0), analysis::barrier(&mx, 0)) {
                (Ok(ba), Ok(bf)) => c.check(ba > bf, format!("analytic barrier {ba:.3} > fp2d barrier {bf:.3}")),
                (a, b) => c.check(false, format!("barrier unavailable: analytic {a:?}, fp2d {b:?}")),
            }
        }
        None => c.fail_with("fp2d", f6.err.as_deref().unwrap_or("")),
    }
    let xs = symmetric_grid(60.0, 2401);
    let u = analytic::drift_potential(&p, &xs).unwrap();
    let minima = (1..u.len() - 1).filter(|&i| u[i] < u[i - 1] && u[i] <= u[i + 1]).count();
    c.check(minima == 1, format!("drift-only potential has {minima} well(s), want 1"));
    c.finish()
}

fn criterion_4(inv: &mut Vec<(&'static str, InvariantReport<f64>)>) -> bool {
    let mut c = Criterion::new(4, "low-damping distributions");
    let p = preset("fig4-desk").unwrap();
    let x2 = analytic::x2_scale(&p).unwrap();
    let res = (|| -> nanolev::Result<(f64, f64, f64, bool)> {
        // Span 5 leaves too much initial mass outside the grid.
        let grid = build_grid(&p, GridSpec::square(129, 6.0, GridStart::Steady))?;
        let mut f = WignerField::init_thermal(&grid, x2 - 0.5)?;
        let mut ev = Evolver::new(&p, &grid, None)?;
        let rep = ev.evolve_to_steady(&mut f, STEADY_TOL, 10.0 * p.trap_period(), 40)?;
        inv.push(("fig4-desk", f.invariants()));
        let me = f.marginal_energy(None, 8)?;
        let ea = analytic::energy_dist_low_damping(&p, &me.points)?;
        let mx = f.marginal_x()?;
        let xa = analytic::position_dist_low_damping(&p, &mx.points)?;
        Ok((me.l1_distance(&ea), mx.l1_distance(&xa), rep.residual, rep.converged))
    })();
    match res {
        Ok((le, lx, r, conv)) => {
            c.check(conv, format!("steady residual {r:.2e} < {STEADY_TOL:e}"));
            c.check(le < 0.05, format!("energy marginal L1 {le:.4} < 0.05"));
            c.check(lx < 0.05, format!("position marginal L1 {lx:.4} < 0.05"));
        }
        Err(e) => c.fail_with("fp2d fig4-desk", e),
    }
    let n = analytic::mean_phonon_low_damping(&preset("fig4").unwrap()).unwrap();
    c.check(within(n, 6.68e6, 0.01), format!("full-scale quadrature n {n:.5e} vs 6.68e6 +- 1%"));
    c.finish()
}

fn criterion_5(inv: &mut Vec<(&'static str, InvariantReport<f64>)>) -> bool {
    let mut c = Criterion::new(5, "cooling dynamics");
    let p = preset("fig2-desk").unwrap();
    let rate = analytic::cooling_time_tau(&p).unwrap();
    let t_end = 5.0 / rate;
    let times: Vec<f64> = linspace(0.0, t_end, 21);
    let res = (|| -> nanolev::Result<f64> {
        let grid = build_grid(&p, GridSpec::square(417, 5.0, GridStart::Hot))?;
        let mut f = WignerField::init_thermal(&grid, p.n0)?;
        let mut ev = Evolver::new(&p, &grid, None)?;
        let s = ev.evolve(&mut f, t_end, &times)?;
        inv.push(("fig2-desk", f.invariants()));
        let tr = moments::evolve(MomentState::thermal(p.n0), &p, t_end, 20, Closure::Gaussian)?;
        Ok(s.iter()
            .zip(&tr.samples)
            .map(|(a, b)| rel(a.moments.n, b.n))
            .fold(0.0, f64::max))
    })();
    match res {
        Ok(worst) => c.check(
            worst <= 0.05,
            format!("max |n_fp2d - n_closure| / n_closure {worst:.4} <= 0.05 over t in [0, {t_end:.4}]"),
        ),
        Err(e) => c.fail_with("fp2d fig2-desk", e),
    }
    // The window above ends long before a tenth of the initial energy is
    // lost, so the first decade comes from the closure trajectory.
    match moments::evolve(MomentState::thermal(p.n0), &p, 20.0, 400, Closure::Gaussian) {
        Ok(tr) => match moments::first_decade(&tr) {
            Some(dec) => {
                let r2 = moments::log_linear_r2(&dec);
                c.check(r2 < 0.99, format!("first-decade exponential fit R^2 {r2:.4} < 0.99"));
            }
            None => c.check(false, "n never fell to a tenth of its start".into()),
        },
        Err(e) => c.fail_with("closure", e),
    }
    c.check(c.start.elapsed().as_secs_f64() < 600.0, format!("runtime {:.1}s < 600s", c.start.elapsed().as_secs_f64()));
    c.finish()
}

/// Depth of the density at `x = 0` relative to the highest maximum.
fn dip_ratio(d: &Distribution1D<f64>) -> f64 {
    let top = d.density.iter().copied().fold(0.0, f64::max);
    d.value_at(0.0) / top
}

fn criterion_6(f6: &Fig6, strat_l1: &mut Option<f64>) -> bool {
    let mut c = Criterion::new(6, "overdamped cross-method consistency");
    let p = preset("fig6").unwrap();
    let res = (|| -> nanolev::Result<[Distribution1D<f64>; 3]> {
        let cfg = SdeConfig::defaults(&p, SdeMode::Overdamped1D, 1000, 1e-4, 10.0, 7)?;
        let ens = langevin::simulate_overdamped(&p, &cfg)?;
        let hist = langevin::histogram(&ens, Axis::X, 160, Some((-40.0, 40.0)))?;
        let exact = analytic::position_dist_overdamped(&p, &symmetric_grid(60.0, 4001), OverdampedForm::Full)?;
        let fp = fp1d::drift_diffusion_overdamped(&p, 60.0, 4001)?.steady_state()?;
        Ok([exact, fp, hist])
    })();
    let trio = match res {
        Ok(t) => t,
        Err(e) => {
            c.fail_with("overdamped routes", e);
            return c.finish();
        }
    };
    let names = ["analytic", "fp1d", "langevin"];
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let l1 = trio[i].l1_distance(&trio[j]);
        if (i, j) == (0, 2) {
            *strat_l1 = Some(l1);
        }
        c.check(l1 < 0.05, format!("L1 {} vs {} {l1:.4} < 0.05", names[i], names[j]));
    }
    match &f6.run {
        Some(run) => {
            let mx = run.field.marginal_x().unwrap();
            let fp_dip = dip_ratio(&mx);
            for (d, name) in trio.iter().zip(names) {
                let l1 = mx.l1_distance(d);
                c.check(l1 < 0.12, format!("L1 fp2d vs {name} {l1:.4} < 0.12"));
                let dip = dip_ratio(d);
                c.check(dip < fp_dip, format!("dip at 0: {name} {dip:.3e} deeper than fp2d {fp_dip:.3e}"));
            }
        }
        None => c.fail_with("fp2d", f6.err.as_deref().unwrap_or("")),
    }
    c.finish()
}

fn criterion_7(f6: &Fig6) -> bool {
    let mut c = Criterion::new(7, "phonon statistics");
    match &f6.run {
        Some(run) => {
            let g2 = run.field.moments().g2;
            c.check(within(g2, 2.04, 0.10), format!("fp2d g2 {g2:.4} vs 2.04 +- 10%"));
        }
        None => c.fail_with("fp2d", f6.err.as_deref().unwrap_or("")),
    }
    let mut p = preset("fig6").unwrap();
    p.big_gamma_f = p.gamma_f / 18.0;
    let d = derive_coefficients(&p).unwrap();
    let want = 3f64.sqrt() * (d.momentum_diffusion() / (2.0 * d.j)).sqrt();
    let got = analytic::x2_wss(&p).unwrap();
    c.check(rel(got, want) <= 1e-12, format!("optimum-feedback <x^2> {got:.15e} vs sqrt3 form, rel {:.1e}", rel(got, want)));
    c.finish()
}

fn criterion_8(inv: &[(&'static str, InvariantReport<f64>)], strat_l1: Option<f64>) -> bool {
    let mut c = Criterion::new(8, "oracle equivalences");
    let fig6 = preset("fig6").unwrap();
    let low = preset("fig4-desk").unwrap();

    let worst_rel = |a: &Distribution1D<f64>, b: &Distribution1D<f64>| {
        a.density
            .iter()
            .zip(&b.density)
            .filter(|(_, &y)| y > 1e-200)
            .map(|(&x, &y)| rel(x, y))
            .fold(0.0, f64::max)
    };
    let od = fp1d::drift_diffusion_overdamped(&fig6, 60.0, 4001).and_then(|pr| pr.steady_state());
    match od {
        Ok(w) => {
            let e = analytic::position_dist_overdamped(&fig6, &w.points, OverdampedForm::Full).unwrap();
            let r = worst_rel(&w, &e);
            c.check(r < 1e-6, format!("fp1d overdamped vs closed form, max rel {r:.2e} < 1e-6"));
        }
        Err(e) => c.fail_with("fp1d overdamped", e),
    }
    let en = fp1d::energy_space_low_damping(&low, 1e-3, 60.0, 4001).and_then(|pr| pr.steady_state());
    match en {
        Ok(w) => {
            let e = analytic::energy_dist_low_damping(&low, &w.points).unwrap();
            let r = worst_rel(&w, &e);
            c.check(r < 1e-6, format!("fp1d energy vs closed form, max rel {r:.2e} < 1e-6"));
        }
        Err(e) => c.fail_with("fp1d energy", e),
    }

    let nf = preset("fig2").unwrap().without_feedback();
    let g = analytic::no_feedback_steady(&nf).unwrap();
    let st = MomentState::gaussian(g.x2, g.p2, g.xp);
    let d = moments::rhs(&st, &nf, Closure::Gaussian);
    let scale = nf.gamma_g * g.x2.max(g.p2);
    let worst = [d.x2, d.p2, d.xp].iter().map(|v| v.abs() / scale).fold(0.0, f64::max);
    c.check(worst < 1e-10, format!("moment rhs at no-feedback fixed point, max |d/dt| / (gamma_g <x^2>) {worst:.1e} < 1e-10"));

    c.check(!inv.is_empty(), format!("{} fp2d evolutions recorded", inv.len()));
    for (tag, r) in inv {
        c.check(
            r.holds(MASS_TOL, PARITY_TOL),
            format!(
                "fp2d invariants on {tag}: mass error {:.1e}, min/max {:.1e}, parity {:.1e}",
                r.mass_error, r.min_ratio, r.parity_defect
            ),
        );
    }

    let ito = (|| -> nanolev::Result<f64> {
        let mut cfg = SdeConfig::defaults(&fig6, SdeMode::Overdamped1D, 200, 1e-4, 10.0, 7)?;
        cfg.calculus = Calculus::Ito;
        let ens = langevin::simulate_overdamped(&fig6, &cfg)?;
        let h = langevin::histogram(&ens, Axis::X, 160, Some((-40.0, 40.0)))?;
        let e = analytic::position_dist_overdamped(&fig6, &symmetric_grid(60.0, 4001), OverdampedForm::Full)?;
        Ok(h.l1_distance(&e))
    })();
    match (strat_l1, ito) {
        (Some(s), Ok(i)) => c.check(
            s < 0.05 && i > 0.2,
            format!("calculus discriminator: Stratonovich L1 {s:.4} < 0.05, Ito L1 {i:.4} > 0.2"),
        ),
        (_, Err(e)) => c.fail_with("Ito ensemble", e),
        (None, _) => c.check(false, "Stratonovich ensemble unavailable".into()),
    }
    let secs = c.start.elapsed().as_secs_f64();
    c.check(secs < 60.0, format!("property checks {secs:.1}s < 60s"));
    c.finish()
}

fn criterion_9() -> bool {
    let mut c = Criterion::new(9, "scan reproduction");
    let base = preset("fig6").unwrap();
    match scan_feedback(&base, &log_targets(1e-3, 10.0, 25), ScanEngine::Analytic) {
        Ok(rows) => {
            let first_bi = rows.iter().position(|r| r.bistable);
            let switches = rows.windows(2).filter(|w| w[0].bistable != w[1].bistable).count();
            c.check(
                matches!(first_bi, Some(k) if k > 0) && switches == 1,
                format!("monostable below, bistable above gamma_eff {:?}", analysis::bistability_onset(&rows)),
            );
            let sep: Vec<f64> = rows.iter().filter(|r| r.bistable).map(|r| r.x_peak_plus - r.x_peak_minus).collect();
            let inc = sep.windows(2).all(|w| w[1] >= w[0]);
            let dec = sep.windows(2).all(|w| w[1] <= w[0]);
            c.check(
                sep.len() >= 2 && (inc || dec),
                format!(
                    "peak separation monotone over {} bistable rows ({:.3} .. {:.3})",
                    sep.len(),
                    sep.first().copied().unwrap_or(f64::NAN),
                    sep.last().copied().unwrap_or(f64::NAN)
                ),
            );
        }
        Err(e) => c.fail_with("scan", e),
    }
    let hi = preset("high-n-bistable").unwrap();
    let n = analytic::steady_n(&hi).unwrap();
    c.check(within(n, 3.53e5, 0.01), format!("high-n steady n {n:.5e} vs 3.53e5 +- 1%"));
    let half = 4.0 * analytic::peak_positions(&hi).unwrap().1;
    let w = analytic::position_dist_overdamped(&hi, &symmetric_grid(half, 4001), OverdampedForm::Full).unwrap();
    let rep = detect_peaks(&w, 0).unwrap();
    c.check(rep.bistable, format!("high-n analytic density bistable, peaks {:?}", rep.peaks));
    c.finish()
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut inv = Vec::new();
    let mut results = Vec::new();
    results.push(criterion_1(&mut inv));
    let f6 = fig6_fp2d(&mut inv);
    results.push(criterion_2(&f6));
    results.push(criterion_3(&f6));
    results.push(criterion_4(&mut inv));
    results.push(criterion_5(&mut inv));
    let mut strat = None;
    results.push(criterion_6(&f6, &mut strat));
    results.push(criterion_7(&f6));
    results.push(criterion_8(&inv, strat));
    results.push(criterion_9());
    let passed = results.iter().filter(|&&r| r).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.1}s",
        results.len(),
        t0.elapsed().as_secs_f64()
    );
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
