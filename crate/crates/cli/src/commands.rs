use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nanolev::analysis::{self, Fp2dScanOptions, LangevinScanOptions, ScanEngine};
use nanolev::analytic::{self, OverdampedForm};
use nanolev::dist::{linspace, symmetric_grid};
use nanolev::fp1d;
use nanolev::fp2d::{self, boundary_ratio, build_grid, Evolver, GridSpec, GridStart};
use nanolev::langevin::{self, Axis, Calculus, SdeConfig, SdeMode};
use nanolev::model::{classify_regime, derive_coefficients, modulation, parse_config, to_config_string, Regime};
use nanolev::moments::{self, Closure, MomentState};
use nanolev::presets::{preset, presets};
use nanolev::{Distribution1D, SystemParams, WignerField};

/// `println!` that exits quietly once stdout's reader has gone (`| head`).
macro_rules! say {
    ($($arg:tt)*) => {
        if let Err(e) = writeln!(std::io::stdout().lock(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            panic!("writing to stdout: {e}");
        }
    };
}

use crate::provenance::{extract_config, header};
use crate::{
    AnalyticArgs, CalculusArg, Cli, ClosureArg, Command, CrosscheckArgs, EngineArg, Fp2dArgs, GridArgs, LangevinArgs,
    Mode, MomentsArgs, PresetsArgs, ScanArgs, Start,
};

/// Boundary density above this fraction of `max W` triggers a warning.
const BOUNDARY_WARN: f64 = 1e-10;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(nanolev::Error),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() && !matches!(e, nanolev::Error::Io(_)) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) if e.is_validation() => write!(f, "invalid input: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<nanolev::Error> for CliError {
    fn from(e: nanolev::Error) -> Self {
        CliError::Core(e)
    }
}

type Res<T> = std::result::Result<T, CliError>;

/// Shared state of one invocation.
struct Ctx<'a> {
    argv: &'a [String],
    seed: u64,
    out: PathBuf,
    params: SystemParams,
}

impl Ctx<'_> {
    fn header(&self, extra: &[String]) -> String {
        header(self.argv, self.seed, &self.params, extra)
    }

    fn create(&self, name: &str) -> Res<(PathBuf, BufWriter<File>)> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::Io(self.out.clone(), e))?;
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|e| CliError::Io(path.clone(), e))?;
        Ok((path, BufWriter::new(f)))
    }

    /// Runs `write` on a fresh file and reports the path.
    fn emit(&self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> nanolev::Result<()>) -> Res<()> {
        let (path, mut w) = self.create(name)?;
        write(&mut w)?;
        w.flush().map_err(|e| CliError::Io(path.clone(), e))?;
        say!("wrote {}", path.display());
        Ok(())
    }

    fn emit_dist(&self, name: &str, d: &Distribution1D, extra: &[String]) -> Res<()> {
        let h = self.header(extra);
        self.emit(name, |w| d.write_csv(w, &h))
    }

    /// `quantity,value` table.
    fn emit_table(&self, name: &str, rows: &[(String, String)], extra: &[String]) -> Res<()> {
        let h = self.header(extra);
        self.emit(name, |w| {
            for line in h.lines() {
                writeln!(w, "# {line}")?;
            }
            writeln!(w, "quantity,value")?;
            for (k, v) in rows {
                writeln!(w, "{k},{v}")?;
            }
            Ok(())
        })
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> Res<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    if let Command::Presets(a) = &cli.command {
        return presets_cmd(a, &cli.global.out);
    }
    let ctx = Ctx {
        argv,
        seed: cli.global.seed,
        out: cli.global.out.clone(),
        params: load_params(&cli.global.config, &cli.global.preset, &cli.global.overrides)?,
    };
    match &cli.command {
        Command::Derive => derive(&ctx),
        Command::Analytic(a) => analytic_cmd(&ctx, a),
        Command::Fp2d(a) => fp2d_cmd(&ctx, a),
        Command::Langevin(a) => langevin_cmd(&ctx, a),
        Command::Moments(a) => moments_cmd(&ctx, a),
        Command::Scan(a) => scan_cmd(&ctx, a),
        Command::Crosscheck(a) => crosscheck(&ctx, a),
        Command::Presets(_) => unreachable!("handled above"),
    }
}

/// Base parameters from `--config` or `--preset`, then `--set` overrides.
pub fn load_params(config: &Option<PathBuf>, preset_name: &Option<String>, overrides: &[String]) -> Res<SystemParams> {
    let base = match (config, preset_name) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
            let cfg = extract_config(&text).unwrap_or(text);
            parse_config::<f64>(&cfg)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(CliError::Usage("give --config FILE or --preset NAME".into())),
    };
    if overrides.is_empty() {
        return Ok(base);
    }
    let mut lines: Vec<(String, String)> = to_config_string(&base)
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect();
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        let k = k.trim();
        if matches!(k, "chi" | "Phi" | "G") {
            lines.retain(|(key, _)| key != "gamma_f" && key != "Gamma_f");
        }
        lines.retain(|(key, _)| key != k);
        lines.push((k.to_string(), v.trim().to_string()));
    }
    let text: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    Ok(parse_config::<f64>(&text)?)
}

fn presets_cmd(a: &PresetsArgs, out: &Path) -> Res<()> {
    if let Some(name) = &a.show {
        print!("{}", to_config_string(&preset(name)?));
        return Ok(());
    }
    if let Some(name) = &a.write {
        let p = preset(name)?;
        fs::create_dir_all(out).map_err(|e| CliError::Io(out.to_path_buf(), e))?;
        let path = out.join(format!("{name}.cfg"));
        let text = format!("# preset {name}\n{}", to_config_string(&p));
        fs::write(&path, text).map_err(|e| CliError::Io(path.clone(), e))?;
        say!("wrote {}", path.display());
        return Ok(());
    }
    for p in presets() {
        say!("{:<16} {}", p.name, p.description);
    }
    Ok(())
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::LowDamping => "LowDamping",
        Regime::Intermediate => "Intermediate",
        Regime::Overdamped => "Overdamped",
    }
}

/// Steady phonon number: feedback steady state when `J > 0`, else the
/// no-feedback Gaussian.
fn steady_n(p: &SystemParams) -> nanolev::Result<f64> {
    if derive_coefficients(p)?.j > 0.0 {
        analytic::steady_n(p)
    } else {
        Ok(analytic::no_feedback_steady(p)?.n_ss)
    }
}

fn derive(ctx: &Ctx) -> Res<()> {
    let p = &ctx.params;
    let c = derive_coefficients(p)?;
    let x2 = analytic::x2_scale(p)?;
    let r = classify_regime(p, x2);
    let n = steady_n(p)?;
    let m = modulation(p, n);
    say!("D_p = {} kHz", c.d_p);
    say!("D_q = {:e} kHz", c.d_q);
    say!("A = {} kHz", c.a_total);
    say!("A + D_p = {} kHz", c.momentum_diffusion());
    say!("J = {} kHz", c.j);
    say!("x2_ss = {x2}");
    say!("n_ss = {n}");
    say!("gamma_eff = {:e}", r.gamma_eff);
    say!("regime = {}", regime_name(r.regime));
    say!("modulation = {:e}{}", m.value, if m.over_limit { " (exceeds 100%)" } else { "" });
    Ok(())
}

/// Appends `(name, value)` when the quantity exists for these parameters;
/// numerical failures propagate.
fn push_opt(rows: &mut Vec<(String, String)>, name: &str, v: nanolev::Result<f64>) -> Res<()> {
    match v {
        Ok(v) => rows.push((name.to_string(), format!("{v:e}"))),
        Err(e) if e.is_validation() => {}
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn analytic_cmd(ctx: &Ctx, a: &AnalyticArgs) -> Res<()> {
    let p = &ctx.params;
    if a.points < 3 {
        return Err(CliError::Usage("--points must be >= 3".into()));
    }
    let x2 = analytic::x2_scale(p)?;
    let j = derive_coefficients(p)?.j;
    let mut rows = Vec::new();
    push_opt(&mut rows, "x2_scale", Ok(x2))?;
    push_opt(&mut rows, "n_ss", steady_n(p))?;
    push_opt(&mut rows, "x2_ss_approx", analytic::steady_x2(p).map(|s| s.approx))?;
    push_opt(&mut rows, "cooling_rate", analytic::cooling_time_tau(p))?;
    push_opt(&mut rows, "x_pm", analytic::peak_positions(p).map(|x| x.1))?;
    push_opt(&mut rows, "density_peak", analytic::simplified_density_peaks(p).map(|x| x.1))?;
    push_opt(&mut rows, "x2_wss", analytic::x2_wss(p))?;
    push_opt(&mut rows, "x4_wss", analytic::x4_wss(p))?;
    push_opt(&mut rows, "p2_overdamped", analytic::momentum_moments_overdamped(p).map(|m| m.p2))?;
    push_opt(&mut rows, "n_overdamped", analytic::phonon_stats_overdamped(p).map(|s| s.n))?;
    push_opt(&mut rows, "g2_overdamped", analytic::phonon_stats_overdamped(p).map(|s| s.g2))?;
    push_opt(&mut rows, "n_low_damping", analytic::mean_phonon_low_damping(p))?;
    push_opt(&mut rows, "n_no_feedback", analytic::no_feedback_steady(&p.without_feedback()).map(|s| s.n_ss))?;
    for (k, v) in &rows {
        say!("{k} = {v}");
    }
    ctx.emit_table("analytic_summary.csv", &rows, &[])?;

    let xs = symmetric_grid(a.span * x2.sqrt(), a.points);
    if j > 0.0 {
        ctx.emit_dist(
            "analytic_x_overdamped.csv",
            &analytic::position_dist_overdamped(p, &xs, OverdampedForm::Full)?,
            &["form: overdamped".into()],
        )?;
        ctx.emit_dist(
            "analytic_x_simplified.csv",
            &analytic::position_dist_overdamped(p, &xs, OverdampedForm::Simplified)?,
            &["form: overdamped, large-N0 limit".into()],
        )?;
    }
    ctx.emit_dist(
        "analytic_x_low_damping.csv",
        &analytic::position_dist_low_damping(p, &xs)?,
        &["form: low damping".into()],
    )?;
    let eps = linspace(0.0, 3.0 * a.span * x2, a.points);
    ctx.emit_dist(
        "analytic_energy_low_damping.csv",
        &analytic::energy_dist_low_damping(p, &eps)?,
        &["form: low damping".into()],
    )?;
    Ok(())
}

fn grid_for(p: &SystemParams, g: &GridArgs) -> nanolev::Result<nanolev::PhaseGrid> {
    let (start, span) = match g.start {
        Start::Steady => (GridStart::Steady, g.span.unwrap_or(15.0)),
        Start::Hot => (GridStart::Hot, g.span.unwrap_or(5.0)),
    };
    build_grid(p, GridSpec::square(g.cells, span, start))
}

fn initial_n(p: &SystemParams, g: &GridArgs, init_n: Option<f64>) -> nanolev::Result<f64> {
    Ok(match (init_n, g.start) {
        (Some(n), _) => n,
        (None, Start::Steady) => (analytic::x2_scale(p)? - 0.5).max(0.0),
        (None, Start::Hot) => p.n0,
    })
}

/// Steady field of the grid solver with the default window.
fn fp2d_steady(p: &SystemParams, g: &GridArgs, tol: f64, max_windows: usize) -> nanolev::Result<(WignerField, fp2d::SteadyStateReport<f64>)> {
    let grid = grid_for(p, g)?;
    let mut field = WignerField::init_thermal(&grid, initial_n(p, g, None)?)?;
    let mut ev = Evolver::new(p, &grid, None)?;
    let window = fp2d::STEADY_WINDOW_PERIODS * p.trap_period();
    let rep = ev.evolve_to_steady(&mut field, tol, window, max_windows)?;
    Ok((field, rep))
}

fn warn_boundary(field: &WignerField) {
    let b = boundary_ratio(field);
    if b > BOUNDARY_WARN {
        eprintln!("warning: boundary density {b:.2e} of max exceeds {BOUNDARY_WARN:e}; widen --span");
    }
}

fn fp2d_cmd(ctx: &Ctx, a: &Fp2dArgs) -> Res<()> {
    let p = &ctx.params;
    let grid = grid_for(p, &a.grid)?;
    let mut field = WignerField::init_thermal(&grid, initial_n(p, &a.grid, a.init_n)?)?;
    let mut ev = Evolver::new(p, &grid, None)?;
    let mut info = vec![
        format!("grid: {}x{} x_max {:e} p_max {:e} dt {:e}", grid.nx, grid.np, grid.x_max, grid.p_max, ev.dt),
    ];
    let mut rows = Vec::new();
    if a.steady {
        let window = fp2d::STEADY_WINDOW_PERIODS * p.trap_period();
        let rep = ev.evolve_to_steady(&mut field, a.tol, window, a.max_windows)?;
        if !rep.converged {
            eprintln!(
                "warning: not converged after {} windows (residual {:.2e} >= {:e})",
                rep.iterations, rep.residual, a.tol
            );
        }
        info.push(format!("steady: converged {} residual {:e} tol {:e}", rep.converged, rep.residual, a.tol));
        rows.push(("converged".into(), rep.converged.to_string()));
        rows.push(("residual".into(), format!("{:e}", rep.residual)));
    } else {
        if !(a.t_end > 0.0) {
            return Err(CliError::Usage("--t-end must be > 0".into()));
        }
        let times = linspace(0.0, a.t_end, a.samples.max(1) + 1);
        let series = ev.evolve(&mut field, a.t_end, &times)?;
        let h = ctx.header(&info);
        ctx.emit("fp2d_series.csv", |w| fp2d::write_series_csv(&series, w, &h))?;
    }
    warn_boundary(&field);
    let m = field.moments();
    rows.extend([
        ("time".to_string(), format!("{:e}", field.time)),
        ("n".into(), format!("{:e}", m.n)),
        ("x2".into(), format!("{:e}", m.state.x2)),
        ("p2".into(), format!("{:e}", m.state.p2)),
        ("xp".into(), format!("{:e}", m.state.xp)),
        ("x4".into(), format!("{:e}", m.state.x4)),
        ("g2".into(), format!("{:e}", m.g2)),
        ("mass".into(), format!("{:e}", m.mass)),
        ("boundary_ratio".into(), format!("{:e}", boundary_ratio(&field))),
    ]);
    let mx = field.marginal_x()?;
    let rep = analysis::detect_peaks(&mx, 0)?;
    rows.push(("x_peaks".into(), rep.peaks.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")));
    say!("n = {:.4} at t = {:.4}, g2 = {:.4}", m.n, field.time, m.g2);
    ctx.emit_table("fp2d_summary.csv", &rows, &info)?;
    ctx.emit_dist("fp2d_x.csv", &mx, &info)?;
    ctx.emit_dist("fp2d_p.csv", &field.marginal_p()?, &info)?;
    ctx.emit("fp2d_field.bin", |w| fp2d::write_binary(&field, w))?;
    // The binary layout has no room for text; provenance goes alongside.
    let h = ctx.header(&info);
    ctx.emit("fp2d_field.bin.provenance", |w| {
        for line in h.lines() {
            writeln!(w, "# {line}")?;
        }
        Ok(())
    })?;
    Ok(())
}

fn default_dt(p: &SystemParams, mode: SdeMode) -> f64 {
    match mode {
        SdeMode::Full2D => p.trap_period() / 500.0,
        SdeMode::Overdamped1D => p.trap_period() / 1000.0,
    }
}

fn sde_mode(m: Mode) -> SdeMode {
    match m {
        Mode::Full => SdeMode::Full2D,
        Mode::Overdamped => SdeMode::Overdamped1D,
    }
}

fn simulate(p: &SystemParams, mode: SdeMode, calc: Calculus, traj: usize, dt: f64, t_end: f64, seed: u64) -> nanolev::Result<nanolev::TrajectoryEnsemble> {
    let mut cfg = SdeConfig::defaults(p, mode, traj, dt, t_end, seed)?;
    cfg.calculus = calc;
    match mode {
        SdeMode::Full2D => langevin::simulate_full(p, &cfg),
        SdeMode::Overdamped1D => {
            let g = langevin::adiabatic_gamma_eff(p)?;
            if g < 1.0 {
                eprintln!("warning: gamma_eff {g:.3e} < 1; the overdamped reduction may not hold");
            }
            langevin::simulate_overdamped(p, &cfg)
        }
    }
}

fn langevin_cmd(ctx: &Ctx, a: &LangevinArgs) -> Res<()> {
    let p = &ctx.params;
    let mode = sde_mode(a.mode);
    let calc = match a.calculus {
        CalculusArg::Stratonovich => Calculus::Stratonovich,
        CalculusArg::Ito => Calculus::Ito,
    };
    let dt = a.dt.unwrap_or_else(|| default_dt(p, mode));
    let ens = simulate(p, mode, calc, a.traj, dt, a.t_end, ctx.seed)?;
    let m = langevin::ensemble_moments(&ens)?;
    let info = vec![format!("langevin: mode {:?} calculus {:?} traj {} dt {:e} t_end {:e}", mode, calc, a.traj, dt, a.t_end)];
    let h = ctx.header(&info);
    ctx.emit("langevin_summary.csv", |w| langevin::write_summary_csv(&m, &ens, w, &h))?;
    let half = a.span * analytic::x2_scale(p)?.sqrt();
    ctx.emit_dist("langevin_x.csv", &langevin::histogram(&ens, Axis::X, a.bins, Some((-half, half)))?, &info)?;
    if ens.has_momentum() {
        let hp = a.span * m.state.p2.sqrt();
        ctx.emit_dist("langevin_p.csv", &langevin::histogram(&ens, Axis::P, a.bins, Some((-hp, hp)))?, &info)?;
    }
    say!("n = {:.4} +- {:.4} ({} of {} trajectories kept)", m.n, m.n_se, ens.kept(), a.traj);
    Ok(())
}

fn moments_cmd(ctx: &Ctx, a: &MomentsArgs) -> Res<()> {
    let p = &ctx.params;
    let closure = match a.closure {
        ClosureArg::Gaussian => Closure::Gaussian,
        ClosureArg::Hierarchy => Closure::Hierarchy,
    };
    let tr = moments::evolve(MomentState::thermal(a.init_n.unwrap_or(p.n0)), p, a.t_end, a.samples, closure)?;
    let h = ctx.header(&[format!("moments: closure {closure:?} t_end {:e}", a.t_end)]);
    ctx.emit("moments.csv", |w| tr.write_csv(w, &h))?;
    say!("n({}) = {:.6}", a.t_end, tr.final_state().phonon_number());
    match moments::first_decade(&tr) {
        Some(d) if d.len() >= 3 => say!("first-decade exponential fit R^2 = {:.4}", moments::log_linear_r2(&d)),
        _ => say!("n does not fall by a decade within t_end"),
    }
    Ok(())
}

fn scan_cmd(ctx: &Ctx, a: &ScanArgs) -> Res<()> {
    if !(a.lo > 0.0 && a.hi > a.lo) || a.points < 2 {
        return Err(CliError::Usage("need 0 < --lo < --hi and --points >= 2".into()));
    }
    let engine = match a.engine {
        EngineArg::Analytic => ScanEngine::Analytic,
        EngineArg::Fp2d => ScanEngine::Fp2d(Fp2dScanOptions {
            cells: a.cells,
            span_sigmas: 15.0,
            tol: fp2d::DEFAULT_STEADY_TOL,
            max_windows: 50,
        }),
        EngineArg::Langevin => ScanEngine::Langevin(LangevinScanOptions {
            n_traj: a.traj,
            dt: default_dt(&ctx.params, SdeMode::Full2D),
            t_end: 10.0,
            seed: ctx.seed,
            bins: 120,
        }),
    };
    let rows = analysis::scan_feedback(&ctx.params, &analysis::log_targets(a.lo, a.hi, a.points), engine)?;
    let h = ctx.header(&[format!("scan: engine {engine:?}")]);
    ctx.emit("scan.csv", |w| analysis::write_scan_csv(&rows, w, &h))?;
    match analysis::bistability_onset(&rows) {
        Some((lo, hi)) => say!("bistability sets in between gamma_eff {lo:.4e} and {hi:.4e}"),
        None => say!("no monostable to bistable transition in the scanned range"),
    }
    Ok(())
}

fn crosscheck(ctx: &Ctx, a: &CrosscheckArgs) -> Res<()> {
    let p = &ctx.params;
    let x2 = analytic::x2_scale(p)?;
    let overdamped = classify_regime(p, x2).regime == Regime::Overdamped && derive_coefficients(p)?.j > 0.0;
    let half = 5.0 * x2.sqrt();
    let fine = symmetric_grid(1.5 * half, 4001);
    let mode = if overdamped { SdeMode::Overdamped1D } else { SdeMode::Full2D };
    let dt = a.dt.unwrap_or_else(|| default_dt(p, mode));

    let mut routes: Vec<(&str, Distribution1D)> = Vec::new();
    if overdamped {
        routes.push(("analytic", analytic::position_dist_overdamped(p, &fine, OverdampedForm::Full)?));
        routes.push(("fp1d", fp1d::drift_diffusion_overdamped(p, 1.5 * half, 4001)?.steady_state()?));
    } else {
        routes.push(("analytic", analytic::position_dist_low_damping(p, &fine)?));
    }
    let ens = simulate(p, mode, Calculus::Stratonovich, a.traj, dt, a.t_end, ctx.seed)?;
    routes.push(("langevin", langevin::histogram(&ens, Axis::X, a.bins, Some((-half, half)))?));
    if !a.skip_fp2d {
        let (field, rep) = fp2d_steady(p, &a.grid, fp2d::DEFAULT_STEADY_TOL, 50)?;
        if !rep.converged {
            eprintln!("warning: fp2d not converged (residual {:.2e})", rep.residual);
        }
        warn_boundary(&field);
        routes.push(("fp2d", field.marginal_x()?));
    }

    let info = vec![format!(
        "crosscheck: {} regime, langevin {:?} traj {} dt {:e} t_end {:e}",
        if overdamped { "overdamped" } else { "low-damping" },
        mode,
        a.traj,
        dt,
        a.t_end
    )];
    let mut rows = Vec::new();
    for i in 0..routes.len() {
        for j in i + 1..routes.len() {
            let l1 = routes[i].1.l1_distance(&routes[j].1);
            say!("L1({}, {}) = {:.4}", routes[i].0, routes[j].0, l1);
            rows.push((format!("{}|{}", routes[i].0, routes[j].0), format!("{l1:e}")));
        }
    }
    ctx.emit_table("crosscheck.csv", &rows, &info)?;
    for (name, d) in &routes {
        ctx.emit_dist(&format!("crosscheck_{name}.csv"), d, &info)?;
    }
    Ok(())
}
