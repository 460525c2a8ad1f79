//! Stochastic trajectories of the full and the overdamped Langevin equations.
//!
//! Every trajectory pair `(2k, 2k+1)` shares one random stream, the second
//! member being the mirror image `(x, p) -> (-x, -p)` of the first. Both
//! equations are odd under that map, so each member is an exact sample path
//! and the ensemble is parity-symmetric by construction.
//!
//! The overdamped equation `dx = h dt + g o dW` (Stratonovich, `<dW^2> = 2 dt`)
//! is integrated in the variable `y = int dx/g`, where the noise is additive
//! and the drift `h/g = -omega_z x / sqrt(A + D_p + 72 Gamma_f x^4)` is bounded.
//! Near `x = 0` the amplitude `g` is of order `omega_z sqrt(A + D_p) / gamma_g`,
//! which no practical step resolves in `x` itself.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analytic;
use crate::dist::{DistAxis, Distribution1D};
use crate::error::{Error, Result};
use crate::fp1d::{overdamped_g_prime, overdamped_g};
use crate::model::{derive_coefficients, SystemParams};
use crate::moments::MomentState;
use crate::quad::gauss_legendre;
use crate::scalar::{compensated_sum, lit, Real};

/// Largest `omega_z dt` accepted for the full equations.
pub const MAX_PHASE_STEP: f64 = 0.05;
/// Largest fraction of diverged trajectories tolerated.
pub const MAX_DIVERGED_FRACTION: f64 = 1e-3;
pub const MAX_SAMPLES: usize = 10_000_000;
const DIVERGENCE_SCALE: f64 = 1e6;
const BATCHES: usize = 20;
const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdeMode {
    Full2D,
    Overdamped1D,
}

/// Interpretation of the multiplicative noise of the overdamped equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Calculus {
    #[default]
    Stratonovich,
    /// Deliberately inconsistent with the position Fokker-Planck equation;
    /// kept to show that the choice matters.
    Ito,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState<T> {
    Point { x: T, p: T },
    Gaussian { var_x: T, var_p: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeConfig<T> {
    pub mode: SdeMode,
    pub calculus: Calculus,
    pub n_traj: usize,
    pub dt: T,
    pub t_end: T,
    pub burn_in: T,
    pub seed: u64,
    /// Steps between recorded samples.
    pub stride: usize,
    pub init: InitialState<T>,
}

impl<T: Real> SdeConfig<T> {
    /// Defaults: burn-in of ten relaxation or trap periods, whichever is
    /// longer, a Gaussian start at the closure steady variance, and a stride
    /// keeping at most `MAX_SAMPLES` samples.
    pub fn defaults(params: &SystemParams<T>, mode: SdeMode, n_traj: usize, dt: T, t_end: T, seed: u64) -> Result<Self> {
        let x2 = analytic::x2_scale(params)?;
        let rate = lit::<T>(2.0) * params.gamma_g + lit::<T>(24.0) * params.gamma_f * x2;
        let burn_in = lit::<T>(10.0) * (T::one() / rate).max(params.trap_period());
        let steps = ((t_end - burn_in) / dt).ceil().to_usize().unwrap_or(0).max(1);
        let per_traj = (MAX_SAMPLES / n_traj.max(1)).max(1);
        let stride = steps.div_ceil(per_traj).max(1);
        Ok(SdeConfig {
            mode,
            calculus: Calculus::Stratonovich,
            n_traj,
            dt,
            t_end,
            burn_in: burn_in.min(t_end * lit(0.5)),
            seed,
            stride,
            init: InitialState::Gaussian { var_x: x2, var_p: x2 },
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 1 {
            return Err(Error::param("n_traj", "must be >= 1"));
        }
        if !(self.dt > T::zero()) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if !(self.burn_in >= T::zero() && self.burn_in < self.t_end) {
            return Err(Error::param("burn_in", "must satisfy 0 <= burn_in < t_end"));
        }
        if self.stride < 1 {
            return Err(Error::param("stride", "must be >= 1"));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }

    fn first_record(&self) -> usize {
        (self.burn_in / self.dt).ceil().to_usize().unwrap_or(0)
    }

    fn record_steps(&self) -> Vec<usize> {
        (self.first_record()..=self.n_steps()).step_by(self.stride).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble<T> {
    pub mode: SdeMode,
    pub times: Vec<T>,
    /// `x` samples, one row of `times.len()` per kept trajectory.
    pub x: Vec<T>,
    /// `p` samples with the same layout; empty for the overdamped mode.
    pub p: Vec<T>,
    /// Stream seed of each kept trajectory.
    pub seeds: Vec<u64>,
    /// Indices of trajectories dropped after diverging.
    pub diverged: Vec<usize>,
    pub n_traj: usize,
}

impl<T: Real> TrajectoryEnsemble<T> {
    pub fn kept(&self) -> usize {
        self.seeds.len()
    }

    pub fn samples(&self) -> usize {
        self.x.len()
    }

    pub fn has_momentum(&self) -> bool {
        !self.p.is_empty()
    }
}

fn stream_rng(seed: u64, pair: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair as u64);
    rng
}

fn normal<T: Real>(rng: &mut ChaCha8Rng) -> T {
    let z: f64 = rng.sample(StandardNormal);
    lit(z)
}

fn initial<T: Real>(init: &InitialState<T>, rng: &mut ChaCha8Rng) -> (T, T) {
    match *init {
        InitialState::Point { x, p } => (x, p),
        InitialState::Gaussian { var_x, var_p } => {
            let a: T = normal(rng);
            let b: T = normal(rng);
            (a * var_x.sqrt(), b * var_p.sqrt())
        }
    }
}

struct PairResult<T> {
    x: [Vec<T>; 2],
    p: [Vec<T>; 2],
    ok: bool,
}

fn finalize<T: Real>(
    config: &SdeConfig<T>,
    mode: SdeMode,
    results: Vec<PairResult<T>>,
    with_p: bool,
) -> Result<TrajectoryEnsemble<T>> {
    let times: Vec<T> = config
        .record_steps()
        .iter()
        .map(|&k| config.dt * T::from_usize_lossy(k))
        .collect();
    let mut ens = TrajectoryEnsemble {
        mode,
        times,
        x: Vec::new(),
        p: Vec::new(),
        seeds: Vec::new(),
        diverged: Vec::new(),
        n_traj: config.n_traj,
    };
    for (pair, r) in results.into_iter().enumerate() {
        for m in 0..2 {
            let idx = 2 * pair + m;
            if idx >= config.n_traj {
                break;
            }
            if r.ok {
                ens.x.extend_from_slice(&r.x[m]);
                if with_p {
                    ens.p.extend_from_slice(&r.p[m]);
                }
                ens.seeds.push(config.seed.wrapping_add(pair as u64));
            } else {
                ens.diverged.push(idx);
            }
        }
    }
    let frac = ens.diverged.len() as f64 / config.n_traj as f64;
    if frac > MAX_DIVERGED_FRACTION || ens.kept() == 0 {
        return Err(Error::Numerical(format!(
            "{} of {} trajectories diverged",
            ens.diverged.len(),
            config.n_traj
        )));
    }
    Ok(ens)
}

/// Full equations: `dx = omega_z p dt + F_x`, `dp = -(omega_z x + c(x) p) dt + F_p`
/// with `c(x) = 2 gamma_g + 24 gamma_f x^2`. The damping is taken at the end
/// of the step, which keeps the stiff feedback drift stable at large `x`.
pub fn simulate_full<T: Real>(params: &SystemParams<T>, config: &SdeConfig<T>) -> Result<TrajectoryEnsemble<T>> {
    params.validate()?;
    config.validate()?;
    if config.dt * params.omega_z > lit(MAX_PHASE_STEP) {
        return Err(Error::param(
            "dt",
            format!("omega_z dt = {} exceeds {}", config.dt * params.omega_z, MAX_PHASE_STEP),
        ));
    }
    let c = derive_coefficients(params)?;
    let ad = c.momentum_diffusion();
    let dt = config.dt;
    let sx = (lit::<T>(2.0) * c.d_q * dt).sqrt();
    let w = params.omega_z;
    let limit = lit::<T>(DIVERGENCE_SCALE) * (amplitude_scale(params, &config.init) + T::one());
    let steps = config.n_steps();
    let records = config.record_steps();
    let n_pairs = config.n_traj.div_ceil(2);
    let run = |pair: usize| -> PairResult<T> {
        let mut rng = stream_rng(config.seed, pair);
        let (x0, p0) = initial(&config.init, &mut rng);
        let mut st = [(x0, p0), (-x0, -p0)];
        let mut out = PairResult {
            x: [Vec::with_capacity(records.len()), Vec::with_capacity(records.len())],
            p: [Vec::with_capacity(records.len()), Vec::with_capacity(records.len())],
            ok: true,
        };
        let mut next = 0;
        for k in 0..=steps {
            if next < records.len() && records[next] == k {
                for m in 0..2 {
                    out.x[m].push(st[m].0);
                    out.p[m].push(st[m].1);
                }
                next += 1;
            }
            if k == steps {
                break;
            }
            let ex: T = normal(&mut rng);
            let ep: T = normal(&mut rng);
            for (m, (x, p)) in st.iter_mut().enumerate() {
                let sign = if m == 0 { T::one() } else { -T::one() };
                let x4 = *x * *x * *x * *x;
                let sp = ((lit::<T>(2.0) * ad + lit::<T>(144.0) * params.big_gamma_f * x4) * dt).sqrt();
                let xn = *x + w * *p * dt + sx * ex * sign;
                let damp = lit::<T>(2.0) * params.gamma_g + lit::<T>(24.0) * params.gamma_f * xn * xn;
                let pn = (*p - w * xn * dt + sp * ep * sign) / (T::one() + damp * dt);
                *x = xn;
                *p = pn;
            }
            if !(st[0].0.abs() < limit && st[0].1.abs() < limit) {
                out.ok = false;
                break;
            }
        }
        out
    };
    let results: Vec<PairResult<T>> = (0..n_pairs).into_par_iter().map(run).collect();
    finalize(config, SdeMode::Full2D, results, true)
}

/// Steady rms amplitude, or the initial one when no steady state exists.
fn amplitude_scale<T: Real>(params: &SystemParams<T>, init: &InitialState<T>) -> T {
    let start = match *init {
        InitialState::Point { x, p } => (x * x + p * p).sqrt(),
        InitialState::Gaussian { var_x, var_p } => (var_x + var_p).sqrt(),
    };
    analytic::x2_scale(params).map_or(start, |x2| x2.sqrt().max(start))
}

/// Monotone map `y(x) = int_0^x dx'/g(x')` tabulated on `[0, x_table]` with
/// cubic Hermite segments, extended by quadrature beyond.
#[derive(Debug, Clone)]
pub struct LampertiMap<T> {
    params: SystemParams<T>,
    h: T,
    ys: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> LampertiMap<T> {
    pub fn new(params: &SystemParams<T>, x_table: T, segments: usize) -> Result<Self> {
        if !(params.gamma_g > T::zero()) {
            return Err(Error::domain("LampertiMap", "needs gamma_g > 0"));
        }
        let h = x_table / T::from_usize_lossy(segments);
        let (nodes, weights) = gauss_legendre::<T>(8);
        let mut ys = Vec::with_capacity(segments + 1);
        let mut slopes = Vec::with_capacity(segments + 1);
        let mut acc = T::zero();
        let half = lit::<T>(0.5);
        for k in 0..=segments {
            let x = h * T::from_usize_lossy(k);
            if k > 0 {
                let mid = x - half * h;
                let mut s = T::zero();
                for (&t, &wt) in nodes.iter().zip(&weights) {
                    s += wt / overdamped_g(params, mid + half * h * t);
                }
                acc += s * half * h;
            }
            ys.push(acc);
            slopes.push(T::one() / overdamped_g(params, x));
        }
        Ok(LampertiMap {
            params: *params,
            h,
            ys,
            slopes,
        })
    }

    fn x_table(&self) -> T {
        self.h * T::from_usize_lossy(self.ys.len() - 1)
    }

    fn y_tail(&self, x: T) -> T {
        // Quadrature from the table end, x > x_table.
        let x0 = self.x_table();
        let panels = ((x - x0) / self.h).ceil().to_usize().unwrap_or(1).clamp(1, 1_000_000);
        let p = self.params;
        *self.ys.last().expect("non-empty table") + crate::quad::integrate(|s| T::one() / overdamped_g(&p, s), x0, x, panels, 8)
    }

    fn hermite(&self, k: usize, t: T) -> T {
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        (two * t3 - three * t2 + T::one()) * y0
            + (t3 - two * t2 + t) * m0
            + (-two * t3 + three * t2) * y1
            + (t3 - t2) * m1
    }

    fn hermite_dt(&self, k: usize, t: T) -> T {
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let t2 = t * t;
        let six = lit::<T>(6.0);
        let (three, four, two) = (lit::<T>(3.0), lit::<T>(4.0), lit::<T>(2.0));
        (six * t2 - six * t) * y0 + (three * t2 - four * t + T::one()) * m0 + (six * t - six * t2) * y1 + (three * t2 - two * t) * m1
    }

    pub fn y_of_x(&self, x: T) -> T {
        let ax = x.abs();
        let y = if ax >= self.x_table() {
            self.y_tail(ax)
        } else {
            let u = ax / self.h;
            let k = u.floor().to_usize().unwrap_or(0).min(self.ys.len() - 2);
            self.hermite(k, u - T::from_usize_lossy(k))
        };
        if x < T::zero() {
            -y
        } else {
            y
        }
    }

    pub fn x_of_y(&self, y: T) -> T {
        let ay = y.abs();
        let last = *self.ys.last().expect("non-empty table");
        let x = if ay >= last {
            // Bracket and bisect with Newton steps on the tail.
            let mut lo = self.x_table();
            let mut hi = lo + lo;
            while self.y_tail(hi) < ay {
                lo = hi;
                hi = hi + hi;
            }
            let mut x = lit::<T>(0.5) * (lo + hi);
            for _ in 0..200 {
                let f = self.y_tail(x) - ay;
                if f.abs() <= ay * T::epsilon() {
                    break;
                }
                if f > T::zero() {
                    hi = x;
                } else {
                    lo = x;
                }
                let newton = x - f * overdamped_g(&self.params, x);
                x = if newton > lo && newton < hi { newton } else { lit::<T>(0.5) * (lo + hi) };
                if (hi - lo) < x * T::epsilon() * lit(8.0) {
                    break;
                }
            }
            x
        } else {
            let k = match self.ys.binary_search_by(|v| v.partial_cmp(&ay).expect("finite table")) {
                Ok(k) => k.min(self.ys.len() - 2),
                Err(k) => k.saturating_sub(1).min(self.ys.len() - 2),
            };
            let (y0, y1) = (self.ys[k], self.ys[k + 1]);
            let (mut lo, mut hi) = (T::zero(), T::one());
            let mut t = if y1 > y0 { (ay - y0) / (y1 - y0) } else { lit(0.5) };
            for _ in 0..60 {
                let f = self.hermite(k, t) - ay;
                if f == T::zero() {
                    break;
                }
                if f > T::zero() {
                    hi = t;
                } else {
                    lo = t;
                }
                let d = self.hermite_dt(k, t);
                let newton = if d > T::zero() { t - f / d } else { lit(-1.0) };
                let next = if newton > lo && newton < hi { newton } else { lit::<T>(0.5) * (lo + hi) };
                if (next - t).abs() <= T::epsilon() * lit(4.0) {
                    t = next;
                    break;
                }
                t = next;
            }
            self.h * (T::from_usize_lossy(k) + t)
        };
        if y < T::zero() {
            -x
        } else {
            x
        }
    }
}

/// Overdamped equation `dx = h dt + g dW`, Stratonovich by default (Heun in
/// the additive-noise variable), or Ito (Euler-Maruyama with the drift
/// `h/g - g'` in the same variable, tamed to bound the kick near `x = 0`).
/// Effective damping of the steady state that the overdamped reduction assumes
/// is large. Elimination of `p` is unreliable below 1.
pub fn adiabatic_gamma_eff<T: Real>(params: &SystemParams<T>) -> Result<T> {
    let x2 = analytic::x2_scale(params)?;
    Ok(crate::model::classify_regime(params, x2).gamma_eff)
}

pub fn simulate_overdamped<T: Real>(params: &SystemParams<T>, config: &SdeConfig<T>) -> Result<TrajectoryEnsemble<T>> {
    params.validate()?;
    config.validate()?;
    let x2 = analytic::x2_scale(params)?;
    let map = LampertiMap::new(params, lit::<T>(30.0) * x2.sqrt(), 20_000)?;
    let ad = params.momentum_diffusion();
    let w = params.omega_z;
    let bf72 = lit::<T>(72.0) * params.big_gamma_f;
    let strat = |x: T| -w * x / (ad + bf72 * x * x * x * x).sqrt();
    let ito = |x: T| strat(x) - overdamped_g_prime(params, x);
    let dt = config.dt;
    let sn = (lit::<T>(2.0) * dt).sqrt();
    let limit = lit::<T>(DIVERGENCE_SCALE) * (x2.sqrt() + T::one());
    let steps = config.n_steps();
    let records = config.record_steps();
    let n_pairs = config.n_traj.div_ceil(2);
    let calculus = config.calculus;
    let run = |pair: usize| -> PairResult<T> {
        let mut rng = stream_rng(config.seed, pair);
        let (x0, _) = initial(&config.init, &mut rng);
        let mut y = map.y_of_x(x0);
        let mut x = x0;
        let mut out = PairResult {
            x: [Vec::with_capacity(records.len()), Vec::with_capacity(records.len())],
            p: [Vec::new(), Vec::new()],
            ok: true,
        };
        let mut next = 0;
        for k in 0..=steps {
            if next < records.len() && records[next] == k {
                out.x[0].push(x);
                out.x[1].push(-x);
                next += 1;
            }
            if k == steps {
                break;
            }
            let dw = sn * normal::<T>(&mut rng);
            match calculus {
                Calculus::Stratonovich => {
                    let a0 = strat(x);
                    let yp = y + a0 * dt + dw;
                    let a1 = strat(map.x_of_y(yp));
                    y = y + lit::<T>(0.5) * (a0 + a1) * dt + dw;
                }
                Calculus::Ito => {
                    let a = ito(x);
                    y = y + a * dt / (T::one() + a.abs() * dt) + dw;
                }
            }
            x = map.x_of_y(y);
            if !(x.abs() < limit) {
                out.ok = false;
                break;
            }
        }
        out
    };
    let results: Vec<PairResult<T>> = (0..n_pairs).into_par_iter().map(run).collect();
    finalize(config, SdeMode::Overdamped1D, results, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    P,
}

/// Normalized histogram on `bins` equal bins over `range` (default: the
/// sample range). Per-bin uncertainty is the 95% Wilson half-width
/// converted to density units, assuming independent samples.
pub fn histogram<T: Real>(
    ens: &TrajectoryEnsemble<T>,
    axis: Axis,
    bins: usize,
    range: Option<(T, T)>,
) -> Result<Distribution1D<T>> {
    let data: &[T] = match axis {
        Axis::X => &ens.x,
        Axis::P => &ens.p,
    };
    if data.is_empty() {
        return Err(Error::domain("histogram", "no samples on this axis"));
    }
    if bins < 2 {
        return Err(Error::param("bins", "need at least 2 bins"));
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let lo = data.iter().copied().fold(T::infinity(), T::min);
            let hi = data.iter().copied().fold(T::neg_infinity(), T::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - lit(0.5), lo + lit(0.5))
            }
        }
    };
    let width = (hi - lo) / T::from_usize_lossy(bins);
    let mut counts = vec![0usize; bins];
    for &v in data {
        if v >= lo && v <= hi {
            let b = ((v - lo) / width).floor().to_usize().unwrap_or(0).min(bins - 1);
            counts[b] += 1;
        }
    }
    let n = T::from_usize_lossy(data.len());
    let z = lit::<T>(WILSON_Z);
    let z2 = z * z;
    let centres: Vec<T> = (0..bins)
        .map(|b| lo + (T::from_usize_lossy(b) + lit(0.5)) * width)
        .collect();
    let dens: Vec<T> = counts.iter().map(|&c| T::from_usize_lossy(c) / (n * width)).collect();
    let unc: Vec<T> = counts
        .iter()
        .map(|&c| {
            let ph = T::from_usize_lossy(c) / n;
            let half = z * (ph * (T::one() - ph) / n + z2 / (lit::<T>(4.0) * n * n)).sqrt() / (T::one() + z2 / n);
            half / width
        })
        .collect();
    let dist_axis = match axis {
        Axis::X => DistAxis::X,
        Axis::P => DistAxis::P,
    };
    let mut d = if dens.iter().filter(|&&v| v > T::zero()).count() == 1 && bins >= 2 {
        // A single occupied bin has zero trapezoid mass at an edge; keep the
        // histogram normalization instead.
        Distribution1D {
            axis: dist_axis,
            points: centres,
            density: dens,
            raw_integral: T::one(),
            uncertainty: None,
        }
    } else {
        Distribution1D::from_values(dist_axis, centres, dens)?
    };
    let scale = T::one() / d.raw_integral;
    d.uncertainty = Some(unc.into_iter().map(|u| u * scale).collect());
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMoments<T> {
    pub state: MomentState<T>,
    /// Batch-mean standard errors of each moment.
    pub se: MomentState<T>,
    pub n: T,
    pub n_se: T,
    pub samples: usize,
    pub batches: usize,
}

/// Sample moments with batch-mean standard errors. Batches are groups of
/// trajectories when there are enough of them, otherwise blocks of time.
pub fn ensemble_moments<T: Real>(ens: &TrajectoryEnsemble<T>) -> Result<EnsembleMoments<T>> {
    let per = ens.times.len();
    let kept = ens.kept();
    if per == 0 || kept == 0 {
        return Err(Error::domain("ensemble_moments", "empty ensemble"));
    }
    let with_p = ens.has_momentum();
    let sample = |t: usize, r: usize| -> [T; 8] {
        let x = ens.x[t * per + r];
        let p = if with_p { ens.p[t * per + r] } else { T::zero() };
        let x2 = x * x;
        [x2, p * p, x * p, x2 * x * p, x2 * x2, x2 * x2 * x * p, x2 * x2 * x2, lit::<T>(0.5) * (x2 + p * p)]
    };
    // Batch membership: trajectory pairs stay together.
    let (batches, batch_of): (usize, Box<dyn Fn(usize, usize) -> usize>) = if kept >= 2 * BATCHES {
        let pairs = kept.div_ceil(2);
        (BATCHES, Box::new(move |t: usize, _r: usize| ((t / 2) * BATCHES) / pairs))
    } else if per >= BATCHES {
        (BATCHES, Box::new(move |_t: usize, r: usize| (r * BATCHES) / per))
    } else {
        (1, Box::new(|_, _| 0))
    };
    let mut sums: Vec<Vec<Vec<T>>> = vec![vec![Vec::new(); 8]; batches];
    for t in 0..kept {
        for r in 0..per {
            let b = batch_of(t, r);
            for (k, v) in sample(t, r).into_iter().enumerate() {
                sums[b][k].push(v);
            }
        }
    }
    let means: Vec<[T; 8]> = sums
        .iter()
        .map(|b| {
            let mut m = [T::zero(); 8];
            for k in 0..8 {
                m[k] = compensated_sum(b[k].iter().copied()) / T::from_usize_lossy(b[k].len().max(1));
            }
            m
        })
        .collect();
    let counts: Vec<T> = sums.iter().map(|b| T::from_usize_lossy(b[0].len())).collect();
    let total = compensated_sum(counts.iter().copied());
    let mut mean = [T::zero(); 8];
    let mut se = [T::zero(); 8];
    for k in 0..8 {
        mean[k] = compensated_sum(means.iter().zip(&counts).map(|(m, &c)| m[k] * c)) / total;
        if batches > 1 {
            let b = T::from_usize_lossy(batches);
            let var = compensated_sum(means.iter().map(|m| (m[k] - mean[k]).powi(2))) / (b - T::one());
            se[k] = (var / b).sqrt();
        }
    }
    let pack = |a: &[T; 8]| MomentState {
        x2: a[0],
        p2: a[1],
        xp: a[2],
        x3p: a[3],
        x4: a[4],
        x5p: a[5],
        x6: a[6],
    };
    Ok(EnsembleMoments {
        state: pack(&mean),
        se: pack(&se),
        n: mean[7] - lit(0.5),
        n_se: se[7],
        samples: kept * per,
        batches,
    })
}

/// Summary CSV: one row per moment with its standard error.
pub fn write_summary_csv<T: Real, W: Write>(m: &EnsembleMoments<T>, ens: &TrajectoryEnsemble<T>, mut out: W, header: &str) -> Result<()> {
    for line in header.lines() {
        writeln!(out, "# {}", line)?;
    }
    writeln!(out, "# kept {} of {} trajectories, {} samples, {} batches", ens.kept(), ens.n_traj, m.samples, m.batches)?;
    writeln!(out, "quantity,value,std_error")?;
    let rows = [
        ("x2", m.state.x2, m.se.x2),
        ("p2", m.state.p2, m.se.p2),
        ("xp", m.state.xp, m.se.xp),
        ("x4", m.state.x4, m.se.x4),
        ("x6", m.state.x6, m.se.x6),
        ("n", m.n, m.n_se),
    ];
    for (name, v, e) in rows {
        if name != "x2" && name != "x4" && name != "x6" && !ens.has_momentum() {
            continue;
        }
        writeln!(out, "{},{:e},{:e}", name, v, e)?;
    }
    Ok(())
}
