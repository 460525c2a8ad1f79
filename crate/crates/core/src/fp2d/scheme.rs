//! Time stepping.
//!
//! Each step is split into three conservative sub-steps:
//!
//! * `x` sweep: rotation `omega_z p` plus position diffusion, explicit,
//!   Fromm slopes clamped for positivity,
//! * `p` advection: rotation `-omega_z x`, same explicit scheme,
//! * `p` dissipation: damping drift `-(2 gamma_g + 24 gamma_f x^2) p` and
//!   diffusion `A + D_p + 72 Gamma_f x^4`, backward Euler with
//!   Scharfetter-Gummel fluxes.
//!
//! The order is reversed on every other step. All boundary faces carry zero
//! flux, so the discrete mass is conserved to rounding.

use rayon::prelude::*;

use super::{FieldMoments, PhaseGrid, WignerField};
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::scalar::{compensated_sum, lit, Real};

pub const DEFAULT_SAFETY: f64 = 0.8;
pub const DEFAULT_STEADY_TOL: f64 = 1e-6;
pub const STEADY_WINDOW_PERIODS: f64 = 10.0;
const CHECK_EVERY: u64 = 64;
const PAR_MIN_CELLS: usize = 1 << 14;

/// Largest stable step of the explicit sub-steps.
pub fn stability_limit<T: Real>(params: &SystemParams<T>, grid: &PhaseGrid<T>) -> T {
    let dq = params.gamma_g / (lit::<T>(6.0) * params.n0);
    let w = params.omega_z;
    let x_rate = w * grid.p_max / grid.dx + lit::<T>(2.0) * dq / (grid.dx * grid.dx);
    let p_rate = w * grid.x_max / grid.dp;
    T::one() / x_rate.max(p_rate)
}

/// `max` of the field on the outermost ring of cells relative to `max W`.
pub fn boundary_ratio<T: Real>(field: &WignerField<T>) -> T {
    let g = &field.grid;
    let mut m = T::zero();
    for i in 0..g.nx {
        m = m.max(field.at(i, 0)).max(field.at(i, g.np - 1));
    }
    for j in 0..g.np {
        m = m.max(field.at(0, j)).max(field.at(g.nx - 1, j));
    }
    m / field.max_value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample<T> {
    pub t: T,
    pub moments: FieldMoments<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateReport<T> {
    pub converged: bool,
    /// Completed check windows.
    pub iterations: usize,
    /// Relative L1 change over the last window per unit time.
    pub residual: T,
    pub final_time: T,
    pub window: T,
    pub tolerance: T,
}

/// `z / (e^z - 1)`.
fn bernoulli<T: Real>(z: T) -> T {
    if z == T::zero() {
        T::one()
    } else {
        z / z.exp_m1()
    }
}

/// Face value reconstructed from the upwind cell `w` with Fromm slope
/// `s` (signed toward the face) at Courant number `c = |v|`.
///
/// The slope is clamped only as far as needed to keep the update
/// nonnegative: `0 <= face <= w / c`. A TVD limiter clips every smooth
/// extremum, and over the hundreds of trap periods of a weakly damped run
/// that clipping diffuses more than the physical noise does.
#[inline]
fn face<T: Real>(w: T, s: T, c: T) -> T {
    let half = lit::<T>(0.5);
    let mut off = half * (T::one() - c) * s;
    if off < -w {
        off = -w;
    }
    if c > T::zero() {
        let cap = w * (T::one() - c) / c;
        if off > cap {
            off = cap;
        }
    }
    w + off
}

/// Thomas factorization of one backward-Euler dissipation matrix per row.
#[derive(Debug, Clone)]
struct Factor<T> {
    dt: T,
    lower: Vec<T>,
    cprime: Vec<T>,
    inv_den: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Evolver<T> {
    pub params: SystemParams<T>,
    pub dt: T,
    grid: PhaseGrid<T>,
    dq: T,
    damping: Vec<T>,
    diffusion: Vec<T>,
    main: Factor<T>,
    aux: Option<Factor<T>>,
    scratch: Vec<T>,
}

impl<T: Real> Evolver<T> {
    /// `dt = None` picks `DEFAULT_SAFETY` times the stability limit.
    pub fn new(params: &SystemParams<T>, grid: &PhaseGrid<T>, dt: Option<T>) -> Result<Self> {
        params.validate()?;
        let limit = stability_limit(params, grid);
        let dt = dt.unwrap_or(limit * lit(DEFAULT_SAFETY));
        if !(dt > T::zero()) || dt > limit {
            return Err(Error::Stability {
                dt: dt.as_f64(),
                limit: limit.as_f64(),
            });
        }
        let ad = params.momentum_diffusion();
        let damping = grid
            .xs
            .iter()
            .map(|&x| lit::<T>(2.0) * params.gamma_g + lit::<T>(24.0) * params.gamma_f * x * x)
            .collect();
        let diffusion = grid
            .xs
            .iter()
            .map(|&x| ad + lit::<T>(72.0) * params.big_gamma_f * x * x * x * x)
            .collect();
        let mut ev = Evolver {
            params: *params,
            dt,
            grid: grid.clone(),
            dq: params.gamma_g / (lit::<T>(6.0) * params.n0),
            damping,
            diffusion,
            main: Factor {
                dt,
                lower: Vec::new(),
                cprime: Vec::new(),
                inv_den: Vec::new(),
            },
            aux: None,
            scratch: vec![T::zero(); grid.len()],
        };
        ev.main = ev.factor(dt);
        Ok(ev)
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }

    fn factor(&self, dt: T) -> Factor<T> {
        let g = &self.grid;
        let n = g.np;
        let r = dt / g.dp;
        let half = lit::<T>(0.5);
        let mut f = Factor {
            dt,
            lower: vec![T::zero(); g.len()],
            cprime: vec![T::zero(); g.len()],
            inv_den: vec![T::zero(); g.len()],
        };
        let mut a = vec![T::zero(); n - 1];
        let mut b = vec![T::zero(); n - 1];
        for i in 0..g.nx {
            let (c, d) = (self.damping[i], self.diffusion[i]);
            for k in 0..n - 1 {
                let u = -c * half * (g.ps[k] + g.ps[k + 1]);
                if d > T::zero() {
                    let z = u * g.dp / d;
                    a[k] = d / g.dp * bernoulli(-z);
                    b[k] = d / g.dp * bernoulli(z);
                } else {
                    a[k] = u.max(T::zero());
                    b[k] = (-u).max(T::zero());
                }
            }
            let base = i * n;
            let mut prev_c = T::zero();
            for k in 0..n {
                let lower = if k > 0 { -r * a[k - 1] } else { T::zero() };
                let upper = if k + 1 < n { -r * b[k] } else { T::zero() };
                let mut diag = T::one();
                if k + 1 < n {
                    diag += r * a[k];
                }
                if k > 0 {
                    diag += r * b[k - 1];
                }
                let den = diag - lower * prev_c;
                let inv = T::one() / den;
                prev_c = upper * inv;
                f.lower[base + k] = lower;
                f.cprime[base + k] = prev_c;
                f.inv_den[base + k] = inv;
            }
        }
        f
    }

    /// One step of the default size.
    pub fn step(&mut self, field: &mut WignerField<T>) -> Result<()> {
        self.check_grid(field)?;
        let dt = self.dt;
        self.step_inner(field, dt, false);
        self.after_step(field)
    }

    fn check_grid(&self, field: &WignerField<T>) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::domain("Evolver", "field grid differs from the evolver grid"));
        }
        Ok(())
    }

    fn after_step(&self, field: &WignerField<T>) -> Result<()> {
        if field.steps % CHECK_EVERY == 0 {
            self.check_finite(field)?;
        }
        Ok(())
    }

    fn check_finite(&self, field: &WignerField<T>) -> Result<()> {
        let m = field.mass();
        if !m.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite field at t = {} after {} steps (dt = {})",
                field.time, field.steps, self.dt
            )));
        }
        Ok(())
    }

    fn step_inner(&mut self, field: &mut WignerField<T>, dt: T, use_aux: bool) {
        let order_forward = field.steps % 2 == 0;
        if order_forward {
            self.sweep_x(&mut field.values, dt);
            self.advect_p(&mut field.values, dt);
            self.dissipate_p(&mut field.values, use_aux);
        } else {
            self.dissipate_p(&mut field.values, use_aux);
            self.advect_p(&mut field.values, dt);
            self.sweep_x(&mut field.values, dt);
        }
        field.time += dt;
        field.steps += 1;
    }

    fn sweep_x(&mut self, values: &mut [T], dt: T) {
        let g = &self.grid;
        let (nx, np) = (g.nx, g.np);
        let half = lit::<T>(0.5);
        let nu: Vec<T> = g.ps.iter().map(|&p| self.params.omega_z * p * dt / g.dx).collect();
        let rd = self.dq * dt / (g.dx * g.dx);
        let src: &[T] = values;
        let dst = &mut self.scratch;
        let mut prev = vec![T::zero(); np];
        let mut cur = vec![T::zero(); np];
        let row = |i: usize| &src[i * np..(i + 1) * np];
        for i in 0..nx {
            if i + 1 < nx {
                let w0 = row(i);
                let w1 = row(i + 1);
                let wm = if i > 0 { Some(row(i - 1)) } else { None };
                let w2 = if i + 2 < nx { Some(row(i + 2)) } else { None };
                for j in 0..np {
                    let v = nu[j];
                    let adv = if v >= T::zero() {
                        let s = wm.map_or(T::zero(), |wm| half * (w1[j] - wm[j]));
                        face(w0[j], s, v)
                    } else {
                        let s = w2.map_or(T::zero(), |w2| half * (w2[j] - w0[j]));
                        face(w1[j], -s, -v)
                    };
                    cur[j] = v * adv - rd * (w1[j] - w0[j]);
                }
            } else {
                cur.iter_mut().for_each(|c| *c = T::zero());
            }
            let out = &mut dst[i * np..(i + 1) * np];
            let w0 = row(i);
            for j in 0..np {
                out[j] = w0[j] - (cur[j] - prev[j]);
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        values.copy_from_slice(&self.scratch);
    }

    fn advect_p(&mut self, values: &mut [T], dt: T) {
        let g = &self.grid;
        let np = g.np;
        let w = self.params.omega_z;
        let dp = g.dp;
        let xs = &g.xs;
        let work = |(i, (row, tmp)): (usize, (&mut [T], &mut [T]))| {
            let v = -w * xs[i] * dt / dp;
            advect_line(row, tmp, v);
        };
        if g.len() >= PAR_MIN_CELLS {
            values
                .par_chunks_mut(np)
                .zip(self.scratch.par_chunks_mut(np))
                .enumerate()
                .for_each(work);
        } else {
            values
                .chunks_mut(np)
                .zip(self.scratch.chunks_mut(np))
                .enumerate()
                .for_each(work);
        }
    }

    fn dissipate_p(&mut self, values: &mut [T], use_aux: bool) {
        let np = self.grid.np;
        let f = if use_aux {
            self.aux.as_ref().expect("aux factor prepared")
        } else {
            &self.main
        };
        let work = |((row, lower), (cp, inv)): ((&mut [T], &[T]), (&[T], &[T]))| {
            row[0] = row[0] * inv[0];
            for k in 1..row.len() {
                row[k] = (row[k] - lower[k] * row[k - 1]) * inv[k];
            }
            for k in (0..row.len() - 1).rev() {
                row[k] = row[k] - cp[k] * row[k + 1];
            }
        };
        if self.grid.len() >= PAR_MIN_CELLS {
            values
                .par_chunks_mut(np)
                .zip(f.lower.par_chunks(np))
                .zip(f.cprime.par_chunks(np).zip(f.inv_den.par_chunks(np)))
                .for_each(work);
        } else {
            values
                .chunks_mut(np)
                .zip(f.lower.chunks(np))
                .zip(f.cprime.chunks(np).zip(f.inv_den.chunks(np)))
                .for_each(work);
        }
    }

    fn partial_step(&mut self, field: &mut WignerField<T>, dt: T) {
        let reuse = matches!(&self.aux, Some(a) if a.dt == dt);
        if !reuse {
            self.aux = Some(self.factor(dt));
        }
        self.step_inner(field, dt, true);
    }

    /// Advance to `t_end`, recording moments at every sample time in
    /// `(field.time, t_end]` (and at `field.time` itself if listed).
    pub fn evolve(
        &mut self,
        field: &mut WignerField<T>,
        t_end: T,
        sample_times: &[T],
    ) -> Result<Vec<FieldSample<T>>> {
        self.check_grid(field)?;
        if t_end < field.time {
            return Err(Error::domain("evolve", "t_end precedes the field time"));
        }
        let mut times: Vec<T> = sample_times
            .iter()
            .copied()
            .filter(|&t| t >= field.time && t <= t_end)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite sample times"));
        times.dedup();
        let mut out = Vec::with_capacity(times.len());
        let mut next = 0;
        let tiny = self.dt * lit(1e-9);
        while next < times.len() && times[next] <= field.time + tiny {
            out.push(FieldSample {
                t: field.time,
                moments: field.moments(),
            });
            next += 1;
        }
        while field.time < t_end - tiny {
            let target = if next < times.len() { times[next].min(t_end) } else { t_end };
            let remaining = target - field.time;
            if remaining >= self.dt - tiny {
                let dt = self.dt;
                self.step_inner(field, dt, false);
                if (target - field.time).abs() <= tiny {
                    field.time = target;
                }
            } else {
                self.partial_step(field, remaining);
                field.time = target;
            }
            self.after_step(field)?;
            while next < times.len() && times[next] <= field.time + tiny {
                out.push(FieldSample {
                    t: field.time,
                    moments: field.moments(),
                });
                next += 1;
            }
        }
        self.check_finite(field)?;
        Ok(out)
    }

    /// Step until the L1 change over a window of about `window` time units,
    /// divided by the window, drops below `tol`, or `max_windows` elapse.
    pub fn evolve_to_steady(
        &mut self,
        field: &mut WignerField<T>,
        tol: T,
        window: T,
        max_windows: usize,
    ) -> Result<SteadyStateReport<T>> {
        self.check_grid(field)?;
        if !(tol > T::zero()) || !(window > T::zero()) {
            return Err(Error::domain("evolve_to_steady", "tolerance and window must be > 0"));
        }
        // An even step count keeps the alternating operator order in phase.
        let half_steps = (window / (self.dt + self.dt)).ceil().to_usize().unwrap_or(1).max(1);
        let steps = 2 * half_steps;
        let eff_window = self.dt * T::from_usize_lossy(steps);
        let area = self.grid.cell_area();
        let mut report = SteadyStateReport {
            converged: false,
            iterations: 0,
            residual: T::infinity(),
            final_time: field.time,
            window: eff_window,
            tolerance: tol,
        };
        let mut old = field.values.clone();
        for _ in 0..max_windows {
            old.copy_from_slice(&field.values);
            let dt = self.dt;
            for _ in 0..steps {
                self.step_inner(field, dt, false);
                self.after_step(field)?;
            }
            self.check_finite(field)?;
            let change = compensated_sum(field.values.iter().zip(&old).map(|(a, b)| (*a - *b).abs())) * area;
            report.iterations += 1;
            report.residual = change / eff_window;
            report.final_time = field.time;
            if report.residual < tol {
                report.converged = true;
                break;
            }
        }
        Ok(report)
    }
}

/// One Fromm update of a line with constant Courant number `v`.
fn advect_line<T: Real>(w: &mut [T], tmp: &mut [T], v: T) {
    let n = w.len();
    let half = lit::<T>(0.5);
    tmp.copy_from_slice(w);
    let mut prev = T::zero();
    for k in 0..n {
        let cur = if k + 1 < n {
            let adv = if v >= T::zero() {
                let s = if k > 0 { half * (tmp[k + 1] - tmp[k - 1]) } else { T::zero() };
                face(tmp[k], s, v)
            } else {
                let s = if k + 2 < n { half * (tmp[k + 2] - tmp[k]) } else { T::zero() };
                face(tmp[k + 1], -s, -v)
            };
            v * adv
        } else {
            T::zero()
        };
        w[k] = tmp[k] - (cur - prev);
        prev = cur;
    }
}

/// Single step with a freshly built [`Evolver`].
pub fn step<T: Real>(field: &mut WignerField<T>, params: &SystemParams<T>, dt: T) -> Result<()> {
    let mut ev = Evolver::new(params, &field.grid, Some(dt))?;
    ev.step(field)
}
