//! Moment hierarchy of the truncated Wigner equation with Gaussian closure.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{derive_coefficients, SystemParams};
use crate::scalar::{lit, Real};

/// Relative tolerance of the adaptive integrator.
pub const RTOL: f64 = 1e-8;
const MAX_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentState<T> {
    pub x2: T,
    pub p2: T,
    pub xp: T,
    pub x3p: T,
    pub x4: T,
    pub x5p: T,
    pub x6: T,
}

/// Which moments are slaved to the second-order ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// Evolve `x2, p2, xp, x3p, x4, x6`; close `<x^2 p^2>` and `<x^5 p>`.
    /// Blows up in finite time from hot starts: `x4` and `x3p` run away
    /// while `x2p2` stays Gaussian.
    Hierarchy,
    /// Evolve `x2, p2, xp` only; every higher moment takes its Gaussian value.
    #[default]
    Gaussian,
}

impl<T: Real> MomentState<T> {
    /// Zero-mean Gaussian state with the given second moments.
    pub fn gaussian(x2: T, p2: T, xp: T) -> Self {
        MomentState {
            x2,
            p2,
            xp,
            x3p: lit::<T>(3.0) * x2 * xp,
            x4: lit::<T>(3.0) * x2 * x2,
            x5p: lit::<T>(15.0) * x2 * x2 * xp,
            x6: lit::<T>(15.0) * x2 * x2 * x2,
        }
    }

    /// Isotropic thermal state with mean phonon number `n`.
    pub fn thermal(n: T) -> Self {
        let v = n + lit(0.5);
        Self::gaussian(v, v, T::zero())
    }

    /// `(x2 + p2)/2 - 1/2`.
    pub fn phonon_number(&self) -> T {
        lit::<T>(0.5) * (self.x2 + self.p2) - lit(0.5)
    }

    /// Gaussian `<x^2 p^2>`.
    pub fn x2p2(&self) -> T {
        self.x2 * self.p2 + lit::<T>(2.0) * self.xp * self.xp
    }

    pub fn is_valid(&self) -> bool {
        self.x2 > T::zero() && self.p2 > T::zero() && self.x4 >= self.x2 * self.x2
    }

    /// Largest relative violation of the Gaussian identities for `x4`, `x6`, `x5p`.
    pub fn closure_defect(&self) -> T {
        let g = Self::gaussian(self.x2, self.p2, self.xp);
        let rel = |a: T, b: T| {
            if b == T::zero() {
                a.abs()
            } else {
                ((a - b) / b).abs()
            }
        };
        rel(self.x4, g.x4).max(rel(self.x6, g.x6)).max(rel(self.x5p, g.x5p))
    }

    fn to_array(self) -> [T; 7] {
        [self.x2, self.p2, self.xp, self.x3p, self.x4, self.x5p, self.x6]
    }

    fn from_array(a: [T; 7]) -> Self {
        MomentState {
            x2: a[0],
            p2: a[1],
            xp: a[2],
            x3p: a[3],
            x4: a[4],
            x5p: a[5],
            x6: a[6],
        }
    }

    fn project(self, closure: Closure) -> Self {
        match closure {
            Closure::Gaussian => Self::gaussian(self.x2, self.p2, self.xp),
            Closure::Hierarchy => MomentState {
                x5p: lit::<T>(15.0) * self.x2 * self.x2 * self.xp,
                ..self
            },
        }
    }
}

/// Time derivative of every moment. Closed moments get the chain-rule
/// derivative of their closure so that the state stays on the closure surface.
pub fn rhs<T: Real>(state: &MomentState<T>, params: &SystemParams<T>, closure: Closure) -> MomentState<T> {
    let dq = params.gamma_g / (lit::<T>(6.0) * params.n0);
    let ad = params.momentum_diffusion();
    let (w, g, f, bf) = (params.omega_z, params.gamma_g, params.gamma_f, params.big_gamma_f);
    let s = state.project(closure);
    let c = |v: f64| lit::<T>(v);
    let x2p2 = s.x2p2();

    let dx2 = c(2.0) * w * s.xp + c(2.0) * dq;
    let dp2 = -c(2.0) * w * s.xp - c(4.0) * g * s.p2 + c(2.0) * ad + c(144.0) * bf * s.x4
        - c(48.0) * f * x2p2;
    let dxp = w * (s.p2 - s.x2) - c(2.0) * g * s.xp - c(24.0) * f * s.x3p;

    let (dx3p, dx4, dx6) = match closure {
        Closure::Hierarchy => (
            c(3.0) * w * x2p2 - w * s.x4 - c(2.0) * g * s.x3p - c(24.0) * f * s.x5p
                + c(6.0) * dq * s.xp,
            c(4.0) * w * s.x3p + c(12.0) * dq * s.x2,
            c(6.0) * w * s.x5p + c(30.0) * dq * s.x4,
        ),
        Closure::Gaussian => (
            c(3.0) * (dx2 * s.xp + s.x2 * dxp),
            c(6.0) * s.x2 * dx2,
            c(45.0) * s.x2 * s.x2 * dx2,
        ),
    };
    let dx5p = c(15.0) * (c(2.0) * s.x2 * dx2 * s.xp + s.x2 * s.x2 * dxp);
    MomentState {
        x2: dx2,
        p2: dp2,
        xp: dxp,
        x3p: dx3p,
        x4: dx4,
        x5p: dx5p,
        x6: dx6,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSample<T> {
    pub t: T,
    pub n: T,
    pub state: MomentState<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory<T> {
    pub samples: Vec<MomentSample<T>>,
    pub steps: usize,
    pub rejected: usize,
}

impl<T: Real> MomentTrajectory<T> {
    pub fn final_state(&self) -> &MomentState<T> {
        &self.samples.last().expect("trajectory holds the initial sample").state
    }

    /// CSV with header `t,n,x2,p2,xp`.
    pub fn write_csv<W: Write>(&self, mut out: W, header_comment: &str) -> Result<()> {
        for line in header_comment.lines() {
            writeln!(out, "# {}", line)?;
        }
        writeln!(out, "t,n,x2,p2,xp")?;
        for s in &self.samples {
            writeln!(out, "{:e},{:e},{:e},{:e},{:e}", s.t, s.n, s.state.x2, s.state.p2, s.state.xp)?;
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate from `initial` to `t_end`, sampling at `n_samples + 1` equally
/// spaced times including both ends.
pub fn evolve<T: Real>(
    initial: MomentState<T>,
    params: &SystemParams<T>,
    t_end: T,
    n_samples: usize,
    closure: Closure,
) -> Result<MomentTrajectory<T>> {
    params.validate()?;
    if !(t_end > T::zero()) {
        return Err(Error::domain("moments::evolve", "t_end must be > 0"));
    }
    let n_samples = n_samples.max(1);
    let rtol = lit::<T>(RTOL.max(T::epsilon().as_f64() * 100.0));
    let mut y = initial.project(closure).to_array();
    let scale0 = y.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    // Components like xp pass through zero; measure them against the state size.
    let atol = rtol * scale0.max(T::one()) * lit(1e-6);
    let f = |y: &[T; 7]| rhs(&MomentState::from_array(*y), params, closure).to_array();

    let mut t = T::zero();
    let mut h = t_end / lit(1000.0);
    let mut out = MomentTrajectory {
        samples: vec![MomentSample {
            t,
            n: MomentState::from_array(y).phonon_number(),
            state: MomentState::from_array(y),
        }],
        steps: 0,
        rejected: 0,
    };
    let mut k = [[T::zero(); 7]; 7];
    k[0] = f(&y);
    for i in 1..=n_samples {
        let target = t_end * T::from_usize_lossy(i) / T::from_usize_lossy(n_samples);
        while t < target {
            if out.steps + out.rejected > MAX_STEPS {
                return Err(Error::Numerical(format!("moment integration exceeded {} steps at t = {}", MAX_STEPS, t)));
            }
            let hh = h.min(target - t);
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = lit::<T>(A[s][j]);
                    if a != T::zero() {
                        for (c, v) in ys.iter_mut().zip(kj) {
                            *c += hh * a * *v;
                        }
                    }
                }
                k[s] = f(&ys);
                if s == 6 {
                    // FSAL: the last stage is evaluated at the 5th-order solution.
                    let mut err = T::zero();
                    for c in 0..7 {
                        let mut e = T::zero();
                        for (st, ks) in k.iter().enumerate() {
                            e += lit::<T>(E[st]) * ks[c];
                        }
                        let sc = atol + rtol * y[c].abs().max(ys[c].abs());
                        let r = hh * e / sc;
                        err = err.max(r.abs());
                    }
                    if !err.is_finite() {
                        return Err(Error::Numerical(format!("non-finite moment at t = {}", t)));
                    }
                    if err <= T::one() {
                        t += hh;
                        y = MomentState::from_array(ys).project(closure).to_array();
                        k[0] = f(&y);
                        out.steps += 1;
                    } else {
                        out.rejected += 1;
                    }
                    let fac = if err == T::zero() {
                        lit(5.0)
                    } else {
                        (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.2)).min(lit(5.0))
                    };
                    h = hh * fac;
                    if h < t_end * T::epsilon() {
                        return Err(Error::Numerical(format!("step size underflow at t = {}", t)));
                    }
                }
            }
        }
        let st = MomentState::from_array(y);
        if !st.is_valid() {
            return Err(Error::Numerical(format!("moments left the valid region at t = {}: {:?}", t, st)));
        }
        out.samples.push(MomentSample {
            t,
            n: st.phonon_number(),
            state: st,
        });
    }
    Ok(out)
}

/// Samples `(t, n)` from the start until `n` first falls to a tenth of its
/// initial value; `None` if it never does.
pub fn first_decade<T: Real>(tr: &MomentTrajectory<T>) -> Option<Vec<(T, T)>> {
    let n0 = tr.samples.first()?.n;
    let end = tr.samples.iter().position(|s| s.n <= n0 / lit(10.0))?;
    Some(tr.samples[..=end].iter().map(|s| (s.t, s.n)).collect())
}

/// Coefficient of determination of a least-squares line through `(t, ln n)`.
/// Equal to one for a single exponential.
pub fn log_linear_r2<T: Real>(series: &[(T, T)]) -> T {
    let m = T::from_usize_lossy(series.len());
    let (st, sy) = series.iter().fold((T::zero(), T::zero()), |(a, b), &(t, n)| (a + t, b + n.ln()));
    let (tm, ym) = (st / m, sy / m);
    let (mut stt, mut sty, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(t, n) in series {
        let (dt, dy) = (t - tm, n.ln() - ym);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if syy == T::zero() {
        return T::one();
    }
    sty * sty / (stt * syy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyMoments<T> {
    pub x2: T,
    pub p2: T,
    pub n: T,
}

fn positive_root<T: Real>(a: T, b: T, c: T) -> Result<T> {
    // a x^2 + b x - c = 0 with the cancellation-free form of the positive root.
    if a == T::zero() {
        if b > T::zero() && c >= T::zero() {
            return Ok(c / b);
        }
        return Err(Error::domain("steady_moments", "no positive root"));
    }
    let disc = b * b + lit::<T>(4.0) * a * c;
    if disc < T::zero() {
        return Err(Error::domain("steady_moments", "negative discriminant"));
    }
    let root = lit::<T>(2.0) * c / (b + disc.sqrt());
    if root > T::zero() && root.is_finite() {
        Ok(root)
    } else {
        Err(Error::domain("steady_moments", "no positive root"))
    }
}

fn with_p2<T: Real>(params: &SystemParams<T>, x2: T) -> Result<SteadyMoments<T>> {
    let dq = derive_coefficients(params)?.d_q;
    let w2 = params.omega_z * params.omega_z;
    let p2 = (T::one() - lit::<T>(72.0) * params.gamma_f * dq / w2) * x2
        - lit::<T>(2.0) * params.gamma_g * dq / w2;
    Ok(SteadyMoments {
        x2,
        p2,
        n: lit::<T>(0.5) * (x2 + p2) - lit(0.5),
    })
}

/// Steady state of the Gaussian-closed hierarchy without the small
/// position-diffusion corrections: `2J x2^2 + 2 gamma_g x2 - (A + D_p) = 0`.
pub fn steady_moments<T: Real>(params: &SystemParams<T>) -> Result<SteadyMoments<T>> {
    let c = derive_coefficients(params)?;
    if !(c.j > T::zero() || params.gamma_g > T::zero()) {
        return Err(Error::domain("steady_moments", "needs J > 0 or gamma_g > 0"));
    }
    let x2 = positive_root(lit::<T>(2.0) * c.j, lit::<T>(2.0) * params.gamma_g, c.momentum_diffusion())?;
    with_p2(params, x2)
}

/// Steady state keeping every position-diffusion correction of the
/// quartic-closed balance `A <x^4> + B <x^2> = C`, with `<x^4> = 3 <x^2>^2`.
pub fn steady_moments_full<T: Real>(params: &SystemParams<T>) -> Result<SteadyMoments<T>> {
    let c = derive_coefficients(params)?;
    let (g, f, bf) = (params.gamma_g, params.gamma_f, params.big_gamma_f);
    let r = c.d_q / (params.omega_z * params.omega_z);
    let a = lit::<T>(8.0) * (f - lit::<T>(9.0) * bf - lit::<T>(120.0) * f * f * r);
    let b = lit::<T>(2.0) * g * (T::one() - lit::<T>(96.0) * f * r);
    let cc = c.momentum_diffusion() + c.d_q + lit::<T>(4.0) * g * g * r;
    let x2 = positive_root(lit::<T>(3.0) * a, b, cc)?;
    with_p2(params, x2)
}
