//! Steady states of one-dimensional Fokker-Planck equations
//! `dW/dt = -d/dy (D1 W) + d^2/dy^2 (D2 W)`.
//!
//! With zero-flux boundaries the stationary density is
//! `W(y) ~ exp(int^y D1/D2) / D2(y)`. The exponent is accumulated cell by
//! cell with Gauss-Legendre quadrature in log space, so exponents of
//! hundreds of natural-log units are harmless.

use std::fmt;

use crate::dist::{linspace, DistAxis, Distribution1D};
use crate::error::{Error, Result};
use crate::model::{derive_coefficients, SystemParams};
use crate::quad::gauss_legendre;
use crate::scalar::{lit, Real};

pub const MIN_GRID: usize = 64;
const CELL_ORDER: usize = 8;
const ADAPT_TOL: f64 = 1e-13;
const ADAPT_MAX_DEPTH: usize = 30;

pub type Coefficient<T> = Box<dyn Fn(T) -> T + Send + Sync>;

pub struct FP1DProblem<T> {
    pub y_min: T,
    pub y_max: T,
    pub n: usize,
    pub axis: DistAxis,
    pub drift: Coefficient<T>,
    pub diffusion: Coefficient<T>,
}

impl<T: Real> fmt::Debug for FP1DProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FP1DProblem")
            .field("y_min", &self.y_min)
            .field("y_max", &self.y_max)
            .field("n", &self.n)
            .field("axis", &self.axis)
            .finish_non_exhaustive()
    }
}

impl<T: Real> FP1DProblem<T> {
    pub fn new(
        axis: DistAxis,
        y_min: T,
        y_max: T,
        n: usize,
        drift: impl Fn(T) -> T + Send + Sync + 'static,
        diffusion: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        if n < MIN_GRID {
            return Err(Error::domain("FP1DProblem", format!("grid size {} < {}", n, MIN_GRID)));
        }
        if !(y_max > y_min) {
            return Err(Error::domain("FP1DProblem", "empty domain"));
        }
        Ok(FP1DProblem {
            y_min,
            y_max,
            n,
            axis,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
        })
    }

    pub fn grid(&self) -> Vec<T> {
        linspace(self.y_min, self.y_max, self.n)
    }

    /// Stationary zero-flux density, normalized on [`Self::grid`].
    pub fn steady_state(&self) -> Result<Distribution1D<T>> {
        let ys = self.grid();
        let (nodes, weights) = gauss_legendre::<T>(CELL_ORDER);
        let half = lit::<T>(0.5);
        let check = |y: T| -> Result<T> {
            let d2 = (self.diffusion)(y);
            if !(d2 > T::zero()) {
                return Err(Error::domain(
                    "fp1d steady_state",
                    format!("D2({}) = {} is not positive", y, d2),
                ));
            }
            Ok(d2)
        };
        let rule = |a: T, b: T| -> Result<T> {
            let mid = half * (a + b);
            let hw = half * (b - a);
            let mut cell = T::zero();
            for (&t, &wt) in nodes.iter().zip(&weights) {
                let y = mid + hw * t;
                cell += wt * (self.drift)(y) / check(y)?;
            }
            Ok(cell * hw)
        };
        let mut log_w = Vec::with_capacity(self.n);
        let mut acc = T::zero();
        log_w.push(-check(ys[0])?.ln());
        for w in ys.windows(2) {
            acc += adaptive(&rule, w[0], w[1], rule(w[0], w[1])?, 0)?;
            log_w.push(acc - check(w[1])?.ln());
        }
        Distribution1D::from_log_density(self.axis, ys, &log_w)
    }

    /// Largest net probability flux of `dist` under the discrete operator,
    /// relative to the largest drift flux `|D1 W|`. Zero for exact
    /// detailed balance.
    pub fn flux_residual(&self, dist: &Distribution1D<T>) -> T {
        let ys = &dist.points;
        let w = &dist.density;
        let half = lit::<T>(0.5);
        let mut max_net = T::zero();
        let mut max_drift = T::zero();
        for i in 0..ys.len() - 1 {
            let h = ys[i + 1] - ys[i];
            let d1a = (self.drift)(ys[i]) * w[i];
            let d1b = (self.drift)(ys[i + 1]) * w[i + 1];
            let adv = half * (d1a + d1b);
            let dif = ((self.diffusion)(ys[i + 1]) * w[i + 1] - (self.diffusion)(ys[i]) * w[i]) / h;
            max_net = max_net.max((adv - dif).abs());
            max_drift = max_drift.max(d1a.abs());
        }
        max_net / max_drift
    }
}

/// Bisects until halves agree to `ADAPT_TOL` absolute in the log-density;
/// needed where the coefficients vary on scales far below the grid step.
fn adaptive<T: Real>(rule: &impl Fn(T, T) -> Result<T>, a: T, b: T, whole: T, depth: usize) -> Result<T> {
    let mid = lit::<T>(0.5) * (a + b);
    let (l, r) = (rule(a, mid)?, rule(mid, b)?);
    if depth >= ADAPT_MAX_DEPTH || (l + r - whole).abs() <= lit(ADAPT_TOL) {
        return Ok(l + r);
    }
    Ok(adaptive(rule, a, mid, l, depth + 1)? + adaptive(rule, mid, b, r, depth + 1)?)
}

/// Overdamped drift `h(x) = -omega_z^2 x / (2 gamma_g + 24 gamma_f x^2)`.
pub fn overdamped_h<T: Real>(p: &SystemParams<T>, x: T) -> T {
    let den = lit::<T>(2.0) * p.gamma_g + lit::<T>(24.0) * p.gamma_f * x * x;
    -p.omega_z * p.omega_z * x / den
}

/// Overdamped noise amplitude
/// `g(x) = omega_z sqrt(A + D_p + 72 Gamma_f x^4) / (2 gamma_g + 24 gamma_f x^2)`.
pub fn overdamped_g<T: Real>(p: &SystemParams<T>, x: T) -> T {
    let ad = p.momentum_diffusion();
    let x2 = x * x;
    let den = lit::<T>(2.0) * p.gamma_g + lit::<T>(24.0) * p.gamma_f * x2;
    p.omega_z * (ad + lit::<T>(72.0) * p.big_gamma_f * x2 * x2).sqrt() / den
}

/// `dg/dx`, closed form.
pub fn overdamped_g_prime<T: Real>(p: &SystemParams<T>, x: T) -> T {
    let ad = p.momentum_diffusion();
    let x2 = x * x;
    let num = ad + lit::<T>(72.0) * p.big_gamma_f * x2 * x2;
    let sq = num.sqrt();
    let den = lit::<T>(2.0) * p.gamma_g + lit::<T>(24.0) * p.gamma_f * x2;
    let dnum = lit::<T>(288.0) * p.big_gamma_f * x2 * x;
    let dden = lit::<T>(48.0) * p.gamma_f * x;
    p.omega_z * (dnum / (lit::<T>(2.0) * sq) * den - sq * dden) / (den * den)
}

/// Position equation of the adiabatically eliminated dynamics, Stratonovich
/// drift `D1 = h + g g'` and `D2 = g^2`, on `[-half_width, half_width]`.
pub fn drift_diffusion_overdamped<T: Real>(
    params: &SystemParams<T>,
    half_width: T,
    n: usize,
) -> Result<FP1DProblem<T>> {
    params.validate()?;
    if !(params.gamma_g > T::zero()) {
        return Err(Error::domain(
            "drift_diffusion_overdamped",
            "needs gamma_g > 0 so that the denominator is nonzero at x = 0",
        ));
    }
    let p1 = *params;
    let p2 = *params;
    FP1DProblem::new(
        DistAxis::X,
        -half_width,
        half_width,
        n,
        move |x| overdamped_h(&p1, x) + overdamped_g(&p1, x) * overdamped_g_prime(&p1, x),
        move |x| {
            let g = overdamped_g(&p2, x);
            g * g
        },
    )
}

/// Energy-space equation of the low-damping limit:
/// `D1 = (A + D_p) - 2 gamma_g eps - 12 gamma_f eps^2`, `D2 = (A + D_p) eps`,
/// on `[eps_floor, eps_max]`. The floor keeps `1/D2` finite.
pub fn energy_space_low_damping<T: Real>(
    params: &SystemParams<T>,
    eps_floor: T,
    eps_max: T,
    n: usize,
) -> Result<FP1DProblem<T>> {
    let ad = derive_coefficients(params)?.momentum_diffusion();
    if !(eps_floor > T::zero()) {
        return Err(Error::domain("energy_space_low_damping", "energy floor must be > 0"));
    }
    let (g, f) = (params.gamma_g, params.gamma_f);
    FP1DProblem::new(
        DistAxis::Epsilon,
        eps_floor,
        eps_max,
        n,
        move |e| ad - lit::<T>(2.0) * g * e - lit::<T>(12.0) * f * e * e,
        move |e| ad * e,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;

    fn fig6() -> SystemParams<f64> {
        SystemParams {
            omega_z: 40.0,
            gamma_g: 5e-5,
            a_t: 0.5,
            a_p: 0.5,
            n0: 1e8,
            gamma_f: 4.0 / 27.0,
            big_gamma_f: 4.0 / 729.0,
        }
    }

    #[test]
    fn ornstein_uhlenbeck_is_gaussian() {
        let (k, d) = (2.5, 0.7);
        let prob = FP1DProblem::<f64>::new(DistAxis::X, -5.0, 5.0, 2001, move |y| -k * y, move |_| d).unwrap();
        let w = prob.steady_state().unwrap();
        assert!(((w.moment(2) - d / k) / (d / k)).abs() < 1e-5);
        assert!((w.integral() - 1.0).abs() < 1e-8);
        // Second-order residual estimator.
        let r1 = prob.flux_residual(&w);
        let fine = FP1DProblem::<f64>::new(DistAxis::X, -5.0, 5.0, 4001, move |y| -k * y, move |_| d).unwrap();
        let r2 = fine.flux_residual(&fine.steady_state().unwrap());
        assert!(r1 < 5e-5 && (r1 / r2 - 4.0).abs() < 0.1, "{r1} {r2}");
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(FP1DProblem::new(DistAxis::X, -1.0, 1.0, 10, |y: f64| -y, |_| 1.0).is_err());
        let p = FP1DProblem::new(DistAxis::X, -1.0, 1.0, 100, |y: f64| -y, |y| y).unwrap();
        assert!(p.steady_state().is_err());
    }

    #[test]
    fn overdamped_coefficients_at_origin() {
        let p = fig6();
        assert_eq!(overdamped_h(&p, 0.0), 0.0);
        assert_eq!(overdamped_g_prime(&p, 0.0) * overdamped_g(&p, 0.0), 0.0);
        let prob = drift_diffusion_overdamped(&p, 40.0, 101).unwrap();
        let want = 1600.0 * 10001.0 / (4.0 * 5e-5f64 * 5e-5);
        assert!((((prob.diffusion)(0.0) - want) / want).abs() < 1e-12);
    }

    #[test]
    fn g_prime_matches_finite_difference() {
        let p = fig6();
        for x in [-20.0, -3.0, 0.5, 8.06, 30.0] {
            let h = 1e-5 * (1.0 + f64::abs(x));
            let fd = (overdamped_g(&p, x + h) - overdamped_g(&p, x - h)) / (2.0 * h);
            let an = overdamped_g_prime(&p, x);
            assert!(((fd - an) / an).abs() < 1e-6, "x={x}: {fd} vs {an}");
        }
    }

    #[test]
    fn overdamped_steady_state_reproduces_closed_form() {
        let p = fig6();
        let prob = drift_diffusion_overdamped(&p, 60.0, 4001).unwrap();
        let w = prob.steady_state().unwrap();
        let exact =
            analytic::position_dist_overdamped(&p, &w.points, analytic::OverdampedForm::Full).unwrap();
        for (a, b) in w.density.iter().zip(&exact.density) {
            if *b > 1e-200 {
                assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
            }
        }
        assert_eq!(w.argmax().1.abs(), exact.argmax().1.abs());
    }

    #[test]
    fn energy_space_reproduces_low_damping_density() {
        let p = SystemParams {
            gamma_f: 5.2e-3,
            big_gamma_f: 0.0,
            gamma_g: 5e-7,
            n0: 1e3,
            ..fig6()
        };
        let prob = energy_space_low_damping(&p, 1e-3, 60.0, 4001).unwrap();
        let w = prob.steady_state().unwrap();
        let exact = analytic::energy_dist_low_damping(&p, &w.points).unwrap();
        for (a, b) in w.density.iter().zip(&exact.density) {
            assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn energy_floor_insensitivity() {
        let p = SystemParams {
            gamma_f: 5.2e-3,
            big_gamma_f: 0.0,
            gamma_g: 5e-7,
            n0: 1e3,
            ..fig6()
        };
        let mean = |floor: f64| {
            energy_space_low_damping(&p, floor, 60.0, 6001)
                .unwrap()
                .steady_state()
                .unwrap()
                .mean()
        };
        // The mass below the floor is O(floor / <eps>).
        let a = mean(2e-4);
        let b = mean(1e-4);
        assert!(((a - b) / b).abs() < 1e-4, "{a} {b}");
    }
}
