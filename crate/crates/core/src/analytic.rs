//! Closed-form steady-state results.
//!
//! Densities are evaluated in log space and normalized numerically on the
//! caller's grid; normalization constants are never computed symbolically.

use crate::dist::{DistAxis, Distribution1D};
use crate::error::{Error, Result};
use crate::model::{derive_coefficients, SystemParams};
use crate::quad;
use crate::scalar::{lit, Real};
use crate::special::{gamma_ratio, ln_bessel_k_scaled, ln_gamma};

/// Phonon bunching of the overdamped state in the large-`<x^2>` limit.
pub const G2_OVERDAMPED_ASYMPTOTIC: f64 = 51.0 / 25.0;
/// Bunching of a thermal state.
pub const G2_THERMAL: f64 = 2.0;
/// Mean phonon number reported for the fig6 parameters from the momentum
/// route; kept as a reference constant only (the printed formula gives ~93).
pub const N_WSS_REPORTED_FIG6: f64 = 75.0;
/// Density floor used before taking logarithms of tabulated densities.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Steady Gaussian without feedback; covariance `[[a, c], [c, b]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSteadyState<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub x2: T,
    pub p2: T,
    pub xp: T,
    pub n_ss: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyX2<T> {
    /// Positive root of `2J x^4 + 2 gamma_g x^2 - (A + D_p) = 0` in `x^2`.
    pub exact: T,
    /// `sqrt((A + D_p) / 2J)`.
    pub approx: T,
    /// Whether `J N0 >> gamma_g` holds (factor 100 margin).
    pub approx_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverdampedForm {
    /// Includes the arctan factor from gas damping.
    Full,
    /// Drops the arctan factor; vanishes at `x = 0`.
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumMoments<T> {
    /// `sqrt((A + D_p) / (3J/2))`, the optimum-feedback reduction.
    pub p2: T,
    /// `3 p2^2` (Gaussian).
    pub p4: T,
    /// `(A + D_p + 72 Gamma_f <x^4>) / (2 gamma_g + 24 gamma_f <x^2>)` with the
    /// overdamped position moments, before the optimum-feedback reduction.
    pub p2_unreduced: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhononStats<T> {
    pub n: T,
    pub n2: T,
    pub g2: T,
    pub g2_asymptotic: T,
    pub g2_thermal: T,
}

#[derive(Debug, Clone)]
pub struct PotentialCurve<T> {
    /// `U(x)` in units of k_B T, minimum shifted to zero.
    pub curve: Distribution1D<T>,
    /// Indices where the density was below the floor and got clipped.
    pub clipped: Vec<usize>,
}

fn require_positive_j<T: Real>(params: &SystemParams<T>, what: &'static str) -> Result<(T, T)> {
    let c = derive_coefficients(params)?;
    if !(c.j > T::zero()) {
        return Err(Error::domain(
            what,
            format!("needs J = 12(gamma_f - 9 Gamma_f) > 0, got {}", c.j),
        ));
    }
    Ok((c.j, c.momentum_diffusion()))
}

pub fn no_feedback_steady<T: Real>(params: &SystemParams<T>) -> Result<GaussianSteadyState<T>> {
    let c = derive_coefficients(params)?;
    if !(params.gamma_g > T::zero()) {
        return Err(Error::domain(
            "no_feedback_steady",
            "gamma_g = 0: no steady state without damping",
        ));
    }
    let two = lit::<T>(2.0);
    let b = (c.momentum_diffusion() + c.d_q) / (two * params.gamma_g);
    let a = b + two * params.gamma_g * c.d_q / (params.omega_z * params.omega_z);
    let cc = -c.d_q / params.omega_z;
    Ok(GaussianSteadyState {
        a,
        b,
        c: cc,
        x2: a,
        p2: b,
        xp: cc,
        n_ss: (a + b) / two - lit(0.5),
    })
}

pub fn steady_x2<T: Real>(params: &SystemParams<T>) -> Result<SteadyX2<T>> {
    let (j, ad) = require_positive_j(params, "steady_x2")?;
    let two = lit::<T>(2.0);
    let g = params.gamma_g;
    // Rationalized root avoids cancellation when gamma_g dominates.
    let disc = (g * g + two * j * ad).sqrt();
    let exact = ad / (g + disc);
    Ok(SteadyX2 {
        exact,
        approx: (ad / (two * j)).sqrt(),
        approx_valid: j * params.n0 >= lit::<T>(100.0) * g,
    })
}

/// Steady `<x^2>` from the fourth-order closure when `J > 0`, else the
/// Gaussian no-feedback value. Sets length scales for grids and samplers.
pub fn x2_scale<T: Real>(params: &SystemParams<T>) -> Result<T> {
    let c = derive_coefficients(params)?;
    if c.j > T::zero() {
        Ok(steady_x2(params)?.exact)
    } else {
        Ok(no_feedback_steady(params)?.x2)
    }
}

/// `sqrt((A + D_p) / 2J) - 1/2`.
pub fn steady_n<T: Real>(params: &SystemParams<T>) -> Result<T> {
    Ok(steady_x2(params)?.approx - lit(0.5))
}

/// `2 sqrt((2J + 2 gamma_g)^2 + 8J(A + D_p - J/2))`; carries rate units.
pub fn cooling_time_tau<T: Real>(params: &SystemParams<T>) -> Result<T> {
    let c = derive_coefficients(params)?;
    let two = lit::<T>(2.0);
    let j = c.j;
    let s = two * j + two * params.gamma_g;
    let radicand = s * s + lit::<T>(8.0) * j * (c.momentum_diffusion() - j / two);
    if radicand < T::zero() {
        return Err(Error::domain(
            "cooling_time_tau",
            format!("negative radicand {}", radicand),
        ));
    }
    Ok(two * radicand.sqrt())
}

/// Steady energy density of the low-damping limit,
/// `exp[-(2 gamma_g eps + 6 gamma_f eps^2) / (A + D_p)]`.
pub fn energy_dist_low_damping<T: Real>(
    params: &SystemParams<T>,
    eps_grid: &[T],
) -> Result<Distribution1D<T>> {
    let ad = derive_coefficients(params)?.momentum_diffusion();
    if !(ad > T::zero()) {
        return Err(Error::domain("energy_dist_low_damping", "A + D_p must be > 0"));
    }
    if eps_grid.iter().any(|&e| e < T::zero()) {
        return Err(Error::domain("energy_dist_low_damping", "energies must be >= 0"));
    }
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let logw: Vec<T> = eps_grid
        .iter()
        .map(|&e| -(two * params.gamma_g * e + six * params.gamma_f * e * e) / ad)
        .collect();
    Distribution1D::from_log_density(DistAxis::Epsilon, eps_grid.to_vec(), &logw)
}

/// Mean phonon number `<eps> - 1/2` of the low-damping energy density, by
/// Gauss-Legendre quadrature on `[0, 40 s]` where `s` is the decay scale.
pub fn mean_phonon_low_damping<T: Real>(params: &SystemParams<T>) -> Result<T> {
    let ad = derive_coefficients(params)?.momentum_diffusion();
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let lin = two * params.gamma_g / ad;
    let quadr = six * params.gamma_f / ad;
    if !(lin > T::zero() || quadr > T::zero()) {
        return Err(Error::domain(
            "mean_phonon_low_damping",
            "needs gamma_g > 0 or gamma_f > 0",
        ));
    }
    let scale_lin = if lin > T::zero() { T::one() / lin } else { T::infinity() };
    let scale_quad = if quadr > T::zero() {
        T::one() / quadr.sqrt()
    } else {
        T::infinity()
    };
    let scale = scale_lin.min(scale_quad);
    let hi = lit::<T>(40.0) * scale;
    let f = |e: T| (-(lin * e + quadr * e * e)).exp();
    let z = quad::integrate(f, T::zero(), hi, 400, 10);
    let m = quad::integrate(|e| e * f(e), T::zero(), hi, 400, 10);
    Ok(m / z - lit(0.5))
}

/// Solves for the feedback drift `gamma_f` whose low-damping steady state has
/// `24 gamma_f <x^2> / omega_z = target`, with `<x^2> = <eps>` from the
/// low-damping energy density. `Gamma_f` is set to zero.
pub fn gamma_f_for_low_damping_gamma_eff<T: Real>(
    base: &SystemParams<T>,
    target: T,
) -> Result<SystemParams<T>> {
    if !(target > T::zero()) {
        return Err(Error::domain("gamma_f_for_low_damping_gamma_eff", "target must be > 0"));
    }
    let eval = |ln_gf: T| -> Result<T> {
        let p = SystemParams {
            gamma_f: ln_gf.exp(),
            big_gamma_f: T::zero(),
            ..*base
        };
        let x2 = mean_phonon_low_damping(&p)? + lit(0.5);
        Ok(lit::<T>(24.0) * p.gamma_f * x2 / p.omega_z - target)
    };
    // gamma_eff grows monotonically with gamma_f.
    let (mut lo, mut hi) = (lit::<T>(-80.0), lit::<T>(20.0));
    if eval(lo)? > T::zero() || eval(hi)? < T::zero() {
        return Err(Error::domain(
            "gamma_f_for_low_damping_gamma_eff",
            "target outside bracket",
        ));
    }
    for _ in 0..200 {
        let mid = lit::<T>(0.5) * (lo + hi);
        if eval(mid)? > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < lit(1e-14) {
            break;
        }
    }
    Ok(SystemParams {
        gamma_f: (lit::<T>(0.5) * (lo + hi)).exp(),
        big_gamma_f: T::zero(),
        ..*base
    })
}

/// Position density of the low-damping limit (momentum integrated out of the
/// energy density), `sqrt(s) exp(-z) K_{1/4}(z)` with `s = 3 gamma_f x^2 + gamma_g`
/// and `z = s^2 / (12 gamma_f (A + D_p))`.
pub fn position_dist_low_damping<T: Real>(
    params: &SystemParams<T>,
    x_grid: &[T],
) -> Result<Distribution1D<T>> {
    let ad = derive_coefficients(params)?.momentum_diffusion();
    if !(ad > T::zero()) {
        return Err(Error::domain("position_dist_low_damping", "A + D_p must be > 0"));
    }
    let quarter = lit::<T>(0.25);
    let half = lit::<T>(0.5);
    let logw: Result<Vec<T>> = if params.gamma_f == T::zero() {
        // Boltzmann marginal.
        Ok(x_grid.iter().map(|&x| -params.gamma_g * x * x / ad).collect())
    } else {
        let c = lit::<T>(12.0) * params.gamma_f * ad;
        x_grid
            .iter()
            .map(|&x| {
                let s = lit::<T>(3.0) * params.gamma_f * x * x + params.gamma_g;
                if s == T::zero() {
                    // sqrt(s) K_{1/4}(s^2/c) -> Gamma(1/4)/2 (2c)^{1/4}
                    let two = lit::<T>(2.0);
                    return Ok(ln_gamma(quarter) - two.ln() + quarter * (two * c).ln());
                }
                let z = s * s / c;
                Ok(half * s.ln() - (z + z) + ln_bessel_k_scaled(quarter, z)?)
            })
            .collect()
    };
    Distribution1D::from_log_density(DistAxis::X, x_grid.to_vec(), &logw?)
}

/// Log of the overdamped steady position density (unnormalized).
pub fn log_position_density_overdamped<T: Real>(
    params: &SystemParams<T>,
    x: T,
    form: OverdampedForm,
) -> Result<T> {
    let (_, ad) = require_positive_j(params, "position_dist_overdamped")?;
    let twelve = lit::<T>(12.0);
    let six = lit::<T>(6.0);
    let x2 = x * x;
    let gf = params.gamma_f;
    let bgf = params.big_gamma_f;
    let u = lit::<T>(72.0) * bgf * x2 * x2 / ad;
    // kappa * ln(1 + u), kappa = (gamma_f + 6 Gamma_f) / (12 Gamma_f)
    let power_term = if bgf > T::zero() {
        (gf + six * bgf) / (twelve * bgf) * u.ln_1p()
    } else {
        six * gf * x2 * x2 / ad
    };
    let prefactor = match form {
        OverdampedForm::Full => (params.gamma_g + twelve * x2 * gf).ln(),
        OverdampedForm::Simplified => (twelve * gf * x2).ln(),
    };
    let arctan_term = match form {
        OverdampedForm::Simplified => T::zero(),
        OverdampedForm::Full if bgf > T::zero() => {
            let sqrt2 = lit::<T>(2.0).sqrt();
            let arg = six * sqrt2 * x2 * (bgf / ad).sqrt();
            params.gamma_g * arg.atan() / (six * (lit::<T>(2.0) * bgf * ad).sqrt())
        }
        OverdampedForm::Full => params.gamma_g * x2 / ad,
    };
    Ok(prefactor - power_term - arctan_term)
}

pub fn position_dist_overdamped<T: Real>(
    params: &SystemParams<T>,
    x_grid: &[T],
    form: OverdampedForm,
) -> Result<Distribution1D<T>> {
    let logw: Result<Vec<T>> = x_grid
        .iter()
        .map(|&x| log_position_density_overdamped(params, x, form))
        .collect();
    Distribution1D::from_log_density(DistAxis::X, x_grid.to_vec(), &logw?)
}

/// Bistable maxima `+-((A + D_p) / 2J)^{1/4}` as `(x_minus, x_plus)`.
pub fn peak_positions<T: Real>(params: &SystemParams<T>) -> Result<(T, T)> {
    let (j, ad) = require_positive_j(params, "peak_positions")?;
    let x = (ad / (lit::<T>(2.0) * j)).sqrt().sqrt();
    Ok((-x, x))
}

/// True maxima of the simplified overdamped density, `+-((A + D_p) / 12 gamma_f)^{1/4}`.
/// Independent of `Gamma_f`; exceeds `peak_positions` by `(2J / 12 gamma_f)^{1/4}`.
pub fn simplified_density_peaks<T: Real>(params: &SystemParams<T>) -> Result<(T, T)> {
    require_positive_j(params, "simplified_density_peaks")?;
    let ad = params.momentum_diffusion();
    let x = (ad / (lit::<T>(12.0) * params.gamma_f)).sqrt().sqrt();
    Ok((-x, x))
}

fn backaction_order<T: Real>(params: &SystemParams<T>, what: &'static str, min: f64) -> Result<T> {
    if !(params.big_gamma_f > T::zero()) {
        return Err(Error::domain(what, "needs Gamma_f > 0"));
    }
    let m = params.gamma_f / (lit::<T>(12.0) * params.big_gamma_f);
    if !(m > lit(min)) {
        return Err(Error::domain(
            what,
            format!("gamma_f / (12 Gamma_f) = {} must exceed {}", m, min),
        ));
    }
    Ok(m)
}

/// `<x^2>` of the simplified overdamped density (Gamma-function closed form).
pub fn x2_wss<T: Real>(params: &SystemParams<T>) -> Result<T> {
    let m = backaction_order(params, "x2_wss", 0.75)?;
    let ad = derive_coefficients(params)?.momentum_diffusion();
    let ratio = gamma_ratio(lit(1.25), m - lit(0.75), lit(0.75), m - lit(0.25))?;
    Ok((ad / (lit::<T>(72.0) * params.big_gamma_f)).sqrt() * ratio)
}

/// `<x^4>` of the simplified overdamped density.
pub fn x4_wss<T: Real>(params: &SystemParams<T>) -> Result<T> {
    let m = backaction_order(params, "x4_wss", 1.25)?;
    let ad = derive_coefficients(params)?.momentum_diffusion();
    let ratio = gamma_ratio(lit(1.75), m - lit(1.25), lit(0.75), m - lit(0.25))?;
    Ok(ad / (lit::<T>(72.0) * params.big_gamma_f) * ratio)
}

pub fn momentum_moments_overdamped<T: Real>(params: &SystemParams<T>) -> Result<MomentumMoments<T>> {
    let (j, ad) = require_positive_j(params, "momentum_dist_overdamped")?;
    let p2 = (ad / (lit::<T>(1.5) * j)).sqrt();
    let p2_unreduced = match (x2_wss(params), x4_wss(params)) {
        (Ok(x2), Ok(x4)) => {
            (ad + lit::<T>(72.0) * params.big_gamma_f * x4)
                / (lit::<T>(2.0) * params.gamma_g + lit::<T>(24.0) * params.gamma_f * x2)
        }
        _ => T::nan(),
    };
    Ok(MomentumMoments {
        p2,
        p4: lit::<T>(3.0) * p2 * p2,
        p2_unreduced,
    })
}

/// Gaussian momentum density of the overdamped regime.
pub fn momentum_dist_overdamped<T: Real>(
    params: &SystemParams<T>,
    p_grid: &[T],
) -> Result<(Distribution1D<T>, MomentumMoments<T>)> {
    let m = momentum_moments_overdamped(params)?;
    let two = lit::<T>(2.0);
    let logw: Vec<T> = p_grid.iter().map(|&p| -p * p / (two * m.p2)).collect();
    let dist = Distribution1D::from_log_density(DistAxis::P, p_grid.to_vec(), &logw)?;
    Ok((dist, m))
}

pub fn phonon_stats_overdamped<T: Real>(params: &SystemParams<T>) -> Result<PhononStats<T>> {
    let (j, ad) = require_positive_j(params, "phonon_stats_overdamped")?;
    let s = (ad / (lit::<T>(2.0) * j)).sqrt();
    let k = lit::<T>(5.0) / (lit::<T>(2.0) * lit::<T>(3.0).sqrt());
    let n = k * s - lit(0.5);
    let n2 = lit::<T>(17.0 / 8.0) * ad / j - k * s;
    Ok(PhononStats {
        n,
        n2,
        g2: (n2 - n) / (n * n),
        g2_asymptotic: lit(G2_OVERDAMPED_ASYMPTOTIC),
        g2_thermal: lit(G2_THERMAL),
    })
}

/// `U(x) = -ln W(x)`, shifted so that `min U = 0`.
pub fn potential_from_density<T: Real>(dist: &Distribution1D<T>) -> PotentialCurve<T> {
    let floor = T::from_f64(DENSITY_FLOOR).unwrap_or_else(T::min_positive_value);
    let mut clipped = Vec::new();
    let mut u: Vec<T> = dist
        .density
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if !(w >= floor) {
                clipped.push(i);
                -floor.ln()
            } else {
                -w.ln()
            }
        })
        .collect();
    let min = u.iter().copied().fold(T::infinity(), T::min);
    for v in &mut u {
        *v -= min;
    }
    PotentialCurve {
        curve: Distribution1D {
            axis: DistAxis::Potential,
            points: dist.points.clone(),
            density: u,
            raw_integral: T::one(),
            uncertainty: None,
        },
        clipped,
    }
}

/// Potential of the noise-free overdamped drift, `U = -int h dx` with
/// `h = -omega_z^2 x / (2 gamma_g + 24 gamma_f x^2)`, scaled by `omega_z^2`
/// and shifted to `min U = 0`.
pub fn drift_potential<T: Real>(params: &SystemParams<T>, x_grid: &[T]) -> Result<Vec<T>> {
    params.validate()?;
    let two = lit::<T>(2.0);
    let g = params.gamma_g;
    let f = params.gamma_f;
    let u: Vec<T> = x_grid
        .iter()
        .map(|&x| {
            let x2 = x * x;
            if f > T::zero() {
                // int x / (2g + 24 f x^2) dx = ln(2g + 24 f x^2) / (48 f)
                ((two * g + lit::<T>(24.0) * f * x2) / (two * g).max(T::min_positive_value())).ln()
                    / (lit::<T>(48.0) * f)
            } else if g > T::zero() {
                x2 / (lit::<T>(4.0) * g)
            } else {
                T::zero()
            }
        })
        .collect();
    let min = u.iter().copied().fold(T::infinity(), T::min);
    Ok(u.into_iter().map(|v| v - min).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{linspace, symmetric_grid};

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

    fn fig2() -> SystemParams<f64> {
        SystemParams {
            omega_z: 40.0,
            gamma_g: 0.005,
            a_t: 0.5,
            a_p: 0.5,
            n0: 1e6,
            gamma_f: 2.0 / 9.0,
            big_gamma_f: 1.0 / 81.0,
        }
    }

    #[test]
    fn no_feedback_gaussian() {
        let s = no_feedback_steady(&fig2()).unwrap();
        assert!((s.p2 - 1.0001e6).abs() / 1.0001e6 < 1e-6);
        assert!((s.n_ss - 1.0001e6).abs() / 1.0001e6 < 1e-6);
        assert!(s.a * s.b - s.c * s.c > 0.0);
        assert!(s.x2 >= s.p2);
        let dq = 0.005 / 6e6;
        assert_eq!(s.xp, -dq / 40.0);
        // equipartition when D_q -> 0
        let mut p = fig2().without_feedback();
        p.n0 = 1e300;
        let s = no_feedback_steady(&p).unwrap();
        assert_eq!(s.x2, s.p2);
        let mut z = fig2();
        z.gamma_g = 0.0;
        assert!(no_feedback_steady(&z).is_err());
    }

    #[test]
    fn steady_x2_values() {
        let s = steady_x2(&fig6()).unwrap();
        assert!((s.approx - (10001.0f64 * 27.0 / 64.0).sqrt()).abs() < 1e-10);
        assert!((s.approx - 64.96).abs() < 0.01);
        assert!(s.approx_valid);
        let s2 = steady_x2(&fig2()).unwrap();
        assert!((s2.exact - 61.2).abs() < 0.05, "{}", s2.exact);
        // gamma_g dominated limit
        let mut p = fig2();
        p.gamma_g = 1e3;
        p.n0 = 1.0;
        p.gamma_f = 1e-9;
        p.big_gamma_f = 0.0;
        let s = steady_x2(&p).unwrap();
        let ad = p.momentum_diffusion();
        assert!(((s.exact - ad / (2.0 * p.gamma_g)) / s.exact).abs() < 1e-6);
        assert!(!s.approx_valid);
        assert!(steady_x2(&fig2().without_feedback()).is_err());
    }

    #[test]
    fn steady_n_values() {
        assert!((steady_n(&fig2()).unwrap() - 60.74).abs() < 0.01);
        let high = SystemParams {
            omega_z: 40.0,
            gamma_g: 0.5,
            a_t: 0.5,
            a_p: 0.5,
            n0: 1e8,
            gamma_f: 3.3e-5,
            big_gamma_f: 2.8e-10,
        };
        let n: f64 = steady_n(&high).unwrap();
        assert!(((n - 3.53e5) / 3.53e5).abs() < 0.01, "{n}");
    }

    #[test]
    fn tau_values() {
        let t = cooling_time_tau(&fig2()).unwrap();
        let j = 4.0 / 3.0;
        let want = 2.0 * ((2.0 * j + 0.01f64).powi(2) + 8.0 * j * (10001.0 - j / 2.0)).sqrt();
        assert!((t - want).abs() < 1e-9);
        assert!((t - 653.2).abs() < 0.1, "{t}");
        let off = cooling_time_tau(&fig2().without_feedback()).unwrap();
        assert!((off - 4.0 * 0.005).abs() < 1e-15);
        let t2 = cooling_time_tau(&fig2().scale_rates(2.0)).unwrap();
        assert!((t2 - 2.0 * t).abs() < 1e-9);
    }

    #[test]
    fn energy_density_without_feedback_is_boltzmann() {
        let p = fig2().without_feedback();
        let eps = linspace(0.0, 5e6, 2001);
        let d = energy_dist_low_damping(&p, &eps).unwrap();
        let ad = p.momentum_diffusion();
        let k = 2.0 * p.gamma_g / ad;
        let boltz = Distribution1D::from_log_density(
            DistAxis::Epsilon,
            eps.clone(),
            &eps.iter().map(|e| -k * e).collect::<Vec<_>>(),
        )
        .unwrap();
        for (a, b) in d.density.iter().zip(&boltz.density) {
            assert!(((a - b) / b).abs() < 1e-12);
        }
        assert!(d.density.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn low_damping_position_density_matches_marginal_of_energy_density() {
        let p = SystemParams {
            gamma_f: 5.2e-3,
            big_gamma_f: 0.0,
            gamma_g: 5e-7,
            n0: 1e3,
            ..fig2()
        };
        let ad = p.momentum_diffusion();
        let xs = symmetric_grid(12.0, 97);
        let d = position_dist_low_damping(&p, &xs).unwrap();
        assert!(d.is_even(1e-12));
        // marginal by quadrature over p of exp(-(2 g eps + 6 f eps^2)/AD)
        let marg: Vec<f64> = xs
            .iter()
            .map(|&x| {
                quad::integrate(
                    |q: f64| {
                        let e = 0.5 * (x * x + q * q);
                        (-(2.0 * p.gamma_g * e + 6.0 * p.gamma_f * e * e) / ad).exp()
                    },
                    -40.0,
                    40.0,
                    200,
                    10,
                )
            })
            .collect();
        let m = Distribution1D::from_values(DistAxis::X, xs.clone(), marg).unwrap();
        for (a, b) in d.density.iter().zip(&m.density) {
            assert!(((a - b) / b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn overdamped_simplified_vanishes_at_origin_and_peaks_at_xpm() {
        let p = fig6();
        let (xm, xp) = peak_positions(&p).unwrap();
        assert!((xp - 8.06).abs() < 0.01);
        assert_eq!(xm, -xp);
        assert!((xp * xp - steady_x2(&p).unwrap().approx).abs() < 1e-10);
        let xs = symmetric_grid(60.0, 24001);
        let d = position_dist_overdamped(&p, &xs, OverdampedForm::Simplified).unwrap();
        assert_eq!(d.density[12000], 0.0);
        let (_, arg) = d.argmax();
        let (_, xs_peak) = simplified_density_peaks(&p).unwrap();
        assert!((arg.abs() - xs_peak).abs() <= 60.0 / 12000.0 + 1e-12);
        // Stationary at the true maximum, not at x+.
        let h = 1e-5;
        let f = |x| log_position_density_overdamped(&p, x, OverdampedForm::Simplified).unwrap();
        assert!(((f(xs_peak + h) - f(xs_peak - h)) / (2.0 * h)).abs() < 1e-6);
        assert!(((f(xp + h) - f(xp - h)) / (2.0 * h)).abs() > 1e-2);
        assert!((xs_peak / xp - (16.0f64 / 12.0).powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn overdamped_full_vs_simplified_normalization() {
        let p = fig6();
        let xs = symmetric_grid(400.0, 80001);
        let raw = |form| -> f64 {
            let v: Vec<f64> = xs
                .iter()
                .map(|&x| log_position_density_overdamped(&p, x, form).unwrap().exp())
                .collect();
            crate::dist::trapezoid(&xs, &v)
        };
        // same prefactor convention: full uses (gamma_g + 12 gamma_f x^2)
        let full = raw(OverdampedForm::Full);
        let simp = raw(OverdampedForm::Simplified);
        assert!(((full - simp) / simp).abs() < 0.01, "{full} {simp}");
    }

    #[test]
    fn gamma_moments_against_quadrature() {
        let p = fig6();
        let x2 = x2_wss(&p).unwrap();
        assert!((x2 - 104.3).abs() < 0.1, "{x2}");
        let xs = symmetric_grid(3000.0, 600_001);
        let d = position_dist_overdamped(&p, &xs, OverdampedForm::Simplified).unwrap();
        assert!(((d.moment(2) - x2) / x2).abs() < 1e-4, "{}", d.moment(2));
        let x4 = x4_wss(&p).unwrap();
        assert!(((d.moment(4) - x4) / x4).abs() < 1e-3, "{} {}", d.moment(4), x4);
    }

    #[test]
    fn optimum_feedback_gamma_identity() {
        let mut p = fig6();
        p.big_gamma_f = p.gamma_f / 18.0;
        let c = derive_coefficients(&p).unwrap();
        let ad = c.momentum_diffusion();
        let want = 3f64.sqrt() * (ad / (2.0 * c.j)).sqrt();
        assert!(((x2_wss(&p).unwrap() - want) / want).abs() < 1e-12);
        let x4 = x4_wss(&p).unwrap();
        assert!(((x4 - 9.0 * ad / (2.0 * c.j)) / x4).abs() < 1e-12);
        let x2 = x2_wss(&p).unwrap();
        assert!(((x4 - 3.0 * x2 * x2) / x4).abs() < 1e-12);
    }

    #[test]
    fn momentum_and_phonon_stats() {
        let p = fig6();
        let xs = symmetric_grid(60.0, 1201);
        let (d, m) = momentum_dist_overdamped(&p, &xs).unwrap();
        assert!((m.p2 - 75.0).abs() < 0.05, "{}", m.p2);
        assert_eq!(m.p4, 3.0 * m.p2 * m.p2);
        assert!(d.is_even(1e-14));
        assert_eq!(d.argmax().1, 0.0);
        let s = phonon_stats_overdamped(&p).unwrap();
        assert!((s.n - 93.26).abs() < 0.01, "{}", s.n);
        assert_eq!(s.g2_asymptotic, 2.04);
        assert_eq!(s.g2_thermal, 2.0);
        let mut big = p;
        big.n0 = 1e20;
        let s = phonon_stats_overdamped(&big).unwrap();
        assert!((s.g2 - 51.0 / 25.0).abs() < 1e-6);
    }

    #[test]
    fn potentials() {
        let xs = linspace::<f64>(-1.0, 1.0, 11);
        let flat = Distribution1D::from_values(DistAxis::X, xs.clone(), vec![1.0; 11]).unwrap();
        let u = potential_from_density(&flat);
        assert!(u.curve.density.iter().all(|&v| v.abs() < 1e-15));
        assert!(u.clipped.is_empty());

        let xs = symmetric_grid(40.0, 801);
        let d = position_dist_overdamped(&fig6(), &xs, OverdampedForm::Simplified).unwrap();
        let u = potential_from_density(&d);
        assert_eq!(u.clipped, vec![400]);
        let (xm, _) = simplified_density_peaks(&fig6()).unwrap();
        let imin = (0..401).min_by(|&a, &b| u.curve.density[a].partial_cmp(&u.curve.density[b]).unwrap()).unwrap();
        assert!((xs[imin] - xm).abs() <= 0.1);

        let g = Distribution1D::from_log_density(
            DistAxis::X,
            xs.clone(),
            &xs.iter().map(|x| -x * x / 8.0).collect::<Vec<_>>(),
        )
        .unwrap();
        let u = potential_from_density(&g);
        for (x, v) in xs.iter().zip(&u.curve.density) {
            assert!((v - x * x / 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_potential_is_single_well() {
        let xs = symmetric_grid(40.0, 401);
        let u = drift_potential(&fig6(), &xs).unwrap();
        assert_eq!(u[200], 0.0);
        for i in 200..400 {
            assert!(u[i + 1] > u[i]);
            assert_eq!(u[i], u[400 - i]);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let p = SystemParams::<f32> {
            omega_z: 40.0,
            gamma_g: 5e-5,
            a_t: 0.5,
            a_p: 0.5,
            n0: 1e8,
            gamma_f: 4.0 / 27.0,
            big_gamma_f: 4.0 / 729.0,
        };
        assert!((steady_n(&p).unwrap() - 64.455).abs() < 1e-2);
        assert!((x2_wss(&p).unwrap() - 104.3).abs() < 0.1);
    }
}
