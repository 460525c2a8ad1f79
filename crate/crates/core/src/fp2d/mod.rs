//! Finite-volume solver for the truncated Wigner equation on a rectangular
//! phase-space grid.
//!
//! Values live at cell centres `(x_i, p_j)` of an exactly mirror-symmetric
//! grid and are stored row-major with `x` as the outer index. The density
//! is normalized as `sum W dx dp = 1`.

mod io;
mod scheme;

pub use io::{read_binary, write_binary, write_field_csv, write_series_csv, BINARY_MAGIC};
pub use scheme::{
    boundary_ratio, stability_limit, step, Evolver, FieldSample, SteadyStateReport, DEFAULT_SAFETY,
    DEFAULT_STEADY_TOL, STEADY_WINDOW_PERIODS,
};

use crate::analytic;
use crate::dist::{symmetric_grid, DistAxis, Distribution1D};
use crate::error::{Error, Result};
use crate::model::{classify_regime, Regime, SystemParams};
use crate::moments::MomentState;
use crate::scalar::{compensated_sum, lit, Real};

pub const MIN_CELLS: usize = 16;
pub const MIN_SPAN_SIGMAS: f64 = 4.0;
/// Cells required across the narrowest predicted peak, measured at
/// `PEAK_LEVEL` of its maximum.
pub const CELLS_PER_PEAK: f64 = 8.0;
pub const PEAK_LEVEL: f64 = 1e-2;
/// Largest Gaussian mass allowed outside the grid at initialization.
pub const MAX_OUTSIDE_MASS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid<T> {
    pub nx: usize,
    pub np: usize,
    pub x_max: T,
    pub p_max: T,
    pub dx: T,
    pub dp: T,
    pub xs: Vec<T>,
    pub ps: Vec<T>,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(nx: usize, np: usize, x_max: T, p_max: T) -> Result<Self> {
        if nx < MIN_CELLS || np < MIN_CELLS {
            return Err(Error::domain(
                "PhaseGrid",
                format!("need at least {} cells per axis, got {}x{}", MIN_CELLS, nx, np),
            ));
        }
        if !(x_max > T::zero() && p_max > T::zero() && x_max.is_finite() && p_max.is_finite()) {
            return Err(Error::domain("PhaseGrid", "extents must be positive and finite"));
        }
        let xs = symmetric_grid(x_max, nx);
        let ps = symmetric_grid(p_max, np);
        Ok(PhaseGrid {
            nx,
            np,
            x_max,
            p_max,
            dx: xs[1] - xs[0],
            dp: ps[1] - ps[0],
            xs,
            ps,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> T {
        self.dx * self.dp
    }
}

/// Which variance sets the extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridStart {
    /// Larger of the thermal and feedback variances; holds a hot initial state.
    Hot,
    /// Feedback steady variance.
    Steady,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub np: usize,
    pub span_sigmas: f64,
    pub start: GridStart,
}

impl GridSpec {
    pub fn square(n: usize, span_sigmas: f64, start: GridStart) -> Self {
        GridSpec {
            nx: n,
            np: n,
            span_sigmas,
            start,
        }
    }
}

/// Width scale of the narrowest feature of the predicted steady state: the
/// curvature width of the overdamped density at its maxima in the overdamped
/// regime, else `sqrt(<x^2>)`.
pub fn narrowest_peak_sigma<T: Real>(params: &SystemParams<T>) -> Result<T> {
    let x2 = analytic::x2_scale(params)?;
    let mut sigma = x2.sqrt();
    let overdamped = classify_regime(params, x2).regime == Regime::Overdamped;
    if let (true, Ok((xm, xp))) = (overdamped, analytic::simplified_density_peaks(params)) {
        if xp > T::zero() && xm < xp {
            let h = xp * lit(1e-3);
            let f = |x: T| {
                analytic::log_position_density_overdamped(params, x, analytic::OverdampedForm::Full)
            };
            let curv = (f(xp + h)? - lit::<T>(2.0) * f(xp)? + f(xp - h)?) / (h * h);
            if curv < T::zero() {
                sigma = sigma.min((-T::one() / curv).sqrt());
            }
        }
    }
    Ok(sigma)
}

/// Extents `span_sigmas * sqrt(x2)` on both axes.
pub fn build_grid<T: Real>(params: &SystemParams<T>, spec: GridSpec) -> Result<PhaseGrid<T>> {
    params.validate()?;
    if !(spec.span_sigmas >= MIN_SPAN_SIGMAS) {
        return Err(Error::domain(
            "build_grid",
            format!("span_sigmas {} < {}", spec.span_sigmas, MIN_SPAN_SIGMAS),
        ));
    }
    let steady = analytic::x2_scale(params)?;
    let x2 = match spec.start {
        GridStart::Steady => steady,
        GridStart::Hot => steady.max(analytic::no_feedback_steady(params)?.x2),
    };
    let extent = lit::<T>(spec.span_sigmas) * x2.sqrt();
    let grid = PhaseGrid::new(spec.nx, spec.np, extent, extent)?;
    let sigma = narrowest_peak_sigma(params)?;
    let width = lit::<T>(2.0 * (-2.0 * PEAK_LEVEL.ln()).sqrt()) * sigma;
    let needed = width / lit(CELLS_PER_PEAK);
    if grid.dx > needed || grid.dp > needed {
        return Err(Error::domain(
            "build_grid",
            format!(
                "cell size {} does not resolve the narrowest peak (sigma {}, need <= {})",
                grid.dx.max(grid.dp),
                sigma,
                needed
            ),
        ));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerField<T> {
    pub grid: PhaseGrid<T>,
    pub values: Vec<T>,
    pub time: T,
    /// Completed steps; selects the operator order of the next step.
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMoments<T> {
    pub state: MomentState<T>,
    pub p4: T,
    pub mass: T,
    pub n: T,
    /// `<eps^2 - eps>` with `eps = (x^2 + p^2)/2`.
    pub n2: T,
    pub g2: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport<T> {
    pub mass_error: T,
    /// `min W / max W`.
    pub min_ratio: T,
    /// `max |W(x,p) - W(-x,-p)| / max W`.
    pub parity_defect: T,
}

impl<T: Real> InvariantReport<T> {
    pub fn holds(&self, mass_tol: T, parity_tol: T) -> bool {
        self.mass_error <= mass_tol && self.min_ratio >= -lit::<T>(1e-8) && self.parity_defect <= parity_tol
    }
}

impl<T: Real> WignerField<T> {
    pub fn from_fn(grid: &PhaseGrid<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for &x in &grid.xs {
            for &p in &grid.ps {
                values.push(f(x, p));
            }
        }
        let mut field = WignerField {
            grid: grid.clone(),
            values,
            time: T::zero(),
            steps: 0,
        };
        field.normalize()?;
        Ok(field)
    }

    /// Isotropic Gaussian with `<x^2> = <p^2> = n0 + 1/2`.
    pub fn init_thermal(grid: &PhaseGrid<T>, n0: T) -> Result<Self> {
        if !(n0 >= T::zero()) {
            return Err(Error::param("n0", "must be >= 0"));
        }
        Self::init_gaussian(grid, n0 + lit(0.5), n0 + lit(0.5))
    }

    /// Zero-mean uncorrelated Gaussian with the given variances.
    pub fn init_gaussian(grid: &PhaseGrid<T>, var_x: T, var_p: T) -> Result<Self> {
        let inside = |ext: T, var: T| libm::erf(ext.as_f64() / (2.0 * var.as_f64()).sqrt());
        let outside = 1.0 - inside(grid.x_max, var_x) * inside(grid.p_max, var_p);
        if outside > MAX_OUTSIDE_MASS {
            return Err(Error::domain(
                "init_gaussian",
                format!("Gaussian mass {:e} falls outside the grid", outside),
            ));
        }
        let (ax, ap) = (lit::<T>(0.5) / var_x, lit::<T>(0.5) / var_p);
        Self::from_fn(grid, |x, p| (-(ax * x * x + ap * p * p)).exp())
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.grid.np + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.grid.np..(i + 1) * self.grid.np]
    }

    pub fn mass(&self) -> T {
        compensated_sum(self.values.iter().copied()) * self.grid.cell_area()
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::Numerical(format!("field mass {} cannot be normalized", m)));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(())
    }

    pub fn invariants(&self) -> InvariantReport<T> {
        let max = self.max_value();
        let min = self.values.iter().copied().fold(T::infinity(), T::min);
        let n = self.values.len();
        let mut parity = T::zero();
        for k in 0..n / 2 + 1 {
            parity = parity.max((self.values[k] - self.values[n - 1 - k]).abs());
        }
        InvariantReport {
            mass_error: (self.mass() - T::one()).abs(),
            min_ratio: min / max,
            parity_defect: parity / max,
        }
    }

    /// Phase-space moments by cell quadrature.
    pub fn moments(&self) -> FieldMoments<T> {
        let g = &self.grid;
        let half = lit::<T>(0.5);
        // Per-row sums over p, then combined over x.
        let mut acc: [Vec<T>; 12] = std::array::from_fn(|_| Vec::new());
        for a in acc.iter_mut() {
            a.reserve(g.nx);
        }
        for i in 0..g.nx {
            let x = g.xs[i];
            let row = self.row(i);
            let (mut s0, mut s1, mut s2, mut s4) = (T::zero(), T::zero(), T::zero(), T::zero());
            let (mut e2, mut e1) = (T::zero(), T::zero());
            for (&p, &w) in g.ps.iter().zip(row) {
                let p2 = p * p;
                let eps = half * (x * x + p2);
                s0 += w;
                s1 += p * w;
                s2 += p2 * w;
                s4 += p2 * p2 * w;
                e1 += eps * w;
                e2 += eps * eps * w;
            }
            let x2 = x * x;
            let x3 = x2 * x;
            let vals = [
                s0,
                x2 * s0,
                s2,
                x * s1,
                x3 * s1,
                x2 * x2 * s0,
                x2 * x3 * s1,
                x2 * x2 * x2 * s0,
                s4,
                e1,
                e2,
                x2 * s2,
            ];
            for (a, v) in acc.iter_mut().zip(vals) {
                a.push(v);
            }
        }
        let area = g.cell_area();
        let tot: Vec<T> = acc.into_iter().map(|a| compensated_sum(a) * area).collect();
        let mass = tot[0];
        let m = |k: usize| tot[k] / mass;
        let state = MomentState {
            x2: m(1),
            p2: m(2),
            xp: m(3),
            x3p: m(4),
            x4: m(5),
            x5p: m(6),
            x6: m(7),
        };
        let eps = m(9);
        let n = eps - half;
        let n2 = m(10) - eps;
        FieldMoments {
            state,
            p4: m(8),
            mass,
            n,
            n2,
            g2: (n2 - n) / (n * n),
        }
    }

    pub fn marginal_x(&self) -> Result<Distribution1D<T>> {
        let g = &self.grid;
        let vals = (0..g.nx)
            .map(|i| compensated_sum(self.row(i).iter().copied()) * g.dp)
            .collect();
        Distribution1D::from_values(DistAxis::X, g.xs.clone(), vals)
    }

    pub fn marginal_p(&self) -> Result<Distribution1D<T>> {
        let g = &self.grid;
        let vals = (0..g.np)
            .map(|j| compensated_sum((0..g.nx).map(|i| self.at(i, j))) * g.dx)
            .collect();
        Distribution1D::from_values(DistAxis::P, g.ps.clone(), vals)
    }

    /// Energy marginal by annular binning of `eps = (x^2 + p^2)/2` up to the
    /// inscribed circle. Each cell is split into `sub x sub` subcells to
    /// suppress aliasing. `bin_width` defaults to `4 max(dx, dp)^2`; lattice noise in
    /// the L1 distance is about 0.03 at `sub = 4` and 0.01 at `sub = 8`.
    pub fn marginal_energy(&self, bin_width: Option<T>, sub: usize) -> Result<Distribution1D<T>> {
        let g = &self.grid;
        let h = g.dx.max(g.dp);
        let width = bin_width.unwrap_or(lit::<T>(4.0) * h * h);
        if !(width >= h * h) {
            return Err(Error::domain("marginal_energy", "bin width below the cell-area scale"));
        }
        let e_max = lit::<T>(0.5) * g.x_max.min(g.p_max).powi(2);
        let nbins = (e_max / width).floor().to_usize().unwrap_or(0);
        if nbins < 2 {
            return Err(Error::domain("marginal_energy", "grid too small for two energy bins"));
        }
        let sub = sub.max(1);
        let subw = T::one() / T::from_usize_lossy(sub);
        let offs: Vec<T> = (0..sub)
            .map(|k| (T::from_usize_lossy(k) + lit(0.5)) * subw - lit(0.5))
            .collect();
        let mut bins = vec![T::zero(); nbins];
        for i in 0..g.nx {
            for j in 0..g.np {
                let w = self.at(i, j);
                if w == T::zero() {
                    continue;
                }
                let share = w * subw * subw;
                for &ox in &offs {
                    let x = g.xs[i] + ox * g.dx;
                    for &op in &offs {
                        let p = g.ps[j] + op * g.dp;
                        let e = lit::<T>(0.5) * (x * x + p * p);
                        if let Some(b) = (e / width).floor().to_usize() {
                            if b < nbins {
                                bins[b] += share;
                            }
                        }
                    }
                }
            }
        }
        let centres = (0..nbins)
            .map(|b| (T::from_usize_lossy(b) + lit(0.5)) * width)
            .collect();
        let dens = bins.into_iter().map(|m| m / width).collect();
        Distribution1D::from_values(DistAxis::Epsilon, centres, dens)
    }
}
