//! Tabulated one-dimensional densities.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistAxis {
    X,
    P,
    Epsilon,
    /// Non-equilibrium potential over x, in units of k_B T.
    Potential,
}

impl fmt::Display for DistAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DistAxis::X => "x",
            DistAxis::P => "p",
            DistAxis::Epsilon => "epsilon",
            DistAxis::Potential => "x",
        };
        f.write_str(s)
    }
}

/// A density sampled on a (possibly non-uniform) grid.
///
/// `raw_integral` is the trapezoidal integral of the values before they were
/// rescaled; it is 1 for distributions that were already normalized.
#[derive(Debug, Clone)]
pub struct Distribution1D<T> {
    pub axis: DistAxis,
    pub points: Vec<T>,
    pub density: Vec<T>,
    pub raw_integral: T,
    /// Optional per-point half-width of a 95% interval (histograms).
    pub uncertainty: Option<Vec<T>>,
}

/// Trapezoidal integral of `values` over `points`.
pub fn trapezoid<T: Real>(points: &[T], values: &[T]) -> T {
    debug_assert_eq!(points.len(), values.len());
    let half = lit::<T>(0.5);
    compensated_sum(
        points
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| half * (x[1] - x[0]) * (y[0] + y[1])),
    )
}

impl<T: Real> Distribution1D<T> {
    /// Normalizes `values` on `points`; fails if the mass is not positive.
    pub fn from_values(axis: DistAxis, points: Vec<T>, values: Vec<T>) -> Result<Self> {
        if points.len() != values.len() || points.len() < 2 {
            return Err(Error::domain(
                "Distribution1D",
                format!(
                    "need matching point/value arrays of length >= 2 (got {} and {})",
                    points.len(),
                    values.len()
                ),
            ));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("Distribution1D", "grid must be strictly increasing"));
        }
        let mass = trapezoid(&points, &values);
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::Numerical(format!(
                "density has non-positive or non-finite mass {}",
                mass
            )));
        }
        let density = values.into_iter().map(|v| v / mass).collect();
        Ok(Distribution1D {
            axis,
            points,
            density,
            raw_integral: mass,
            uncertainty: None,
        })
    }

    /// Builds a density from its logarithm (up to an additive constant).
    /// The maximum is subtracted before exponentiating.
    pub fn from_log_density(axis: DistAxis, points: Vec<T>, log_values: &[T]) -> Result<Self> {
        let max = log_values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return Err(Error::Numerical("log-density has no finite values".into()));
        }
        let values = log_values
            .iter()
            .map(|&l| if l.is_finite() { (l - max).exp() } else { T::zero() })
            .collect();
        Self::from_values(axis, points, values)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integral(&self) -> T {
        trapezoid(&self.points, &self.density)
    }

    /// Trapezoidal moment `int y^k W(y) dy`.
    pub fn moment(&self, k: i32) -> T {
        let f: Vec<T> = self
            .points
            .iter()
            .zip(&self.density)
            .map(|(&y, &w)| y.powi(k) * w)
            .collect();
        trapezoid(&self.points, &f)
    }

    pub fn mean(&self) -> T {
        self.moment(1)
    }

    /// Index and abscissa of the largest sample.
    pub fn argmax(&self) -> (usize, T) {
        let mut best = 0;
        for (i, &w) in self.density.iter().enumerate() {
            if w > self.density[best] {
                best = i;
            }
        }
        (best, self.points[best])
    }

    /// Linear interpolation; zero outside the tabulated range.
    pub fn value_at(&self, y: T) -> T {
        let pts = &self.points;
        let n = pts.len();
        if y < pts[0] || y > pts[n - 1] {
            return T::zero();
        }
        let idx = match pts.binary_search_by(|p| p.partial_cmp(&y).expect("finite grid")) {
            Ok(i) => return self.density[i],
            Err(i) => i,
        };
        let (x0, x1) = (pts[idx - 1], pts[idx]);
        let s = (y - x0) / (x1 - x0);
        self.density[idx - 1] * (T::one() - s) + self.density[idx] * s
    }

    /// `int |W_self - W_other| dy`, evaluated on the union of both grids
    /// restricted to their overlap, plus the mass of each outside the overlap.
    pub fn l1_distance(&self, other: &Self) -> T {
        let lo = self.points[0].max(other.points[0]);
        let hi = self.points[self.len() - 1].min(other.points[other.len() - 1]);
        let mut grid: Vec<T> = self
            .points
            .iter()
            .chain(other.points.iter())
            .copied()
            .filter(|&y| y >= lo && y <= hi)
            .collect();
        grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        grid.dedup();
        let diff: Vec<T> = grid
            .iter()
            .map(|&y| (self.value_at(y) - other.value_at(y)).abs())
            .collect();
        let inner = trapezoid(&grid, &diff);
        let outside = |d: &Self| {
            let m_in: Vec<T> = grid.iter().map(|&y| d.value_at(y)).collect();
            (d.integral() - trapezoid(&grid, &m_in)).max(T::zero())
        };
        inner + outside(self) + outside(other)
    }

    /// Same grid, values replaced by their mirror image `W(-y)`.
    pub fn is_even(&self, rel_tol: T) -> bool {
        let n = self.len();
        let max = self.density.iter().copied().fold(T::zero(), T::max);
        (0..n).all(|i| {
            (self.points[i] + self.points[n - 1 - i]).abs() <= rel_tol * self.points[n - 1].abs()
                && (self.density[i] - self.density[n - 1 - i]).abs() <= rel_tol * max
        })
    }

    /// Writes `axis,density[,uncertainty]` rows after an optional comment header.
    pub fn write_csv<W: Write>(&self, mut out: W, header_comment: &str) -> Result<()> {
        for line in header_comment.lines() {
            writeln!(out, "# {}", line)?;
        }
        match &self.uncertainty {
            Some(u) => {
                writeln!(out, "{},density,uncertainty", self.axis)?;
                for ((y, w), e) in self.points.iter().zip(&self.density).zip(u) {
                    writeln!(out, "{},{},{}", y, w, e)?;
                }
            }
            None => {
                let col = if self.axis == DistAxis::Potential { "U" } else { "density" };
                writeln!(out, "{},{}", self.axis, col)?;
                for (y, w) in self.points.iter().zip(&self.density) {
                    writeln!(out, "{},{}", y, w)?;
                }
            }
        }
        Ok(())
    }
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + step * T::from_usize_lossy(i)
            }
        })
        .collect()
}

/// `n` points on `[-half_width, half_width]`, exactly mirror-symmetric.
pub fn symmetric_grid<T: Real>(half_width: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "grid needs at least two points");
    let step = (half_width + half_width) / T::from_usize_lossy(n - 1);
    let center = lit::<T>((n - 1) as f64 / 2.0);
    (0..n)
        .map(|i| (T::from_usize_lossy(i) - center) * step)
        .collect()
}
