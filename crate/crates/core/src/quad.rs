//! Fixed-order Gauss-Legendre quadrature.

use crate::scalar::{compensated_sum, lit, Real};

/// Nodes and weights of the `n`-point rule on [-1, 1] (Newton on P_n).
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0_f64, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = lit(-z);
        nodes[n - 1 - i] = lit(z);
        weights[i] = lit(w);
        weights[n - 1 - i] = lit(w);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre over `panels` equal sub-intervals of [a, b].
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, panels: usize, order: usize) -> T {
    let (nodes, weights) = gauss_legendre::<T>(order);
    let h = (b - a) / T::from_usize_lossy(panels);
    let half = lit::<T>(0.5) * h;
    compensated_sum((0..panels).map(|k| {
        let mid = a + h * (T::from_usize_lossy(k) + lit(0.5));
        nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .fold(T::zero(), |acc, v| acc + v)
            * half
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre::<f64>(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            // degree 2n-1 monomial integrates exactly
            let deg = 2 * n as i32 - 2;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((got - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn composite_rule_on_exponential() {
        let v = integrate(|x: f64| (-x).exp(), 0.0, 30.0, 60, 8);
        assert!((v - (1.0 - (-30.0f64).exp())).abs() < 1e-14);
    }
}
