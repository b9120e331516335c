//! Small numerical kernels shared by the solver and the functionals.
//!
//! Differentiation and quadrature work in node-index space: a quantity `f(x)`
//! on nodes `x_j` is integrated as `sum (g_j + g_{j+1}) / 2` with `g = f dx/dj`,
//! which keeps second order on smoothly stretched grids.

use crate::error::{Error, Result};

/// Linear interpolation of `(x, y)` at `t`, clamped outside `[x_0, x_{n-1}]`.
/// `x` must be strictly increasing.
pub fn lerp(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t <= x[0] {
        return y[0];
    }
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let k = x.partition_point(|&v| v <= t).clamp(1, n - 1);
    let w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    y[k - 1] + w * (y[k] - y[k - 1])
}

/// `dy/dj` with 3-point central differences, one-sided second order at the ends.
pub fn index_derivative(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 3, "need at least 3 samples");
    let mut d = vec![0.0; n];
    for j in 1..n - 1 {
        d[j] = 0.5 * (y[j + 1] - y[j - 1]);
    }
    d[0] = -1.5 * y[0] + 2.0 * y[1] - 0.5 * y[2];
    d[n - 1] = 1.5 * y[n - 1] - 2.0 * y[n - 2] + 0.5 * y[n - 3];
    d
}

/// `dx/dj` of grid coordinates with fourth-order 5-point stencils (falls back
/// to [`index_derivative`] below 5 nodes). Grids clustered like `j^3` at an
/// end would lose an order with 3-point stencils.
pub fn metric(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 5 {
        return index_derivative(x);
    }
    let mut d = vec![0.0; n];
    for j in 2..n - 2 {
        d[j] = (x[j - 2] - 8.0 * x[j - 1] + 8.0 * x[j + 1] - x[j + 2]) / 12.0;
    }
    let fwd0 =
        |a: &[f64]| (-25.0 * a[0] + 48.0 * a[1] - 36.0 * a[2] + 16.0 * a[3] - 3.0 * a[4]) / 12.0;
    let fwd1 = |a: &[f64]| (-3.0 * a[0] - 10.0 * a[1] + 18.0 * a[2] - 6.0 * a[3] + a[4]) / 12.0;
    let head = &x[..5];
    let tail: Vec<f64> = x[n - 5..].iter().rev().copied().collect();
    d[0] = fwd0(head);
    d[1] = fwd1(head);
    d[n - 1] = -fwd0(&tail);
    d[n - 2] = -fwd1(&tail);
    d
}

/// `dy/dx` on a monotone grid via the index-space chain rule.
pub fn derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let dx = metric(x);
    let dy = index_derivative(y);
    dy.iter().zip(&dx).map(|(a, b)| a / b).collect()
}

/// Replaces `g[0]` and `g[n-1]` by extrapolation from the nearest interior
/// values, so integrands singular at the ends are never evaluated there.
pub fn extrapolate_ends(g: &mut [f64]) {
    let n = g.len();
    match n {
        0..=2 => {}
        3 => {
            g[0] = g[1];
            g[2] = g[1];
        }
        4 => {
            g[0] = 2.0 * g[1] - g[2];
            g[3] = 2.0 * g[2] - g[1];
        }
        _ => {
            g[0] = 3.0 * g[1] - 3.0 * g[2] + g[3];
            g[n - 1] = 3.0 * g[n - 2] - 3.0 * g[n - 3] + g[n - 4];
        }
    }
}

/// Cumulative trapezoid in index space; `out[0] = 0`.
pub fn cumulative_index_trapezoid(g: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in g.windows(2) {
        acc += 0.5 * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Index-space trapezoid of `g`.
pub fn index_trapezoid(g: &[f64]) -> f64 {
    let n = g.len();
    if n < 2 {
        return 0.0;
    }
    g.iter().sum::<f64>() - 0.5 * (g[0] + g[n - 1])
}

/// `int f dx` on nodes `x` with the index-space trapezoid rule; the end
/// values of `f dx/dj` are extrapolated from the interior.
pub fn integrate(x: &[f64], f: &[f64]) -> f64 {
    let dx = metric(x);
    let mut g: Vec<f64> = f.iter().zip(&dx).map(|(a, b)| a * b).collect();
    extrapolate_ends(&mut g);
    index_trapezoid(&g)
}

/// Solves a tridiagonal system. `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::Shape("tridiagonal bands differ in length".into()));
    }
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return Err(Error::Domain("zero pivot in tridiagonal solve".into()));
    }
    cp[0] = upper[0] / piv;
    dp[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * cp[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::Domain("zero pivot in tridiagonal solve".into()));
        }
        cp[i] = upper[i] / piv;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Quintic smoothstep `xi^3 (10 - 15 xi + 6 xi^2)` with its first two derivatives.
/// Its vanishing end slopes cluster grid nodes at both ends.
pub fn smoothstep5(xi: f64) -> (f64, f64, f64) {
    let phi = xi * xi * xi * (10.0 - 15.0 * xi + 6.0 * xi * xi);
    let one = 1.0 - xi;
    let dphi = 30.0 * xi * xi * one * one;
    let ddphi = 60.0 * xi * one * (1.0 - 2.0 * xi);
    (phi, dphi, ddphi)
}

/// Fritsch-Carlson monotone slopes for samples at unit spacing.
pub fn pchip_slopes(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let delta: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
        return m;
    }
    for j in 1..n - 1 {
        let (a, b) = (delta[j - 1], delta[j]);
        m[j] = if a * b <= 0.0 {
            0.0
        } else {
            2.0 * a * b / (a + b)
        };
    }
    let end = |d0: f64, d1: f64| {
        let v = 0.5 * (3.0 * d0 - d1);
        if v * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && v.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            v
        }
    };
    m[0] = end(delta[0], delta[1]);
    m[n - 1] = end(delta[n - 2], delta[n - 3]);
    m
}

/// Cubic Hermite evaluation at fractional index `jf` with index-space slopes `m`.
pub fn hermite(y: &[f64], m: &[f64], jf: f64) -> f64 {
    let n = y.len();
    let jf = jf.clamp(0.0, (n - 1) as f64);
    let k = (jf.floor() as usize).min(n - 2);
    let t = jf - k as f64;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y[k] + h10 * m[k] + h01 * y[k + 1] + h11 * m[k + 1]
}

/// Inverts an increasing PCHIP curve `y(j)` for the fractional index with `y(jf) = target`.
pub fn invert_pchip(y: &[f64], m: &[f64], target: f64) -> f64 {
    let n = y.len();
    if target <= y[0] {
        return 0.0;
    }
    if target >= y[n - 1] {
        return (n - 1) as f64;
    }
    let k = (y.partition_point(|&v| v <= target).clamp(1, n - 1)) - 1;
    let (mut lo, mut hi) = (k as f64, (k + 1) as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hermite(y, m, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, 1.0, -2.0, 0.5];
        let diag = [4.0, 5.0, 6.0, 3.0];
        let upper = [1.0, 2.0, 1.0, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = [0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += lower[i] * x_true[i - 1];
            }
            if i < 3 {
                rhs[i] += upper[i] * x_true[i + 1];
            }
        }
        let x = thomas(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..4 {
            assert!((x[i] - x_true[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_exact_for_quadratics() {
        let x: Vec<f64> = (0..11).map(|j| 1.0 + 0.1 * j as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v - v).collect();
        let d = derivative(&x, &y);
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - (6.0 * xi - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn metric_exact_for_quartics() {
        let x: Vec<f64> = (0..9)
            .map(|j| (j as f64).powi(4) - 2.0 * (j as f64).powi(3))
            .collect();
        let d = metric(&x);
        for (j, dj) in d.iter().enumerate() {
            let j = j as f64;
            assert!((dj - (4.0 * j.powi(3) - 6.0 * j * j)).abs() < 1e-9, "{j}");
        }
    }

    #[test]
    fn smoothstep_ends() {
        assert_eq!(smoothstep5(0.0), (0.0, 0.0, 0.0));
        let (p, d, dd) = smoothstep5(1.0);
        assert!((p - 1.0).abs() < 1e-15 && d.abs() < 1e-15 && dd.abs() < 1e-15);
        let h = 1e-6;
        let (p1, d1, _) = smoothstep5(0.3 + h);
        let (p0, d0, _) = smoothstep5(0.3 - h);
        let (_, d, dd) = smoothstep5(0.3);
        assert!(((p1 - p0) / (2.0 * h) - d).abs() < 1e-8);
        assert!(((d1 - d0) / (2.0 * h) - dd).abs() < 1e-6);
    }

    #[test]
    fn trapezoid_on_stretched_grid() {
        let n = 401;
        let x: Vec<f64> = (0..n)
            .map(|j| 1.0 + smoothstep5(j as f64 / (n - 1) as f64).0)
            .collect();
        let f: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let exact = 2.0 * 2.0_f64.ln() - 1.0;
        assert!((integrate(&x, &f) - exact).abs() < 1e-7);
    }

    #[test]
    fn lerp_interior_and_clamp() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 10.0, 0.0];
        assert_eq!(lerp(&x, &y, 0.25), 2.5);
        assert_eq!(lerp(&x, &y, 1.5), 5.0);
        assert_eq!(lerp(&x, &y, -3.0), 0.0);
        assert_eq!(lerp(&x, &y, 1.0), 10.0);
    }

    #[test]
    fn pchip_inverse_roundtrip() {
        let y: Vec<f64> = (0..20).map(|j| (j as f64).powf(1.5)).collect();
        let m = pchip_slopes(&y);
        for target in [0.0, 0.3, 5.5, 40.0, y[19]] {
            let jf = invert_pchip(&y, &m, target);
            assert!((hermite(&y, &m, jf) - target).abs() < 1e-10);
        }
    }

    #[test]
    fn extrapolation_exact_for_quadratics() {
        let mut g: Vec<f64> = (0..8).map(|j| (j * j) as f64 + 1.0).collect();
        let keep = g.clone();
        g[0] = f64::NAN;
        g[7] = f64::INFINITY;
        extrapolate_ends(&mut g);
        assert!((g[0] - keep[0]).abs() < 1e-12);
        assert!((g[7] - keep[7]).abs() < 1e-12);
    }
}
