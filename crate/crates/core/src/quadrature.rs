//! Quadrature and finite-difference helpers on (possibly nonuniform) node sets.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const GAUSS2: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Integral over `[x[i], x[i+1]]` of the cubic through the four nodes around
/// the panel. Falls back to the trapezoid when the stencil is badly graded.
fn panel_integral(x: &[f64], f: &[f64], i: usize) -> f64 {
    let a = x[i];
    let b = x[i + 1];
    let w = b - a;
    let trap = 0.5 * w * (f[i] + f[i + 1]);
    let n = x.len();
    if n < 4 {
        return trap;
    }
    let j = i.saturating_sub(1).min(n - 4);
    let xs = &x[j..j + 4];
    let fs = &f[j..j + 4];
    let extent = xs[3] - xs[0];
    let min_gap = xs.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    if extent > 8.0 * w || min_gap < w / 8.0 {
        return trap;
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * w;
    let g1 = mid - half * GAUSS2;
    let g2 = mid + half * GAUSS2;
    half * (lagrange4(xs, fs, g1) + lagrange4(xs, fs, g2))
}

fn lagrange4(xs: &[f64], fs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..4 {
        let mut l = 1.0;
        for m in 0..4 {
            if m != k {
                l *= (t - xs[m]) / (xs[k] - xs[m]);
            }
        }
        acc += l * fs[k];
    }
    acc
}

/// Fourth-order integral of sampled values over the whole node range.
pub fn integrate(x: &[f64], f: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), f.len());
    (0..x.len().saturating_sub(1))
        .map(|i| panel_integral(x, f, i))
        .sum()
}

/// Running integral from `x[0]`; `out[0] = 0`.
pub fn cumulative(x: &[f64], f: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), f.len());
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..x.len().saturating_sub(1) {
        acc += panel_integral(x, f, i);
        out.push(acc);
    }
    out
}

/// Running integral of `s^k g(s)` from `x[0]`, interpolating only `g` by
/// local cubics and integrating the power weight exactly.
pub fn cumulative_weighted(x: &[f64], g: &[f64], k: u32) -> Vec<f64> {
    debug_assert_eq!(x.len(), g.len());
    let n = x.len();
    let (gx, gw) = gauss_legendre(k as usize / 2 + 3);
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..n.saturating_sub(1) {
        let a = x[i];
        let b = x[i + 1];
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let j = i.saturating_sub(1).min(n.saturating_sub(4));
        let graded = n >= 4 && {
            let xs = &x[j..j + 4];
            let gaps = xs.windows(2).map(|p| p[1] - p[0]);
            xs[3] - xs[0] <= 8.0 * (b - a) && gaps.fold(f64::INFINITY, f64::min) >= (b - a) / 8.0
        };
        let panel: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(&t, &w)| {
                let s = mid + half * t;
                let v = if graded {
                    lagrange4(&x[j..j + 4], &g[j..j + 4], s)
                } else {
                    g[i] + (g[i + 1] - g[i]) * (s - a) / (b - a)
                };
                w * s.powi(k as i32) * v
            })
            .sum();
        acc += half * panel;
        out.push(acc);
    }
    out
}

/// Composite trapezoid rule.
pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xw, fw)| 0.5 * (xw[1] - xw[0]) * (fw[0] + fw[1]))
        .sum()
}

/// Finite-difference weights (Fornberg) for derivatives `0..=order` at `z`
/// from nodes `x`. Returns `w[k][j]`, weight of node `j` for derivative `k`.
pub fn fd_weights(z: f64, x: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of order `order` at every node using a centred stencil of
/// `width` nodes (shifted one-sided near the ends).
pub fn differentiate(x: &[f64], f: &[f64], order: usize, width: usize) -> Vec<f64> {
    let n = x.len();
    let width = width.min(n);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(n - width);
            let xs = &x[start..start + width];
            let w = fd_weights(x[i], xs, order);
            w[order]
                .iter()
                .zip(&f[start..start + width])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_cumulative_is_exact_for_cubic_times_power() {
        let x: Vec<f64> = (0..=20).map(|i| 0.05 * i as f64).collect();
        let g: Vec<f64> = x.iter().map(|t| 1.0 - t * t + 0.5 * t * t * t).collect();
        let c = cumulative_weighted(&x, &g, 4);
        for (t, v) in x.iter().zip(&c) {
            let exact = t.powi(5) / 5.0 - t.powi(7) / 7.0 + t.powi(8) / 16.0;
            assert!((v - exact).abs() < 1e-15, "{t} {v} {exact}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
        // ∫ x^10 over [-1, 1] = 2/11, degree 10 ≤ 2·6 − 1
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_rule_is_exact_for_cubics_on_nonuniform_nodes() {
        let x: Vec<f64> = (0..17).map(|i| (i as f64 / 16.0).powf(1.3) * 2.0).collect();
        let f: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + 3.0 * t * t - t.powi(3)).collect();
        let exact = |t: f64| t - t * t + t.powi(3) - t.powi(4) / 4.0;
        let got = integrate(&x, &f);
        assert!((got - exact(2.0)).abs() < 1e-13, "{got}");
        let cum = cumulative(&x, &f);
        for (xi, ci) in x.iter().zip(&cum) {
            assert!((ci - exact(*xi)).abs() < 1e-13);
        }
    }

    #[test]
    fn fourth_order_convergence_for_smooth_integrand() {
        let err = |n: usize| {
            let x: Vec<f64> = (0..=n).map(|i| i as f64 * std::f64::consts::PI / n as f64).collect();
            let f: Vec<f64> = x.iter().map(|t| t.sin()).collect();
            (integrate(&x, &f) - 2.0).abs()
        };
        let ratio = err(40) / err(80);
        assert!(ratio > 12.0, "observed ratio {ratio}");
    }

    #[test]
    fn fornberg_recovers_classic_stencils() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fd_weights(0.0, &x, 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn differentiate_handles_ends() {
        let x: Vec<f64> = (0..30).map(|i| 0.1 * i as f64).collect();
        let f: Vec<f64> = x.iter().map(|t| t.powi(3)).collect();
        let d = differentiate(&x, &f, 1, 5);
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - 3.0 * xi * xi).abs() < 1e-10);
        }
    }
}
