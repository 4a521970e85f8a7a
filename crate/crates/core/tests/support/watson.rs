//! Independent Green's function oracle for `d = 3`: the Fourier triple
//! integral with the `k3` integral done in closed form and the remaining
//! square integrated by composite Gauss-Legendre in polar coordinates,
//! where the `1/r` singularity at the origin cancels against the Jacobian.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn composite(a: f64, b: f64, panels: usize, rule: &[(f64, f64)], mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(x, w) in rule {
            total += 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0));
        }
    }
    total
}

/// `g(v)` for simple random walk on `Z^3`.
pub fn green(v: [i64; 3]) -> f64 {
    let rule = gauss_legendre(24);
    let panels = 6 + v[0].unsigned_abs().max(v[1].unsigned_abs()) as usize;
    let n3 = v[2].unsigned_abs() as i32;
    let b = 1.0 / 3.0;
    // integrand over [0, pi]^2 after the k3 integral, times r
    let f = |k1: f64, k2: f64, r: f64| {
        let a = 1.0 - (k1.cos() + k2.cos()) / 3.0;
        let s = (a * a - b * b).sqrt();
        let rho = (a - s) / b;
        r * (v[0] as f64 * k1).cos() * (v[1] as f64 * k2).cos() * rho.powi(n3) / s
    };
    let lower = composite(0.0, PI / 4.0, panels, &rule, |phi| {
        let (c, s) = (phi.cos(), phi.sin());
        composite(0.0, PI / c, panels, &rule, |r| f(r * c, r * s, r))
    });
    let upper = composite(PI / 4.0, PI / 2.0, panels, &rule, |phi| {
        let (c, s) = (phi.cos(), phi.sin());
        composite(0.0, PI / s, panels, &rule, |r| f(r * c, r * s, r))
    });
    (lower + upper) / (PI * PI)
}
