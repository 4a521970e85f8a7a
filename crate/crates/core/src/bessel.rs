//! Exponentially scaled modified Bessel functions `e^{-x} I_n(x)` for
//! integer order, the one-axis transition kernel of the continuous-time walk.

use std::f64::consts::PI;

/// Above this argument (relative to the order) the asymptotic series is used.
fn asymptotic_threshold(n: u64) -> f64 {
    let n = n as f64;
    (2.0 * n * n).max(60.0)
}

/// `e^{-x} I_n(x)` for `x >= 0`, absolute error around machine epsilon.
pub fn scaled_bessel_i(n: u64, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x >= asymptotic_threshold(n) {
        asymptotic(n, x)
    } else {
        trapezoid(n, x)
    }
}

// e^{-x} I_n(x) = (1/pi) int_0^pi exp(x (cos t - 1)) cos(n t) dt. The
// integrand is periodic and entire, so the trapezoid rule converges
// geometrically; the aliasing error is of order I_{M-n}(x)/I_0(x) for M
// points on the full period.
fn trapezoid(n: u64, x: f64) -> f64 {
    let m = n as f64 + 10.0 * x.sqrt() + 24.0;
    let half = (m / 2.0).ceil() as usize;
    let h = PI / half as f64;
    let mut sum = 0.5 * (1.0 + (-2.0 * x).exp() * if n % 2 == 0 { 1.0 } else { -1.0 });
    for k in 1..half {
        let t = k as f64 * h;
        sum += (x * (t.cos() - 1.0)).exp() * (n as f64 * t).cos();
    }
    sum / half as f64
}

// Hankel expansion, summed until the terms stop shrinking.
fn asymptotic(n: u64, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term: f64 = 1.0;
    let mut sum: f64 = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * k * x);
        if next.abs() >= term.abs() || next.abs() < 1e-18 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
        if k > 500.0 {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}
