//! Classical fixed-step Runge–Kutta on fixed-size state arrays.

use crate::scalar::Real;

/// Advances `x` by one classical RK4 step of size `dt` starting at `t`.
pub fn rk4_step<T: Real, const N: usize>(
    mut f: impl FnMut(T, &[T; N]) -> [T; N],
    t: T,
    x: &[T; N],
    dt: T,
) -> [T; N] {
    let half = dt / T::lit(2.0);
    let k1 = f(t, x);
    let k2 = f(t + half, &axpy(x, half, &k1));
    let k3 = f(t + half, &axpy(x, half, &k2));
    let k4 = f(t + dt, &axpy(x, dt, &k3));
    let sixth = dt / T::lit(6.0);
    let mut out = *x;
    for i in 0..N {
        out[i] = x[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

#[inline]
fn axpy<T: Real, const N: usize>(x: &[T; N], a: T, k: &[T; N]) -> [T; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] = x[i] + a * k[i];
    }
    out
}

/// Number of samples on `[0, t_end]` at spacing `dt`, endpoint included when it lands on the grid.
pub fn sample_count<T: Real>(t_end: T, dt: T) -> usize {
    // Ratios such as 100 / 0.01 land a hair below the integer in binary.
    let steps = (t_end / dt + T::lit(1e-9)).floor();
    steps.to_usize().unwrap_or(0) + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let f = |_t: f64, x: &[f64; 1]| [-x[0]];
        let run = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut x = [1.0];
            for k in 0..n {
                x = rk4_step(f, k as f64 * dt, &x, dt);
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let ratio = run(0.1) / run(0.05);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sample_count_includes_endpoint() {
        assert_eq!(sample_count(100.0, 0.01), 10_001);
        assert_eq!(sample_count(1.0, 0.3), 4);
        assert_eq!(sample_count(0.3f32, 0.1), 4);
    }
}
