//! Scalar helpers: smooth cutoffs, norms and small-vector arithmetic.

use num_traits::Float;

pub const PI: f64 = core::f64::consts::PI;

/// Phase-space and spatial vectors never exceed two components.
pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    Float::sqrt(dot(a, a))
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    Float::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

/// `e^{-1/s}` for `s > 0`, zero otherwise. Flat to all orders at 0.
#[inline]
fn flat(s: f64) -> f64 {
    if s <= 0.0 { 0.0 } else { Float::exp(-1.0 / s) }
}

/// Smooth step: 0 for `s <= 0`, 1 for `s >= 1`, C^∞ in between.
#[inline]
pub fn smooth_step(s: f64) -> f64 {
    let a = flat(s);
    let b = flat(1.0 - s);
    if a + b == 0.0 { 0.0 } else { a / (a + b) }
}

/// Plateau bump: 1 for `|u| <= 1`, 0 for `|u| >= 2`.
#[inline]
pub fn bump(u: f64) -> f64 {
    1.0 - smooth_step(Float::abs(u) - 1.0)
}

/// Transition profile `exp(1 - 1/(1-u^2))` on `[0, 1)`, 1 below and 0 above.
#[inline]
pub fn band_profile(u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        Float::exp(1.0 - 1.0 / (1.0 - u * u))
    }
}

/// Radial low-pass: 1 for `k <= lambda`, 0 for `k >= 2 lambda`.
#[inline]
pub fn lowpass_multiplier(k: f64, lambda: f64) -> f64 {
    band_profile((k - lambda) / lambda)
}

/// Complementary error function, relative accuracy near 1e-15.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Round a positive count down to a power of two.
#[inline]
pub fn dyadic_floor(n: usize) -> usize {
    debug_assert!(n > 0);
    1usize << (usize::BITS - 1 - n.leading_zeros())
}

#[inline]
pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Periodic reduction of `x` into `[-half, half)`.
#[inline]
pub fn wrap(x: f64, half: f64) -> f64 {
    let p = 2.0 * half;
    let y = x - p * Float::floor((x + half) / p);
    if y >= half { y - p } else { y }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_plateau_and_support() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 1.0);
        assert_eq!(bump(-2.0), 0.0);
        assert_eq!(bump(3.5), 0.0);
        let m = bump(1.5);
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn band_profile_endpoints() {
        assert_eq!(band_profile(0.0), 1.0);
        assert_eq!(band_profile(1.0), 0.0);
        assert!(band_profile(0.5) > 0.0 && band_profile(0.5) < 1.0);
    }

    #[test]
    fn wrap_into_box() {
        assert_eq!(wrap(0.5, 1.0), 0.5);
        assert!((wrap(1.5, 1.0) + 0.5).abs() < 1e-15);
        assert!((wrap(-1.5, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(wrap(1.0, 1.0), -1.0);
    }

    #[test]
    fn dyadic_rounding() {
        assert_eq!(dyadic_floor(1), 1);
        assert_eq!(dyadic_floor(7), 4);
        assert_eq!(dyadic_floor(8), 8);
    }

    #[test]
    fn erfc_known_values() {
        assert!((erfc(0.0) - 1.0).abs() < 1e-15);
        assert!((erfc(1.0) - 0.157_299_207_050_285_1).abs() < 1e-15);
    }
}
