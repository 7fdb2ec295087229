//! Thin wrappers over `libm` so the crate builds without `std`.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Integer power by repeated squaring; negative exponents invert.
pub fn powi(x: f64, k: i32) -> f64 {
    let mut base = if k < 0 { 1.0 / x } else { x };
    let mut e = k.unsigned_abs();
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// `r^n - s^n` in the factored form `(r - s) * sum r^k s^(n-1-k)`, which
/// keeps full relative accuracy when `r` and `s` are close.
pub fn pow_diff(r: f64, s: f64, n: u32) -> f64 {
    let mut sum = 0.0;
    let mut rk = 1.0;
    for k in 0..n {
        sum += rk * powi(s, (n - 1 - k) as i32);
        rk *= r;
    }
    (r - s) * sum
}

/// `ln(f64::MIN_POSITIVE)`; exponents below this flush to zero.
pub const LN_MIN_POSITIVE: f64 = -708.396_418_532_264_1;

/// `exp(x)` flushed to exactly zero below the smallest normal number.
#[inline]
pub fn exp_flushed(x: f64) -> f64 {
    if x < LN_MIN_POSITIVE {
        0.0
    } else {
        exp(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_repeated_product() {
        assert_eq!(powi(2.0, 10), 1024.0);
        assert_eq!(powi(2.0, -2), 0.25);
        assert_eq!(powi(3.5, 0), 1.0);
    }

    #[test]
    fn pow_diff_is_accurate_for_close_arguments() {
        let r = 1.0 + 1e-12;
        let d = pow_diff(r, 1.0, 3);
        // (1+h)^3 - 1 = 3h + 3h^2 + h^3
        let h = r - 1.0;
        let expect = 3.0 * h + 3.0 * h * h + h * h * h;
        assert!(abs(d - expect) <= 1e-15 * expect);
        assert_eq!(pow_diff(2.0, 1.0, 3), 7.0);
    }

    #[test]
    fn flushed_exponential_underflows_to_zero() {
        assert_eq!(exp_flushed(-1e6), 0.0);
        assert!(exp_flushed(-700.0) > 0.0);
    }
}
