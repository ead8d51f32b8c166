//! Scalar helpers on top of `libm`, so results do not depend on the host libm.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn powf(x: f64, p: f64) -> f64 {
    libm::pow(x, p)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Logistic sigmoid, evaluated without overflow for either sign.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + exp(-t))
    } else {
        let e = exp(t);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))`.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + ln_1p(exp(-t))
    } else {
        ln_1p(exp(t))
    }
}

/// Writes `exp(scale * x_i - max_j scale * x_j)` into `out` and returns
/// `(sum, shift)`. Every exponent argument is `<= 0`.
pub fn shifted_exp(x: &[f64], scale: f64, out: &mut [f64]) -> (f64, f64) {
    debug_assert_eq!(x.len(), out.len());
    let shift = x.iter().map(|&v| scale * v).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = exp(scale * v - shift);
        sum += *o;
    }
    (sum, shift)
}

/// Index of the first maximal entry.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate().skip(1) {
        if v > x[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_saturates_without_nan() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e4), 1.0);
        assert_eq!(sigmoid(-1e4), 0.0);
    }

    #[test]
    fn softplus_matches_definition() {
        for t in [-30.0, -2.0, 0.0, 0.5, 3.0] {
            assert!((softplus(t) - ln(1.0 + exp(t))).abs() < 1e-14);
        }
        assert_eq!(softplus(1e4), 1e4);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[2.0, 2.0, 1.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
