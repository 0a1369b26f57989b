//! Standard normal helpers that stay accurate deep in the lower tail.
//!
//! Below x = -8 the ratio φ/Φ and log Φ are evaluated through the Mills
//! ratio Φ(x)/φ(x) = R(-x), computed from its continued fraction, which
//! avoids the underflow of Φ itself.

use crate::{Error, Result};

/// ln √(2π).
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const TAIL_SWITCH: f64 = -8.0;
const CF_DEPTH: usize = 80;

/// Mills ratio R(t) = Q(t)/φ(t) for t ≥ 8, from
/// R(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))).
fn mills_ratio_tail(t: f64) -> f64 {
    let mut f = t;
    for k in (1..=CF_DEPTH).rev() {
        f = t + k as f64 / f;
    }
    1.0 / f
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        normal_pdf(x) * mills_ratio_tail(-x)
    } else {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    }
}

pub fn log_normal_cdf(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio_tail(-x).ln()
    } else if x > 0.0 {
        (-0.5 * libm::erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else {
        (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln()
    }
}

/// Inverse Mills ratio φ(x)/Φ(x); NaN propagates.
pub fn inverse_mills(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        1.0 / mills_ratio_tail(-x)
    } else {
        normal_pdf(x) / (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2))
    }
}

/// f′(x) = -φ(x)/Φ(x), the derivative of log Φ.
pub fn stable_normal_ratio(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::NonFinite("normal ratio argument"));
    }
    Ok(-inverse_mills(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratio_at_zero() {
        let expect = -2.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((stable_normal_ratio(0.0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn ratio_tails() {
        // φ/Φ(x) ≈ -x - 1/x as x → -∞.
        let far = stable_normal_ratio(-1e6).unwrap();
        assert!((far / (-1e6 - 1e-6) - 1.0).abs() < 1e-14);
        assert!(stable_normal_ratio(40.0).unwrap().abs() < 1e-300);
        assert!(stable_normal_ratio(f64::NAN).is_err());
    }

    #[test]
    fn tail_switch_is_continuous() {
        let below = stable_normal_ratio(TAIL_SWITCH - 1e-12).unwrap();
        let above = stable_normal_ratio(TAIL_SWITCH + 1e-12).unwrap();
        assert!((below - above).abs() < 1e-10 * above.abs());
        let lb = log_normal_cdf(TAIL_SWITCH - 1e-12);
        let la = log_normal_cdf(TAIL_SWITCH + 1e-12);
        assert!((lb - la).abs() < 1e-10 * la.abs());
    }

    #[test]
    fn log_cdf_reference_values() {
        assert!((log_normal_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // log Φ(-10) = -53.23128515051247
        assert!((log_normal_cdf(-10.0) + 53.231_285_150_512_47).abs() < 1e-11);
        // log Φ(5) = -2.866516129637636e-7
        assert!((log_normal_cdf(5.0) + 2.866_516_129_637_636e-7).abs() < 1e-20);
    }

    proptest! {
        #[test]
        fn ratio_is_negative_and_finite(x in -1e4f64..30.0) {
            let r = stable_normal_ratio(x).unwrap();
            prop_assert!(r.is_finite() && r < 0.0);
        }

        #[test]
        fn ratio_is_monotone(x in -200.0f64..20.0, dx in 1e-3f64..1.0) {
            // -φ/Φ is increasing because log Φ is concave.
            prop_assert!(stable_normal_ratio(x).unwrap() <= stable_normal_ratio(x + dx).unwrap());
        }

        #[test]
        fn log_cdf_matches_cdf(x in -35.0f64..8.0) {
            let l = log_normal_cdf(x);
            prop_assert!((l.exp() - normal_cdf(x)).abs() <= 1e-13 * normal_cdf(x));
        }
    }
}
