//! Complementary error function and its inverse at double precision.
//!
//! `erfc` comes from `libm` (musl port, about 1 ulp).

use std::f64::consts::PI;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse of `erfc` on `(0, 2)`.
///
/// Starts from the rational approximation in `statrs` and polishes with
/// Newton steps on `erfc` until the update drops below 1e-12 relative.
pub fn erfc_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return f64::INFINITY;
    }
    if y >= 2.0 {
        return f64::NEG_INFINITY;
    }
    let mut x = statrs::function::erf::erfc_inv(y);
    for _ in 0..4 {
        let slope = -2.0 / PI.sqrt() * (-x * x).exp();
        if slope == 0.0 {
            break;
        }
        let step = (erfc(x) - y) / slope;
        x -= step;
        if step.abs() <= 1e-12 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        for &y in &[1e-300, 1e-20, 1e-8, 0.01, 0.3, 0.999, 1.0, 1.5, 1.999_999] {
            let x = erfc_inv(y);
            let back = erfc(x);
            assert!(
                (back - y).abs() <= 1e-12 * y.max(1e-300) + 1e-15,
                "y={y} x={x} back={back}"
            );
        }
        assert_eq!(erfc_inv(1.0), 0.0);
        assert_eq!(erfc_inv(0.0), f64::INFINITY);
    }

    #[test]
    fn known_values() {
        assert!((erfc(0.0) - 1.0).abs() < 1e-16);
        let e1 = erfc(1.0);
        assert!((e1 - 0.157_299_207_050_285_13).abs() < 1e-15, "{e1:e}");
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-19);
    }
}
