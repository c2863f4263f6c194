/// Logistic sigmoid, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid_prime(0.0), 0.25);
    }

    #[test]
    fn saturation_stays_finite() {
        for x in [-700.0, -100.0, 100.0, 700.0] {
            assert!(sigmoid(x).is_finite());
            assert!(sigmoid_prime(x).is_finite());
        }
        assert!(sigmoid(-700.0) > 0.0);
        assert_eq!(sigmoid(700.0), 1.0);
    }

    proptest! {
        #[test]
        fn symmetry(x in -50f64..50.0) {
            prop_assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }

        #[test]
        fn derivative_matches_central_difference(x in -8f64..8.0) {
            let h = 1e-6;
            let fd = (sigmoid(x + h) - sigmoid(x - h)) / (2.0 * h);
            prop_assert!((fd - sigmoid_prime(x)).abs() < 1e-9);
        }
    }
}
