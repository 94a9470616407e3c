//! Scalar nonlinearities.

/// Logistic sigmoid `1 / (1 + e^{-x})`, evaluated without overflow for
/// large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn tanh_act(x: f64) -> f64 {
    x.tanh()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.7310585786).abs() < 1e-10);
        let tiny = sigmoid(-1000.0);
        assert!(tiny.is_finite() && (0.0..=1e-300).contains(&tiny));
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn tanh_values() {
        assert_eq!(tanh_act(0.0), 0.0);
        assert!((tanh_act(1.0) - 0.7615941560).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn sigmoid_reflection(x in -700.0f64..700.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn sigmoid_increasing(x in -30.0f64..30.0, dx in 1e-3f64..1.0) {
            prop_assert!(sigmoid(x + dx) > sigmoid(x));
        }

        #[test]
        fn tanh_is_odd(x in -50.0f64..50.0) {
            prop_assert_eq!(tanh_act(-x), -tanh_act(x));
        }
    }
}
