//! Number formatting shared by all CSV writers.

/// Shortest decimal string that parses back to exactly `x`.
///
/// Plain notation for ordinary magnitudes, exponent notation otherwise.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::num;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1550.0), "1550");
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
    }

    proptest! {
        #[test]
        fn round_trips(x in proptest::num::f64::ANY) {
            let back: f64 = num(x).parse().unwrap();
            if x.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), x.to_bits());
            }
        }
    }
}
