//! Canonical float formatting shared by every text artifact.
//!
//! One fixed rule keeps CSV and config echoes byte-identical across runs
//! and platforms: 17 significant digits in scientific notation, which
//! round-trips every finite `f64`.

pub fn canonical_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{:.16e}", v)
    }
}

pub fn parse_f64(text: &str) -> Option<f64> {
    match text.trim() {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        other => other.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_awkward_values() {
        for &v in &[
            1.0,
            0.1,
            -3.0e-17,
            f64::MIN_POSITIVE,
            1.7976931348623157e308,
            -0.0,
        ] {
            let s = canonical_f64(v);
            let back = parse_f64(&s).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{} -> {} -> {}", v, s, back);
        }
    }

    #[test]
    fn non_finite_literals() {
        assert_eq!(canonical_f64(f64::NAN), "nan");
        assert_eq!(canonical_f64(f64::INFINITY), "inf");
        assert_eq!(canonical_f64(f64::NEG_INFINITY), "-inf");
        assert!(parse_f64("nan").unwrap().is_nan());
    }
}
