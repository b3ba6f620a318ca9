//! Decibel conversions.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Watts to dBW. Zero maps to negative infinity.
pub fn watts_to_dbw(w: f64) -> f64 {
    linear_to_db(w)
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    db_to_linear(dbw)
}

/// dBm/Hz to W/Hz.
pub fn dbm_per_hz_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_floor() {
        let w = dbm_per_hz_to_watts(-174.0);
        assert!((w / 10f64.powf(-20.4) - 1.0).abs() < 1e-12);
        assert!((w - 3.981e-21).abs() < 1e-24);
    }

    #[test]
    fn dbw_round_trip() {
        for w in [1e-6, 3.7e-2, 1.0, 12.5, 7.3e4] {
            let back = dbw_to_watts(watts_to_dbw(w));
            assert!((back / w - 1.0).abs() < 1e-12);
        }
        assert_eq!(watts_to_dbw(100.0), 20.0);
        assert_eq!(watts_to_dbw(0.0), f64::NEG_INFINITY);
    }
}
