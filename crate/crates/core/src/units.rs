//! dB/dBm conversions. All internal computation is in linear SI units
//! (W, Hz, s, bits); decibels appear only at configuration boundaries.

/// Linear power ratio from a dB value.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dB value of a linear power ratio.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Watts from dBm.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
