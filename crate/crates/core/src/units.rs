//! Decibel/linear conversions. Everything past the configuration boundary
//! works in SI linear units; these helpers are only used when reading
//! configs and when printing.

/// dBm to watts: 0 dBm is 1 mW.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm.
pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

/// dB power ratio to linear.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Positive attenuation in dB to the linear gain it leaves, e.g. a 110 dB
/// path loss maps to 1e-11.
pub fn loss_db_to_linear(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Linear gain back to a positive attenuation in dB.
pub fn linear_to_loss_db(linear: f64) -> f64 {
    -10.0 * linear.log10()
}
