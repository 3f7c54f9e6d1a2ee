//! Unit conversions and physical constants shared across the crate.
//!
//! All optical SNR quantities are power ratios expressed in dB. OSNR-style
//! quantities are referenced to the 12.5 GHz (0.1 nm) noise bandwidth;
//! symbol-rate-normalized quantities (GSNR) are referenced to the signal
//! bandwidth itself.

/// Planck constant (J s).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// OSNR reference noise bandwidth (GHz), the usual 0.1 nm slot at 1550 nm.
pub const REF_BANDWIDTH_GHZ: f64 = 12.5;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts / 1e-3)
}

/// dB offset that converts a 12.5 GHz-referenced ratio to one referenced to
/// `bandwidth_ghz` (negative for signals wider than the reference slot).
pub fn bandwidth_offset_db(bandwidth_ghz: f64) -> f64 {
    linear_to_db(REF_BANDWIDTH_GHZ / bandwidth_ghz)
}
