//! Probe execution: light a characterized transponder on a path, read its
//! (noisy) Q-factor, invert the back-to-back fit into a GOSNR estimate and
//! normalize that to the bandwidth-portable GSNR estimate.
//!
//! GOSNR here is referenced to 12.5 GHz like the B2B bench OSNR; the GSNR is
//! the in-band SNR at the probe's symbol rate. Under constant-PSD operation
//! the GSNR is the quantity that carries over to other symbol rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_model::{true_gsnr_db, LaunchSpec, Lightpath, SpectrumSlot};
use crate::transponder_model::{rx_q_readout, QuadraticFit, TransponderConfig};
use crate::units::bandwidth_offset_db;

/// Converts a 12.5 GHz-referenced GOSNR into the in-band GSNR at a symbol
/// rate (GBd). Negative shift for signals wider than the reference band.
pub fn normalize_to_gsnr_db(gosnr_db: f64, symbol_rate_gbd: f64) -> f64 {
    gosnr_db + bandwidth_offset_db(symbol_rate_gbd)
}

/// Knobs of one probe run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRunSettings {
    /// Implementation penalty of the module actually probing (dB). May
    /// differ from the penalty baked into the B2B characterization; the
    /// difference surfaces as estimation bias.
    pub impl_penalty_db: f64,
    /// Std dev of the Gaussian Q readout noise (dB).
    pub q_noise_sigma_db: f64,
    /// Seed of the readout noise; same seed, same result.
    pub seed: u64,
    /// Additive calibration offset applied to the GOSNR estimate (dB).
    pub gosnr_bias_db: f64,
    /// Clamp out-of-range Q readouts into the fitted image instead of
    /// failing the run.
    pub clamp_to_fit_range: bool,
    /// Optional transceiver SNR floor of the link ground truth (dB).
    pub txrx_snr_db: Option<f64>,
}

impl Default for ProbeRunSettings {
    fn default() -> Self {
        ProbeRunSettings {
            impl_penalty_db: 0.0,
            q_noise_sigma_db: 0.0,
            seed: 0,
            gosnr_bias_db: 0.0,
            clamp_to_fit_range: false,
            txrx_snr_db: None,
        }
    }
}

impl ProbeRunSettings {
    pub fn validate(&self) -> Result<()> {
        if self.impl_penalty_db < 0.0 {
            return Err(Error::invalid("impl_penalty_db", "must be >= 0"));
        }
        if self.q_noise_sigma_db < 0.0 {
            return Err(Error::invalid("q_noise_sigma_db", "must be >= 0"));
        }
        if !self.gosnr_bias_db.is_finite() {
            return Err(Error::invalid("gosnr_bias_db", "must be finite"));
        }
        if let Some(txrx) = self.txrx_snr_db {
            if !(txrx > 0.0) {
                return Err(Error::invalid("txrx_snr_db", "must be a positive dB value"));
            }
        }
        Ok(())
    }
}

/// Outcome of one probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// The transponder setting that probed the path.
    pub probe: TransponderConfig,
    /// Spectrum slot the probe occupied.
    pub slot: SpectrumSlot,
    /// Receiver Q readout (dB), noise included.
    pub measured_q_db: f64,
    /// GOSNR estimate from inverting the B2B fit (dB re 12.5 GHz).
    pub estimated_gosnr_db: f64,
    /// Portable in-band GSNR estimate (dB at the probe symbol rate).
    pub estimated_gsnr_db: f64,
    /// Seed the readout noise was drawn with.
    pub seed: u64,
}

impl ProbeResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Runs one probe: ground-truth GSNR from the link model, noisy Q readout,
/// fit inversion, bandwidth normalization.
pub fn run_probe(
    path: &Lightpath,
    probe: &TransponderConfig,
    slot: &SpectrumSlot,
    launch: &LaunchSpec,
    fit: &QuadraticFit,
    settings: &ProbeRunSettings,
) -> Result<ProbeResult> {
    probe.validate()?;
    settings.validate()?;
    if (launch.signal_bandwidth_ghz - probe.symbol_rate_gbd).abs() > 1e-9 {
        return Err(Error::invalid(
            "launch",
            format!(
                "signal bandwidth {} GHz does not match the probe symbol rate {} GBd",
                launch.signal_bandwidth_ghz, probe.symbol_rate_gbd
            ),
        ));
    }
    if probe.symbol_rate_gbd > slot.width_ghz {
        return Err(Error::SignalExceedsSlot {
            bandwidth_ghz: probe.symbol_rate_gbd,
            slot_width_ghz: slot.width_ghz,
        });
    }

    let gsnr_db = true_gsnr_db(path, launch, slot, settings.txrx_snr_db)?;
    let measured_q_db = rx_q_readout(
        probe,
        gsnr_db,
        settings.impl_penalty_db,
        settings.q_noise_sigma_db,
        settings.seed,
    )?;
    let inverted = if settings.clamp_to_fit_range {
        fit.invert_clamped(measured_q_db)
    } else {
        fit.invert(measured_q_db)?
    };
    let estimated_gosnr_db = inverted + settings.gosnr_bias_db;
    Ok(ProbeResult {
        probe: probe.clone(),
        slot: slot.clone(),
        measured_q_db,
        estimated_gosnr_db,
        estimated_gsnr_db: normalize_to_gsnr_db(estimated_gosnr_db, probe.symbol_rate_gbd),
        seed: settings.seed,
    })
}
