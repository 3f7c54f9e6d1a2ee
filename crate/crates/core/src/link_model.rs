//! Synthetic optical link model: ASE noise accumulation over amplified fiber
//! spans plus a closed-form self-channel nonlinear-interference term.
//!
//! The model assumes the transparent-path convention: every amplifier exactly
//! restores the power its span attenuated (plus the add/drop loss allocated
//! to the first amplifier of each traversal), so channel power at the
//! receiver equals launch power and noise contributions simply add up.
//!
//! Loopback paths traverse their base span sequence `loopback_count + 1`
//! times, which is how link lengths beyond the physical route are reached.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::units::{bandwidth_offset_db, db_to_linear, linear_to_db, PLANCK_J_S, REF_BANDWIDTH_GHZ};

/// Spans whose gain differs from their loss by more than this are rejected.
const TRANSPARENCY_TOL_DB: f64 = 1e-6;

/// One amplified fiber span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpan {
    /// Fiber length (km).
    pub length_km: f64,
    /// Fiber attenuation (dB/km).
    pub attenuation_db_per_km: f64,
    /// Nonlinear coefficient (1/W/km).
    pub gamma_per_w_km: f64,
    /// Group-velocity dispersion (ps^2/km), negative for standard fiber.
    pub beta2_ps2_per_km: f64,
    /// Amplifier gain (dB); must equal the span loss (transparent path).
    pub amp_gain_db: f64,
    /// Amplifier noise figure (dB).
    pub amp_noise_figure_db: f64,
    /// Optional additive NLI PSD (W/Hz) standing in for co-propagating load.
    #[serde(default)]
    pub neighbor_nli_psd_w_per_hz: f64,
}

impl FiberSpan {
    /// Span with amplifier gain derived from its loss.
    pub fn transparent(
        length_km: f64,
        attenuation_db_per_km: f64,
        gamma_per_w_km: f64,
        beta2_ps2_per_km: f64,
        amp_noise_figure_db: f64,
    ) -> Self {
        FiberSpan {
            length_km,
            attenuation_db_per_km,
            gamma_per_w_km,
            beta2_ps2_per_km,
            amp_gain_db: length_km * attenuation_db_per_km,
            amp_noise_figure_db,
            neighbor_nli_psd_w_per_hz: 0.0,
        }
    }

    pub fn span_loss_db(&self) -> f64 {
        self.length_km * self.attenuation_db_per_km
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        if !(self.length_km > 0.0) || !self.length_km.is_finite() {
            return Err(Error::invalid(
                "span",
                format!("span {index}: length_km must be positive"),
            ));
        }
        if !(self.attenuation_db_per_km > 0.0) {
            return Err(Error::invalid(
                "span",
                format!("span {index}: attenuation_db_per_km must be positive"),
            ));
        }
        if self.gamma_per_w_km < 0.0 {
            return Err(Error::invalid(
                "span",
                format!("span {index}: gamma_per_w_km must be >= 0"),
            ));
        }
        // Sub-3 dB noise figures are below the quantum limit but accepted for
        // synthetic setups; zero or negative is rejected outright.
        if !(self.amp_noise_figure_db > 0.0) {
            return Err(Error::invalid(
                "span",
                format!("span {index}: amp_noise_figure_db must be positive"),
            ));
        }
        if self.neighbor_nli_psd_w_per_hz < 0.0 {
            return Err(Error::invalid(
                "span",
                format!("span {index}: neighbor_nli_psd_w_per_hz must be >= 0"),
            ));
        }
        if (self.amp_gain_db - self.span_loss_db()).abs() > TRANSPARENCY_TOL_DB {
            return Err(Error::NonTransparentSpan {
                index,
                gain_db: self.amp_gain_db,
                loss_db: self.span_loss_db(),
            });
        }
        Ok(())
    }
}

/// A route through the network: an ordered span list, terminal add/drop loss
/// and the number of loopbacks through the whole base path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lightpath {
    pub id: String,
    pub spans: Vec<FiberSpan>,
    /// Add/drop (ROADM) loss per traversal (dB), compensated by the first
    /// amplifier of each traversal.
    pub add_drop_loss_db: f64,
    /// Extra full traversals of the base path (0 = plain path).
    pub loopback_count: u32,
}

impl Lightpath {
    pub fn new(id: impl Into<String>, spans: Vec<FiberSpan>) -> Self {
        Lightpath {
            id: id.into(),
            spans,
            add_drop_loss_db: 0.0,
            loopback_count: 0,
        }
    }

    pub fn with_loopbacks(mut self, count: u32) -> Self {
        self.loopback_count = count;
        self
    }

    pub fn with_add_drop_loss(mut self, loss_db: f64) -> Self {
        self.add_drop_loss_db = loss_db;
        self
    }

    pub fn traversal_count(&self) -> u32 {
        self.loopback_count + 1
    }

    pub fn traversed_span_count(&self) -> usize {
        self.spans.len() * self.traversal_count() as usize
    }

    /// Total propagated length including loopback traversals (km).
    pub fn total_length_km(&self) -> f64 {
        let base: f64 = self.spans.iter().map(|s| s.length_km).sum();
        base * f64::from(self.traversal_count())
    }

    pub fn validate(&self) -> Result<()> {
        if self.spans.is_empty() {
            return Err(Error::invalid("lightpath", "span list is empty"));
        }
        if self.add_drop_loss_db < 0.0 {
            return Err(Error::invalid("lightpath", "add_drop_loss_db must be >= 0"));
        }
        for (i, span) in self.spans.iter().enumerate() {
            span.validate(i)?;
        }
        Ok(())
    }

    /// Spans in propagation order, repeated once per traversal; yields the
    /// base-path index of each span.
    fn traversed(&self) -> impl Iterator<Item = (usize, &FiberSpan)> {
        (0..self.traversal_count())
            .flat_map(move |_| self.spans.iter().enumerate())
    }
}

/// Frequency slot the signal occupies on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSlot {
    /// Slot center frequency (THz), C-band.
    pub center_freq_thz: f64,
    /// Slot width (GHz).
    pub width_ghz: f64,
}

impl SpectrumSlot {
    pub fn new(center_freq_thz: f64, width_ghz: f64) -> Self {
        SpectrumSlot {
            center_freq_thz,
            width_ghz,
        }
    }

    pub fn center_freq_hz(&self) -> f64 {
        self.center_freq_thz * 1e12
    }

    pub fn validate(&self) -> Result<()> {
        if !(191.0..=196.0).contains(&self.center_freq_thz) {
            return Err(Error::invalid(
                "slot",
                format!(
                    "center_freq_thz {} outside the C-band window [191, 196]",
                    self.center_freq_thz
                ),
            ));
        }
        if !(self.width_ghz > 0.0) {
            return Err(Error::invalid("slot", "width_ghz must be positive"));
        }
        Ok(())
    }
}

/// Launch condition of one signal: flat power spectral density over its
/// occupied bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchSpec {
    /// Launch power spectral density (W/Hz).
    pub psd_w_per_hz: f64,
    /// Occupied signal bandwidth (GHz); equals the symbol rate in GBd for
    /// the Nyquist-shaped signals modeled here.
    pub signal_bandwidth_ghz: f64,
}

impl LaunchSpec {
    pub fn new(psd_w_per_hz: f64, signal_bandwidth_ghz: f64) -> Self {
        LaunchSpec {
            psd_w_per_hz,
            signal_bandwidth_ghz,
        }
    }

    pub fn signal_bandwidth_hz(&self) -> f64 {
        self.signal_bandwidth_ghz * 1e9
    }

    pub fn channel_power_w(&self) -> f64 {
        self.psd_w_per_hz * self.signal_bandwidth_hz()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psd_w_per_hz > 0.0) || !self.psd_w_per_hz.is_finite() {
            return Err(Error::invalid("launch", "psd_w_per_hz must be positive"));
        }
        if !(self.signal_bandwidth_ghz > 0.0) {
            return Err(Error::invalid(
                "launch",
                "signal_bandwidth_ghz must be positive",
            ));
        }
        Ok(())
    }
}

/// Linear ASE noise power (W) in the 12.5 GHz reference bandwidth,
/// accumulated over every traversed span.
fn ase_noise_power_w(path: &Lightpath, slot: &SpectrumSlot) -> f64 {
    let photon = PLANCK_J_S * slot.center_freq_hz();
    let ref_bw_hz = REF_BANDWIDTH_GHZ * 1e9;
    path.traversed()
        .map(|(base_idx, span)| {
            // The first amplifier of each traversal also makes up the
            // add/drop loss, so its gain (and ASE) is correspondingly higher.
            let gain_db = span.amp_gain_db
                + if base_idx == 0 { path.add_drop_loss_db } else { 0.0 };
            let nf_lin = db_to_linear(span.amp_noise_figure_db);
            nf_lin * photon * ref_bw_hz * (db_to_linear(gain_db) - 1.0)
        })
        .sum()
}

/// OSNR (dB, re 12.5 GHz) from amplifier ASE alone.
pub fn osnr_ase_db(path: &Lightpath, launch: &LaunchSpec, slot: &SpectrumSlot) -> Result<f64> {
    path.validate()?;
    launch.validate()?;
    slot.validate()?;
    Ok(linear_to_db(
        launch.channel_power_w() / ase_noise_power_w(path, slot),
    ))
}

/// Self-channel NLI PSD (W/Hz) produced by one span, incoherent closed form.
fn span_nli_psd(span: &FiberSpan, psd_w_per_hz: f64, bandwidth_hz: f64) -> f64 {
    // alpha is the field attenuation (1/km): power decays as exp(-2 alpha z).
    let alpha = f64::ln(10.0) * span.attenuation_db_per_km / 20.0;
    let l_eff = (1.0 - f64::exp(-2.0 * alpha * span.length_km)) / (2.0 * alpha);
    let l_eff_a = 1.0 / (2.0 * alpha);
    let beta2_s2_per_km = span.beta2_ps2_per_km.abs() * 1e-24;
    let gamma = span.gamma_per_w_km;
    let arg = (std::f64::consts::PI.powi(2) / 2.0)
        * beta2_s2_per_km
        * l_eff_a
        * bandwidth_hz.powi(2);
    (8.0 / 27.0) * gamma.powi(2) * psd_w_per_hz.powi(3) * l_eff.powi(2) * arg.asinh()
        / (std::f64::consts::PI * beta2_s2_per_km * l_eff_a)
        + span.neighbor_nli_psd_w_per_hz
}

/// Nonlinear SNR (dB) at the signal bandwidth: launch PSD over accumulated
/// NLI PSD. Returns `f64::INFINITY` when the path generates no NLI at all
/// (every span with gamma = 0 and no neighbor load).
pub fn snr_nli_db(path: &Lightpath, launch: &LaunchSpec) -> Result<f64> {
    path.validate()?;
    launch.validate()?;
    for (i, span) in path.spans.iter().enumerate() {
        if span.beta2_ps2_per_km == 0.0 {
            return Err(Error::ZeroDispersionSpan { index: i });
        }
    }
    let nli_psd: f64 = path
        .traversed()
        .map(|(_, span)| span_nli_psd(span, launch.psd_w_per_hz, launch.signal_bandwidth_hz()))
        .sum();
    // PSD ratio == power ratio over the signal bandwidth; infinity is the
    // defined "no NLI" sentinel.
    Ok(linear_to_db(launch.psd_w_per_hz / nli_psd))
}

/// Ground-truth generalized SNR (dB) at the signal bandwidth: reciprocal
/// combination of the ASE and NLI terms plus an optional transceiver SNR
/// floor. This is the quantity the receiver DSP experiences.
pub fn true_gsnr_db(
    path: &Lightpath,
    launch: &LaunchSpec,
    slot: &SpectrumSlot,
    txrx_snr_db: Option<f64>,
) -> Result<f64> {
    let ase_sig_db = osnr_ase_db(path, launch, slot)?
        + bandwidth_offset_db(launch.signal_bandwidth_ghz);
    let nli_db = snr_nli_db(path, launch)?;
    let mut inv = 1.0 / db_to_linear(ase_sig_db) + 1.0 / db_to_linear(nli_db);
    if let Some(txrx) = txrx_snr_db {
        if !(txrx > 0.0) {
            return Err(Error::invalid("txrx_snr_db", "must be a positive dB value"));
        }
        inv += 1.0 / db_to_linear(txrx);
    }
    Ok(linear_to_db(1.0 / inv))
}

// ------------------------------------------------------------------------
// Topology files
// ------------------------------------------------------------------------

/// Lightpath entry of a topology file: span references instead of inline
/// span bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightpathDef {
    pub id: String,
    pub spans: Vec<String>,
    #[serde(default)]
    pub add_drop_loss_db: f64,
    #[serde(default)]
    pub loopback_count: u32,
}

/// On-disk description of the plant: named spans, lightpaths over them and
/// named spectrum slots. Unknown JSON fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub spans: BTreeMap<String, FiberSpan>,
    pub lightpaths: Vec<LightpathDef>,
    pub slots: BTreeMap<String, SpectrumSlot>,
}

impl Topology {
    pub fn from_json(json: &str) -> Result<Self> {
        let topo: Topology = serde_json::from_str(json)?;
        topo.validate()?;
        Ok(topo)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, span) in &self.spans {
            span.validate(0).map_err(|e| match e {
                Error::NonTransparentSpan { gain_db, loss_db, .. } => Error::invalid(
                    "topology",
                    format!("span {name:?}: gain {gain_db} dB vs loss {loss_db} dB"),
                ),
                other => Error::invalid("topology", format!("span {name:?}: {other}")),
            })?;
        }
        for (name, slot) in &self.slots {
            slot.validate()
                .map_err(|e| Error::invalid("topology", format!("slot {name:?}: {e}")))?;
        }
        for def in &self.lightpaths {
            self.resolve_lightpath(&def.id)?;
        }
        Ok(())
    }

    pub fn resolve_lightpath(&self, id: &str) -> Result<Lightpath> {
        let def = self
            .lightpaths
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| Error::UnknownName {
                what: "lightpath",
                name: id.to_string(),
            })?;
        let spans = def
            .spans
            .iter()
            .map(|name| {
                self.spans.get(name).cloned().ok_or_else(|| Error::UnknownName {
                    what: "span",
                    name: name.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let path = Lightpath {
            id: def.id.clone(),
            spans,
            add_drop_loss_db: def.add_drop_loss_db,
            loopback_count: def.loopback_count,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn slot(&self, name: &str) -> Result<SpectrumSlot> {
        self.slots.get(name).copied().ok_or_else(|| Error::UnknownName {
            what: "slot",
            name: name.to_string(),
        })
    }
}
