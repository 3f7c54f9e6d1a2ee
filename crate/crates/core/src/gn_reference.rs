//! Brute-force numerical reference for the nonlinear-interference closed
//! form in [`crate::link_model`].
//!
//! Evaluates the frequency-domain NLI double integral for a single
//! rectangular-spectrum channel at its center frequency by midpoint
//! quadrature, span by span (incoherent accumulation). Deliberately shares
//! no code with the closed-form path: this module is the check, not the
//! implementation.

use crate::error::{Error, Result};
use crate::link_model::{FiberSpan, LaunchSpec, Lightpath};
use crate::units::linear_to_db;

/// NLI PSD (W/Hz) of one span at the channel center, by 2-D midpoint
/// quadrature on an `n` x `n` grid over the channel spectrum.
pub fn span_nli_psd_numeric(
    span: &FiberSpan,
    psd_w_per_hz: f64,
    bandwidth_hz: f64,
    n: usize,
) -> f64 {
    // Field attenuation in 1/km; the link integral is evaluated in km so the
    // dispersion term stays in ps^2-friendly magnitudes.
    let alpha = f64::ln(10.0) * span.attenuation_db_per_km / 20.0;
    let beta2 = span.beta2_ps2_per_km.abs() * 1e-24; // s^2/km
    let gamma = span.gamma_per_w_km;
    let length = span.length_km;
    let half = bandwidth_hz / 2.0;
    let df = bandwidth_hz / n as f64;

    let e2 = f64::exp(-2.0 * alpha * length);
    let mut acc = 0.0;
    for i in 0..n {
        let f1 = -half + (i as f64 + 0.5) * df;
        for j in 0..n {
            let f2 = -half + (j as f64 + 0.5) * df;
            // Third spectral factor: the pump at f1 + f2 must also fall
            // inside the channel.
            if (f1 + f2).abs() > half {
                continue;
            }
            // |link function|^2 of a single lumped-amplifier span.
            let x = 4.0 * std::f64::consts::PI.powi(2) * beta2 * f1 * f2; // 1/km
            let num = 1.0 + e2 * e2 - 2.0 * e2 * f64::cos(x * length);
            let den = 4.0 * alpha * alpha + x * x;
            acc += num / den;
        }
    }
    (16.0 / 27.0) * gamma * gamma * psd_w_per_hz.powi(3) * acc * df * df
}

/// Nonlinear SNR (dB) over a whole path by numerical quadrature, the
/// counterpart of [`crate::link_model::snr_nli_db`].
pub fn snr_nli_db_numeric(path: &Lightpath, launch: &LaunchSpec, n: usize) -> Result<f64> {
    path.validate()?;
    launch.validate()?;
    for (i, span) in path.spans.iter().enumerate() {
        if span.beta2_ps2_per_km == 0.0 {
            return Err(Error::ZeroDispersionSpan { index: i });
        }
    }
    let traversals = f64::from(path.loopback_count + 1);
    let nli: f64 = path
        .spans
        .iter()
        .map(|span| {
            span_nli_psd_numeric(span, launch.psd_w_per_hz, launch.signal_bandwidth_hz(), n)
                + span.neighbor_nli_psd_w_per_hz
        })
        .sum::<f64>()
        * traversals;
    Ok(linear_to_db(launch.psd_w_per_hz / nli))
}
