//! Transponder behavior: theoretical Q-factor over SNR for the supported
//! constellations, synthetic and measured back-to-back (B2B) Q-over-OSNR
//! characterizations, their quadratic fit and inversion, and the noisy
//! receiver Q readout used when probing a live path.
//!
//! Conventions: SNR values handed to the Q formulas are per-symbol,
//! per-polarization ratios in dB at the signal bandwidth. B2B OSNR samples
//! are referenced to 12.5 GHz, as a noise-loading bench would report them.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::units::{bandwidth_offset_db, db_to_linear};

/// Reported Q (dB) when the BER is at or beyond the 0.5 ceiling where the
/// Q-factor mapping is undefined.
pub const Q_DB_FLOOR: f64 = -40.0;

/// Margin between worst-case and typical required GSNR in the default
/// catalog (dB).
pub const WORST_CASE_MARGIN_DB: f64 = 1.0;

/// Least OSNR spread a characterization must cover to be fitted (dB).
pub const MIN_FIT_SPREAD_DB: f64 = 3.0;

// ------------------------------------------------------------------------
// Operating modes
// ------------------------------------------------------------------------

/// One transponder operating mode (line setting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransponderConfig {
    pub name: String,
    /// Bits per symbol per polarization; 0.5 steps are time-hybrid formats.
    pub bits_per_symbol: f64,
    /// Symbol rate (GBd); also the occupied bandwidth of the Nyquist signal.
    pub symbol_rate_gbd: f64,
    /// Net line rate (Gbit/s) after FEC and framing overhead.
    pub line_rate_gbps: f64,
}

impl TransponderConfig {
    pub fn new(
        name: impl Into<String>,
        bits_per_symbol: f64,
        symbol_rate_gbd: f64,
        line_rate_gbps: f64,
    ) -> Self {
        TransponderConfig {
            name: name.into(),
            bits_per_symbol,
            symbol_rate_gbd,
            line_rate_gbps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::invalid("config", "name is empty"));
        }
        validate_bits_per_symbol(self.bits_per_symbol)?;
        if !(self.symbol_rate_gbd > 0.0) {
            return Err(Error::invalid(
                "config",
                format!("{}: symbol_rate_gbd must be positive", self.name),
            ));
        }
        if !(self.line_rate_gbps > 0.0) {
            return Err(Error::invalid(
                "config",
                format!("{}: line_rate_gbps must be positive", self.name),
            ));
        }
        // Two polarizations of bits_per_symbol at the symbol rate bound the
        // raw rate; net line rate must fit under it.
        let raw_gbps = 2.0 * self.bits_per_symbol * self.symbol_rate_gbd;
        if self.line_rate_gbps > raw_gbps {
            return Err(Error::invalid(
                "config",
                format!(
                    "{}: line rate {} Gbit/s exceeds raw capacity {} Gbit/s",
                    self.name, self.line_rate_gbps, raw_gbps
                ),
            ));
        }
        Ok(())
    }
}

/// Catalog entry: an operating mode plus its required GSNR thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModFormatSpec {
    pub config: TransponderConfig,
    /// GSNR needed by a typical unit (dB, at the config's symbol rate).
    pub required_gsnr_typical_db: f64,
    /// GSNR needed by a worst-case unit (dB); at least the typical value.
    pub required_gsnr_worst_db: f64,
}

impl ModFormatSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !self.required_gsnr_typical_db.is_finite() || !self.required_gsnr_worst_db.is_finite() {
            return Err(Error::invalid(
                "spec",
                format!("{}: thresholds must be finite", self.config.name),
            ));
        }
        if self.required_gsnr_worst_db < self.required_gsnr_typical_db {
            return Err(Error::invalid(
                "spec",
                format!(
                    "{}: worst-case threshold {} below typical {}",
                    self.config.name, self.required_gsnr_worst_db, self.required_gsnr_typical_db
                ),
            ));
        }
        Ok(())
    }
}

fn validate_bits_per_symbol(bits: f64) -> Result<()> {
    let steps = bits * 2.0;
    if !(2.0..=6.0).contains(&bits) || steps.fract() != 0.0 {
        return Err(Error::invalid(
            "bits_per_symbol",
            format!("{bits} not a 0.5 step within [2, 6]"),
        ));
    }
    Ok(())
}

/// Validates a whole catalog: entries individually sound, names unique, and
/// thresholds non-decreasing in bits/symbol at a fixed symbol rate.
pub fn validate_catalog(catalog: &[ModFormatSpec]) -> Result<()> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    for spec in catalog {
        spec.validate()?;
    }
    for (i, a) in catalog.iter().enumerate() {
        for b in &catalog[i + 1..] {
            if a.config.name == b.config.name {
                return Err(Error::invalid(
                    "catalog",
                    format!("duplicate config name {:?}", a.config.name),
                ));
            }
            if a.config.symbol_rate_gbd == b.config.symbol_rate_gbd {
                let (lo, hi) = if a.config.bits_per_symbol <= b.config.bits_per_symbol {
                    (a, b)
                } else {
                    (b, a)
                };
                if hi.required_gsnr_typical_db < lo.required_gsnr_typical_db {
                    return Err(Error::invalid(
                        "catalog",
                        format!(
                            "{} needs less GSNR than lower-order {} at the same symbol rate",
                            hi.config.name, lo.config.name
                        ),
                    ));
                }
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------------------
// Theoretical Q over SNR
// ------------------------------------------------------------------------

/// Gray-coded square/cross QAM bit error ratio at a linear per-symbol SNR.
/// Exact for QPSK, the standard nearest-neighbor approximation above it.
fn qam_ber(bits: f64, snr_lin: f64) -> f64 {
    let m = 2f64.powf(bits);
    let scale = (2.0 / bits) * (1.0 - 1.0 / m.sqrt());
    scale * erfc((3.0 * snr_lin / (2.0 * (m - 1.0))).sqrt())
}

/// Q-factor (dB) from a bit error ratio: Q = sqrt(2) * erfc^-1(2 BER).
pub fn q_db_from_ber(ber: f64) -> f64 {
    if !(ber > 0.0) {
        return f64::INFINITY;
    }
    if ber >= 0.5 {
        return Q_DB_FLOOR;
    }
    let q_lin = std::f64::consts::SQRT_2 * erfc_inv(2.0 * ber);
    let q_db = 20.0 * q_lin.log10();
    if q_db.is_nan() || q_db < Q_DB_FLOOR {
        Q_DB_FLOOR
    } else {
        q_db
    }
}

/// SNR (dB) at which the constellation reaches the given BER. Half-step
/// formats interpolate the required SNR of the neighboring integer formats
/// linearly in dB, matching their time-hybrid construction.
pub fn required_snr_db(bits_per_symbol: f64, ber: f64) -> Result<f64> {
    validate_bits_per_symbol(bits_per_symbol)?;
    if bits_per_symbol.fract() != 0.0 {
        let lo = required_snr_db(bits_per_symbol.floor(), ber)?;
        let hi = required_snr_db(bits_per_symbol.ceil(), ber)?;
        return Ok(0.5 * (lo + hi));
    }
    let m = 2f64.powf(bits_per_symbol);
    let scale = (2.0 / bits_per_symbol) * (1.0 - 1.0 / m.sqrt());
    // BER ceiling of the formula is its snr -> 0 limit, `scale`.
    if !(ber > 0.0) || ber >= scale {
        return Err(Error::invalid(
            "ber",
            format!("{ber} outside the invertible range (0, {scale:.4})"),
        ));
    }
    let x = erfc_inv(ber / scale);
    Ok(10.0 * ((2.0 * (m - 1.0) / 3.0) * x * x).log10())
}

/// Theoretical Q-factor (dB) of a constellation at the given SNR (dB).
pub fn theoretical_q_db(bits_per_symbol: f64, snr_db: f64) -> Result<f64> {
    validate_bits_per_symbol(bits_per_symbol)?;
    if !snr_db.is_finite() {
        return Err(Error::invalid("snr_db", "must be finite"));
    }
    if bits_per_symbol.fract() == 0.0 {
        return Ok(q_db_from_ber(qam_ber(bits_per_symbol, db_to_linear(snr_db))));
    }
    // Half-step formats: find the BER whose interpolated required SNR equals
    // the requested SNR. required_snr_db is strictly decreasing in BER, so
    // bisection on log10(BER) converges.
    let m = 2f64.powf(bits_per_symbol.ceil());
    let ceiling = (2.0 / bits_per_symbol.ceil()) * (1.0 - 1.0 / m.sqrt());
    let mut lo = -300.0;
    let mut hi = (ceiling * (1.0 - 1e-12)).log10();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let req = required_snr_db(bits_per_symbol, 10f64.powf(mid))?;
        if req > snr_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(q_db_from_ber(10f64.powf(0.5 * (lo + hi))))
}

// ------------------------------------------------------------------------
// Back-to-back characterization
// ------------------------------------------------------------------------

/// One noise-loading measurement: receiver Q at a set OSNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QOverOsnrSample {
    /// Set OSNR (dB re 12.5 GHz).
    pub osnr_db: f64,
    /// Measured Q-factor (dB).
    pub q_db: f64,
}

/// Fitted quadratic q = a x^2 + b x + c over OSNR x, with the OSNR interval
/// the samples covered. Guaranteed strictly increasing on that interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Fitted OSNR interval [min, max] (dB).
    pub valid_range: (f64, f64),
}

impl QuadraticFit {
    pub fn eval(&self, osnr_db: f64) -> f64 {
        (self.a * osnr_db + self.b) * osnr_db + self.c
    }

    /// dQ/dOSNR at a point; its reciprocal is the noise amplification of the
    /// inversion.
    pub fn slope(&self, osnr_db: f64) -> f64 {
        2.0 * self.a * osnr_db + self.b
    }

    /// Image of the valid OSNR interval, [q_min, q_max].
    pub fn q_range(&self) -> (f64, f64) {
        (self.eval(self.valid_range.0), self.eval(self.valid_range.1))
    }

    /// OSNR (dB) at which the fit reaches `q_db`. Errors when `q_db` falls
    /// outside the fitted image instead of extrapolating.
    pub fn invert(&self, q_db: f64) -> Result<f64> {
        let (q_min, q_max) = self.q_range();
        if q_db < q_min || q_db > q_max {
            return Err(Error::QOutOfRange {
                q_db,
                nearest_q_db: q_db.clamp(q_min, q_max),
            });
        }
        Ok(self.invert_unchecked(q_db))
    }

    /// Clamping variant for callers that accept boundary extrapolation: Q is
    /// first clamped into the fitted image.
    pub fn invert_clamped(&self, q_db: f64) -> f64 {
        let (q_min, q_max) = self.q_range();
        self.invert_unchecked(q_db.clamp(q_min, q_max))
    }

    fn invert_unchecked(&self, q_db: f64) -> f64 {
        let (lo, hi) = self.valid_range;
        if self.a.abs() < 1e-14 {
            return (q_db - self.c) / self.b;
        }
        // Numerically stable quadratic roots: avoid cancellation by forming
        // the larger-magnitude half first.
        let disc = (self.b * self.b - 4.0 * self.a * (self.c - q_db)).max(0.0);
        let big = -0.5 * (self.b + self.b.signum() * disc.sqrt());
        let r1 = big / self.a;
        let r2 = (self.c - q_db) / big;
        let margin = 1e-6 * (hi - lo).max(1.0);
        let in_range = |x: f64| x >= lo - margin && x <= hi + margin;
        match (in_range(r1), in_range(r2)) {
            (true, false) => r1,
            (false, true) => r2,
            // Monotonicity makes a double hit (root at the shared boundary
            // tolerance) or a double miss (q at the numeric edge) marginal;
            // take the root nearer the interval.
            _ => {
                let mid = 0.5 * (lo + hi);
                if (r1 - mid).abs() <= (r2 - mid).abs() {
                    r1
                } else {
                    r2
                }
            }
        }
    }

    /// Root-mean-square residual of the fit against a sample set (dB).
    pub fn residual_rms(&self, samples: &[QOverOsnrSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let ss: f64 = samples
            .iter()
            .map(|s| (s.q_db - self.eval(s.osnr_db)).powi(2))
            .sum();
        (ss / samples.len() as f64).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let fit: QuadraticFit = serde_json::from_str(json)?;
        if !(fit.valid_range.0 < fit.valid_range.1) {
            return Err(Error::invalid("fit", "valid_range must be ordered"));
        }
        Ok(fit)
    }
}

/// Least-squares quadratic fit of Q over OSNR. Rejects sample sets that are
/// too small, too narrow, rank-deficient, or whose fit is not strictly
/// increasing on the sampled interval.
pub fn fit_b2b(samples: &[QOverOsnrSample]) -> Result<QuadraticFit> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples {
            got: samples.len(),
            need: 3,
        });
    }
    for s in samples {
        if !s.osnr_db.is_finite() || !s.q_db.is_finite() {
            return Err(Error::invalid("sample", "non-finite osnr_db or q_db"));
        }
    }
    let lo = samples.iter().map(|s| s.osnr_db).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.osnr_db).fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if spread < MIN_FIT_SPREAD_DB {
        return Err(Error::InsufficientSpread {
            spread_db: spread,
            need_db: MIN_FIT_SPREAD_DB,
        });
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.osnr_db).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::RankDeficientFit);
    }

    // Normal equations on OSNR centered at its mean, which keeps the 3x3
    // system well conditioned over typical 8..30 dB ranges.
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.osnr_db).sum::<f64>() / n;
    let mut s = [0.0f64; 5]; // sum of x^k
    let mut t = [0.0f64; 3]; // sum of x^k * y
    for sample in samples {
        let x = sample.osnr_db - mean;
        let mut xk = 1.0;
        for k in 0..5 {
            s[k] += xk;
            if k < 3 {
                t[k] += xk * sample.q_db;
            }
            xk *= x;
        }
    }
    let m = [
        [s[0], s[1], s[2], t[0]],
        [s[1], s[2], s[3], t[1]],
        [s[2], s[3], s[4], t[2]],
    ];
    let [c0, b0, a0] = solve3(m).ok_or(Error::RankDeficientFit)?;

    // Expand (a0, b0, c0) around the mean back to raw-OSNR coefficients.
    let a = a0;
    let b = b0 - 2.0 * a0 * mean;
    let c = (a0 * mean - b0) * mean + c0;
    let fit = QuadraticFit {
        a,
        b,
        c,
        valid_range: (lo, hi),
    };

    // The derivative is linear, so positivity at both endpoints means the
    // fit is strictly increasing everywhere in between.
    if fit.slope(lo) <= 0.0 || fit.slope(hi) <= 0.0 {
        return Err(Error::NonMonotonicFit {
            zero_crossing_db: -b / (2.0 * a),
        });
    }
    Ok(fit)
}

/// Gaussian elimination with partial pivoting for the 3x3 normal equations.
fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    let scale = m
        .iter()
        .flat_map(|row| row[..3].iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut acc = m[i][3];
        for k in i + 1..3 {
            acc -= m[i][k] * x[k];
        }
        x[i] = acc / m[i][i];
    }
    Some(x)
}

/// Synthetic noise-loading characterization of a config: theoretical Q at
/// each OSNR step, degraded by the module's implementation penalty.
pub fn synthesize_b2b(
    config: &TransponderConfig,
    osnr_min_db: f64,
    osnr_max_db: f64,
    step_db: f64,
    impl_penalty_db: f64,
) -> Result<Vec<QOverOsnrSample>> {
    config.validate()?;
    if !(step_db > 0.0) || !(osnr_max_db > osnr_min_db) {
        return Err(Error::invalid("b2b sweep", "empty or inverted OSNR range"));
    }
    let offset = bandwidth_offset_db(config.symbol_rate_gbd);
    let count = ((osnr_max_db - osnr_min_db) / step_db).round() as usize;
    (0..=count)
        .map(|i| {
            let osnr_db = osnr_min_db + i as f64 * step_db;
            let snr_db = osnr_db + offset - impl_penalty_db;
            Ok(QOverOsnrSample {
                osnr_db,
                q_db: theoretical_q_db(config.bits_per_symbol, snr_db)?,
            })
        })
        .collect()
}

// ------------------------------------------------------------------------
// Receiver Q readout
// ------------------------------------------------------------------------

/// Receiver Q-factor readout (dB) for a signal arriving with the given true
/// GSNR: theoretical Q at (GSNR - implementation penalty) plus seeded
/// Gaussian measurement noise. Same seed, same readout.
pub fn rx_q_readout(
    config: &TransponderConfig,
    true_gsnr_db: f64,
    impl_penalty_db: f64,
    q_noise_sigma_db: f64,
    seed: u64,
) -> Result<f64> {
    config.validate()?;
    if impl_penalty_db < 0.0 {
        return Err(Error::invalid("impl_penalty_db", "must be >= 0"));
    }
    if q_noise_sigma_db < 0.0 {
        return Err(Error::invalid("q_noise_sigma_db", "must be >= 0"));
    }
    let clean = theoretical_q_db(config.bits_per_symbol, true_gsnr_db - impl_penalty_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, q_noise_sigma_db)
        .expect("sigma validated nonnegative")
        .sample(&mut rng);
    Ok(clean + noise)
}

// ------------------------------------------------------------------------
// File formats
// ------------------------------------------------------------------------

const B2B_HEADER: [&str; 2] = ["osnr_db", "q_db"];

/// Reads B2B samples from CSV with the exact header `osnr_db,q_db`.
pub fn read_b2b_csv<R: std::io::Read>(reader: R) -> Result<Vec<QOverOsnrSample>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != B2B_HEADER {
        return Err(Error::MalformedSample {
            line: 1,
            why: format!(
                "expected header {:?}, got {:?}",
                B2B_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::MalformedSample {
                line,
                why: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let parse = |field: &str, name: &str| -> Result<f64> {
            let value: f64 = field.trim().parse().map_err(|_| Error::MalformedSample {
                line,
                why: format!("{name} {field:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::MalformedSample {
                    line,
                    why: format!("{name} must be finite"),
                });
            }
            Ok(value)
        };
        samples.push(QOverOsnrSample {
            osnr_db: parse(&record[0], "osnr_db")?,
            q_db: parse(&record[1], "q_db")?,
        });
    }
    Ok(samples)
}

pub fn write_b2b_csv<W: std::io::Write>(writer: W, samples: &[QOverOsnrSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(B2B_HEADER)?;
    for s in samples {
        wtr.write_record([s.osnr_db.to_string(), s.q_db.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads and validates a transponder catalog (JSON list of specs).
pub fn read_catalog_json(json: &str) -> Result<Vec<ModFormatSpec>> {
    let catalog: Vec<ModFormatSpec> = serde_json::from_str(json)?;
    validate_catalog(&catalog)?;
    Ok(catalog)
}

pub fn write_catalog_json(catalog: &[ModFormatSpec]) -> Result<String> {
    Ok(serde_json::to_string_pretty(catalog)?)
}

// ------------------------------------------------------------------------
// Default catalog
// ------------------------------------------------------------------------

fn format_label(bits: f64) -> &'static str {
    match (bits * 2.0) as u32 {
        4 => "DP-QPSK",
        5 => "DP-QPSK-8QAM",
        6 => "DP-8QAM",
        7 => "DP-8QAM-16QAM",
        8 => "DP-16QAM",
        9 => "DP-16QAM-32QAM",
        10 => "DP-32QAM",
        12 => "DP-64QAM",
        _ => "DP-QAM",
    }
}

/// Catalog of line settings from 100G to 400G in 0.5 bit/symbol steps, with
/// thresholds derived from the theoretical required SNR at the FEC-limit BER
/// plus an implementation penalty.
pub fn default_catalog_with(fec_ber: f64, impl_penalty_db: f64) -> Result<Vec<ModFormatSpec>> {
    // (bits/symbol, symbol rate, net line rate)
    let modes: [(f64, f64, f64); 6] = [
        (2.0, 34.0, 100.0),
        (2.0, 69.0, 200.0),
        (2.5, 69.0, 250.0),
        (3.0, 69.0, 300.0),
        (3.5, 69.0, 350.0),
        (4.0, 69.0, 400.0),
    ];
    let catalog = modes
        .iter()
        .map(|&(bits, rs, rate)| {
            let typical = required_snr_db(bits, fec_ber)? + impl_penalty_db;
            Ok(ModFormatSpec {
                config: TransponderConfig::new(
                    format!("{rate:.0}G-{}-{rs:.0}GBd", format_label(bits)),
                    bits,
                    rs,
                    rate,
                ),
                required_gsnr_typical_db: typical,
                required_gsnr_worst_db: typical + WORST_CASE_MARGIN_DB,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    validate_catalog(&catalog)?;
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Bisection inverse of erfc, independent of the library inverse used by
    // the implementation.
    fn erfc_inv_bisect(y: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if erfc(mid) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn q_from_ber_matches_bisection_oracle() {
        let oracle = 20.0 * (std::f64::consts::SQRT_2 * erfc_inv_bisect(2e-3)).log10();
        let got = q_db_from_ber(1e-3);
        assert_relative_eq!(got, oracle, epsilon = 1e-9);
        assert_relative_eq!(got, 9.7998, epsilon = 1e-3);
    }

    #[test]
    fn q_floor_sentinel_on_undefined_ber() {
        assert_eq!(q_db_from_ber(0.5), Q_DB_FLOOR);
        assert_eq!(q_db_from_ber(0.73), Q_DB_FLOOR);
        assert!(q_db_from_ber(0.0).is_infinite());
    }

    #[test]
    fn qpsk_q_equals_snr() {
        // With Gray QPSK, Q_lin^2 == SNR_lin identically.
        for snr in [-5.0, 0.0, 3.7, 10.0, 17.0, 25.0] {
            let q = theoretical_q_db(2.0, snr).unwrap();
            assert_relative_eq!(q, snr, epsilon = 1e-9);
        }
    }

    #[test]
    fn q_orders_with_constellation_size() {
        for snr in [6.0, 10.0, 14.0, 18.0] {
            let mut prev = f64::INFINITY;
            for bits in [2.0, 2.5, 3.0, 3.5, 4.0] {
                let q = theoretical_q_db(bits, snr).unwrap();
                assert!(
                    q < prev,
                    "q must strictly decrease with bits/symbol at snr {snr}: {bits} -> {q}"
                );
                prev = q;
            }
        }
    }

    #[test]
    fn q_increases_with_snr() {
        for bits in [2.0, 2.5, 3.0, 3.5, 4.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..60 {
                let q = theoretical_q_db(bits, -5.0 + 0.5 * i as f64).unwrap();
                assert!(q > prev, "q must rise with snr for bits {bits}");
                prev = q;
            }
        }
    }

    #[test]
    fn required_snr_at_fec_limit_matches_frozen_values() {
        // Independently computed required SNR at BER 2e-2.
        let expect = [
            (2.0, 6.2509),
            (2.5, 7.9575),
            (3.0, 9.6641),
            (3.5, 11.1875),
            (4.0, 12.7108),
        ];
        for (bits, snr) in expect {
            assert_relative_eq!(required_snr_db(bits, 2e-2).unwrap(), snr, epsilon = 2e-4);
        }
    }

    #[test]
    fn required_snr_round_trips_through_ber() {
        for bits in [2.0f64, 3.0, 4.0] {
            for ber in [1e-2, 2e-2, 1e-3] {
                let snr = required_snr_db(bits, ber).unwrap();
                let back = qam_ber(bits, db_to_linear(snr));
                assert_relative_eq!(back, ber, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn hybrid_q_is_consistent_with_required_snr() {
        // At the SNR that a hybrid format needs for a BER, the theoretical Q
        // must equal the Q of that BER.
        for bits in [2.5, 3.5] {
            for ber in [2e-2, 1e-3] {
                let snr = required_snr_db(bits, ber).unwrap();
                let q = theoretical_q_db(bits, snr).unwrap();
                assert_relative_eq!(q, q_db_from_ber(ber), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn bad_bits_per_symbol_is_rejected() {
        assert!(theoretical_q_db(2.25, 10.0).is_err());
        assert!(theoretical_q_db(1.5, 10.0).is_err());
        assert!(theoretical_q_db(6.5, 10.0).is_err());
        assert!(required_snr_db(0.5, 1e-2).is_err());
        assert!(required_snr_db(2.0, 0.6).is_err());
    }

    fn samples_from(a: f64, b: f64, c: f64, lo: f64, hi: f64, step: f64) -> Vec<QOverOsnrSample> {
        let mut v = Vec::new();
        let mut x = lo;
        while x <= hi + 1e-9 {
            v.push(QOverOsnrSample {
                osnr_db: x,
                q_db: (a * x + b) * x + c,
            });
            x += step;
        }
        v
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let samples = samples_from(-0.02, 1.2, -2.0, 10.0, 25.0, 1.0);
        let fit = fit_b2b(&samples).unwrap();
        assert_relative_eq!(fit.a, -0.02, epsilon = 1e-9);
        assert_relative_eq!(fit.b, 1.2, epsilon = 1e-9);
        assert_relative_eq!(fit.c, -2.0, epsilon = 1e-9);
        assert!(fit.residual_rms(&samples) < 1e-9);
        assert_eq!(fit.valid_range, (10.0, 25.0));
    }

    #[test]
    fn fit_inversion_matches_bisection_oracle() {
        let fit = fit_b2b(&samples_from(-0.02, 1.2, -2.0, 10.0, 25.0, 1.0)).unwrap();
        // Oracle: bisection on the fitted polynomial.
        let (mut lo, mut hi) = (10.0f64, 25.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fit.eval(mid) < 9.8 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = fit.invert(9.8).unwrap();
        assert_relative_eq!(x, 0.5 * (lo + hi), epsilon = 1e-9);
        assert_relative_eq!(x, 12.393183, epsilon = 1e-5);
    }

    #[test]
    fn inversion_round_trips_to_1e9() {
        let fit = fit_b2b(&samples_from(-0.015, 1.1, -3.0, 8.0, 30.0, 1.0)).unwrap();
        let mut x = 8.0;
        while x <= 30.0 {
            let q = fit.eval(x);
            assert_relative_eq!(fit.invert(q).unwrap(), x, epsilon = 1e-9);
            x += 0.37;
        }
    }

    #[test]
    fn collinear_samples_give_degenerate_quadratic() {
        let samples = vec![
            QOverOsnrSample { osnr_db: 10.0, q_db: 8.0 },
            QOverOsnrSample { osnr_db: 15.0, q_db: 10.5 },
            QOverOsnrSample { osnr_db: 20.0, q_db: 13.0 },
        ];
        let fit = fit_b2b(&samples).unwrap();
        assert!(fit.a.abs() < 1e-9, "expected a ~ 0, got {}", fit.a);
        assert_relative_eq!(fit.b, 0.5, epsilon = 1e-9);
        assert_relative_eq!(fit.c, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_sample_sets_are_rejected() {
        let two = samples_from(0.0, 1.0, 0.0, 10.0, 11.0, 1.0);
        assert!(matches!(
            fit_b2b(&two),
            Err(Error::InsufficientSamples { got: 2, need: 3 })
        ));

        let narrow = samples_from(0.0, 1.0, 0.0, 10.0, 12.0, 0.5);
        assert!(matches!(fit_b2b(&narrow), Err(Error::InsufficientSpread { .. })));

        // Wide spread but only two distinct OSNR values.
        let mut twocol = Vec::new();
        for _ in 0..4 {
            twocol.push(QOverOsnrSample { osnr_db: 10.0, q_db: 8.0 });
            twocol.push(QOverOsnrSample { osnr_db: 20.0, q_db: 12.0 });
        }
        assert!(matches!(fit_b2b(&twocol), Err(Error::RankDeficientFit)));
    }

    #[test]
    fn non_monotonic_fit_reports_zero_crossing() {
        // Derivative 0.1 x - 1 crosses zero at x = 10, inside [5, 15].
        let samples = samples_from(0.05, -1.0, 10.0, 5.0, 15.0, 1.0);
        match fit_b2b(&samples) {
            Err(Error::NonMonotonicFit { zero_crossing_db }) => {
                assert_relative_eq!(zero_crossing_db, 10.0, epsilon = 1e-6);
            }
            other => panic!("expected NonMonotonicFit, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_q_reports_nearest_and_clamps() {
        let fit = fit_b2b(&samples_from(-0.02, 1.2, -2.0, 10.0, 25.0, 1.0)).unwrap();
        let (q_min, q_max) = fit.q_range();
        match fit.invert(q_max + 1.0) {
            Err(Error::QOutOfRange { nearest_q_db, .. }) => {
                assert_relative_eq!(nearest_q_db, q_max, epsilon = 1e-12);
            }
            other => panic!("expected QOutOfRange, got {other:?}"),
        }
        assert_relative_eq!(fit.invert_clamped(q_max + 1.0), 25.0, epsilon = 1e-9);
        assert_relative_eq!(fit.invert_clamped(q_min - 1.0), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn noisy_fit_recovery_stays_in_statistical_envelope() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let (a, b, c) = (-0.02, 1.2, -2.0);
        let clean = samples_from(a, b, c, 8.0, 27.0, 1.0);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut fits = Vec::new();
        for seed in 0..1000u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let noisy: Vec<QOverOsnrSample> = clean
                .iter()
                .map(|s| QOverOsnrSample {
                    osnr_db: s.osnr_db,
                    q_db: s.q_db + noise.sample(&mut rng),
                })
                .collect();
            fits.push(fit_b2b(&noisy).unwrap());
        }
        let n = fits.len() as f64;
        for (pick, truth, label) in [
            (&(|f: &QuadraticFit| f.a) as &dyn Fn(&QuadraticFit) -> f64, a, "a"),
            (&|f: &QuadraticFit| f.b, b, "b"),
            (&|f: &QuadraticFit| f.c, c, "c"),
        ] {
            let mean = fits.iter().map(|f| pick(f)).sum::<f64>() / n;
            let var = fits.iter().map(|f| (pick(f) - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            assert!(
                (mean - truth).abs() < 4.0 * sd / n.sqrt(),
                "estimator of {label} is biased: mean {mean}, truth {truth}, sd {sd}"
            );
            let within = fits.iter().filter(|f| (pick(f) - truth).abs() < 3.0 * sd).count();
            assert!(
                within >= 985,
                "only {within}/1000 fits of {label} within 3 sigma"
            );
        }
    }

    #[test]
    fn inversion_amplifies_q_noise_by_reciprocal_slope() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let fit = fit_b2b(&samples_from(-0.02, 1.2, -2.0, 10.0, 25.0, 1.0)).unwrap();
        let x0 = 17.0;
        let q0 = fit.eval(x0);
        let sigma_q = 0.1;
        let noise = Normal::new(0.0, sigma_q).unwrap();
        let mut xs = Vec::with_capacity(1000);
        for seed in 0..1000u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            xs.push(fit.invert_clamped(q0 + noise.sample(&mut rng)));
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
            .sqrt();
        let predicted = sigma_q / fit.slope(x0);
        assert!(
            (sd - predicted).abs() / predicted < 0.10,
            "estimate spread {sd} vs slope prediction {predicted}"
        );
    }

    #[test]
    fn readout_is_deterministic_and_exact_when_noiseless() {
        let config = TransponderConfig::new("probe", 2.0, 69.0, 200.0);
        let clean = rx_q_readout(&config, 14.0, 0.0, 0.0, 7).unwrap();
        // QPSK: q == snr, and a penalty shifts the operating point.
        assert_relative_eq!(clean, 14.0, epsilon = 1e-9);
        let pen = rx_q_readout(&config, 14.0, 1.5, 0.0, 7).unwrap();
        assert_relative_eq!(pen, 12.5, epsilon = 1e-9);

        let a = rx_q_readout(&config, 14.0, 1.5, 0.2, 42).unwrap();
        let b = rx_q_readout(&config, 14.0, 1.5, 0.2, 42).unwrap();
        let c = rx_q_readout(&config, 14.0, 1.5, 0.2, 43).unwrap();
        assert_eq!(a, b, "same seed must reproduce the same readout");
        assert_ne!(a, c, "different seeds must decorrelate readouts");
    }

    #[test]
    fn readout_noise_has_the_configured_moments() {
        let config = TransponderConfig::new("probe", 2.0, 69.0, 200.0);
        let clean = rx_q_readout(&config, 15.0, 1.0, 0.0, 0).unwrap();
        let sigma = 0.2;
        let n = 10_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for seed in 0..n {
            let q = rx_q_readout(&config, 15.0, 1.0, sigma, seed).unwrap();
            sum += q - clean;
            sumsq += (q - clean) * (q - clean);
        }
        let mean = sum / n as f64;
        let sd = (sumsq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.01, "noise mean {mean} should vanish");
        assert!((sd - sigma).abs() / sigma < 0.05, "noise sd {sd} vs {sigma}");
    }

    #[test]
    fn synthesized_qpsk_b2b_is_the_shifted_identity_line() {
        let config = TransponderConfig::new("probe", 2.0, 69.0, 200.0);
        let samples = synthesize_b2b(&config, 8.0, 30.0, 1.0, 1.5).unwrap();
        assert_eq!(samples.len(), 23);
        let offset = bandwidth_offset_db(69.0) - 1.5;
        for s in &samples {
            assert_relative_eq!(s.q_db, s.osnr_db + offset, epsilon = 1e-9);
        }
    }

    #[test]
    fn b2b_csv_round_trips_and_validates() {
        let samples = samples_from(-0.01, 1.0, 0.5, 10.0, 20.0, 1.0);
        let mut buf = Vec::new();
        write_b2b_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("osnr_db,q_db\n"));
        let back = read_b2b_csv(buf.as_slice()).unwrap();
        assert_eq!(back, samples);

        let bad_header = "snr_db,q_db\n10,8\n";
        assert!(matches!(
            read_b2b_csv(bad_header.as_bytes()),
            Err(Error::MalformedSample { line: 1, .. })
        ));
        let bad_row = "osnr_db,q_db\n10,8\nword,9\n";
        match read_b2b_csv(bad_row.as_bytes()) {
            Err(Error::MalformedSample { line: 3, .. }) => {}
            other => panic!("expected malformed line 3, got {other:?}"),
        }
    }

    #[test]
    fn default_catalog_is_ordered_and_round_trips() {
        let catalog = default_catalog_with(2e-2, 1.5).unwrap();
        assert_eq!(catalog.len(), 6);
        for spec in &catalog {
            assert_relative_eq!(
                spec.required_gsnr_worst_db - spec.required_gsnr_typical_db,
                WORST_CASE_MARGIN_DB,
                epsilon = 1e-12
            );
        }
        // 69 GBd thresholds rise with bits/symbol.
        let gbd69: Vec<&ModFormatSpec> = catalog
            .iter()
            .filter(|s| s.config.symbol_rate_gbd == 69.0)
            .collect();
        for pair in gbd69.windows(2) {
            assert!(pair[0].required_gsnr_typical_db < pair[1].required_gsnr_typical_db);
        }
        let json = write_catalog_json(&catalog).unwrap();
        assert_eq!(read_catalog_json(&json).unwrap(), catalog);
    }

    #[test]
    fn catalog_validation_rejects_inconsistencies() {
        let mut catalog = default_catalog_with(2e-2, 1.5).unwrap();
        catalog[0].required_gsnr_worst_db = catalog[0].required_gsnr_typical_db - 0.5;
        assert!(validate_catalog(&catalog).is_err());

        let mut catalog = default_catalog_with(2e-2, 1.5).unwrap();
        catalog[1].required_gsnr_typical_db = catalog[5].required_gsnr_typical_db + 1.0;
        assert!(validate_catalog(&catalog).is_err(), "threshold ordering must hold");

        let mut catalog = default_catalog_with(2e-2, 1.5).unwrap();
        catalog[2].config.line_rate_gbps = 1000.0;
        assert!(validate_catalog(&catalog).is_err(), "line rate above raw capacity");

        assert!(matches!(validate_catalog(&[]), Err(Error::EmptyCatalog)));
    }
}
