//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A span, path, slot, launch or config field is out of its physical domain.
    #[error("invalid {what}: {why}")]
    InvalidParameter { what: &'static str, why: String },

    /// The incoherent NLI closed form needs nonzero group-velocity dispersion.
    #[error("zero-dispersion span unsupported: span {index} has beta2 = 0")]
    ZeroDispersionSpan { index: usize },

    /// Amplifier gain on a span does not compensate its loss, breaking the
    /// transparent-path convention the noise accumulation relies on.
    #[error(
        "non-transparent span {index}: amp gain {gain_db} dB vs span loss {loss_db} dB"
    )]
    NonTransparentSpan {
        index: usize,
        gain_db: f64,
        loss_db: f64,
    },

    /// The probe signal does not fit inside the assigned spectrum slot.
    #[error("signal bandwidth {bandwidth_ghz} GHz exceeds slot width {slot_width_ghz} GHz")]
    SignalExceedsSlot {
        bandwidth_ghz: f64,
        slot_width_ghz: f64,
    },

    #[error("characterization needs at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("OSNR spread {spread_db:.3} dB below the {need_db} dB minimum for a stable fit")]
    InsufficientSpread { spread_db: f64, need_db: f64 },

    #[error("rank-deficient characterization: samples do not determine a quadratic")]
    RankDeficientFit,

    /// The fitted Q-over-OSNR curve is not strictly increasing on the sample
    /// range, so it cannot be inverted; `zero_crossing_db` is where the
    /// derivative changes sign.
    #[error("non-monotonic fit: derivative crosses zero at {zero_crossing_db:.3} dB OSNR")]
    NonMonotonicFit { zero_crossing_db: f64 },

    /// Q landed outside the fitted curve's image, so inversion would
    /// extrapolate; `nearest_q_db` is the closest attainable Q.
    #[error("q {q_db:.3} dB outside fitted range, nearest attainable {nearest_q_db:.3} dB")]
    QOutOfRange { q_db: f64, nearest_q_db: f64 },

    #[error("unknown {what} {name:?}")]
    UnknownName { what: &'static str, name: String },

    #[error("empty catalog: no transponder operating modes to rank")]
    EmptyCatalog,

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("malformed sample at line {line}: {why}")]
    MalformedSample { line: u64, why: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            why: why.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
