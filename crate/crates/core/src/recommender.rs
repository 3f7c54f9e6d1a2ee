//! Margin computation against a transponder catalog, configuration
//! selection, and verification of the selection against the link ground
//! truth.
//!
//! The margin of a catalog entry is the estimated in-band GSNR minus the
//! entry's typical required GSNR. An entry is deemed feasible when that
//! margin covers the caller's operating margin.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::link_model::{true_gsnr_db, LaunchSpec, Lightpath, SpectrumSlot};
use crate::transponder_model::{validate_catalog, ModFormatSpec};

/// Outcome classes of a feasibility prediction checked against the ground
/// truth; "positive" means predicted feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::TruePositive => "true-positive",
            Classification::FalsePositive => "false-positive",
            Classification::TrueNegative => "true-negative",
            Classification::FalseNegative => "false-negative",
        };
        f.write_str(s)
    }
}

/// Classifies one predicted-vs-actual feasibility pair.
pub fn classify(predicted_feasible: bool, actually_feasible: bool) -> Classification {
    match (predicted_feasible, actually_feasible) {
        (true, true) => Classification::TruePositive,
        (true, false) => Classification::FalsePositive,
        (false, false) => Classification::TrueNegative,
        (false, true) => Classification::FalseNegative,
    }
}

/// One catalog entry scored against a GSNR estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginEntry {
    pub spec: ModFormatSpec,
    /// Estimated GSNR minus the typical required GSNR (dB).
    pub margin_db: f64,
    /// Whether the margin covers the operating margin.
    pub feasible: bool,
}

/// Ranked margins plus the selected entry, if any was feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub estimated_gsnr_db: f64,
    pub operating_margin_db: f64,
    /// Entries in selection preference order (line rate, then spectral
    /// efficiency, then narrower signal).
    pub ranking: Vec<MarginEntry>,
    /// Index of the chosen entry within `ranking`.
    pub chosen: Option<usize>,
}

impl Recommendation {
    pub fn chosen_entry(&self) -> Option<&MarginEntry> {
        self.chosen.map(|i| &self.ranking[i])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Selection preference: highest line rate, then most bits per symbol, then
/// lowest symbol rate, with the name as the final deterministic tie break.
fn preference(a: &ModFormatSpec, b: &ModFormatSpec) -> Ordering {
    b.config
        .line_rate_gbps
        .total_cmp(&a.config.line_rate_gbps)
        .then(b.config.bits_per_symbol.total_cmp(&a.config.bits_per_symbol))
        .then(a.config.symbol_rate_gbd.total_cmp(&b.config.symbol_rate_gbd))
        .then(a.config.name.cmp(&b.config.name))
}

/// Scores every catalog entry against a GSNR estimate, in preference order.
pub fn compute_margins(
    estimated_gsnr_db: f64,
    catalog: &[ModFormatSpec],
    operating_margin_db: f64,
) -> Result<Vec<MarginEntry>> {
    if !estimated_gsnr_db.is_finite() {
        return Err(Error::invalid("estimated_gsnr_db", "must be finite"));
    }
    if !(operating_margin_db >= 0.0) {
        return Err(Error::invalid("operating_margin_db", "must be >= 0"));
    }
    validate_catalog(catalog)?;
    let mut entries: Vec<MarginEntry> = catalog
        .iter()
        .map(|spec| {
            let margin_db = estimated_gsnr_db - spec.required_gsnr_typical_db;
            MarginEntry {
                spec: spec.clone(),
                margin_db,
                feasible: margin_db >= operating_margin_db,
            }
        })
        .collect();
    entries.sort_by(|a, b| preference(&a.spec, &b.spec));
    Ok(entries)
}

/// Picks the most preferred feasible entry; `chosen` is `None` when nothing
/// clears the operating margin.
pub fn recommend(
    estimated_gsnr_db: f64,
    catalog: &[ModFormatSpec],
    operating_margin_db: f64,
) -> Result<Recommendation> {
    let ranking = compute_margins(estimated_gsnr_db, catalog, operating_margin_db)?;
    let chosen = ranking.iter().position(|e| e.feasible);
    Ok(Recommendation {
        estimated_gsnr_db,
        operating_margin_db,
        ranking,
        chosen,
    })
}

/// Which catalog threshold the ground-truth check is held against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSource {
    Typical,
    Worst,
}

/// Ground-truth feasibility of one entry on a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActualFeasibility {
    /// Link GSNR at the entry's own symbol rate (dB).
    pub true_gsnr_db: f64,
    /// Threshold the entry was held against (dB).
    pub required_gsnr_db: f64,
    pub feasible: bool,
}

/// Evaluates an entry on the real link: true GSNR at the entry's own symbol
/// rate and constant launch PSD, against its required threshold.
pub fn actual_feasibility(
    spec: &ModFormatSpec,
    path: &Lightpath,
    slot: &SpectrumSlot,
    psd_w_per_hz: f64,
    txrx_snr_db: Option<f64>,
    source: ThresholdSource,
) -> Result<ActualFeasibility> {
    spec.validate()?;
    let launch = LaunchSpec::new(psd_w_per_hz, spec.config.symbol_rate_gbd);
    let gsnr = true_gsnr_db(path, &launch, slot, txrx_snr_db)?;
    let required = match source {
        ThresholdSource::Typical => spec.required_gsnr_typical_db,
        ThresholdSource::Worst => spec.required_gsnr_worst_db,
    };
    Ok(ActualFeasibility {
        true_gsnr_db: gsnr,
        required_gsnr_db: required,
        feasible: gsnr >= required,
    })
}

/// A recommendation checked entry by entry against the link ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifiedSelection {
    pub recommendation: Recommendation,
    /// Ground truth per ranked entry, parallel to `recommendation.ranking`.
    pub actual: Vec<ActualFeasibility>,
    /// Prediction class per ranked entry.
    pub classifications: Vec<Classification>,
    /// Class of the chosen entry, if one was chosen.
    pub chosen_classification: Option<Classification>,
    /// Index of the best entry that truly works (the pick of an oracle).
    pub ideal: Option<usize>,
}

impl VerifiedSelection {
    /// True when a chosen entry does not actually close.
    pub fn chose_infeasible(&self) -> bool {
        self.chosen_classification == Some(Classification::FalsePositive)
    }

    /// True when the selection is strictly more conservative than the
    /// oracle's pick (or missing entirely while one exists).
    pub fn undersells(&self) -> bool {
        match (self.recommendation.chosen, self.ideal) {
            (Some(c), Some(i)) => c > i,
            (None, Some(_)) => true,
            _ => false,
        }
    }
}

/// Verifies a recommendation: evaluates every ranked entry on the real link
/// and classifies each feasibility prediction.
pub fn verify_recommendation(
    recommendation: Recommendation,
    path: &Lightpath,
    slot: &SpectrumSlot,
    psd_w_per_hz: f64,
    txrx_snr_db: Option<f64>,
    source: ThresholdSource,
) -> Result<VerifiedSelection> {
    let actual = recommendation
        .ranking
        .iter()
        .map(|e| actual_feasibility(&e.spec, path, slot, psd_w_per_hz, txrx_snr_db, source))
        .collect::<Result<Vec<_>>>()?;
    let classifications: Vec<Classification> = recommendation
        .ranking
        .iter()
        .zip(&actual)
        .map(|(e, a)| classify(e.feasible, a.feasible))
        .collect();
    let chosen_classification = recommendation.chosen.map(|i| classifications[i]);
    let ideal = actual.iter().position(|a| a.feasible);
    Ok(VerifiedSelection {
        recommendation,
        actual,
        classifications,
        chosen_classification,
        ideal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link_model::FiberSpan;
    use crate::transponder_model::{default_catalog_with, TransponderConfig};
    use approx::assert_relative_eq;

    fn catalog() -> Vec<ModFormatSpec> {
        default_catalog_with(2e-2, 1.5).unwrap()
    }

    fn spec(name: &str, bits: f64, rs: f64, rate: f64, typical: f64) -> ModFormatSpec {
        ModFormatSpec {
            config: TransponderConfig::new(name, bits, rs, rate),
            required_gsnr_typical_db: typical,
            required_gsnr_worst_db: typical + 1.0,
        }
    }

    fn path(n: usize) -> Lightpath {
        Lightpath::new("p", vec![FiberSpan::transparent(80.0, 0.2, 1.3, -21.3, 5.0); n])
    }

    fn slot() -> SpectrumSlot {
        SpectrumSlot::new(194.2, 100.0)
    }

    const PSD: f64 = 1e-3 / 69e9;

    #[test]
    fn margin_is_estimate_minus_typical_requirement() {
        let one = vec![spec("only", 3.0, 69.0, 300.0, 12.58)];
        let margins = compute_margins(14.0, &one, 0.0).unwrap();
        assert_relative_eq!(margins[0].margin_db, 1.42, epsilon = 1e-12);
        assert!(margins[0].feasible);
    }

    #[test]
    fn ranking_is_in_preference_order() {
        let ranking = compute_margins(14.0, &catalog(), 0.0).unwrap();
        let rates: Vec<f64> = ranking.iter().map(|e| e.spec.config.line_rate_gbps).collect();
        assert_eq!(rates, [400.0, 350.0, 300.0, 250.0, 200.0, 100.0]);
    }

    #[test]
    fn recommend_picks_highest_feasible_line_rate() {
        // 400G needs ~14.21 dB, 350G ~12.69 dB.
        let rec = recommend(14.0, &catalog(), 0.0).unwrap();
        let chosen = rec.chosen_entry().unwrap();
        assert_eq!(chosen.spec.config.line_rate_gbps, 350.0);
        assert!(!rec.ranking[0].feasible, "400G must be out of reach at 14 dB");
    }

    #[test]
    fn zero_margin_at_the_threshold_is_feasible() {
        let threshold = catalog()
            .iter()
            .find(|s| s.config.line_rate_gbps == 350.0)
            .unwrap()
            .required_gsnr_typical_db;
        let rec = recommend(threshold, &catalog(), 0.0).unwrap();
        let chosen = rec.chosen_entry().unwrap();
        assert_eq!(chosen.spec.config.line_rate_gbps, 350.0);
        assert_relative_eq!(chosen.margin_db, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn operating_margin_steps_the_selection_down() {
        let rec = recommend(14.0, &catalog(), 0.7).unwrap();
        assert_eq!(rec.chosen_entry().unwrap().spec.config.line_rate_gbps, 350.0);
        let rec = recommend(14.0, &catalog(), 1.4).unwrap();
        assert_eq!(
            rec.chosen_entry().unwrap().spec.config.line_rate_gbps,
            300.0,
            "a 1.4 dB operating margin must push the pick below 350G"
        );
    }

    #[test]
    fn nothing_feasible_yields_no_choice() {
        let rec = recommend(5.0, &catalog(), 0.0).unwrap();
        assert_eq!(rec.chosen, None);
        assert!(rec.ranking.iter().all(|e| !e.feasible));
    }

    #[test]
    fn ties_prefer_more_bits_then_narrower_signal() {
        let specs = vec![
            spec("wide-low-order", 3.0, 92.0, 300.0, 10.0),
            spec("narrow-high-order", 4.5, 46.0, 300.0, 12.0),
            spec("narrow-low-order", 3.0, 69.0, 300.0, 10.5),
        ];
        let rec = recommend(20.0, &specs, 0.0).unwrap();
        let names: Vec<&str> = rec
            .ranking
            .iter()
            .map(|e| e.spec.config.name.as_str())
            .collect();
        assert_eq!(
            names,
            ["narrow-high-order", "narrow-low-order", "wide-low-order"]
        );
        assert_eq!(rec.chosen, Some(0));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(compute_margins(f64::NAN, &catalog(), 0.0).is_err());
        assert!(compute_margins(14.0, &catalog(), -0.1).is_err());
        assert!(matches!(
            compute_margins(14.0, &[], 0.0),
            Err(Error::EmptyCatalog)
        ));
    }

    #[test]
    fn classification_covers_all_quadrants() {
        assert_eq!(classify(true, true), Classification::TruePositive);
        assert_eq!(classify(true, false), Classification::FalsePositive);
        assert_eq!(classify(false, false), Classification::TrueNegative);
        assert_eq!(classify(false, true), Classification::FalseNegative);
        assert_eq!(Classification::FalsePositive.to_string(), "false-positive");
    }

    #[test]
    fn verification_flags_an_optimistic_selection() {
        // On 47 spans the 69 GBd link GSNR sits just below the 350G
        // threshold; a slightly optimistic estimate picks 350G anyway.
        let p = path(47);
        let launch = LaunchSpec::new(PSD, 69.0);
        let truth = true_gsnr_db(&p, &launch, &slot(), None).unwrap();
        let rec = recommend(truth + 0.3, &catalog(), 0.0).unwrap();
        assert_eq!(rec.chosen_entry().unwrap().spec.config.line_rate_gbps, 350.0);
        let verified =
            verify_recommendation(rec, &p, &slot(), PSD, None, ThresholdSource::Typical).unwrap();
        assert!(verified.chose_infeasible());
        assert_eq!(
            verified.chosen_classification,
            Some(Classification::FalsePositive)
        );
        // The oracle pick is the 300G entry, ranked right after 350G.
        assert_eq!(verified.ideal, Some(2));
    }

    #[test]
    fn verification_flags_a_conservative_selection() {
        // On 61 spans the link truly supports 300G with ~0.23 dB to spare; a
        // pessimistic estimate misses it.
        let p = path(61);
        let launch = LaunchSpec::new(PSD, 69.0);
        let truth = true_gsnr_db(&p, &launch, &slot(), None).unwrap();
        let rec = recommend(truth - 0.3, &catalog(), 0.0).unwrap();
        assert_eq!(rec.chosen_entry().unwrap().spec.config.line_rate_gbps, 250.0);
        let verified =
            verify_recommendation(rec, &p, &slot(), PSD, None, ThresholdSource::Typical).unwrap();
        assert!(verified.undersells());
        assert!(!verified.chose_infeasible());
        let i300 = verified
            .recommendation
            .ranking
            .iter()
            .position(|e| e.spec.config.line_rate_gbps == 300.0)
            .unwrap();
        assert_eq!(
            verified.classifications[i300],
            Classification::FalseNegative
        );
    }

    #[test]
    fn worst_case_threshold_is_stricter() {
        // 61 spans: feasible for 300G against typical, not against worst.
        let p = path(61);
        let entry = catalog()
            .into_iter()
            .find(|s| s.config.line_rate_gbps == 300.0)
            .unwrap();
        let typical =
            actual_feasibility(&entry, &p, &slot(), PSD, None, ThresholdSource::Typical).unwrap();
        let worst =
            actual_feasibility(&entry, &p, &slot(), PSD, None, ThresholdSource::Worst).unwrap();
        assert!(typical.feasible);
        assert!(!worst.feasible);
        assert_relative_eq!(
            worst.required_gsnr_db - typical.required_gsnr_db,
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn recommendation_round_trips_through_json() {
        let rec = recommend(14.0, &catalog(), 0.7).unwrap();
        let json = rec.to_json().unwrap();
        assert_eq!(Recommendation::from_json(&json).unwrap(), rec);
    }
}
