//! End-to-end experiment: characterize a set of probe settings, probe every
//! path under seeded measurement noise, recommend configurations from the
//! reference probe's estimates, and verify each pick against the link
//! ground truth.
//!
//! One noise realization per (path, trial) is shared by all probe settings
//! (common random numbers), so probe-setting comparisons are paired and
//! their systematic deviations are not washed out by readout noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::link_model::{true_gsnr_db, FiberSpan, LaunchSpec, Lightpath, SpectrumSlot};
use crate::probe_engine::{run_probe, ProbeRunSettings};
use crate::recommender::{
    actual_feasibility, recommend, verify_recommendation, Classification, ThresholdSource,
};
use crate::transponder_model::{
    default_catalog_with, fit_b2b, synthesize_b2b, validate_catalog, ModFormatSpec,
    QuadraticFit, TransponderConfig, MIN_FIT_SPREAD_DB,
};

// ------------------------------------------------------------------------
// Scenario
// ------------------------------------------------------------------------

/// One path under test: the modeled lightpath plus its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub label: String,
    /// Route length of the deployed system this path stands in for (km);
    /// the model itself uses whole spans, so the two differ slightly.
    pub nominal_length_km: f64,
    /// True when the path is a constructed stand-in, not a deployed route.
    #[serde(default)]
    pub synthetic: bool,
    pub slot: SpectrumSlot,
    pub path: Lightpath,
}

/// One probe setting and the OSNR sweep of its characterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub config: TransponderConfig,
    pub b2b_osnr_min_db: f64,
    pub b2b_osnr_max_db: f64,
    #[serde(default = "default_b2b_step_db")]
    pub b2b_step_db: f64,
}

fn default_b2b_step_db() -> f64 {
    0.5
}

fn default_trials() -> u64 {
    200
}

/// Full experiment description; serializable so runs can be reproduced from
/// the scenario file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub paths: Vec<PathSpec>,
    pub probes: Vec<ProbeSpec>,
    /// Probe whose estimates drive recommendation and margin accounting.
    pub reference_probe: String,
    pub catalog: Vec<ModFormatSpec>,
    /// Launch PSD shared by probes and configs (W/Hz); constant-PSD rule.
    pub launch_psd_w_per_hz: f64,
    /// Std dev of the receiver Q readout noise (dB).
    pub q_noise_sigma_db: f64,
    /// Implementation penalty of the characterized bench module (dB).
    pub characterization_penalty_db: f64,
    /// Extra penalty of the in-field module over the bench module (dB).
    #[serde(default)]
    pub module_offset_db: f64,
    /// Margin a config must clear on top of its threshold to be picked (dB).
    #[serde(default)]
    pub operating_margin_db: f64,
    /// Optional transceiver SNR floor in the ground truth (dB).
    #[serde(default)]
    pub txrx_snr_db: Option<f64>,
    /// Paths whose probe-setting deviations are the headline comparison.
    #[serde(default)]
    pub comparison_paths: Vec<String>,
    /// Noise trials per (path, probe).
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::invalid("scenario", "no paths"));
        }
        if self.probes.is_empty() {
            return Err(Error::invalid("scenario", "no probes"));
        }
        for (i, p) in self.paths.iter().enumerate() {
            if p.label.is_empty() {
                return Err(Error::invalid("scenario", format!("path {i} has an empty label")));
            }
            if self.paths[..i].iter().any(|q| q.label == p.label) {
                return Err(Error::invalid(
                    "scenario",
                    format!("duplicate path label {:?}", p.label),
                ));
            }
            if !(p.nominal_length_km > 0.0) {
                return Err(Error::invalid(
                    "scenario",
                    format!("path {:?}: nominal_length_km must be positive", p.label),
                ));
            }
            p.path.validate()?;
            p.slot.validate()?;
        }
        for (i, probe) in self.probes.iter().enumerate() {
            probe.config.validate()?;
            if self.probes[..i].iter().any(|q| q.config.name == probe.config.name) {
                return Err(Error::invalid(
                    "scenario",
                    format!("duplicate probe name {:?}", probe.config.name),
                ));
            }
            if !(probe.b2b_step_db > 0.0) || probe.b2b_osnr_max_db <= probe.b2b_osnr_min_db {
                return Err(Error::invalid(
                    "scenario",
                    format!("probe {:?}: bad B2B sweep", probe.config.name),
                ));
            }
            if probe.b2b_osnr_max_db - probe.b2b_osnr_min_db < MIN_FIT_SPREAD_DB {
                return Err(Error::invalid(
                    "scenario",
                    format!(
                        "probe {:?}: B2B sweep narrower than {MIN_FIT_SPREAD_DB} dB",
                        probe.config.name
                    ),
                ));
            }
        }
        if self.probe(&self.reference_probe).is_none() {
            return Err(Error::UnknownName {
                what: "reference probe",
                name: self.reference_probe.clone(),
            });
        }
        for label in &self.comparison_paths {
            if !self.paths.iter().any(|p| &p.label == label) {
                return Err(Error::UnknownName {
                    what: "comparison path",
                    name: label.clone(),
                });
            }
        }
        validate_catalog(&self.catalog)?;
        if !(self.launch_psd_w_per_hz > 0.0) || !self.launch_psd_w_per_hz.is_finite() {
            return Err(Error::invalid("launch_psd_w_per_hz", "must be positive"));
        }
        if self.q_noise_sigma_db < 0.0 {
            return Err(Error::invalid("q_noise_sigma_db", "must be >= 0"));
        }
        if self.characterization_penalty_db < 0.0 {
            return Err(Error::invalid("characterization_penalty_db", "must be >= 0"));
        }
        if self.characterization_penalty_db + self.module_offset_db < 0.0 {
            return Err(Error::invalid(
                "module_offset_db",
                "effective module penalty must stay >= 0",
            ));
        }
        if !(self.operating_margin_db >= 0.0) {
            return Err(Error::invalid("operating_margin_db", "must be >= 0"));
        }
        if let Some(txrx) = self.txrx_snr_db {
            if !(txrx > 0.0) {
                return Err(Error::invalid("txrx_snr_db", "must be a positive dB value"));
            }
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        Ok(())
    }

    pub fn probe(&self, name: &str) -> Option<&ProbeSpec> {
        self.probes.iter().find(|p| p.config.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(json)?;
        scenario.validate()?;
        Ok(scenario)
    }
}

/// The built-in scenario: six 80 km span chains standing in for routes from
/// 1016 to 5738 km (the longest realized as a loopback), four probe
/// settings, and the default catalog.
pub fn build_default_scenario() -> Scenario {
    let span = FiberSpan::transparent(80.0, 0.2, 1.3, -21.3, 5.0);
    let route = |label: &str, nominal: f64, n: usize, synthetic: bool, freq: f64| PathSpec {
        label: label.to_string(),
        nominal_length_km: nominal,
        synthetic,
        slot: SpectrumSlot::new(freq, 100.0),
        path: Lightpath::new(label, vec![span.clone(); n]),
    };
    let loopback = PathSpec {
        label: "5738km".to_string(),
        nominal_length_km: 5738.0,
        synthetic: false,
        slot: SpectrumSlot::new(194.2, 100.0),
        path: Lightpath::new("5738km", vec![span.clone(); 36]).with_loopbacks(1),
    };
    let probe = |name: &str, bits: f64, rs: f64, rate: f64, lo: f64| ProbeSpec {
        config: TransponderConfig::new(name, bits, rs, rate),
        b2b_osnr_min_db: lo,
        b2b_osnr_max_db: 30.0,
        b2b_step_db: 0.5,
    };
    Scenario {
        paths: vec![
            route("1016km", 1016.0, 13, false, 193.9),
            route("1792km", 1792.0, 22, false, 194.0),
            route("2943km", 2943.0, 37, false, 194.1),
            route("3735km", 3735.0, 47, true, 194.2),
            route("4851km", 4851.0, 61, true, 194.2),
            loopback,
        ],
        probes: vec![
            probe("qpsk-34", 2.0, 34.0, 100.0, 10.0),
            probe("qpsk-69", 2.0, 69.0, 200.0, 10.0),
            probe("8qam-69", 3.0, 69.0, 300.0, 12.0),
            probe("16qam-69", 4.0, 69.0, 400.0, 14.0),
        ],
        reference_probe: "qpsk-69".to_string(),
        catalog: default_catalog_with(2e-2, 1.5).expect("default catalog is well formed"),
        launch_psd_w_per_hz: 1e-3 / 69e9,
        q_noise_sigma_db: 0.2,
        characterization_penalty_db: 1.5,
        module_offset_db: 0.1,
        operating_margin_db: 0.0,
        txrx_snr_db: None,
        comparison_paths: vec!["1016km".to_string(), "1792km".to_string()],
        trials: 200,
        master_seed: 0,
    }
}

// ------------------------------------------------------------------------
// Report
// ------------------------------------------------------------------------

/// Estimate statistics of one probe setting on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub mean_estimated_gsnr_db: f64,
    pub std_estimated_gsnr_db: f64,
    pub min_estimated_gsnr_db: f64,
    pub max_estimated_gsnr_db: f64,
    /// Mean estimate error against the truth at this probe's own rate (dB).
    pub mean_error_db: f64,
    pub max_abs_error_db: f64,
    /// Mean estimate minus the reference probe's mean estimate (dB).
    pub mean_dev_from_reference_db: f64,
}

/// Recommendation outcome of one noise trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSelection {
    pub seed: u64,
    pub estimated_gsnr_db: f64,
    pub chosen: Option<String>,
    pub margin_db: Option<f64>,
    pub classification: Option<Classification>,
    /// True when the pick is strictly below what the link truly supports.
    pub undersells: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub label: String,
    pub nominal_length_km: f64,
    pub synthetic: bool,
    /// Ground-truth GSNR at each probe's own symbol rate (dB).
    pub true_gsnr_by_probe: BTreeMap<String, f64>,
    /// Signed noise-free estimate error per probe (dB).
    pub noiseless_closure_db: BTreeMap<String, f64>,
    pub probe_stats: BTreeMap<String, ProbeStats>,
    /// Per-trial selections from the reference probe.
    pub selections: Vec<SeedSelection>,
    pub chosen_counts: BTreeMap<String, u64>,
    pub false_positive_count: u64,
    pub undersell_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub path_count: usize,
    pub probe_count: usize,
    pub trials: u64,
    pub false_positive_total: u64,
    pub undersell_total: u64,
    /// Largest |noise-free estimate error| over every (path, probe) (dB).
    pub worst_noiseless_closure_db: f64,
    /// Largest |estimate error| of the reference probe over all trials (dB).
    pub max_abs_reference_error_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub reference_probe: String,
    pub comparison_paths: Vec<String>,
    pub operating_margin_db: f64,
    pub paths: Vec<PathReport>,
    pub summary: ExperimentSummary,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn path(&self, label: &str) -> Option<&PathReport> {
        self.paths.iter().find(|p| p.label == label)
    }
}

/// One probe run, flattened for probes.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub path: String,
    pub probe: String,
    pub seed: u64,
    pub measured_q_db: f64,
    pub estimated_gosnr_db: f64,
    pub estimated_gsnr_db: f64,
}

/// One recommendation trial, flattened for margins.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub path: String,
    pub seed: u64,
    pub estimated_gsnr_db: f64,
    pub chosen_config: Option<String>,
    pub margin_db: Option<f64>,
    pub classification: Option<Classification>,
}

/// Mean margin of one config on one path, flattened for figure2.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub path: String,
    pub nominal_length_km: f64,
    pub config: String,
    pub mean_margin_db: f64,
    pub actually_feasible: bool,
}

/// Everything a run produces: the report plus the flat row sets the file
/// writers serialize.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutputs {
    pub scenario: Scenario,
    pub report: ExperimentReport,
    pub probe_rows: Vec<ProbeRow>,
    pub margin_rows: Vec<MarginRow>,
    pub figure_rows: Vec<FigureRow>,
}

// ------------------------------------------------------------------------
// Seed derivation
// ------------------------------------------------------------------------

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-run readout seed. Deliberately independent of the probe index: every
/// probe setting sees the same noise realization in a given trial, pairing
/// the probe-setting comparison.
fn derive_seed(master: u64, path_idx: u64, trial: u64) -> u64 {
    let mut s = splitmix64(master ^ 0xA076_1D64_78BD_642F);
    s = splitmix64(s ^ path_idx);
    splitmix64(s ^ trial)
}

// ------------------------------------------------------------------------
// Runner
// ------------------------------------------------------------------------

struct PathOutcome {
    report: PathReport,
    probe_rows: Vec<ProbeRow>,
    margin_rows: Vec<MarginRow>,
    figure_rows: Vec<FigureRow>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn run_path(
    scenario: &Scenario,
    fits: &BTreeMap<String, QuadraticFit>,
    path_idx: usize,
) -> Result<PathOutcome> {
    let ps = &scenario.paths[path_idx];
    let field_penalty_db = scenario.characterization_penalty_db + scenario.module_offset_db;
    let mut true_gsnr_by_probe = BTreeMap::new();
    let mut noiseless_closure_db = BTreeMap::new();
    let mut probe_stats = BTreeMap::new();
    let mut probe_rows = Vec::new();
    let mut estimates_by_probe: BTreeMap<&str, Vec<f64>> = BTreeMap::new();

    for probe in &scenario.probes {
        let name = probe.config.name.as_str();
        let fit = &fits[name];
        let launch = LaunchSpec::new(scenario.launch_psd_w_per_hz, probe.config.symbol_rate_gbd);
        let truth = true_gsnr_db(&ps.path, &launch, &ps.slot, scenario.txrx_snr_db)?;
        true_gsnr_by_probe.insert(name.to_string(), truth);

        // Noise-free closure run with the characterized module itself.
        let clean = run_probe(
            &ps.path,
            &probe.config,
            &ps.slot,
            &launch,
            fit,
            &ProbeRunSettings {
                impl_penalty_db: scenario.characterization_penalty_db,
                txrx_snr_db: scenario.txrx_snr_db,
                ..ProbeRunSettings::default()
            },
        )?;
        noiseless_closure_db.insert(name.to_string(), clean.estimated_gsnr_db - truth);

        let mut estimates = Vec::with_capacity(scenario.trials as usize);
        for trial in 0..scenario.trials {
            let settings = ProbeRunSettings {
                impl_penalty_db: field_penalty_db,
                q_noise_sigma_db: scenario.q_noise_sigma_db,
                seed: derive_seed(scenario.master_seed, path_idx as u64, trial),
                gosnr_bias_db: 0.0,
                clamp_to_fit_range: false,
                txrx_snr_db: scenario.txrx_snr_db,
            };
            let result = run_probe(&ps.path, &probe.config, &ps.slot, &launch, fit, &settings)?;
            probe_rows.push(ProbeRow {
                path: ps.label.clone(),
                probe: name.to_string(),
                seed: settings.seed,
                measured_q_db: result.measured_q_db,
                estimated_gosnr_db: result.estimated_gosnr_db,
                estimated_gsnr_db: result.estimated_gsnr_db,
            });
            estimates.push(result.estimated_gsnr_db);
        }
        estimates_by_probe.insert(name, estimates);
    }

    let ref_mean = mean(&estimates_by_probe[scenario.reference_probe.as_str()]);
    for probe in &scenario.probes {
        let name = probe.config.name.as_str();
        let estimates = &estimates_by_probe[name];
        let truth = true_gsnr_by_probe[name];
        let m = mean(estimates);
        let errors: Vec<f64> = estimates.iter().map(|e| e - truth).collect();
        probe_stats.insert(
            name.to_string(),
            ProbeStats {
                mean_estimated_gsnr_db: m,
                std_estimated_gsnr_db: std_dev(estimates, m),
                min_estimated_gsnr_db: estimates.iter().copied().fold(f64::INFINITY, f64::min),
                max_estimated_gsnr_db: estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_error_db: mean(&errors),
                max_abs_error_db: errors.iter().fold(0.0f64, |a, e| a.max(e.abs())),
                mean_dev_from_reference_db: m - ref_mean,
            },
        );
    }

    // Recommendations per trial from the reference probe, verified against
    // the link truth at each entry's own symbol rate.
    let mut selections = Vec::with_capacity(scenario.trials as usize);
    let mut margin_rows = Vec::with_capacity(scenario.trials as usize);
    let mut chosen_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut false_positive_count = 0u64;
    let mut undersell_count = 0u64;
    let ref_estimates = &estimates_by_probe[scenario.reference_probe.as_str()];
    for (trial, &estimate) in ref_estimates.iter().enumerate() {
        let seed = derive_seed(scenario.master_seed, path_idx as u64, trial as u64);
        let rec = recommend(estimate, &scenario.catalog, scenario.operating_margin_db)?;
        let verified = verify_recommendation(
            rec,
            &ps.path,
            &ps.slot,
            scenario.launch_psd_w_per_hz,
            scenario.txrx_snr_db,
            ThresholdSource::Typical,
        )?;
        let chosen = verified
            .recommendation
            .chosen_entry()
            .map(|e| e.spec.config.name.clone());
        if let Some(name) = &chosen {
            *chosen_counts.entry(name.clone()).or_insert(0) += 1;
        }
        if verified.chose_infeasible() {
            false_positive_count += 1;
        }
        let undersells = verified.undersells();
        if undersells {
            undersell_count += 1;
        }
        let margin_db = verified.recommendation.chosen_entry().map(|e| e.margin_db);
        margin_rows.push(MarginRow {
            path: ps.label.clone(),
            seed,
            estimated_gsnr_db: estimate,
            chosen_config: chosen.clone(),
            margin_db,
            classification: verified.chosen_classification,
        });
        selections.push(SeedSelection {
            seed,
            estimated_gsnr_db: estimate,
            chosen,
            margin_db,
            classification: verified.chosen_classification,
            undersells,
        });
    }

    // Mean margin of every catalog entry for the length/margin table.
    let mut figure_rows = Vec::with_capacity(scenario.catalog.len());
    for spec in &scenario.catalog {
        let actual = actual_feasibility(
            spec,
            &ps.path,
            &ps.slot,
            scenario.launch_psd_w_per_hz,
            scenario.txrx_snr_db,
            ThresholdSource::Typical,
        )?;
        figure_rows.push(FigureRow {
            path: ps.label.clone(),
            nominal_length_km: ps.nominal_length_km,
            config: spec.config.name.clone(),
            mean_margin_db: mean(ref_estimates) - spec.required_gsnr_typical_db,
            actually_feasible: actual.feasible,
        });
    }

    Ok(PathOutcome {
        report: PathReport {
            label: ps.label.clone(),
            nominal_length_km: ps.nominal_length_km,
            synthetic: ps.synthetic,
            true_gsnr_by_probe,
            noiseless_closure_db,
            probe_stats,
            selections,
            chosen_counts,
            false_positive_count,
            undersell_count,
        },
        probe_rows,
        margin_rows,
        figure_rows,
    })
}

/// Runs the whole grid: every probe on every path for every trial, then the
/// per-trial recommendation loop. Deterministic for a given scenario.
pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentOutputs> {
    scenario.validate()?;

    // One shared B2B characterization per probe setting.
    let mut fits = BTreeMap::new();
    for probe in &scenario.probes {
        let samples = synthesize_b2b(
            &probe.config,
            probe.b2b_osnr_min_db,
            probe.b2b_osnr_max_db,
            probe.b2b_step_db,
            scenario.characterization_penalty_db,
        )?;
        fits.insert(probe.config.name.clone(), fit_b2b(&samples)?);
    }

    let outcomes: Vec<PathOutcome> = (0..scenario.paths.len())
        .into_par_iter()
        .map(|i| run_path(scenario, &fits, i))
        .collect::<Result<Vec<_>>>()?;

    let mut paths = Vec::with_capacity(outcomes.len());
    let mut probe_rows = Vec::new();
    let mut margin_rows = Vec::new();
    let mut figure_rows = Vec::new();
    let mut false_positive_total = 0;
    let mut undersell_total = 0;
    let mut worst_closure = 0.0f64;
    let mut max_ref_err = 0.0f64;
    for outcome in outcomes {
        false_positive_total += outcome.report.false_positive_count;
        undersell_total += outcome.report.undersell_count;
        for closure in outcome.report.noiseless_closure_db.values() {
            worst_closure = worst_closure.max(closure.abs());
        }
        max_ref_err = max_ref_err
            .max(outcome.report.probe_stats[&scenario.reference_probe].max_abs_error_db);
        paths.push(outcome.report);
        probe_rows.extend(outcome.probe_rows);
        margin_rows.extend(outcome.margin_rows);
        figure_rows.extend(outcome.figure_rows);
    }

    let report = ExperimentReport {
        reference_probe: scenario.reference_probe.clone(),
        comparison_paths: scenario.comparison_paths.clone(),
        operating_margin_db: scenario.operating_margin_db,
        summary: ExperimentSummary {
            path_count: paths.len(),
            probe_count: scenario.probes.len(),
            trials: scenario.trials,
            false_positive_total,
            undersell_total,
            worst_noiseless_closure_db: worst_closure,
            max_abs_reference_error_db: max_ref_err,
        },
        paths,
    };
    Ok(ExperimentOutputs {
        scenario: scenario.clone(),
        report,
        probe_rows,
        margin_rows,
        figure_rows,
    })
}

// ------------------------------------------------------------------------
// File output
// ------------------------------------------------------------------------

fn write_csv<W: std::io::Write>(
    writer: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn opt_to_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

impl ExperimentOutputs {
    pub fn margins_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &[
                "path",
                "seed",
                "estimated_gsnr_db",
                "chosen_config",
                "margin_db",
                "classification",
            ],
            self.margin_rows.iter().map(|r| {
                vec![
                    r.path.clone(),
                    r.seed.to_string(),
                    r.estimated_gsnr_db.to_string(),
                    opt_to_string(&r.chosen_config),
                    opt_to_string(&r.margin_db),
                    r.classification.map_or_else(String::new, |c| c.to_string()),
                ]
            }),
        )?;
        Ok(buf)
    }

    pub fn probes_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &[
                "path",
                "probe",
                "seed",
                "measured_q_db",
                "estimated_gosnr_db",
                "estimated_gsnr_db",
            ],
            self.probe_rows.iter().map(|r| {
                vec![
                    r.path.clone(),
                    r.probe.clone(),
                    r.seed.to_string(),
                    r.measured_q_db.to_string(),
                    r.estimated_gosnr_db.to_string(),
                    r.estimated_gsnr_db.to_string(),
                ]
            }),
        )?;
        Ok(buf)
    }

    pub fn figure2_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &[
                "path",
                "nominal_length_km",
                "config",
                "mean_margin_db",
                "actually_feasible",
            ],
            self.figure_rows.iter().map(|r| {
                vec![
                    r.path.clone(),
                    r.nominal_length_km.to_string(),
                    r.config.clone(),
                    r.mean_margin_db.to_string(),
                    r.actually_feasible.to_string(),
                ]
            }),
        )?;
        Ok(buf)
    }

    /// Writes scenario.json, report.json, margins.csv, probes.csv and
    /// figure2.csv. `figure2_override` redirects only the figure file.
    /// Returns the written paths.
    pub fn write_to_dir(
        &self,
        dir: &Path,
        figure2_override: Option<&Path>,
    ) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut emit = |path: PathBuf, bytes: Vec<u8>| -> Result<()> {
            fs::write(&path, bytes)?;
            written.push(path);
            Ok(())
        };
        emit(dir.join("scenario.json"), (self.scenario.to_json()? + "\n").into_bytes())?;
        emit(dir.join("report.json"), (self.report.to_json()? + "\n").into_bytes())?;
        emit(dir.join("margins.csv"), self.margins_csv()?)?;
        emit(dir.join("probes.csv"), self.probes_csv()?)?;
        let figure2 = figure2_override
            .map(Path::to_path_buf)
            .unwrap_or_else(|| dir.join("figure2.csv"));
        if let Some(parent) = figure2.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        emit(figure2, self.figure2_csv()?)?;
        Ok(written)
    }
}
