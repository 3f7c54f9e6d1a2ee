//! chanprobe: probe-based GSNR estimation and transponder selection.
//!
//! Four subcommands cover the workflow: `characterize` fits a back-to-back
//! Q-over-OSNR sweep, `probe` runs a characterized transponder over a
//! lightpath from a topology file, `recommend` scores a probe result against
//! a transponder catalog, and `experiment` replays the full built-in study.
//!
//! All randomness flows from explicit seeds (default 0); nothing reads the
//! clock or the environment, so equal invocations produce equal bytes.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use chanprobe_core::experiment::{build_default_scenario, run_experiment, Scenario};
use chanprobe_core::link_model::{LaunchSpec, Topology};
use chanprobe_core::probe_engine::{run_probe, ProbeRunSettings};
use chanprobe_core::recommender::{recommend, Recommendation};
use chanprobe_core::transponder_model::{
    default_catalog_with, fit_b2b, read_b2b_csv, read_catalog_json, QuadraticFit,
};
use chanprobe_core::ProbeResult;

/// Launch PSD giving 0 dBm in a 69 GHz signal (W/Hz).
const DEFAULT_PSD_W_PER_HZ: f64 = 1e-3 / 69e9;

/// Fewest B2B samples `characterize` accepts; stricter than the fit itself
/// so a file fit has at least one redundant sample.
const MIN_CLI_SAMPLES: usize = 4;

#[derive(Parser)]
#[command(name = "chanprobe", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a quadratic Q-over-OSNR model to a back-to-back sweep CSV.
    Characterize {
        /// Input CSV with header `osnr_db,q_db`.
        #[arg(long)]
        input: PathBuf,
        /// Output fit JSON.
        #[arg(long)]
        output: PathBuf,
    },
    /// Probe one lightpath and print the resulting estimate as JSON.
    Probe {
        /// Topology JSON with spans, lightpaths and slots.
        #[arg(long)]
        topology: PathBuf,
        /// B2B fit JSON of the probing transponder.
        #[arg(long)]
        fit: PathBuf,
        /// Probe setting name (one of the built-in settings).
        #[arg(long)]
        probe: String,
        /// Lightpath id within the topology.
        #[arg(long)]
        path: String,
        /// Slot name within the topology.
        #[arg(long)]
        slot: String,
        /// Readout noise seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Launch power spectral density (W/Hz).
        #[arg(long, default_value_t = DEFAULT_PSD_W_PER_HZ)]
        psd_w_per_hz: f64,
        /// Std dev of the Q readout noise (dB).
        #[arg(long, default_value_t = 0.0)]
        q_noise_sigma_db: f64,
        /// Implementation penalty of the probing module (dB).
        #[arg(long, default_value_t = 1.5)]
        impl_penalty_db: f64,
        /// Optional transceiver SNR floor of the link (dB).
        #[arg(long)]
        txrx_snr_db: Option<f64>,
        /// Clamp out-of-range Q readouts into the fitted range.
        #[arg(long)]
        clamp: bool,
    },
    /// Score a probe result against a catalog and pick a configuration.
    Recommend {
        /// Probe result JSON (as printed by `probe`).
        #[arg(long)]
        probe_result: PathBuf,
        /// Catalog JSON; the built-in catalog when omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Margin a config must clear on top of its threshold (dB).
        #[arg(long, default_value_t = 0.0)]
        operating_margin_db: f64,
        /// Print the recommendation as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the experiment grid and write its report files.
    Experiment {
        /// Scenario JSON; the built-in scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Directory receiving scenario.json, report.json and the CSVs.
        #[arg(long)]
        out_dir: PathBuf,
        /// Write the length/margin table to this path instead.
        #[arg(long)]
        figure2: Option<PathBuf>,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Characterize { input, output } => cmd_characterize(&input, &output),
        Command::Probe {
            topology,
            fit,
            probe,
            path,
            slot,
            seed,
            psd_w_per_hz,
            q_noise_sigma_db,
            impl_penalty_db,
            txrx_snr_db,
            clamp,
        } => cmd_probe(
            &topology,
            &fit,
            &probe,
            &path,
            &slot,
            ProbeRunSettings {
                impl_penalty_db,
                q_noise_sigma_db,
                seed,
                gosnr_bias_db: 0.0,
                clamp_to_fit_range: clamp,
                txrx_snr_db,
            },
            psd_w_per_hz,
        ),
        Command::Recommend {
            probe_result,
            catalog,
            operating_margin_db,
            json,
        } => cmd_recommend(&probe_result, catalog.as_deref(), operating_margin_db, json),
        Command::Experiment {
            scenario,
            out_dir,
            figure2,
            seed,
        } => cmd_experiment(scenario.as_deref(), &out_dir, figure2.as_deref(), seed),
    }
}

fn cmd_characterize(input: &std::path::Path, output: &std::path::Path) -> Result<()> {
    let file = fs::File::open(input)
        .with_context(|| format!("cannot open B2B sweep {}", input.display()))?;
    let samples = read_b2b_csv(file)
        .with_context(|| format!("cannot parse B2B sweep {}", input.display()))?;
    if samples.len() < MIN_CLI_SAMPLES {
        bail!(
            "characterization needs at least {MIN_CLI_SAMPLES} samples, got {}",
            samples.len()
        );
    }
    let fit = fit_b2b(&samples).context("fit failed")?;
    fs::write(output, fit.to_json()? + "\n")
        .with_context(|| format!("cannot write fit {}", output.display()))?;
    println!(
        "fitted {} samples: q = {}*osnr^2 + {}*osnr + {}",
        samples.len(),
        fit.a,
        fit.b,
        fit.c
    );
    println!("residual RMS: {:e} dB", fit.residual_rms(&samples));
    let (q_min, q_max) = fit.q_range();
    println!(
        "monotonic OSNR range: [{}, {}] dB mapping to Q [{}, {}] dB",
        fit.valid_range.0, fit.valid_range.1, q_min, q_max
    );
    println!("wrote {}", output.display());
    Ok(())
}

fn cmd_probe(
    topology_path: &std::path::Path,
    fit_path: &std::path::Path,
    probe_name: &str,
    path_id: &str,
    slot_name: &str,
    settings: ProbeRunSettings,
    psd_w_per_hz: f64,
) -> Result<()> {
    let topology = Topology::from_json(
        &fs::read_to_string(topology_path)
            .with_context(|| format!("cannot read topology {}", topology_path.display()))?,
    )
    .context("invalid topology")?;
    let fit = QuadraticFit::from_json(
        &fs::read_to_string(fit_path)
            .with_context(|| format!("cannot read fit {}", fit_path.display()))?,
    )
    .context("invalid fit")?;
    // Probe settings are the built-in ones; their names are stable CLI API.
    let scenario = build_default_scenario();
    let probe = scenario
        .probe(probe_name)
        .map(|p| p.config.clone())
        .ok_or(chanprobe_core::Error::UnknownName {
            what: "probe",
            name: probe_name.to_string(),
        })?;
    let path = topology.resolve_lightpath(path_id)?;
    let slot = topology.slot(slot_name)?;
    let launch = LaunchSpec::new(psd_w_per_hz, probe.symbol_rate_gbd);
    let result = run_probe(&path, &probe, &slot, &launch, &fit, &settings)?;
    println!("{}", result.to_json()?);
    Ok(())
}

fn render_margin_table(rec: &Recommendation) -> String {
    let name_width = rec
        .ranking
        .iter()
        .map(|e| e.spec.config.name.len())
        .max()
        .unwrap_or(6)
        .max("config".len());
    let mut out = String::new();
    out.push_str(&format!("estimated GSNR: {} dB\n", rec.estimated_gsnr_db));
    out.push_str(&format!("operating margin: {} dB\n\n", rec.operating_margin_db));
    out.push_str(&format!(
        "{:<name_width$}  {:>16}  {:>10}  feasible\n",
        "config", "required_db", "margin_db"
    ));
    for entry in &rec.ranking {
        out.push_str(&format!(
            "{:<name_width$}  {:>16.6}  {:>10.6}  {}\n",
            entry.spec.config.name,
            entry.spec.required_gsnr_typical_db,
            entry.margin_db,
            if entry.feasible { "yes" } else { "no" }
        ));
    }
    out.push('\n');
    match rec.chosen_entry() {
        Some(entry) => out.push_str(&format!(
            "chosen: {} (margin {:.6} dB)\n",
            entry.spec.config.name, entry.margin_db
        )),
        None => out.push_str("no feasible configuration clears the operating margin\n"),
    }
    out
}

fn cmd_recommend(
    probe_result_path: &std::path::Path,
    catalog_path: Option<&std::path::Path>,
    operating_margin_db: f64,
    json: bool,
) -> Result<()> {
    let result = ProbeResult::from_json(
        &fs::read_to_string(probe_result_path)
            .with_context(|| format!("cannot read probe result {}", probe_result_path.display()))?,
    )
    .context("invalid probe result")?;
    let catalog = match catalog_path {
        Some(path) => read_catalog_json(
            &fs::read_to_string(path)
                .with_context(|| format!("cannot read catalog {}", path.display()))?,
        )
        .context("invalid catalog")?,
        None => default_catalog_with(2e-2, 1.5)?,
    };
    let rec = recommend(result.estimated_gsnr_db, &catalog, operating_margin_db)?;
    if json {
        println!("{}", rec.to_json()?);
    } else {
        print!("{}", render_margin_table(&rec));
    }
    Ok(())
}

fn cmd_experiment(
    scenario_path: Option<&std::path::Path>,
    out_dir: &std::path::Path,
    figure2: Option<&std::path::Path>,
    seed: Option<u64>,
) -> Result<()> {
    let mut scenario = match scenario_path {
        Some(path) => Scenario::from_json(
            &fs::read_to_string(path)
                .with_context(|| format!("cannot read scenario {}", path.display()))?,
        )
        .context("invalid scenario")?,
        None => build_default_scenario(),
    };
    if let Some(seed) = seed {
        scenario.master_seed = seed;
    }
    let outputs = run_experiment(&scenario)?;
    let written = outputs.write_to_dir(out_dir, figure2)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    let s = &outputs.report.summary;
    println!(
        "paths: {}, probes: {}, trials: {}, false positives: {}, undersells: {}",
        s.path_count, s.probe_count, s.trials, s.false_positive_total, s.undersell_total
    );
    println!(
        "worst noiseless closure: {} dB, max reference error: {} dB",
        s.worst_noiseless_closure_db, s.max_abs_reference_error_db
    );
    Ok(())
}
