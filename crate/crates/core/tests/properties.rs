//! Property tests: structural invariants of the fit, the link model, the
//! margin computation and the selection rule under randomized inputs.

use proptest::prelude::*;

use chanprobe_core::link_model::{osnr_ase_db, snr_nli_db, true_gsnr_db, FiberSpan, Lightpath};
use chanprobe_core::probe_engine::{normalize_to_gsnr_db, run_probe, ProbeRunSettings};
use chanprobe_core::recommender::{compute_margins, recommend};
use chanprobe_core::transponder_model::{
    default_catalog_with, fit_b2b, synthesize_b2b, QOverOsnrSample,
};
use chanprobe_core::units::{bandwidth_offset_db, db_to_linear};
use chanprobe_core::{LaunchSpec, SpectrumSlot, TransponderConfig};

fn span(gamma: f64) -> FiberSpan {
    FiberSpan::transparent(80.0, 0.2, gamma, -21.3, 5.0)
}

fn quadratic_samples(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Vec<QOverOsnrSample> {
    let mut v = Vec::new();
    let mut x = lo;
    while x <= hi + 1e-9 {
        v.push(QOverOsnrSample {
            osnr_db: x,
            q_db: (a * x + b) * x + c,
        });
        x += 1.0;
    }
    v
}

proptest! {
    #[test]
    fn fit_recovers_and_round_trips_any_monotone_quadratic(
        a in -0.03f64..=0.0,
        b in 0.8f64..=1.5,
        c in -5.0f64..=5.0,
        lo in 8.0f64..=15.0,
        spread in 5.0f64..=15.0,
    ) {
        let hi = lo + spread;
        // Keep the derivative clearly positive over the whole interval.
        prop_assume!(2.0 * a * hi + b > 0.05);
        let fit = fit_b2b(&quadratic_samples(a, b, c, lo, hi)).unwrap();
        prop_assert!((fit.a - a).abs() < 1e-6, "a: {} vs {a}", fit.a);
        prop_assert!((fit.b - b).abs() < 1e-6, "b: {} vs {b}", fit.b);
        prop_assert!((fit.c - c).abs() < 1e-6, "c: {} vs {c}", fit.c);
        // The sampled grid steps by 1 dB, so the fitted range can end short
        // of `hi`; round-trip within what the fit actually covers.
        let mut x = fit.valid_range.0;
        while x <= fit.valid_range.1 {
            let back = fit.invert(fit.eval(x)).unwrap();
            prop_assert!((back - x).abs() < 1e-9, "round trip at {x}: {back}");
            x += 0.499;
        }
    }

    #[test]
    fn gsnr_never_exceeds_its_weakest_component(
        spans in 1usize..=40,
        psd_db in -6.0f64..=6.0,
        gamma in 0.8f64..=2.0,
    ) {
        let path = Lightpath::new("p", vec![span(gamma); spans]);
        let launch = LaunchSpec::new(1e-3 / 69e9 * db_to_linear(psd_db), 69.0);
        let slot = SpectrumSlot::new(193.9, 100.0);
        let ase_in_band =
            osnr_ase_db(&path, &launch, &slot).unwrap() + bandwidth_offset_db(69.0);
        let nli = snr_nli_db(&path, &launch).unwrap();
        let gsnr = true_gsnr_db(&path, &launch, &slot, None).unwrap();
        prop_assert!(gsnr <= ase_in_band.min(nli) + 1e-9);
        // The combination is exactly reciprocal addition of the parts.
        let recombined = -10.0
            * (10f64.powf(-ase_in_band / 10.0) + 10f64.powf(-nli / 10.0)).log10();
        prop_assert!((gsnr - recombined).abs() < 1e-9);
    }

    #[test]
    fn margins_shift_linearly_with_the_estimate(
        est in 5.0f64..=25.0,
        delta in -3.0f64..=3.0,
    ) {
        let catalog = default_catalog_with(2e-2, 1.5).unwrap();
        let before = compute_margins(est, &catalog, 0.0).unwrap();
        let after = compute_margins(est + delta, &catalog, 0.0).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert_eq!(&b.spec, &a.spec, "ranking order must not depend on the estimate");
            prop_assert!((a.margin_db - b.margin_db - delta).abs() < 1e-9);
        }
    }

    #[test]
    fn a_better_estimate_never_selects_a_worse_config(
        est_lo in 0.0f64..=30.0,
        bump in 0.0f64..=10.0,
        operating_margin in 0.0f64..=2.0,
    ) {
        let catalog = default_catalog_with(2e-2, 1.5).unwrap();
        let pick = |est: f64| {
            recommend(est, &catalog, operating_margin)
                .unwrap()
                .chosen
                .unwrap_or(usize::MAX)
        };
        // Lower ranking index means a more preferred config.
        prop_assert!(pick(est_lo + bump) <= pick(est_lo));
    }

    #[test]
    fn gsnr_normalization_is_a_pure_bandwidth_shift(
        gosnr in -10.0f64..=40.0,
        rate in 10.0f64..=130.0,
    ) {
        let shifted = normalize_to_gsnr_db(gosnr, rate);
        prop_assert!((shifted - gosnr - bandwidth_offset_db(rate)).abs() < 1e-9);
        prop_assert!((normalize_to_gsnr_db(gosnr, 12.5) - gosnr).abs() < 1e-12);
    }

    #[test]
    fn probe_results_keep_gosnr_and_gsnr_consistent(
        spans in 6usize..=40,
        seed in any::<u64>(),
        sigma in 0.0f64..=0.3,
    ) {
        let probe = TransponderConfig::new("probe", 2.0, 69.0, 200.0);
        let fit = fit_b2b(&synthesize_b2b(&probe, 10.0, 30.0, 0.5, 1.5).unwrap()).unwrap();
        let settings = ProbeRunSettings {
            impl_penalty_db: 1.5,
            q_noise_sigma_db: sigma,
            seed,
            clamp_to_fit_range: true,
            ..ProbeRunSettings::default()
        };
        let result = run_probe(
            &Lightpath::new("p", vec![span(1.3); spans]),
            &probe,
            &SpectrumSlot::new(193.9, 100.0),
            &LaunchSpec::new(1e-3 / 69e9, 69.0),
            &fit,
            &settings,
        ).unwrap();
        prop_assert_eq!(
            result.estimated_gsnr_db,
            normalize_to_gsnr_db(result.estimated_gosnr_db, 69.0)
        );
    }
}
