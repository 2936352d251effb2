mod common;

use common::{explore_oracle, normal_equation_oracle, sum_sq_residual, OracleDesign, OracleSpace};
use linkbsd::bsd::ThresholdRuleSet;
use linkbsd::datasets::{table1, table2, Dataset, MeasurementRecord};
use linkbsd::explorer::{
    calibrate_losses, default_library, design_count, enumerate, explore, results_csv,
    AmplifierMode, DesignSpace, FeasibleDesign,
};
use linkbsd::optics::{
    component_counts, parse_sequence, preamp_power, rx_power, ComponentKind, ComponentSequence,
    PowerDbm, WavelengthNm,
};
use linkbsd::signal::BerValue;
use linkbsd::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn nm(v: f64) -> WavelengthNm {
    WavelengthNm::new(v).unwrap()
}

fn table1_rows(wl: f64) -> Vec<(f64, f64, f64)> {
    table1()
        .at_wavelength(nm(wl))
        .map(|r| {
            let (s, m) = component_counts(&r.left_seq);
            (s as f64, m as f64, r.rx.unwrap().value())
        })
        .collect()
}

#[test]
fn calibration_matches_normal_equations() {
    for wl in [1510.0, 1550.0] {
        let c = calibrate_losses(&table1(), nm(wl)).unwrap();
        let rows = table1_rows(wl);
        let want = normal_equation_oracle(&rows);
        let got = [c.launch_est.value(), c.loss_split, c.loss_mux];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-9, "{wl}: {got:?} vs {want:?}");
        }
        let rms = (sum_sq_residual(&rows, want) / rows.len() as f64).sqrt();
        assert!((c.residual_rms - rms).abs() <= 1e-9);

        let best = sum_sq_residual(&rows, got);
        let mut rng = StdRng::seed_from_u64(wl as u64);
        for _ in 0..1000 {
            let p = got.map(|v| v + rng.random_range(-1.0..=1.0));
            assert!(sum_sq_residual(&rows, p) >= best);
        }
    }
}

#[test]
fn calibration_reference_values() {
    let c = calibrate_losses(&table1(), nm(1510.0)).unwrap();
    assert!((c.launch_est.value() - (-8.010_869_565_217_39)).abs() < 1e-9);
    assert!((c.loss_split - 4.156_521_739_130_435).abs() < 1e-9);
    assert!((c.loss_mux - 1.271_739_130_434_782_6).abs() < 1e-9);
    assert!((c.residual_rms - 0.969_805_000_569_926_3).abs() < 1e-9);
    let c = calibrate_losses(&table1(), nm(1550.0)).unwrap();
    assert!((c.launch_est.value() - (-7.306_521_739_130_435)).abs() < 1e-9);
    assert!((c.loss_split - 4.073_913_043_478_261).abs() < 1e-9);
    assert!((c.loss_mux - 1.863_043_478_260_869_6).abs() < 1e-9);
    assert!((c.residual_rms - 1.091_946_805_520_743_5).abs() < 1e-9);
}

fn synthetic(seqs: &[&str], p: f64, ls: f64, lm: f64) -> Dataset {
    let records = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let seq = parse_sequence(s).unwrap();
            let (ns, nm_) = component_counts(&seq);
            MeasurementRecord {
                scenario: i.to_string(),
                left_seq: seq,
                right_seq: ComponentSequence::empty(),
                wavelength: Some(nm(1550.0)),
                launch: None,
                preamp: None,
                rx: Some(PowerDbm(p - ns as f64 * ls - nm_ as f64 * lm)),
                ber: BerValue::from_prob(1e-9).unwrap(),
            }
        })
        .collect();
    Dataset::new(records, "synthetic").unwrap()
}

#[test]
fn calibration_recovers_consistent_systems() {
    let mut rng = StdRng::seed_from_u64(42);
    let pool = [
        "S", "M", "SS", "MM", "SM", "SMS", "MMS", "SSSM", "MSMSM", "SSMMSS",
    ];
    for _ in 0..200 {
        let (p, ls, lm) = (
            rng.random_range(-15.0..5.0),
            rng.random_range(0.5..6.0),
            rng.random_range(0.2..3.0),
        );
        let n = rng.random_range(4..=pool.len());
        let c = calibrate_losses(&synthetic(&pool[..n], p, ls, lm), nm(1550.0)).unwrap();
        assert!((c.launch_est.value() - p).abs() <= 1e-9);
        assert!((c.loss_split - ls).abs() <= 1e-9);
        assert!((c.loss_mux - lm).abs() <= 1e-9);
        assert!(c.residuals.iter().all(|r| r.residual.abs() <= 1e-9));
    }
}

#[test]
fn calibration_reports_unidentifiable_columns() {
    let only_splits = synthetic(&["S", "SS", "SSS", "SSSS"], -8.0, 4.0, 1.0);
    match calibrate_losses(&only_splits, nm(1550.0)) {
        Err(Error::Unidentifiable { columns }) => assert_eq!(columns, ["loss_mux"]),
        other => panic!("{other:?}"),
    }
    let too_few = synthetic(&["S", "M"], -8.0, 4.0, 1.0);
    assert!(matches!(
        calibrate_losses(&too_few, nm(1550.0)),
        Err(Error::Unidentifiable { .. })
    ));
}

#[test]
fn calibrated_library_predicts_the_tables() {
    let c = calibrate_losses(&table1(), nm(1510.0)).unwrap();
    // Table 1 row 1: SS at 1510 nm, measured -16.25 dBm
    assert!((c.predict(2, 0) - (-16.25)).abs() <= c.residual_rms);
    // Table 2 row 4: MM from a -1.63 dBm launch, measured -3.97 dBm before the amplifier
    let row4 = table2().get("4").unwrap().clone();
    let predicted = row4.launch.unwrap().value() - 2.0 * c.loss_mux;
    assert!((predicted - row4.preamp.unwrap().value()).abs() <= c.residual_rms);
}

#[test]
fn enumeration_count_matches_closed_form() {
    for mode in [
        AmplifierMode::Forbidden,
        AmplifierMode::Required,
        AmplifierMode::Optional,
    ] {
        for max_left in 0..=6 {
            let rights = if mode == AmplifierMode::Forbidden {
                0..=0
            } else {
                0..=6 - max_left
            };
            for max_right in rights {
                let space = DesignSpace::new(
                    max_left,
                    max_right,
                    mode,
                    Some(20.0),
                    PowerDbm(0.0),
                    nm(1550.0),
                )
                .unwrap();
                let designs: Vec<_> = enumerate(&space).collect();
                assert_eq!(designs.len() as u128, design_count(&space));
                let mut seen = std::collections::HashSet::new();
                for d in &designs {
                    assert!(seen.insert((
                        d.has_amplifier(),
                        d.left().to_string(),
                        d.right().to_string()
                    )));
                }
            }
        }
    }
}

fn as_oracle(f: &FeasibleDesign) -> OracleDesign {
    let text = |s: &ComponentSequence| {
        if s.is_empty() {
            String::new()
        } else {
            s.to_string()
        }
    };
    OracleDesign {
        left: text(f.design.left()),
        amplified: f.design.has_amplifier(),
        right: text(f.design.right()),
        rx: rx_power(&f.trace).value(),
        preamp: preamp_power(&f.trace).map(PowerDbm::value),
        min_margin: f.min_margin,
    }
}

fn oracle_space(space: &DesignSpace, gain: f64, rules: &ThresholdRuleSet) -> OracleSpace {
    let lib = default_library();
    let wl = space.wavelength();
    OracleSpace {
        max_left: space.max_left(),
        max_right: space.max_right(),
        modes: match space.mode() {
            AmplifierMode::Forbidden => (true, false),
            AmplifierMode::Required => (false, true),
            AmplifierMode::Optional => (true, true),
        },
        gain,
        launch: space.launch().value(),
        loss_s: lib.loss_db(ComponentKind::PowerSplit, wl).unwrap(),
        loss_m: lib.loss_db(ComponentKind::WavelengthMux, wl).unwrap(),
        rx_floor_no_amp: rules.rx_floor_no_amp,
        preamp_floor: rules.preamp_floor,
        rx_floor_with_amp: rules.rx_floor_with_amp,
    }
}

#[test]
fn explore_matches_brute_force_on_small_spaces() {
    let lib = default_library();
    let rules = ThresholdRuleSet::default();
    let mut checked = 0;
    let mut nonempty = 0;
    for wl in [1510.0, 1550.0] {
        for launch in [-20.0, -12.0, -8.0, -3.0, 0.0, 3.0] {
            for gain in [5.0, 12.0, 20.0] {
                for mode in [
                    AmplifierMode::Forbidden,
                    AmplifierMode::Required,
                    AmplifierMode::Optional,
                ] {
                    for max_left in 0..=4usize {
                        let max_right = if mode == AmplifierMode::Forbidden {
                            0
                        } else {
                            3usize.saturating_sub(max_left)
                        };
                        for right in 0..=max_right {
                            let space = DesignSpace::new(
                                max_left,
                                right,
                                mode,
                                Some(gain),
                                PowerDbm(launch),
                                nm(wl),
                            )
                            .unwrap();
                            let got: Vec<OracleDesign> = explore(&space, &lib, &rules)
                                .unwrap()
                                .iter()
                                .map(as_oracle)
                                .collect();
                            let want = explore_oracle(&oracle_space(&space, gain, &rules));
                            assert_eq!(
                                got, want,
                                "{wl} {launch} {gain} {mode:?} {max_left} {right}"
                            );
                            checked += 1;
                            nonempty += usize::from(!want.is_empty());
                        }
                    }
                }
            }
        }
    }
    assert!(nonempty > checked / 4, "{nonempty} of {checked}");
}

fn feasible_keys(space: &DesignSpace) -> std::collections::BTreeSet<(bool, String, String)> {
    explore(space, &default_library(), &ThresholdRuleSet::default())
        .unwrap()
        .iter()
        .map(|f| {
            (
                f.design.has_amplifier(),
                f.design.left().to_string(),
                f.design.right().to_string(),
            )
        })
        .collect()
}

#[test]
fn more_launch_power_keeps_every_feasible_design() {
    let mut rng = StdRng::seed_from_u64(9);
    let modes = [
        AmplifierMode::Forbidden,
        AmplifierMode::Required,
        AmplifierMode::Optional,
    ];
    for _ in 0..1000 {
        let mode = modes[rng.random_range(0..3)];
        let max_left = rng.random_range(0..=5);
        let max_right = if mode == AmplifierMode::Forbidden {
            0
        } else {
            rng.random_range(0..=3)
        };
        let launch = rng.random_range(-25.0..5.0);
        let space = DesignSpace::new(
            max_left,
            max_right,
            mode,
            Some(rng.random_range(0.0..25.0)),
            PowerDbm(launch),
            nm(if rng.random_bool(0.5) { 1510.0 } else { 1550.0 }),
        )
        .unwrap();
        let low = feasible_keys(&space);
        let high =
            feasible_keys(&space.with_launch(PowerDbm(launch + rng.random_range(0.0..10.0))));
        assert!(low.is_subset(&high));
    }
}

#[test]
fn results_are_deterministic_and_well_formed() {
    let space = DesignSpace::from_json(
        r#"{"max_left": 5, "max_right": 3, "amplifier": "optional", "gain_db": 18, "launch_dbm": -2, "wavelength_nm": 1550}"#,
    )
    .unwrap();
    let lib = default_library();
    let rules = ThresholdRuleSet::default();
    let a = results_csv(&explore(&space, &lib, &rules).unwrap());
    let b = results_csv(&explore(&space, &lib, &rules).unwrap());
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next(),
        Some("rank,left_seq,right_seq,amp,rx_dbm,preamp_dbm,min_margin_db")
    );
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 7);
        assert_eq!(cells[0], (i + 1).to_string());
        assert!(cells[6].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn design_space_validation() {
    for bad in [
        r#"{"max_left": 2, "amplifier": "required", "launch_dbm": 0, "wavelength_nm": 1550}"#,
        r#"{"max_left": 2, "max_right": 1, "amplifier": "forbidden", "launch_dbm": 0, "wavelength_nm": 1550}"#,
        r#"{"max_left": 2, "amplifier": "sometimes", "gain_db": 1, "launch_dbm": 0, "wavelength_nm": 1550}"#,
        r#"{"max_left": 2, "amplifier": "forbidden", "launch_dbm": 0, "wavelength_nm": -5}"#,
        r#"{"max_left": 2, "amplifier": "forbidden", "launch_dbm": 0, "wavelength_nm": 1550, "x": 1}"#,
    ] {
        assert!(
            matches!(DesignSpace::from_json(bad), Err(Error::Config(_))),
            "{bad}"
        );
    }
}
