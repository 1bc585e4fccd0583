//! Discharges and datasets through the public solver API.

use cellhealth_core::kinetics::rest_voltage;
use cellhealth_core::solver::{
    build_dataset, complete_aging, latin_hypercube_sample, load_dataset, read_series, simulate_discharge, DatasetConfig,
    SolverSettings,
};
use cellhealth_core::{AgingParameters, AgingRanges, CellParameters, OcpPair};

fn coarse() -> SolverSettings {
    SolverSettings {
        n_r: 10,
        n_x: 6,
        dt: 2.0,
        ..SolverSettings::default()
    }
}

#[test]
fn fresh_discharge_ends_on_the_cutoff() {
    let params = CellParameters::default();
    let rec = simulate_discharge(&AgingParameters::fresh(), &params, &OcpPair::default(), &coarse(), None).unwrap();
    let v = &rec.series.voltage;
    assert!((v.last().unwrap() - params.v_min).abs() < 5e-3);
    assert!(v[0] < params.v_max);
    assert!(rec.capacity_ah > 0.95 && rec.capacity_ah < 1.07, "{}", rec.capacity_ah);
    assert!(rec.series.t.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn losing_negative_active_material_costs_capacity() {
    let params = CellParameters::default();
    let ocps = OcpPair::default();
    let fresh = AgingParameters::fresh();
    let base = simulate_discharge(&fresh, &params, &ocps, &coarse(), None).unwrap();
    let mut aged = fresh;
    aged.0[AgingParameters::EPS_S_NEG] *= 0.9;
    let rec = simulate_discharge(&aged, &params, &ocps, &coarse(), Some(base.capacity_ah)).unwrap();
    assert!(rec.capacity_ah < base.capacity_ah);
    assert!((rec.soh - rec.capacity_ah / base.capacity_ah).abs() < 1e-12);
}

#[test]
fn sampled_points_close_on_both_cutoffs() {
    let params = CellParameters::default();
    let ocps = OcpPair::default();
    let mut closed = 0;
    for sample in latin_hypercube_sample(20, &AgingRanges::default(), 5) {
        let Ok(theta) = complete_aging(sample, &params, &ocps) else { continue };
        closed += 1;
        let top = rest_voltage(theta.x100_neg(), theta.x100_pos(), &ocps.neg, &ocps.pos);
        let bottom = rest_voltage(theta.x0_neg(), theta.x0_pos(), &ocps.neg, &ocps.pos);
        assert!((top - params.v_max).abs() < 1e-6, "{top}");
        assert!((bottom - params.v_min).abs() < 1e-6, "{bottom}");
    }
    assert!(closed >= 15, "{closed} of 20 closed");
}

#[test]
fn dataset_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        n: 6,
        k: 16,
        solver: coarse(),
        ..DatasetConfig::default()
    };
    let ocps = OcpPair::default();
    let built = build_dataset(&cfg, &ocps, dir.path()).unwrap();
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(built.rows, loaded.rows);
    assert_eq!(loaded.rows.len(), 6);
    for row in loaded.kept() {
        let s = read_series(&loaded.series_path(&row.sample_id)).unwrap();
        assert_eq!(s.len(), 16);
        assert!((s.duration() - row.duration_s).abs() < 1e-6 * row.duration_s);
    }

    let again = tempfile::tempdir().unwrap();
    let rebuilt = build_dataset(&cfg, &ocps, again.path()).unwrap();
    assert_eq!(built.rows, rebuilt.rows);
}
