use std::path::Path;

use wt_empc::sim::{compute_metrics, run_simulation, Scenario, SimConfig, SimLog, WindProfile};

fn scenario(horizon: usize, wind: WindProfile) -> Scenario {
    let mut cfg = SimConfig::default();
    cfg.controller.horizon = horizon;
    cfg.wind = wind;
    Scenario::from_config(&cfg).unwrap()
}

#[test]
fn runs_are_deterministic() {
    let sc = scenario(12, WindProfile::constant(11.0, 3.0).unwrap());
    let a = run_simulation(&sc).unwrap();
    let b = run_simulation(&sc).unwrap();
    assert!(a.aborted.is_none());
    assert_eq!(a.log.len(), b.log.len());
    for (r, s) in a.log.records.iter().zip(&b.log.records) {
        assert_eq!(r.omega_g.to_bits(), s.omega_g.to_bits());
        assert_eq!(r.p_g.to_bits(), s.p_g.to_bits());
        assert_eq!(r.pitch.to_bits(), s.pitch.to_bits());
        assert_eq!(r.v_p, s.v_p);
    }
}

#[test]
fn single_step_horizon_completes() {
    let sc = scenario(1, WindProfile::constant(9.0, 2.0).unwrap());
    let out = run_simulation(&sc).unwrap();
    assert!(out.aborted.is_none(), "{:?}", out.aborted);
    assert_eq!(out.log.len(), sc.n_steps());
    assert!(out.log.records.iter().all(|r| r.p_g.is_finite() && r.omega_g > 0.0));
}

#[test]
fn log_survives_csv_roundtrip() {
    let sc = scenario(8, WindProfile::constant(14.0, 2.0).unwrap());
    let out = run_simulation(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    out.log.write_csv(&path).unwrap();
    let back = SimLog::read_csv(&path).unwrap();
    assert_eq!(back.len(), out.log.len());
    assert_eq!(back.n_locations, out.log.n_locations);
    for (r, s) in out.log.records.iter().zip(&back.records) {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        assert!(close(r.t, s.t) && close(r.p_g, s.p_g) && close(r.torque_g, s.torque_g));
        assert!(r.v_p.iter().zip(&s.v_p).all(|(a, b)| close(*a, *b)));
        assert_eq!(r.held, s.held);
    }
}

#[test]
fn config_toml_roundtrip_is_stable() {
    let text = SimConfig::default().to_toml().unwrap();
    let parsed = SimConfig::parse(&text, Path::new(".")).unwrap();
    assert_eq!(parsed.to_toml().unwrap(), text);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "[controller]\nhorizn = 10\n";
    assert!(SimConfig::parse(text, Path::new("x.toml")).is_err());
}

#[test]
fn more_wind_gives_more_power_below_rated() {
    let sc = scenario(20, WindProfile::staircase(7.0, 8.0, 1.0, 40.0).unwrap());
    let out = run_simulation(&sc).unwrap();
    assert!(out.aborted.is_none());
    let m = compute_metrics(&out.log, &sc.wind.plateaus(), &sc.settings, sc.controller.sample_time, &sc.turbine.params);
    assert_eq!(m.plateaus.len(), 2);
    assert!(m.plateaus[1].p_g > m.plateaus[0].p_g * 1.2);
    assert!(m.max_torque_roundtrip_error < 1e-9);
}
