use std::ffi::{c_char, CString};
use std::ptr;

use wt_empc_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { wt_last_error(buf.as_mut_ptr() as *mut c_char, buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

fn short_config() -> *mut WtConfig {
    let cfg = wt_config_default();
    unsafe {
        assert_eq!(wt_config_set_horizon(cfg, 10), WtStatus::Ok);
        assert_eq!(wt_config_set_constant_wind(cfg, 9.0, 3.0), WtStatus::Ok);
    }
    cfg
}

#[test]
fn null_handles_are_rejected() {
    let mut out = WtCommand::default();
    let z = [0.0; 3];
    let s = unsafe { wt_controller_step(ptr::null_mut(), 100.0, z.as_ptr(), z.as_ptr(), 3, 9.0, &mut out) };
    assert_eq!(s, WtStatus::NullPointer);
    assert!(last_error().contains("null"));
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { wt_simulate(ptr::null(), &mut run) }, WtStatus::NullPointer);
    unsafe {
        wt_config_free(ptr::null_mut());
        wt_controller_free(ptr::null_mut());
        wt_run_free(ptr::null_mut());
    }
}

#[test]
fn bad_toml_reports_config_error() {
    let text = CString::new("[controller]\nhorizon = \"many\"\n").unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { wt_config_parse(text.as_ptr(), &mut cfg) };
    assert_eq!(s, WtStatus::Config);
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn error_buffer_is_truncated_and_terminated() {
    let cfg = wt_config_default();
    unsafe {
        assert_eq!(wt_config_set_horizon(cfg, 0), WtStatus::InvalidArgument);
        let mut buf = [0x7fu8; 8];
        let n = wt_last_error(buf.as_mut_ptr() as *mut c_char, buf.len());
        assert!(n > 7);
        assert_eq!(buf[7], 0);
        wt_config_free(cfg);
    }
}

#[test]
fn controller_steps_from_measurements() {
    let cfg = short_config();
    let mut ctrl = ptr::null_mut();
    unsafe {
        assert_eq!(wt_controller_new(cfg, &mut ctrl), WtStatus::Ok, "{}", last_error());
        let n = wt_controller_locations(ctrl);
        assert!(n >= 2);
        let zeros = vec![0.0; n];
        let mut cmd = WtCommand::default();
        let bad = wt_controller_step(ctrl, 110.0, zeros.as_ptr(), zeros.as_ptr(), n + 1, 9.0, &mut cmd);
        assert_eq!(bad, WtStatus::InvalidArgument);
        for _ in 0..5 {
            let s = wt_controller_step(ctrl, 110.0, zeros.as_ptr(), zeros.as_ptr(), n, 9.0, &mut cmd);
            assert_eq!(s, WtStatus::Ok, "{}", last_error());
            assert!(cmd.torque_g.is_finite() && cmd.torque_g > 0.0);
            assert!(cmd.pitch.is_finite());
            assert_eq!(cmd.held, 0);
        }
        wt_controller_free(ctrl);
        wt_config_free(cfg);
    }
}

#[test]
fn simulation_summary_and_csv() {
    let cfg = short_config();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(wt_simulate(cfg, &mut run), WtStatus::Ok, "{}", last_error());
        let mut sum = WtRunSummary::default();
        assert_eq!(wt_run_summary(run, &mut sum), WtStatus::Ok);
        assert_eq!(sum.aborted, 0);
        assert!(sum.steps > 0);
        assert_eq!(sum.plateaus, 1);
        assert!(sum.energy_j > 0.0);

        let mut p = 0.0;
        assert_eq!(wt_run_plateau_power(run, 0, &mut p), WtStatus::Ok);
        assert!(p > 0.0);
        assert_eq!(wt_run_plateau_power(run, 5, &mut p), WtStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let c = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(wt_run_write_csv(run, c.as_ptr()), WtStatus::Ok, "{}", last_error());
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), sum.steps + 1);

        wt_run_free(run);
        wt_config_free(cfg);
    }
}
