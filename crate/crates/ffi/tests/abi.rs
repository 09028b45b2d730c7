use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::ptr;

use cvqueue_ffi::*;

fn config(lambda: f64, p: f64) -> *mut CvqConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { cvq_config_new(lambda, p, 45.0, 43.2, 1.8, &mut cfg) }, CvqStatus::Ok);
    cfg
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cvq_last_error()) }.to_string_lossy().into_owned()
}

fn obs(m: u32, l: u32, t: f64, follower: Option<f64>) -> CvqObservation {
    CvqObservation {
        m,
        l,
        t,
        last_is_last: follower.is_none(),
        l_prime: if follower.is_some() { l + 1 } else { l },
        t_prime: follower.unwrap_or(f64::NAN),
        tau: f64::NAN,
        tau_prime: f64::NAN,
        last_in_overflow: false,
        sensor: true,
    }
}

#[test]
fn closed_forms_match_the_library() {
    let cfg = config(0.239, 0.3);
    let native = cvqueue::config::SignalDemandConfig::reference(0.239, 0.3).unwrap();
    let mut v = 0.0;
    unsafe {
        assert_eq!(cvq_expected_t(cfg, true, &mut v), CvqStatus::Ok);
        assert_eq!(v, cvqueue::analytic::expected_t(&native, true).unwrap());
        assert_eq!(cvq_variance_d(cfg, true, CvqVd::Exact, &mut v), CvqStatus::Ok);
        assert_eq!(
            v,
            cvqueue::analytic::variance_d_no_overflow(&native, true, cvqueue::analytic::VdMethod::Exact).unwrap()
        );
        assert_eq!(cvq_prob_not_last(cfg, CvqNotLast::ThinnedIntegral, &mut v), CvqStatus::Ok);
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(cvq_expected_q(cfg, CvqOverflow::None, &mut v), CvqStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(cvq_approx_variance_d(cfg, CvqOverflow::AkcelikSteady, CvqVdApprox::Eq14, &mut v), CvqStatus::Ok);
        assert!(v > 0.0);
        cvq_config_free(cfg);
    }
}

#[test]
fn stream_estimates_reference_scene() {
    let cfg = config(0.239, 0.3);
    let mut stream = ptr::null_mut();
    let mut est = CvqEstimate { estimate: 0.0, scenario: CvqScenario::NoCv, delta: 0.0, cond_variance: 0.0 };
    unsafe {
        assert_eq!(cvq_stream_new(cfg, CvqEstimator::KnownNoQ, true, CvqOverflow::None, &mut stream), CvqStatus::Ok);
        assert_eq!(cvq_stream_estimate(stream, &obs(3, 9, 35.0, Some(38.0)), 1, &mut est), CvqStatus::Ok);
        cvq_stream_free(stream);
        cvq_config_free(cfg);
    }
    assert!((est.estimate - (10.0 + 0.7 * 0.239 * 7.0)).abs() < 1e-12);
    assert_eq!(est.scenario, CvqScenario::LastNotLastNewArrivals);
}

#[test]
fn errors_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(cvq_config_new(0.2, 1.5, 45.0, 43.2, 1.8, &mut cfg), CvqStatus::InvalidArgument);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(cvq_config_new(0.2, 0.5, 45.0, 43.2, 1.8, ptr::null_mut()), CvqStatus::NullPointer);
        assert_eq!(last_error(), "null pointer");

        let zero_p = config(0.2, 0.0);
        let mut v = 0.0;
        assert_eq!(cvq_expected_t(zero_p, false, &mut v), CvqStatus::NoConnectedVehicles);
        cvq_config_free(zero_p);

        let saturated = config(0.3, 0.5);
        assert_eq!(cvq_expected_q(saturated, CvqOverflow::AkcelikSteady, &mut v), CvqStatus::Divergent);
        let mut stream = ptr::null_mut();
        assert_eq!(
            cvq_stream_new(saturated, CvqEstimator::KnownWithQNoSensor, true, CvqOverflow::Viti15, &mut stream),
            CvqStatus::InvalidArgument
        );
        assert!(stream.is_null());
        cvq_config_free(saturated);
        cvq_config_free(ptr::null_mut());
        cvq_stream_free(ptr::null_mut());
    }
}

#[test]
fn inconsistent_observation_is_rejected() {
    let cfg = config(0.239, 0.3);
    let mut stream = ptr::null_mut();
    let mut est = CvqEstimate { estimate: 0.0, scenario: CvqScenario::NoCv, delta: 0.0, cond_variance: 0.0 };
    unsafe {
        cvq_stream_new(cfg, CvqEstimator::KnownNoQ, true, CvqOverflow::None, &mut stream);
        let mut o = obs(3, 9, 35.0, None);
        o.t = f64::NAN;
        assert_ne!(cvq_stream_estimate(stream, &o, 1, &mut est), CvqStatus::Ok);
        assert_eq!(cvq_stream_estimate(stream, ptr::null(), 1, &mut est), CvqStatus::NullPointer);
        cvq_stream_free(stream);
        cvq_config_free(cfg);
    }
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libcvqueue_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = manifest.join("include/cvqueue.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["cvq_config_new", "cvq_stream_estimate", "cvq_last_error", "CVQ_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping C link");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let compiled = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status();
    match compiled {
        Ok(s) => assert!(s.success(), "C compile failed"),
        Err(_) => {
            eprintln!("no C compiler; skipping C link");
            return;
        }
    }
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    let estimate: f64 = fields[1].parse().unwrap();
    assert!((estimate - (10.0 + 0.7 * 0.239 * 7.0)).abs() < 1e-6, "{line}");
    assert_eq!(fields[2], "2");
}
