use std::ffi::{CStr, CString};
use std::ptr;

use aninorm_ffi::*;

fn scalar(a: f64, b: f64, c: f64, d: f64) -> *mut AninormModel {
    let mut out = ptr::null_mut();
    let s = unsafe { aninorm_model_new(1, 1, 1, &a, &b, &c, &d, &mut out) };
    assert_eq!(s, AninormStatus::Ok);
    out
}

fn last_error() -> String {
    let p = aninorm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_model_norms() {
    let m = scalar(0.5, 1.0, 1.0, 0.0);
    let (mut h2, mut hinf) = (0.0, 0.0);
    unsafe {
        assert_eq!(aninorm_h2_norm(m, &mut h2), AninormStatus::Ok);
        assert_eq!(aninorm_hinf_norm(m, 1e-10, &mut hinf), AninormStatus::Ok);
    }
    assert!((h2 - (1.0f64 / 0.75).sqrt()).abs() < 1e-12);
    assert!((hinf - 2.0).abs() < 1e-8);

    // With m = 1 every admissible input is white, so the norm is the H2 norm.
    let mut r = std::mem::MaybeUninit::<AninormResult>::uninit();
    let s = unsafe { aninorm_anisotropic_norm(m, 0.0, 1e-9, r.as_mut_ptr()) };
    assert_eq!(s, AninormStatus::Ok);
    let r = unsafe { r.assume_init() };
    assert_eq!(r.kind, AninormNormKind::BoundaryA0);
    assert!((r.gamma - h2).abs() < 1e-9);
    unsafe { aninorm_model_free(m) };
}

#[test]
fn norm_matches_core() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            aninorm_model_random_stable(3, 2, 2, 7, 0.95, &mut m),
            AninormStatus::Ok
        );
    }
    let core = aninorm::StateSpaceModel::random_stable(3, 2, 2, 7, 0.95).unwrap();
    let expect = aninorm::anisotropic_norm(&aninorm::AnisoQuery::new(core, 0.3)).unwrap();
    let mut r = std::mem::MaybeUninit::<AninormResult>::uninit();
    let (mut grid, mut feasible, mut norm) = (0.0, false, 0.0);
    unsafe {
        assert_eq!(
            aninorm_anisotropic_norm(m, 0.3, 1e-9, r.as_mut_ptr()),
            AninormStatus::Ok
        );
        assert_eq!(
            aninorm_grid_oracle_norm(m, 0.3, 200, &mut grid),
            AninormStatus::Ok
        );
        assert_eq!(
            aninorm_feasible(m, 0.3, expect.gamma * 1.01, 1e-9, &mut feasible, &mut norm),
            AninormStatus::Ok
        );
    }
    let r = unsafe { r.assume_init() };
    assert_eq!(r.gamma, expect.gamma);
    assert!(r.gamma >= r.h2_norm / 2f64.sqrt() - 1e-12 && r.gamma <= r.hinf_norm + 1e-9);
    assert!(grid >= r.gamma - 1e-9);
    assert!(feasible);
    assert_eq!(norm, expect.gamma);
    unsafe { aninorm_model_free(m) };
}

#[test]
fn static_model_accepts_null_state_blocks() {
    let d = [3.0, 0.0, 0.0, 4.0];
    let mut m = ptr::null_mut();
    let (mut n, mut mi, mut p) = (9, 9, 9);
    let mut hinf = 0.0;
    unsafe {
        let s = aninorm_model_new(0, 2, 2, ptr::null(), ptr::null(), ptr::null(), d.as_ptr(), &mut m);
        assert_eq!(s, AninormStatus::Ok);
        assert_eq!(aninorm_model_dims(m, &mut n, &mut mi, &mut p), AninormStatus::Ok);
        assert_eq!(aninorm_hinf_norm(m, 1e-9, &mut hinf), AninormStatus::Ok);
        aninorm_model_free(m);
    }
    assert_eq!((n, mi, p), (0, 2, 2));
    assert!((hinf - 4.0).abs() < 1e-6);
}

#[test]
fn errors_are_reported() {
    let mut out = ptr::null_mut();
    let (a, b, c, d) = (1.5, 1.0, 1.0, 0.0);
    let mut h2 = 0.0;
    unsafe {
        assert_eq!(
            aninorm_model_new(1, 1, 1, &a, &b, &c, &d, &mut out),
            AninormStatus::Ok
        );
        assert_eq!(aninorm_h2_norm(out, &mut h2), AninormStatus::Unstable);
        assert!(!last_error().is_empty());
        aninorm_model_free(out);

        assert_eq!(aninorm_h2_norm(ptr::null(), &mut h2), AninormStatus::NullPointer);
        assert!(last_error().contains("model"));

        let mut m = ptr::null_mut();
        assert_eq!(
            aninorm_model_new(1, 1, 1, ptr::null(), &b, &c, &d, &mut m),
            AninormStatus::NullPointer
        );
        assert!(m.is_null());

        let nan = f64::NAN;
        assert_eq!(
            aninorm_model_new(1, 1, 1, &nan, &b, &c, &d, &mut m),
            AninormStatus::InvalidArgument
        );
        aninorm_model_free(ptr::null_mut());
    }
    let ok = scalar(0.5, 1.0, 1.0, 0.0);
    let mut x = 0.0;
    unsafe {
        assert_eq!(aninorm_h2_norm(ok, &mut x), AninormStatus::Ok);
        aninorm_model_free(ok);
    }
    assert!(aninorm_last_error().is_null());
}

#[test]
fn json_round_trip_and_mean_anisotropy() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("g.json").to_str().unwrap()).unwrap();
    let mut g = ptr::null_mut();
    let mut back = ptr::null_mut();
    let (mut a0, mut a1) = (0.0, 0.0);
    unsafe {
        assert_eq!(
            aninorm_model_random_stable(2, 2, 2, 3, 0.9, &mut g),
            AninormStatus::Ok
        );
        assert_eq!(aninorm_model_save_json(g, path.as_ptr()), AninormStatus::Ok);
        assert_eq!(
            aninorm_model_load_json(path.as_ptr(), &mut back),
            AninormStatus::Ok
        );
        assert_eq!(aninorm_mean_anisotropy(g, 256, &mut a0), AninormStatus::Ok);
        assert_eq!(aninorm_mean_anisotropy(back, 256, &mut a1), AninormStatus::Ok);
        let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(
            aninorm_model_load_json(missing.as_ptr(), &mut m),
            AninormStatus::Io
        );
        aninorm_model_free(g);
        aninorm_model_free(back);
    }
    assert!(a0 >= 0.0 && a0.is_finite());
    assert_eq!(a0, a1);
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(aninorm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/aninorm.h")).unwrap();
    for name in [
        "aninorm_model_new",
        "aninorm_model_random_stable",
        "aninorm_model_load_json",
        "aninorm_model_save_json",
        "aninorm_model_free",
        "aninorm_model_dims",
        "aninorm_model_is_stable",
        "aninorm_h2_norm",
        "aninorm_hinf_norm",
        "aninorm_anisotropic_norm",
        "aninorm_mean_anisotropy",
        "aninorm_feasible",
        "aninorm_grid_oracle_norm",
        "aninorm_last_error",
        "aninorm_version",
        "typedef struct AninormModel AninormModel",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
