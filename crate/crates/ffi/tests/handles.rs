use std::ffi::{CStr, CString};
use std::ptr;

use tlasso_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tl_last_error()) }.to_string_lossy().into_owned()
}

fn generate(link: &str, seed: u64) -> *mut TlInstance {
    let mut inst = ptr::null_mut();
    let status = unsafe { tl_instance_generate(24, 80, 2, 2, 3.0, c(link).as_ptr(), seed, &mut inst) };
    assert_eq!(status, TlStatus::Ok, "{}", last_error());
    inst
}

#[test]
fn identity_params_through_the_abi() {
    let mut p = TlParams::default();
    let status = unsafe { tl_link_params(c("identity").as_ptr(), 0, &mut p) };
    assert_eq!(status, TlStatus::Ok);
    assert!((p.mu - 1.0).abs() < 1e-10);
    assert!(p.sigma.abs() < 1e-10);
    assert!((p.psi_hat - (8.0f64 / 3.0).sqrt()).abs() < 1e-6);
    assert!(last_error().is_empty());
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut p = TlParams::default();
    assert_eq!(unsafe { tl_link_params(c("cubic").as_ptr(), 0, &mut p) }, TlStatus::NotSubGaussian);
    assert!(last_error().contains("not sub-Gaussian"));
    assert_eq!(unsafe { tl_link_params(c("wobble").as_ptr(), 0, &mut p) }, TlStatus::InvalidArgument);
    assert_eq!(unsafe { tl_link_params(ptr::null(), 0, &mut p) }, TlStatus::NullPointer);
    assert_eq!(unsafe { tl_link_params(c("sign").as_ptr(), 0, ptr::null_mut()) }, TlStatus::NullPointer);

    let mut inst = ptr::null_mut();
    let bad = unsafe { tl_instance_generate(4, 8, 0, 0, 1.0, c("identity").as_ptr(), 0, &mut inst) };
    assert_eq!(bad, TlStatus::InvalidArgument);
    assert!(inst.is_null());
}

#[test]
fn solve_recovers_and_copies_estimates() {
    let inst = generate("identity", 5);
    let mut res = ptr::null_mut();
    let status = unsafe { tl_solve(inst, c("l1:anchor").as_ptr(), c("l1:anchor").as_ptr(), 0, 0.0, &mut res) };
    assert_eq!(status, TlStatus::Ok, "{}", last_error());

    let mut summary = TlSolveSummary::default();
    assert_eq!(unsafe { tl_result_summary(res, &mut summary) }, TlStatus::Ok);
    assert!(summary.converged);

    let (mut n, mut m) = (0, 0);
    assert_eq!(unsafe { tl_instance_dims(inst, &mut n, &mut m) }, TlStatus::Ok);
    let mut x_hat = vec![0.0; n];
    let mut v_hat = vec![0.0; m];
    let mut x_star = vec![0.0; n];
    let mut v_star = vec![0.0; m];
    unsafe {
        assert_eq!(tl_result_copy_estimate(res, x_hat.as_mut_ptr(), n, v_hat.as_mut_ptr(), m), TlStatus::Ok);
        assert_eq!(tl_instance_copy_truth(inst, x_star.as_mut_ptr(), n, v_star.as_mut_ptr(), m), TlStatus::Ok);
        assert_eq!(
            tl_result_copy_estimate(res, x_hat.as_mut_ptr(), n - 1, v_hat.as_mut_ptr(), m),
            TlStatus::BufferTooSmall
        );
    }
    let direct: f64 = x_hat
        .iter()
        .zip(&x_star)
        .chain(v_hat.iter().zip(&v_star))
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut err = f64::NAN;
    assert_eq!(unsafe { tl_joint_error(res, inst, &mut err) }, TlStatus::Ok);
    assert!((err - direct).abs() < 1e-12);
    assert!(err < 1e-4);

    unsafe {
        tl_result_free(res);
        tl_instance_free(inst);
        tl_result_free(ptr::null_mut());
        tl_instance_free(ptr::null_mut());
    }
}

#[test]
fn anchor_outside_set_is_a_config_error() {
    let inst = generate("identity", 9);
    let mut res = ptr::null_mut();
    let status = unsafe { tl_solve(inst, c("l1:0.001").as_ptr(), c("l1:anchor").as_ptr(), 0, 0.0, &mut res) };
    assert_eq!(status, TlStatus::Config);
    assert!(res.is_null());
    unsafe { tl_instance_free(inst) };
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("inst.txt").to_str().unwrap());
    let inst = generate("clip:1", 3);
    assert_eq!(unsafe { tl_instance_save(inst, path.as_ptr()) }, TlStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { tl_instance_load(path.as_ptr(), &mut loaded) }, TlStatus::Ok);
    let mut a = vec![0.0; 80];
    let mut b = vec![0.0; 80];
    unsafe {
        assert_eq!(tl_instance_copy_observations(inst, a.as_mut_ptr(), 80), TlStatus::Ok);
        assert_eq!(tl_instance_copy_observations(loaded, b.as_mut_ptr(), 80), TlStatus::Ok);
    }
    assert_eq!(a, b);
    let missing = c("/nonexistent/dir/inst.txt");
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { tl_instance_load(missing.as_ptr(), &mut none) }, TlStatus::Io);
    unsafe {
        tl_instance_free(inst);
        tl_instance_free(loaded);
    }
}

#[test]
fn width_and_local_width() {
    let dims = [100usize];
    let mut est = TlEstimate::default();
    let status = unsafe { tl_gaussian_width(c("l2:1").as_ptr(), dims.as_ptr(), 1, 0.0, 4000, 1, &mut est) };
    assert_eq!(status, TlStatus::Ok);
    assert!((est.mean - 9.975_031_64).abs() < 4.0 * est.std_error + 1e-9);
    let mut local = TlEstimate::default();
    let status = unsafe { tl_gaussian_width(c("l2:1").as_ptr(), dims.as_ptr(), 1, 0.5, 4000, 1, &mut local) };
    assert_eq!(status, TlStatus::Ok);
    assert!((local.mean - 0.5 * est.mean).abs() < 1e-9);
    let status = unsafe { tl_gaussian_width(c("full").as_ptr(), dims.as_ptr(), 1, 0.0, 10, 1, &mut est) };
    assert_eq!(status, TlStatus::InvalidArgument);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(tl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
