use std::ffi::CStr;
use std::ptr;

use ganlab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ganlab_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn gaussian_handles_and_distances() {
    unsafe {
        let mut p = ptr::null_mut();
        let mut q = ptr::null_mut();
        let id = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(
            ganlab_gaussian_new(2, [0.0, 0.0].as_ptr(), id.as_ptr(), &mut p),
            GanlabStatus::Ok
        );
        assert_eq!(
            ganlab_gaussian_new(2, [3.0, 4.0].as_ptr(), id.as_ptr(), &mut q),
            GanlabStatus::Ok
        );
        assert_eq!(ganlab_gaussian_dim(p), 2);
        assert_eq!(ganlab_gaussian_dim(ptr::null()), 0);

        let mut w = 0.0;
        assert_eq!(ganlab_gauss_w2(p, q, &mut w), GanlabStatus::Ok);
        assert!((w - 5.0).abs() < 1e-12);
        let mut tv = 0.0;
        assert_eq!(ganlab_gauss_tv(p, q, &mut tv), GanlabStatus::Ok);
        let expected = ganlab::gauss::normal_cdf(2.5) - ganlab::gauss::normal_cdf(-2.5);
        assert!((tv - expected).abs() < 1e-12);
        let mut tk = 0.0;
        assert_eq!(ganlab_gauss_tukey(p, q, &mut tk), GanlabStatus::Ok);
        assert!(tk > 0.0 && tk <= 0.5);

        assert_eq!(
            ganlab_gauss_w2(p, ptr::null(), &mut w),
            GanlabStatus::NullPointer
        );
        assert!(last_error().contains("null"));
        assert_eq!(
            ganlab_gauss_w2(p, q, ptr::null_mut()),
            GanlabStatus::NullPointer
        );

        ganlab_gaussian_free(p);
        ganlab_gaussian_free(q);
        ganlab_gaussian_free(ptr::null_mut());
    }
}

#[test]
fn invalid_inputs_map_to_status_codes() {
    unsafe {
        let mut g = ptr::null_mut();
        let bad = [1.0, 0.5, 0.0, 1.0];
        assert_eq!(
            ganlab_gaussian_new(2, [0.0, 0.0].as_ptr(), bad.as_ptr(), &mut g),
            GanlabStatus::NotSymmetric
        );
        assert!(g.is_null());
        assert!(!last_error().is_empty());
        let neg = [-1.0, 0.0, 0.0, 1.0];
        assert_eq!(
            ganlab_gaussian_new(2, [0.0, 0.0].as_ptr(), neg.as_ptr(), &mut g),
            GanlabStatus::NotPositiveSemidefinite
        );
        let mut out = [0.0; 4];
        assert_eq!(
            ganlab_matrix_sqrt(0, ptr::null(), out.as_mut_ptr()),
            GanlabStatus::InvalidArgument
        );

        let mut rho = 0.0;
        let mut ratio = 0.0;
        assert_eq!(
            ganlab_qa_ratio(0.5, &mut rho, &mut ratio),
            GanlabStatus::InvalidArgument
        );
        assert_eq!(ganlab_qa_ratio(1e5, &mut rho, &mut ratio), GanlabStatus::Ok);
        assert!((ratio - std::f64::consts::SQRT_2).abs() < 0.01);
        assert!(last_error().is_empty());

        let k4 = [
            1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ];
        let mut v = 0.0;
        assert_eq!(
            ganlab_maximin_value(4, k4.as_ptr(), &mut v),
            GanlabStatus::TooLarge
        );
    }
}

#[test]
fn matrix_routines() {
    unsafe {
        let s = [4.0, 0.0, 0.0, 9.0];
        let mut root = [0.0; 4];
        assert_eq!(
            ganlab_matrix_sqrt(2, s.as_ptr(), root.as_mut_ptr()),
            GanlabStatus::Ok
        );
        assert_eq!(root, [2.0, 0.0, 0.0, 3.0]);

        let mut cov = [0.0; 4];
        let mut err = 0.0;
        let k = [4.0, 0.0, 0.0, 1.0];
        assert_eq!(
            ganlab_pca_truncate(2, k.as_ptr(), 1, cov.as_mut_ptr(), &mut err),
            GanlabStatus::Ok
        );
        assert!((err - 1.0).abs() < 1e-12);
        assert!((cov[0] - 4.0).abs() < 1e-12 && cov[3].abs() < 1e-12);

        let mut mm = 0.0;
        let mut mx = 1.0;
        let k = [2.0, 0.0, 0.0, 1.0];
        assert_eq!(
            ganlab_minimax_value(2, k.as_ptr(), 1, &mut mm),
            GanlabStatus::Ok
        );
        assert_eq!(
            ganlab_maximin_value(2, k.as_ptr(), &mut mx),
            GanlabStatus::Ok
        );
        assert_eq!((mm, mx), (1.0, 0.0));

        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [1.0, 1.0, 0.0, 0.0];
        let mut w = 1.0;
        assert_eq!(
            ganlab_w2_assignment(2, 2, a.as_ptr(), b.as_ptr(), &mut w),
            GanlabStatus::Ok
        );
        assert_eq!(w, 0.0);
    }
}

#[test]
fn trajectories() {
    unsafe {
        let k = [2.0, 0.0, 0.0, 1.0];
        let v0 = [0.6, 0.8];
        let mut tr = ptr::null_mut();
        assert_eq!(
            ganlab_shared_flow_run(
                2,
                k.as_ptr(),
                v0.as_ptr(),
                0.5,
                1.5,
                1e-2,
                60.0,
                100,
                &mut tr
            ),
            GanlabStatus::Ok
        );
        let len = ganlab_trajectory_len(tr);
        assert_eq!(len, 61);
        assert_eq!(ganlab_trajectory_state_len(tr), 4);
        let mut state = [0.0; 4];
        let (mut t, mut obj, mut lyap) = (0.0, 0.0, 0.0);
        assert_eq!(
            ganlab_trajectory_get(
                tr,
                len - 1,
                &mut t,
                &mut obj,
                &mut lyap,
                state.as_mut_ptr(),
                4
            ),
            GanlabStatus::Ok
        );
        assert!((t - 60.0).abs() < 1e-9);
        assert!(
            (state[0].abs() - 1.0).abs() < 1e-4
                && (state[2] - 2.0).abs() < 1e-4
                && (state[3] - 1.0).abs() < 1e-4
        );
        assert!((0.0..1e-6).contains(&lyap));
        let mut inc = 1.0;
        assert_eq!(
            ganlab_trajectory_max_lyapunov_increase(tr, &mut inc),
            GanlabStatus::Ok
        );
        assert!(inc <= 0.0);
        assert_eq!(
            ganlab_trajectory_get(tr, len, &mut t, &mut obj, &mut lyap, state.as_mut_ptr(), 4),
            GanlabStatus::InvalidArgument
        );
        assert_eq!(
            ganlab_trajectory_get(tr, 0, &mut t, &mut obj, &mut lyap, state.as_mut_ptr(), 3),
            GanlabStatus::DimensionMismatch
        );
        ganlab_trajectory_free(tr);

        let k = [1.0, 0.0, 0.0, 0.0];
        let a0 = [1.0, 0.0, 0.0, 0.05];
        let v0 = [1.0, 0.0];
        let mut tr = ptr::null_mut();
        assert_eq!(
            ganlab_naive_flow_run(
                2,
                k.as_ptr(),
                a0.as_ptr(),
                v0.as_ptr(),
                1e-3,
                1.0,
                100,
                &mut tr
            ),
            GanlabStatus::Ok
        );
        assert_eq!(ganlab_trajectory_state_len(tr), 6);
        let mut s = [0.0; 6];
        let n = ganlab_trajectory_len(tr);
        assert_eq!(
            ganlab_trajectory_get(tr, n - 1, &mut t, &mut obj, &mut lyap, s.as_mut_ptr(), 6),
            GanlabStatus::Ok
        );
        assert_eq!(s, [1.0, 0.0, 0.0, 0.05, 1.0, 0.0]);
        assert!(lyap.is_nan());
        ganlab_trajectory_free(tr);

        let v_bad = [0.0, 1.0];
        let k = [2.0, 0.0, 0.0, 1.0];
        assert_eq!(
            ganlab_shared_flow_run(
                2,
                k.as_ptr(),
                v_bad.as_ptr(),
                0.5,
                1.5,
                1e-2,
                1.0,
                1,
                &mut tr
            ),
            GanlabStatus::InvalidArgument
        );
        assert!(last_error().contains("orthogonal"));
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ganlab_version()) }
        .to_str()
        .unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
