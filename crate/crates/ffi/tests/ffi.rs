use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use nearcommute_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe { nc_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn matrix(dim: usize, re: &[f64], im: Option<&[f64]>) -> *mut NcMatrix {
    let mut m = ptr::null_mut();
    let st = unsafe { nc_matrix_new(dim, re.as_ptr(), im.map_or(ptr::null(), |v| v.as_ptr()), &mut m) };
    assert_eq!(st, NcStatus::Ok, "{}", last_error());
    m
}

fn read(m: *const NcMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = unsafe { nc_matrix_dim(m) };
    let (mut re, mut im) = (vec![0.0; n * n], vec![0.0; n * n]);
    assert_eq!(unsafe { nc_matrix_read(m, re.as_mut_ptr(), im.as_mut_ptr()) }, NcStatus::Ok);
    (re, im)
}

#[test]
fn matrix_round_trip() {
    let re = [1.0, 2.0, 3.0, 4.0];
    let im = [0.5, -0.5, 0.0, 1.0];
    let m = matrix(2, &re, Some(&im));
    assert_eq!(unsafe { nc_matrix_dim(m) }, 2);
    assert_eq!(read(m), (re.to_vec(), im.to_vec()));
    unsafe { nc_matrix_free(m) };
}

#[test]
fn commute_pair_through_handles() {
    // Diagonal A and a slightly perturbed diagonal B.
    let n = 6;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = -0.8 + 0.3 * i as f64;
        b[i * n + i] = 0.9 - 0.3 * i as f64;
    }
    for i in 0..n - 1 {
        b[i * n + i + 1] = 1e-3;
        b[(i + 1) * n + i] = 1e-3;
    }
    let (ha, hb) = (matrix(n, &a, None), matrix(n, &b, None));
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { nc_commute_pair(ha, hb, 0.0, &mut rep) }, NcStatus::Ok, "{}", last_error());
    let (mut da, mut db, mut res) = (f64::NAN, f64::NAN, f64::NAN);
    assert_eq!(unsafe { nc_report_distances(rep, &mut da, &mut db, &mut res) }, NcStatus::Ok);
    assert!(da.is_finite() && db.is_finite() && res < 1e-9);
    assert_eq!(unsafe { nc_report_bounds_pass(rep) }, 1);

    let (mut ap, mut bp) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { nc_report_outputs(rep, &mut ap, &mut bp) }, NcStatus::Ok);
    let (ar, ai) = read(ap);
    let (br, bi) = read(bp);
    // Commutator of the returned outputs computed entrywise.
    let z = |r: &[f64], i: &[f64], p: usize, q: usize| num_complex::Complex64::new(r[p * n + q], i[p * n + q]);
    let mut worst: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            let mut s = num_complex::Complex64::new(0.0, 0.0);
            for k in 0..n {
                s += z(&ar, &ai, p, k) * z(&br, &bi, k, q) - z(&br, &bi, p, k) * z(&ar, &ai, k, q);
            }
            worst = worst.max(s.norm());
        }
    }
    assert!(worst < 1e-9);
    unsafe {
        nc_matrix_free(ap);
        nc_matrix_free(bp);
        nc_report_free(rep);
        nc_matrix_free(ha);
        nc_matrix_free(hb);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { nc_matrix_new(2, ptr::null(), ptr::null(), &mut out) }, NcStatus::NullPointer);
    assert_eq!(unsafe { nc_matrix_new(1, [f64::NAN].as_ptr(), ptr::null(), &mut out) }, NcStatus::NonFinite);

    let a = matrix(2, &[0.0, 0.5, 0.0, 0.0], None);
    let b = matrix(2, &[0.0; 4], None);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { nc_commute_pair(a, b, 0.0, &mut rep) }, NcStatus::NotHermitian);
    assert!(last_error().contains("Hermitian"));
    assert!(rep.is_null());
    let c = matrix(3, &[0.0; 9], None);
    assert_eq!(unsafe { nc_commute_pair(b, c, 0.0, &mut rep) }, NcStatus::DimMismatch);
    assert_eq!(unsafe { nc_commute_pair(ptr::null(), b, 0.0, &mut rep) }, NcStatus::NullPointer);
    let name = unsafe { CStr::from_ptr(nc_status_name(NcStatus::DimMismatch)) };
    assert_eq!(name.to_str().unwrap(), "dimension mismatch");
    unsafe {
        nc_matrix_free(a);
        nc_matrix_free(b);
        nc_matrix_free(c);
        nc_matrix_free(ptr::null_mut());
        nc_report_free(ptr::null_mut());
    }
}

#[test]
fn voiculescu_handles() {
    let (mut u, mut v) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { nc_voiculescu(4, &mut u, &mut v) }, NcStatus::Ok);
    let (ur, ui) = read(u);
    // U is diagonal with the fourth roots of unity i, -1, -i, 1.
    let diag: Vec<(f64, f64)> = (0..4).map(|j| (ur[5 * j], ui[5 * j])).collect();
    let want = [(0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)];
    for (g, w) in diag.iter().zip(want) {
        assert!((g.0 - w.0).abs() < 1e-15 && (g.1 - w.1).abs() < 1e-15);
    }
    let (vr, _) = read(v);
    assert_eq!(vr[4], 1.0);
    assert_eq!(unsafe { nc_voiculescu(0, &mut u, &mut v) }, NcStatus::InvalidInput);
    unsafe {
        nc_matrix_free(u);
        nc_matrix_free(v);
    }
}

#[test]
fn header_declares_api_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/nearcommute.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["nc_matrix_new", "nc_commute_pair", "nc_report_free", "NC_STATUS_NOT_HERMITIAN", "typedef struct NcMatrix"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() else {
        eprintln!("no C compiler on PATH; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
