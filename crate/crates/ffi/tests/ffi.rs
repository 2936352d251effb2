use std::ffi::{CStr, CString};
use std::ptr;

use linkbsd_ffi::*;

fn last_error() -> String {
    let p = lb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    lb_string_free(p);
    s
}

#[test]
fn ber_from_q() {
    let mut b = LbBer::default();
    assert_eq!(unsafe { lb_ber_from_q(6.0, &mut b) }, LbStatus::Ok);
    assert!((b.prob / 9.865_876_450_376_98e-10 - 1.0).abs() < 1e-9);
    assert_eq!(
        unsafe { lb_ber_from_q(-1.0, &mut b) },
        LbStatus::InvalidArgument
    );
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { lb_ber_from_q(1.0, ptr::null_mut()) },
        LbStatus::NullPointer
    );
}

#[test]
fn estimate_ber_on_two_levels() {
    // deterministic two-level signal with a small triangular spread
    let xs: Vec<f64> = (0..2000)
        .map(|i| f64::from(i % 2) + 0.02 * (f64::from(i % 17) - 8.0) / 8.0)
        .collect();
    let (mut q, mut b) = (0.0, LbBer::default());
    assert_eq!(
        unsafe { lb_estimate_ber(xs.as_ptr(), xs.len(), &mut q, &mut b) },
        LbStatus::Ok
    );
    assert!(q > 10.0 && b.log10 < -20.0, "{q} {b:?}");

    let flat = vec![0.5; 500];
    assert_eq!(
        unsafe { lb_estimate_ber(flat.as_ptr(), flat.len(), &mut q, &mut b) },
        LbStatus::DataError
    );
}

#[test]
fn classify_with_handles() {
    let lib = lb_library_default();
    let rules = lb_rules_default();
    let left = CString::new("SS").unwrap();
    let mut v = LbVerdict::default();
    let st = unsafe {
        lb_classify(
            lib,
            rules,
            left.as_ptr(),
            ptr::null(),
            f64::NAN,
            -8.0,
            1510.0,
            &mut v,
        )
    };
    assert_eq!(st, LbStatus::Ok);
    assert!(!v.pass);
    assert_eq!(v.failed_rules, LB_RULE_RX_NO_AMP);
    assert!(v.preamp_dbm.is_nan());

    let (l, r) = (CString::new("SM").unwrap(), CString::new("S").unwrap());
    let st = unsafe {
        lb_classify(
            lib,
            rules,
            l.as_ptr(),
            r.as_ptr(),
            20.0,
            0.0,
            1550.0,
            &mut v,
        )
    };
    assert_eq!(st, LbStatus::Ok);
    assert!(v.pass && v.min_margin_db >= 0.0);

    let bad = CString::new("SX").unwrap();
    let st = unsafe {
        lb_classify(
            lib,
            rules,
            bad.as_ptr(),
            ptr::null(),
            f64::NAN,
            0.0,
            1550.0,
            &mut v,
        )
    };
    assert_eq!(st, LbStatus::InvalidArgument);
    assert!(last_error().contains("position 2"));
    let st = unsafe {
        lb_classify(
            ptr::null(),
            rules,
            l.as_ptr(),
            ptr::null(),
            f64::NAN,
            0.0,
            1550.0,
            &mut v,
        )
    };
    assert_eq!(st, LbStatus::NullPointer);

    unsafe {
        lb_library_free(lib);
        lb_rules_free(rules);
    }
}

#[test]
fn json_constructors() {
    let json = CString::new(r#"{"S": {"loss_db": {"1550": 3.0}}, "M": {"loss_db": {"1550": 1.0}}, "rules": {"rx_floor_no_amp": -20}}"#).unwrap();
    let mut lib = ptr::null_mut();
    let mut rules = ptr::null_mut();
    unsafe {
        assert_eq!(lb_library_from_json(json.as_ptr(), &mut lib), LbStatus::Ok);
        assert_eq!(lb_rules_from_json(json.as_ptr(), &mut rules), LbStatus::Ok);
        let left = CString::new("SSSS").unwrap();
        let mut v = LbVerdict::default();
        assert_eq!(
            lb_classify(
                lib,
                rules,
                left.as_ptr(),
                ptr::null(),
                f64::NAN,
                -5.0,
                1550.0,
                &mut v
            ),
            LbStatus::Ok
        );
        assert_eq!(v.rx_dbm, -17.0);
        assert!(v.pass);
        lb_library_free(lib);
        lb_rules_free(rules);

        let broken = CString::new("{").unwrap();
        let mut lib = ptr::null_mut();
        assert_eq!(
            lb_library_from_json(broken.as_ptr(), &mut lib),
            LbStatus::InvalidArgument
        );
        assert!(lib.is_null());
    }
}

#[test]
fn learn_and_explore_return_owned_strings() {
    let (table, feature) = (
        CString::new("table2").unwrap(),
        CString::new("preamp").unwrap(),
    );
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(
            lb_learn_stump(table.as_ptr(), feature.as_ptr(), -12.0, &mut out),
            LbStatus::Ok
        );
        let json = take_string(out);
        assert!(json.contains("-26.5"), "{json}");

        let bogus = CString::new("bogus").unwrap();
        assert_eq!(
            lb_learn_stump(table.as_ptr(), bogus.as_ptr(), -12.0, &mut out),
            LbStatus::InvalidArgument
        );

        let lib = lb_library_default();
        let rules = lb_rules_default();
        let space = CString::new(r#"{"max_left": 3, "max_right": 1, "amplifier": "optional", "gain_db": 20, "launch_dbm": -3, "wavelength_nm": 1550}"#).unwrap();
        let mut csv = ptr::null_mut();
        assert_eq!(
            lb_explore(lib, rules, space.as_ptr(), &mut csv),
            LbStatus::Ok
        );
        let csv = take_string(csv);
        assert!(csv.starts_with("rank,left_seq,right_seq,amp,rx_dbm,preamp_dbm,min_margin_db\n"));
        assert!(csv.lines().count() > 1);
        lb_library_free(lib);
        lb_rules_free(rules);
    }
}

#[test]
fn header_declares_every_symbol() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/linkbsd.h")).unwrap();
    for sym in [
        "lb_last_error",
        "lb_string_free",
        "lb_library_default",
        "lb_library_from_json",
        "lb_library_free",
        "lb_rules_default",
        "lb_rules_from_json",
        "lb_rules_free",
        "lb_ber_from_q",
        "lb_estimate_ber",
        "lb_classify",
        "lb_learn_stump",
        "lb_explore",
        "typedef struct LbLibrary LbLibrary",
        "LB_STATUS_DATA_ERROR",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"linkbsd.h\"\nint main(void) { LbBer b; return lb_ber_from_q(1.0, &b); }\n",
    )
    .unwrap();
    let st = std::process::Command::new("cc")
        .args([
            "-std=c99",
            "-Wall",
            "-Werror",
            "-fsyntax-only",
            "-I",
            concat!(env!("CARGO_MANIFEST_DIR"), "/include"),
        ])
        .arg(&src)
        .status()
        .unwrap();
    assert!(st.success());
}
