use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use byzreg_ffi::*;

fn last_error() -> String {
    let p = byzreg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { byzreg_string_free(s) };
    out
}

fn bundled(name: &str) -> *mut ByzregScenario {
    let name = CString::new(name).unwrap();
    let mut scn = ptr::null_mut();
    assert_eq!(unsafe { byzreg_scenario_bundled(name.as_ptr(), &mut scn) }, ByzregStatus::Ok);
    scn
}

fn run(scn: *const ByzregScenario, seed: u64) -> *mut ByzregResult {
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { byzreg_run(scn, seed, &mut res) }, ByzregStatus::Ok);
    res
}

#[test]
fn run_and_inspect() {
    let scn = bundled("abd-style-fault-free");
    let (mut start, mut end) = (0, 0);
    assert_eq!(unsafe { byzreg_scenario_seeds(scn, &mut start, &mut end) }, ByzregStatus::Ok);
    assert_eq!((start, end), (0, 100));

    let res = run(scn, 7);
    let mut passed = false;
    assert_eq!(unsafe { byzreg_result_passed(res, &mut passed) }, ByzregStatus::Ok);
    assert!(passed);
    let mut steps = 0;
    assert_eq!(unsafe { byzreg_result_steps(res, &mut steps) }, ByzregStatus::Ok);
    assert!(steps > 0);

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { byzreg_result_trace_hash(res, &mut s) }, ByzregStatus::Ok);
    let hash = take(s);
    assert_eq!(hash.len(), 64);

    assert_eq!(unsafe { byzreg_result_report_json(res, &mut s) }, ByzregStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
    assert!(report["verdicts"].as_array().unwrap().len() >= 10);

    assert_eq!(unsafe { byzreg_result_trace_jsonl(res, &mut s) }, ByzregStatus::Ok);
    let jsonl = CString::new(take(s)).unwrap();
    let mut passed = false;
    assert_eq!(unsafe { byzreg_check_trace(jsonl.as_ptr(), &mut s, &mut passed) }, ByzregStatus::Ok);
    assert!(passed);
    take(s);

    let again = run(scn, 7);
    assert_eq!(unsafe { byzreg_result_trace_hash(again, &mut s) }, ByzregStatus::Ok);
    assert_eq!(take(s), hash);

    unsafe {
        byzreg_result_free(again);
        byzreg_result_free(res);
        byzreg_scenario_free(scn);
    }
}

#[test]
fn errors_are_reported() {
    let mut scn = ptr::null_mut();
    let bad = CString::new("t = 1\n").unwrap();
    assert_eq!(unsafe { byzreg_scenario_from_toml(bad.as_ptr(), &mut scn) }, ByzregStatus::ParseError);
    assert!(scn.is_null());
    assert!(last_error().contains("missing field `n`"));

    let weak = CString::new("n = 3\nt = 1\n").unwrap();
    assert_eq!(unsafe { byzreg_scenario_from_toml(weak.as_ptr(), &mut scn) }, ByzregStatus::Ok);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { byzreg_run(scn, 0, &mut res) }, ByzregStatus::InvalidScenario);
    assert!(res.is_null());
    assert!(last_error().contains("n > 3t"));
    unsafe { byzreg_scenario_free(scn) };

    assert_eq!(unsafe { byzreg_scenario_from_toml(ptr::null(), &mut scn) }, ByzregStatus::NullPointer);
    assert_eq!(unsafe { byzreg_scenario_from_toml(bad.as_ptr(), ptr::null_mut()) }, ByzregStatus::NullPointer);

    let invalid = [0xffu8, 0xfe, 0];
    let status = unsafe { byzreg_scenario_from_toml(invalid.as_ptr().cast(), &mut scn) };
    assert_eq!(status, ByzregStatus::InvalidUtf8);

    assert_eq!(unsafe { byzreg_run(ptr::null(), 0, &mut res) }, ByzregStatus::NullPointer);
    let mut passed = false;
    assert_eq!(unsafe { byzreg_result_passed(ptr::null(), &mut passed) }, ByzregStatus::NullPointer);

    let junk = CString::new("{}\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { byzreg_check_trace(junk.as_ptr(), &mut s, &mut passed) }, ByzregStatus::ParseError);
    assert!(s.is_null());

    // A successful call clears the error.
    let good = bundled("equivocate");
    assert!(byzreg_last_error_message().is_null());
    unsafe {
        byzreg_scenario_free(good);
        byzreg_scenario_free(ptr::null_mut());
        byzreg_result_free(ptr::null_mut());
        byzreg_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(byzreg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/byzreg.h")
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for f in [
        "byzreg_scenario_from_toml",
        "byzreg_scenario_bundled",
        "byzreg_scenario_seeds",
        "byzreg_scenario_free",
        "byzreg_run",
        "byzreg_result_passed",
        "byzreg_result_steps",
        "byzreg_result_trace_hash",
        "byzreg_result_trace_jsonl",
        "byzreg_result_report_json",
        "byzreg_result_free",
        "byzreg_check_trace",
        "byzreg_string_free",
        "byzreg_last_error_message",
        "byzreg_version",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct ByzregScenario ByzregScenario;"));
    assert!(header.contains("BYZREG_STATUS_PANIC = 6"));
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_against_static_library() {
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let include = header_path().parent().unwrap().to_path_buf();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/smoke.c");
    // target/<profile>/deps/<this test> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libbyzreg_ffi.a");
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("byzreg_smoke");

    let syntax = Command::new("cc").arg("-fsyntax-only").arg("-I").arg(&include).arg(&src).status().unwrap();
    assert!(syntax.success(), "header does not compile");
    if !lib.exists() {
        eprintln!("{} not built; header syntax checked only", lib.display());
        return;
    }
    let status = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "linking the C smoke test failed");
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("pass "));
}
