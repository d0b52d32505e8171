//! Exercises the C interface through its exported symbols: lifecycle,
//! error paths, and the generated header.

use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;
use std::process::Command;
use std::ptr;

use subshift_capi::{
    subshift_build_next, subshift_last_error, subshift_stage_dim, subshift_stage_free,
    subshift_stage_from_json, subshift_stage_index, subshift_stage_init, subshift_stage_modulus,
    subshift_stage_pattern_count, subshift_stage_read_file, subshift_stage_side,
    subshift_stage_to_json, subshift_stage_write_file, subshift_string_free,
    subshift_verify_pair, SubshiftStage, SubshiftStatus,
};

fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_owned();
    unsafe { subshift_string_free(ptr) };
    text
}

#[test]
fn lifecycle_build_verify_roundtrip() {
    unsafe {
        let mut s1: *mut SubshiftStage = ptr::null_mut();
        assert_eq!(subshift_stage_init(1, &mut s1), SubshiftStatus::Ok);

        let mut value = 0usize;
        assert_eq!(subshift_stage_dim(s1, &mut value), SubshiftStatus::Ok);
        assert_eq!(value, 1);
        assert_eq!(subshift_stage_index(s1, &mut value), SubshiftStatus::Ok);
        assert_eq!(value, 1);
        assert_eq!(subshift_stage_pattern_count(s1, &mut value), SubshiftStatus::Ok);
        assert_eq!(value, 2);
        let mut side = 0u64;
        assert_eq!(subshift_stage_side(s1, &mut side), SubshiftStatus::Ok);
        assert_eq!(side, 1);
        let mut modulus = 0u64;
        assert_eq!(subshift_stage_modulus(s1, &mut modulus), SubshiftStatus::Ok);
        assert_eq!(modulus, 1);

        let params = CString::new(
            r#"{"l": 8, "m": 2, "d": "1/2", "nu": "1/10", "slack": "1/2", "target": 40, "budget": 4000, "seed": 1, "fill": "all_zero"}"#,
        )
        .unwrap();
        let mut s2: *mut SubshiftStage = ptr::null_mut();
        let mut complete = false;
        let mut report: *mut c_char = ptr::null_mut();
        assert_eq!(
            subshift_build_next(s1, params.as_ptr(), &mut s2, &mut complete, &mut report),
            SubshiftStatus::Ok
        );
        assert!(complete);
        let report: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert_eq!(report["side"], 17);
        assert_eq!(report["count"], 40);
        assert_eq!(report["complete"], true);

        let mut pass = false;
        let mut verify: *mut c_char = ptr::null_mut();
        assert_eq!(
            subshift_verify_pair(s1, s2, &mut pass, &mut verify),
            SubshiftStatus::Ok
        );
        assert!(pass);
        let verify: serde_json::Value = serde_json::from_str(&take_string(verify)).unwrap();
        assert_eq!(verify["pass"], true);
        assert_eq!(verify["gcd_ok"], true);
        assert_eq!(verify["counterexamples"].as_array().unwrap().len(), 0);

        // report pointer may be declined
        let mut pass_again = false;
        assert_eq!(
            subshift_verify_pair(s1, s2, &mut pass_again, ptr::null_mut()),
            SubshiftStatus::Ok
        );
        assert!(pass_again);

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(subshift_stage_to_json(s2, &mut json), SubshiftStatus::Ok);
        let text = take_string(json);
        let mut s2_copy: *mut SubshiftStage = ptr::null_mut();
        let c_text = CString::new(text.clone()).unwrap();
        assert_eq!(
            subshift_stage_from_json(c_text.as_ptr(), &mut s2_copy),
            SubshiftStatus::Ok
        );
        let mut json_copy: *mut c_char = ptr::null_mut();
        assert_eq!(subshift_stage_to_json(s2_copy, &mut json_copy), SubshiftStatus::Ok);
        assert_eq!(take_string(json_copy), text, "serialization must be canonical");

        subshift_stage_free(s1);
        subshift_stage_free(s2);
        subshift_stage_free(s2_copy);
        subshift_stage_free(ptr::null_mut());
        subshift_string_free(ptr::null_mut());
    }
}

#[test]
fn file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stage1.json");
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut s1: *mut SubshiftStage = ptr::null_mut();
        assert_eq!(subshift_stage_init(2, &mut s1), SubshiftStatus::Ok);
        assert_eq!(
            subshift_stage_write_file(s1, c_path.as_ptr()),
            SubshiftStatus::Ok
        );
        let mut back: *mut SubshiftStage = ptr::null_mut();
        assert_eq!(
            subshift_stage_read_file(c_path.as_ptr(), &mut back),
            SubshiftStatus::Ok
        );
        let mut dim = 0usize;
        assert_eq!(subshift_stage_dim(back, &mut dim), SubshiftStatus::Ok);
        assert_eq!(dim, 2);
        subshift_stage_free(s1);
        subshift_stage_free(back);

        let missing = CString::new(dir.path().join("absent.json").to_str().unwrap()).unwrap();
        let mut nothing: *mut SubshiftStage = ptr::null_mut();
        assert_eq!(
            subshift_stage_read_file(missing.as_ptr(), &mut nothing),
            SubshiftStatus::Io
        );
        assert!(nothing.is_null());
    }
}

#[test]
fn error_paths_set_messages() {
    unsafe {
        // success clears the message
        let mut s1: *mut SubshiftStage = ptr::null_mut();
        assert_eq!(subshift_stage_init(1, &mut s1), SubshiftStatus::Ok);
        assert!(subshift_last_error().is_null());

        assert_eq!(
            subshift_stage_init(1, ptr::null_mut()),
            SubshiftStatus::NullArgument
        );
        let msg = take_string(subshift_last_error());
        assert!(msg.contains("null"), "unexpected message: {msg}");

        let mut out: *mut SubshiftStage = ptr::null_mut();
        assert_eq!(
            subshift_stage_from_json(ptr::null(), &mut out),
            SubshiftStatus::NullArgument
        );

        let bad_utf8 = [0xffu8, 0x00];
        assert_eq!(
            subshift_stage_from_json(bad_utf8.as_ptr().cast(), &mut out),
            SubshiftStatus::InvalidUtf8
        );

        let not_json = CString::new("not a stage").unwrap();
        assert_eq!(
            subshift_stage_from_json(not_json.as_ptr(), &mut out),
            SubshiftStatus::InvalidInput
        );
        assert!(out.is_null(), "failed parse must not produce a handle");
        assert!(!subshift_last_error().is_null());
        subshift_string_free(subshift_last_error());

        let mut dim = 0usize;
        assert_eq!(
            subshift_stage_dim(ptr::null(), &mut dim),
            SubshiftStatus::NullArgument
        );

        // dimension zero is rejected by the library, not the binding
        assert_eq!(subshift_stage_init(0, &mut out), SubshiftStatus::InvalidInput);

        // unknown parameter fields are rejected
        let params = CString::new(r#"{"l": 6, "m": 6, "d": "3/10", "target": 4, "bogus": 1}"#).unwrap();
        let mut s2: *mut SubshiftStage = ptr::null_mut();
        let mut complete = false;
        assert_eq!(
            subshift_build_next(s1, params.as_ptr(), &mut s2, &mut complete, ptr::null_mut()),
            SubshiftStatus::InvalidInput
        );
        let msg = take_string(subshift_last_error());
        assert!(msg.contains("bogus"), "unexpected message: {msg}");

        // geometry violations surface as invalid input: modulus must grow
        let params = CString::new(r#"{"l": 2, "m": 1, "d": "3/10", "target": 2}"#).unwrap();
        assert_eq!(
            subshift_build_next(s1, params.as_ptr(), &mut s2, &mut complete, ptr::null_mut()),
            SubshiftStatus::InvalidInput
        );

        subshift_stage_free(s1);
    }
}

#[test]
fn generated_header_lists_every_symbol_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/subshift.h");
    let text = std::fs::read_to_string(&header).expect("header is generated at build time");
    for symbol in [
        "subshift_stage_init",
        "subshift_stage_from_json",
        "subshift_stage_read_file",
        "subshift_stage_to_json",
        "subshift_stage_write_file",
        "subshift_stage_dim",
        "subshift_stage_index",
        "subshift_stage_side",
        "subshift_stage_modulus",
        "subshift_stage_pattern_count",
        "subshift_build_next",
        "subshift_verify_pair",
        "subshift_stage_free",
        "subshift_string_free",
        "subshift_last_error",
        "SUBSHIFT_STATUS_OK",
        "SUBSHIFT_STATUS_NULL_ARGUMENT",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }

    let scratch = tempfile::tempdir().unwrap();
    let probe = scratch.path().join("probe.c");
    std::fs::write(
        &probe,
        "#include \"subshift.h\"\n\
         int main(void) {\n\
           SubshiftStage *stage = 0;\n\
           SubshiftStatus status = subshift_stage_init(1, &stage);\n\
           if (status != SUBSHIFT_STATUS_OK) return 1;\n\
           subshift_stage_free(stage);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Wextra")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&probe)
        .output()
        .expect("cc is available");
    assert!(
        out.status.success(),
        "header does not compile as C99:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
