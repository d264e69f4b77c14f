use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use overuse_sim_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = osim_last_error_message();
    assert!(!p.is_null(), "an error message should be recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(json: &str) -> *mut OsimConfig {
    let mut cfg = ptr::null_mut();
    let status = unsafe { osim_config_from_json(cstr(json).as_ptr(), &mut cfg) };
    assert_eq!(status, OsimStatus::Ok);
    cfg
}

#[test]
fn config_round_trips_through_json() {
    let cfg = config(r#"{"level": "simplified", "horizon": 10}"#);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { osim_config_to_json(cfg, &mut json) }, OsimStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"n_replications\": 900"));
    let again = config(&text);
    let mut json2 = ptr::null_mut();
    unsafe { osim_config_to_json(again, &mut json2) };
    assert_eq!(text, unsafe { CStr::from_ptr(json2) }.to_str().unwrap());
    unsafe {
        osim_string_free(json);
        osim_string_free(json2);
        osim_config_free(cfg);
        osim_config_free(again);
    }
}

#[test]
fn invalid_config_reports_path() {
    let mut cfg = ptr::null_mut();
    let json = cstr(r#"{"level": "simplified", "agent": {"beta": 1.5}}"#);
    let status = unsafe { osim_config_from_json(json.as_ptr(), &mut cfg) };
    assert_eq!(status, OsimStatus::InvalidConfig);
    assert!(cfg.is_null());
    assert!(last_error().contains("agent.beta"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { osim_config_from_json(ptr::null(), &mut cfg) }, OsimStatus::NullPointer);
    assert!(last_error().contains("json"));
    let mut n = 0usize;
    assert_eq!(unsafe { osim_batch_horizon(ptr::null(), &mut n) }, OsimStatus::NullPointer);
    let level = cstr("simplified");
    assert_eq!(unsafe { osim_config_new(level.as_ptr(), ptr::null_mut()) }, OsimStatus::NullPointer);
    unsafe {
        osim_config_free(ptr::null_mut());
        osim_batch_free(ptr::null_mut());
        osim_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_previous_error() {
    let mut cfg = ptr::null_mut();
    unsafe { osim_config_from_json(ptr::null(), &mut cfg) };
    assert!(!osim_last_error_message().is_null());
    let cfg = config(r#"{"level": "advanced"}"#);
    assert!(osim_last_error_message().is_null());
    unsafe { osim_config_free(cfg) };
}

#[test]
fn unknown_level_is_invalid_config() {
    let mut cfg = ptr::null_mut();
    let level = cstr("baroque");
    assert_eq!(unsafe { osim_config_new(level.as_ptr(), &mut cfg) }, OsimStatus::InvalidConfig);
    assert!(last_error().contains("baroque"));
}

#[test]
fn batch_accessors_match_core() {
    let json = r#"{"level": "refined", "horizon": 30, "n_replications": 8}"#;
    let cfg = config(json);
    let mut batch = ptr::null_mut();
    assert_eq!(unsafe { osim_run_batch(cfg, 2, &mut batch) }, OsimStatus::Ok);

    let core_cfg = overuse_sim::config::parse_config(json).unwrap();
    let expected = overuse_sim::harness::run_batch_with_threads(&core_cfg, 1).unwrap();

    let (mut h, mut n, mut arms) = (0usize, 0usize, 0usize);
    unsafe {
        assert_eq!(osim_batch_horizon(batch, &mut h), OsimStatus::Ok);
        assert_eq!(osim_batch_n_replications(batch, &mut n), OsimStatus::Ok);
        assert_eq!(osim_batch_n_arms(batch, &mut arms), OsimStatus::Ok);
    }
    assert_eq!((h, n, arms), (30, 8, 4));
    for t in 0..h {
        let mut ok = 0usize;
        assert_eq!(unsafe { osim_batch_non_addicted(batch, t, &mut ok) }, OsimStatus::Ok);
        assert_eq!(ok, expected.non_addicted[t]);
        for arm in 0..arms {
            let mut q = f64::NAN;
            assert_eq!(unsafe { osim_batch_mean_q(batch, t, arm, &mut q) }, OsimStatus::Ok);
            assert_eq!(q, expected.mean_q_arms[t][arm]);
        }
    }

    let mut ok = 0usize;
    assert_eq!(unsafe { osim_batch_non_addicted(batch, h, &mut ok) }, OsimStatus::OutOfRange);
    let mut q = 0.0;
    assert_eq!(unsafe { osim_batch_mean_q(batch, 0, arms, &mut q) }, OsimStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let path = cstr(dir.path().to_str().unwrap());
    assert_eq!(unsafe { osim_batch_write_csv(batch, path.as_ptr()) }, OsimStatus::Ok);
    for f in ["agents_evolution.csv", "recommender_q.csv", "resolved_config.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    unsafe {
        osim_batch_free(batch);
        osim_config_free(cfg);
    }
}

#[test]
fn env_dump_parses_back() {
    let mut json = ptr::null_mut();
    let level = cstr("refined");
    assert_eq!(unsafe { osim_env_dump_json(level.as_ptr(), true, &mut json) }, OsimStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let spec = overuse_sim::mdp::EnvironmentSpec::from_json_str(&text).unwrap();
    assert!(spec.misrepresented);
    unsafe { osim_string_free(json) };
}

#[test]
fn derive_seed_matches_core() {
    for i in 0..10 {
        assert_eq!(osim_derive_seed(42, i), overuse_sim::seed::derive_seed(42, i));
    }
}

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/overuse_sim.h")
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for name in [
        "osim_last_error_message",
        "osim_string_free",
        "osim_config_from_json",
        "osim_config_new",
        "osim_config_to_json",
        "osim_config_free",
        "osim_run_batch",
        "osim_batch_free",
        "osim_batch_horizon",
        "osim_batch_n_replications",
        "osim_batch_n_arms",
        "osim_batch_non_addicted",
        "osim_batch_mean_q",
        "osim_batch_write_csv",
        "osim_env_dump_json",
        "osim_derive_seed",
        "typedef struct OsimConfig OsimConfig",
        "typedef struct OsimBatch OsimBatch",
        "OSIM_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "overuse_sim.h"

int main(void) {
    OsimConfig *cfg = NULL;
    const char *json = "{\"level\": \"refined\", \"horizon\": 20, \"n_replications\": 4}";
    if (osim_config_from_json(json, &cfg) != OSIM_STATUS_OK) return 1;
    OsimBatch *batch = NULL;
    if (osim_run_batch(cfg, 0, &batch) != OSIM_STATUS_OK) return 2;
    size_t arms = 0, ok = 0;
    osim_batch_n_arms(batch, &arms);
    osim_batch_non_addicted(batch, 19, &ok);
    if (osim_batch_non_addicted(batch, 20, &ok) != OSIM_STATUS_OUT_OF_RANGE) return 3;
    const char *msg = osim_last_error_message();
    if (msg == NULL || strstr(msg, "horizon") == NULL) return 4;
    printf("arms=%zu seed=%llu\n", arms, (unsigned long long)osim_derive_seed(0, 0));
    osim_batch_free(batch);
    osim_config_free(cfg);
    return 0;
}
"#;

/// Compiles and runs a C client against the static library when a C
/// compiler is available.
#[test]
fn c_client_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("liboveruse_sim_ffi.a");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(header_path().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to build");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C client exited with {:?}", out.status);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), "arms=4 seed=16294208416658607535");
}
