use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use glucolab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { glucolab_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn risk_and_metrics() {
    let mut r = 0.0;
    assert_eq!(unsafe { glucolab_magni_risk(50.0, &mut r) }, GlucolabStatus::Ok);
    assert_eq!(r, glucolab::env::magni_risk(50.0).unwrap());
    assert_eq!(unsafe { glucolab_magni_risk(-1.0, &mut r) }, GlucolabStatus::InvalidArgument);
    assert!(last_error().contains("glucose"));
    assert_eq!(unsafe { glucolab_magni_risk(100.0, ptr::null_mut()) }, GlucolabStatus::NullPointer);

    let cgm = [65.0, 100.0, 185.0, 170.0];
    let mut m = GlucolabMetrics::default();
    assert_eq!(unsafe { glucolab_metrics(cgm.as_ptr(), cgm.len(), &mut m) }, GlucolabStatus::Ok);
    assert_eq!((m.tir_pct, m.tbr_pct, m.tar_pct), (50.0, 25.0, 25.0));
    let pair = [80.0, 120.0];
    unsafe { glucolab_metrics(pair.as_ptr(), 2, &mut m) };
    assert!((m.cv_pct - 20.0).abs() < 1e-12);
    assert_eq!(unsafe { glucolab_metrics(cgm.as_ptr(), 0, &mut m) }, GlucolabStatus::InvalidArgument);
}

#[test]
fn environment_handle_matches_the_library() {
    let id = CString::new("adult#001").unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { glucolab_env_new(id.as_ptr(), 5, 0, 0.1, &mut env) }, GlucolabStatus::Ok);
    let mut direct = glucolab::env::GlucoseEnv::new(
        glucolab::sim::builtin_cohort().get("adult#001").unwrap().clone(),
        {
            let mut c = glucolab::env::EnvConfig::default();
            c.episode.length_days = 0.1;
            c
        },
        5,
        0,
    )
    .unwrap();
    let mut f = [0.0; GLUCOLAB_FEATURE_DIM];
    let mut cgm = 0.0;
    assert_eq!(unsafe { glucolab_env_observation(env, f.as_mut_ptr(), &mut cgm) }, GlucolabStatus::Ok);
    assert_eq!(f.as_slice(), direct.observation().features.as_slice());
    let (mut reward, mut done, mut steps) = (0.0, false, 0);
    while !done {
        let a = if steps % 2 == 0 { 0.3 } else { -0.6 };
        assert_eq!(unsafe { glucolab_env_step(env, a, f.as_mut_ptr(), &mut reward, &mut done) }, GlucolabStatus::Ok);
        let (df, dr, dd) = direct.step(a).unwrap();
        assert_eq!((f.as_slice(), reward, done), (df.as_slice(), dr, dd));
        steps += 1;
    }
    assert_eq!(steps, 48);
    let mut g = 0.0;
    unsafe { glucolab_env_true_glucose(env, &mut g) };
    assert_eq!(g, direct.state().plasma_glucose);
    assert_eq!(unsafe { glucolab_env_step(env, 0.0, f.as_mut_ptr(), &mut reward, &mut done) }, GlucolabStatus::EpisodeDone);
    unsafe { glucolab_env_free(env) };

    let bad = CString::new("adult#042").unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { glucolab_env_new(bad.as_ptr(), 5, 0, 1.0, &mut env) }, GlucolabStatus::InvalidArgument);
    assert!(env.is_null());
    assert!(last_error().contains("adult#042"));
    unsafe { glucolab_env_free(ptr::null_mut()) };
}

#[test]
fn policy_handle_acts_like_the_library() {
    use glucolab::rl::{train_td3bc, Td3BcConfig, TrainingData};
    let n = 64;
    let states: Vec<f64> = (0..n * 12).map(|i| (i % 17) as f64 * 10.0).collect();
    let data = TrainingData::from_raw(12, states.clone(), vec![0.1; n], vec![-1.0; n], states, vec![false; n]).unwrap();
    let cfg = Td3BcConfig { gradient_steps: 20, batch_size: 16, hidden: vec![8], ..Default::default() };
    let (policy, _) = train_td3bc(&data, &cfg, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.glwt");
    policy.save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { glucolab_policy_load(c_path.as_ptr(), &mut handle) }, GlucolabStatus::Ok);
    let x: Vec<f64> = (0..12).map(|i| 100.0 + i as f64).collect();
    let mut a = 0.0;
    assert_eq!(unsafe { glucolab_policy_act(handle, x.as_ptr(), 12, &mut a) }, GlucolabStatus::Ok);
    assert_eq!(a, policy.act(&x).unwrap());
    assert_eq!(unsafe { glucolab_policy_act(handle, x.as_ptr(), 3, &mut a) }, GlucolabStatus::InvalidArgument);
    unsafe { glucolab_policy_free(handle) };

    std::fs::write(&path, b"not a policy").unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { glucolab_policy_load(c_path.as_ptr(), &mut handle) }, GlucolabStatus::Io);
    assert!(handle.is_null());
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(glucolab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

/// The generated header compiles as C and a C program links against the
/// static library.
#[test]
fn c_program_links_against_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "glucolab.h"
int main(void) {
    double r = 0.0;
    if (glucolab_magni_risk(50.0, &r) != GLUCOLAB_STATUS_OK) return 1;
    GlucolabEnv *env = NULL;
    if (glucolab_env_new("child#002", 1, 0, 0.05, &env) != GLUCOLAB_STATUS_OK) return 2;
    double f[GLUCOLAB_FEATURE_DIM];
    double reward = 0.0;
    bool done = false;
    int steps = 0;
    while (!done) {
        if (glucolab_env_step(env, 0.0, f, &reward, &done) != GLUCOLAB_STATUS_OK) return 3;
        steps++;
    }
    glucolab_env_free(env);
    if (glucolab_env_new("nobody", 1, 0, 1.0, &env) != GLUCOLAB_STATUS_INVALID_ARGUMENT) return 4;
    char msg[128];
    glucolab_last_error_message(msg, sizeof msg);
    printf("%.4f %d %s\n", r, steps, msg);
    return 0;
}
"#,
    )
    .unwrap();
    // target/<profile>/deps/ffi-hash -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    assert!(lib_dir.join("libglucolab_ffi.a").exists(), "static library missing in {}", lib_dir.display());
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_dir())
        .arg(lib_dir.join("libglucolab_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let want = format!("{:.4} 24 ", glucolab::env::magni_risk(50.0).unwrap());
    assert!(text.starts_with(&want), "{text}");
    assert!(text.contains("nobody"), "{text}");
}
