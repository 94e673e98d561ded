use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;
use std::ptr;

use cohort_trends::inference::{logistic_mle, LogisticOptions};
use cohort_trends::synth::{emit_truth, generate_cohort, SynthSpec};
use cohort_trends_ffi::*;

fn last_error() -> String {
    let p = ct_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { ct_string_free(p) };
    s
}

fn owned(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { ct_string_free(p) };
    s
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ct_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn pearson_and_null_pointers() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 4.1, 5.9, 8.2, 9.9];
    let (mut r, mut p) = (0.0, 0.0);
    let s = unsafe { ct_pearson(x.as_ptr(), y.as_ptr(), 5, &mut r, &mut p) };
    assert_eq!(s, CtStatus::Ok);
    assert!(r > 0.99 && p < 0.01);
    assert!(ct_last_error_message().is_null());

    let s = unsafe { ct_pearson(ptr::null(), y.as_ptr(), 5, &mut r, &mut p) };
    assert_eq!(s, CtStatus::NullPointer);
    assert!(last_error().contains("null"));

    let flat = [3.0; 5];
    let s = unsafe { ct_pearson(flat.as_ptr(), y.as_ptr(), 5, &mut r, &mut p) };
    assert_ne!(s, CtStatus::Ok);
}

#[test]
fn deviation_scores_are_standardized() {
    let raw: Vec<f64> = (0..40).map(|i| (i * i % 17) as f64 / 17.0).collect();
    let mut out = vec![0.0; raw.len()];
    assert_eq!(unsafe { ct_deviation_scores(raw.as_ptr(), raw.len(), out.as_mut_ptr()) }, CtStatus::Ok);
    let n = out.len() as f64;
    let mean = out.iter().sum::<f64>() / n;
    let sd = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((mean - 50.0).abs() < 1e-9 && (sd - 10.0).abs() < 1e-9);

    let flat = [0.5; 10];
    let s = unsafe { ct_deviation_scores(flat.as_ptr(), 10, out.as_mut_ptr()) };
    assert_eq!(s, CtStatus::Numerical);
}

#[test]
fn vif_of_orthogonal_columns() {
    let data = [
        1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, // column 1
        1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, // column 2
    ];
    let mut out = [0.0; 2];
    assert_eq!(unsafe { ct_vif(data.as_ptr(), 8, 2, out.as_mut_ptr()) }, CtStatus::Ok);
    assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn screening_drops_the_incoherent_test() {
    let upper = [0.84, 0.23, 0.91, 0.88, 0.50, 0.92, 0.81, 0.23, 0.58, 0.83];
    let mut kept = [9u8; 5];
    let s = unsafe { ct_screen_upper(upper.as_ptr(), 5, 100, 0.70, 3, kept.as_mut_ptr()) };
    assert_eq!(s, CtStatus::Ok);
    assert_eq!(kept, [1, 1, 0, 1, 1]);

    let s = unsafe { ct_screen_upper(upper.as_ptr(), 5, 100, 0.99, 3, kept.as_mut_ptr()) };
    assert_eq!(s, CtStatus::Validation);
    assert!(!last_error().is_empty());
}

#[test]
fn kmeans_separates_two_blobs() {
    let data = [0.0, 0.0, 0.1, 0.2, 0.2, 0.1, 10.0, 10.0, 10.1, 9.9, 9.8, 10.2];
    let mut assignment = [0usize; 6];
    let mut inertia = 0.0;
    let s = unsafe { ct_kmeans(data.as_ptr(), 6, 2, 2, 7, 3, assignment.as_mut_ptr(), &mut inertia) };
    assert_eq!(s, CtStatus::Ok);
    assert!(assignment[..3].iter().all(|&a| a == assignment[0]));
    assert!(assignment[3..].iter().all(|&a| a == assignment[3]));
    assert_ne!(assignment[0], assignment[3]);
    assert!(inertia < 1.0);

    let s = unsafe { ct_kmeans(data.as_ptr(), 6, 2, 0, 7, 3, assignment.as_mut_ptr(), &mut inertia) };
    assert_eq!(s, CtStatus::Input);
}

#[test]
fn logistic_fit_matches_library() {
    let a: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 5.0 - 1.0).collect();
    let b: Vec<f64> = (0..30).map(|i| (i % 2) as f64).collect();
    let y: Vec<f64> = (0..30).map(|i| ((i * 13 + 5) % 7 < 3 + (i % 3)) as u8 as f64).collect();
    let x: Vec<f64> = a.iter().chain(&b).copied().collect();
    let (mut coef, mut se, mut pv) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    let s = unsafe { ct_logistic_fit(x.as_ptr(), y.as_ptr(), 30, 2, 0.0, coef.as_mut_ptr(), se.as_mut_ptr(), pv.as_mut_ptr()) };
    assert_eq!(s, CtStatus::Ok, "{}", last_error());
    let fit = logistic_mle(&[a, b], &y, &["a".into(), "b".into()], &LogisticOptions::default()).unwrap();
    assert_eq!(coef[0], fit.intercept.estimate);
    assert_eq!(&coef[1..], fit.coef.as_slice());
    assert_eq!(&se[1..], fit.se.as_slice());
    assert_eq!(&pv[1..], fit.p_wald.as_slice());
}

#[test]
fn separated_design_reports_numerical_status() {
    let x: Vec<f64> = (0..20).map(f64::from).collect();
    let y: Vec<f64> = (0..20).map(|i| (i >= 10) as u8 as f64).collect();
    let (mut coef, mut se, mut pv) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    let s = unsafe { ct_logistic_fit(x.as_ptr(), y.as_ptr(), 20, 1, 0.0, coef.as_mut_ptr(), se.as_mut_ptr(), pv.as_mut_ptr()) };
    assert_eq!(s, CtStatus::Numerical);
    assert!(last_error().contains("separation"));
}

#[test]
fn panel_handle_round_trip() {
    let cohort = generate_cohort(&SynthSpec { n_students: 25, n_tests: 3, items_per_test: 8, seed: 2, ..Default::default() }).unwrap();
    let score = CString::new(cohort.score_csv.clone()).unwrap();
    let manifest = CString::new(cohort.manifest_csv.clone()).unwrap();
    let subject = CString::new("mathematics").unwrap();
    let mut panel: *mut CtPanel = ptr::null_mut();
    let s = unsafe { ct_panel_parse(score.as_ptr(), manifest.as_ptr(), subject.as_ptr(), &mut panel) };
    assert_eq!(s, CtStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!(ct_panel_n_students(panel), 25);
        assert_eq!(ct_panel_n_tests(panel), 3);
        assert_eq!(owned(ct_panel_test_id(panel, 0)), cohort.panel.tests[0].test_id);
        assert_eq!(owned(ct_panel_student_id(panel, 24)), cohort.panel.students[24]);
        assert!(ct_panel_test_id(panel, 3).is_null());
        let mut ratios = vec![0.0; 25];
        assert_eq!(ct_panel_correct_ratios(panel, 1, ratios.as_mut_ptr()), CtStatus::Ok);
        let t = &cohort.panel.tests[1].test_id;
        let want: Vec<f64> = cohort.panel.students.iter().map(|st| cohort.panel.aggregate[&(st.clone(), t.clone())].correct_ratio).collect();
        assert_eq!(ratios, want);
        ct_panel_free(panel);
        ct_panel_free(ptr::null_mut());
    }

    let bad = CString::new("cohort_id,student_id\n").unwrap();
    let s = unsafe { ct_panel_parse(bad.as_ptr(), manifest.as_ptr(), subject.as_ptr(), &mut panel) };
    assert_eq!(s, CtStatus::Input);

    let invalid = [0xffu8, 0xfe, 0];
    let s = unsafe { ct_panel_parse(invalid.as_ptr().cast(), manifest.as_ptr(), subject.as_ptr(), &mut panel) };
    assert_eq!(s, CtStatus::InvalidUtf8);
}

#[test]
fn run_all_through_the_c_abi() {
    let tmp = tempfile::tempdir().unwrap();
    for seed in [41u64, 42] {
        let spec = SynthSpec { cohort_id: format!("g{}", seed - 40), n_students: 200, seed, ..Default::default() };
        let cohort = generate_cohort(&spec).unwrap();
        emit_truth(&cohort, &tmp.path().join(&spec.cohort_id)).unwrap();
    }
    let config = r#"{
  "cohorts": [
    {"id": "g1", "scores": "g1/score.csv", "manifest": "g1/manifest.csv"},
    {"id": "g2", "scores": "g2/score.csv", "manifest": "g2/manifest.csv"}
  ],
  "subject": "mathematics",
  "clustering": {"seed": 5, "restarts": 3}
}"#;
    let cfg = tmp.path().join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let cfg_c = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = tmp.path().join("reports");
    let out_c = CString::new(out.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ct_run_all(cfg_c.as_ptr(), out_c.as_ptr()) }, CtStatus::Ok, "{}", last_error());
    assert!(out.join("run_manifest.json").is_file());
    assert!(out.join("g2/clusters.csv").is_file());

    let missing = CString::new(tmp.path().join("none.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ct_run_all(missing.as_ptr(), ptr::null()) }, CtStatus::Input);
}

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cohort_trends.h")).unwrap()
}

#[test]
fn header_declares_every_export() {
    let h = header();
    for f in [
        "ct_version",
        "ct_last_error_message",
        "ct_string_free",
        "ct_panel_parse",
        "ct_panel_free",
        "ct_panel_n_students",
        "ct_panel_n_tests",
        "ct_panel_test_id",
        "ct_panel_student_id",
        "ct_panel_correct_ratios",
        "ct_pearson",
        "ct_deviation_scores",
        "ct_vif",
        "ct_screen_upper",
        "ct_kmeans",
        "ct_logistic_fit",
        "ct_run_all",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct CtPanel CtPanel;"), "panel stays opaque");
    assert!(h.contains("CT_STATUS_NUMERICAL = 2"));
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| {
        std::process::Command::new(c).arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
    }) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("check.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ CtPanel *p = NULL; ct_panel_free(p); return CT_STATUS_OK; }}\n",
            Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cohort_trends.h").display()
        ),
    )
    .unwrap();
    let out = std::process::Command::new(cc).args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
