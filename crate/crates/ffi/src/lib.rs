//! C ABI for `cohort-trends`.
//!
//! Every fallible function returns a [`CtStatus`]. On failure the message is
//! kept per thread and can be fetched with [`ct_last_error_message`]. Strings
//! returned by this library must be released with [`ct_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use cohort_trends::data_model::{parse_score_tables, parse_test_manifest, ScoreKind, ScorePanel, Subject, TestKey};
use cohort_trends::inference::{logistic_mle, LogisticOptions};
use cohort_trends::pipeline::{run_all, Overrides, Run};
use cohort_trends::screening::{screen_tests, ScreeningPolicy, TestCorrelationMatrix};
use cohort_trends::stats::{deviation_scores, pearson, vif};
use cohort_trends::trend::{kmeans_restarts, KMeansParams};
use cohort_trends::Error;

/// Result codes. Values 1 to 3 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    /// Malformed or mismatched input data.
    Input = 1,
    /// Degenerate data, separation or a singular matrix.
    Numerical = 2,
    /// Screening failure or inconsistent cohorts.
    Validation = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

/// Opaque handle to a parsed score panel.
pub struct CtPanel {
    panel: ScorePanel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> CtStatus {
    let status = match e.exit_code() {
        2 => CtStatus::Numerical,
        3 => CtStatus::Validation,
        _ => CtStatus::Input,
    };
    set_error(e.to_string());
    status
}

fn guard(f: impl FnOnce() -> Result<(), CtStatus>) -> CtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            CtStatus::Panic
        }
    }
}

fn null_error(what: &str) -> CtStatus {
    set_error(format!("null pointer: {what}"));
    CtStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CtStatus> {
    if p.is_null() {
        return Err(null_error(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CtStatus::InvalidUtf8
    })
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], CtStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_error(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], CtStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null_error(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn to_c_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy of the calling thread's last error message, or NULL when the last
/// call succeeded. Free with `ct_string_free`.
#[no_mangle]
pub extern "C" fn ct_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Release a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ct_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a long-format score CSV and a manifest CSV (both NUL-terminated
/// UTF-8) and keep the panel for `subject` (e.g. "mathematics").
#[no_mangle]
pub unsafe extern "C" fn ct_panel_parse(
    score_csv: *const c_char,
    manifest_csv: *const c_char,
    subject: *const c_char,
    out: *mut *mut CtPanel,
) -> CtStatus {
    guard(|| {
        let scores = str_arg(score_csv, "score_csv")?;
        let manifest = str_arg(manifest_csv, "manifest_csv")?;
        let subject: Subject = str_arg(subject, "subject")?.parse().map_err(fail)?;
        if out.is_null() {
            return Err(null_error("out"));
        }
        let manifest = parse_test_manifest(manifest.as_bytes()).map_err(fail)?;
        let panels = parse_score_tables(scores.as_bytes(), &manifest).map_err(fail)?;
        let panel = panels.into_iter().find(|p| p.subject == subject).ok_or_else(|| {
            fail(Error::EmptyPanel(format!("no complete {} panel", subject.as_str())))
        })?;
        *out = Box::into_raw(Box::new(CtPanel { panel }));
        Ok(())
    })
}

/// Free a panel. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ct_panel_free(panel: *mut CtPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Number of students, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ct_panel_n_students(panel: *const CtPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.panel.students.len())
}

/// Number of tests, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ct_panel_n_tests(panel: *const CtPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.panel.tests.len())
}

/// Test id at chronological position `index`, or NULL. Free with `ct_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ct_panel_test_id(panel: *const CtPanel, index: usize) -> *mut c_char {
    match panel.as_ref().and_then(|p| p.panel.tests.get(index)) {
        Some(t) => to_c_string(&t.test_id),
        None => ptr::null_mut(),
    }
}

/// Student id at sorted position `index`, or NULL. Free with `ct_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ct_panel_student_id(panel: *const CtPanel, index: usize) -> *mut c_char {
    match panel.as_ref().and_then(|p| p.panel.students.get(index)) {
        Some(s) => to_c_string(s),
        None => ptr::null_mut(),
    }
}

/// Correct-answer ratios of every student on test `test_index`, written to
/// `out` (length `ct_panel_n_students`).
#[no_mangle]
pub unsafe extern "C" fn ct_panel_correct_ratios(panel: *const CtPanel, test_index: usize, out: *mut f64) -> CtStatus {
    guard(|| {
        let p = panel.as_ref().ok_or_else(|| null_error("panel"))?;
        let test = p.panel.tests.get(test_index).ok_or_else(|| {
            fail(Error::InvalidInput(format!("test index {test_index} out of range")))
        })?;
        let scores = p.panel.scores(&test.test_id, ScoreKind::CorrectRatio).map_err(fail)?;
        out_slice(out, scores.len(), "out")?.copy_from_slice(&scores);
        Ok(())
    })
}

/// Pearson correlation with its two-sided p-value.
#[no_mangle]
pub unsafe extern "C" fn ct_pearson(x: *const f64, y: *const f64, n: usize, r: *mut f64, p: *mut f64) -> CtStatus {
    guard(|| {
        let c = pearson(slice_arg(x, n, "x")?, slice_arg(y, n, "y")?).map_err(fail)?;
        if r.is_null() || p.is_null() {
            return Err(null_error("r/p"));
        }
        *r = c.r;
        *p = c.p_two_sided;
        Ok(())
    })
}

/// Deviation scores (mean 50, SD 10) of `raw`, written to `out`.
#[no_mangle]
pub unsafe extern "C" fn ct_deviation_scores(raw: *const f64, n: usize, out: *mut f64) -> CtStatus {
    guard(|| {
        let raw = slice_arg(raw, n, "raw")?;
        let keyed = raw.iter().enumerate().map(|(i, v)| (format!("{i:020}"), *v)).collect();
        let set = deviation_scores(&keyed, false).map_err(fail)?;
        for (o, t) in out_slice(out, n, "out")?.iter_mut().zip(set.scores.values()) {
            *o = *t;
        }
        Ok(())
    })
}

/// VIFs of the `p` columns of a column-major `n × p` matrix.
#[no_mangle]
pub unsafe extern "C" fn ct_vif(data: *const f64, n: usize, p: usize, out: *mut f64) -> CtStatus {
    guard(|| {
        let data = slice_arg(data, n * p, "data")?;
        let cols: Vec<Vec<f64>> = data.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let v = vif(&cols).map_err(fail)?;
        out_slice(out, p, "out")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Screen a chain of `m` tests given its upper-triangle correlations
/// (row-major, `m(m-1)/2` values). `retained` receives 1/0 per test.
#[no_mangle]
pub unsafe extern "C" fn ct_screen_upper(
    upper: *const f64,
    m: usize,
    n_students: usize,
    theta_low: f64,
    min_chain: usize,
    retained: *mut u8,
) -> CtStatus {
    guard(|| {
        let upper = slice_arg(upper, m * m.saturating_sub(1) / 2, "upper")?;
        let tests: Vec<TestKey> = (0..m)
            .map(|i| TestKey {
                test_id: format!("T{}", i + 1),
                organization: "X".into(),
                subject: Subject::Other("unspecified".into()),
                grade: 1 + i as u32,
                variant: None,
                year: i as i32,
                order_index: i as u32,
            })
            .collect();
        let policy = ScreeningPolicy { theta_low, min_chain, ..Default::default() };
        policy.validate().map_err(fail)?;
        let matrix = TestCorrelationMatrix::from_upper(tests.clone(), upper, n_students).map_err(fail)?;
        let outcome = screen_tests(&matrix, &policy).map_err(fail)?;
        for (flag, t) in out_slice(retained, m, "retained")?.iter_mut().zip(&tests) {
            *flag = outcome.retained.iter().any(|r| r.test_id == t.test_id) as u8;
        }
        Ok(())
    })
}

/// k-means on `n` row-major points of dimension `dim`, best of `restarts`
/// seeds starting at `seed`.
#[no_mangle]
pub unsafe extern "C" fn ct_kmeans(
    data: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    seed: u64,
    restarts: usize,
    assignment: *mut usize,
    inertia: *mut f64,
) -> CtStatus {
    guard(|| {
        if dim == 0 {
            return Err(fail(Error::InvalidInput("dimension must be positive".into())));
        }
        let rows: Vec<Vec<f64>> = slice_arg(data, n * dim, "data")?.chunks(dim).map(<[f64]>::to_vec).collect();
        let fit = kmeans_restarts(&rows, &KMeansParams::new(k, seed), restarts).map_err(fail)?;
        out_slice(assignment, n, "assignment")?.copy_from_slice(&fit.assignment);
        if inertia.is_null() {
            return Err(null_error("inertia"));
        }
        *inertia = fit.inertia;
        Ok(())
    })
}

/// Logistic regression with intercept on a column-major `n × p` design.
/// `coef`, `se` and `pval` each receive `p + 1` values, intercept first.
#[no_mangle]
pub unsafe extern "C" fn ct_logistic_fit(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    ridge: f64,
    coef: *mut f64,
    se: *mut f64,
    pval: *mut f64,
) -> CtStatus {
    guard(|| {
        let x = slice_arg(x, n * p, "x")?;
        let y = slice_arg(y, n, "y")?;
        let cols: Vec<Vec<f64>> = if p == 0 { Vec::new() } else { x.chunks(n.max(1)).map(<[f64]>::to_vec).collect() };
        let names: Vec<String> = (0..p).map(|j| format!("x{}", j + 1)).collect();
        let fit = logistic_mle(&cols, y, &names, &LogisticOptions { ridge, ..Default::default() }).map_err(fail)?;
        let coef = out_slice(coef, p + 1, "coef")?;
        let se = out_slice(se, p + 1, "se")?;
        let pval = out_slice(pval, p + 1, "pval")?;
        coef[0] = fit.intercept.estimate;
        se[0] = fit.intercept.se;
        pval[0] = fit.intercept.p;
        coef[1..].copy_from_slice(&fit.coef);
        se[1..].copy_from_slice(&fit.se);
        pval[1..].copy_from_slice(&fit.p_wald);
        Ok(())
    })
}

/// Run every pipeline stage for a JSON config file. `out_dir` may be NULL to
/// use the config's output directory.
#[no_mangle]
pub unsafe extern "C" fn ct_run_all(config_path: *const c_char, out_dir: *const c_char) -> CtStatus {
    guard(|| {
        let config = str_arg(config_path, "config_path")?;
        let out = if out_dir.is_null() { None } else { Some(PathBuf::from(str_arg(out_dir, "out_dir")?)) };
        let run = Run::load(config.as_ref(), Overrides { out, ..Default::default() }).map_err(fail)?;
        run_all(&run).map_err(fail)?;
        Ok(())
    })
}
