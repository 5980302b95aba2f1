//! C ABI over dialogue-forge: act parsing and formatting, batch simulation
//! to a corpus file, and corpus analysis.
//!
//! Every function returns a [`DfStatus`]; on failure the message is
//! available from [`df_last_error`] on the same thread. Strings handed out
//! by the library must be released with [`df_string_free`], handles with
//! their own `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use dialogue_forge::analyzer::{self, AnalysisConfig};
use dialogue_forge::session::{read_corpus, run_episodes, write_corpus, SimulationConfig};
use dialogue_forge::{DialogueAct, DomainPack};
use thiserror::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Runtime = 5,
    Panic = 6,
}

/// Parsed dialogue act.
pub struct DfAct(DialogueAct);

/// Loaded domain pack.
pub struct DfPack(Arc<DomainPack>);

/// Overall scores of a simulation run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DfSummary {
    pub episodes: u64,
    pub success_rate: f64,
    pub inform_f1: f64,
    pub avg_turns: f64,
}

#[derive(Debug, Error)]
enum FfiError {
    #[error("argument {0} is null")]
    Null(&'static str),
    #[error("argument {0} is not valid UTF-8")]
    Utf8(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl FfiError {
    fn status(&self) -> DfStatus {
        match self {
            FfiError::Null(_) => DfStatus::NullArgument,
            FfiError::Utf8(_) => DfStatus::InvalidUtf8,
            FfiError::Invalid(_) => DfStatus::InvalidArgument,
            FfiError::Io(_) => DfStatus::Io,
            FfiError::Runtime(_) => DfStatus::Runtime,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording its error or panic.
fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            DfStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            e.status()
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            DfStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &'static str) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(FfiError::Null(name));
    }
    out.write(value);
    Ok(())
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn df_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn df_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `Intent-Domain-Slot-Value`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_act_parse(text: *const c_char, out: *mut *mut DfAct) -> DfStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let act: DialogueAct = text.parse().map_err(|e: dialogue_forge::ActError| FfiError::Invalid(e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(DfAct(act))), "out")
    })
}

/// Formats an act back to its canonical string.
///
/// # Safety
/// `act` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_act_format(act: *const DfAct, out: *mut *mut c_char) -> DfStatus {
    guard(|| {
        let act = act.as_ref().ok_or(FfiError::Null("act"))?;
        write_out(out, to_c(act.0.to_string()), "out")
    })
}

/// # Safety
/// `act` must come from [`df_act_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn df_act_free(act: *mut DfAct) {
    if !act.is_null() {
        drop(Box::from_raw(act));
    }
}

/// The pack compiled into the library.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_pack_bundled(out: *mut *mut DfPack) -> DfStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(DfPack(DomainPack::bundled().shared()))), "out"))
}

/// Loads a pack directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_pack_load(dir: *const c_char, out: *mut *mut DfPack) -> DfStatus {
    guard(|| {
        let dir = read_str(dir, "dir")?;
        let pack = DomainPack::load(dir).map_err(|e| FfiError::Invalid(format!("pack {dir}: {e}")))?;
        write_out(out, Box::into_raw(Box::new(DfPack(Arc::new(pack)))), "out")
    })
}

/// # Safety
/// `pack` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn df_pack_free(pack: *mut DfPack) {
    if !pack.is_null() {
        drop(Box::from_raw(pack));
    }
}

/// Simulates `episodes` dialogues (seeds `base_seed`, `base_seed + 1`, ...)
/// and writes them as JSON lines to `corpus_path`. `config_json` is a
/// simulation config document, or NULL for defaults. `summary` may be NULL.
///
/// # Safety
/// Pointers must be valid as documented; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn df_simulate(
    pack: *const DfPack,
    config_json: *const c_char,
    episodes: u64,
    base_seed: u64,
    corpus_path: *const c_char,
    summary: *mut DfSummary,
) -> DfStatus {
    guard(|| {
        let pack = pack.as_ref().ok_or(FfiError::Null("pack"))?;
        let config: SimulationConfig = if config_json.is_null() {
            SimulationConfig::default()
        } else {
            serde_json::from_str(read_str(config_json, "config_json")?)
                .map_err(|e| FfiError::Invalid(format!("config_json: {e}")))?
        };
        let path = PathBuf::from(read_str(corpus_path, "corpus_path")?);
        let episodes = usize::try_from(episodes).map_err(|_| FfiError::Invalid("episodes: too large".into()))?;
        let corpus = run_episodes(pack.0.clone(), &config, episodes, base_seed, 1)
            .map_err(|e| FfiError::Invalid(e.to_string()))?;
        write_corpus(&path, &corpus).map_err(|e| FfiError::Io(e.to_string()))?;
        if let Some(summary) = summary.as_mut() {
            let report = analyzer::analyze(&corpus, &pack.0.database, &AnalysisConfig::default())
                .map_err(|e| FfiError::Runtime(e.to_string()))?;
            *summary = DfSummary {
                episodes: report.episode_count,
                success_rate: report.overall.success_rate,
                inform_f1: report.overall.inform_f1,
                avg_turns: report.overall.avg_turns,
            };
        }
        Ok(())
    })
}

/// Analyzes a corpus file. The JSON report goes to `report_json` (free with
/// [`df_string_free`]); when `html_path` is not NULL the HTML report is
/// written there too.
///
/// # Safety
/// Pointers must be valid as documented; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn df_analyze(
    pack: *const DfPack,
    corpus_path: *const c_char,
    html_path: *const c_char,
    report_json: *mut *mut c_char,
) -> DfStatus {
    guard(|| {
        let pack = pack.as_ref().ok_or(FfiError::Null("pack"))?;
        if report_json.is_null() {
            return Err(FfiError::Null("report_json"));
        }
        let corpus_path = read_str(corpus_path, "corpus_path")?;
        let html_path = if html_path.is_null() {
            None
        } else {
            Some(read_str(html_path, "html_path")?)
        };
        let corpus = read_corpus(corpus_path).map_err(|e| match e {
            dialogue_forge::session::CorpusError::Io { .. } => FfiError::Io(e.to_string()),
            _ => FfiError::Invalid(e.to_string()),
        })?;
        let report = analyzer::analyze(&corpus, &pack.0.database, &AnalysisConfig::default())
            .map_err(|e| FfiError::Invalid(e.to_string()))?;
        if let Some(path) = html_path {
            std::fs::write(path, analyzer::render_report(&report)).map_err(|e| FfiError::Io(format!("{path}: {e}")))?;
        }
        let json = serde_json::to_string(&report).map_err(|e| FfiError::Runtime(e.to_string()))?;
        write_out(report_json, to_c(json), "report_json")
    })
}
