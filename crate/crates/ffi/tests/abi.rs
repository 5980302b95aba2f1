use std::ffi::{CStr, CString};
use std::ptr;

use dialogue_forge_ffi::*;

fn last_error() -> String {
    let p = df_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn act_round_trip() {
    unsafe {
        let mut act = ptr::null_mut();
        let text = c("Inform-Hotel-Area-north side");
        assert_eq!(df_act_parse(text.as_ptr(), &mut act), DfStatus::Ok);
        assert!(df_last_error().is_null());
        let mut out = ptr::null_mut();
        assert_eq!(df_act_format(act, &mut out), DfStatus::Ok);
        assert_eq!(CStr::from_ptr(out).to_str().unwrap(), "Inform-Hotel-Area-north side");
        df_string_free(out);
        df_act_free(act);
    }
}

#[test]
fn bad_act_sets_last_error() {
    unsafe {
        let mut act = ptr::null_mut();
        let text = c("Shout-Hotel-Area-north");
        assert_eq!(df_act_parse(text.as_ptr(), &mut act), DfStatus::InvalidArgument);
        assert!(act.is_null());
        assert!(last_error().contains("Shout"));
        assert_eq!(df_act_parse(ptr::null(), &mut act), DfStatus::NullArgument);
        assert!(last_error().contains("text"));
        let bytes = [0xffu8, 0];
        assert_eq!(df_act_parse(bytes.as_ptr().cast(), &mut act), DfStatus::InvalidUtf8);
    }
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = c(dir.path().join("corpus.jsonl").to_str().unwrap());
    let html = dir.path().join("report.html");
    let html_c = c(html.to_str().unwrap());
    unsafe {
        let mut pack = ptr::null_mut();
        assert_eq!(df_pack_bundled(&mut pack), DfStatus::Ok);
        let mut summary = DfSummary::default();
        assert_eq!(df_simulate(pack, ptr::null(), 40, 7, corpus.as_ptr(), &mut summary), DfStatus::Ok);
        assert_eq!(summary.episodes, 40);
        assert_eq!(summary.success_rate, 1.0);
        assert_eq!(summary.inform_f1, 1.0);

        let mut json = ptr::null_mut();
        assert_eq!(df_analyze(pack, corpus.as_ptr(), html_c.as_ptr(), &mut json), DfStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(report["episode_count"], 40);
        df_string_free(json);
        assert!(std::fs::read_to_string(&html).unwrap().contains("Overall results"));
        df_pack_free(pack);
    }
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = c(dir.path().join("corpus.jsonl").to_str().unwrap());
    unsafe {
        let mut pack = ptr::null_mut();
        assert_eq!(df_pack_bundled(&mut pack), DfStatus::Ok);
        let config = c(r#"{"max_turns": 0}"#);
        assert_eq!(
            df_simulate(pack, config.as_ptr(), 5, 0, corpus.as_ptr(), ptr::null_mut()),
            DfStatus::InvalidArgument
        );
        assert!(last_error().contains("max_turns"));
        let missing = c("/no/such/dir/corpus.jsonl");
        assert_eq!(df_simulate(pack, ptr::null(), 1, 0, missing.as_ptr(), ptr::null_mut()), DfStatus::Io);
        let mut json = ptr::null_mut();
        assert_eq!(df_analyze(pack, missing.as_ptr(), ptr::null(), &mut json), DfStatus::Io);
        assert!(json.is_null());
        df_pack_free(pack);
    }
}

#[test]
fn missing_pack_dir_is_reported() {
    unsafe {
        let mut pack = ptr::null_mut();
        let dir = c("/no/such/pack");
        assert_eq!(df_pack_load(dir.as_ptr(), &mut pack), DfStatus::InvalidArgument);
        assert!(last_error().contains("/no/such/pack"));
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dialogue_forge.h")).unwrap();
    for name in [
        "df_last_error",
        "df_string_free",
        "df_act_parse",
        "df_act_format",
        "df_act_free",
        "df_pack_bundled",
        "df_pack_load",
        "df_pack_free",
        "df_simulate",
        "df_analyze",
        "DF_STATUS_PANIC = 6",
        "typedef struct DfAct DfAct;",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"dialogue_forge.h\"\nint main(void) { DfAct *a = 0; return df_act_parse(\"Bye-none-none-none\", &a) == DF_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|cc| std::process::Command::new(cc).arg("--version").output().is_ok())
        .ok_or(())
}
