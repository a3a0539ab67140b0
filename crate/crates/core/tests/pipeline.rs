use std::fs;
use std::path::{Path, PathBuf};

use menucsi_core::config::RunConfig;
use menucsi_core::corpus::{load_corpus, save_corpus, MenuEntry, TranslationRecord, TranslationStatus};
use menucsi_core::exec::Exec;
use menucsi_core::pipeline::{Pipeline, PipelineError, RunOptions, ScoreSource};
use sha2::{Digest, Sha256};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config(name: &str) -> RunConfig {
    RunConfig::load(&fixtures().join(name)).unwrap()
}

fn digest_dir(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), hex::encode(Sha256::digest(fs::read(&p).unwrap())))
        })
        .collect();
    out.sort();
    out
}

fn assert_same_file(a: &Path, b: &Path) {
    let (x, y) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert!(x == y, "{} differs from {}", a.display(), b.display());
}

fn offline_run(out: &Path, exec: Exec) -> u64 {
    let mut cfg = config("run.toml");
    cfg.mode.offline = true;
    cfg.paths.output_dir = Some(out.to_path_buf());
    let p = Pipeline::new(cfg, RunOptions { exec, keep_going: false });
    p.identify().unwrap();
    p.retrieve().unwrap();
    p.prompt().unwrap();
    let t = p.translate().unwrap();
    assert_eq!((t.total, t.errors), (1440, 0));
    p.evaluate(ScoreSource::File).unwrap();
    p.network_calls()
}

#[test]
fn offline_run_reproduces_golden_files_in_both_exec_modes() {
    let caches = digest_dir(&fixtures().join("cache"));
    let golden = fixtures().join("golden");
    for exec in [Exec::Parallel, Exec::Sequential] {
        let out = tempfile::tempdir().unwrap();
        assert_eq!(offline_run(out.path(), exec), 0, "offline run touched the network");
        for f in ["predictions.jsonl", "translations.jsonl", "report.csv"] {
            assert_same_file(&out.path().join(f), &golden.join(f));
        }
    }
    assert_eq!(digest_dir(&fixtures().join("cache")), caches, "offline runs must not write the caches");
}

#[test]
fn ocr_page_composes_through_every_stage() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config("ocr_run.toml");
    cfg.mode.offline = true;
    cfg.paths.output_dir = Some(out.path().to_path_buf());
    cfg.paths.entries = Some(out.path().join("entries.jsonl"));
    let p = Pipeline::new(cfg, RunOptions::default());
    let s = p.ingest(&fixtures().join("ocr/page.json")).unwrap();
    assert_eq!(s.entries, 20);
    assert_same_file(&out.path().join("entries.jsonl"), &fixtures().join("golden/ocr_entries.jsonl"));
    p.identify().unwrap();
    p.retrieve().unwrap();
    let t = p.translate().unwrap();
    assert_eq!(t.total, 60);
    let e = p.evaluate(ScoreSource::File).unwrap();
    assert!(e.scores.is_none());
    assert_same_file(&out.path().join("report.csv"), &fixtures().join("golden/ocr_report.csv"));
    assert_eq!(p.network_calls(), 0);
}

/// Three entries, a cache that only answers for the first one.
fn partial_setup(dir: &Path) -> RunConfig {
    let all: Vec<MenuEntry> = load_corpus(fixtures().join("corpus/entries.jsonl")).unwrap();
    let entries = &all[..3];
    save_corpus(entries, dir.join("entries.jsonl")).unwrap();
    let cache = dir.join("cache");
    fs::create_dir_all(&cache).unwrap();
    for f in fs::read_dir(fixtures().join("cache")).unwrap() {
        let f = f.unwrap().path();
        let name = f.file_name().unwrap().to_owned();
        let text = fs::read_to_string(&f).unwrap();
        let kept: String = if name == "chat-gpt35.jsonl" {
            text.lines()
                .filter(|l| l.contains(&entries[0].zh_text))
                .map(|l| format!("{l}\n"))
                .collect()
        } else {
            text
        };
        fs::write(cache.join(name), kept).unwrap();
    }
    let mut cfg = config("run.toml");
    cfg.paths.entries = Some(dir.join("entries.jsonl"));
    cfg.paths.cache_dir = Some(cache);
    cfg.paths.output_dir = Some(dir.join("out"));
    cfg.mode.cache_only = true;
    let p = Pipeline::new(cfg.clone(), RunOptions::default());
    p.identify().unwrap();
    p.retrieve().unwrap();
    cfg
}

fn records(cfg: &RunConfig) -> Vec<TranslationRecord> {
    load_corpus(cfg.output_dir().join("translations.jsonl")).unwrap()
}

#[test]
fn translate_failure_writes_partial_results_then_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = partial_setup(dir.path());
    let p = Pipeline::new(cfg.clone(), RunOptions::default());
    let err = p.translate().unwrap_err();
    assert!(matches!(err, PipelineError::Backend(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    let recs = records(&cfg);
    assert_eq!(recs.len(), 3, "only the cached entry is written");
    assert!(recs.iter().all(|r| r.status == TranslationStatus::Ok));
}

#[test]
fn keep_going_records_errors_and_the_next_run_retries_them() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = partial_setup(dir.path());
    let p = Pipeline::new(cfg.clone(), RunOptions { exec: Exec::Parallel, keep_going: true });
    let s = p.translate().unwrap();
    assert_eq!((s.total, s.new, s.errors), (9, 3, 6));
    let recs = records(&cfg);
    assert_eq!(recs.iter().filter(|r| r.status == TranslationStatus::Error).count(), 6);
    // plan order: entries × strategies
    let order: Vec<(String, String)> = recs.iter().map(|r| (r.entry_id.clone(), r.strategy.to_string())).collect();
    let mut sorted = order.clone();
    sorted.sort_by_key(|(id, _)| id.clone());
    assert_eq!(order.iter().map(|o| &o.0).collect::<Vec<_>>(), sorted.iter().map(|o| &o.0).collect::<Vec<_>>());

    // online (mock) rerun fills in exactly the failed six
    cfg.mode.cache_only = false;
    let p = Pipeline::new(cfg.clone(), RunOptions::default());
    let s = p.translate().unwrap();
    assert_eq!((s.total, s.new, s.errors), (9, 6, 0));
    assert_eq!(p.network_calls(), 6);

    // and a third run has nothing left to do
    let p = Pipeline::new(cfg.clone(), RunOptions::default());
    let s = p.translate().unwrap();
    assert_eq!((s.total, s.new), (9, 0));
    assert_eq!(p.network_calls(), 0);
    assert!(records(&cfg).iter().all(|r| r.status == TranslationStatus::Ok));
}

#[test]
fn offline_without_cache_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("run.toml");
    cfg.mode.offline = true;
    cfg.paths.cache_dir = Some(dir.path().join("no-cache"));
    cfg.paths.output_dir = Some(dir.path().join("out"));
    let p = Pipeline::new(cfg, RunOptions::default());
    let err = p.identify().unwrap_err();
    assert!(matches!(err, PipelineError::OfflineWithoutCache { .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("out/predictions.jsonl").exists());
}
