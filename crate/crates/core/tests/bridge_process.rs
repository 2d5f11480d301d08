mod common;

use common::*;
use mbrforge::bridge::*;
use proptest::prelude::*;
use std::path::Path;
use std::time::{Duration, Instant};

fn config(script: &Path) -> BridgeConfig {
    BridgeConfig::new(vec![script.display().to_string()])
}

fn reqs(mts: &[&str]) -> Vec<ScoreRequest> {
    mts.iter().map(|m| ScoreRequest::new("src", *m, "ref")).collect()
}

#[test]
fn constant_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&write_script(dir.path(), "echo.sh", ECHO_SCORER));
    assert_eq!(score_batch(&reqs(&["a", "b"]), &cfg).unwrap(), vec![0.5, 0.5]);
}

#[test]
fn scores_follow_mt_token_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&write_script(dir.path(), "tok.sh", TOKEN_COUNT_SCORER));
    let got = score_batch(&reqs(&["a", "a b", "a b c"]), &cfg).unwrap();
    assert_eq!(got, vec![0.1, 0.2, 0.3]);
}

#[test]
fn unparseable_reply_is_a_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&write_script(dir.path(), "garbage.sh", GARBAGE_SCORER));
    let err = score_batch(&reqs(&["a"]), &cfg).unwrap_err();
    assert!(
        matches!(err, BridgeError::Protocol { request: 0, ref line } if line == "abc"),
        "{err}"
    );
}

#[test]
fn order_is_preserved_across_batch_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "order.sh", ORDER_SCORER);
    let expected: Vec<f64> = (0..150).map(|i| i as f64 * 0.25).collect();
    let requests: Vec<ScoreRequest> = expected
        .iter()
        .map(|v| ScoreRequest::new("s", v.to_string(), "r"))
        .collect();
    for batch in [1, 7, 64] {
        let mut cfg = config(&script);
        cfg.batch_size = batch;
        let mut bridge = Bridge::new(cfg).unwrap();
        assert_eq!(bridge.score(&requests).unwrap(), expected, "batch {batch}");
        // the process is reused for a second call
        assert_eq!(bridge.score(&requests[..3]).unwrap(), expected[..3]);
    }
}

#[test]
fn awkward_characters_keep_three_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&write_script(dir.path(), "fields.sh", FIELD_COUNT_SCORER));
    let requests = vec![
        ScoreRequest::new("a\tb", "c\nd", "e\\f"),
        ScoreRequest::new("", "x", ""),
        ScoreRequest::new("\\t literally", "tab\there", "\r\n"),
    ];
    assert_eq!(score_batch(&requests, &cfg).unwrap(), vec![3.0; 3]);
}

#[test]
fn empty_mt_is_rejected_before_spawning() {
    let cfg = BridgeConfig::new(vec!["/nonexistent/scorer".into()]);
    let err = score_batch(&reqs(&["a", ""]), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::InvalidRequest { request: 1, .. }));
    let err = score_batch(&reqs(&["a"]), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::Spawn { .. }));
}

#[test]
fn invalid_configs() {
    assert!(Bridge::new(BridgeConfig::new(vec![])).is_err());
    let mut cfg = BridgeConfig::new(vec!["true".into()]);
    cfg.batch_size = 0;
    assert!(Bridge::new(cfg.clone()).is_err());
    cfg.batch_size = MAX_BATCH_SIZE + 1;
    assert!(Bridge::new(cfg.clone()).is_err());
    cfg.batch_size = 1;
    cfg.timeout = Duration::ZERO;
    assert!(Bridge::new(cfg).is_err());
    let cfg = BridgeConfig::from_command_line("python3 -m 'my scorer' --x").unwrap();
    assert_eq!(cfg.command, ["python3", "-m", "my scorer", "--x"]);
    assert!(BridgeConfig::from_command_line("'unterminated").is_err());
}

const ANSWER_ONE_THEN_DIE: &str = r#"IFS= read -r line; echo 1; IFS= read -r line; exit 7"#;

#[test]
fn crash_without_restart_reports_pending_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&write_script(dir.path(), "die.sh", ANSWER_ONE_THEN_DIE));
    let err = score_batch(&reqs(&["a", "b", "c"]), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::Crash { pending: 1, .. }), "{err}");
}

#[test]
fn crash_once_is_recovered_by_replay() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("crashed");
    let body = format!(
        "if [ ! -e '{m}' ]; then touch '{m}'; IFS= read -r line; echo 1; exit 9; fi\n{ORDER_SCORER}",
        m = marker.display()
    );
    let mut cfg = config(&write_script(dir.path(), "flaky.sh", &body));
    cfg.restart_on_failure = true;
    let got = score_batch(&reqs(&["1", "2", "3", "4"]), &cfg).unwrap();
    assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0]);
    assert!(marker.exists());
}

#[test]
fn second_crash_in_a_batch_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&write_script(dir.path(), "die.sh", ANSWER_ONE_THEN_DIE));
    cfg.restart_on_failure = true;
    let err = score_batch(&reqs(&["a", "b", "c"]), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::Crash { pending: 2, .. }), "{err}");
}

#[test]
fn silent_scorer_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&write_script(dir.path(), "slow.sh", "exec sleep 30"));
    cfg.timeout = Duration::from_millis(300);
    let start = Instant::now();
    let err = score_batch(&reqs(&["a"]), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::Timeout { pending: 0, .. }), "{err}");
    assert!(start.elapsed() < Duration::from_secs(10));
}

proptest! {
    #[test]
    fn codec_round_trips(src in ".*", mt in ".+", reference in ".*") {
        let r = ScoreRequest::new(src, mt, reference);
        let line = encode_request(&r);
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(line.matches('\t').count(), 2);
        prop_assert_eq!(decode_request(&line).unwrap(), r);
    }

    #[test]
    fn escaping_is_injective(a in "[a\\\\\t\nt]{0,8}", b in "[a\\\\\t\nt]{0,8}") {
        prop_assume!(a != b);
        prop_assert_ne!(escape_field(&a), escape_field(&b));
    }
}
