use std::time::Duration;

use dirguide::oracle::{HttpOracle, Oracle, OracleClient, OracleConfig, OracleError, OracleRequest, RequestHints};
use dirguide_testkit::{write_image, StubReply, StubServer};

fn config(url: &str) -> OracleConfig {
    OracleConfig {
        endpoint_url: Some(url.to_string()),
        model_name: Some("stub-model".into()),
        api_key_env: None,
        max_concurrency: 6,
        max_retries: 3,
        timeout: Duration::from_secs(5),
        backoff_base: Duration::from_millis(2),
        backoff_cap: Duration::from_millis(10),
        ..OracleConfig::default()
    }
}

fn image() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.png");
    write_image(&path, 8, 8);
    (dir, path)
}

fn ask(oracle: &HttpOracle, img: &std::path::Path, prompt: &str) -> Result<String, OracleError> {
    oracle.answer(&OracleRequest::new(img, prompt))
}

#[test]
fn answers_and_echoes_prompt() {
    let server = StubServer::start(|r| StubReply::Ok(format!("echo: {}", r.prompt)));
    let (_d, img) = image();
    let oracle = HttpOracle::new(&config(&server.url)).unwrap();
    assert_eq!(ask(&oracle, &img, "hello").unwrap(), "echo: hello");
    assert_eq!(server.hits(), 1);
}

#[test]
fn transient_failures_are_retried() {
    let server = StubServer::start(|r| match r.attempt {
        0 => StubReply::Status(503, "busy".into()),
        1 => StubReply::Drop,
        2 => StubReply::Status(429, "slow down".into()),
        _ => StubReply::Ok("finally".into()),
    });
    let (_d, img) = image();
    let oracle = HttpOracle::new(&config(&server.url)).unwrap();
    assert_eq!(ask(&oracle, &img, "q").unwrap(), "finally");
    assert_eq!(server.hits(), 4);
}

#[test]
fn retries_are_bounded() {
    let server = StubServer::start(|_| StubReply::Status(500, "down".into()));
    let (_d, img) = image();
    let oracle = HttpOracle::new(&config(&server.url)).unwrap();
    match ask(&oracle, &img, "q") {
        Err(OracleError::Transport { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("{other:?}"),
    }
    assert_eq!(server.hits(), 4);
}

#[test]
fn client_errors_are_fatal() {
    let server = StubServer::start(|_| StubReply::Status(400, "bad request".into()));
    let (_d, img) = image();
    let oracle = HttpOracle::new(&config(&server.url)).unwrap();
    assert!(matches!(ask(&oracle, &img, "q"), Err(OracleError::Status { code: 400, .. })));
    assert_eq!(server.hits(), 1);
}

#[test]
fn empty_content_is_a_refusal() {
    let server = StubServer::start(|_| StubReply::Ok("   ".into()));
    let (_d, img) = image();
    let oracle = HttpOracle::new(&config(&server.url)).unwrap();
    assert_eq!(ask(&oracle, &img, "q"), Err(OracleError::Refusal));
}

#[test]
fn unreadable_image_never_reaches_the_server() {
    let server = StubServer::start(|_| StubReply::Ok("x".into()));
    let oracle = HttpOracle::new(&config(&server.url)).unwrap();
    assert!(matches!(
        ask(&oracle, std::path::Path::new("/no/such/image.jpg"), "q"),
        Err(OracleError::Image { .. })
    ));
    assert_eq!(server.hits(), 0);
}

#[test]
fn missing_key_variable_is_reported_before_sending() {
    let server = StubServer::start(|_| StubReply::Ok("x".into()));
    let (_d, img) = image();
    let cfg = OracleConfig { api_key_env: Some("DIRGUIDE_TEST_UNSET_KEY".into()), ..config(&server.url) };
    let oracle = HttpOracle::new(&cfg).unwrap();
    assert_eq!(ask(&oracle, &img, "q"), Err(OracleError::AuthMissing("DIRGUIDE_TEST_UNSET_KEY".into())));
    assert_eq!(server.hits(), 0);
}

#[test]
fn flaky_batch_keeps_positions() {
    // Prompts are "n{i}". Every third prompt fails transiently twice; every tenth fails for good.
    let server = StubServer::start(|r| {
        let i: usize = r.prompt.trim_start_matches('n').parse().unwrap();
        if i % 10 == 9 {
            StubReply::Status(502, "gone".into())
        } else if i % 3 == 0 && r.attempt < 2 {
            StubReply::Status(503, "retry".into())
        } else {
            StubReply::Ok(format!("answer {i}"))
        }
    });
    let (_d, img) = image();
    let cfg = config(&server.url);
    let client = OracleClient::from_config(Box::new(HttpOracle::new(&cfg).unwrap()), &cfg);
    let reqs: Vec<_> = (0..60)
        .map(|i| client.request(&img, format!("n{i}"), RequestHints { sample_id: format!("s{i}"), ..Default::default() }))
        .collect();
    let results = client.answer_batch(&reqs);
    assert_eq!(results.len(), 60);
    for (i, r) in results.iter().enumerate() {
        if i % 10 == 9 {
            assert!(matches!(r, Err(OracleError::Transport { attempts: 4, .. })), "{i}: {r:?}");
        } else {
            assert_eq!(r.as_deref(), Ok(format!("answer {i}").as_str()));
        }
    }
}
