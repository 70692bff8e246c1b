use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use reqagent_core::{ChatMessage, ModelConfig};
use reqagent_gateway::{Gateway, GatewayError, HttpClient, KeySource, RetryPolicy};
use serde_json::{json, Value};

struct Keys(BTreeMap<String, String>);

impl KeySource for Keys {
    fn get(&self, name: &str) -> Option<String> {
        self.0.get(name).cloned()
    }
}

#[derive(Clone)]
struct Behaviour {
    calls: Arc<AtomicU32>,
    /// Statuses returned before succeeding.
    failures: Vec<u16>,
}

async fn chat(
    State(b): State<Behaviour>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    let n = b.calls.fetch_add(1, Ordering::SeqCst) as usize;
    if let Some(status) = b.failures.get(n) {
        return (
            StatusCode::from_u16(*status).unwrap(),
            Json(json!({"error": "nope"})),
        );
    }
    assert_eq!(headers["authorization"], "Bearer sk-test");
    assert_eq!(body["messages"][0]["role"], "user");
    let text = format!(
        "echo {} at {}",
        body["messages"][0]["content"].as_str().unwrap(),
        body["temperature"]
    );
    (
        StatusCode::OK,
        Json(json!({"choices": [{"message": {"role": "assistant", "content": text}}]})),
    )
}

async fn embeddings(Json(body): Json<Value>) -> Json<Value> {
    let data: Vec<Value> = body["input"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| json!({"index": i, "embedding": [t.as_str().unwrap().len() as f64, 1.0]}))
        .collect();
    Json(json!({ "data": data }))
}

async fn serve(failures: Vec<u16>) -> (String, Arc<AtomicU32>) {
    let calls = Arc::new(AtomicU32::new(0));
    let app = Router::new()
        .route("/v1/chat/completions", post(chat))
        .route("/v1/embeddings", post(embeddings))
        .with_state(Behaviour {
            calls: calls.clone(),
            failures,
        });
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1"), calls)
}

fn gateway() -> Gateway {
    let keys = Keys(BTreeMap::from([(
        "TEST_KEY".to_string(),
        "sk-test".to_string(),
    )]));
    let retry = RetryPolicy {
        base: Duration::from_millis(5),
        factor: 2,
    };
    Gateway::new(HttpClient::new(retry, Arc::new(keys)), None)
}

fn config(base: &str) -> ModelConfig {
    ModelConfig::openai_compatible(base, "gpt-4o", "TEST_KEY").with_temperature(0.0)
}

#[tokio::test]
async fn chat_round_trip() {
    let (base, calls) = serve(vec![]).await;
    let ex = gateway()
        .chat(&config(&base), &[ChatMessage::user("hello")])
        .await
        .unwrap();
    assert_eq!(ex.response_text, "echo hello at 0.0");
    assert_eq!(ex.word_count, 4);
    assert_eq!(ex.attempt_count, 1);
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn server_errors_are_retried() {
    let (base, calls) = serve(vec![503, 500]).await;
    let ex = gateway()
        .chat(&config(&base), &[ChatMessage::user("hi")])
        .await
        .unwrap();
    assert_eq!(ex.attempt_count, 3);
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn retries_are_bounded() {
    let (base, calls) = serve(vec![502, 502, 502, 502]).await;
    let err = gateway()
        .chat(&config(&base), &[ChatMessage::user("hi")])
        .await
        .unwrap_err();
    assert!(
        matches!(err, GatewayError::Transport { attempts: 3, .. }),
        "{err:?}"
    );
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn auth_errors_are_not_retried() {
    let (base, calls) = serve(vec![401, 401]).await;
    let err = gateway()
        .chat(&config(&base), &[ChatMessage::user("hi")])
        .await
        .unwrap_err();
    assert_eq!(err, GatewayError::Auth { status: 401 });
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn other_client_errors_are_provider_errors() {
    let (base, _) = serve(vec![422]).await;
    let err = gateway()
        .chat(&config(&base), &[ChatMessage::user("hi")])
        .await
        .unwrap_err();
    assert!(matches!(err, GatewayError::Provider { status: 422, .. }));
}

#[tokio::test]
async fn unreachable_host_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/v1", listener.local_addr().unwrap());
    drop(listener);
    let err = gateway()
        .chat(&config(&base), &[ChatMessage::user("hi")])
        .await
        .unwrap_err();
    assert!(
        matches!(err, GatewayError::Transport { attempts: 3, .. }),
        "{err:?}"
    );
}

#[tokio::test]
async fn preconditions() {
    let g = gateway();
    let err = g.chat(&config("http://unused"), &[]).await.unwrap_err();
    assert!(matches!(err, GatewayError::Precondition { .. }));
    let missing = ModelConfig::openai_compatible("http://unused", "m", "NOT_SET_ANYWHERE");
    let err = g
        .chat(&missing, &[ChatMessage::user("x")])
        .await
        .unwrap_err();
    assert_eq!(
        err,
        GatewayError::MissingApiKey {
            name: "NOT_SET_ANYWHERE".into()
        }
    );
}

#[tokio::test]
async fn embeddings_come_back_in_input_order() {
    let (base, _) = serve(vec![]).await;
    let texts = vec!["a".to_string(), "bbb".to_string()];
    let v = gateway().embed(&config(&base), &texts).await.unwrap();
    assert_eq!(v[0].values, vec![1.0, 1.0]);
    assert_eq!(v[1].values, vec![3.0, 1.0]);
}
