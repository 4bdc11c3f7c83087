// SPDX-License-Identifier: MIT OR Apache-2.0

use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use lancet_client::{ClientError, LancetClient};
use lancet_core::wire::{ErrorBody, ReportRequest};
use lancet_core::ErrorCategory;

async fn mock(router: Router) -> LancetClient {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    // trailing slash is tolerated
    LancetClient::new(format!("http://{addr}/")).unwrap()
}

fn report() -> ReportRequest {
    ReportRequest {
        names: vec!["a".into()],
        weights: vec![1.0],
        k: 1,
    }
}

#[tokio::test]
async fn error_bodies_keep_code_and_category() {
    let router = Router::new().route(
        "/v1/report",
        post(|| async {
            (
                StatusCode::BAD_GATEWAY,
                Json(ErrorBody {
                    code: "TransportError".into(),
                    category: ErrorCategory::Transport,
                    message: "upstream down".into(),
                }),
            )
        }),
    );
    let client = mock(router).await;
    let err = client.report(&report()).await.unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Transport);
    assert_eq!(err.code(), Some("TransportError"));
    assert!(err.to_string().contains("upstream down"));
    match err {
        ClientError::Api { status, .. } => assert_eq!(status.as_u16(), 502),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn non_json_replies_are_decode_errors() {
    let router = Router::new()
        .route("/v1/report", post(|| async { (StatusCode::INTERNAL_SERVER_ERROR, "oops") }))
        .route("/health", get(|| async { "not json" }));
    let client = mock(router).await;
    let err = client.report(&report()).await.unwrap_err();
    assert!(matches!(err, ClientError::Decode(ref m) if m.contains("oops")), "{err:?}");
    assert_eq!(err.category(), ErrorCategory::Transport);
    assert!(matches!(client.health().await.unwrap_err(), ClientError::Decode(_)));
}

#[tokio::test]
async fn unreachable_service_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let client = LancetClient::new(format!("http://{addr}")).unwrap();
    let err = client.health().await.unwrap_err();
    assert!(matches!(err, ClientError::Unreachable(_)), "{err:?}");
    assert_eq!(err.category(), ErrorCategory::Transport);
    assert_eq!(err.code(), None);
}
