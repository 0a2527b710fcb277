use std::sync::Arc;
use std::time::Duration;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use socproto_core::fixtures;
use socproto_core::implementation::manual_activity_map;
use socproto_core::StepClock;
use socproto_service::{spawn, ApiError, RunningServer, ServiceConfig};

async fn start(store: Option<&std::path::Path>) -> RunningServer {
    let mut config = ServiceConfig::new("127.0.0.1:0".parse().unwrap()).with_clock(Arc::new(StepClock::new(1_000, 10)));
    if let Some(store) = store {
        config = config.with_store(store);
    }
    spawn(config).await.unwrap()
}

async fn seed(client: &Client, server: &RunningServer) {
    for resource in fixtures::brainstorming_environment().resources() {
        let r = client.post(server.url("/environment/resources")).json(resource).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
    }
    let asp = fixtures::brainstorming_abstract();
    let r = client.post(server.url("/protocols")).json(&asp).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let request = json!({ "id": "brainstorming-manual", "activity_map": manual_activity_map(&asp) });
    let r = client.post(server.url("/protocols/brainstorming/implementations")).json(&request).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED, "{}", r.text().await.unwrap());
    let request = json!({
        "id": "p1",
        "implemented_protocol_id": "brainstorming-manual",
        "assignment": fixtures::brainstorming_assignment(),
    });
    let r = client.post(server.url("/processes")).json(&request).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
}

async fn fire(client: &Client, server: &RunningServer, who: &str, activity: &str) -> reqwest::Response {
    client
        .post(server.url("/processes/p1/fire"))
        .header("X-Collaborator", who)
        .json(&json!({ "activity": activity }))
        .send()
        .await
        .unwrap()
}

async fn enabled(client: &Client, server: &RunningServer, who: &str) -> Vec<String> {
    client.get(server.url(&format!("/processes/p1/enabled?collaborator={who}"))).send().await.unwrap().json().await.unwrap()
}

#[tokio::test]
async fn enabled_and_error_mapping() {
    let server = start(None).await;
    let client = Client::new();
    seed(&client, &server).await;

    assert_eq!(fire(&client, &server, "john", "present-problem").await.status(), StatusCode::OK);
    assert_eq!(enabled(&client, &server, "ann").await, vec!["present-idea"]);
    assert_eq!(enabled(&client, &server, "john").await, vec!["classify-ideas"]);

    let r = fire(&client, &server, "ann", "summarize").await;
    assert_eq!(r.status(), StatusCode::CONFLICT);
    let body: ApiError = r.json().await.unwrap();
    assert_eq!(body.code, "NOT_ENABLED");
    assert_eq!(body.ids, vec!["summarize", "ann"]);

    let r = client.get(server.url("/processes/unknown")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(r.json::<ApiError>().await.unwrap().code, "NOT_FOUND");

    let r = client.get(server.url("/processes/p1/enabled?collaborator=zed")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
    assert_eq!(r.json::<ApiError>().await.unwrap().code, "UNKNOWN_COLLABORATOR");

    let r = client.post(server.url("/processes/p1/fire")).json(&json!({ "activity": "present-idea" })).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let r = client.post(server.url("/processes")).body("{not json").send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    assert_eq!(r.json::<ApiError>().await.unwrap().code, "MALFORMED");

    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn invalid_protocols_carry_reports() {
    let server = start(None).await;
    let client = Client::new();
    let mut asp = fixtures::brainstorming_abstract();
    asp.interaction.edges.push(socproto_core::Edge::new(socproto_core::id::id("closed"), socproto_core::id::id("commenting")));
    let r = client.post(server.url("/protocols")).json(&asp).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let body: ApiError = r.json().await.unwrap();
    assert_eq!(body.code, "VALIDATION_FAILED");
    assert!(body.report.unwrap().has_rule("bipartite"));
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn long_poll_returns_new_entries() {
    let server = start(None).await;
    let client = Client::new();
    seed(&client, &server).await;

    let r: Vec<Value> =
        client.get(server.url("/processes/p1/events?since=0&timeout_ms=0")).send().await.unwrap().json().await.unwrap();
    assert!(r.is_empty());

    let poll = {
        let client = client.clone();
        let url = server.url("/processes/p1/events?since=0&timeout_ms=5000");
        tokio::spawn(async move { client.get(url).send().await.unwrap().json::<Vec<Value>>().await.unwrap() })
    };
    tokio::time::sleep(Duration::from_millis(100)).await;
    fire(&client, &server, "john", "present-problem").await;
    let entries = poll.await.unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["kind"], "firing");
    assert_eq!(entries[0]["seq"], 1);
    assert_eq!(entries[0]["activity"], "present-problem");
    server.shutdown().await.unwrap();
}

/// Reads SSE frames until `count` events have arrived.
async fn read_events(mut response: reqwest::Response, count: usize) -> Vec<(String, String, Value)> {
    let mut buffer = String::new();
    let mut events = Vec::new();
    while events.len() < count {
        let chunk = tokio::time::timeout(Duration::from_secs(5), response.chunk()).await.unwrap().unwrap().unwrap();
        buffer.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = buffer.find("\n\n") {
            let frame: String = buffer.drain(..end + 2).collect();
            let (mut id, mut kind, mut data) = (String::new(), String::new(), String::new());
            for line in frame.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    id = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("event:") {
                    kind = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim_start());
                }
            }
            if !data.is_empty() {
                events.push((id, kind, serde_json::from_str(&data).unwrap()));
            }
        }
    }
    events
}

#[tokio::test]
async fn event_stream_delivers_every_entry_in_order() {
    let server = start(None).await;
    let client = Client::new();
    seed(&client, &server).await;
    fire(&client, &server, "john", "present-problem").await;

    let stream = client
        .get(server.url("/processes/p1/events"))
        .header("Accept", "text/event-stream")
        .send()
        .await
        .unwrap();
    assert_eq!(stream.status(), StatusCode::OK);
    for (who, what) in fixtures::golden_steps().into_iter().skip(1) {
        assert_eq!(fire(&client, &server, who, what).await.status(), StatusCode::OK);
    }
    let events = read_events(stream, 6).await;
    let ids: Vec<&str> = events.iter().map(|(id, _, _)| id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "3", "4", "5", "6"]);
    let activities: Vec<&str> = events.iter().map(|(_, _, v)| v["activity"].as_str().unwrap()).collect();
    let expected: Vec<&str> = fixtures::golden_steps().into_iter().map(|(_, a)| a).collect();
    assert_eq!(activities, expected);

    let resumed = client
        .get(server.url("/processes/p1/events"))
        .header("Accept", "text/event-stream")
        .header("Last-Event-ID", "4")
        .send()
        .await
        .unwrap();
    let tail = read_events(resumed, 2).await;
    assert_eq!(tail.iter().map(|(id, _, _)| id.as_str()).collect::<Vec<_>>(), ["5", "6"]);

    // open streams must not block graceful shutdown
    tokio::time::timeout(Duration::from_secs(5), server.shutdown()).await.unwrap().unwrap();
}

#[tokio::test]
async fn member_swap_through_meta_endpoints() {
    let server = start(None).await;
    let client = Client::new();
    seed(&client, &server).await;
    fire(&client, &server, "john", "present-problem").await;
    fire(&client, &server, "ann", "present-idea").await;

    let r = client
        .post(server.url("/processes/p1/meta"))
        .json(&json!({ "participants": { "initiator": ["john"], "decider": ["john"] } }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let meta: Value = r.json().await.unwrap();
    let meta_id = meta["meta"]["id"].as_str().unwrap().to_string();

    let r = fire(&client, &server, "bob", "present-idea").await;
    assert_eq!(r.status(), StatusCode::CONFLICT);
    assert_eq!(r.json::<ApiError>().await.unwrap().code, "PROCESS_NOT_RUNNING");
    let again = client
        .post(server.url("/processes/p1/meta"))
        .json(&json!({ "participants": { "initiator": ["john"], "decider": ["john"] } }))
        .send()
        .await
        .unwrap();
    assert_eq!(again.status(), StatusCode::CONFLICT);
    assert_eq!(again.json::<ApiError>().await.unwrap().code, "ADAPTATION_IN_PROGRESS");

    let added: Value = client
        .post(server.url("/environment/relations"))
        .json(&json!({ "source": "ann", "target": "dan", "label": "manages" }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(added["added"], true);
    let substitutes: Vec<Value> = client
        .get(server.url("/environment/substitutes?role=participant&unavailable=ann&process=p1&max_depth=2"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let ids: Vec<&str> = substitutes.iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["dan"]);

    let txn = json!({
        "target": "p1",
        "edits": [{ "op": "reassign_role", "role": "participant", "collaborators": ["bob", "cecil"] }],
    });
    let propose = json!({ "activity": "propose-change", "payload": { "transaction": txn.to_string() } });
    for body in [propose, json!({ "activity": "accept" })] {
        let r = client
            .post(server.url(&format!("/meta/{meta_id}/fire")))
            .header("X-Collaborator", "john")
            .json(&body)
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::OK, "{}", r.text().await.unwrap());
    }
    let r = client.post(server.url(&format!("/meta/{meta_id}/conclude"))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let conclusion: Value = r.json().await.unwrap();
    assert_eq!(conclusion["outcome"], "accepted");
    assert_eq!(conclusion["target"]["status"], "running");
    assert_eq!(conclusion["target"]["assignment"]["participant"], json!(["bob", "cecil"]));

    assert_eq!(fire(&client, &server, "ann", "present-idea").await.status(), StatusCode::CONFLICT);
    for (who, what) in [("bob", "present-idea"), ("john", "classify-ideas"), ("cecil", "comment-idea"), ("john", "summarize")] {
        assert_eq!(fire(&client, &server, who, what).await.status(), StatusCode::OK);
    }
    let process: Value = client.get(server.url("/processes/p1")).send().await.unwrap().json().await.unwrap();
    assert_eq!(process["status"], "completed");
    assert_eq!(process["marking"], json!(["closed"]));
    let kinds: Vec<&str> = process["trace"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["firing", "firing", "adaptation", "firing", "firing", "firing", "firing"]);
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn invalid_transactions_are_unprocessable() {
    let server = start(None).await;
    let client = Client::new();
    seed(&client, &server).await;
    fire(&client, &server, "john", "present-problem").await;
    let meta: Value = client
        .post(server.url("/processes/p1/meta"))
        .json(&json!({ "participants": { "initiator": ["john"], "decider": ["john"] } }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let meta_id = meta["meta"]["id"].as_str().unwrap().to_string();
    let txn = json!({ "target": "p1", "edits": [{ "op": "remove_state", "id": "waiting-for-ideas" }] });
    for body in [
        json!({ "activity": "propose-change", "payload": { "transaction": txn.to_string() } }),
        json!({ "activity": "accept" }),
    ] {
        client
            .post(server.url(&format!("/meta/{meta_id}/fire")))
            .header("X-Collaborator", "john")
            .json(&body)
            .send()
            .await
            .unwrap();
    }
    let before: Value = client.get(server.url("/processes/p1")).send().await.unwrap().json().await.unwrap();
    let r = client.post(server.url(&format!("/meta/{meta_id}/conclude"))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json::<ApiError>().await.unwrap().code, "MIGRATION_MISSING");
    let after: Value = client.get(server.url("/processes/p1")).send().await.unwrap().json().await.unwrap();
    assert_eq!(after["status"], "running");
    assert_eq!(after["trace"], before["trace"]);
    let meta: Value = client.get(server.url(&format!("/meta/{meta_id}"))).send().await.unwrap().json().await.unwrap();
    assert_eq!(meta["outcome"], "rejected");
    server.shutdown().await.unwrap();
}

#[tokio::test]
async fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let client = Client::new();
    {
        let server = start(Some(dir.path())).await;
        seed(&client, &server).await;
        fire(&client, &server, "john", "present-problem").await;
        server.shutdown().await.unwrap();
    }
    let server = start(Some(dir.path())).await;
    assert_eq!(enabled(&client, &server, "bob").await, vec!["present-idea"]);
    let records: Vec<Value> =
        client.get(server.url("/protocols?tags=brainstorming")).send().await.unwrap().json().await.unwrap();
    let ids: Vec<&str> = records.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["brainstorming", "brainstorming-manual"]);
    let relations: Vec<Value> = client.get(server.url("/environment/relations")).send().await.unwrap().json().await.unwrap();
    assert_eq!(relations.len(), 12);
    let r = client.delete(server.url("/environment/resources/ann")).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::CONFLICT);
    server.shutdown().await.unwrap();
}
