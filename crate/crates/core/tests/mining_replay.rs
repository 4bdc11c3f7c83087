// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mining against the committed replay fixtures, with no network.

mod common;

use std::sync::Arc;

use common::scenarios::*;
use lancet_core::mining::{request_key, ChatRequest, ChatTransport, Miner, ReplayTransport};
use lancet_core::Error;

fn assert_rejected<T: std::fmt::Debug>(r: lancet_core::Result<T>, max_attempts: usize) -> String {
    match r {
        Err(Error::ValidationFailed { attempts, reason }) => {
            assert!(attempts <= max_attempts, "{attempts} attempts");
            reason
        }
        other => panic!("expected ValidationFailed, got {other:?}"),
    }
}

#[tokio::test]
async fn cake_concepts_parse() {
    let list = replay_miner("cake_parse").parse_concepts(&cake_task()).await.unwrap();
    assert_eq!(list.concepts, CAKE_CONCEPTS);
    assert_eq!(list.concepts[0], "round");
    assert!(!list.concepts.iter().any(|c| c == "square"));
}

#[tokio::test]
async fn insertion_rewrites_name_a_counterpart() {
    let bike = replay_miner("bicycle_rewrite")
        .rewrite_for_insertion(&bicycle_task())
        .await
        .unwrap();
    assert_eq!(bike.resolved_source().as_deref(), Some("new"));
    assert_eq!(bike.resolved_target().as_deref(), Some("rusty"));
    assert_eq!(bike.target_prompt, bicycle_task().target_prompt);

    let birds = replay_miner("birds_rewrite")
        .rewrite_for_insertion(&birds_task())
        .await
        .unwrap();
    assert_eq!(birds.source_prompt, "two [real] birds sitting on a branch");
}

#[tokio::test]
async fn dog_stimuli_and_duplicate_top_up() {
    let set = replay_miner("dog_stimuli").synthesize_stimuli("dog").await.unwrap();
    assert_eq!(set.concept, "dog");
    assert_eq!(set.stimuli, DOG_STIMULI);

    let set = replay_miner("dog_stimuli_dupes").synthesize_stimuli("dog").await.unwrap();
    assert_eq!(set.stimuli.len(), 30);
    let unique: std::collections::HashSet<_> = set.stimuli.iter().collect();
    assert_eq!(unique.len(), 30);
    assert!(set.stimuli.iter().any(|s| s == DOG_STIMULI[29]));
}

#[tokio::test]
async fn broken_replies_are_rejected_within_the_retry_budget() {
    let budget = config().max_retries + 1;
    let reason = assert_rejected(
        replay_miner("cake_short_list").parse_concepts(&cake_task()).await,
        budget,
    );
    assert!(reason.contains("15"), "{reason}");
    assert_rejected(
        replay_miner("cake_target_present").parse_concepts(&cake_task()).await,
        budget,
    );
    assert_rejected(
        replay_miner("cake_not_a_list").parse_concepts(&cake_task()).await,
        budget,
    );
    assert_rejected(
        replay_miner("birds_counterpart_is_target")
            .rewrite_for_insertion(&birds_task())
            .await,
        budget,
    );
    assert_rejected(replay_miner("dog_stimuli_too_few").synthesize_stimuli("dog").await, 1);
}

#[tokio::test]
async fn fixtures_replay_the_exact_requests() {
    let miner = replay_miner("cake_parse");
    let req = miner.parse_request(&cake_task()).unwrap();
    let file: lancet_core::mining::FixtureFile =
        serde_json::from_str(&std::fs::read_to_string(fixture("cake_parse")).unwrap()).unwrap();
    assert_eq!(file.exchanges[0].request, req);
    assert_eq!(file.exchanges[0].key, request_key(&req));
}

#[tokio::test]
async fn a_directory_of_fixtures_replays_together() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["cake_parse", "dog_stimuli"] {
        std::fs::copy(fixture(name), dir.path().join(format!("{name}.json"))).unwrap();
    }
    let replay = Arc::new(ReplayTransport::load(dir.path()).unwrap());
    let miner = Miner::new(replay.clone(), config());
    assert_eq!(miner.parse_concepts(&cake_task()).await.unwrap().concepts.len(), 30);
    assert_eq!(miner.synthesize_stimuli("dog").await.unwrap().stimuli.len(), 30);
    let unknown = ChatRequest::user(MODEL, "something else".into(), None);
    assert!(matches!(replay.complete(&unknown).await, Err(Error::ReplayMiss(_))));
}

#[tokio::test]
async fn many_concepts_share_one_fixture() {
    let miner = replay_miner("dog_stimuli");
    let sets = miner.synthesize_many(&["dog".into(), "dog".into()]).await.unwrap();
    assert_eq!(sets.len(), 2);
    assert_eq!(sets[0], sets[1]);
}
