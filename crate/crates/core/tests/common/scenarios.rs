// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mining scenarios backed by committed replay fixtures.
//!
//! Each scenario pairs a task with a scripted model reply. `record_all`
//! runs every scenario against the scripted replies and writes the
//! exchanges under `tests/fixtures/mining/`; the tests then replay those
//! files with no network access.

use std::path::PathBuf;
use std::sync::Arc;

use lancet_core::mining::{
    ClientConfig, EditTask, Miner, RecordingTransport, ReplayTransport, ScriptedTransport,
};
use lancet_core::Result;

pub const MODEL: &str = "gpt-4o";

pub fn config() -> ClientConfig {
    ClientConfig {
        model_name: MODEL.into(),
        api_key_env: String::new(),
        max_retries: 2,
        backoff_base_ms: 1,
        ..ClientConfig::default()
    }
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mining")
}

pub fn fixture(name: &str) -> PathBuf {
    fixture_dir().join(format!("{name}.json"))
}

pub fn replay_miner(name: &str) -> Miner {
    let t = ReplayTransport::load(fixture(name)).expect("fixture loads");
    Miner::new(Arc::new(t), config())
}

pub fn cake_task() -> EditTask {
    EditTask {
        source_prompt: "a [round] cake with orange frosting on a wooden plate".into(),
        target_prompt: "a [square] cake with orange frosting on a wooden plate".into(),
        source_concept: "round".into(),
        target_concept: "square".into(),
        image_path: None,
    }
}

pub fn bicycle_task() -> EditTask {
    EditTask {
        source_prompt: "a slanted mountain bicycle on the road in front of a building".into(),
        target_prompt: "a slanted [rusty] mountain bicycle on the road in front of a building"
            .into(),
        source_concept: String::new(),
        target_concept: "rusty".into(),
        image_path: None,
    }
}

pub fn birds_task() -> EditTask {
    EditTask {
        source_prompt: "two birds sitting on a branch".into(),
        target_prompt: "two [origami] birds sitting on a branch".into(),
        source_concept: String::new(),
        target_concept: "origami".into(),
        image_path: None,
    }
}

pub const CAKE_CONCEPTS: [&str; 30] = [
    "round", "cake", "orange", "frosting", "wooden", "plate", "swirl", "creamy", "crumbly",
    "smooth", "rustic", "natural", "muted", "handmade", "warm", "minimalist", "unfrosted",
    "botanical", "bark", "inviting", "cozy", "textured", "simple", "organic", "earthy", "soft",
    "classic", "contrasting", "neutral", "clean",
];

pub const DOG_STIMULI: [&str; 30] = [
    "Dogs are known for their loyalty and strong bonds with humans.",
    "A dog wags its tail excitedly when it sees its owner after a long day.",
    "Puppies often chew on objects as a way to explore their environment.",
    "The sound of a dog’s bark can vary depending on its breed and mood.",
    "Dogs rely heavily on their sense of smell, which is far more sensitive than that of humans.",
    "A dog runs alongside its owner during a morning jog, full of energy.",
    "A sheepdog circles the flock and guides it toward the gate.",
    "A dachshund waddles down the hallway on its short legs.",
    "Guide dogs help people with visual impairments move through busy streets.",
    "A wet dog shakes itself dry and sprays water everywhere.",
    "A golden retriever drops a tennis ball at a stranger's feet.",
    "Sled dogs pull a heavy sled across a frozen plain.",
    "A dog curls up on a rug in front of the fireplace.",
    "Police dogs are trained to detect hidden substances.",
    "A beagle follows a scent trail through tall grass.",
    "A small terrier barks at the mail carrier through the window.",
    "A dog tilts its head when it hears an unfamiliar sound.",
    "Greyhounds can reach high speeds in short sprints.",
    "A muddy dog leaves paw prints across the kitchen floor.",
    "An old dog sleeps in a patch of afternoon sunlight.",
    "A poodle with a fresh haircut prances at a dog show.",
    "A rescue dog learns to trust its new family.",
    "A dog catches a frisbee in mid-air at the park.",
    "A husky howls along with a passing siren.",
    "A dog digs a hole in the garden to bury a bone.",
    "A bulldog snores loudly on the sofa.",
    "Therapy dogs visit hospital patients to lift their spirits.",
    "A dog waits patiently by the door for its walk.",
    "A puppy stumbles over its own oversized paws.",
    "A dog leans out of a car window with its ears flapping in the wind.",
];

fn list(items: &[&str]) -> String {
    serde_json::to_string(items).unwrap()
}

/// Runs `op` over scripted replies and saves the recorded exchanges.
async fn record<T, F, Fut>(name: &str, replies: Vec<String>, op: F) -> Result<()>
where
    F: FnOnce(Miner) -> Fut,
    Fut: std::future::Future<Output = Result<T>>,
{
    let rec = Arc::new(RecordingTransport::new(ScriptedTransport::new(replies)));
    let miner = Miner::new(rec.clone(), config());
    // failing scenarios are recorded too
    let _ = op(miner).await;
    rec.save(fixture(name))
}

pub async fn record_all() -> Result<()> {
    std::fs::create_dir_all(fixture_dir()).unwrap();

    // list answer of the concept-list demonstration, as a Python-style list
    let cake_reply = format!(
        "[{}]",
        CAKE_CONCEPTS
            .iter()
            .map(|c| format!("\"{c}\""))
            .collect::<Vec<_>>()
            .join(", ")
    );
    record("cake_parse", vec![cake_reply], |m| async move {
        m.parse_concepts(&cake_task()).await
    })
    .await?;

    record(
        "bicycle_rewrite",
        vec!["a slanted [new] mountain bicycle on the road in front of a building".into()],
        |m| async move { m.rewrite_for_insertion(&bicycle_task()).await },
    )
    .await?;

    record(
        "birds_rewrite",
        vec!["two [real] birds sitting on a branch".into()],
        |m| async move { m.rewrite_for_insertion(&birds_task()).await },
    )
    .await?;

    let dog_reply = format!(
        "Concept Stimuli:\n[\n{}\n]",
        DOG_STIMULI
            .iter()
            .map(|s| format!("    \"{s}\","))
            .collect::<Vec<_>>()
            .join("\n")
    );
    record("dog_stimuli", vec![dog_reply], |m| async move {
        m.synthesize_stimuli("dog").await
    })
    .await?;

    let mut with_dupes: Vec<&str> = DOG_STIMULI[..29].to_vec();
    with_dupes.push(DOG_STIMULI[0]);
    with_dupes.push(DOG_STIMULI[1]);
    record(
        "dog_stimuli_dupes",
        vec![list(&with_dupes), list(&[DOG_STIMULI[29], DOG_STIMULI[2]])],
        |m| async move { m.synthesize_stimuli("dog").await },
    )
    .await?;

    let short = list(&CAKE_CONCEPTS[..10]);
    record("cake_short_list", vec![short; 3], |m| async move {
        m.parse_concepts(&cake_task()).await
    })
    .await?;

    let mut with_target = CAKE_CONCEPTS.to_vec();
    with_target[7] = "square";
    record("cake_target_present", vec![list(&with_target); 3], |m| async move {
        m.parse_concepts(&cake_task()).await
    })
    .await?;

    record(
        "cake_not_a_list",
        vec!["Sure, here are the concepts you asked for.".into(); 3],
        |m| async move { m.parse_concepts(&cake_task()).await },
    )
    .await?;

    record(
        "birds_counterpart_is_target",
        vec!["two [origami] birds sitting on a branch".into(); 3],
        |m| async move { m.rewrite_for_insertion(&birds_task()).await },
    )
    .await?;

    record(
        "dog_stimuli_too_few",
        vec![list(&DOG_STIMULI[..12]), list(&DOG_STIMULI[..5])],
        |m| async move { m.synthesize_stimuli("dog").await },
    )
    .await
}
