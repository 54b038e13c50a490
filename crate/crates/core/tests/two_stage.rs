//! Two-stage rationale-then-answer flow against replayed fixtures.

use std::sync::Mutex;

use cfglens::gateway::{
    digest, FixtureEntry, GatewayError, ModelProvider, ModelRequest, ModelResponse,
    ReplayProvider, RequestSettings,
};
use cfglens::prompt::{
    render_prompt_for, run_two_stage, Image, Objective, PromptMode, TwoStageCause,
    REFERENCE_SENTENCE,
};

const CODE: &str = "x = 0\nfor i in range(3):\n    x += 10 // (i - 1)\nprint(x)";
const OBJ: Objective = Objective::FaultLoc { ranked: false };

/// Replay wrapper that remembers every request it saw.
struct Spy {
    inner: ReplayProvider,
    seen: Mutex<Vec<ModelRequest>>,
}

impl ModelProvider for Spy {
    fn id(&self) -> &str {
        "spy"
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        self.seen.lock().unwrap().push(request.clone());
        self.inner.complete(request)
    }
}

fn settings() -> RequestSettings {
    RequestSettings::new("two-stage-model")
}

fn entry(mode: PromptMode, image: Option<&Image>, rationale: Option<&str>, text: &str) -> FixtureEntry {
    let bundle = render_prompt_for(OBJ, mode, CODE, image, rationale).unwrap();
    let request = ModelRequest::with_settings(&settings(), bundle);
    FixtureEntry { digest: digest(&request), text: text.into(), model: request.model_name }
}

fn spy(entries: Vec<FixtureEntry>) -> Spy {
    Spy { inner: ReplayProvider::from_entries(entries), seen: Mutex::new(Vec::new()) }
}

#[test]
fn rationale_feeds_the_second_stage() {
    let image = Image::svg("<svg/>");
    let rationale = "Dividing by i - 1 fails when i is 1.";
    let provider = spy(vec![
        entry(PromptMode::MMCotStage1, Some(&image), None, rationale),
        entry(PromptMode::MMCotStage2, None, Some(rationale), "x += 10 // (i - 1)"),
    ]);
    let out = run_two_stage(&provider, &settings(), OBJ, CODE, &image, false).unwrap();
    assert_eq!(out.rationale, rationale);
    assert_eq!(out.final_answer, "x += 10 // (i - 1)");

    let seen = provider.seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0].bundle.attachments, vec![image]);
    assert!(seen[1].bundle.attachments.is_empty());
    assert!(seen[1].bundle.text.contains(rationale));
    assert!(!seen[0].bundle.text.contains(REFERENCE_SENTENCE));
}

#[test]
fn reference_variant_adds_the_sentence_once() {
    let image = Image::svg("<svg/>");
    let provider = spy(vec![
        entry(PromptMode::MMCotStage1Ref, Some(&image), None, "r"),
        entry(PromptMode::MMCotStage2, None, Some("r"), "a"),
    ]);
    run_two_stage(&provider, &settings(), OBJ, CODE, &image, true).unwrap();
    let seen = provider.seen.lock().unwrap();
    assert_eq!(seen[0].bundle.mode, PromptMode::MMCotStage1Ref);
    assert_eq!(seen[0].bundle.text.matches(REFERENCE_SENTENCE).count(), 1);
    assert_eq!(seen[1].bundle.text.matches(REFERENCE_SENTENCE).count(), 0);
}

#[test]
fn second_stage_failure_keeps_the_rationale() {
    let image = Image::svg("<svg/>");
    let provider = spy(vec![entry(PromptMode::MMCotStage1, Some(&image), None, "why")]);
    let err = run_two_stage(&provider, &settings(), OBJ, CODE, &image, false).unwrap_err();
    assert_eq!(err.stage, 2);
    assert_eq!(err.rationale.as_deref(), Some("why"));
    assert!(matches!(err.source, TwoStageCause::Gateway(GatewayError::FixtureMiss { .. })));
}

#[test]
fn first_stage_failure_has_no_rationale() {
    let image = Image::svg("<svg/>");
    let provider = spy(Vec::new());
    let err = run_two_stage(&provider, &settings(), OBJ, CODE, &image, false).unwrap_err();
    assert_eq!((err.stage, err.rationale), (1, None));
    assert_eq!(provider.seen.lock().unwrap().len(), 1);
}
