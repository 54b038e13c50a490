//! Prompt construction for every experimental setting, plus the two-stage
//! rationale → answer pipeline.
//!
//! Template text lives in `templates/` as plain `.txt` assets and is embedded
//! at compile time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gateway::{GatewayError, ModelProvider, ModelRequest, RequestSettings};

/// The sentence that turns a CFG chain-of-thought prompt into a referencing one.
pub const REFERENCE_SENTENCE: &str =
    "Reference the CFG to identify which node corresponds to the line you're currently analyzing.";

/// Appended to CRUXEval prompts when a CFG image accompanies them.
pub const CFG_NOTICE: &str =
    "You will also be provided with a control flow graph (CFG) image of this code.";

/// Appended to fault-localization prompts in ranked mode.
pub const RANKED_SUFFIX: &str =
    "Instead of a single line, list your top 10 candidate lines, most suspicious first, as a numbered list.";

pub const SVG_MEDIA_TYPE: &str = "image/svg+xml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    PlainNoCot,
    PlainCot,
    CfgNoCot,
    CfgCot,
    VisualCoder,
    #[serde(rename = "mmcot_stage1")]
    MMCotStage1,
    #[serde(rename = "mmcot_stage1_ref")]
    MMCotStage1Ref,
    #[serde(rename = "mmcot_stage2")]
    MMCotStage2,
}

impl PromptMode {
    pub const ALL: [PromptMode; 8] = [
        PromptMode::PlainNoCot,
        PromptMode::PlainCot,
        PromptMode::CfgNoCot,
        PromptMode::CfgCot,
        PromptMode::VisualCoder,
        PromptMode::MMCotStage1,
        PromptMode::MMCotStage1Ref,
        PromptMode::MMCotStage2,
    ];

    pub fn requires_image(self) -> bool {
        !matches!(
            self,
            PromptMode::PlainNoCot | PromptMode::PlainCot | PromptMode::MMCotStage2
        )
    }

    /// Asset file stem, also used as the serialized name.
    pub fn file_stem(self) -> &'static str {
        match self {
            PromptMode::PlainNoCot => "plain_no_cot",
            PromptMode::PlainCot => "plain_cot",
            PromptMode::CfgNoCot => "cfg_no_cot",
            PromptMode::CfgCot => "cfg_cot",
            PromptMode::VisualCoder => "visualcoder",
            PromptMode::MMCotStage1 => "mmcot_stage1",
            PromptMode::MMCotStage1Ref => "mmcot_stage1_ref",
            PromptMode::MMCotStage2 => "mmcot_stage2",
        }
    }

    fn is_rationale_stage(self) -> bool {
        matches!(self, PromptMode::MMCotStage1 | PromptMode::MMCotStage1Ref)
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

/// What the final answer of a fault-localization-style prompt should be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Name the failing line; `ranked` asks for a top-10 list instead.
    FaultLoc { ranked: bool },
    /// Return a corrected program.
    Repair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    OutputPred,
    InputPred,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub media_type: String,
    pub bytes: Vec<u8>,
}

impl Image {
    pub fn svg(document: &str) -> Self {
        Image {
            media_type: SVG_MEDIA_TYPE.to_string(),
            bytes: document.as_bytes().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub text: String,
    pub attachments: Vec<Image>,
    pub mode: PromptMode,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt mode {0} needs a CFG image attachment")]
    MissingAttachment(PromptMode),
    #[error("prompt mode {0} takes no attachment")]
    UnexpectedAttachment(PromptMode),
    #[error("prompt mode {0} needs a rationale")]
    MissingRationale(PromptMode),
}

/// Raw template asset for a mode and objective, placeholders intact.
pub fn template(mode: PromptMode, objective: Objective) -> &'static str {
    let repair = objective == Objective::Repair;
    match (mode, repair) {
        (PromptMode::PlainNoCot, false) => include_str!("../templates/plain_no_cot.txt"),
        (PromptMode::PlainCot, false) => include_str!("../templates/plain_cot.txt"),
        (PromptMode::CfgNoCot, false) => include_str!("../templates/cfg_no_cot.txt"),
        (PromptMode::CfgCot, false) => include_str!("../templates/cfg_cot.txt"),
        (PromptMode::VisualCoder, false) => include_str!("../templates/visualcoder.txt"),
        (PromptMode::MMCotStage2, false) => include_str!("../templates/mmcot_stage2.txt"),
        (PromptMode::PlainNoCot, true) => include_str!("../templates/repair/plain_no_cot.txt"),
        (PromptMode::PlainCot, true) => include_str!("../templates/repair/plain_cot.txt"),
        (PromptMode::CfgNoCot, true) => include_str!("../templates/repair/cfg_no_cot.txt"),
        (PromptMode::CfgCot, true) => include_str!("../templates/repair/cfg_cot.txt"),
        (PromptMode::VisualCoder, true) => include_str!("../templates/repair/visualcoder.txt"),
        (PromptMode::MMCotStage2, true) => include_str!("../templates/repair/mmcot_stage2.txt"),
        // Rationale generation does not depend on what the answer will be.
        (PromptMode::MMCotStage1, _) => include_str!("../templates/mmcot_stage1.txt"),
        (PromptMode::MMCotStage1Ref, _) => include_str!("../templates/mmcot_stage1_ref.txt"),
    }
}

pub fn cruxeval_template(direction: Direction) -> &'static str {
    match direction {
        Direction::OutputPred => include_str!("../templates/cruxeval_output_cot.txt"),
        Direction::InputPred => include_str!("../templates/cruxeval_input_cot.txt"),
    }
}

/// Replaces `{name}` placeholders in one left-to-right pass, so substituted
/// text is never scanned again. Unknown `{...}` sequences are kept as is.
pub fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (name, value) in values {
            let len = name.len();
            if tail.len() >= len + 2
                && tail[1..].starts_with(name)
                && tail.as_bytes()[len + 1] == b'}'
            {
                out.push_str(value);
                rest = &tail[len + 2..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

fn check_inputs(
    mode: PromptMode,
    cfg_image: Option<&Image>,
    rationale: Option<&str>,
) -> Result<(), PromptError> {
    match (mode.requires_image(), cfg_image.is_some()) {
        (true, false) => return Err(PromptError::MissingAttachment(mode)),
        (false, true) => return Err(PromptError::UnexpectedAttachment(mode)),
        _ => {}
    }
    if mode == PromptMode::MMCotStage2 && rationale.is_none() {
        return Err(PromptError::MissingRationale(mode));
    }
    Ok(())
}

/// Fault-localization prompt for `mode`, answered with a single line.
pub fn render_prompt(
    mode: PromptMode,
    code: &str,
    cfg_image: Option<&Image>,
    rationale: Option<&str>,
) -> Result<PromptBundle, PromptError> {
    render_prompt_for(Objective::FaultLoc { ranked: false }, mode, code, cfg_image, rationale)
}

pub fn render_prompt_for(
    objective: Objective,
    mode: PromptMode,
    code: &str,
    cfg_image: Option<&Image>,
    rationale: Option<&str>,
) -> Result<PromptBundle, PromptError> {
    check_inputs(mode, cfg_image, rationale)?;
    let mut text = substitute(
        template(mode, objective),
        &[("code", code), ("rationale", rationale.unwrap_or(""))],
    );
    if objective == (Objective::FaultLoc { ranked: true }) && !mode.is_rationale_stage() {
        text.truncate(text.trim_end().len());
        text.push(' ');
        text.push_str(RANKED_SUFFIX);
        text.push('\n');
    }
    Ok(PromptBundle {
        text,
        attachments: cfg_image.cloned().into_iter().collect(),
        mode,
    })
}

/// CRUXEval chain-of-thought prompt. `given` is the known input for output
/// prediction and the known output for input prediction. With a CFG the
/// notice joins the instruction paragraph (and, when `reference` is set, the
/// reference sentence follows it).
pub fn render_cruxeval_prompt(
    direction: Direction,
    code: &str,
    given: &str,
    with_cfg: bool,
    cfg_image: Option<&Image>,
) -> Result<PromptBundle, PromptError> {
    render_cruxeval(direction, code, given, with_cfg, false, cfg_image)
}

pub fn render_cruxeval_prompt_ref(
    direction: Direction,
    code: &str,
    given: &str,
    cfg_image: Option<&Image>,
) -> Result<PromptBundle, PromptError> {
    render_cruxeval(direction, code, given, true, true, cfg_image)
}

fn render_cruxeval(
    direction: Direction,
    code: &str,
    given: &str,
    with_cfg: bool,
    reference: bool,
    cfg_image: Option<&Image>,
) -> Result<PromptBundle, PromptError> {
    let mode = match (with_cfg, reference) {
        (false, _) => PromptMode::PlainCot,
        (true, false) => PromptMode::CfgCot,
        (true, true) => PromptMode::VisualCoder,
    };
    check_inputs(mode, cfg_image, None)?;
    let placeholder = match direction {
        Direction::OutputPred => "input",
        Direction::InputPred => "output",
    };
    let mut text = substitute(cruxeval_template(direction), &[("code", code), (placeholder, given)]);
    if with_cfg {
        let mut notice = format!(" {CFG_NOTICE}");
        if reference {
            notice.push(' ');
            notice.push_str(REFERENCE_SENTENCE);
        }
        let paragraph_end = text.find("\n\n").unwrap_or(text.len());
        text.insert_str(paragraph_end, &notice);
    }
    Ok(PromptBundle {
        text,
        attachments: cfg_image.cloned().into_iter().collect(),
        mode,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoStageOutput {
    pub rationale: String,
    pub final_answer: String,
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {source}")]
pub struct TwoStageError {
    pub stage: u8,
    /// Stage-1 output, when stage 1 completed.
    pub rationale: Option<String>,
    #[source]
    pub source: TwoStageCause,
}

#[derive(Debug, thiserror::Error)]
pub enum TwoStageCause {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Rationale generation with the image, then answer inference from code and
/// rationale without it.
pub fn run_two_stage(
    provider: &dyn ModelProvider,
    settings: &RequestSettings,
    objective: Objective,
    code: &str,
    cfg_image: &Image,
    use_reference_stage1: bool,
) -> Result<TwoStageOutput, TwoStageError> {
    let stage1_mode = if use_reference_stage1 {
        PromptMode::MMCotStage1Ref
    } else {
        PromptMode::MMCotStage1
    };
    let fail = |stage, rationale: Option<&str>, cause: TwoStageCause| TwoStageError {
        stage,
        rationale: rationale.map(str::to_string),
        source: cause,
    };

    let bundle = render_prompt_for(objective, stage1_mode, code, Some(cfg_image), None)
        .map_err(|e| fail(1, None, e.into()))?;
    let rationale = provider
        .complete(&ModelRequest::with_settings(settings, bundle))
        .map_err(|e| fail(1, None, e.into()))?
        .text;

    let bundle = render_prompt_for(objective, PromptMode::MMCotStage2, code, None, Some(&rationale))
        .map_err(|e| fail(2, Some(&rationale), e.into()))?;
    let final_answer = provider
        .complete(&ModelRequest::with_settings(settings, bundle))
        .map_err(|e| fail(2, Some(&rationale), e.into()))?
        .text;
    Ok(TwoStageOutput {
        rationale,
        final_answer,
    })
}
