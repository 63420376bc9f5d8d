use serde::{Deserialize, Serialize};

use super::CoderError;
use crate::codebook::Codebook;
use crate::corpus::Utterance;

pub const DEFAULT_CONTEXT_WINDOW: usize = 5;

pub const ROLE_INSTRUCTION: &str = "You are an expert coder of collaborative problem solving (CPS) \
discourse. Assign exactly one code from the coding framework below to the current message, \
using the preceding messages from the same group as context.";

pub const OUTPUT_INSTRUCTION: &str = "Please output the code only (e.g., W1, S2, C).";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    #[default]
    ZeroShot,
    FewShot,
}

impl ShotMode {
    pub fn label(self) -> &'static str {
        match self {
            ShotMode::ZeroShot => "zero_shot",
            ShotMode::FewShot => "few_shot",
        }
    }
}

fn cell(s: &str) -> String {
    s.replace('&', "\\&")
}

/// Tabular rendering of the codebook. The example column appears only in few-shot mode.
pub fn render_codebook(codebook: &Codebook, mode: ShotMode) -> String {
    let few = mode == ShotMode::FewShot;
    let mut out = String::new();
    out.push_str(if few {
        "\\begin{tabular}{lllll}\n"
    } else {
        "\\begin{tabular}{llll}\n"
    });
    out.push_str("Interaction level & CPS behavior & Code & Description");
    if few {
        out.push_str(" & Example");
    }
    out.push_str(" \\\\\n\\hline\n");
    for e in codebook.entries() {
        out.push_str(&format!(
            "{} & {} & {} & {}",
            e.level.display_name(),
            cell(&e.behavior_name),
            e.code,
            cell(&e.description)
        ));
        if few {
            out.push_str(&format!(" & {}", cell(&e.example)));
        }
        out.push_str(" \\\\\n");
    }
    out.push_str("\\end{tabular}");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub codebook_rendering: String,
    /// Preceding messages, oldest first.
    pub context: Vec<String>,
    pub current_message: String,
    pub shot_mode: ShotMode,
}

impl PromptSpec {
    /// Spec for `utterances[index]`, with up to `window` earlier messages (by `seq`)
    /// from the same group.
    pub fn for_utterance(
        codebook: &Codebook,
        utterances: &[Utterance],
        index: usize,
        mode: ShotMode,
        window: usize,
    ) -> Self {
        let current = &utterances[index];
        PromptSpec {
            codebook_rendering: render_codebook(codebook, mode),
            context: preceding(utterances, current, window),
            current_message: current.text.clone(),
            shot_mode: mode,
        }
    }
}

fn preceding(utterances: &[Utterance], current: &Utterance, window: usize) -> Vec<String> {
    let mut earlier: Vec<&Utterance> = utterances
        .iter()
        .filter(|u| u.group_id == current.group_id && u.seq < current.seq)
        .collect();
    earlier.sort_by_key(|u| u.seq);
    let skip = earlier.len().saturating_sub(window);
    earlier[skip..].iter().map(|u| u.text.clone()).collect()
}

/// Rendered prompt, split into the chat system and user turns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
    pub current_message: String,
}

impl Prompt {
    /// Full text, used for hashing and single-turn transports.
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

pub fn build_prompt(spec: &PromptSpec) -> Result<Prompt, CoderError> {
    if spec.current_message.trim().is_empty() {
        return Err(CoderError::EmptyMessage);
    }
    let mut user = String::new();
    user.push_str("Coding framework:\n");
    user.push_str(&spec.codebook_rendering);
    user.push_str("\n\nContext:\n");
    if spec.context.is_empty() {
        user.push_str("(none)\n");
    }
    for (i, m) in spec.context.iter().enumerate() {
        user.push_str(&format!("[{}] {}\n", i + 1, m));
    }
    user.push_str("\nCurrent message:\n");
    user.push_str(&spec.current_message);
    user.push_str("\n\nOutput format:\n");
    user.push_str(OUTPUT_INSTRUCTION);
    Ok(Prompt {
        system: ROLE_INSTRUCTION.to_string(),
        user,
        current_message: spec.current_message.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(group: &str, seq: u64, text: &str) -> Utterance {
        Utterance {
            utterance_id: format!("{group}-{seq}"),
            group_id: group.into(),
            week: 0,
            seq,
            speaker_id: "s".into(),
            text: text.into(),
            code_human: None,
            code_pred: None,
        }
    }

    #[test]
    fn zero_shot_has_no_example_column() {
        let cb = Codebook::builtin();
        let z = render_codebook(&cb, ShotMode::ZeroShot);
        assert!(!z.contains("Example"));
        assert!(render_codebook(&cb, ShotMode::FewShot).contains("& Example"));
        assert_eq!(z.lines().count(), 14);
    }

    #[test]
    fn sections_in_order() {
        let spec = PromptSpec {
            codebook_rendering: render_codebook(&Codebook::builtin(), ShotMode::ZeroShot),
            context: vec!["hello".into(), "hi".into()],
            current_message: "let's split the work".into(),
            shot_mode: ShotMode::ZeroShot,
        };
        let text = build_prompt(&spec).unwrap().text();
        let pos = |s: &str| text.find(s).unwrap();
        assert!(pos(ROLE_INSTRUCTION) < pos("Coding framework:"));
        assert!(pos("Coding framework:") < pos("Context:"));
        assert!(pos("Context:") < pos("Current message:"));
        assert!(pos("Current message:") < pos(OUTPUT_INSTRUCTION));
        assert!(text.ends_with(OUTPUT_INSTRUCTION));
        assert!(text.contains("[2] hi\n") && !text.contains("[3]"));
    }

    #[test]
    fn empty_message_rejected() {
        let spec = PromptSpec {
            codebook_rendering: String::new(),
            context: vec![],
            current_message: "  ".into(),
            shot_mode: ShotMode::ZeroShot,
        };
        assert!(matches!(build_prompt(&spec), Err(CoderError::EmptyMessage)));
    }

    #[test]
    fn context_stays_within_group_and_window() {
        let us: Vec<Utterance> = (0..8)
            .map(|i| utt("A", i, &format!("a{i}")))
            .chain((0..8).map(|i| utt("B", i, &format!("b{i}"))))
            .collect();
        let cb = Codebook::builtin();
        let s = PromptSpec::for_utterance(&cb, &us, 7, ShotMode::ZeroShot, 5);
        assert_eq!(s.context, ["a2", "a3", "a4", "a5", "a6"]);
        let s = PromptSpec::for_utterance(&cb, &us, 10, ShotMode::ZeroShot, 5);
        assert_eq!(s.context, ["b0", "b1"]);
        let s = PromptSpec::for_utterance(&cb, &us, 0, ShotMode::ZeroShot, 5);
        assert!(s.context.is_empty());
    }
}
