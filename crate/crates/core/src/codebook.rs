//! The ten-code CPS behaviour scheme and its grouping into interaction levels.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A behaviour code from the coding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Code {
    I,
    O1,
    O2,
    W1,
    W2,
    W3,
    S1,
    S2,
    S3,
    C1,
}

/// Interaction level a code belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Irrelevant,
    Operation,
    Wayfinding,
    SenseMaking,
    Creation,
}

/// The four task subsystems fed into the synergy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    O,
    W,
    S,
    C,
}

/// Task-relevant codes in panel column order.
pub const TASK_CODES: [Code; 9] = [
    Code::O1,
    Code::O2,
    Code::W1,
    Code::W2,
    Code::W3,
    Code::S1,
    Code::S2,
    Code::S3,
    Code::C1,
];

impl Code {
    pub const ALL: [Code; 10] = [
        Code::I,
        Code::O1,
        Code::O2,
        Code::W1,
        Code::W2,
        Code::W3,
        Code::S1,
        Code::S2,
        Code::S3,
        Code::C1,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Code::I => "I",
            Code::O1 => "O1",
            Code::O2 => "O2",
            Code::W1 => "W1",
            Code::W2 => "W2",
            Code::W3 => "W3",
            Code::S1 => "S1",
            Code::S2 => "S2",
            Code::S3 => "S3",
            Code::C1 => "C1",
        }
    }

    pub fn level(self) -> Level {
        match self {
            Code::I => Level::Irrelevant,
            Code::O1 | Code::O2 => Level::Operation,
            Code::W1 | Code::W2 | Code::W3 => Level::Wayfinding,
            Code::S1 | Code::S2 | Code::S3 => Level::SenseMaking,
            Code::C1 => Level::Creation,
        }
    }

    pub fn subsystem(self) -> Option<Subsystem> {
        self.level().subsystem()
    }

    /// Column of this code in a metric panel row, `None` for `I`.
    pub fn task_index(self) -> Option<usize> {
        TASK_CODES.iter().position(|&c| c == self)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown code token {0:?}")]
pub struct UnknownCode(pub String);

impl FromStr for Code {
    type Err = UnknownCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Code::ALL
            .iter()
            .copied()
            .find(|c| c.token() == s)
            .ok_or_else(|| UnknownCode(s.to_string()))
    }
}

impl Level {
    pub fn subsystem(self) -> Option<Subsystem> {
        match self {
            Level::Irrelevant => None,
            Level::Operation => Some(Subsystem::O),
            Level::Wayfinding => Some(Subsystem::W),
            Level::SenseMaking => Some(Subsystem::S),
            Level::Creation => Some(Subsystem::C),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Level::Irrelevant => "Irrelevant Interaction (I)",
            Level::Operation => "Operational Interaction (O)",
            Level::Wayfinding => "Wayfinding Interaction (W)",
            Level::SenseMaking => "Sense-making Interaction (S)",
            Level::Creation => "Creation Interaction (C)",
        }
    }
}

impl FromStr for Level {
    type Err = UnknownCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "irrelevant" | "i" => Ok(Level::Irrelevant),
            "operation" | "operational" | "o" => Ok(Level::Operation),
            "wayfinding" | "w" => Ok(Level::Wayfinding),
            "sensemaking" | "s" => Ok(Level::SenseMaking),
            "creation" | "c" => Ok(Level::Creation),
            _ => Err(UnknownCode(s.to_string())),
        }
    }
}

impl Subsystem {
    pub const ALL: [Subsystem; 4] = [Subsystem::O, Subsystem::W, Subsystem::S, Subsystem::C];

    pub fn codes(self) -> &'static [Code] {
        match self {
            Subsystem::O => &TASK_CODES[0..2],
            Subsystem::W => &TASK_CODES[2..5],
            Subsystem::S => &TASK_CODES[5..8],
            Subsystem::C => &TASK_CODES[8..9],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Subsystem::O => "O",
            Subsystem::W => "W",
            Subsystem::S => "S",
            Subsystem::C => "C",
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub code: Code,
    pub level: Level,
    pub behavior_name: String,
    pub description: String,
    pub example: String,
}

/// An ordered set of codebook entries, one per code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    entries: Vec<CodebookEntry>,
}

#[derive(Debug, Error)]
pub enum CodebookError {
    #[error("codebook io: {0}")]
    Io(#[from] std::io::Error),
    #[error("codebook csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    UnknownCode(#[from] UnknownCode),
    #[error("code {code} declared at level {declared:?} but belongs to {expected:?}")]
    LevelMismatch {
        code: Code,
        declared: Level,
        expected: Level,
    },
    #[error("codebook lists {0} more than once")]
    DuplicateCode(Code),
    #[error("codebook is missing {0}")]
    MissingCode(Code),
}

#[derive(Deserialize)]
struct CodebookRow {
    code: String,
    level: String,
    behavior_name: String,
    description: String,
    example: String,
}

fn entry(code: Code, name: &str, description: &str, example: &str) -> CodebookEntry {
    CodebookEntry {
        code,
        level: code.level(),
        behavior_name: name.to_string(),
        description: description.to_string(),
        example: example.to_string(),
    }
}

impl Codebook {
    /// English rendering of the ten-code scheme.
    pub fn builtin() -> Self {
        Codebook {
            entries: vec![
                entry(
                    Code::I,
                    "Irrelevant Info",
                    "Operations or messages unrelated to the task",
                    "\"Message was withdrawn\"",
                ),
                entry(
                    Code::O1,
                    "Space Setup",
                    "Initiating chat groups, creating shared documents",
                    "\"I created a group, please join\"",
                ),
                entry(
                    Code::O2,
                    "Technical Operation",
                    "Technical guidance on platform use, tools",
                    "\"How to share the screen?\"",
                ),
                entry(
                    Code::W1,
                    "Social Connection",
                    "Greetings, welcoming, checking availability",
                    "\"Hi everyone!\", \"Are you free tomorrow?\"",
                ),
                entry(
                    Code::W2,
                    "Content Link",
                    "Sharing resources, providing/asking basic info",
                    "\"Here is a related paper I found\"",
                ),
                entry(
                    Code::W3,
                    "Task Alignment",
                    "Reporting progress, encouraging peers",
                    "\"I have finished my part, keep going!\"",
                ),
                entry(
                    Code::S1,
                    "Idea Suggestion",
                    "Offering opinions, suggestions, recommendations",
                    "\"We can try case analysis, it fits our problem\"",
                ),
                entry(
                    Code::S2,
                    "Conflict Negotiation",
                    "Raising questions, pointing out disagreements",
                    "\"I disagree, let's discuss the reasons\"",
                ),
                entry(
                    Code::S3,
                    "Planning/Decision",
                    "Coordinating tasks, deciding methods",
                    "\"Let's meet Wednesday to finalize the plan\"",
                ),
                entry(
                    Code::C1,
                    "Integrative Creation",
                    "Integrating information, co-creating content",
                    "\"[document]Here's the document we've put together\"",
                ),
            ],
        }
    }

    /// Builds a codebook from entries, requiring each of the ten codes exactly once
    /// at its fixed level.
    pub fn from_entries(mut entries: Vec<CodebookEntry>) -> Result<Self, CodebookError> {
        for (i, e) in entries.iter().enumerate() {
            if e.level != e.code.level() {
                return Err(CodebookError::LevelMismatch {
                    code: e.code,
                    declared: e.level,
                    expected: e.code.level(),
                });
            }
            if entries[..i].iter().any(|prev| prev.code == e.code) {
                return Err(CodebookError::DuplicateCode(e.code));
            }
        }
        if let Some(missing) = Code::ALL
            .iter()
            .find(|c| !entries.iter().any(|e| e.code == **c))
        {
            return Err(CodebookError::MissingCode(*missing));
        }
        entries.sort_by_key(|e| e.code);
        Ok(Codebook { entries })
    }

    /// Reads an override file with columns `code, level, behavior_name, description, example`.
    pub fn from_csv_path(path: &Path) -> Result<Self, CodebookError> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut entries = Vec::new();
        for row in reader.deserialize::<CodebookRow>() {
            let row = row?;
            let code: Code = row.code.trim().parse()?;
            let level: Level = row.level.trim().parse()?;
            entries.push(CodebookEntry {
                code,
                level,
                behavior_name: row.behavior_name,
                description: row.description,
                example: row.example,
            });
        }
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    pub fn get(&self, code: Code) -> &CodebookEntry {
        self.entries
            .iter()
            .find(|e| e.code == code)
            .expect("codebook holds every code")
    }
}

impl Default for Codebook {
    fn default() -> Self {
        Self::builtin()
    }
}
