//! The seven stance categories and their numeric codes.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_LABELS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StanceLabel {
    AntiHamas = 0,
    AntiIsrael = 1,
    AntiPalestino = 2,
    SinPostura = 3,
    NoRelacionado = 4,
    ProIsrael = 5,
    ProPalestino = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("invalid label code {0}: expected 0..=6")]
pub struct InvalidLabel(pub i64);

impl StanceLabel {
    pub const ALL: [StanceLabel; NUM_LABELS] = [
        StanceLabel::AntiHamas,
        StanceLabel::AntiIsrael,
        StanceLabel::AntiPalestino,
        StanceLabel::SinPostura,
        StanceLabel::NoRelacionado,
        StanceLabel::ProIsrael,
        StanceLabel::ProPalestino,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: i64) -> Result<Self, InvalidLabel> {
        usize::try_from(code)
            .ok()
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or(InvalidLabel(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            StanceLabel::AntiHamas => "ANTI_HAMAS",
            StanceLabel::AntiIsrael => "ANTI_ISRAEL",
            StanceLabel::AntiPalestino => "ANTI_PALESTINO",
            StanceLabel::SinPostura => "SIN_POSTURA",
            StanceLabel::NoRelacionado => "NO_RELACIONADO",
            StanceLabel::ProIsrael => "PRO_ISRAEL",
            StanceLabel::ProPalestino => "PRO_PALESTINO",
        }
    }

    /// Human-facing name used in charts and summaries.
    pub fn display_name(self) -> &'static str {
        match self {
            StanceLabel::AntiHamas => "Anti-Hamás",
            StanceLabel::AntiIsrael => "Anti-Israel",
            StanceLabel::AntiPalestino => "Anti-Palestino",
            StanceLabel::SinPostura => "Sin Postura",
            StanceLabel::NoRelacionado => "No Relacionado",
            StanceLabel::ProIsrael => "Pro-Israel",
            StanceLabel::ProPalestino => "Pro-Palestino",
        }
    }

    /// Inclusion rule shown to annotators. Judged on explicit wording only.
    pub fn rubric(self) -> &'static str {
        match self {
            StanceLabel::AntiHamas => {
                "Explicitly attacks Hamas, calls it a terrorist group, or names it as the party responsible for the conflict."
            }
            StanceLabel::AntiIsrael => {
                "Blames Israel, its government or its leaders for the conflict, or accuses the state of immoral acts."
            }
            StanceLabel::AntiPalestino => {
                "Blames the Palestinian population for the conflict or for its own casualties, or attacks its religion, beliefs or politics."
            }
            StanceLabel::SinPostura => {
                "Takes no explicit side: rejects the war in general, criticises both sides alike, or comments on broadcasters, presenters or governments without siding with either party."
            }
            StanceLabel::NoRelacionado => "Has no connection to the conflict under study.",
            StanceLabel::ProIsrael => {
                "Supports Israel or its right to self-defence, or voices concern for the Israeli population."
            }
            StanceLabel::ProPalestino => {
                "Supports the Palestinian people, or voices concern for the population of the Gaza Strip."
            }
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<u8> for StanceLabel {
    type Error = InvalidLabel;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Self::from_code(code as i64)
    }
}

/// Wire form of one schema entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInfo {
    pub code: u8,
    pub name: String,
    pub display_name: String,
    pub rubric: String,
}

pub fn schema() -> Vec<LabelInfo> {
    StanceLabel::ALL
        .iter()
        .map(|l| LabelInfo {
            code: l.code(),
            name: l.name().to_string(),
            display_name: l.display_name().to_string(),
            rubric: l.rubric().to_string(),
        })
        .collect()
}
