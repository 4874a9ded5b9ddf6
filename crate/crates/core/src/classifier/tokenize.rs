//! Text to tokens: lowercase alphanumeric runs plus one token per pictograph.

use icu_properties::props::ExtendedPictographic;
use icu_properties::CodePointSetData;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Drops empty strings so the no-empty-token invariant always holds.
    pub fn new(tokens: impl IntoIterator<Item = String>) -> Self {
        Self(tokens.into_iter().filter(|t| !t.is_empty()).collect())
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl From<TokenSequence> for Vec<String> {
    fn from(t: TokenSequence) -> Self {
        t.0
    }
}

fn is_regional_indicator(c: char) -> bool {
    ('\u{1F1E6}'..='\u{1F1FF}').contains(&c)
}

fn is_word_char(c: char) -> bool {
    // combining diacritics keep decomposed accents inside their word
    c.is_alphanumeric() || ('\u{0300}'..='\u{036F}').contains(&c)
}

pub fn tokenize(text: &str) -> TokenSequence {
    let pictographic = CodePointSetData::new::<ExtendedPictographic>();
    let mut tokens = Vec::new();
    for segment in text.split_word_bounds() {
        let mut run = String::new();
        let mut chars = segment.chars().peekable();
        while let Some(c) = chars.next() {
            if is_word_char(c) {
                run.extend(c.to_lowercase());
                continue;
            }
            if !run.is_empty() {
                tokens.push(std::mem::take(&mut run));
            }
            if is_regional_indicator(c) {
                // flags are pairs of regional indicators
                let mut flag = c.to_string();
                if let Some(&next) = chars.peek().filter(|&&n| is_regional_indicator(n)) {
                    flag.push(next);
                    chars.next();
                }
                tokens.push(flag);
            } else if pictographic.contains(c) {
                tokens.push(c.to_string());
            }
        }
        if !run.is_empty() {
            tokens.push(run);
        }
    }
    TokenSequence::new(tokens)
}
