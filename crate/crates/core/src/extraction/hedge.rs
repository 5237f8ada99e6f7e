use std::path::Path;

use crate::schema::fold_term;

const DEFAULT_PHRASES: &[&str] = &[
    "possible",
    "possibly",
    "probable",
    "suspected",
    "suspicious for",
    "cannot exclude",
    "cannot be excluded",
    "equivocal",
    "questionable",
];

/// Phrases whose presence in a raw value routes the field to `ambiguous`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HedgeLexicon {
    phrases: Vec<String>,
}

impl Default for HedgeLexicon {
    fn default() -> Self {
        HedgeLexicon::new(DEFAULT_PHRASES.iter().copied())
    }
}

/// Lowercases, turns everything but letters and digits into spaces and
/// pads with single spaces, so phrase tests become word-aligned substring
/// tests.
fn words(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    format!(" {} ", fold_term(&cleaned))
}

impl HedgeLexicon {
    pub fn new<'a>(phrases: impl IntoIterator<Item = &'a str>) -> Self {
        let mut phrases: Vec<String> = phrases
            .into_iter()
            .map(|p| words(p).trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        phrases.sort();
        phrases.dedup();
        HedgeLexicon { phrases }
    }

    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Self {
        HedgeLexicon::new(
            source
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(HedgeLexicon::parse(&std::fs::read_to_string(path)?))
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    /// The first lexicon phrase occurring as whole words in `text`.
    pub fn matches(&self, text: &str) -> Option<&str> {
        let hay = words(text);
        self.phrases
            .iter()
            .find(|p| hay.contains(&format!(" {p} ")))
            .map(String::as_str)
    }
}
