//! Phrase-chunked parsed text and noun phrase extraction.
//!
//! Input is produced by an external dependency parser: each sentence is a
//! sequence of phrases (chunks), each phrase a sequence of POS-tagged words.
//! Tags are collapsed into a closed six-way alphabet at ingestion.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Verb,
    Symbol,
    Particle,
    Alphanum,
    Other,
}

impl Pos {
    pub const ALL: [Pos; 6] = [
        Pos::Noun,
        Pos::Verb,
        Pos::Symbol,
        Pos::Particle,
        Pos::Alphanum,
        Pos::Other,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    #[serde(rename = "s")]
    pub surface: String,
    #[serde(rename = "p")]
    pub pos: Pos,
}

impl Word {
    pub fn new(surface: impl Into<String>, pos: Pos) -> Self {
        Word {
            surface: surface.into(),
            pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrase {
    pub words: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub phrases: Vec<Phrase>,
}

impl ParsedSentence {
    /// Words in sentence order, flattened across phrases.
    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.phrases.iter().flat_map(|p| p.words.iter())
    }

    pub fn word_count(&self) -> usize {
        self.phrases.iter().map(|p| p.words.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<ParsedSentence>,
}

impl Document {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.sentences.is_empty() {
            return Err(format!("document `{}` has no sentences", self.id));
        }
        for (si, s) in self.sentences.iter().enumerate() {
            if s.phrases.is_empty() {
                return Err(format!("sentence {si} has no phrases"));
            }
            for (pi, p) in s.phrases.iter().enumerate() {
                if p.words.is_empty() {
                    return Err(format!("sentence {si}, phrase {pi} has no words"));
                }
                if p.words.iter().any(|w| w.surface.is_empty()) {
                    return Err(format!("sentence {si}, phrase {pi} has an empty surface"));
                }
            }
        }
        Ok(())
    }
}

/// Loads a line-delimited parsed corpus. Blank lines are skipped; an empty
/// file yields an empty list.
pub fn load_parsed_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let doc: Document = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        doc.validate().map_err(parse_err)?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_parsed_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    crate::jsonl::write(path, docs)
}

/// Canonical form used for vocabulary lookup and surface matching: NFC, no
/// case folding.
pub fn normalize(surface: &str) -> String {
    surface.nfc().collect()
}

/// A noun phrase located by word indices within one sentence (0-based,
/// `word_end` inclusive).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NpSpan {
    pub sentence_index: usize,
    pub word_start: usize,
    pub word_end: usize,
    pub surface_key: String,
}

impl NpSpan {
    pub fn len(&self) -> usize {
        self.word_end - self.word_start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Reduces one phrase to its noun phrase, if any, returning the kept word
/// range `[start, end)` within the phrase.
///
/// Phrases must contain a noun and no verb. Trailing words are dropped until
/// a noun is last, then leading symbols are dropped. Whatever is left is the
/// phrase's noun phrase, including remainders made only of symbols or
/// alphanumerics.
pub fn noun_phrase_range(words: &[Word]) -> Option<(usize, usize)> {
    let has_noun = words.iter().any(|w| w.pos == Pos::Noun);
    let has_verb = words.iter().any(|w| w.pos == Pos::Verb);
    if !has_noun || has_verb {
        return None;
    }
    let end = words.iter().rposition(|w| w.pos == Pos::Noun)? + 1;
    let start = words[..end].iter().position(|w| w.pos != Pos::Symbol)?;
    Some((start, end))
}

/// At most one span per phrase, in phrase order.
pub fn extract_noun_phrases(sentence: &ParsedSentence, sentence_index: usize) -> Vec<NpSpan> {
    let mut spans = Vec::new();
    let mut offset = 0;
    for phrase in &sentence.phrases {
        if let Some((start, end)) = noun_phrase_range(&phrase.words) {
            let surface_key = phrase.words[start..end]
                .iter()
                .map(|w| normalize(&w.surface))
                .collect();
            spans.push(NpSpan {
                sentence_index,
                word_start: offset + start,
                word_end: offset + end - 1,
                surface_key,
            });
        }
        offset += phrase.words.len();
    }
    spans
}
