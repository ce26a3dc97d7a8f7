//! Word-level vocabulary with fixed special ids.
//!
//! Ids `0..8` are reserved for the special tokens; ordinary surfaces follow
//! in descending frequency order, ties broken by the lexicographically
//! smaller surface. The on-disk format is one `<id>\t<surface>` line per
//! entry, specials first.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{normalize, Document};
use crate::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const CLS: TokenId = 1;
pub const SEP: TokenId = 2;
pub const MASK: TokenId = 3;
pub const UNK: TokenId = 4;
pub const NOM: TokenId = 5;
pub const ACC: TokenId = 6;
pub const DAT: TokenId = 7;

pub const SPECIALS: [&str; 8] = ["[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]", "[NOM]", "[ACC]", "[DAT]"];

pub fn is_special(id: TokenId) -> bool {
    (id as usize) < SPECIALS.len()
}

/// Special tokens that can never be selected as an answer. `[CLS]` is absent:
/// at position 1 it doubles as the dummy "no in-context argument" token.
/// `[UNK]` stands for a real (rare) word and stays selectable.
pub fn is_unselectable(id: TokenId) -> bool {
    matches!(id, PAD | SEP | MASK | NOM | ACC | DAT)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, TokenId>,
    surface_of: Vec<String>,
}

impl Vocabulary {
    fn with_specials() -> Self {
        let mut v = Vocabulary {
            id_of: HashMap::new(),
            surface_of: Vec::new(),
        };
        for s in SPECIALS {
            v.push(s.to_string());
        }
        v
    }

    fn push(&mut self, surface: String) {
        let id = self.surface_of.len() as TokenId;
        self.id_of.insert(surface.clone(), id);
        self.surface_of.push(surface);
    }

    /// Every surface seen at least `min_count` times gets an id.
    pub fn build(docs: &[Document], min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be at least 1".into()));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            for sentence in &doc.sentences {
                for word in sentence.words() {
                    *counts.entry(normalize(&word.surface)).or_default() += 1;
                }
            }
        }
        let mut entries: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(s, c)| *c >= min_count && !SPECIALS.contains(&s.as_str()))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut v = Self::with_specials();
        for (surface, _) in entries {
            v.push(surface);
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.surface_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface_of.is_empty()
    }

    /// Looks up a surface after normalization; unknown surfaces map to `[UNK]`.
    pub fn id(&self, surface: &str) -> TokenId {
        self.id_of.get(&normalize(surface)).copied().unwrap_or(UNK)
    }

    pub fn get(&self, surface: &str) -> Option<TokenId> {
        self.id_of.get(&normalize(surface)).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surface_of.get(id as usize).map(String::as_str)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, s) in self.surface_of.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{s}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut v = Vocabulary {
            id_of: HashMap::new(),
            surface_of: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (id, surface) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i + 1, "expected `<id>\\t<surface>`".into()))?;
            let id: usize = id.parse().map_err(|e| parse_err(i + 1, format!("bad id: {e}")))?;
            if id != v.surface_of.len() {
                return Err(parse_err(i + 1, format!("expected id {}, found {id}", v.surface_of.len())));
            }
            if id < SPECIALS.len() && surface != SPECIALS[id] {
                return Err(parse_err(i + 1, format!("special id {id} must be {}", SPECIALS[id])));
            }
            if v.id_of.contains_key(surface) {
                return Err(parse_err(i + 1, format!("duplicate surface `{surface}`")));
            }
            v.push(surface.to_string());
        }
        if v.len() < SPECIALS.len() {
            return Err(parse_err(v.len() + 1, "vocabulary is missing special tokens".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ParsedSentence, Phrase, Pos, Word};

    fn doc(words: &[&str]) -> Document {
        Document {
            id: "d".into(),
            sentences: vec![ParsedSentence {
                phrases: vec![Phrase {
                    words: words.iter().map(|w| Word::new(*w, Pos::Noun)).collect(),
                }],
            }],
        }
    }

    #[test]
    fn threshold_maps_rare_words_to_unk() {
        let v = Vocabulary::build(&[doc(&["a", "a", "a", "b"])], 2).unwrap();
        assert_eq!(v.id("a"), 8);
        assert_eq!(v.id("b"), UNK);
        assert_eq!(v.len(), 9);
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let v = Vocabulary::build(&[doc(&["a", "a", "a", "b"])], 1).unwrap();
        assert_eq!(v.id("a"), 8);
        assert_eq!(v.id("b"), 9);
    }

    #[test]
    fn ties_are_lexicographic() {
        let v = Vocabulary::build(&[doc(&["zeta", "alpha", "mid", "mid"])], 1).unwrap();
        assert_eq!(v.id("mid"), 8);
        assert_eq!(v.id("alpha"), 9);
        assert_eq!(v.id("zeta"), 10);
    }

    #[test]
    fn zero_min_count_is_rejected() {
        assert!(Vocabulary::build(&[], 0).is_err());
    }

    #[test]
    fn specials_are_stable() {
        let v = Vocabulary::build(&[], 1).unwrap();
        for (i, s) in SPECIALS.iter().enumerate() {
            assert_eq!(v.get(s), Some(i as TokenId));
        }
        assert_eq!(v.surface(CLS), Some("[CLS]"));
    }

    #[test]
    fn tsv_roundtrip() {
        let v = Vocabulary::build(&[doc(&["x", "y", "y", "e\u{301}"])], 1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        v.save(f.path()).unwrap();
        let back = Vocabulary::load(f.path()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("\u{e9}"), v.id("e\u{301}"));
    }

    #[test]
    fn load_rejects_out_of_order_ids() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let mut text = Vocabulary::build(&[], 1).unwrap().to_tsv();
        text.push_str("9\tfoo\n");
        std::fs::write(f.path(), text).unwrap();
        assert!(matches!(Vocabulary::load(f.path()), Err(Error::Parse { line: 9, .. })));
    }

    proptest::proptest! {
        #[test]
        fn surface_id_roundtrip(words in proptest::collection::vec("[a-e]{1,3}", 1..40)) {
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let v = Vocabulary::build(&[doc(&refs)], 1).unwrap();
            for w in &words {
                let id = v.id(w);
                proptest::prop_assert_eq!(v.surface(id), Some(w.as_str()));
            }
        }
    }
}
