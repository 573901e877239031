use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Delimiter that opens a user turn.
pub const USER: &str = "u:";
/// Delimiter that opens an ELIZA turn.
pub const ELIZA: &str = "e:";
/// Terminates every turn.
pub const PERIOD: &str = ".";
/// Beginning-of-sequence marker, first token of every conversation.
pub const BOS: &str = "BOS";

pub const RESERVED: [&str; 4] = [USER, ELIZA, PERIOD, BOS];

/// One vocabulary token. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Arc<str>);

impl Word {
    pub fn new(s: impl AsRef<str>) -> Self {
        Word(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_reserved(&self) -> bool {
        RESERVED.contains(&self.as_str())
    }

    pub fn user() -> Self {
        Word::new(USER)
    }

    pub fn eliza() -> Self {
        Word::new(ELIZA)
    }

    pub fn period() -> Self {
        Word::new(PERIOD)
    }

    pub fn bos() -> Self {
        Word::new(BOS)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for Word {
    fn from(s: &str) -> Self {
        Word::new(s)
    }
}

impl From<String> for Word {
    fn from(s: String) -> Self {
        Word(Arc::from(s))
    }
}

impl Borrow<str> for Word {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for Word {
    fn eq(&self, other: &str) -> bool {
        &*self.0 == other
    }
}

impl PartialEq<&str> for Word {
    fn eq(&self, other: &&str) -> bool {
        &*self.0 == *other
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Word::from(s))
    }
}

/// Splits a space-separated string into words.
pub fn words(s: &str) -> Vec<Word> {
    s.split_whitespace().map(Word::from).collect()
}

/// Joins words with single spaces.
pub fn join(ws: &[Word]) -> String {
    let mut out = String::new();
    for (i, w) in ws.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(w.as_str());
    }
    out
}

/// The 26 lowercase letters.
pub fn default_vocab() -> Vec<Word> {
    (b'a'..=b'z').map(|c| Word::new((c as char).to_string())).collect()
}
