use std::collections::BTreeMap;

use num_rational::Rational64;
use thiserror::Error;

use super::primitives::{select, selector_width};
use crate::word::{Word, ELIZA, USER};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Rat(Rational64),
    Word(Word),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("feature `{0}` already written")]
    Overwrite(String),
    #[error("feature `{name}` has length {got}, tensor has {want}")]
    Length { name: String, got: usize, want: usize },
}

/// Named per-position features over one token sequence. Features can be added
/// but never replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqTensor {
    tokens: Vec<Word>,
    features: BTreeMap<String, Vec<Value>>,
}

impl SeqTensor {
    pub fn new(tokens: Vec<Word>) -> Self {
        SeqTensor { tokens, features: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Word] {
        &self.tokens
    }

    pub fn add(&mut self, name: &str, values: Vec<Value>) -> Result<(), TensorError> {
        if values.len() != self.len() {
            return Err(TensorError::Length { name: name.into(), got: values.len(), want: self.len() });
        }
        if self.features.contains_key(name) {
            return Err(TensorError::Overwrite(name.into()));
        }
        self.features.insert(name.into(), values);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[Value]> {
        self.features.get(name).map(Vec::as_slice)
    }

    pub fn ints(&self, name: &str) -> Option<Vec<i64>> {
        self.get(name)?.iter().map(Value::as_int).collect()
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.features.keys().map(String::as_str)
    }
}

pub fn is_delimiter(w: &Word) -> bool {
    w == USER || w == ELIZA
}

/// Adds `segment_ids` (delimiters seen so far) and `segment_positions`
/// (offset inside the segment, delimiter = 1), both clamped.
pub fn segment(tokens: &[Word], max_segments: usize, max_segment_length: usize) -> SeqTensor {
    let mut t = SeqTensor::new(tokens.to_vec());
    let ids = selector_width(&select(tokens, tokens, |_, k| is_delimiter(k)), Some(max_segments));
    let pos = selector_width(&select(&ids, &ids, |q, k| q == k), Some(max_segment_length));
    t.add("segment_ids", ids.iter().map(|&v| Value::Int(v as i64)).collect()).expect("fresh tensor");
    t.add("segment_positions", pos.iter().map(|&v| Value::Int(v as i64)).collect()).expect("fresh tensor");
    t
}
