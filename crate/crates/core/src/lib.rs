//! ELIZA as a reference interpreter and as an attention-program construction,
//! plus the synthetic data generator and evaluation harness built around them.

pub mod analysis;
pub mod construction;
pub mod datagen;
pub mod engine;
pub mod fixtures;
pub mod script;
pub mod word;

pub use engine::{DialogueState, Turn, TurnMeta, TurnType};
pub use script::{Script, ScriptError, Template};
pub use word::Word;
