//! Small hand-written scripts used by tests, the Turing demo and the
//! null-cycling comparison.

use crate::script::{NullCycleMode, Script};

/// Unary increment: `0 $` is rewritten to `1 x $` once, then control passes
/// to the `done` template which echoes the tape.
pub const INCREMENT: &str = r#"{
  "vocab": ["x", "$", "o", "h", "n"],
  "templates": [
    {"id": "done", "pattern": "0 $"},
    {"id": "null", "pattern": "0"}
  ],
  "rules": {
    "done": [{"prefix": ["h", "h"], "body": [1, "$"]}],
    "null": [{"prefix": ["n", "n"], "body": []}]
  },
  "null_template_id": "null",
  "pretransforms": [
    {"pattern": "0 $", "rule": {"prefix": [], "body": [1, "x", "$"]}, "target": "done"}
  ]
}
"#;

/// Parity of a unary tape: each restart cycle erases one `x` and flips the
/// end marker between `$` (even) and `o` (odd).
pub const PARITY: &str = r#"{
  "vocab": ["x", "$", "o", "h", "n"],
  "templates": [
    {"id": "odd", "pattern": "o"},
    {"id": "even", "pattern": "$"},
    {"id": "null", "pattern": "0"}
  ],
  "rules": {
    "odd": [{"prefix": ["h", "o"], "body": []}],
    "even": [{"prefix": ["h", "$"], "body": []}],
    "null": [{"prefix": ["n", "n"], "body": []}]
  },
  "null_template_id": "null",
  "pretransforms": [
    {"pattern": "0 x $", "rule": {"prefix": [], "body": [1, "o"]}, "target": "restart"},
    {"pattern": "0 x o", "rule": {"prefix": [], "body": [1, "$"]}, "target": "restart"}
  ]
}
"#;

/// Memory template `m 0`, one dequeue rule, and three null rules whose
/// prefixes `n a`, `n b`, `n c` stand for null rules 1, 2 and 3.
pub const NULL_CYCLING: &str = r#"{
  "vocab": ["m", "z", "n", "a", "b", "c", "q", "e", "d"],
  "templates": [
    {"id": "mem", "pattern": "m 0"},
    {"id": "null", "pattern": "0"}
  ],
  "rules": {
    "mem": [{"prefix": ["e", "q"], "body": []}],
    "null": [
      {"prefix": ["n", "a"], "body": []},
      {"prefix": ["n", "b"], "body": []},
      {"prefix": ["n", "c"], "body": []}
    ]
  },
  "memory": {"template_id": "mem", "dequeue_rules": [{"prefix": ["d", "q"], "body": [2]}]},
  "null_template_id": "null"
}
"#;

/// The null / memory / null / null conversation for [`NULL_CYCLING`].
pub const NULL_CYCLING_TURNS: [&str; 4] = ["z", "m a", "z", "z"];

pub fn increment() -> Script {
    Script::parse(INCREMENT).expect("increment fixture is valid")
}

pub fn parity() -> Script {
    Script::parse(PARITY).expect("parity fixture is valid")
}

pub fn null_cycling(mode: NullCycleMode) -> Script {
    let mut s = Script::parse(NULL_CYCLING).expect("null-cycling fixture is valid");
    s.null_cycle_mode = mode;
    s
}

/// Looks up a Turing fixture by name.
pub fn turing(name: &str) -> Option<Script> {
    match name {
        "increment" => Some(increment()),
        "parity" => Some(parity()),
        _ => None,
    }
}
