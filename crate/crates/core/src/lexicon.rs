//! Identifier vocabularies that drive the check triggers.
//!
//! Matching is case-insensitive and works on identifier words: `skipValidation`,
//! `skip_validation` and `SKIP-VALIDATION` all split into `["skip", "validation"]`.
//! A lexicon entry matches when its words occur as a contiguous run inside the
//! candidate's words. `*` inside an entry matches exactly one arbitrary word, so
//! `disable_*` matches `disable_auth_check` and `disableTls`.
//!
//! Override files are flat TOML documents mapping a lexicon name to a word list:
//!
//! ```toml
//! audit = ["audit", "evidence", "journal", "ledger", "record_event", "log_event"]
//! bypass = ["skip_validation", "force", "bypass", "no_verify", "disable_*", "unsafe"]
//! ```
//!
//! Keys that are not listed replace nothing; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("unknown lexicon key `{0}`")]
    UnknownKey(String),
    #[error("lexicon `{0}` must not be empty")]
    Empty(String),
    #[error("invalid lexicon document: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read lexicon file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Split an identifier (or any short text) into lowercase words.
///
/// Separators are any non-alphanumeric characters; camelCase and
/// `HTTPServer`-style boundaries also split.
pub fn split_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in text.split(|c: char| !c.is_alphanumeric()) {
        if chunk.is_empty() {
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let prev = chars[i - 1];
            let cur = chars[i];
            let next = chars.get(i + 1).copied();
            let lower_to_upper = (prev.is_lowercase() || prev.is_ascii_digit()) && cur.is_uppercase();
            let acronym_end =
                prev.is_uppercase() && cur.is_uppercase() && next.is_some_and(|n| n.is_lowercase());
            if lower_to_upper || acronym_end {
                words.push(chars[start..i].iter().collect::<String>().to_lowercase());
                start = i;
            }
        }
        words.push(chars[start..].iter().collect::<String>().to_lowercase());
    }
    words
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pattern {
    source: String,
    words: Vec<String>,
}

impl Pattern {
    fn new(entry: &str) -> Self {
        let words = entry
            .split(|c: char| !c.is_alphanumeric() && c != '*')
            .filter(|s| !s.is_empty())
            .flat_map(|part| {
                if part == "*" {
                    vec!["*".to_string()]
                } else {
                    split_words(part)
                }
            })
            .collect();
        Pattern { source: entry.to_string(), words }
    }

    fn occurs_in(&self, words: &[String]) -> bool {
        let n = self.words.len();
        if n == 0 || n > words.len() {
            return false;
        }
        words.windows(n).any(|window| {
            window
                .iter()
                .zip(&self.words)
                .all(|(w, p)| p == "*" || w == p)
        })
    }

    fn equals(&self, words: &[String]) -> bool {
        self.words.len() == words.len()
            && words.iter().zip(&self.words).all(|(w, p)| p == "*" || w == p)
    }
}

/// A single named vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    patterns: Vec<Pattern>,
}

impl Lexicon {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            patterns: entries.into_iter().map(|e| Pattern::new(e.as_ref())).collect(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.patterns.iter().map(|p| p.source.as_str())
    }

    /// True when any entry occurs as a contiguous word run in `words`.
    pub fn matches_words(&self, words: &[String]) -> bool {
        self.patterns.iter().any(|p| p.occurs_in(words))
    }

    /// True when any entry occurs in the words of `text`.
    pub fn matches(&self, text: &str) -> bool {
        self.matches_words(&split_words(text))
    }

    /// True when `text` consists of exactly one entry's words.
    pub fn matches_exactly(&self, text: &str) -> bool {
        let words = split_words(text);
        self.patterns.iter().any(|p| p.equals(&words))
    }
}

macro_rules! lexicon_set {
    ($( $(#[$doc:meta])* $field:ident = [$($word:expr),* $(,)?] ),* $(,)?) => {
        /// The complete set of vocabularies consulted by the rule engine.
        #[derive(Debug, Clone, PartialEq, Eq)]
        pub struct Lexicons {
            $( $(#[$doc])* pub $field: Lexicon, )*
        }

        impl Default for Lexicons {
            fn default() -> Self {
                Lexicons {
                    $( $field: Lexicon::new([$($word),*]), )*
                }
            }
        }

        impl Lexicons {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn slot(&mut self, key: &str) -> Option<&mut Lexicon> {
                match key {
                    $( stringify!($field) => Some(&mut self.$field), )*
                    _ => None,
                }
            }

            /// Current word lists keyed by lexicon name.
            pub fn to_map(&self) -> BTreeMap<String, Vec<String>> {
                let mut map = BTreeMap::new();
                $( map.insert(
                    stringify!($field).to_string(),
                    self.$field.entries().map(str::to_string).collect(),
                ); )*
                map
            }
        }
    };
}

lexicon_set! {
    /// String or constant values that signal success (`"ok"`, `Status.OK`).
    success_status = ["ok", "success", "succeeded", "successful", "done", "completed", "healthy"],
    /// Object keys whose value carries a status code or token.
    status_keys = ["status", "state", "result", "outcome", "status_code", "code"],
    /// Object keys that signal success when set to `true`.
    success_flags = ["success", "ok", "succeeded"],
    audit = ["audit", "evidence", "journal", "ledger", "record_event", "log_event"],
    bypass = ["skip_validation", "force", "bypass", "no_verify", "disable_*", "unsafe"],
    environment = ["env", "environ", "environment", "NODE_ENV", "DEBUG", "dev", "development", "staging"],
    guard = ["validate", "verify", "auth", "authenticate", "authorize", "check"],
    /// Callee names that start background work.
    spawn = [
        "create_task", "ensure_future", "Thread", "Process", "start_new_thread",
        "submit", "run_in_executor", "spawn", "Promise",
    ],
    /// Methods that attach supervision to a spawned task.
    continuation = ["then", "catch", "finally", "join", "result", "add_done_callback", "exception", "wait"],
    random = ["random", "randint", "randrange", "randn", "rand", "shuffle", "uniform", "gauss"],
    seed = ["seed"],
    sampling_params = ["temperature"],
    fallback = ["fallback", "cache", "cached", "default", "defaults", "stale", "placeholder", "backup"],
    posture = ["confidence", "degraded", "partial", "stale", "fallback"],
    failure_assert = ["raises", "throws", "throw", "rejects", "reject"],
    retry = ["retry", "retries", "retrying", "backoff", "tenacity"],
    attempt = ["attempt", "attempts", "retry", "retries", "tries"],
    sleep = ["sleep", "backoff", "delay", "set_timeout"],
    write = ["post", "put", "insert", "update", "write", "send", "publish"],
    idempotency = ["idempotency", "idempotent", "dedup", "request_id"],
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(transparent)]
struct OverrideDoc(BTreeMap<String, Vec<String>>);

impl Lexicons {
    /// Apply a TOML override document on top of `self`.
    pub fn apply_overrides(&mut self, document: &str) -> Result<(), LexiconError> {
        let doc: OverrideDoc = toml::from_str(document)?;
        for (key, words) in doc.0 {
            if words.is_empty() {
                return Err(LexiconError::Empty(key));
            }
            let slot = self.slot(&key).ok_or_else(|| LexiconError::UnknownKey(key.clone()))?;
            *slot = Lexicon::new(words);
        }
        Ok(())
    }

    pub fn from_override_file(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut lexicons = Lexicons::default();
        lexicons.apply_overrides(&text)?;
        Ok(lexicons)
    }
}
