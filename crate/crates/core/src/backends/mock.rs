//! Deterministic in-process transports for tests and offline runs.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::wiki::page_from_table;
use super::{Request, Transport, TransportError, TransportErrorKind};

type Handler = Box<dyn Fn(&Request) -> Result<String, TransportError> + Send + Sync>;

pub struct MockTransport {
    handler: Handler,
    calls: AtomicU64,
}

impl MockTransport {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&Request) -> Result<String, TransportError> + Send + Sync + 'static,
    {
        MockTransport {
            handler: Box::new(f),
            calls: AtomicU64::new(0),
        }
    }

    /// Exact-match lookup; unmapped input is an error.
    pub fn table(table: HashMap<String, String>) -> Self {
        Self::from_fn(move |req| {
            table
                .get(&req.input)
                .cloned()
                .ok_or_else(|| TransportError::new(TransportErrorKind::BadResponse, format!("mock has no mapping for `{}`", req.input)))
        })
    }

    /// Section lists keyed by page title (see the wiki table format).
    pub fn wiki_table(table: HashMap<String, String>) -> Self {
        Self::from_fn(move |req| {
            let page = page_from_table(table.get(&req.input));
            Ok(serde_json::to_string(&page).expect("page serializes"))
        })
    }

    /// Answers prompts following the output contract of the prompt
    /// templates. The translation is taken from the longest table key
    /// found in the prompt.
    pub fn chat(table: HashMap<String, String>) -> Self {
        let mut keys: Vec<(String, String)> = table.into_iter().collect();
        keys.sort_by(|a, b| b.0.chars().count().cmp(&a.0.chars().count()).then_with(|| a.0.cmp(&b.0)));
        Self::from_fn(move |req| Ok(chat_reply(&keys, &req.input)))
    }

    /// Replays the given outcomes in order, then fails.
    pub fn scripted(outcomes: Vec<Result<String, TransportError>>) -> Self {
        let queue = Mutex::new(VecDeque::from(outcomes));
        Self::from_fn(move |_| {
            queue
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or_else(|| Err(TransportError::new(TransportErrorKind::BadResponse, "mock script exhausted")))
        })
    }

    /// Picks the table-driven behaviour that fits the backend kind.
    pub fn for_kind(kind: super::BackendKind, table: HashMap<String, String>) -> Self {
        match kind {
            super::BackendKind::Mt => Self::table(table),
            super::BackendKind::Chat => Self::chat(table),
            super::BackendKind::Wiki => Self::wiki_table(table),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for MockTransport {
    fn call(&self, request: &Request) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.handler)(request)
    }
}

fn short_digest(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..4])
}

fn chat_reply(keys: &[(String, String)], prompt: &str) -> String {
    let translation = keys
        .iter()
        .find(|(k, _)| prompt.contains(k.as_str()))
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| format!("Chinese dish {}", short_digest(prompt)));
    if prompt.contains("BEST:") {
        let best = 1 + (Sha256::digest(prompt.as_bytes())[0] % 3);
        format!(
            "1. {translation}\n2. {translation} dish\n3. A traditional Chinese dish: {translation}\nBEST: {best}"
        )
    } else {
        format!("Translation: {translation}\nFINAL: {translation}")
    }
}

/// Reads a `key<TAB>value` table. `\n` and `\t` escapes in values are
/// expanded.
pub fn load_table(path: &Path) -> std::io::Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text).map_err(|m| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {m}", path.display())))
}

pub fn parse_table(text: &str) -> Result<HashMap<String, String>, String> {
    let mut table = HashMap::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected key<TAB>value", index + 1))?;
        let value = v.replace("\\n", "\n").replace("\\t", "\t");
        table.insert(crate::backends::normalize_input(k), value);
    }
    Ok(table)
}
