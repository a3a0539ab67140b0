use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Backend;

pub const DEFAULT_HISTORY_TITLES: [&str; 2] = ["历史", "History"];

/// Provider-independent form of a section lookup, as stored in the cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiPage {
    pub exists: bool,
    #[serde(default)]
    pub sections: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryStatus {
    Found,
    NoSection,
    NoPage,
    /// The lookup failed; the answer is not known.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryLookup {
    pub has_history: bool,
    pub status: HistoryStatus,
}

impl HistoryLookup {
    fn from_status(status: HistoryStatus) -> Self {
        HistoryLookup {
            has_history: status == HistoryStatus::Found,
            status,
        }
    }
}

/// Queries Wikipedia editions in order (Chinese first by convention) and
/// reports whether the page for a term carries a history section.
pub struct WikiClient {
    editions: Vec<Arc<Backend>>,
    history_titles: Vec<String>,
}

impl WikiClient {
    pub fn new(editions: Vec<Arc<Backend>>) -> Self {
        WikiClient {
            editions,
            history_titles: DEFAULT_HISTORY_TITLES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_history_titles(mut self, titles: Vec<String>) -> Self {
        self.history_titles = titles;
        self
    }

    pub fn editions(&self) -> &[Arc<Backend>] {
        &self.editions
    }

    fn is_history_title(&self, title: &str) -> bool {
        let title = title.trim();
        self.history_titles.iter().any(|h| h.eq_ignore_ascii_case(title))
    }

    fn lookup_edition(&self, backend: &Backend, term: &str) -> HistoryStatus {
        match backend.sections(term) {
            Ok(None) => HistoryStatus::NoPage,
            Ok(Some(sections)) if sections.iter().any(|s| self.is_history_title(s)) => HistoryStatus::Found,
            Ok(Some(_)) => HistoryStatus::NoSection,
            Err(err) => {
                log::warn!("wiki lookup for `{term}` on {}: {err}", backend.id());
                HistoryStatus::Unknown
            }
        }
    }

    /// First edition with a hit wins. Otherwise an inconclusive lookup in
    /// any edition makes the result `Unknown`; a page without the section
    /// beats no page at all.
    pub fn has_history_section(&self, term: &str) -> HistoryLookup {
        let term = term.trim();
        if term.is_empty() {
            return HistoryLookup::from_status(HistoryStatus::NoPage);
        }
        let mut statuses = Vec::with_capacity(self.editions.len());
        for backend in &self.editions {
            let status = self.lookup_edition(backend, term);
            if status == HistoryStatus::Found {
                return HistoryLookup::from_status(status);
            }
            statuses.push(status);
        }
        let status = if statuses.contains(&HistoryStatus::Unknown) {
            HistoryStatus::Unknown
        } else if statuses.contains(&HistoryStatus::NoSection) {
            HistoryStatus::NoSection
        } else {
            HistoryStatus::NoPage
        };
        HistoryLookup::from_status(status)
    }

    pub fn network_calls(&self) -> u64 {
        self.editions.iter().map(|b| b.network_calls()).sum()
    }
}

/// Parses a wiki mock table value: `-` or absent means no page, otherwise
/// `|`-separated section titles (possibly empty).
pub(crate) fn page_from_table(value: Option<&String>) -> WikiPage {
    match value {
        None => WikiPage {
            exists: false,
            sections: Vec::new(),
        },
        Some(v) if v.trim() == "-" => WikiPage {
            exists: false,
            sections: Vec::new(),
        },
        Some(v) => WikiPage {
            exists: true,
            sections: v.split('|').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        },
    }
}
