//! HTTP transports for the supported vendors.
//!
//! Credentials are read from the environment variable named in the
//! descriptor and only ever placed in request headers, so they never show
//! up in URLs, logs or cached values.

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder};
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{BackendDescriptor, Operation, Provider, Request, Transport, TransportError, TransportErrorKind, WikiPage};

pub const GOOGLE_ENDPOINT: &str = "https://translation.googleapis.com/language/translate/v2";
pub const DEEPL_ENDPOINT: &str = "https://api-free.deepl.com/v2/translate";
pub const OPENAI_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const ZH_WIKIPEDIA_ENDPOINT: &str = "https://zh.wikipedia.org/w/api.php";

pub struct HttpTransport {
    client: Client,
    provider: Provider,
    endpoint: String,
    auth_env: Option<String>,
    model: Option<String>,
    temperature: f64,
}

impl HttpTransport {
    pub fn new(descriptor: &BackendDescriptor) -> Result<Self, TransportError> {
        let endpoint = if descriptor.endpoint.is_empty() {
            match descriptor.provider {
                Provider::Google => GOOGLE_ENDPOINT,
                Provider::Deepl => DEEPL_ENDPOINT,
                Provider::Openai => OPENAI_ENDPOINT,
                Provider::Wikipedia => ZH_WIKIPEDIA_ENDPOINT,
                Provider::Mock => {
                    return Err(TransportError::new(TransportErrorKind::BadResponse, "mock provider has no HTTP transport"))
                }
            }
            .to_string()
        } else {
            descriptor.endpoint.clone()
        };
        let client = Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent(concat!("menucsi/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::new(TransportErrorKind::Network, e.to_string()))?;
        Ok(HttpTransport {
            client,
            provider: descriptor.provider,
            endpoint,
            auth_env: descriptor.auth.clone(),
            model: descriptor.model.clone(),
            temperature: descriptor.temperature,
        })
    }

    fn credential(&self) -> Result<Option<String>, TransportError> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| TransportError::new(TransportErrorKind::Auth, format!("environment variable {var} is not set"))),
        }
    }

    fn send(&self, builder: RequestBuilder) -> Result<Value, TransportError> {
        let response = builder
            .send()
            .map_err(|e| TransportError::new(TransportErrorKind::Network, e.without_url().to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| TransportError::new(TransportErrorKind::Network, e.without_url().to_string()))?;
        log::debug!("{:?} {} -> {status} ({} bytes)", self.provider, self.endpoint, body.len());
        if !status.is_success() {
            return Err(classify_status(status, &body));
        }
        serde_json::from_str(&body).map_err(|e| TransportError::new(TransportErrorKind::BadResponse, format!("invalid JSON: {e}")))
    }

    fn translate(&self, text: &str, src: &str, tgt: &str) -> Result<String, TransportError> {
        let key = self.credential()?;
        match self.provider {
            Provider::Google => {
                let mut req = self.client.post(&self.endpoint).json(&json!({
                    "q": text, "source": src, "target": tgt, "format": "text"
                }));
                if let Some(key) = key {
                    req = req.header("X-Goog-Api-Key", key);
                }
                let body = self.send(req)?;
                pick_str(&body, &["data", "translations", "0", "translatedText"])
            }
            Provider::Deepl => {
                let mut req = self.client.post(&self.endpoint).json(&json!({
                    "text": [text],
                    "source_lang": src.to_uppercase(),
                    "target_lang": tgt.to_uppercase(),
                }));
                if let Some(key) = key {
                    req = req.header("Authorization", format!("DeepL-Auth-Key {key}"));
                }
                let body = self.send(req)?;
                pick_str(&body, &["translations", "0", "text"])
            }
            other => Err(unsupported(other, "translate")),
        }
    }

    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        if self.provider != Provider::Openai {
            return Err(unsupported(self.provider, "complete"));
        }
        let key = self.credential()?;
        let mut req = self.client.post(&self.endpoint).json(&json!({
            "model": self.model.as_deref().unwrap_or("gpt-3.5-turbo-0125"),
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "n": 1,
        }));
        if let Some(key) = key {
            req = req.bearer_auth(key);
        }
        let body = self.send(req)?;
        if body.pointer("/choices/0/finish_reason").and_then(Value::as_str) == Some("length") {
            return Err(TransportError::new(TransportErrorKind::Empty, "completion truncated"));
        }
        pick_str(&body, &["choices", "0", "message", "content"])
    }

    fn sections(&self, title: &str) -> Result<String, TransportError> {
        if self.provider != Provider::Wikipedia {
            return Err(unsupported(self.provider, "sections"));
        }
        let req = self.client.get(&self.endpoint).query(&[
            ("action", "parse"),
            ("page", title),
            ("prop", "sections"),
            ("redirects", "1"),
            ("format", "json"),
            ("formatversion", "2"),
        ]);
        let body = self.send(req)?;
        let page = parse_sections(&body)?;
        Ok(serde_json::to_string(&page).expect("page serializes"))
    }
}

impl Transport for HttpTransport {
    fn call(&self, request: &Request) -> Result<String, TransportError> {
        match &request.operation {
            Operation::Translate { src, tgt } => self.translate(&request.input, src, tgt),
            Operation::Complete => self.complete(&request.input),
            Operation::Sections => self.sections(&request.input),
        }
    }
}

fn unsupported(provider: Provider, op: &str) -> TransportError {
    TransportError::new(TransportErrorKind::BadResponse, format!("{provider:?} does not support {op}"))
}

fn classify_status(status: StatusCode, body: &str) -> TransportError {
    let kind = match status {
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => TransportErrorKind::Auth,
        StatusCode::TOO_MANY_REQUESTS => TransportErrorKind::RateLimited,
        s if s.is_server_error() => TransportErrorKind::Server,
        _ => TransportErrorKind::BadResponse,
    };
    let snippet: String = body.chars().take(200).collect();
    TransportError::new(kind, format!("HTTP {status}: {snippet}"))
}

fn pick_str(body: &Value, path: &[&str]) -> Result<String, TransportError> {
    let pointer = format!("/{}", path.join("/"));
    body.pointer(&pointer)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::new(TransportErrorKind::BadResponse, format!("response lacks {pointer}")))
}

/// Reduces a MediaWiki `action=parse&prop=sections` reply to a [`WikiPage`].
pub fn parse_sections(body: &Value) -> Result<WikiPage, TransportError> {
    if let Some(code) = body.pointer("/error/code").and_then(Value::as_str) {
        return match code {
            "missingtitle" | "invalidtitle" => Ok(WikiPage {
                exists: false,
                sections: Vec::new(),
            }),
            other => Err(TransportError::new(TransportErrorKind::BadResponse, format!("wiki error {other}"))),
        };
    }
    let sections = body
        .pointer("/parse/sections")
        .and_then(Value::as_array)
        .ok_or_else(|| TransportError::new(TransportErrorKind::BadResponse, "response lacks /parse/sections"))?;
    Ok(WikiPage {
        exists: true,
        sections: sections
            .iter()
            .filter_map(|s| s.get("line").and_then(Value::as_str))
            .map(str::to_string)
            .collect(),
    })
}
