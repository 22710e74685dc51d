//! Reasoner backed by an OpenAI-style chat-completion endpoint.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::reasoner::{Query, Reasoner, ReasonerError};

pub const URL_VAR: &str = "EAC_REASONER_URL";
pub const TOKEN_VAR: &str = "EAC_REASONER_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_var: String,
    pub timeout_secs: f64,
    /// Extra attempts after a transport failure or a 429/5xx status.
    pub retries: usize,
    /// Delay before the first retry; doubles after each.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            token_var: TOKEN_VAR.into(),
            timeout_secs: 60.0,
            retries: 2,
            backoff_ms: 500,
            max_in_flight: 4,
        }
    }
}

/// Counting gate bounding concurrent requests.
struct Gate {
    busy: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        while *busy >= self.limit {
            busy = self.freed.wait(busy).unwrap_or_else(|e| e.into_inner());
        }
        *busy += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpReasoner {
    config: HttpConfig,
    token: Option<String>,
    agent: ureq::Agent,
    gate: Gate,
}

enum Failure {
    Retry(String),
    Fatal(String),
}

impl HttpReasoner {
    pub fn new(config: HttpConfig) -> HttpReasoner {
        let token = std::env::var(&config.token_var).ok().filter(|t| !t.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { busy: Mutex::new(0), freed: Condvar::new(), limit: config.max_in_flight.max(1) };
        HttpReasoner { config, token, agent, gate }
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn body(&self, prompt: &str, images: &[String]) -> Value {
        let content = if images.is_empty() {
            json!(prompt)
        } else {
            let mut parts = vec![json!({"type": "text", "text": prompt})];
            parts.extend(images.iter().map(|url| json!({"type": "image_url", "image_url": {"url": url}})));
            Value::Array(parts)
        };
        json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        })
    }

    fn once(&self, body: &str) -> Result<String, Failure> {
        let mut req = self.agent.post(&self.url()).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send(body).map_err(|e| Failure::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Failure::Retry(e.to_string()))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => return Err(Failure::Retry(format!("status {status}"))),
            _ => return Err(Failure::Fatal(format!("status {status}: {}", text.chars().take(200).collect::<String>()))),
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Fatal(format!("reply is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal("reply has no choices[0].message.content".into()))
    }
}

impl Reasoner for HttpReasoner {
    fn ask(&self, query: &Query) -> Result<String, ReasonerError> {
        let prompt = query.prompt()?;
        let body = self.body(&prompt, &query.images).to_string();
        let _slot = self.gate.enter();
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Retry(_)) if attempt < self.config.retries => {
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(Failure::Retry(m) | Failure::Fatal(m)) => {
                    let message = if attempt > 0 { format!("{m} (after {} attempts)", attempt + 1) } else { m };
                    return Err(ReasonerError::Transport { endpoint: self.url(), message });
                }
            }
        }
    }
}
