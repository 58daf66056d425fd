//! Driver for OpenAI-compatible chat-completions endpoints.
//!
//! One scenario per request, a single user message, no history. Rate limits,
//! server errors and transport failures are retried with exponential backoff;
//! authentication failures and timeouts are not. Whatever finally happens is
//! recorded on the [`Completion`] rather than raised.

pub mod stub;

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use drivebench_core::driver::{Completion, Driver, DriverError, DriverFailure, DriverRequest};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub sampling_seed: Option<u64>,
    pub timeout_s: f64,
    pub max_retries: u32,
    /// First backoff delay; later ones double.
    pub backoff_base_s: f64,
    /// Requests allowed in flight at once through one driver.
    pub concurrency: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            temperature: 0.0,
            sampling_seed: Some(0),
            timeout_s: 30.0,
            max_retries: 3,
            backoff_base_s: 1.0,
            concurrency: 4,
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::Config(m));
        if self.base_url.trim().is_empty() {
            return bad("remote base_url is empty".into());
        }
        if self.model.trim().is_empty() {
            return bad("remote model is empty".into());
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return bad(format!(
                "remote timeout_s must be > 0, got {}",
                self.timeout_s
            ));
        }
        if !(self.backoff_base_s >= 0.0 && self.backoff_base_s.is_finite()) {
            return bad(format!(
                "remote backoff_base_s must be >= 0, got {}",
                self.backoff_base_s
            ));
        }
        if self.concurrency == 0 {
            return bad("remote concurrency must be at least 1".into());
        }
        Ok(())
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base_s * 2f64.powi(retry as i32))
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Counting gate on in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retry(DriverFailure),
    Fail(DriverFailure),
}

pub struct RemoteDriver {
    config: RemoteConfig,
    api_key: String,
    agent: ureq::Agent,
    name: String,
    gate: Gate,
}

impl RemoteDriver {
    /// Reads the API key from the environment variable the config names.
    pub fn from_env(config: RemoteConfig) -> Result<Self, DriverError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| DriverError::MissingApiKey(config.api_key_env.clone()))?;
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(
        config: RemoteConfig,
        api_key: impl Into<String>,
    ) -> Result<Self, DriverError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteDriver {
            name: format!("remote:{}", config.model),
            gate: Gate::new(config.concurrency),
            api_key: api_key.into(),
            agent,
            config,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn body(&self, prompt: &str) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        if let Some(seed) = self.config.sampling_seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let response = self
            .agent
            .post(&self.config.endpoint())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut response = match response {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Fail(DriverFailure::Timeout {
                    timeout_s: self.config.timeout_s,
                })
            }
            Err(e) => {
                return Attempt::Retry(DriverFailure::Transport {
                    message: e.to_string(),
                })
            }
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Fail(DriverFailure::Timeout {
                    timeout_s: self.config.timeout_s,
                })
            }
            Err(e) => {
                return Attempt::Retry(DriverFailure::Transport {
                    message: e.to_string(),
                })
            }
        };
        match status {
            200..=299 => match message_content(&text) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fail(DriverFailure::Transport {
                    message: format!(
                        "response has no choices[0].message.content: {}",
                        truncate(&text)
                    ),
                }),
            },
            401 | 403 => Attempt::Fail(DriverFailure::Auth {
                message: format!("HTTP {status}: {}", truncate(&text)),
            }),
            429 => Attempt::Retry(DriverFailure::RateLimited { attempts: 0 }),
            500..=599 => Attempt::Retry(DriverFailure::Transport {
                message: format!("HTTP {status}: {}", truncate(&text)),
            }),
            _ => Attempt::Fail(DriverFailure::Transport {
                message: format!("HTTP {status}: {}", truncate(&text)),
            }),
        }
    }
}

fn message_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?
        .as_str()
        .map(str::to_string)
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Driver for RemoteDriver {
    fn name(&self) -> &str {
        &self.name
    }

    fn model_name(&self) -> Option<&str> {
        Some(&self.config.model)
    }

    fn complete(&self, request: &DriverRequest) -> Result<Completion, DriverError> {
        let _slot = self.gate.enter();
        let body = self.body(&request.prompt);
        let mut attempts = 0;
        loop {
            attempts += 1;
            let failure = match self.attempt(&body) {
                Attempt::Done(raw) => {
                    return Ok(Completion {
                        raw,
                        attempts,
                        failure: None,
                    })
                }
                Attempt::Fail(f) => return Ok(Completion::failed(f, attempts)),
                Attempt::Retry(f) => f,
            };
            if attempts > self.config.max_retries {
                let failure = match failure {
                    DriverFailure::RateLimited { .. } => DriverFailure::RateLimited { attempts },
                    other => other,
                };
                return Ok(Completion::failed(failure, attempts));
            }
            thread::sleep(self.config.backoff(attempts - 1));
        }
    }
}
