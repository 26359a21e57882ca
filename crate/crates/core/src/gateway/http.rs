use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{estimate_tokens, ChatBackend, ChatRequest, GatewayError, Message, ModelHandle, Usage};

pub const API_BASE_ENV: &str = "MARS_API_BASE";
pub const API_KEY_ENV: &str = "MARS_API_KEY";

/// Exponential backoff between retries: `base * factor^(retry-1)`, capped,
/// then scaled by a uniform factor in `[1 - jitter, 1 + jitter]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffPolicy {
    pub base: Duration,
    pub factor: f64,
    pub jitter: f64,
    pub cap: Duration,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy {
            base: Duration::from_secs(1),
            factor: 2.0,
            jitter: 0.2,
            cap: Duration::from_secs(30),
        }
    }
}

impl BackoffPolicy {
    /// Delay before retry number `retry` (1-based), without jitter.
    pub fn nominal(&self, retry: u32) -> Duration {
        let secs = self.base.as_secs_f64() * self.factor.powi(retry.saturating_sub(1) as i32);
        Duration::from_secs_f64(secs.min(self.cap.as_secs_f64()))
    }

    pub fn delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let nominal = self.nominal(retry).as_secs_f64();
        let scale = if self.jitter > 0.0 {
            rng.gen_range(1.0 - self.jitter..=1.0 + self.jitter)
        } else {
            1.0
        };
        Duration::from_secs_f64((nominal * scale).max(0.0))
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// OpenAI-compatible `/chat/completions` client.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    api_key: Option<String>,
    backoff: BackoffPolicy,
}

enum Attempt {
    Done(String, Usage),
    Retry(GatewayError),
    Fatal(GatewayError),
}

impl HttpBackend {
    pub fn new(api_key: Option<String>) -> Self {
        HttpBackend {
            api_key,
            backoff: BackoffPolicy::default(),
        }
    }

    /// Reads the API key from `MARS_API_KEY`.
    pub fn from_env() -> Self {
        HttpBackend::new(std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }

    pub fn with_backoff(mut self, backoff: BackoffPolicy) -> Self {
        self.backoff = backoff;
        self
    }

    fn url(endpoint: &str) -> String {
        let base = endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    fn attempt(
        &self,
        agent: &ureq::Agent,
        url: &str,
        handle: &ModelHandle,
        request: &ChatRequest,
    ) -> Attempt {
        let body = WireRequest {
            model: &handle.model_name,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut req = agent.post(url).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = match req.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Retry(GatewayError::Timeout {
                    seconds: handle.timeout_seconds,
                })
            }
            Err(e) => {
                return Attempt::Retry(GatewayError::Transport {
                    attempts: 0,
                    detail: e.to_string(),
                })
            }
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Retry(GatewayError::Timeout {
                    seconds: handle.timeout_seconds,
                })
            }
            Err(e) => {
                return Attempt::Retry(GatewayError::Transport {
                    attempts: 0,
                    detail: e.to_string(),
                })
            }
        };
        match status {
            200..=299 => match serde_json::from_str::<WireResponse>(&text) {
                Ok(parsed) => {
                    let Some(choice) = parsed.choices.into_iter().next() else {
                        return Attempt::Fatal(GatewayError::ProviderError {
                            status,
                            body: "no choices".into(),
                        });
                    };
                    let content = choice.message.content.unwrap_or_default();
                    let usage = match parsed.usage {
                        Some(u) => Usage {
                            prompt_tokens: u.prompt_tokens,
                            completion_tokens: u.completion_tokens,
                        },
                        None => Usage {
                            prompt_tokens: estimate_tokens(&request.prompt_text()),
                            completion_tokens: estimate_tokens(&content),
                        },
                    };
                    Attempt::Done(content, usage)
                }
                Err(e) => Attempt::Fatal(GatewayError::ProviderError {
                    status,
                    body: format!("bad response body: {e}"),
                }),
            },
            429 => Attempt::Retry(GatewayError::RateLimited { attempts: 0 }),
            500..=599 => Attempt::Retry(GatewayError::ProviderError { status, body: text }),
            _ => Attempt::Fatal(GatewayError::ProviderError { status, body: text }),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(
        &self,
        handle: &ModelHandle,
        request: &ChatRequest,
    ) -> Result<(String, Usage), GatewayError> {
        let endpoint = handle
            .endpoint
            .as_deref()
            .ok_or_else(|| GatewayError::Config(format!("{}: no endpoint", handle.model_name)))?;
        let url = Self::url(endpoint);
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(handle.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .into();

        let max_attempts = handle.max_retries + 1;
        let mut rng = rand::thread_rng();
        let mut last = GatewayError::Transport {
            attempts: 0,
            detail: "no attempt made".into(),
        };
        for attempt in 1..=max_attempts {
            match self.attempt(&agent, &url, handle, request) {
                Attempt::Done(text, usage) => return Ok((text, usage)),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    tracing::debug!(attempt, error = %e, "retryable provider failure");
                    last = e;
                }
            }
            if attempt < max_attempts {
                std::thread::sleep(self.backoff.delay(attempt, &mut rng));
            }
        }
        Err(match last {
            GatewayError::RateLimited { .. } => GatewayError::RateLimited {
                attempts: max_attempts,
            },
            GatewayError::Transport { detail, .. } => GatewayError::Transport {
                attempts: max_attempts,
                detail,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn backoff_schedule() {
        let p = BackoffPolicy::default();
        assert_eq!(p.nominal(1), Duration::from_secs(1));
        assert_eq!(p.nominal(2), Duration::from_secs(2));
        assert_eq!(p.nominal(3), Duration::from_secs(4));
        assert_eq!(p.nominal(10), Duration::from_secs(30));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for retry in 1..8 {
            let d = p.delay(retry, &mut rng).as_secs_f64();
            let n = p.nominal(retry).as_secs_f64();
            assert!(d >= n * 0.8 - 1e-9 && d <= n * 1.2 + 1e-9);
        }
    }

    #[test]
    fn endpoint_url() {
        assert_eq!(
            HttpBackend::url("http://h/v1"),
            "http://h/v1/chat/completions"
        );
        assert_eq!(
            HttpBackend::url("http://h/v1/"),
            "http://h/v1/chat/completions"
        );
        assert_eq!(
            HttpBackend::url("http://h/v1/chat/completions"),
            "http://h/v1/chat/completions"
        );
    }
}
