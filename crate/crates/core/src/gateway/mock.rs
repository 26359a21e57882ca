use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::{estimate_tokens, ChatBackend, ChatRequest, GatewayError, ModelHandle, Usage};

/// What a rule does once it has returned every scripted response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exhaustion {
    #[default]
    Repeat,
    Cycle,
    Fail,
}

/// How a rule chooses among its responses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pick {
    /// In order of matching calls.
    #[default]
    Sequence,
    /// Pseudo-randomly, keyed by a hash over the seed and the call.
    Seeded,
}

/// One scripted reply. A rule matches when every `contains` substring is
/// in the prompt and, if set, `index` equals the global call index.
/// Rules are tried in order; the first match answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, deserialize_with = "one_or_many")]
    pub contains: Vec<String>,
    #[serde(default)]
    pub index: Option<usize>,
    pub responses: Vec<String>,
    #[serde(default)]
    pub exhausted: Exhaustion,
    #[serde(default)]
    pub pick: Pick,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

impl MockRule {
    pub fn any<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockRule {
            contains: Vec::new(),
            index: None,
            responses: responses.into_iter().map(Into::into).collect(),
            exhausted: Exhaustion::Repeat,
            pick: Pick::Sequence,
        }
    }

    pub fn contains<I, S>(needles: &[&str], responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockRule {
            contains: needles.iter().map(|s| s.to_string()).collect(),
            ..MockRule::any(responses)
        }
    }

    pub fn at_index<I, S>(index: usize, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockRule {
            index: Some(index),
            ..MockRule::any(responses)
        }
    }

    pub fn exhausted(mut self, e: Exhaustion) -> Self {
        self.exhausted = e;
        self
    }

    pub fn pick(mut self, p: Pick) -> Self {
        self.pick = p;
        self
    }

    fn matches(&self, prompt: &str, call_index: usize) -> bool {
        self.index.is_none_or(|i| i == call_index)
            && self
                .contains
                .iter()
                .all(|needle| prompt.contains(needle.as_str()))
    }
}

/// A deterministic conversation script for the mock backend.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    /// Reply when no rule matches; `None` makes unmatched calls fail.
    #[serde(default)]
    pub default: Option<String>,
}

impl MockScript {
    pub fn new(seed: u64) -> Self {
        MockScript {
            seed,
            ..Default::default()
        }
    }

    pub fn rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn with_default(mut self, reply: impl Into<String>) -> Self {
        self.default = Some(reply.into());
        self
    }

    pub fn extend(&mut self, other: MockScript) {
        self.rules.extend(other.rules);
        if self.default.is_none() {
            self.default = other.default;
        }
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Backend that answers from a [`MockScript`].
///
/// Per-rule match counters advance on every match, so a rule whose
/// `contains` pins it to one item stays deterministic under parallel
/// evaluation. `index` rules depend on global call order and are only
/// deterministic with a parallelism of one.
#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    counters: Mutex<Vec<usize>>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        let counters = Mutex::new(vec![0; script.rules.len()]);
        MockBackend {
            script,
            counters,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn reply(&self, prompt: &str) -> Result<String, GatewayError> {
        let call_index = self.calls.fetch_add(1, Ordering::SeqCst);
        let Some((idx, rule)) = self
            .script
            .rules
            .iter()
            .enumerate()
            .find(|(_, r)| r.matches(prompt, call_index))
        else {
            return self.script.default.clone().ok_or_else(|| {
                GatewayError::MockExhausted(format!("no rule matches call {call_index}"))
            });
        };
        if rule.responses.is_empty() {
            return Err(GatewayError::MockExhausted(format!(
                "rule {idx} has no responses"
            )));
        }
        let count = {
            let mut counters = self.counters.lock().expect("mock lock poisoned");
            let c = counters[idx];
            counters[idx] += 1;
            c
        };
        let n = rule.responses.len();
        let pos = match rule.pick {
            Pick::Seeded => seeded_index(self.script.seed, prompt, count, n),
            Pick::Sequence => match rule.exhausted {
                _ if count < n => count,
                Exhaustion::Repeat => n - 1,
                Exhaustion::Cycle => count % n,
                Exhaustion::Fail => {
                    return Err(GatewayError::MockExhausted(format!(
                        "rule {idx} used {count} of {n} responses"
                    )))
                }
            },
        };
        Ok(rule.responses[pos].clone())
    }
}

fn seeded_index(seed: u64, prompt: &str, count: usize, n: usize) -> usize {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(prompt.as_bytes());
    h.update((count as u64).to_le_bytes());
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(word) % n as u64) as usize
}

impl ChatBackend for MockBackend {
    fn complete(
        &self,
        _handle: &ModelHandle,
        request: &ChatRequest,
    ) -> Result<(String, Usage), GatewayError> {
        let prompt = request.prompt_text();
        let text = self.reply(&prompt)?;
        let usage = Usage {
            prompt_tokens: estimate_tokens(&prompt),
            completion_tokens: estimate_tokens(&text),
        };
        Ok((text, usage))
    }
}
