use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::{DesignParams, JointType, SpaceConfig};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Sampling options forwarded to the backend. `None` leaves the backend's
/// own default in place.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodingSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("scripted failure: {0}")]
    Scripted(String),
    #[error("script is empty")]
    EmptyScript,
}

/// A chat-completion endpoint.
pub trait LlmBackend {
    fn label(&self) -> &str;
    fn send(
        &mut self,
        messages: &[ChatMessage],
        settings: &DecodingSettings,
    ) -> std::result::Result<String, BackendError>;
}

/// One line of a mock script: `{"response": "..."}` or `{"error": "..."}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptEntry {
    Response(String),
    Error(String),
}

/// Serves scripted entries in order, one per call, wrapping around at the end.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    next: usize,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries, next: 0 }
    }

    /// Reads a line-delimited JSON script. Blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|e| {
                Error::Parse(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::Parse(format!("{}: script has no entries", path.display())));
        }
        Ok(Self::new(entries))
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }
}

impl LlmBackend for ScriptedBackend {
    fn label(&self) -> &str {
        "mock-script"
    }

    fn send(
        &mut self,
        _messages: &[ChatMessage],
        _settings: &DecodingSettings,
    ) -> std::result::Result<String, BackendError> {
        if self.entries.is_empty() {
            return Err(BackendError::EmptyScript);
        }
        let entry = self.entries[self.next % self.entries.len()].clone();
        self.next += 1;
        match entry {
            ScriptEntry::Response(text) => Ok(text),
            ScriptEntry::Error(reason) => Err(BackendError::Scripted(reason)),
        }
    }
}

/// Two script entries that make the two-call protocol return `design`
/// exactly: a short free-form answer followed by the bracketed form.
pub fn design_script(design: &DesignParams, note: &str) -> [ScriptEntry; 2] {
    let nums = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
    let joints: Vec<String> = design.joints.iter().map(|j| j.letter().to_string()).collect();
    let lists = format!(
        "[{}] [{}] [{}]",
        nums(&design.origin),
        joints.join(", "),
        nums(&design.lengths)
    );
    [
        ScriptEntry::Response(format!("{note}\nProposed design: {lists}")),
        ScriptEntry::Response(lists),
    ]
}

pub fn write_script(path: impl AsRef<Path>, entries: &[ScriptEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).map_err(|e| Error::Parse(e.to_string()))?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Offline stand-in that always answers with the same mid-range design.
#[derive(Clone, Debug)]
pub struct HeuristicBackend {
    answer: String,
}

impl HeuristicBackend {
    pub fn new(space: &SpaceConfig) -> Self {
        const PATTERN: [JointType; 4] = [JointType::Yaw, JointType::Pitch, JointType::Roll, JointType::Pitch];
        let origin: Vec<String> = space.origin_bounds.iter().map(|b| b.mid().to_string()).collect();
        let joints: Vec<String> = (0..space.dof)
            .map(|k| {
                let j = PATTERN[k % PATTERN.len()];
                if space.joint_types.contains(&j) { j } else { space.joint_types[0] }
                    .letter()
                    .to_string()
            })
            .collect();
        let lengths: Vec<String> = (0..space.dof)
            .map(|_| ((space.length_bounds.mid() * 1e4).round() / 1e4).to_string())
            .collect();
        let answer = format!(
            "[{}] [{}] [{}]",
            origin.join(", "),
            joints.join(", "),
            lengths.join(", ")
        );
        Self { answer }
    }
}

impl LlmBackend for HeuristicBackend {
    fn label(&self) -> &str {
        "mock-heuristic"
    }

    fn send(
        &mut self,
        _messages: &[ChatMessage],
        _settings: &DecodingSettings,
    ) -> std::result::Result<String, BackendError> {
        Ok(self.answer.clone())
    }
}

/// Environment variable holding the API token unless configured otherwise.
pub const DEFAULT_TOKEN_ENV: &str = "ROBODESIGN_API_TOKEN";

/// OpenAI-style `POST {base_url}/chat/completions` client.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    token: Option<String>,
    label: String,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: &str, model: &str, token: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: model.to_string(),
            token,
            label: format!("http:{model}"),
        }
    }
}

impl LlmBackend for HttpBackend {
    fn label(&self) -> &str {
        &self.label
    }

    fn send(
        &mut self,
        messages: &[ChatMessage],
        settings: &DecodingSettings,
    ) -> std::result::Result<String, BackendError> {
        let body = CompletionRequest {
            model: &self.model,
            messages,
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let parsed: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("response has no message content".into()))
    }
}

/// Backend selection as written in experiment files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendConfig {
    #[default]
    MockHeuristic,
    MockScript {
        script: PathBuf,
    },
    Http {
        base_url: String,
        model: String,
        #[serde(default = "default_token_env")]
        token_env: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default)]
        decoding: DecodingSettings,
    },
}

fn default_token_env() -> String {
    DEFAULT_TOKEN_ENV.to_string()
}

fn default_timeout() -> u64 {
    60
}

impl BackendConfig {
    pub fn is_mock(&self) -> bool {
        !matches!(self, BackendConfig::Http { .. })
    }

    pub fn decoding(&self) -> DecodingSettings {
        match self {
            BackendConfig::Http { decoding, .. } => *decoding,
            _ => DecodingSettings::default(),
        }
    }

    /// Instantiates the backend. Fails when a script cannot be read or a live
    /// backend's token variable is unset.
    pub fn build(&self, space: &SpaceConfig) -> Result<Box<dyn LlmBackend + Send>> {
        Ok(match self {
            BackendConfig::MockHeuristic => Box::new(HeuristicBackend::new(space)),
            BackendConfig::MockScript { script } => Box::new(ScriptedBackend::load(script)?),
            BackendConfig::Http {
                base_url,
                model,
                token_env,
                timeout_secs,
                ..
            } => {
                let token = std::env::var(token_env).map_err(|_| {
                    Error::Config(format!(
                        "http backend needs an API token in the environment variable {token_env}"
                    ))
                })?;
                Box::new(HttpBackend::new(
                    base_url,
                    model,
                    Some(token),
                    Duration::from_secs(*timeout_secs),
                ))
            }
        })
    }
}
