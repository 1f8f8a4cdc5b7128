use std::time::Duration;

use serde_json::json;

use super::{EvaluatorRequest, LlmError, CONTRACT_VERSION};
use crate::rules::CheckId;

/// Environment variable holding an optional bearer token for HTTP endpoints.
pub const ENDPOINT_TOKEN_ENV: &str = "TRUTHSCAN_ENDPOINT_TOKEN";

/// Text-in, structured-text-out transport.
pub trait Evaluator: Send + Sync {
    /// Short label recorded in scan metadata.
    fn describe(&self) -> String;
    fn evaluate(&self, request: &EvaluatorRequest) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkPolicy {
    Allowed,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubEvaluator {
    /// PASS for every requested check, no findings.
    AllPass,
    /// The same reply text for every request.
    Reply(String),
    /// A transport failure for every request.
    Fail(String),
}

impl StubEvaluator {
    pub fn all_pass_reply(checks: &[CheckId]) -> String {
        let verdicts: serde_json::Map<String, serde_json::Value> =
            checks.iter().map(|c| (c.schema_key().to_string(), "PASS".into())).collect();
        json!({"contract": CONTRACT_VERSION, "verdicts": verdicts, "findings": []}).to_string()
    }
}

impl Evaluator for StubEvaluator {
    fn describe(&self) -> String {
        match self {
            StubEvaluator::AllPass => "stub:pass".into(),
            StubEvaluator::Reply(_) => "stub:reply".into(),
            StubEvaluator::Fail(_) => "stub:fail".into(),
        }
    }

    fn evaluate(&self, request: &EvaluatorRequest) -> Result<String, LlmError> {
        match self {
            StubEvaluator::AllPass => Ok(Self::all_pass_reply(&request.checks)),
            StubEvaluator::Reply(text) => Ok(text.clone()),
            StubEvaluator::Fail(msg) => Err(LlmError::Transport(msg.clone())),
        }
    }
}

/// Ollama-style `/api/generate` endpoint.
#[derive(Debug, Clone)]
pub struct HttpEvaluator {
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
    pub token: Option<String>,
}

impl Evaluator for HttpEvaluator {
    fn describe(&self) -> String {
        format!("http:{}", self.model)
    }

    fn evaluate(&self, request: &EvaluatorRequest) -> Result<String, LlmError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let url = format!("{}/api/generate", self.base_url.trim_end_matches('/'));
        let mut call = agent.post(&url);
        if let Some(token) = &self.token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let body = json!({
            "model": self.model,
            "prompt": request.prompt(),
            "stream": false,
            "format": "json",
            "options": {"temperature": 0, "seed": 0},
        });
        let reply: serde_json::Value =
            call.send_json(body).map_err(|e| LlmError::Transport(e.to_string()))?.into_json().map_err(|e| LlmError::Transport(e.to_string()))?;
        reply
            .get("response")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::Contract("transport reply lacks a `response` string".into()))
    }
}

/// Resolve an endpoint spec: `stub:pass`, `stub:fail`, `stub:malformed`, or an
/// `http(s)://` base address (refused when networking is denied).
pub fn build_evaluator(
    endpoint: &str,
    model: &str,
    timeout: Duration,
    policy: NetworkPolicy,
) -> Result<Box<dyn Evaluator>, LlmError> {
    match endpoint {
        "stub:pass" => Ok(Box::new(StubEvaluator::AllPass)),
        "stub:fail" => Ok(Box::new(StubEvaluator::Fail("stub failure".into()))),
        "stub:malformed" => Ok(Box::new(StubEvaluator::Reply("{\"verdicts\": []}".into()))),
        e if e.starts_with("http://") || e.starts_with("https://") => {
            if policy == NetworkPolicy::Denied {
                return Err(LlmError::NetworkDenied);
            }
            Ok(Box::new(HttpEvaluator {
                base_url: e.to_string(),
                model: model.to_string(),
                timeout,
                token: std::env::var(ENDPOINT_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            }))
        }
        other => Err(LlmError::BadEndpoint(other.to_string())),
    }
}
