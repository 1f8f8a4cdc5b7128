//! Optional model-backed evaluation layered over the static backbone.

mod contract;
mod evaluator;
mod merge;

pub use contract::{
    parse_response, request_llm_audit, EvaluatorRequest, LlmAudit, CONTRACT_VERSION, DEFAULT_CONTEXT_BUDGET,
};
pub use evaluator::{
    build_evaluator, Evaluator, HttpEvaluator, NetworkPolicy, StubEvaluator, ENDPOINT_TOKEN_ENV,
};
pub use merge::{
    merge_hybrid, run_augmented_scan, suppression_report, suppression_totals, AugmentOptions, CheckSuppression,
    SuppressionRate, SuppressionReport,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("endpoint `{0}` is not a recognised stub or http(s) address")]
    BadEndpoint(String),
    #[error("network access is denied for this scan")]
    NetworkDenied,
    #[error("evaluator transport failed: {0}")]
    Transport(String),
    #[error("evaluator response violates the contract: {0}")]
    Contract(String),
}
