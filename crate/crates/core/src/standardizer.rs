//! Pluggable payload standardization with iterative schema repair.
//!
//! A backend proposes a candidate dataset for a raw payload segment; the
//! candidate is validated against the canonical schemas; on failure the
//! structured error list is fed back to the backend as a repair
//! instruction, up to a configurable iteration cap (default five). Two
//! backends exist: a remote chat-completion client and a deterministic
//! mapping-driven mock that keeps the entire pipeline testable offline.
//! Non-convergence is an outcome, not an error.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::schema::{
    coerce_units, mark_missing, normalize_timestamp, RawPayload, SensorKind, StandardizedDataset,
    StandardizedRecord,
};
use crate::validation::{validate_dataset, ErrorCode, SchemaSet, ValidationError, ValidationReport};

#[derive(Debug, Error)]
pub enum StandardizerError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend response unparseable: {0}")]
    UnparseableResponse(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    #[serde(rename = "RemoteLLM")]
    RemoteLlm,
    DeterministicMock,
}

fn default_max_iterations() -> u32 {
    5
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_retry_backoff_ms() -> u64 {
    500
}

/// Backend selection and tuning. One of these per ingest source or one for
/// the whole CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_retry_backoff_ms")]
    pub retry_backoff_ms: u64,
    /// Mapping table for the deterministic mock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<MockMapping>,
}

impl BackendConfig {
    pub fn mock(mapping: MockMapping) -> Self {
        Self {
            kind: BackendKind::DeterministicMock,
            endpoint: None,
            model_name: None,
            auth_token_env: None,
            max_iterations: default_max_iterations(),
            timeout_secs: default_timeout_secs(),
            retry_backoff_ms: default_retry_backoff_ms(),
            mapping: Some(mapping),
        }
    }

    pub fn validate(&self) -> Result<(), StandardizerError> {
        if !(1..=20).contains(&self.max_iterations) {
            return Err(StandardizerError::InvalidConfig(format!(
                "max_iterations must be in 1..=20, got {}",
                self.max_iterations
            )));
        }
        match self.kind {
            BackendKind::RemoteLlm => {
                if self.endpoint.is_none() || self.model_name.is_none() {
                    return Err(StandardizerError::InvalidConfig(
                        "RemoteLLM requires endpoint and model_name".into(),
                    ));
                }
            }
            BackendKind::DeterministicMock => {
                if self.mapping.is_none() {
                    return Err(StandardizerError::InvalidConfig(
                        "DeterministicMock requires a mapping table".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Context handed to a backend on repair iterations (iteration >= 2).
pub struct RepairContext<'a> {
    /// 1-based loop iteration about to run.
    pub iteration: u32,
    pub previous: &'a Value,
    pub report: &'a ValidationReport,
    pub prompt: &'a str,
}

/// A standardization backend: proposes a candidate dataset (JSON array of
/// record objects) for one raw payload segment.
pub trait StandardizerBackend: Send + Sync {
    fn propose(
        &self,
        segment: &Value,
        repair: Option<&RepairContext<'_>>,
    ) -> Result<Value, StandardizerError>;
}

/// Outcome of one standardization call. `converged` mirrors
/// `final_report.valid`; on non-convergence the dataset is empty and the
/// last candidate is kept for inspection.
#[derive(Debug, Clone)]
pub struct StandardizationOutcome {
    pub dataset: StandardizedDataset,
    pub iterations_used: u32,
    pub converged: bool,
    pub final_report: ValidationReport,
    /// Last candidate (merged across segments) exactly as proposed.
    pub candidate: Vec<Value>,
}

/// Builds the repair instruction sent back to the backend: every error
/// path/message from the report plus the schema excerpt for the failing
/// kinds. Deterministic given its inputs.
///
/// Precondition: the report must be invalid.
pub fn build_repair_prompt(previous_candidate: &Value, report: &ValidationReport) -> String {
    assert!(
        !report.valid,
        "build_repair_prompt requires a failing report"
    );
    let mut out = String::new();
    out.push_str("The previous candidate dataset failed schema validation.\n");
    out.push_str("Errors:\n");
    for error in &report.errors {
        out.push_str(&format!(
            "- {}: {:?} — {}\n",
            error.path, error.code, error.message
        ));
    }

    let mut failing_kinds: Vec<String> = Vec::new();
    if let Some(records) = previous_candidate.as_array() {
        for error in &report.errors {
            if let Some(rest) = error.path.strip_prefix("/records/") {
                if let Some(idx) = rest.split('/').next().and_then(|s| s.parse::<usize>().ok()) {
                    if let Some(name) = records
                        .get(idx)
                        .and_then(|r| r.get("name"))
                        .and_then(Value::as_str)
                    {
                        if !failing_kinds.iter().any(|k| k == name) {
                            failing_kinds.push(name.to_string());
                        }
                    }
                }
            }
        }
    }
    let schemas = SchemaSet::builtin();
    let excerpt: Map<String, Value> = schemas
        .kinds
        .iter()
        .filter(|(name, _)| failing_kinds.is_empty() || failing_kinds.contains(name))
        .map(|(name, ks)| {
            (
                name.clone(),
                serde_json::to_value(ks).expect("schema serializes"),
            )
        })
        .collect();
    out.push_str("Canonical schema for the kinds involved:\n");
    out.push_str(&Value::Object(excerpt).to_string());
    out.push('\n');
    out.push_str("Previous candidate:\n");
    out.push_str(&previous_candidate.to_string());
    out.push('\n');
    out.push_str("Return the corrected dataset as a JSON array of records only.\n");
    out
}

/// Splits a raw body into per-sensor segments: one segment per top-level
/// key, each keeping its key so source paths stay valid. Non-object bodies
/// are a single segment.
fn segment_body(body: &Value) -> Vec<Value> {
    match body.as_object() {
        Some(map) if !map.is_empty() => map
            .iter()
            .map(|(k, v)| {
                let mut seg = Map::new();
                seg.insert(k.clone(), v.clone());
                Value::Object(seg)
            })
            .collect(),
        _ => vec![body.clone()],
    }
}

struct SegmentOutcome {
    candidate: Vec<Value>,
    iterations: u32,
    converged: bool,
}

fn run_segment_loop(
    backend: &dyn StandardizerBackend,
    segment: &Value,
    schemas: &SchemaSet,
    max_iterations: u32,
) -> Result<SegmentOutcome, StandardizerError> {
    let mut previous: Value = Value::Array(Vec::new());
    let mut report = ValidationReport::ok();
    for iteration in 1..=max_iterations {
        let prompt;
        let repair = if iteration > 1 {
            prompt = build_repair_prompt(&previous, &report);
            Some(RepairContext {
                iteration,
                previous: &previous,
                report: &report,
                prompt: &prompt,
            })
        } else {
            None
        };

        let candidate = match backend.propose(segment, repair.as_ref()) {
            Ok(value) => value,
            Err(StandardizerError::UnparseableResponse(detail)) => {
                // A garbled response consumes one loop iteration with a
                // synthesized validation error instead of aborting.
                previous = Value::Array(Vec::new());
                report = ValidationReport::from_errors(vec![ValidationError::new(
                    "",
                    ErrorCode::WrongType,
                    format!("response unparseable: {detail}"),
                )]);
                continue;
            }
            Err(other) => return Err(other),
        };
        // A bare record object counts as a one-record dataset.
        let records: Vec<Value> = match candidate {
            Value::Array(items) => items,
            other => vec![other],
        };
        report = validate_dataset(&records, schemas);
        if report.valid {
            return Ok(SegmentOutcome {
                candidate: records,
                iterations: iteration,
                converged: true,
            });
        }
        previous = Value::Array(records);
    }
    let candidate = match previous {
        Value::Array(items) => items,
        other => vec![other],
    };
    Ok(SegmentOutcome {
        candidate,
        iterations: max_iterations,
        converged: false,
    })
}

/// Runs the standardize/validate/repair loop over every segment of a raw
/// payload. Convergence is re-checked here against the merged dataset; the
/// backend's own claims are never trusted.
pub fn standardize(
    backend: &dyn StandardizerBackend,
    max_iterations: u32,
    raw: &RawPayload,
    schemas: &SchemaSet,
) -> Result<StandardizationOutcome, StandardizerError> {
    let mut merged: Vec<Value> = Vec::new();
    let mut iterations_used = 1;
    let mut all_converged = true;
    for segment in segment_body(&raw.body) {
        let outcome = run_segment_loop(backend, &segment, schemas, max_iterations)?;
        iterations_used = iterations_used.max(outcome.iterations);
        all_converged &= outcome.converged;
        merged.extend(outcome.candidate);
    }

    // Canonical time order; records without a parseable time sort first in
    // input order so the validator can still address them.
    merged.sort_by_key(|r| {
        r.as_object()
            .and_then(|o| o.get("time"))
            .and_then(Value::as_i64)
            .unwrap_or(i64::MIN)
    });

    let final_report = validate_dataset(&merged, schemas);
    let converged = all_converged && final_report.valid;
    let dataset = if converged {
        let records: Result<Vec<StandardizedRecord>, _> =
            merged.iter().map(StandardizedRecord::from_value).collect();
        StandardizedDataset::new(records.map_err(|e| {
            StandardizerError::UnparseableResponse(format!(
                "validated candidate failed typed parse: {e}"
            ))
        })?)
    } else {
        StandardizedDataset::default()
    };
    Ok(StandardizationOutcome {
        dataset,
        iterations_used,
        converged,
        final_report,
        candidate: merged,
    })
}

// ---------------------------------------------------------------------------
// Deterministic mock backend
// ---------------------------------------------------------------------------

/// One source-path-to-canonical-field mapping entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingEntry {
    /// JSONPath into the raw payload.
    pub path: String,
    /// Target sensor kind (canonical name, e.g. "UWB").
    pub kind: SensorKind,
    /// Target field: "time", a payload field name, "steps", or "image".
    pub field: String,
    /// Component index for vec3 fields fed from separate scalars.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    /// Declared source unit; converted to the canonical unit when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// Scripted misbehavior so tests can exercise the repair loop: the named
/// field is omitted from every record until `valid_from_iteration` is
/// reached (0 means never).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    pub omit_field: String,
    #[serde(default)]
    pub valid_from_iteration: u32,
}

/// Mapping table driving the deterministic mock.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockMapping {
    pub entries: Vec<MappingEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultInjection>,
}

impl MockMapping {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Deterministic mapping-driven standardizer: identical inputs produce a
/// byte-identical dataset. Exists so the pipeline runs and tests offline.
pub struct MockStandardizer {
    mapping: MockMapping,
}

impl MockStandardizer {
    pub fn new(mapping: MockMapping) -> Self {
        Self { mapping }
    }
}

impl StandardizerBackend for MockStandardizer {
    fn propose(
        &self,
        segment: &Value,
        repair: Option<&RepairContext<'_>>,
    ) -> Result<Value, StandardizerError> {
        let iteration = repair.map(|r| r.iteration).unwrap_or(1);
        let mut records: Vec<(SensorKind, i64, Map<String, Value>)> = Vec::new();

        for entry in &self.mapping.entries {
            let path = crate::jsonpath::parse_path(&entry.path).map_err(|e| {
                StandardizerError::InvalidConfig(format!("mapping path '{}': {e}", entry.path))
            })?;
            let Some(source) = crate::jsonpath::get(segment, &path).into_iter().next() else {
                continue;
            };
            let record = match records.iter_mut().find(|(k, _, _)| *k == entry.kind) {
                Some(found) => found,
                None => {
                    records.push((entry.kind, i64::MIN, Map::new()));
                    records.last_mut().expect("just pushed")
                }
            };
            if entry.field == "time" {
                if let Ok(nanos) = normalize_timestamp(source) {
                    record.1 = nanos;
                }
                continue;
            }
            // Unit coercion only touches declared-unit numerics; integers
            // without a unit pass through unchanged (steps must stay
            // integral).
            let value = match (&entry.unit, source.as_f64()) {
                (Some(unit), Some(num)) => {
                    let coerced = coerce_units(entry.kind, &entry.field, num, Some(unit))
                        .map_err(|e| StandardizerError::InvalidConfig(e.to_string()))?;
                    json!(coerced)
                }
                _ => source.clone(),
            };
            match entry.component {
                Some(idx) => {
                    let slot = record
                        .2
                        .entry(entry.field.clone())
                        .or_insert_with(|| Value::Array(vec![Value::Null; 3]));
                    if let Some(arr) = slot.as_array_mut() {
                        while arr.len() <= idx {
                            arr.push(Value::Null);
                        }
                        arr[idx] = value;
                    }
                }
                None => {
                    record.2.insert(entry.field.clone(), value);
                }
            }
        }

        records.sort_by_key(|(_, time, _)| *time);
        let mut out = Vec::new();
        for (kind, time, fields) in records {
            let mut record = Map::new();
            record.insert("name".into(), Value::String(kind.as_str().into()));
            if time != i64::MIN {
                record.insert("time".into(), json!(time));
            }
            match kind.payload_key() {
                "values" => {
                    let marked = mark_missing(kind, &Value::Object(fields));
                    record.insert("values".into(), marked);
                }
                key => {
                    let value = fields.get(key).cloned().unwrap_or(Value::Null);
                    record.insert(key.into(), value);
                }
            }

            if let Some(fault) = &self.mapping.fault {
                let correct_now =
                    fault.valid_from_iteration != 0 && iteration >= fault.valid_from_iteration;
                if !correct_now {
                    record.remove(&fault.omit_field);
                    if let Some(values) = record.get_mut("values").and_then(Value::as_object_mut) {
                        values.remove(&fault.omit_field);
                    }
                }
            }
            out.push(Value::Object(record));
        }
        Ok(Value::Array(out))
    }
}

// ---------------------------------------------------------------------------
// Remote chat-completion backend
// ---------------------------------------------------------------------------

const RETRY_ATTEMPTS: u32 = 3;

/// Chat-completions client: the system message holds the canonical schema
/// and a JSON-only instruction, the user message holds the raw segment (or
/// the repair prompt). Transport failures are retried with exponential
/// backoff; an unparseable response body is a content fault, not a
/// transport fault.
pub struct RemoteLlmBackend {
    endpoint: String,
    model_name: String,
    token: Option<String>,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl RemoteLlmBackend {
    pub fn from_config(config: &BackendConfig) -> Result<Self, StandardizerError> {
        config.validate()?;
        let token = match &config.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                StandardizerError::InvalidConfig(format!("auth token env var '{var}' is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| StandardizerError::BackendUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: config.endpoint.clone().expect("validated"),
            model_name: config.model_name.clone().expect("validated"),
            token,
            backoff: Duration::from_millis(config.retry_backoff_ms),
            client,
        })
    }

    fn system_prompt() -> String {
        format!(
            "You standardize raw positioning-sensor payloads into canonical \
             records. Each record is {{\"name\", \"time\", ...}} with the reading \
             under \"values\" (\"steps\" for Pedometer, \"image\" for Image). \
             Times are UNIX nanoseconds. The canonical schema is:\n{}\n\
             Respond with a JSON array of records only, no prose.",
            serde_json::to_string(SchemaSet::builtin()).expect("schema serializes")
        )
    }

    fn post_once(&self, body: &Value) -> Result<Value, String> {
        let mut request = self.client.post(&self.endpoint).json(body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("HTTP {}", response.status()));
        }
        response.json::<Value>().map_err(|e| e.to_string())
    }
}

impl StandardizerBackend for RemoteLlmBackend {
    fn propose(
        &self,
        segment: &Value,
        repair: Option<&RepairContext<'_>>,
    ) -> Result<Value, StandardizerError> {
        let user_content = match repair {
            Some(ctx) => ctx.prompt.to_string(),
            None => segment.to_string(),
        };
        let body = json!({
            "model": self.model_name,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": Self::system_prompt()},
                {"role": "user", "content": user_content},
            ],
        });

        let mut last_error = String::new();
        for attempt in 0..RETRY_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.post_once(&body) {
                Ok(response) => {
                    let content = response
                        .pointer("/choices/0/message/content")
                        .and_then(Value::as_str)
                        .ok_or_else(|| {
                            StandardizerError::UnparseableResponse(
                                "response lacks choices[0].message.content".into(),
                            )
                        })?;
                    let stripped = strip_code_fence(content);
                    return serde_json::from_str(stripped).map_err(|e| {
                        StandardizerError::UnparseableResponse(format!("content is not JSON: {e}"))
                    });
                }
                Err(e) => last_error = e,
            }
        }
        Err(StandardizerError::BackendUnavailable(format!(
            "{last_error} after {RETRY_ATTEMPTS} attempts"
        )))
    }
}

fn strip_code_fence(content: &str) -> &str {
    let trimmed = content.trim();
    let Some(inner) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let inner = inner.strip_prefix("json").unwrap_or(inner);
    inner.trim_end_matches('`').trim_matches('\n').trim()
}

/// Builds a backend from configuration.
pub fn make_backend(
    config: &BackendConfig,
) -> Result<Box<dyn StandardizerBackend>, StandardizerError> {
    config.validate()?;
    match config.kind {
        BackendKind::DeterministicMock => Ok(Box::new(MockStandardizer::new(
            config.mapping.clone().expect("validated"),
        ))),
        BackendKind::RemoteLlm => Ok(Box::new(RemoteLlmBackend::from_config(config)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accel_mapping(fault: Option<FaultInjection>) -> MockMapping {
        MockMapping {
            entries: vec![
                MappingEntry {
                    path: "$.acc.ts".into(),
                    kind: SensorKind::Accelerometer,
                    field: "time".into(),
                    component: None,
                    unit: None,
                },
                MappingEntry {
                    path: "$.acc.ax".into(),
                    kind: SensorKind::Accelerometer,
                    field: "x".into(),
                    component: None,
                    unit: None,
                },
                MappingEntry {
                    path: "$.acc.ay".into(),
                    kind: SensorKind::Accelerometer,
                    field: "y".into(),
                    component: None,
                    unit: None,
                },
                MappingEntry {
                    path: "$.acc.az".into(),
                    kind: SensorKind::Accelerometer,
                    field: "z".into(),
                    component: None,
                    unit: None,
                },
            ],
            fault,
        }
    }

    fn raw() -> RawPayload {
        RawPayload::new(
            "test",
            1,
            json!({"acc": {"ts": 1705307400, "ax": 0.1, "ay": 0.2, "az": 9.8}}),
        )
        .unwrap()
    }

    #[test]
    fn mock_converges_first_iteration() {
        // Oracle: the expected record, checked by the validator before the
        // comparison.
        let expected = json!({
            "name": "Accelerometer",
            "time": 1_705_307_400_000_000_000i64,
            "values": {"x": 0.1, "y": 0.2, "z": 9.8},
        });
        assert!(validate_dataset(std::slice::from_ref(&expected), SchemaSet::builtin()).valid);

        let backend = MockStandardizer::new(accel_mapping(None));
        let outcome = standardize(&backend, 5, &raw(), SchemaSet::builtin()).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.iterations_used, 1);
        assert_eq!(outcome.dataset.len(), 1);
        assert_eq!(outcome.dataset.to_values()[0], expected);
    }

    #[test]
    fn repair_loop_converges_on_second_iteration() {
        let backend = MockStandardizer::new(accel_mapping(Some(FaultInjection {
            omit_field: "time".into(),
            valid_from_iteration: 2,
        })));
        let outcome = standardize(&backend, 5, &raw(), SchemaSet::builtin()).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.iterations_used, 2);
    }

    #[test]
    fn never_valid_exhausts_cap() {
        let backend = MockStandardizer::new(accel_mapping(Some(FaultInjection {
            omit_field: "time".into(),
            valid_from_iteration: 0,
        })));
        let outcome = standardize(&backend, 5, &raw(), SchemaSet::builtin()).unwrap();
        assert!(!outcome.converged);
        assert_eq!(outcome.iterations_used, 5);
        assert!(!outcome.final_report.valid);
        assert!(outcome.dataset.is_empty());
        assert!(outcome
            .final_report
            .errors
            .iter()
            .any(|e| e.path.ends_with("/time")));
    }

    #[test]
    fn mock_outcome_is_byte_deterministic() {
        let backend = MockStandardizer::new(accel_mapping(None));
        let a = standardize(&backend, 5, &raw(), SchemaSet::builtin()).unwrap();
        let b = standardize(&backend, 5, &raw(), SchemaSet::builtin()).unwrap();
        assert_eq!(a.dataset.to_ndjson(), b.dataset.to_ndjson());
    }

    #[test]
    fn converged_dataset_revalidates_independently() {
        let backend = MockStandardizer::new(accel_mapping(None));
        let outcome = standardize(&backend, 5, &raw(), SchemaSet::builtin()).unwrap();
        assert!(validate_dataset(&outcome.dataset.to_values(), SchemaSet::builtin()).valid);
    }

    #[test]
    fn repair_prompt_contains_every_error_path_once() {
        let candidate = json!([{"name": "Accelerometer", "values": {"x": 1.0}}]);
        let report = ValidationReport::from_errors(vec![
            ValidationError::new("/records/0/time", ErrorCode::MissingField, "missing"),
            ValidationError::new("/records/0/values/y", ErrorCode::MissingField, "missing"),
        ]);
        let prompt = build_repair_prompt(&candidate, &report);
        assert_eq!(prompt.matches("/records/0/time").count(), 1);
        assert_eq!(prompt.matches("/records/0/values/y").count(), 1);
        assert!(prompt.contains("Accelerometer"));
    }

    #[test]
    #[should_panic(expected = "failing report")]
    fn repair_prompt_rejects_valid_report() {
        let _ = build_repair_prompt(&json!([]), &ValidationReport::ok());
    }

    #[test]
    fn multi_sensor_payload_segments_by_top_level_key() {
        let mut mapping = accel_mapping(None);
        mapping.entries.push(MappingEntry {
            path: "$.ped.count".into(),
            kind: SensorKind::Pedometer,
            field: "steps".into(),
            component: None,
            unit: None,
        });
        mapping.entries.push(MappingEntry {
            path: "$.ped.ts".into(),
            kind: SensorKind::Pedometer,
            field: "time".into(),
            component: None,
            unit: None,
        });
        let raw = RawPayload::new(
            "test",
            1,
            json!({
                "acc": {"ts": 1705307400, "ax": 0.1, "ay": 0.2, "az": 9.8},
                "ped": {"ts": 1705307401, "count": 7},
            }),
        )
        .unwrap();
        let backend = MockStandardizer::new(mapping);
        let outcome = standardize(&backend, 5, &raw, SchemaSet::builtin()).unwrap();
        assert!(outcome.converged, "{:?}", outcome.final_report);
        assert_eq!(outcome.dataset.len(), 2);
        let times: Vec<i64> = outcome.dataset.records().iter().map(|r| r.time).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unit_coercion_applies_in_mapping() {
        let mapping = MockMapping {
            entries: vec![
                MappingEntry {
                    path: "$.acc.ts".into(),
                    kind: SensorKind::Accelerometer,
                    field: "time".into(),
                    component: None,
                    unit: None,
                },
                MappingEntry {
                    path: "$.acc.ax_g".into(),
                    kind: SensorKind::Accelerometer,
                    field: "x".into(),
                    component: None,
                    unit: Some("g".into()),
                },
                MappingEntry {
                    path: "$.acc.ay".into(),
                    kind: SensorKind::Accelerometer,
                    field: "y".into(),
                    component: None,
                    unit: None,
                },
                MappingEntry {
                    path: "$.acc.az".into(),
                    kind: SensorKind::Accelerometer,
                    field: "z".into(),
                    component: None,
                    unit: None,
                },
            ],
            fault: None,
        };
        let raw = RawPayload::new(
            "test",
            1,
            json!({"acc": {"ts": 1705307400, "ax_g": 1.0, "ay": 0.0, "az": 9.8}}),
        )
        .unwrap();
        let backend = MockStandardizer::new(mapping);
        let outcome = standardize(&backend, 5, &raw, SchemaSet::builtin()).unwrap();
        assert!(outcome.converged);
        let value = &outcome.dataset.to_values()[0];
        assert_eq!(value["values"]["x"], json!(9.80665));
    }
}
