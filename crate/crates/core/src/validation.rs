//! Schema validation of standardized records and datasets.
//!
//! Validation never throws on bad data: problems come back as a
//! [`ValidationReport`] holding a boolean verdict plus a complete list of
//! path-addressed errors, so a repair loop can name exact locations.
//! Schemas are strict — unknown fields are errors, not noise.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::schema::{SensorKind, MIN_TIME_NANOS, QUATERNION_NORM_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    MissingField,
    ExtraField,
    WrongType,
    OutOfRange,
    BadTimestamp,
    BadQuaternion,
    UnsortedTime,
}

/// One validation finding. `path` is a JSON pointer into the offending
/// record (or `/records/<i>/...` at dataset level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationError {
    pub path: String,
    pub code: ErrorCode,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            code,
            message: message.into(),
        }
    }
}

/// The verdict/error pair produced by every validation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub errors: Vec<ValidationError>,
}

impl ValidationReport {
    pub fn from_errors(errors: Vec<ValidationError>) -> Self {
        Self {
            valid: errors.is_empty(),
            errors,
        }
    }

    pub fn ok() -> Self {
        Self::from_errors(Vec::new())
    }

    /// Re-prefixes every error path, for lifting record reports to dataset
    /// scope.
    fn prefixed(self, prefix: &str) -> Vec<ValidationError> {
        self.errors
            .into_iter()
            .map(|e| ValidationError {
                path: format!("{prefix}{}", e.path),
                ..e
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Number,
    Vec3,
    Count,
    Base64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(rename = "type")]
    pub field_type: FieldType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KindSchema {
    pub payload_key: String,
    #[serde(default)]
    pub quaternion_norm: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fields: BTreeMap<String, FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<FieldSpec>,
}

/// Per-kind field specifications for all eleven sensor kinds, loadable from
/// a versioned JSON resource.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaSet {
    pub version: u32,
    pub kinds: BTreeMap<String, KindSchema>,
}

static BUILTIN: OnceLock<SchemaSet> = OnceLock::new();

impl SchemaSet {
    /// The canonical schema shipped with the crate.
    pub fn builtin() -> &'static SchemaSet {
        BUILTIN.get_or_init(|| {
            serde_json::from_str(include_str!("../resources/schema.json"))
                .expect("embedded schema resource is valid")
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn kind(&self, kind: SensorKind) -> Option<&KindSchema> {
        self.kinds.get(kind.as_str())
    }
}

fn is_number(value: &Value) -> bool {
    // Integers are silently widened to doubles.
    value.is_f64() || value.is_i64() || value.is_u64()
}

fn time_nanos(value: &Value) -> Option<i64> {
    if let Some(n) = value.as_i64() {
        return Some(n);
    }
    value.as_f64().and_then(|f| {
        if f.fract() == 0.0 && f.abs() < 9.2e18 {
            Some(f as i64)
        } else {
            None
        }
    })
}

/// Validates one record document against the schema set, collecting every
/// error rather than stopping at the first.
pub fn validate_record(record: &Value, schemas: &SchemaSet) -> ValidationReport {
    let mut errors = Vec::new();
    let Some(obj) = record.as_object() else {
        errors.push(ValidationError::new(
            "",
            ErrorCode::WrongType,
            "record must be a JSON object",
        ));
        return ValidationReport::from_errors(errors);
    };

    // name
    let kind = match obj.get("name") {
        None => {
            errors.push(ValidationError::new(
                "/name",
                ErrorCode::MissingField,
                "required field 'name' is missing",
            ));
            None
        }
        Some(Value::String(s)) => match SensorKind::parse(s) {
            Ok(kind) => Some(kind),
            Err(_) => {
                errors.push(ValidationError::new(
                    "/name",
                    ErrorCode::WrongType,
                    format!("unknown sensor kind '{s}'"),
                ));
                None
            }
        },
        Some(_) => {
            errors.push(ValidationError::new(
                "/name",
                ErrorCode::WrongType,
                "'name' must be a string",
            ));
            None
        }
    };

    // time
    match obj.get("time") {
        None => errors.push(ValidationError::new(
            "/time",
            ErrorCode::MissingField,
            "required field 'time' is missing",
        )),
        Some(Value::Null) => errors.push(ValidationError::new(
            "/time",
            ErrorCode::MissingField,
            "required field 'time' is null",
        )),
        Some(v) => match time_nanos(v) {
            None => errors.push(ValidationError::new(
                "/time",
                ErrorCode::BadTimestamp,
                "'time' must be an integer nanosecond count",
            )),
            Some(t) if t <= 0 => errors.push(ValidationError::new(
                "/time",
                ErrorCode::BadTimestamp,
                format!("'time' must be positive, got {t}"),
            )),
            Some(t) if t < MIN_TIME_NANOS => errors.push(ValidationError::new(
                "/time",
                ErrorCode::BadTimestamp,
                format!("'time' {t} looks mis-scaled; expected UNIX nanoseconds (>= {MIN_TIME_NANOS})"),
            )),
            Some(_) => {}
        },
    }

    let Some(kind) = kind else {
        return ValidationReport::from_errors(errors);
    };
    let Some(kind_schema) = schemas.kind(kind) else {
        errors.push(ValidationError::new(
            "/name",
            ErrorCode::WrongType,
            format!("schema set has no entry for '{kind}'"),
        ));
        return ValidationReport::from_errors(errors);
    };
    let payload_key = kind_schema.payload_key.as_str();

    // record-level extra keys
    for key in obj.keys() {
        if key != "name" && key != "time" && key != payload_key {
            errors.push(ValidationError::new(
                format!("/{key}"),
                ErrorCode::ExtraField,
                format!("field '{key}' is not part of the {kind} schema"),
            ));
        }
    }

    // payload
    let payload = match obj.get(payload_key) {
        None | Some(Value::Null) => {
            errors.push(ValidationError::new(
                format!("/{payload_key}"),
                ErrorCode::MissingField,
                format!("required field '{payload_key}' is missing"),
            ));
            return ValidationReport::from_errors(errors);
        }
        Some(v) => v,
    };

    if let Some(scalar) = &kind_schema.scalar {
        validate_scalar(payload, payload_key, scalar, &mut errors);
        return ValidationReport::from_errors(errors);
    }

    let Some(values) = payload.as_object() else {
        errors.push(ValidationError::new(
            format!("/{payload_key}"),
            ErrorCode::WrongType,
            format!("'{payload_key}' must be an object"),
        ));
        return ValidationReport::from_errors(errors);
    };

    for (field, spec) in &kind_schema.fields {
        let path = format!("/{payload_key}/{field}");
        match values.get(field) {
            None => errors.push(ValidationError::new(
                &path,
                ErrorCode::MissingField,
                format!("required field '{field}' is missing"),
            )),
            Some(Value::Null) => errors.push(ValidationError::new(
                &path,
                ErrorCode::MissingField,
                format!("required field '{field}' is null"),
            )),
            Some(v) => validate_field(v, &path, spec, &mut errors),
        }
    }
    for field in values.keys() {
        if !kind_schema.fields.contains_key(field) {
            errors.push(ValidationError::new(
                format!("/{payload_key}/{field}"),
                ErrorCode::ExtraField,
                format!("field '{field}' is not part of the {kind} schema"),
            ));
        }
    }

    if kind_schema.quaternion_norm {
        let q: Vec<f64> = ["qx", "qy", "qz", "qw"]
            .iter()
            .filter_map(|k| values.get(*k).and_then(Value::as_f64))
            .collect();
        if q.len() == 4 {
            let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
                errors.push(ValidationError::new(
                    format!("/{payload_key}"),
                    ErrorCode::BadQuaternion,
                    format!(
                        "quaternion (/{payload_key}/qx, qy, qz, qw) has norm {norm:.6}, expected 1 ± {QUATERNION_NORM_TOLERANCE}"
                    ),
                ));
            }
        }
    }

    ValidationReport::from_errors(errors)
}

fn validate_scalar(value: &Value, key: &str, spec: &FieldSpec, errors: &mut Vec<ValidationError>) {
    let path = format!("/{key}");
    match spec.field_type {
        FieldType::Count => match value {
            Value::Number(n) if n.as_u64().is_some() => {}
            Value::Number(n) if n.as_i64().is_some_and(|i| i < 0) => {
                errors.push(ValidationError::new(
                    &path,
                    ErrorCode::OutOfRange,
                    format!("'{key}' must be non-negative"),
                ));
            }
            _ => errors.push(ValidationError::new(
                &path,
                ErrorCode::WrongType,
                format!("'{key}' must be a non-negative integer"),
            )),
        },
        FieldType::Base64 => {
            if !value.is_string() {
                errors.push(ValidationError::new(
                    &path,
                    ErrorCode::WrongType,
                    format!("'{key}' must be a string"),
                ));
            }
        }
        _ => {
            if !is_number(value) {
                errors.push(ValidationError::new(
                    &path,
                    ErrorCode::WrongType,
                    format!("'{key}' must be numeric"),
                ));
            }
        }
    }
}

fn validate_field(value: &Value, path: &str, spec: &FieldSpec, errors: &mut Vec<ValidationError>) {
    match spec.field_type {
        FieldType::Number | FieldType::Count => {
            if !is_number(value) {
                errors.push(ValidationError::new(
                    path,
                    ErrorCode::WrongType,
                    "expected a number",
                ));
                return;
            }
            let v = value.as_f64().unwrap_or(f64::NAN);
            if spec.field_type == FieldType::Count && (v < 0.0 || v.fract() != 0.0) {
                errors.push(ValidationError::new(
                    path,
                    ErrorCode::OutOfRange,
                    "expected a non-negative integer",
                ));
            }
            if let Some(min) = spec.min {
                if v < min {
                    errors.push(ValidationError::new(
                        path,
                        ErrorCode::OutOfRange,
                        format!("{v} is below the minimum {min}"),
                    ));
                }
            }
            if let Some(max) = spec.max {
                if v > max {
                    errors.push(ValidationError::new(
                        path,
                        ErrorCode::OutOfRange,
                        format!("{v} is above the maximum {max}"),
                    ));
                }
            }
        }
        FieldType::Vec3 => match value.as_array() {
            Some(arr) if arr.len() == 3 => {
                for (i, item) in arr.iter().enumerate() {
                    if !is_number(item) {
                        errors.push(ValidationError::new(
                            format!("{path}/{i}"),
                            ErrorCode::WrongType,
                            "expected a number",
                        ));
                    }
                }
            }
            Some(arr) => errors.push(ValidationError::new(
                path,
                ErrorCode::WrongType,
                format!("expected exactly 3 components, got {}", arr.len()),
            )),
            None => errors.push(ValidationError::new(
                path,
                ErrorCode::WrongType,
                "expected a 3-element array",
            )),
        },
        FieldType::Base64 => {
            if !value.is_string() {
                errors.push(ValidationError::new(
                    path,
                    ErrorCode::WrongType,
                    "expected a string",
                ));
            }
        }
    }
}

/// Validates a whole dataset: the union of per-record reports (paths
/// prefixed `/records/<i>`) plus the non-decreasing time check.
pub fn validate_dataset(records: &[Value], schemas: &SchemaSet) -> ValidationReport {
    let mut errors = Vec::new();
    let mut prev_time: Option<(usize, i64)> = None;
    for (i, record) in records.iter().enumerate() {
        let report = validate_record(record, schemas);
        errors.extend(report.prefixed(&format!("/records/{i}")));

        let time = record
            .as_object()
            .and_then(|o| o.get("time"))
            .and_then(time_nanos);
        if let Some(t) = time {
            if let Some((prev_idx, prev)) = prev_time {
                if t < prev {
                    errors.push(ValidationError::new(
                        format!("/records/{i}/time"),
                        ErrorCode::UnsortedTime,
                        format!(
                            "time {t} at record {i} precedes time {prev} at record {prev_idx}"
                        ),
                    ));
                }
            }
            prev_time = Some((i, t));
        }
    }
    ValidationReport::from_errors(errors)
}
