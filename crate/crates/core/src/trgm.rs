//! Transformation rule generation and script execution.
//!
//! Given one (raw input, standardized output) example pair, the deriver
//! finds, for every output leaf, an input leaf that is equal — directly,
//! after timestamp normalization, or after a registered unit conversion —
//! and emits an inputPath→outputPath rule. Rules plus normalization
//! post-ops form a reusable transformation script: payloads with the same
//! structure standardize mechanically from then on, no backend calls.
//!
//! Output paths always take the `$[?(@.name == '<Kind>')].field` form, so
//! a script produces at most one record per sensor kind per application.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::jsonpath::{self, parse_path, PathError, PathExpr, Segment};
use crate::schema::{
    coerce_units, normalize_timestamp, unit_conversions, SensorKind, StandardizedDataset,
};
use crate::validation::{ErrorCode, ValidationError, ValidationReport};

/// Relative tolerance for double comparison in script validation; unit
/// conversions introduce representable rounding.
const COMPARE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrgmError {
    #[error("no input counterpart for output leaves: {}", leaves.join(", "))]
    UnmatchedLeaf { leaves: Vec<String> },
    #[error("dataset holds more than one '{0}' record; output paths address kinds uniquely")]
    DuplicateKind(SensorKind),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// One inputPath→outputPath pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformationRule {
    #[serde(rename = "inputPath")]
    pub input_path: String,
    #[serde(rename = "outputPath")]
    pub output_path: String,
}

/// Normalization applied after path copying, addressed by output path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum PostOperation {
    NormalizeTimestamp,
    CoerceUnit { unit: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostOp {
    #[serde(rename = "outputPath")]
    pub output_path: String,
    #[serde(flatten)]
    pub operation: PostOperation,
}

/// An ordered, reusable transformation script: rule order is execution
/// order, later writes win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformationScript {
    pub rules: Vec<TransformationRule>,
    #[serde(default)]
    pub post_ops: Vec<PostOp>,
}

impl TransformationScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }
}

/// How an input leaf relates to an output leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchKind {
    Exact,
    Timestamp,
    /// Matched through a registered unit conversion; carries the declared
    /// source unit.
    Unit(String),
    None,
}

fn numbers_equal(a: &Value, b: &Value) -> bool {
    match (a.as_i64(), b.as_i64()) {
        (Some(x), Some(y)) => x == y,
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

/// Classifies the relation between two scalar leaves. Ties break by
/// precedence Exact > Timestamp > Unit.
pub fn value_match(input_leaf: &Value, output_leaf: &Value) -> MatchKind {
    let exact = match (input_leaf, output_leaf) {
        (Value::Number(_), Value::Number(_)) => numbers_equal(input_leaf, output_leaf),
        _ => input_leaf == output_leaf,
    };
    if exact {
        return MatchKind::Exact;
    }
    if let Some(target) = output_leaf.as_i64() {
        if let Ok(nanos) = normalize_timestamp(input_leaf) {
            if nanos == target {
                return MatchKind::Timestamp;
            }
        }
    }
    if let (Some(input), Some(output)) = (input_leaf.as_f64(), output_leaf.as_f64()) {
        for (unit, factor) in unit_conversions() {
            let converted = input * factor;
            let tol = COMPARE_REL_TOL * output.abs().max(f64::MIN_POSITIVE);
            if (converted - output).abs() <= tol {
                return MatchKind::Unit(unit.to_string());
            }
        }
    }
    MatchKind::None
}

/// A scalar leaf of a document with the path that addresses it.
struct Leaf {
    path: String,
    value: Value,
}

fn is_scalar(value: &Value) -> bool {
    !matches!(value, Value::Array(_) | Value::Object(_))
}

/// Keys must be expressible in dot syntax to be addressable by a rule.
fn dot_safe(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn collect_leaves(doc: &Value, prefix: &str, out: &mut Vec<Leaf>) {
    match doc {
        Value::Object(map) => {
            for (key, value) in map {
                if !dot_safe(key) {
                    continue;
                }
                collect_leaves(value, &format!("{prefix}.{key}"), out);
            }
        }
        Value::Array(items) => {
            for (i, value) in items.iter().enumerate() {
                collect_leaves(value, &format!("{prefix}[{i}]"), out);
            }
        }
        _ => out.push(Leaf {
            path: prefix.to_string(),
            value: doc.clone(),
        }),
    }
}

/// One target leaf of the expected output: its addressing path and value.
struct TargetLeaf {
    output_path: String,
    value: Value,
}

fn collect_target_leaves(dataset: &StandardizedDataset) -> Result<Vec<TargetLeaf>, TrgmError> {
    let mut seen: BTreeSet<SensorKind> = BTreeSet::new();
    let mut targets = Vec::new();
    for record in dataset.records() {
        if !seen.insert(record.name) {
            return Err(TrgmError::DuplicateKind(record.name));
        }
        let base = format!("$[?(@.name == '{}')]", record.name.as_str());
        let value = record.to_value();
        let map = value.as_object().expect("record serializes to object");
        for (key, field_value) in map {
            if key == "name" {
                continue; // established by the filter itself
            }
            let mut leaves = Vec::new();
            collect_leaves(field_value, &format!("{base}.{key}"), &mut leaves);
            targets.extend(leaves.into_iter().map(|leaf| TargetLeaf {
                output_path: leaf.path,
                value: leaf.value,
            }));
        }
    }
    Ok(targets)
}

/// Everything the deriver produced: the script, soft warnings (ambiguous
/// sources), and output leaves that matched nothing.
#[derive(Debug, Clone)]
pub struct DerivedScript {
    pub script: TransformationScript,
    pub warnings: Vec<String>,
    /// Output paths with no input counterpart, in output order.
    pub unmatched: Vec<String>,
}

/// Derives a transformation script from an example pair. Unmatched leaves
/// are reported in the result, never silently dropped.
pub fn derive_script(
    example_input: &Value,
    example_output: &StandardizedDataset,
) -> Result<DerivedScript, TrgmError> {
    derive_restricted(example_input, example_output, None)
}

/// [`derive_script`] limited to output paths in `restrict_to` (canonical
/// rendered form), for the script repair loop.
fn derive_restricted(
    example_input: &Value,
    example_output: &StandardizedDataset,
    restrict_to: Option<&BTreeSet<String>>,
) -> Result<DerivedScript, TrgmError> {
    let mut input_leaves = Vec::new();
    collect_leaves(example_input, "$", &mut input_leaves);

    let targets = collect_target_leaves(example_output)?;

    let mut rules = Vec::new();
    let mut post_ops = Vec::new();
    let mut warnings = Vec::new();
    let mut unmatched = Vec::new();

    for target in &targets {
        if let Some(allowed) = restrict_to {
            if !allowed.contains(&target.output_path) {
                continue;
            }
        }
        // Scan input leaves in document order; precedence
        // Exact > Timestamp > Unit, first hit of the winning class.
        let mut exact: Option<&Leaf> = None;
        let mut timestamp: Option<&Leaf> = None;
        let mut unit: Option<(&Leaf, String)> = None;
        let mut exact_count = 0usize;
        for leaf in &input_leaves {
            match value_match(&leaf.value, &target.value) {
                MatchKind::Exact => {
                    if exact.is_none() {
                        exact = Some(leaf);
                    }
                    exact_count += 1;
                }
                MatchKind::Timestamp => {
                    if timestamp.is_none() {
                        timestamp = Some(leaf);
                    }
                }
                MatchKind::Unit(u) => {
                    if unit.is_none() {
                        unit = Some((leaf, u));
                    }
                }
                MatchKind::None => {}
            }
        }

        let (source, operation) = if let Some(leaf) = exact {
            if exact_count > 1 {
                warnings.push(format!(
                    "{}: {exact_count} input leaves match; using first in document order ({})",
                    target.output_path, leaf.path
                ));
            }
            (leaf, None)
        } else if let Some(leaf) = timestamp {
            (leaf, Some(PostOperation::NormalizeTimestamp))
        } else if let Some((leaf, u)) = unit {
            (leaf, Some(PostOperation::CoerceUnit { unit: u }))
        } else {
            unmatched.push(target.output_path.clone());
            continue;
        };

        rules.push(TransformationRule {
            input_path: source.path.clone(),
            output_path: target.output_path.clone(),
        });
        if let Some(operation) = operation {
            post_ops.push(PostOp {
                output_path: target.output_path.clone(),
                operation,
            });
        }
    }

    Ok(DerivedScript {
        script: TransformationScript { rules, post_ops },
        warnings,
        unmatched,
    })
}

/// Derives the rule list alone; any output leaf without an input
/// counterpart is an error listing every such leaf.
pub fn derive_rules(
    example_input: &Value,
    example_output: &StandardizedDataset,
) -> Result<Vec<TransformationRule>, TrgmError> {
    let derived = derive_script(example_input, example_output)?;
    if !derived.unmatched.is_empty() {
        return Err(TrgmError::UnmatchedLeaf {
            leaves: derived.unmatched,
        });
    }
    Ok(derived.script.rules)
}

/// Result of applying a script: the produced records (time-ordered) plus
/// rules whose source path matched nothing. Missing sources do not stop
/// execution.
#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    pub records: Vec<Value>,
    pub missing: Vec<TransformationRule>,
    pub warnings: Vec<String>,
}

impl ApplyOutcome {
    pub fn dataset(&self) -> Result<StandardizedDataset, crate::schema::SchemaError> {
        let records: Result<Vec<_>, _> = self
            .records
            .iter()
            .map(crate::schema::StandardizedRecord::from_value)
            .collect();
        Ok(StandardizedDataset::new(records?))
    }
}

/// Extracts (sensor kind, terminal field) from an output path of the
/// canonical `$[?(@.name == 'Kind')].field...` form, for unit coercion.
fn output_target(path: &PathExpr) -> Option<(SensorKind, String)> {
    let mut kind = None;
    let mut field = None;
    for segment in path.segments() {
        match segment {
            Segment::Filter { field: f, literal } => {
                if f == "name" {
                    if let crate::jsonpath::FilterLiteral::Str(name) = literal {
                        kind = SensorKind::parse(name).ok();
                    }
                }
            }
            Segment::Child(name) => field = Some(name.clone()),
            _ => {}
        }
    }
    Some((kind?, field?))
}

/// Executes a script against an input document: starts from an empty root
/// array, copies each rule's first source match into the output, then
/// applies post-ops, then orders records by time.
pub fn apply_script(script: &TransformationScript, input: &Value) -> Result<ApplyOutcome, TrgmError> {
    let mut output = Value::Array(Vec::new());
    let mut missing = Vec::new();
    let mut warnings = Vec::new();

    for rule in &script.rules {
        let in_path = parse_path(&rule.input_path)?;
        let out_path = parse_path(&rule.output_path)?;
        let matches = jsonpath::get(input, &in_path);
        let Some(first) = matches.first() else {
            missing.push(rule.clone());
            continue;
        };
        if matches.len() > 1 {
            warnings.push(format!(
                "{}: {} source matches; using first in document order",
                rule.input_path,
                matches.len()
            ));
        }
        output = jsonpath::set(&output, &out_path, first)?;
    }

    for post_op in &script.post_ops {
        let path = parse_path(&post_op.output_path)?;
        let Some(current) = jsonpath::get(&output, &path).into_iter().next().cloned() else {
            continue; // the rule feeding this path had a missing source
        };
        let replacement = match &post_op.operation {
            PostOperation::NormalizeTimestamp => match normalize_timestamp(&current) {
                Ok(nanos) => json!(nanos),
                Err(e) => {
                    warnings.push(format!("{}: {e}", post_op.output_path));
                    continue;
                }
            },
            PostOperation::CoerceUnit { unit } => {
                let Some((kind, field)) = output_target(&path) else {
                    warnings.push(format!(
                        "{}: cannot locate kind/field for unit coercion",
                        post_op.output_path
                    ));
                    continue;
                };
                let Some(number) = current.as_f64() else {
                    warnings.push(format!(
                        "{}: non-numeric value under unit coercion",
                        post_op.output_path
                    ));
                    continue;
                };
                match coerce_units(kind, &field, number, Some(unit)) {
                    Ok(converted) => json!(converted),
                    Err(e) => {
                        warnings.push(format!("{}: {e}", post_op.output_path));
                        continue;
                    }
                }
            }
        };
        output = jsonpath::set(&output, &path, &replacement)?;
    }

    let mut records = match output {
        Value::Array(items) => items,
        other => vec![other],
    };
    records.sort_by_key(|r| {
        r.as_object()
            .and_then(|o| o.get("time"))
            .and_then(Value::as_i64)
            .unwrap_or(i64::MIN)
    });

    Ok(ApplyOutcome {
        records,
        missing,
        warnings,
    })
}

/// Semantic dataset comparison for script validation. Records pair by
/// sensor kind; leaves compare exactly for strings and integers and within
/// 1e-9 relative for doubles. Differences come back as a report whose
/// paths point into the expected dataset.
pub fn compare_to_expected(actual: &[Value], expected: &[Value]) -> ValidationReport {
    let mut errors = Vec::new();

    let kind_of = |record: &Value| -> Option<String> {
        record.get("name").and_then(Value::as_str).map(str::to_string)
    };

    for (i, expected_record) in expected.iter().enumerate() {
        let Some(kind) = kind_of(expected_record) else {
            continue;
        };
        let found = actual.iter().find(|r| kind_of(r).as_deref() == Some(&kind));
        match found {
            None => errors.push(ValidationError::new(
                format!("/records/{i}"),
                ErrorCode::MissingField,
                format!("no '{kind}' record in script output"),
            )),
            Some(actual_record) => {
                compare_values(
                    actual_record,
                    expected_record,
                    &format!("/records/{i}"),
                    &mut errors,
                );
            }
        }
    }
    for (j, actual_record) in actual.iter().enumerate() {
        let Some(kind) = kind_of(actual_record) else {
            errors.push(ValidationError::new(
                format!("/records/{j}"),
                ErrorCode::WrongType,
                "script output record lacks a 'name'".to_string(),
            ));
            continue;
        };
        if !expected.iter().any(|r| kind_of(r).as_deref() == Some(&kind)) {
            errors.push(ValidationError::new(
                format!("/records/{j}"),
                ErrorCode::ExtraField,
                format!("unexpected '{kind}' record in script output"),
            ));
        }
    }
    ValidationReport::from_errors(errors)
}

fn scalars_match(actual: &Value, expected: &Value) -> bool {
    match (actual, expected) {
        (Value::Number(_), Value::Number(_)) => {
            if let (Some(a), Some(e)) = (actual.as_i64(), expected.as_i64()) {
                return a == e;
            }
            let (Some(a), Some(e)) = (actual.as_f64(), expected.as_f64()) else {
                return false;
            };
            let tol = COMPARE_REL_TOL * e.abs().max(f64::MIN_POSITIVE);
            (a - e).abs() <= tol
        }
        _ => actual == expected,
    }
}

fn compare_values(actual: &Value, expected: &Value, at: &str, errors: &mut Vec<ValidationError>) {
    match (actual, expected) {
        (Value::Object(a), Value::Object(e)) => {
            for (key, expected_child) in e {
                match a.get(key) {
                    None => errors.push(ValidationError::new(
                        format!("{at}/{key}"),
                        ErrorCode::MissingField,
                        "leaf missing from script output".to_string(),
                    )),
                    Some(actual_child) => {
                        compare_values(actual_child, expected_child, &format!("{at}/{key}"), errors)
                    }
                }
            }
            for key in a.keys() {
                if !e.contains_key(key) {
                    errors.push(ValidationError::new(
                        format!("{at}/{key}"),
                        ErrorCode::ExtraField,
                        "leaf not present in expected output".to_string(),
                    ));
                }
            }
        }
        (Value::Array(a), Value::Array(e)) => {
            if a.len() != e.len() {
                errors.push(ValidationError::new(
                    at,
                    ErrorCode::WrongType,
                    format!("length mismatch: expected {}, got {}", e.len(), a.len()),
                ));
                return;
            }
            for (i, (actual_child, expected_child)) in a.iter().zip(e).enumerate() {
                compare_values(actual_child, expected_child, &format!("{at}/{i}"), errors);
            }
        }
        _ if is_scalar(actual) && is_scalar(expected) => {
            if !scalars_match(actual, expected) {
                errors.push(ValidationError::new(
                    at,
                    ErrorCode::WrongType,
                    format!("value mismatch: expected {expected}, got {actual}"),
                ));
            }
        }
        _ => errors.push(ValidationError::new(
            at,
            ErrorCode::WrongType,
            "shape mismatch between script output and expected".to_string(),
        )),
    }
}

/// Converts a report pointer (`/records/<i>/...`) back into the output path
/// addressing that leaf, using the expected dataset for record kinds.
fn pointer_to_output_path(pointer: &str, expected: &[Value]) -> Option<String> {
    let rest = pointer.strip_prefix("/records/")?;
    let mut parts = rest.split('/');
    let index: usize = parts.next()?.parse().ok()?;
    let kind = expected.get(index)?.get("name")?.as_str()?;
    let mut path = format!("$[?(@.name == '{kind}')]");
    for part in parts {
        if let Ok(i) = part.parse::<usize>() {
            path.push_str(&format!("[{i}]"));
        } else {
            path.push('.');
            path.push_str(part);
        }
    }
    Some(path)
}

/// Outcome of the iterative script refinement loop.
#[derive(Debug, Clone)]
pub struct ScriptValidationOutcome {
    pub script: TransformationScript,
    pub converged: bool,
    pub iterations_used: u32,
    pub report: ValidationReport,
}

/// Applies the script, compares against the expected dataset, and on
/// mismatch re-derives rules restricted to the mismatched leaves, merging
/// them into the script — up to `max_iterations` rounds.
pub fn validate_script(
    script: &TransformationScript,
    example_input: &Value,
    expected: &StandardizedDataset,
    max_iterations: u32,
) -> Result<ScriptValidationOutcome, TrgmError> {
    let expected_values = expected.to_values();
    let mut current = script.clone();
    let mut report = ValidationReport::ok();

    for iteration in 1..=max_iterations {
        let outcome = apply_script(&current, example_input)?;
        report = compare_to_expected(&outcome.records, &expected_values);
        if report.valid {
            return Ok(ScriptValidationOutcome {
                script: current,
                converged: true,
                iterations_used: iteration,
                report,
            });
        }
        if iteration == max_iterations {
            break;
        }

        // Re-derive restricted to the mismatched leaves and merge.
        let mut stale: BTreeSet<String> = BTreeSet::new();
        for error in &report.errors {
            if let Some(path) = pointer_to_output_path(&error.path, &expected_values) {
                stale.insert(path);
            }
        }
        let derived = derive_restricted(example_input, expected, Some(&stale))?;
        current.rules.retain(|r| !stale.contains(&r.output_path));
        current
            .post_ops
            .retain(|p| !stale.contains(&p.output_path));
        current.rules.extend(derived.script.rules);
        current.post_ops.extend(derived.script.post_ops);
    }

    Ok(ScriptValidationOutcome {
        script: current,
        converged: false,
        iterations_used: max_iterations,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{SensorPayload, StandardizedRecord};

    const T: i64 = 1_705_307_400_000_000_000;

    fn accel_dataset() -> StandardizedDataset {
        StandardizedDataset::new(vec![StandardizedRecord::new(
            SensorKind::Accelerometer,
            T,
            SensorPayload::Axes {
                x: 0.1,
                y: 0.25,
                z: 9.8,
            },
        )
        .unwrap()])
    }

    #[test]
    fn value_match_timestamp() {
        assert_eq!(
            value_match(&json!(1_705_307_400i64), &json!(T)),
            MatchKind::Timestamp
        );
    }

    #[test]
    fn value_match_unit_gravity() {
        assert_eq!(
            value_match(&json!(1.0), &json!(9.80665)),
            MatchKind::Unit("g".into())
        );
    }

    #[test]
    fn value_match_exact_beats_everything() {
        assert_eq!(value_match(&json!(5), &json!(5)), MatchKind::Exact);
        assert_eq!(value_match(&json!(5), &json!(5.0)), MatchKind::Exact);
        assert_eq!(value_match(&json!("a"), &json!("b")), MatchKind::None);
    }

    #[test]
    fn derive_finds_timestamp_rule_with_post_op() {
        let input = json!({"sensor_data": {"Accelerometer": {
            "timestamp": 1_705_307_400i64, "x": 0.1, "y": 0.25, "z": 9.8,
        }}});
        let derived = derive_script(&input, &accel_dataset()).unwrap();
        assert!(derived.unmatched.is_empty());
        let time_rule = derived
            .script
            .rules
            .iter()
            .find(|r| r.output_path == "$[?(@.name == 'Accelerometer')].time")
            .expect("time rule derived");
        assert_eq!(time_rule.input_path, "$.sensor_data.Accelerometer.timestamp");
        assert!(derived.script.post_ops.iter().any(|p| {
            p.output_path == "$[?(@.name == 'Accelerometer')].time"
                && p.operation == PostOperation::NormalizeTimestamp
        }));
    }

    #[test]
    fn derive_round_trip_reproduces_output() {
        let input = json!({"sensor_data": {"Accelerometer": {
            "timestamp": 1_705_307_400i64, "x": 0.1, "y": 0.25, "z": 9.8,
        }}});
        let expected = accel_dataset();
        let derived = derive_script(&input, &expected).unwrap();
        let outcome = apply_script(&derived.script, &input).unwrap();
        let report = compare_to_expected(&outcome.records, &expected.to_values());
        assert!(report.valid, "{:?}", report.errors);
    }

    #[test]
    fn derive_identity_on_already_standardized_input() {
        let expected = accel_dataset();
        let input = Value::Array(expected.to_values());
        let rules = derive_rules(&input, &expected).unwrap();
        let time_rule = rules
            .iter()
            .find(|r| r.output_path.ends_with(".time"))
            .unwrap();
        assert_eq!(time_rule.input_path, "$[0].time");
    }

    #[test]
    fn unmatchable_leaf_is_reported_not_dropped() {
        let input = json!({"acc": {"ts": 1_705_307_400i64, "x": 0.1, "y": 0.25}});
        let err = derive_rules(&input, &accel_dataset()).unwrap_err();
        match err {
            TrgmError::UnmatchedLeaf { leaves } => {
                assert_eq!(leaves, vec!["$[?(@.name == 'Accelerometer')].values.z"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_script_produces_empty_dataset() {
        let outcome = apply_script(&TransformationScript::default(), &json!({"a": 1})).unwrap();
        assert!(outcome.records.is_empty());
    }

    #[test]
    fn later_rules_overwrite_earlier_writes() {
        let script = TransformationScript {
            rules: vec![
                TransformationRule {
                    input_path: "$.first".into(),
                    output_path: "$[?(@.name == 'Pedometer')].steps".into(),
                },
                TransformationRule {
                    input_path: "$.second".into(),
                    output_path: "$[?(@.name == 'Pedometer')].steps".into(),
                },
            ],
            post_ops: vec![],
        };
        let outcome = apply_script(&script, &json!({"first": 1, "second": 2})).unwrap();
        assert_eq!(outcome.records[0]["steps"], json!(2));
    }

    #[test]
    fn missing_source_reports_rule_and_continues() {
        let script = TransformationScript {
            rules: vec![
                TransformationRule {
                    input_path: "$.nope".into(),
                    output_path: "$[?(@.name == 'Pedometer')].steps".into(),
                },
                TransformationRule {
                    input_path: "$.t".into(),
                    output_path: "$[?(@.name == 'Pedometer')].time".into(),
                },
            ],
            post_ops: vec![],
        };
        let outcome = apply_script(&script, &json!({"t": T})).unwrap();
        assert_eq!(outcome.missing.len(), 1);
        assert_eq!(outcome.missing[0].input_path, "$.nope");
        assert_eq!(outcome.records[0]["time"], json!(T));
    }

    #[test]
    fn validate_script_fixed_point_is_one_iteration() {
        let input = json!({"acc": {"ts": 1_705_307_400i64, "x": 0.1, "y": 0.25, "z": 9.8}});
        let expected = accel_dataset();
        let script = derive_script(&input, &expected).unwrap().script;
        let outcome = validate_script(&script, &input, &expected, 5).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.iterations_used, 1);
    }

    #[test]
    fn validate_script_repairs_deleted_rule() {
        let input = json!({"acc": {"ts": 1_705_307_400i64, "x": 0.1, "y": 0.25, "z": 9.8}});
        let expected = accel_dataset();
        let good = derive_script(&input, &expected).unwrap().script;
        // Oracle: the known-good script's output.
        let good_output = apply_script(&good, &input).unwrap();
        assert!(compare_to_expected(&good_output.records, &expected.to_values()).valid);

        let mut broken = good.clone();
        broken.rules.retain(|r| !r.output_path.ends_with(".values.z"));
        let outcome = validate_script(&broken, &input, &expected, 5).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.iterations_used, 2);
        let repaired_output = apply_script(&outcome.script, &input).unwrap();
        assert_eq!(repaired_output.records, good_output.records);
    }

    #[test]
    fn validate_script_gives_up_on_unmatchable_leaf() {
        let input = json!({"acc": {"ts": 1_705_307_400i64, "x": 0.1, "y": 0.25}});
        let expected = accel_dataset();
        let script = derive_script(&input, &expected).unwrap().script;
        let outcome = validate_script(&script, &input, &expected, 5).unwrap();
        assert!(!outcome.converged);
        assert_eq!(outcome.iterations_used, 5);
        assert!(outcome
            .report
            .errors
            .iter()
            .any(|e| e.path == "/records/0/values/z"));
    }

    #[test]
    fn script_file_round_trips() {
        let script = TransformationScript {
            rules: vec![TransformationRule {
                input_path: "$.sensor_data.Accelerometer.timestamp".into(),
                output_path: "$[?(@.name == 'Accelerometer')].time".into(),
            }],
            post_ops: vec![PostOp {
                output_path: "$[?(@.name == 'Accelerometer')].time".into(),
                operation: PostOperation::NormalizeTimestamp,
            }],
        };
        let text = script.to_json_pretty();
        assert!(text.contains("\"inputPath\""));
        assert!(text.contains("\"outputPath\""));
        let back = TransformationScript::from_json(&text).unwrap();
        assert_eq!(back, script);
    }

    #[test]
    fn duplicate_kind_rejected() {
        let records = vec![
            StandardizedRecord::new(SensorKind::Pedometer, T, SensorPayload::Steps(1)).unwrap(),
            StandardizedRecord::new(SensorKind::Pedometer, T + 1, SensorPayload::Steps(2)).unwrap(),
        ];
        let dataset = StandardizedDataset::new(records);
        let err = derive_script(&json!({}), &dataset).unwrap_err();
        assert!(matches!(err, TrgmError::DuplicateKind(SensorKind::Pedometer)));
    }
}
