//! Canonical standardized sensor data model.
//!
//! Every pipeline stage speaks one format: newline-delimited JSON records,
//! one [`StandardizedRecord`] per line. A record is `{"name", "time", ...}`
//! where the reading lives under `"values"` for most kinds, `"steps"` for
//! the pedometer, and `"image"` for camera frames. Times are UNIX
//! nanoseconds throughout.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Standard gravity in m/s², used for g-unit conversion and EKF gravity
/// compensation.
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Smallest `time` accepted on a standardized record. Values below this are
/// treated as mis-scaled (seconds or milliseconds that were never converted).
/// 1e15 ns ≈ 2001-09-09, comfortably before any data this pipeline sees.
pub const MIN_TIME_NANOS: i64 = 1_000_000_000_000_000;

pub const NANOS_PER_SEC: i64 = 1_000_000_000;

/// Tolerance on the unit-quaternion norm for orientation records.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("unparseable timestamp: {0}")]
    UnparseableTimestamp(String),
    #[error("negative timestamp: {0}")]
    NegativeTimestamp(String),
    #[error("unknown unit '{unit}' for {kind} field '{field}'")]
    UnknownUnit {
        kind: SensorKind,
        field: String,
        unit: String,
    },
    #[error("field '{field}' does not belong to the {kind} schema")]
    UnknownField { kind: SensorKind, field: String },
    #[error("unknown sensor kind '{0}'")]
    UnknownKind(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// The eleven sensor kinds of the canonical schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorKind {
    Magnetometer,
    Gyroscope,
    Accelerometer,
    Gravity,
    #[serde(rename = "UWB")]
    Uwb,
    Bluetooth,
    Pedometer,
    Orientation,
    Barometer,
    Location,
    Image,
}

impl SensorKind {
    pub const ALL: [SensorKind; 11] = [
        SensorKind::Magnetometer,
        SensorKind::Gyroscope,
        SensorKind::Accelerometer,
        SensorKind::Gravity,
        SensorKind::Uwb,
        SensorKind::Bluetooth,
        SensorKind::Pedometer,
        SensorKind::Orientation,
        SensorKind::Barometer,
        SensorKind::Location,
        SensorKind::Image,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SensorKind::Magnetometer => "Magnetometer",
            SensorKind::Gyroscope => "Gyroscope",
            SensorKind::Accelerometer => "Accelerometer",
            SensorKind::Gravity => "Gravity",
            SensorKind::Uwb => "UWB",
            SensorKind::Bluetooth => "Bluetooth",
            SensorKind::Pedometer => "Pedometer",
            SensorKind::Orientation => "Orientation",
            SensorKind::Barometer => "Barometer",
            SensorKind::Location => "Location",
            SensorKind::Image => "Image",
        }
    }

    pub fn parse(name: &str) -> Result<Self, SchemaError> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == name)
            .ok_or_else(|| SchemaError::UnknownKind(name.to_string()))
    }

    /// Key under which the reading is stored: `values`, `steps`, or `image`.
    pub fn payload_key(&self) -> &'static str {
        match self {
            SensorKind::Pedometer => "steps",
            SensorKind::Image => "image",
            _ => "values",
        }
    }

    /// Required fields inside the payload object, with canonical units.
    /// Pedometer and Image carry a bare scalar, not an object.
    pub fn payload_fields(&self) -> &'static [(&'static str, &'static str)] {
        match self {
            SensorKind::Magnetometer => &[("x", "µT"), ("y", "µT"), ("z", "µT")],
            SensorKind::Gyroscope => &[("x", "rad/s"), ("y", "rad/s"), ("z", "rad/s")],
            SensorKind::Accelerometer | SensorKind::Gravity => {
                &[("x", "m/s²"), ("y", "m/s²"), ("z", "m/s²")]
            }
            SensorKind::Uwb | SensorKind::Bluetooth => &[("position", "m")],
            SensorKind::Pedometer => &[("steps", "count")],
            SensorKind::Orientation => &[("qx", ""), ("qy", ""), ("qz", ""), ("qw", "")],
            SensorKind::Barometer => &[("relative_altitude", "m"), ("pressure", "mBar")],
            SensorKind::Location => &[
                ("latitude", "°"),
                ("longitude", "°"),
                ("altitude", "m"),
                ("speed", "m/s"),
                ("speed_accuracy", "m/s"),
                ("horizontal_accuracy", "m"),
                ("vertical_accuracy", "m"),
            ],
            SensorKind::Image => &[("image", "data")],
        }
    }

    /// Canonical unit for one payload field.
    pub fn field_unit(&self, field: &str) -> Result<&'static str, SchemaError> {
        self.payload_fields()
            .iter()
            .find(|(name, _)| *name == field)
            .map(|(_, unit)| *unit)
            .ok_or_else(|| SchemaError::UnknownField {
                kind: *self,
                field: field.to_string(),
            })
    }
}

impl std::fmt::Display for SensorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SensorKind {
    type Err = SchemaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// One unstandardized entry as received from a device or log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPayload {
    /// Opaque producer identifier, e.g. the ingest route name.
    pub source_id: String,
    /// Arrival time, UNIX nanoseconds.
    pub received_at: i64,
    /// The payload document as parsed; any well-formed JSON tree.
    pub body: Value,
}

impl RawPayload {
    pub fn new(source_id: impl Into<String>, received_at: i64, body: Value) -> Result<Self, SchemaError> {
        if received_at <= 0 {
            return Err(SchemaError::NegativeTimestamp(received_at.to_string()));
        }
        Ok(Self {
            source_id: source_id.into(),
            received_at,
            body,
        })
    }
}

/// Per-kind reading carried by a [`StandardizedRecord`].
#[derive(Debug, Clone, PartialEq)]
pub enum SensorPayload {
    /// Magnetometer, Gyroscope, Accelerometer, Gravity.
    Axes { x: f64, y: f64, z: f64 },
    /// UWB and Bluetooth position fixes, meters in the local frame.
    Position([f64; 3]),
    /// Pedometer step count.
    Steps(u64),
    /// Orientation unit quaternion.
    Quaternion { qx: f64, qy: f64, qz: f64, qw: f64 },
    Barometer {
        relative_altitude: f64,
        pressure: f64,
    },
    Location {
        latitude: f64,
        longitude: f64,
        altitude: f64,
        speed: f64,
        speed_accuracy: f64,
        horizontal_accuracy: f64,
        vertical_accuracy: f64,
    },
    /// Base64 image data. Carried through the pipeline, never fused.
    Image(String),
}

impl SensorPayload {
    fn matches_kind(&self, kind: SensorKind) -> bool {
        matches!(
            (self, kind),
            (
                SensorPayload::Axes { .. },
                SensorKind::Magnetometer
                    | SensorKind::Gyroscope
                    | SensorKind::Accelerometer
                    | SensorKind::Gravity
            ) | (
                SensorPayload::Position(_),
                SensorKind::Uwb | SensorKind::Bluetooth
            ) | (SensorPayload::Steps(_), SensorKind::Pedometer)
                | (SensorPayload::Quaternion { .. }, SensorKind::Orientation)
                | (SensorPayload::Barometer { .. }, SensorKind::Barometer)
                | (SensorPayload::Location { .. }, SensorKind::Location)
                | (SensorPayload::Image(_), SensorKind::Image)
        )
    }
}

/// One standardized record: the unit of exchange between every module.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedRecord {
    pub name: SensorKind,
    pub time: i64,
    pub payload: SensorPayload,
}

impl StandardizedRecord {
    /// Builds a record, enforcing the schema invariants: payload shape must
    /// suit the kind, time must be plausible nanoseconds, quaternions must
    /// be unit within tolerance, latitude/longitude must be in range.
    pub fn new(name: SensorKind, time: i64, payload: SensorPayload) -> Result<Self, SchemaError> {
        if !payload.matches_kind(name) {
            return Err(SchemaError::InvalidRecord(format!(
                "payload shape does not match sensor kind {name}"
            )));
        }
        if time < MIN_TIME_NANOS {
            return Err(SchemaError::InvalidRecord(format!(
                "time {time} is below {MIN_TIME_NANOS}; expected UNIX nanoseconds"
            )));
        }
        match &payload {
            SensorPayload::Quaternion { qx, qy, qz, qw } => {
                let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
                if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
                    return Err(SchemaError::InvalidRecord(format!(
                        "quaternion norm {norm} outside unit tolerance"
                    )));
                }
            }
            SensorPayload::Location {
                latitude,
                longitude,
                ..
            } => {
                if !(-90.0..=90.0).contains(latitude) {
                    return Err(SchemaError::InvalidRecord(format!(
                        "latitude {latitude} out of [-90, 90]"
                    )));
                }
                if !(-180.0..=180.0).contains(longitude) {
                    return Err(SchemaError::InvalidRecord(format!(
                        "longitude {longitude} out of [-180, 180]"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self {
            name,
            time,
            payload,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut map = Map::new();
        map.insert("name".into(), Value::String(self.name.as_str().into()));
        map.insert("time".into(), json!(self.time));
        let payload = match &self.payload {
            SensorPayload::Axes { x, y, z } => json!({"x": x, "y": y, "z": z}),
            SensorPayload::Position(p) => json!({"position": [p[0], p[1], p[2]]}),
            SensorPayload::Steps(n) => json!(n),
            SensorPayload::Quaternion { qx, qy, qz, qw } => {
                json!({"qx": qx, "qy": qy, "qz": qz, "qw": qw})
            }
            SensorPayload::Barometer {
                relative_altitude,
                pressure,
            } => json!({"relative_altitude": relative_altitude, "pressure": pressure}),
            SensorPayload::Location {
                latitude,
                longitude,
                altitude,
                speed,
                speed_accuracy,
                horizontal_accuracy,
                vertical_accuracy,
            } => json!({
                "latitude": latitude,
                "longitude": longitude,
                "altitude": altitude,
                "speed": speed,
                "speed_accuracy": speed_accuracy,
                "horizontal_accuracy": horizontal_accuracy,
                "vertical_accuracy": vertical_accuracy,
            }),
            SensorPayload::Image(data) => Value::String(data.clone()),
        };
        map.insert(self.name.payload_key().into(), payload);
        Value::Object(map)
    }

    /// Parses a record document, rejecting anything that violates the schema
    /// shape. Numeric fields accept integers where doubles are expected.
    pub fn from_value(value: &Value) -> Result<Self, SchemaError> {
        let obj = value
            .as_object()
            .ok_or_else(|| SchemaError::InvalidRecord("record is not an object".into()))?;
        let name = obj
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| SchemaError::InvalidRecord("missing or non-string 'name'".into()))?;
        let kind = SensorKind::parse(name)?;
        let time = obj
            .get("time")
            .and_then(value_as_nanos)
            .ok_or_else(|| SchemaError::InvalidRecord("missing or non-integer 'time'".into()))?;
        let payload_value = obj.get(kind.payload_key()).ok_or_else(|| {
            SchemaError::InvalidRecord(format!("missing '{}'", kind.payload_key()))
        })?;

        let field = |container: &Map<String, Value>, name: &str| -> Result<f64, SchemaError> {
            container
                .get(name)
                .and_then(Value::as_f64)
                .ok_or_else(|| SchemaError::InvalidRecord(format!("missing or non-numeric '{name}'")))
        };

        let payload = match kind {
            SensorKind::Magnetometer
            | SensorKind::Gyroscope
            | SensorKind::Accelerometer
            | SensorKind::Gravity => {
                let values = payload_value
                    .as_object()
                    .ok_or_else(|| SchemaError::InvalidRecord("'values' is not an object".into()))?;
                SensorPayload::Axes {
                    x: field(values, "x")?,
                    y: field(values, "y")?,
                    z: field(values, "z")?,
                }
            }
            SensorKind::Uwb | SensorKind::Bluetooth => {
                let values = payload_value
                    .as_object()
                    .ok_or_else(|| SchemaError::InvalidRecord("'values' is not an object".into()))?;
                let arr = values
                    .get("position")
                    .and_then(Value::as_array)
                    .ok_or_else(|| SchemaError::InvalidRecord("missing 'position' array".into()))?;
                if arr.len() != 3 {
                    return Err(SchemaError::InvalidRecord(
                        "'position' must have exactly 3 components".into(),
                    ));
                }
                let mut p = [0.0; 3];
                for (i, v) in arr.iter().enumerate() {
                    p[i] = v.as_f64().ok_or_else(|| {
                        SchemaError::InvalidRecord(format!("position[{i}] is not numeric"))
                    })?;
                }
                SensorPayload::Position(p)
            }
            SensorKind::Pedometer => {
                let steps = payload_value.as_u64().ok_or_else(|| {
                    SchemaError::InvalidRecord("'steps' must be a non-negative integer".into())
                })?;
                SensorPayload::Steps(steps)
            }
            SensorKind::Orientation => {
                let values = payload_value
                    .as_object()
                    .ok_or_else(|| SchemaError::InvalidRecord("'values' is not an object".into()))?;
                SensorPayload::Quaternion {
                    qx: field(values, "qx")?,
                    qy: field(values, "qy")?,
                    qz: field(values, "qz")?,
                    qw: field(values, "qw")?,
                }
            }
            SensorKind::Barometer => {
                let values = payload_value
                    .as_object()
                    .ok_or_else(|| SchemaError::InvalidRecord("'values' is not an object".into()))?;
                SensorPayload::Barometer {
                    relative_altitude: field(values, "relative_altitude")?,
                    pressure: field(values, "pressure")?,
                }
            }
            SensorKind::Location => {
                let values = payload_value
                    .as_object()
                    .ok_or_else(|| SchemaError::InvalidRecord("'values' is not an object".into()))?;
                SensorPayload::Location {
                    latitude: field(values, "latitude")?,
                    longitude: field(values, "longitude")?,
                    altitude: field(values, "altitude")?,
                    speed: field(values, "speed")?,
                    speed_accuracy: field(values, "speed_accuracy")?,
                    horizontal_accuracy: field(values, "horizontal_accuracy")?,
                    vertical_accuracy: field(values, "vertical_accuracy")?,
                }
            }
            SensorKind::Image => {
                let data = payload_value
                    .as_str()
                    .ok_or_else(|| SchemaError::InvalidRecord("'image' must be a string".into()))?;
                SensorPayload::Image(data.to_string())
            }
        };
        Self::new(kind, time, payload)
    }
}

impl Serialize for StandardizedRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StandardizedRecord {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        StandardizedRecord::from_value(&value).map_err(serde::de::Error::custom)
    }
}

/// A time-ordered sequence of standardized records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StandardizedDataset {
    records: Vec<StandardizedRecord>,
}

impl StandardizedDataset {
    /// Builds a dataset, stably sorting records into non-decreasing time
    /// order.
    pub fn new(mut records: Vec<StandardizedRecord>) -> Self {
        records.sort_by_key(|r| r.time);
        Self { records }
    }

    pub fn records(&self) -> &[StandardizedRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<StandardizedRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_values(&self) -> Vec<Value> {
        self.records.iter().map(|r| r.to_value()).collect()
    }

    /// One record per line, canonical field order, no trailing spaces.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&record.to_value().to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, SchemaError> {
        let values = parse_ndjson(text)?;
        let mut records = Vec::with_capacity(values.len());
        for (line, value) in values {
            let record = StandardizedRecord::from_value(&value).map_err(|e| SchemaError::Line {
                line,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(Self::new(records))
    }
}

/// Parses newline-delimited JSON, returning (1-based line number, value)
/// pairs. Blank lines are skipped.
pub fn parse_ndjson(text: &str) -> Result<Vec<(usize, Value)>, SchemaError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(trimmed).map_err(|e| SchemaError::Line {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

fn value_as_nanos(value: &Value) -> Option<i64> {
    if let Some(n) = value.as_i64() {
        return Some(n);
    }
    // Integer-valued doubles are accepted; sub-nanosecond precision is
    // meaningless here.
    value.as_f64().and_then(|f| {
        if f.fract() == 0.0 && f.abs() < 9.2e18 {
            Some(f as i64)
        } else {
            None
        }
    })
}

/// Converts a raw timestamp (number or string) into UNIX nanoseconds.
///
/// Numeric magnitudes are classified by decade range: [1e8, 1e11) seconds,
/// [1e11, 1e14) milliseconds, [1e14, 1e17) microseconds, >= 1e17 already
/// nanoseconds. The ranges disambiguate every epoch between 1973 and 2100.
/// Strings holding numbers take the same path; anything else must parse as
/// ISO-8601 / RFC-3339.
pub fn normalize_timestamp(raw: &Value) -> Result<i64, SchemaError> {
    match raw {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                normalize_int_timestamp(i)
            } else if let Some(u) = n.as_u64() {
                normalize_int_timestamp(i64::try_from(u).map_err(|_| {
                    SchemaError::UnparseableTimestamp(format!(
                        "{u} exceeds the representable nanosecond range"
                    ))
                })?)
            } else if let Some(f) = n.as_f64() {
                normalize_float_timestamp(f)
            } else {
                Err(SchemaError::UnparseableTimestamp(n.to_string()))
            }
        }
        Value::String(s) => normalize_string_timestamp(s),
        other => Err(SchemaError::UnparseableTimestamp(other.to_string())),
    }
}

fn scale_for_magnitude(magnitude: f64) -> Option<i64> {
    if (1e8..1e11).contains(&magnitude) {
        Some(1_000_000_000)
    } else if (1e11..1e14).contains(&magnitude) {
        Some(1_000_000)
    } else if (1e14..1e17).contains(&magnitude) {
        Some(1_000)
    } else if magnitude >= 1e17 {
        Some(1)
    } else {
        None
    }
}

fn normalize_int_timestamp(raw: i64) -> Result<i64, SchemaError> {
    if raw <= 0 {
        return Err(SchemaError::NegativeTimestamp(raw.to_string()));
    }
    let scale = scale_for_magnitude(raw as f64).ok_or_else(|| {
        SchemaError::UnparseableTimestamp(format!(
            "numeric timestamp {raw} has no recognizable epoch magnitude"
        ))
    })?;
    let nanos = raw as i128 * scale as i128;
    i64::try_from(nanos).map_err(|_| {
        SchemaError::UnparseableTimestamp(format!(
            "{raw} exceeds the representable nanosecond range"
        ))
    })
}

fn normalize_float_timestamp(raw: f64) -> Result<i64, SchemaError> {
    if !raw.is_finite() {
        return Err(SchemaError::UnparseableTimestamp(raw.to_string()));
    }
    if raw <= 0.0 {
        return Err(SchemaError::NegativeTimestamp(raw.to_string()));
    }
    let scale = scale_for_magnitude(raw).ok_or_else(|| {
        SchemaError::UnparseableTimestamp(format!(
            "numeric timestamp {raw} has no recognizable epoch magnitude"
        ))
    })?;
    let nanos = raw * scale as f64;
    if nanos >= 9.2e18 {
        return Err(SchemaError::UnparseableTimestamp(format!(
            "{raw} exceeds the representable nanosecond range"
        )));
    }
    Ok(nanos.round() as i64)
}

fn normalize_string_timestamp(raw: &str) -> Result<i64, SchemaError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(SchemaError::UnparseableTimestamp("empty string".into()));
    }
    if let Ok(i) = trimmed.parse::<i64>() {
        return normalize_int_timestamp(i);
    }
    if let Ok(f) = trimmed.parse::<f64>() {
        return normalize_float_timestamp(f);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(trimmed) {
        return nanos_from_datetime(dt.with_timezone(&chrono::Utc), raw);
    }
    // Naive ISO-8601 without an offset is taken as UTC.
    if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M:%S%.f") {
        return nanos_from_datetime(naive.and_utc(), raw);
    }
    if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%d %H:%M:%S%.f") {
        return nanos_from_datetime(naive.and_utc(), raw);
    }
    Err(SchemaError::UnparseableTimestamp(raw.to_string()))
}

fn nanos_from_datetime(
    dt: chrono::DateTime<chrono::Utc>,
    raw: &str,
) -> Result<i64, SchemaError> {
    let nanos = dt
        .timestamp_nanos_opt()
        .ok_or_else(|| SchemaError::UnparseableTimestamp(raw.to_string()))?;
    if nanos < 0 {
        return Err(SchemaError::NegativeTimestamp(raw.to_string()));
    }
    Ok(nanos)
}

/// One entry in the unit conversion registry: a declared unit string, the
/// canonical unit it converts into, and the multiplicative factor.
struct UnitConversion {
    declared: &'static str,
    canonical: &'static str,
    factor: f64,
}

const UNIT_REGISTRY: &[UnitConversion] = &[
    // acceleration -> m/s²
    UnitConversion { declared: "g", canonical: "m/s²", factor: STANDARD_GRAVITY },
    UnitConversion { declared: "mg", canonical: "m/s²", factor: STANDARD_GRAVITY / 1000.0 },
    UnitConversion { declared: "m/s^2", canonical: "m/s²", factor: 1.0 },
    UnitConversion { declared: "m/s2", canonical: "m/s²", factor: 1.0 },
    UnitConversion { declared: "m/s²", canonical: "m/s²", factor: 1.0 },
    // angular rate -> rad/s
    UnitConversion { declared: "deg/s", canonical: "rad/s", factor: std::f64::consts::PI / 180.0 },
    UnitConversion { declared: "°/s", canonical: "rad/s", factor: std::f64::consts::PI / 180.0 },
    UnitConversion { declared: "dps", canonical: "rad/s", factor: std::f64::consts::PI / 180.0 },
    UnitConversion { declared: "rad/s", canonical: "rad/s", factor: 1.0 },
    // magnetic field -> µT
    UnitConversion { declared: "uT", canonical: "µT", factor: 1.0 },
    UnitConversion { declared: "µT", canonical: "µT", factor: 1.0 },
    UnitConversion { declared: "mT", canonical: "µT", factor: 1000.0 },
    UnitConversion { declared: "gauss", canonical: "µT", factor: 100.0 },
    // pressure -> mBar (hPa and mBar are the same unit)
    UnitConversion { declared: "hPa", canonical: "mBar", factor: 1.0 },
    UnitConversion { declared: "mBar", canonical: "mBar", factor: 1.0 },
    UnitConversion { declared: "mbar", canonical: "mBar", factor: 1.0 },
    UnitConversion { declared: "Pa", canonical: "mBar", factor: 0.01 },
    UnitConversion { declared: "kPa", canonical: "mBar", factor: 10.0 },
    UnitConversion { declared: "bar", canonical: "mBar", factor: 1000.0 },
    // speed -> m/s
    UnitConversion { declared: "m/s", canonical: "m/s", factor: 1.0 },
    UnitConversion { declared: "km/h", canonical: "m/s", factor: 1.0 / 3.6 },
    UnitConversion { declared: "kph", canonical: "m/s", factor: 1.0 / 3.6 },
    UnitConversion { declared: "knots", canonical: "m/s", factor: 0.514444444444444 },
    UnitConversion { declared: "kn", canonical: "m/s", factor: 0.514444444444444 },
    UnitConversion { declared: "mph", canonical: "m/s", factor: 0.44704 },
    // length -> m
    UnitConversion { declared: "m", canonical: "m", factor: 1.0 },
    UnitConversion { declared: "km", canonical: "m", factor: 1000.0 },
    UnitConversion { declared: "cm", canonical: "m", factor: 0.01 },
    UnitConversion { declared: "mm", canonical: "m", factor: 0.001 },
    UnitConversion { declared: "ft", canonical: "m", factor: 0.3048 },
    // angle -> °
    UnitConversion { declared: "deg", canonical: "°", factor: 1.0 },
    UnitConversion { declared: "°", canonical: "°", factor: 1.0 },
    UnitConversion { declared: "rad", canonical: "°", factor: 180.0 / std::f64::consts::PI },
];

/// Converts `value` from `declared_unit` into the canonical unit of the
/// given kind/field. Absent `declared_unit` is a pass-through.
pub fn coerce_units(
    kind: SensorKind,
    field: &str,
    value: f64,
    declared_unit: Option<&str>,
) -> Result<f64, SchemaError> {
    let canonical = kind.field_unit(field)?;
    let Some(declared) = declared_unit else {
        return Ok(value);
    };
    let entry = UNIT_REGISTRY
        .iter()
        .find(|c| c.declared == declared && c.canonical == canonical)
        .ok_or_else(|| SchemaError::UnknownUnit {
            kind,
            field: field.to_string(),
            unit: declared.to_string(),
        })?;
    Ok(value * entry.factor)
}

/// Looks up a conversion factor by declared unit name alone, for the rule
/// deriver's value matching. Identity entries are skipped.
pub fn unit_conversions() -> impl Iterator<Item = (&'static str, f64)> {
    UNIT_REGISTRY
        .iter()
        .filter(|c| c.factor != 1.0)
        .map(|c| (c.declared, c.factor))
}

/// Inverse of [`coerce_units`] for round-trip checks.
pub fn uncoerce_units(
    kind: SensorKind,
    field: &str,
    value: f64,
    declared_unit: Option<&str>,
) -> Result<f64, SchemaError> {
    let canonical = kind.field_unit(field)?;
    let Some(declared) = declared_unit else {
        return Ok(value);
    };
    let entry = UNIT_REGISTRY
        .iter()
        .find(|c| c.declared == declared && c.canonical == canonical)
        .ok_or_else(|| SchemaError::UnknownUnit {
            kind,
            field: field.to_string(),
            unit: declared.to_string(),
        })?;
    Ok(value / entry.factor)
}

/// Completes a partially populated payload object to the schema shape,
/// writing explicit nulls for absent required fields. Marks only; downstream
/// validation rejects records with nulls in required slots. Never imputes.
pub fn mark_missing(kind: SensorKind, fragment: &Value) -> Value {
    let mut map = match fragment.as_object() {
        Some(obj) => obj.clone(),
        None => return fragment.clone(),
    };
    match kind {
        SensorKind::Pedometer => {
            map.entry("steps".to_string()).or_insert(Value::Null);
        }
        SensorKind::Image => {
            map.entry("image".to_string()).or_insert(Value::Null);
        }
        _ => {
            for (field, _) in kind.payload_fields() {
                map.entry(field.to_string()).or_insert(Value::Null);
            }
        }
    }
    Value::Object(map)
}
