//! Ingestion: HTTP service and offline log replayer feeding the fusion
//! queue.
//!
//! Payloads standardize at ingest — through a cached transformation script
//! when one exists for the source, falling back to the standardizer
//! backend — so the fusion queue only ever carries validated records. A
//! single reordering queue is the one cross-thread channel; a serialized
//! consumer drains it into the filter, which keeps the fused trajectory a
//! pure function of the payload sequence regardless of replay speed or
//! request concurrency.

pub mod nmea;
mod queue;
mod service;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::fusion::{FusionConfig, FusionEngine, FusionError, TrajectoryPoint};
use crate::schema::{
    RawPayload, SchemaError, SensorKind, SensorPayload, StandardizedRecord,
};
use crate::standardizer::{
    make_backend, standardize, BackendConfig, StandardizerBackend, StandardizerError,
};
use crate::trgm::{apply_script, derive_script, TransformationScript};
use crate::validation::{validate_dataset, SchemaSet, ValidationReport};

pub use nmea::{checksum, parse_nmea, NmeaDecoder, NmeaError, NmeaFix};
pub use queue::{OrderedQueue, QueueFull};
pub use service::{router, serve};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unknown source '{0}'")]
    UnknownSource(String),
    #[error("payload parse failure: {0}")]
    Parse(String),
    #[error(transparent)]
    Nmea(#[from] NmeaError),
    #[error("standardization did not converge")]
    NonConvergent(ValidationReport),
    #[error("payload produced no records")]
    NoRecords,
    #[error("fusion queue is full")]
    QueueFull,
    #[error(transparent)]
    Standardizer(#[from] StandardizerError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("invalid ingest configuration: {0}")]
    InvalidConfig(String),
    #[error("log line {line}: {detail}")]
    MalformedLogLine { line: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    /// JSON document payloads, standardized via script or backend.
    Json,
    /// text/plain NMEA sentences from a GNSS receiver.
    Nmea,
}

fn default_uere() -> f64 {
    5.0
}
fn default_speed_accuracy() -> f64 {
    1.0
}
fn default_fallback_horizontal() -> f64 {
    10.0
}

/// Fields a Location record needs that NMEA sentences do not carry; the
/// horizontal accuracy estimate is HDOP × UERE.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnssDefaults {
    #[serde(default = "default_uere")]
    pub uere: f64,
    #[serde(default = "default_speed_accuracy")]
    pub speed_accuracy: f64,
    #[serde(default = "default_fallback_horizontal")]
    pub fallback_horizontal_accuracy: f64,
}

impl Default for GnssDefaults {
    fn default() -> Self {
        Self {
            uere: default_uere(),
            speed_accuracy: default_speed_accuracy(),
            fallback_horizontal_accuracy: default_fallback_horizontal(),
        }
    }
}

/// One ingest route: where payloads for a source go and how they become
/// standardized records.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRoute {
    pub format: SourceFormat,
    /// Standardizer backend; required for JSON sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendConfig>,
    /// Date context for NMEA sources until an RMC sentence arrives
    /// (YYYY-MM-DD).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmea_date: Option<String>,
    #[serde(default)]
    pub gnss: GnssDefaults,
}

fn default_bind() -> String {
    "127.0.0.1:8080".to_string()
}
fn default_queue_capacity() -> usize {
    1024
}
fn default_reorder_window_ms() -> u64 {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default = "default_reorder_window_ms")]
    pub reorder_window_ms: u64,
    /// Replay speed multiplier; absent means as fast as possible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_speed: Option<f64>,
    pub sources: BTreeMap<String, SourceRoute>,
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.queue_capacity < 1 {
            return Err(IngestError::InvalidConfig(
                "queue_capacity must be at least 1".into(),
            ));
        }
        if let Some(speed) = self.replay_speed {
            if !(speed > 0.0) {
                return Err(IngestError::InvalidConfig(
                    "replay_speed must be positive".into(),
                ));
            }
        }
        for (name, route) in &self.sources {
            match route.format {
                SourceFormat::Json if route.backend.is_none() => {
                    return Err(IngestError::InvalidConfig(format!(
                        "JSON source '{name}' needs a standardizer backend"
                    )));
                }
                SourceFormat::Nmea => {
                    if let Some(date) = &route.nmea_date {
                        chrono::NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|e| {
                            IngestError::InvalidConfig(format!(
                                "source '{name}' nmea_date '{date}': {e}"
                            ))
                        })?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Accepted-payload reply: how many validated records were enqueued.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReply {
    pub record_count: usize,
}

/// Request body as received by the service or replayer.
pub enum PayloadBody {
    Json(Value),
    Text(String),
}

struct SourceState {
    route: SourceRoute,
    backend: Option<Box<dyn StandardizerBackend>>,
    max_iterations: u32,
    script: Mutex<Option<TransformationScript>>,
    decoder: Mutex<NmeaDecoder>,
}

/// Queue, filter, and trajectory under one lock: the serialized consumer.
struct FusionLane {
    queue: OrderedQueue<StandardizedRecord>,
    engine: FusionEngine,
    trajectory: Vec<TrajectoryPoint>,
}

#[derive(Debug, Default)]
struct Counters {
    accepted: AtomicU64,
    rejected: AtomicU64,
    non_convergent: AtomicU64,
    records_enqueued: AtomicU64,
}

/// Counter snapshot served at /metrics/counters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountersSnapshot {
    pub accepted: u64,
    pub rejected: u64,
    pub non_convergent: u64,
    pub records_enqueued: u64,
    pub dropped_late: u64,
    pub queue_depth: usize,
}

/// The ingestion pipeline: per-source standardization feeding one ordered
/// fusion lane. Request handling may be concurrent; the lane lock
/// serializes filter input.
pub struct Pipeline {
    config: IngestConfig,
    schemas: &'static SchemaSet,
    sources: BTreeMap<String, SourceState>,
    lane: Mutex<FusionLane>,
    counters: Counters,
}

impl Pipeline {
    pub fn new(config: IngestConfig, fusion: FusionConfig) -> Result<Self, IngestError> {
        config.validate()?;
        let mut sources = BTreeMap::new();
        for (name, route) in &config.sources {
            let backend = match (&route.format, &route.backend) {
                (SourceFormat::Json, Some(cfg)) => Some(make_backend(cfg)?),
                _ => None,
            };
            let date = route
                .nmea_date
                .as_deref()
                .and_then(|d| chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
                .unwrap_or(chrono::NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch"));
            sources.insert(
                name.clone(),
                SourceState {
                    route: route.clone(),
                    backend,
                    max_iterations: route
                        .backend
                        .as_ref()
                        .map(|b| b.max_iterations)
                        .unwrap_or(5),
                    script: Mutex::new(None),
                    decoder: Mutex::new(NmeaDecoder::new(date)),
                },
            );
        }
        let window_ns = (config.reorder_window_ms as i64).saturating_mul(1_000_000);
        let lane = FusionLane {
            queue: OrderedQueue::new(window_ns, config.queue_capacity),
            engine: FusionEngine::new(fusion),
            trajectory: Vec::new(),
        };
        Ok(Self {
            config,
            schemas: SchemaSet::builtin(),
            sources,
            lane: Mutex::new(lane),
            counters: Counters::default(),
        })
    }

    pub fn config(&self) -> &IngestConfig {
        &self.config
    }

    /// Standardizes one payload and enqueues its records. Counters update
    /// on every outcome.
    pub fn process_payload(
        &self,
        source: &str,
        body: PayloadBody,
        received_at: i64,
    ) -> Result<IngestReply, IngestError> {
        let result = self.process_inner(source, body, received_at);
        match &result {
            Ok(reply) => {
                self.counters.accepted.fetch_add(1, Ordering::Relaxed);
                self.counters
                    .records_enqueued
                    .fetch_add(reply.record_count as u64, Ordering::Relaxed);
            }
            Err(IngestError::NonConvergent(_)) => {
                self.counters.non_convergent.fetch_add(1, Ordering::Relaxed);
            }
            Err(_) => {
                self.counters.rejected.fetch_add(1, Ordering::Relaxed);
            }
        }
        result
    }

    fn process_inner(
        &self,
        source: &str,
        body: PayloadBody,
        received_at: i64,
    ) -> Result<IngestReply, IngestError> {
        let state = self
            .sources
            .get(source)
            .ok_or_else(|| IngestError::UnknownSource(source.to_string()))?;

        let records = match state.route.format {
            SourceFormat::Nmea => {
                let text = match body {
                    PayloadBody::Text(text) => text,
                    PayloadBody::Json(Value::String(text)) => text,
                    PayloadBody::Json(_) => {
                        return Err(IngestError::Parse(
                            "NMEA sources take text/plain sentences".into(),
                        ))
                    }
                };
                self.records_from_nmea(state, &text)?
            }
            SourceFormat::Json => {
                let value = match body {
                    PayloadBody::Json(value) => value,
                    PayloadBody::Text(text) => serde_json::from_str(&text)
                        .map_err(|e| IngestError::Parse(e.to_string()))?,
                };
                let raw = RawPayload::new(source, received_at.max(1), value)
                    .map_err(|e| IngestError::Parse(e.to_string()))?;
                self.records_from_json(state, &raw)?
            }
        };
        if records.is_empty() {
            return Err(IngestError::NoRecords);
        }
        let record_count = records.len();
        self.enqueue(records)?;
        Ok(IngestReply { record_count })
    }

    fn records_from_nmea(
        &self,
        state: &SourceState,
        text: &str,
    ) -> Result<Vec<StandardizedRecord>, IngestError> {
        let mut decoder = state.decoder.lock().expect("decoder lock");
        let mut records = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let fix = decoder.push(line)?;
            if fix.quality == 0 {
                continue; // no position solution in this sentence
            }
            let horizontal = fix
                .hdop
                .map(|h| h * state.route.gnss.uere)
                .unwrap_or(state.route.gnss.fallback_horizontal_accuracy);
            let record = StandardizedRecord::new(
                SensorKind::Location,
                fix.t,
                SensorPayload::Location {
                    latitude: fix.lat,
                    longitude: fix.lon,
                    altitude: fix.alt.unwrap_or(0.0),
                    speed: fix
                        .speed_mps
                        .or(decoder.last_speed_mps())
                        .unwrap_or(0.0),
                    speed_accuracy: state.route.gnss.speed_accuracy,
                    horizontal_accuracy: horizontal,
                    vertical_accuracy: 1.5 * horizontal,
                },
            )
            .map_err(|e| IngestError::Parse(e.to_string()))?;
            records.push(record);
        }
        Ok(records)
    }

    fn records_from_json(
        &self,
        state: &SourceState,
        raw: &RawPayload,
    ) -> Result<Vec<StandardizedRecord>, IngestError> {
        // Fast path: a cached transformation script, LLM-free.
        let cached = state.script.lock().expect("script lock").clone();
        if let Some(script) = cached {
            if let Ok(outcome) = apply_script(&script, &raw.body) {
                if outcome.missing.is_empty()
                    && validate_dataset(&outcome.records, self.schemas).valid
                {
                    let records: Result<Vec<_>, SchemaError> = outcome
                        .records
                        .iter()
                        .map(StandardizedRecord::from_value)
                        .collect();
                    if let Ok(records) = records {
                        return Ok(records);
                    }
                }
            }
            // Script no longer fits this payload shape; fall back to the
            // backend below and re-derive.
        }

        let backend = state
            .backend
            .as_deref()
            .ok_or_else(|| IngestError::InvalidConfig("source has no backend".into()))?;
        let outcome = standardize(backend, state.max_iterations, raw, self.schemas)?;
        if !outcome.converged {
            return Err(IngestError::NonConvergent(outcome.final_report));
        }

        // Cache a script for this source when the example pair derives
        // cleanly; later payloads skip the backend entirely.
        if let Ok(derived) = derive_script(&raw.body, &outcome.dataset) {
            if derived.unmatched.is_empty() {
                *state.script.lock().expect("script lock") = Some(derived.script);
            }
        }
        Ok(outcome.dataset.into_records())
    }

    fn enqueue(&self, records: Vec<StandardizedRecord>) -> Result<(), IngestError> {
        let mut lane = self.lane.lock().expect("lane lock");
        for record in records {
            let released = lane
                .queue
                .push(record.time, record)
                .map_err(|_| IngestError::QueueFull)?;
            for ready in released {
                if let Some(point) = lane.engine.process(&ready)? {
                    lane.trajectory.push(point);
                }
            }
        }
        Ok(())
    }

    /// Releases everything still buffered into the filter. Call at end of
    /// replay or before reading the full trajectory.
    pub fn flush(&self) -> Result<(), IngestError> {
        let mut lane = self.lane.lock().expect("lane lock");
        for ready in lane.queue.flush() {
            if let Some(point) = lane.engine.process(&ready)? {
                lane.trajectory.push(point);
            }
        }
        Ok(())
    }

    pub fn latest_point(&self) -> Option<TrajectoryPoint> {
        self.lane.lock().expect("lane lock").engine.latest_point()
    }

    pub fn trajectory_snapshot(&self) -> Vec<TrajectoryPoint> {
        self.lane.lock().expect("lane lock").trajectory.clone()
    }

    pub fn counters(&self) -> CountersSnapshot {
        let lane = self.lane.lock().expect("lane lock");
        CountersSnapshot {
            accepted: self.counters.accepted.load(Ordering::Relaxed),
            rejected: self.counters.rejected.load(Ordering::Relaxed),
            non_convergent: self.counters.non_convergent.load(Ordering::Relaxed),
            records_enqueued: self.counters.records_enqueued.load(Ordering::Relaxed),
            dropped_late: lane.queue.dropped_late() + lane.engine.dropped_late(),
            queue_depth: lane.queue.len(),
        }
    }

    /// Whether a cached transformation script exists for the source.
    pub fn has_script(&self, source: &str) -> bool {
        self.sources
            .get(source)
            .map(|s| s.script.lock().expect("script lock").is_some())
            .unwrap_or(false)
    }
}

/// Summary of one replay run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub accepted: u64,
    pub rejected: u64,
    pub non_convergent: u64,
    /// 1-based line numbers that failed to parse as log entries.
    pub malformed_lines: Vec<usize>,
}

#[derive(Deserialize)]
struct LogLine {
    received_at: i64,
    source: String,
    body: Value,
}

/// Replays a recorded raw-payload log through the pipeline. Payloads are
/// fed at recorded inter-arrival times scaled by 1/speed; `None` means as
/// fast as possible. Malformed lines are reported and skipped.
pub fn replay(pipeline: &Pipeline, log_text: &str, speed: Option<f64>) -> ReplaySummary {
    let mut summary = ReplaySummary::default();
    let mut previous_received: Option<i64> = None;

    for (idx, line) in log_text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let entry: LogLine = match serde_json::from_str(trimmed) {
            Ok(entry) => entry,
            Err(_) => {
                summary.malformed_lines.push(idx + 1);
                continue;
            }
        };
        if let (Some(prev), Some(speed)) = (previous_received, speed) {
            let gap_ns = (entry.received_at - prev).max(0) as f64 / speed;
            if gap_ns >= 1.0 {
                std::thread::sleep(std::time::Duration::from_nanos(gap_ns as u64));
            }
        }
        previous_received = Some(entry.received_at);

        match pipeline.process_payload(&entry.source, PayloadBody::Json(entry.body), entry.received_at)
        {
            Ok(_) => summary.accepted += 1,
            Err(IngestError::NonConvergent(_)) => summary.non_convergent += 1,
            Err(_) => summary.rejected += 1,
        }
    }
    if pipeline.flush().is_err() {
        summary.rejected += 1;
    }
    summary
}

/// Renders a raw-payload log line.
pub fn log_line(received_at: i64, source: &str, body: &Value) -> String {
    json!({"received_at": received_at, "source": source, "body": body}).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FrameOrigin;
    use crate::standardizer::{MappingEntry, MockMapping};

    const T0: i64 = 1_705_307_400_000_000_000;
    const NS: i64 = 1_000_000_000;

    fn uwb_mapping() -> MockMapping {
        MockMapping {
            entries: vec![
                MappingEntry {
                    path: "$.uwb.ts".into(),
                    kind: SensorKind::Uwb,
                    field: "time".into(),
                    component: None,
                    unit: None,
                },
                MappingEntry {
                    path: "$.uwb.x".into(),
                    kind: SensorKind::Uwb,
                    field: "position".into(),
                    component: Some(0),
                    unit: None,
                },
                MappingEntry {
                    path: "$.uwb.y".into(),
                    kind: SensorKind::Uwb,
                    field: "position".into(),
                    component: Some(1),
                    unit: None,
                },
                MappingEntry {
                    path: "$.uwb.z".into(),
                    kind: SensorKind::Uwb,
                    field: "position".into(),
                    component: Some(2),
                    unit: None,
                },
            ],
            fault: None,
        }
    }

    fn test_config() -> (IngestConfig, FusionConfig) {
        let mut sources = BTreeMap::new();
        sources.insert(
            "uwb".to_string(),
            SourceRoute {
                format: SourceFormat::Json,
                backend: Some(BackendConfig::mock(uwb_mapping())),
                nmea_date: None,
                gnss: GnssDefaults::default(),
            },
        );
        sources.insert(
            "gnss".to_string(),
            SourceRoute {
                format: SourceFormat::Nmea,
                backend: None,
                nmea_date: Some("2024-01-15".into()),
                gnss: GnssDefaults::default(),
            },
        );
        let ingest = IngestConfig {
            bind: "127.0.0.1:0".into(),
            queue_capacity: 64,
            reorder_window_ms: 200,
            replay_speed: None,
            sources,
        };
        let fusion = FusionConfig::new(FrameOrigin::new(22.3, 114.18, 10.0).unwrap());
        (ingest, fusion)
    }

    fn uwb_body(t_s: f64, x: f64) -> Value {
        json!({"uwb": {"ts": t_s, "x": x, "y": 0.0, "z": 0.0}})
    }

    #[test]
    fn json_payload_standardizes_and_reaches_the_filter() {
        let (ingest, fusion) = test_config();
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        let reply = pipeline
            .process_payload("uwb", PayloadBody::Json(uwb_body(1705307400.0, 1.5)), T0)
            .unwrap();
        assert_eq!(reply.record_count, 1);
        pipeline.flush().unwrap();
        let latest = pipeline.latest_point().expect("filter initialized");
        assert_eq!(latest.north, 1.5);
        assert_eq!(pipeline.counters().accepted, 1);
    }

    #[test]
    fn script_cache_takes_over_after_first_payload() {
        let (ingest, fusion) = test_config();
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        assert!(!pipeline.has_script("uwb"));
        pipeline
            .process_payload("uwb", PayloadBody::Json(uwb_body(1705307400.0, 1.0)), T0)
            .unwrap();
        assert!(pipeline.has_script("uwb"), "script cached after success");
        // Structurally identical payload, different values: script path.
        let reply = pipeline
            .process_payload("uwb", PayloadBody::Json(uwb_body(1705307401.0, 2.0)), T0 + NS)
            .unwrap();
        assert_eq!(reply.record_count, 1);
        pipeline.flush().unwrap();
        assert_eq!(pipeline.counters().records_enqueued, 2);
    }

    #[test]
    fn nmea_payload_builds_location_records() {
        let (ingest, fusion) = test_config();
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        let gga = "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47";
        let reply = pipeline
            .process_payload("gnss", PayloadBody::Text(gga.to_string()), T0)
            .unwrap();
        assert_eq!(reply.record_count, 1);
    }

    #[test]
    fn bad_checksum_rejects_payload() {
        let (ingest, fusion) = test_config();
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        let bad = "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*00";
        let err = pipeline
            .process_payload("gnss", PayloadBody::Text(bad.to_string()), T0)
            .unwrap_err();
        assert!(matches!(err, IngestError::Nmea(NmeaError::ChecksumMismatch { .. })));
        assert_eq!(pipeline.counters().rejected, 1);
    }

    #[test]
    fn unknown_source_is_an_error() {
        let (ingest, fusion) = test_config();
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        assert!(matches!(
            pipeline.process_payload("nope", PayloadBody::Json(json!({})), T0),
            Err(IngestError::UnknownSource(_))
        ));
    }

    #[test]
    fn replay_empty_log_is_all_zero() {
        let (ingest, fusion) = test_config();
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        let summary = replay(&pipeline, "", None);
        assert_eq!(summary, ReplaySummary::default());
    }

    #[test]
    fn replay_reports_malformed_lines_and_continues() {
        let (ingest, fusion) = test_config();
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        let mut log = String::new();
        log.push_str(&log_line(T0, "uwb", &uwb_body(1705307400.0, 1.0)));
        log.push('\n');
        log.push_str("this is not json\n");
        log.push_str(&log_line(T0 + NS, "uwb", &uwb_body(1705307401.0, 2.0)));
        log.push('\n');
        let summary = replay(&pipeline, &log, None);
        assert_eq!(summary.accepted, 2);
        assert_eq!(summary.malformed_lines, vec![2]);
    }

    #[test]
    fn replay_speed_does_not_change_the_trajectory() {
        let mut log = String::new();
        for i in 0..20 {
            let body = uwb_body(1705307400.0 + i as f64 * 0.05, i as f64 * 0.1);
            log.push_str(&log_line(T0 + i * NS / 1000, "uwb", &body));
            log.push('\n');
        }
        let run = |speed: Option<f64>| {
            let (ingest, fusion) = test_config();
            let pipeline = Pipeline::new(ingest, fusion).unwrap();
            replay(&pipeline, &log, speed);
            crate::fusion::trajectory_to_ndjson(&pipeline.trajectory_snapshot())
        };
        assert_eq!(run(None), run(Some(50.0)));
    }

    #[test]
    fn out_of_window_records_are_dropped_not_reordered() {
        let (mut ingest, fusion) = test_config();
        ingest.reorder_window_ms = 0;
        let pipeline = Pipeline::new(ingest, fusion).unwrap();
        pipeline
            .process_payload("uwb", PayloadBody::Json(uwb_body(1705307410.0, 1.0)), T0)
            .unwrap();
        // Ten seconds older than the released record: dropped, counted.
        pipeline
            .process_payload("uwb", PayloadBody::Json(uwb_body(1705307400.0, 9.0)), T0 + 1)
            .unwrap();
        pipeline.flush().unwrap();
        assert_eq!(pipeline.counters().dropped_late, 1);
        assert_eq!(pipeline.latest_point().unwrap().north, 1.0);
    }
}
