//! Sensor fusion: position/velocity EKF over standardized record streams.
//!
//! IMU records drive prediction (orientation from Orientation records,
//! gyro integration as fallback), position-bearing records drive updates:
//! Location fixes as GNSS (geodetic, converted at the origin), UWB as UWB,
//! Bluetooth as VPS by default — the canonical schema has no dedicated
//! kind for visual positioning, so upstream VPS services publish their
//! fixes as the spare `position` kind and the mapping stays configurable.

mod ekf;
mod geo;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ekf::{
    default_r, gravity_ned, initialize, measurement_position, predict, predict_raw,
    quat_to_rotation, update, variance_from_stats, EkfState, ImuSample, MeasurementKind,
    MeasurementPacket, DEFAULT_SIGMA_A, MAX_PREDICT_GAP_SECS,
};
pub use geo::{ecef_to_geodetic, geodetic_to_ecef, geodetic_to_ned, ned_to_geodetic, FrameOrigin};

use crate::schema::{SensorKind, SensorPayload, StandardizedDataset, StandardizedRecord};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("quaternion norm {0} outside unit tolerance")]
    NonUnitQuaternion(f64),
    #[error("input time {input_t} is not ahead of filter time {state_t}")]
    NonMonotonicTime { state_t: i64, input_t: i64 },
    #[error("IMU gap of {0:.3} s exceeds the prediction guard")]
    GapTooLarge(f64),
    #[error("innovation covariance is singular; measurement covariance is corrupted")]
    SingularInnovation,
    #[error("invalid measurement covariance: {0}")]
    InvalidCovariance(String),
    #[error("invalid frame origin: {0}")]
    InvalidOrigin(String),
    #[error("record stream is empty")]
    EmptyStream,
    #[error("record stream contains no enabled position-bearing sensor")]
    NoPositionSensor,
}

/// Inputs that can be switched on or off for a fusion run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SensorSwitch {
    Imu,
    Gnss,
    Uwb,
    Vps,
}

impl SensorSwitch {
    fn for_measurement(kind: MeasurementKind) -> Self {
        match kind {
            MeasurementKind::Gnss => SensorSwitch::Gnss,
            MeasurementKind::Uwb => SensorSwitch::Uwb,
            MeasurementKind::Vps => SensorSwitch::Vps,
        }
    }
}

fn default_sigma_a() -> f64 {
    DEFAULT_SIGMA_A
}

fn all_switches() -> BTreeSet<SensorSwitch> {
    BTreeSet::from([
        SensorSwitch::Imu,
        SensorSwitch::Gnss,
        SensorSwitch::Uwb,
        SensorSwitch::Vps,
    ])
}

fn default_uwb_measurement() -> MeasurementKind {
    MeasurementKind::Uwb
}

fn default_bluetooth_measurement() -> MeasurementKind {
    MeasurementKind::Vps
}

/// Fusion run configuration; serializable as the `fuse` config file block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub origin: FrameOrigin,
    /// Accelerometer process-noise density, m/s².
    #[serde(default = "default_sigma_a")]
    pub sigma_a: f64,
    /// Per-measurement-kind variance overrides (diagonal R = v·I).
    #[serde(default)]
    pub r_overrides: BTreeMap<MeasurementKind, f64>,
    /// Which inputs participate; defaults to all of them.
    #[serde(default = "all_switches")]
    pub enabled: BTreeSet<SensorSwitch>,
    /// Measurement kind carried by UWB records.
    #[serde(default = "default_uwb_measurement")]
    pub uwb_measurement: MeasurementKind,
    /// Measurement kind carried by Bluetooth records (VPS fixes ride here).
    #[serde(default = "default_bluetooth_measurement")]
    pub bluetooth_measurement: MeasurementKind,
}

impl FusionConfig {
    pub fn new(origin: FrameOrigin) -> Self {
        Self {
            origin,
            sigma_a: default_sigma_a(),
            r_overrides: BTreeMap::new(),
            enabled: all_switches(),
            uwb_measurement: default_uwb_measurement(),
            bluetooth_measurement: default_bluetooth_measurement(),
        }
    }

    fn r_for(&self, kind: MeasurementKind) -> Matrix3<f64> {
        match self.r_overrides.get(&kind) {
            Some(&variance) => Matrix3::identity() * variance,
            None => default_r(kind),
        }
    }

    /// Measurement kind a record maps to, if it is position-bearing.
    fn measurement_kind(&self, record_kind: SensorKind) -> Option<MeasurementKind> {
        match record_kind {
            SensorKind::Location => Some(MeasurementKind::Gnss),
            SensorKind::Uwb => Some(self.uwb_measurement),
            SensorKind::Bluetooth => Some(self.bluetooth_measurement),
            _ => None,
        }
    }
}

/// One fused output sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: i64,
    pub north: f64,
    pub east: f64,
    pub down: f64,
    pub p_diag: [f64; 6],
}

pub fn trajectory_to_ndjson(points: &[TrajectoryPoint]) -> String {
    let mut out = String::new();
    for point in points {
        out.push_str(&serde_json::to_string(point).expect("trajectory point serializes"));
        out.push('\n');
    }
    out
}

pub fn trajectory_from_ndjson(text: &str) -> Result<Vec<TrajectoryPoint>, crate::schema::SchemaError> {
    crate::schema::parse_ndjson(text)?
        .into_iter()
        .map(|(line, value)| {
            serde_json::from_value(value).map_err(|e| crate::schema::SchemaError::Line {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

fn quat_multiply(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[3] * b[0] + a[0] * b[3] + a[1] * b[2] - a[2] * b[1],
        a[3] * b[1] - a[0] * b[2] + a[1] * b[3] + a[2] * b[0],
        a[3] * b[2] + a[0] * b[1] - a[1] * b[0] + a[2] * b[3],
        a[3] * b[3] - a[0] * b[0] - a[1] * b[1] - a[2] * b[2],
    ]
}

fn quat_normalize(q: [f64; 4]) -> [f64; 4] {
    let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]
    } else {
        [0.0, 0.0, 0.0, 1.0]
    }
}

/// Streaming fusion state machine. Strictly sequential: one owner feeds
/// records in time order; late records are counted and dropped.
pub struct FusionEngine {
    config: FusionConfig,
    state: Option<EkfState>,
    quat: [f64; 4],
    /// Once an Orientation record has been seen, gyro integration stops.
    orientation_seen: bool,
    last_gyro_t: Option<i64>,
    gravity_mag: f64,
    dropped_late: u64,
    processed: u64,
}

impl FusionEngine {
    pub fn new(config: FusionConfig) -> Self {
        Self {
            config,
            state: None,
            quat: [0.0, 0.0, 0.0, 1.0],
            orientation_seen: false,
            last_gyro_t: None,
            gravity_mag: crate::schema::STANDARD_GRAVITY,
            dropped_late: 0,
            processed: 0,
        }
    }

    pub fn state(&self) -> Option<&EkfState> {
        self.state.as_ref()
    }

    pub fn dropped_late(&self) -> u64 {
        self.dropped_late
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Current fused estimate as a trajectory point.
    pub fn latest_point(&self) -> Option<TrajectoryPoint> {
        self.state.as_ref().map(|state| TrajectoryPoint {
            t: state.t,
            north: state.x[0],
            east: state.x[1],
            down: state.x[2],
            p_diag: [
                state.p[(0, 0)],
                state.p[(1, 1)],
                state.p[(2, 2)],
                state.p[(3, 3)],
                state.p[(4, 4)],
                state.p[(5, 5)],
            ],
        })
    }

    /// Feeds one record. Returns a trajectory point whenever the record
    /// advanced the filter (an IMU prediction or a position update,
    /// including the initializing fix); carried-but-unused records return
    /// None.
    pub fn process(&mut self, record: &StandardizedRecord) -> Result<Option<TrajectoryPoint>, FusionError> {
        self.processed += 1;
        match (&record.payload, record.name) {
            (SensorPayload::Quaternion { qx, qy, qz, qw }, _) => {
                let q = [*qx, *qy, *qz, *qw];
                let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > crate::schema::QUATERNION_NORM_TOLERANCE {
                    return Err(FusionError::NonUnitQuaternion(norm));
                }
                self.quat = quat_normalize(q);
                self.orientation_seen = true;
                Ok(None)
            }
            (SensorPayload::Axes { x, y, z }, SensorKind::Gravity) => {
                let norm = (x * x + y * y + z * z).sqrt();
                // Alternative gravity magnitude estimate; ignore clearly
                // broken readings.
                if (9.0..=11.0).contains(&norm) {
                    self.gravity_mag = norm;
                }
                Ok(None)
            }
            (SensorPayload::Axes { x, y, z }, SensorKind::Gyroscope) => {
                if self.config.enabled.contains(&SensorSwitch::Imu) && !self.orientation_seen {
                    if let Some(prev) = self.last_gyro_t {
                        let dt = (record.time - prev) as f64 * 1e-9;
                        if dt > 0.0 && dt <= MAX_PREDICT_GAP_SECS {
                            let omega = [*x, *y, *z, 0.0];
                            let dq = quat_multiply(self.quat, omega);
                            let scaled = [
                                self.quat[0] + 0.5 * dt * dq[0],
                                self.quat[1] + 0.5 * dt * dq[1],
                                self.quat[2] + 0.5 * dt * dq[2],
                                self.quat[3] + 0.5 * dt * dq[3],
                            ];
                            self.quat = quat_normalize(scaled);
                        }
                    }
                    self.last_gyro_t = Some(record.time);
                }
                Ok(None)
            }
            (SensorPayload::Axes { x, y, z }, SensorKind::Accelerometer) => {
                if !self.config.enabled.contains(&SensorSwitch::Imu) {
                    return Ok(None);
                }
                let Some(state) = &self.state else {
                    return Ok(None); // cannot predict before the first fix
                };
                if record.time < state.t {
                    self.dropped_late += 1;
                    return Ok(None);
                }
                if record.time == state.t {
                    return Ok(self.latest_point());
                }
                self.advance_with_accel(Vector3::new(*x, *y, *z), record.time)?;
                Ok(self.latest_point())
            }
            (SensorPayload::Position(p), SensorKind::Uwb | SensorKind::Bluetooth) => {
                let kind = self
                    .config
                    .measurement_kind(record.name)
                    .expect("position kinds always map");
                self.apply_measurement(kind, Vector3::new(p[0], p[1], p[2]), record.time)
            }
            (
                SensorPayload::Location {
                    latitude,
                    longitude,
                    altitude,
                    ..
                },
                SensorKind::Location,
            ) => self.apply_measurement(
                MeasurementKind::Gnss,
                Vector3::new(*latitude, *longitude, *altitude),
                record.time,
            ),
            _ => Ok(None), // magnetometer, barometer, pedometer, image
        }
    }

    /// Prediction with the 1 s gap guard: long gaps are split into
    /// sub-steps, the measured acceleration applied on the first and
    /// coasting afterwards.
    fn advance_with_accel(&mut self, accel_body: Vector3<f64>, t: i64) -> Result<(), FusionError> {
        let state = self.state.as_ref().expect("caller checked");
        let total = (t - state.t) as f64 * 1e-9;
        let c = quat_to_rotation(&self.quat)?;
        let a_ned = c * accel_body - gravity_ned(self.gravity_mag);

        let mut next = state.clone();
        let mut remaining = total;
        let mut first = true;
        while remaining > 1e-12 {
            let dt = remaining.min(MAX_PREDICT_GAP_SECS);
            let a = if first { a_ned } else { Vector3::zeros() };
            next = predict_raw(&next, &a, dt, self.config.sigma_a);
            remaining -= dt;
            first = false;
        }
        next.t = t;
        self.state = Some(next);
        Ok(())
    }

    fn apply_measurement(
        &mut self,
        kind: MeasurementKind,
        z: Vector3<f64>,
        t: i64,
    ) -> Result<Option<TrajectoryPoint>, FusionError> {
        if !self
            .config
            .enabled
            .contains(&SensorSwitch::for_measurement(kind))
        {
            return Ok(None);
        }
        let meas = MeasurementPacket::new(kind, z, self.config.r_for(kind), t)?;
        match &self.state {
            None => {
                self.state = Some(initialize(&meas, &self.config.origin));
                Ok(self.latest_point())
            }
            Some(state) => {
                if meas.t < state.t {
                    self.dropped_late += 1;
                    return Ok(None);
                }
                self.state = Some(update(state, &meas, &self.config.origin)?);
                Ok(self.latest_point())
            }
        }
    }
}

/// Runs the filter over a whole dataset, emitting one trajectory point per
/// filter-advancing record. Deterministic given its inputs.
pub fn run_filter(
    dataset: &StandardizedDataset,
    config: &FusionConfig,
) -> Result<Vec<TrajectoryPoint>, FusionError> {
    if dataset.is_empty() {
        return Err(FusionError::EmptyStream);
    }
    let has_position = dataset.records().iter().any(|r| {
        config
            .measurement_kind(r.name)
            .is_some_and(|kind| config.enabled.contains(&SensorSwitch::for_measurement(kind)))
    });
    if !has_position {
        return Err(FusionError::NoPositionSensor);
    }

    let mut engine = FusionEngine::new(config.clone());
    let mut trajectory = Vec::new();
    for record in dataset.records() {
        if let Some(point) = engine.process(record)? {
            trajectory.push(point);
        }
    }
    Ok(trajectory)
}
