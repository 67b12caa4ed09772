//! Sensor payload standardization, JSONPath transformation rules, and EKF
//! fusion for seamless indoor/outdoor positioning.
//!
//! The pipeline has three stages sharing one canonical record format
//! ([`schema::StandardizedRecord`]):
//!
//! 1. **Standardize** — heterogeneous raw payloads become canonical records
//!    through a pluggable backend wrapped in an iterative validate/repair
//!    loop ([`standardizer`]), checked by strict per-kind schemas
//!    ([`validation`]).
//! 2. **Transform** — once a payload shape has been standardized, a
//!    JSONPath rule script is derived from the example pair so follow-up
//!    payloads standardize mechanically ([`trgm`], [`jsonpath`]).
//! 3. **Fuse** — standardized streams feed a position/velocity extended
//!    Kalman filter with IMU-driven prediction and GNSS/UWB/VPS position
//!    updates ([`fusion`]), with trajectory error reporting against a
//!    ground-truth path ([`evaluate`]).
//!
//! [`ingest`] wraps the pipeline in an HTTP service and an offline log
//! replayer; [`cli`] exposes each stage as a subcommand.

pub mod cli;
pub mod evaluate;
pub mod fusion;
pub mod ingest;
pub mod jsonpath;
pub mod schema;
pub mod standardizer;
pub mod trgm;
pub mod validation;
