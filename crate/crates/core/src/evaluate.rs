//! Trajectory error evaluation against a ground-truth path.
//!
//! Error is the shortest Euclidean distance from each fused position to
//! the ground-truth polyline (3D by default, planar on request), summarized
//! as mean / population standard deviation / RMSE / median / max. Under
//! the population convention RMSE² = mean² + std² holds exactly.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::TrajectoryPoint;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("error series is empty")]
    EmptySeries,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("invalid ground-truth path: {0}")]
    BadPath(String),
}

/// Ground-truth polyline in local NED meters.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPath {
    vertices: Vec<Vector3<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PathFile {
    vertices: Vec<[f64; 3]>,
}

impl GroundTruthPath {
    pub fn new(vertices: Vec<[f64; 3]>) -> Result<Self, EvaluateError> {
        if vertices.len() < 2 {
            return Err(EvaluateError::BadPath(
                "a path needs at least 2 vertices".into(),
            ));
        }
        let vertices: Vec<Vector3<f64>> = vertices
            .iter()
            .map(|v| Vector3::from_row_slice(v))
            .collect();
        for pair in vertices.windows(2) {
            if (pair[0] - pair[1]).norm() == 0.0 {
                return Err(EvaluateError::BadPath(
                    "consecutive vertices must be distinct".into(),
                ));
            }
        }
        Ok(Self { vertices })
    }

    pub fn from_json(text: &str) -> Result<Self, EvaluateError> {
        let file: PathFile =
            serde_json::from_str(text).map_err(|e| EvaluateError::BadPath(e.to_string()))?;
        Self::new(file.vertices)
    }

    pub fn to_json(&self) -> String {
        let file = PathFile {
            vertices: self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("path serializes")
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn total_length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|pair| (pair[1] - pair[0]).norm())
            .sum()
    }

    /// Copy with the down component removed, for planar evaluation.
    fn flattened(&self) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| Vector3::new(v.x, v.y, 0.0))
                .collect(),
        }
    }
}

fn point_to_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Minimum distance from a point to the polyline: the minimum over
/// segments of the clamped point-to-segment distance.
pub fn point_to_path_distance(p: &Vector3<f64>, path: &GroundTruthPath) -> f64 {
    path.vertices
        .windows(2)
        .map(|pair| point_to_segment(p, &pair[0], &pair[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Summary statistics over an error series. `std` is the population
/// standard deviation, the convention under which rmse² = mean² + std².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean: f64,
    pub std: f64,
    pub rmse: f64,
    pub median: f64,
    pub max: f64,
    pub n: usize,
}

pub fn summarize(errors: &[f64]) -> Result<ErrorSummary, EvaluateError> {
    if errors.is_empty() {
        return Err(EvaluateError::EmptySeries);
    }
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    // Even-length series take the lower middle element.
    let median = sorted[(n - 1) / 2];
    let max = *sorted.last().expect("non-empty");
    Ok(ErrorSummary {
        mean,
        std: var.sqrt(),
        rmse,
        median,
        max,
        n,
    })
}

/// Evaluation of one trajectory: the summary plus the per-point error
/// series for plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEvaluation {
    pub label: String,
    pub summary: ErrorSummary,
    /// (t, error) pairs in trajectory order.
    pub series: Vec<(i64, f64)>,
}

impl RunEvaluation {
    /// Plot-ready CSV with a `t,error` header.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,error\n");
        for (t, error) in &self.series {
            out.push_str(&format!("{t},{error}\n"));
        }
        out
    }
}

/// Evaluates a fused trajectory against the ground-truth path. `planar`
/// drops the down component from both sides before measuring.
pub fn evaluate_run(
    trajectory: &[TrajectoryPoint],
    path: &GroundTruthPath,
    label: &str,
    planar: bool,
) -> Result<RunEvaluation, EvaluateError> {
    if trajectory.is_empty() {
        return Err(EvaluateError::EmptyTrajectory);
    }
    let flattened;
    let path = if planar {
        flattened = path.flattened();
        &flattened
    } else {
        path
    };
    let series: Vec<(i64, f64)> = trajectory
        .iter()
        .map(|point| {
            let p = if planar {
                Vector3::new(point.north, point.east, 0.0)
            } else {
                Vector3::new(point.north, point.east, point.down)
            };
            (point.t, point_to_path_distance(&p, path))
        })
        .collect();
    let errors: Vec<f64> = series.iter().map(|(_, e)| *e).collect();
    Ok(RunEvaluation {
        label: label.to_string(),
        summary: summarize(&errors)?,
        series,
    })
}
