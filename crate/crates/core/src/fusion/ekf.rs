//! Position/velocity Kalman filter core.
//!
//! State is a 6-vector [x y z vx vy vz] in the local NED frame with a 6×6
//! covariance. Prediction integrates rotated, gravity-compensated
//! accelerometer readings under a constant-acceleration transition;
//! updates fuse 3D position measurements through the Joseph-form
//! covariance update so P stays symmetric positive semi-definite.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Matrix6x3, Vector3, Vector6};

use super::geo::{geodetic_to_ned, FrameOrigin};
use super::FusionError;
use crate::schema::{QUATERNION_NORM_TOLERANCE, STANDARD_GRAVITY};

/// Default accelerometer process-noise density, m/s². Configurable; the
/// synthetic suites run with this value.
pub const DEFAULT_SIGMA_A: f64 = 0.35;

/// Longest IMU integration step accepted by [`predict`]; larger gaps must
/// be sub-stepped by the caller so Δt² terms cannot blow up P.
pub const MAX_PREDICT_GAP_SECS: f64 = 1.0;

/// Filter state: position/velocity estimate, covariance, and the time of
/// the last absorbed input.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    pub x: Vector6<f64>,
    pub p: Matrix6<f64>,
    /// UNIX nanoseconds of the last update.
    pub t: i64,
}

impl EkfState {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x[0], self.x[1], self.x[2])
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.x[3], self.x[4], self.x[5])
    }

    /// Checks the covariance invariant: symmetric within 1e-9 and
    /// eigenvalues >= -1e-9.
    pub fn covariance_is_psd(&self) -> bool {
        let asym = (self.p - self.p.transpose()).abs().max();
        if asym > 1e-9 {
            return false;
        }
        let sym = (self.p + self.p.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().all(|&ev| ev >= -1e-9)
    }
}

/// One IMU reading in the body frame. The quaternion is the body→NED
/// attitude as carried by Orientation records; prediction falls back to
/// the identity when it is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuSample {
    /// Specific force, m/s².
    pub accel: Vector3<f64>,
    /// Angular rate, rad/s.
    pub gyro: Vector3<f64>,
    /// Magnetic field, µT. Carried in the control vector, unused by the
    /// position filter.
    pub mag: Vector3<f64>,
    /// Attitude quaternion [qx, qy, qz, qw].
    pub quat: Option<[f64; 4]>,
    pub t: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeasurementKind {
    Gnss,
    Uwb,
    Vps,
}

impl std::fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasurementKind::Gnss => f.write_str("GNSS"),
            MeasurementKind::Uwb => f.write_str("UWB"),
            MeasurementKind::Vps => f.write_str("VPS"),
        }
    }
}

/// One position measurement with its covariance. GNSS carries geodetic
/// [lat°, lon°, alt m]; UWB and VPS carry local-frame meters.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPacket {
    pub kind: MeasurementKind,
    pub z: Vector3<f64>,
    pub r: Matrix3<f64>,
    pub t: i64,
}

impl MeasurementPacket {
    /// Builds a packet, enforcing that R is symmetric positive definite.
    pub fn new(
        kind: MeasurementKind,
        z: Vector3<f64>,
        r: Matrix3<f64>,
        t: i64,
    ) -> Result<Self, FusionError> {
        if (r - r.transpose()).abs().max() > 1e-9 {
            return Err(FusionError::InvalidCovariance(
                "R must be symmetric".into(),
            ));
        }
        if r.cholesky().is_none() {
            return Err(FusionError::InvalidCovariance(
                "R must be positive definite".into(),
            ));
        }
        Ok(Self { kind, z, r, t })
    }
}

/// Measurement variance from experimental error statistics:
/// σ² = mean² + std², exact arithmetic.
pub fn variance_from_stats(mean: f64, std: f64) -> f64 {
    assert!(mean >= 0.0 && std >= 0.0, "stats must be non-negative");
    mean * mean + std * std
}

/// Default measurement covariance per sensor: GNSS 655.00·I, UWB 1.00·I,
/// VPS 0.15·I (m²).
pub fn default_r(kind: MeasurementKind) -> Matrix3<f64> {
    let variance = match kind {
        MeasurementKind::Gnss => 655.00,
        MeasurementKind::Uwb => 1.00,
        MeasurementKind::Vps => 0.15,
    };
    Matrix3::identity() * variance
}

/// Converts a unit quaternion [qx, qy, qz, qw] into the body→NED rotation
/// matrix. q and -q produce the same rotation.
pub fn quat_to_rotation(q: &[f64; 4]) -> Result<Matrix3<f64>, FusionError> {
    let [qx, qy, qz, qw] = *q;
    let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
    if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
        return Err(FusionError::NonUnitQuaternion(norm));
    }
    let (x, y, z, w) = (qx / norm, qy / norm, qz / norm, qw / norm);
    Ok(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w),       2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),       1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),       2.0 * (y * z + x * w),       1.0 - 2.0 * (x * x + y * y),
    ))
}

/// Gravity vector in NED (down positive).
pub fn gravity_ned(magnitude: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, magnitude)
}

fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise(dt: f64, sigma_a: f64) -> Matrix6<f64> {
    let var = sigma_a * sigma_a;
    let q_pp = var * dt.powi(4) / 4.0;
    let q_pv = var * dt.powi(3) / 2.0;
    let q_vv = var * dt.powi(2);
    let mut q = Matrix6::zeros();
    for i in 0..3 {
        q[(i, i)] = q_pp;
        q[(i, i + 3)] = q_pv;
        q[(i + 3, i)] = q_pv;
        q[(i + 3, i + 3)] = q_vv;
    }
    q
}

/// Kinematics-only prediction: advances the state by `dt_s` seconds under
/// the NED-frame acceleration `a_ned`. The caller owns time bookkeeping
/// and the gap guard.
pub fn predict_raw(state: &EkfState, a_ned: &Vector3<f64>, dt_s: f64, sigma_a: f64) -> EkfState {
    let f = transition(dt_s);
    let half_dt2 = 0.5 * dt_s * dt_s;
    let mut x = f * state.x;
    for i in 0..3 {
        x[i] += half_dt2 * a_ned[i];
        x[i + 3] += dt_s * a_ned[i];
    }
    let p = f * state.p * f.transpose() + process_noise(dt_s, sigma_a);
    EkfState { x, p, t: state.t }
}

/// Full prediction step from one IMU sample: rotates the body-frame
/// specific force into NED, removes standard gravity, and integrates.
pub fn predict(state: &EkfState, imu: &ImuSample, sigma_a: f64) -> Result<EkfState, FusionError> {
    if imu.t <= state.t {
        return Err(FusionError::NonMonotonicTime {
            state_t: state.t,
            input_t: imu.t,
        });
    }
    let dt = (imu.t - state.t) as f64 * 1e-9;
    if dt > MAX_PREDICT_GAP_SECS {
        return Err(FusionError::GapTooLarge(dt));
    }
    let c = match &imu.quat {
        Some(q) => quat_to_rotation(q)?,
        None => Matrix3::identity(),
    };
    let a_ned = c * imu.accel - gravity_ned(STANDARD_GRAVITY);
    let mut next = predict_raw(state, &a_ned, dt, sigma_a);
    next.t = imu.t;
    Ok(next)
}

/// Measurement update: GNSS measurements convert geodetic→NED first, all
/// others arrive in the local frame already. Joseph-form covariance with
/// symmetry re-enforcement.
pub fn update(
    state: &EkfState,
    meas: &MeasurementPacket,
    origin: &FrameOrigin,
) -> Result<EkfState, FusionError> {
    if meas.t < state.t {
        return Err(FusionError::NonMonotonicTime {
            state_t: state.t,
            input_t: meas.t,
        });
    }
    let z_local = measurement_position(meas, origin);

    let h = position_selector();
    let s = h * state.p * h.transpose() + meas.r;
    let s_inv = s.try_inverse().ok_or(FusionError::SingularInnovation)?;
    let k: Matrix6x3<f64> = state.p * h.transpose() * s_inv;

    let innovation = z_local - h * state.x;
    let x = state.x + k * innovation;

    let i_kh = Matrix6::identity() - k * h;
    let p = i_kh * state.p * i_kh.transpose() + k * meas.r * k.transpose();
    let p = (p + p.transpose()) * 0.5;

    Ok(EkfState {
        x,
        p,
        t: meas.t.max(state.t),
    })
}

/// The measurement position in the local frame.
pub fn measurement_position(meas: &MeasurementPacket, origin: &FrameOrigin) -> Vector3<f64> {
    match meas.kind {
        MeasurementKind::Gnss => geodetic_to_ned(meas.z[0], meas.z[1], meas.z[2], origin),
        _ => meas.z,
    }
}

fn position_selector() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

/// Initial state from a first position fix: position from the measurement,
/// zero velocity, P = blockdiag(R, 10·I).
pub fn initialize(meas: &MeasurementPacket, origin: &FrameOrigin) -> EkfState {
    let z_local = measurement_position(meas, origin);
    let mut x = Vector6::zeros();
    for i in 0..3 {
        x[i] = z_local[i];
    }
    let mut p = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            p[(i, j)] = meas.r[(i, j)];
        }
        p[(i + 3, i + 3)] = 10.0;
    }
    EkfState { x, p, t: meas.t }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const T0: i64 = 1_705_307_400_000_000_000;
    const NS: i64 = 1_000_000_000;

    fn rest_state() -> EkfState {
        EkfState {
            x: Vector6::zeros(),
            p: Matrix6::zeros(),
            t: T0,
        }
    }

    fn origin() -> FrameOrigin {
        FrameOrigin::new(22.3, 114.18, 10.0).unwrap()
    }

    /// Oracle: rotate a vector by the quaternion sandwich product q v q*.
    fn sandwich(q: &[f64; 4], v: &[f64; 3]) -> [f64; 3] {
        let [qx, qy, qz, qw] = *q;
        // quaternion multiply (x, y, z, w)
        let mul = |a: [f64; 4], b: [f64; 4]| -> [f64; 4] {
            [
                a[3] * b[0] + a[0] * b[3] + a[1] * b[2] - a[2] * b[1],
                a[3] * b[1] - a[0] * b[2] + a[1] * b[3] + a[2] * b[0],
                a[3] * b[2] + a[0] * b[1] - a[1] * b[0] + a[2] * b[3],
                a[3] * b[3] - a[0] * b[0] - a[1] * b[1] - a[2] * b[2],
            ]
        };
        let conj = [-qx, -qy, -qz, qw];
        let out = mul(mul([qx, qy, qz, qw], [v[0], v[1], v[2], 0.0]), conj);
        [out[0], out[1], out[2]]
    }

    #[test]
    fn identity_quaternion_is_identity_rotation() {
        let c = quat_to_rotation(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(c, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn rotation_matches_sandwich_product_oracle() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let quats = [
            [0.0, 0.0, h, h],         // 90° about z
            [h, 0.0, 0.0, h],         // 90° about x
            [0.5, 0.5, 0.5, 0.5],     // 120° about body diagonal
        ];
        for q in &quats {
            let c = quat_to_rotation(q).unwrap();
            for basis in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                let expected = sandwich(q, &basis);
                let got = c * Vector3::from_row_slice(&basis);
                for i in 0..3 {
                    assert_relative_eq!(got[i], expected[i], epsilon = 1e-12);
                }
            }
            // orthonormality and right-handedness
            assert_relative_eq!(c.transpose() * c, Matrix3::identity(), epsilon = 1e-9);
            assert_relative_eq!(c.determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ninety_about_z_maps_body_x_to_ned_y() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = quat_to_rotation(&[0.0, 0.0, h, h]).unwrap();
        let mapped = c * Vector3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(mapped, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn negated_quaternion_same_rotation() {
        let q = [0.1, -0.2, 0.3, (1.0f64 - 0.14).sqrt()];
        let neg = [-q[0], -q[1], -q[2], -q[3]];
        let a = quat_to_rotation(&q).unwrap();
        let b = quat_to_rotation(&neg).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        assert!(matches!(
            quat_to_rotation(&[0.0, 0.0, 0.0, 2.0]),
            Err(FusionError::NonUnitQuaternion(_))
        ));
    }

    #[test]
    fn gravity_cancels_at_rest() {
        let state = rest_state();
        let imu = ImuSample {
            accel: Vector3::new(0.0, 0.0, STANDARD_GRAVITY),
            gyro: Vector3::zeros(),
            mag: Vector3::zeros(),
            quat: Some([0.0, 0.0, 0.0, 1.0]),
            t: T0 + NS / 2,
        };
        let next = predict(&state, &imu, 0.0).unwrap();
        assert_relative_eq!(next.x, Vector6::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn constant_acceleration_kinematics() {
        let state = rest_state();
        let imu = ImuSample {
            accel: Vector3::new(1.0, 0.0, STANDARD_GRAVITY),
            gyro: Vector3::zeros(),
            mag: Vector3::zeros(),
            quat: Some([0.0, 0.0, 0.0, 1.0]),
            t: T0 + NS,
        };
        let next = predict(&state, &imu, 0.0).unwrap();
        let expected = Vector6::from_row_slice(&[0.5, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(next.x, expected, epsilon = 1e-12);
    }

    #[test]
    fn process_noise_matches_direct_substitution() {
        let state = rest_state();
        let imu = ImuSample {
            accel: Vector3::new(0.0, 0.0, STANDARD_GRAVITY),
            gyro: Vector3::zeros(),
            mag: Vector3::zeros(),
            quat: Some([0.0, 0.0, 0.0, 1.0]),
            t: T0 + NS,
        };
        let next = predict(&state, &imu, 0.1).unwrap();
        for i in 0..3 {
            assert_relative_eq!(next.p[(i, i)], 0.0025, epsilon = 1e-15);
            assert_relative_eq!(next.p[(i, i + 3)], 0.005, epsilon = 1e-15);
            assert_relative_eq!(next.p[(i + 3, i)], 0.005, epsilon = 1e-15);
            assert_relative_eq!(next.p[(i + 3, i + 3)], 0.01, epsilon = 1e-15);
        }
    }

    #[test]
    fn predict_guards_time() {
        let state = rest_state();
        let mut imu = ImuSample {
            accel: Vector3::zeros(),
            gyro: Vector3::zeros(),
            mag: Vector3::zeros(),
            quat: None,
            t: T0,
        };
        assert!(matches!(
            predict(&state, &imu, 0.1),
            Err(FusionError::NonMonotonicTime { .. })
        ));
        imu.t = T0 + 2 * NS;
        assert!(matches!(
            predict(&state, &imu, 0.1),
            Err(FusionError::GapTooLarge(_))
        ));
    }

    #[test]
    fn no_prior_update_snaps_to_measurement() {
        let mut state = rest_state();
        state.p = Matrix6::identity() * 1e12;
        let meas = MeasurementPacket::new(
            MeasurementKind::Uwb,
            Vector3::new(3.0, -2.0, 0.5),
            default_r(MeasurementKind::Uwb),
            T0 + NS,
        )
        .unwrap();
        let next = update(&state, &meas, &origin()).unwrap();
        assert!((next.position() - meas.z).norm() < 1e-3);
    }

    #[test]
    fn zero_prior_covariance_update_is_identity() {
        let state = rest_state(); // p = 0
        let meas = MeasurementPacket::new(
            MeasurementKind::Uwb,
            Vector3::new(3.0, -2.0, 0.5),
            default_r(MeasurementKind::Uwb),
            T0 + NS,
        )
        .unwrap();
        let next = update(&state, &meas, &origin()).unwrap();
        assert_eq!(next.x, state.x);
    }

    #[test]
    fn unit_gain_scalar_analogue() {
        // Oracle: 1-D Kalman gain K = P/(P+R) = 0.5; correction = K·2 = 1.
        let mut state = rest_state();
        state.p = Matrix6::identity();
        let meas = MeasurementPacket::new(
            MeasurementKind::Uwb,
            Vector3::new(2.0, 2.0, 2.0),
            Matrix3::identity(),
            T0 + NS,
        )
        .unwrap();
        let next = update(&state, &meas, &origin()).unwrap();
        assert_relative_eq!(
            next.position(),
            Vector3::new(1.0, 1.0, 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn joseph_and_textbook_forms_agree_when_well_conditioned() {
        let mut state = rest_state();
        state.p = Matrix6::identity() * 4.0;
        let meas = MeasurementPacket::new(
            MeasurementKind::Uwb,
            Vector3::new(1.0, 2.0, 3.0),
            default_r(MeasurementKind::Uwb),
            T0 + NS,
        )
        .unwrap();
        let joseph = update(&state, &meas, &origin()).unwrap();

        let h = position_selector();
        let s = h * state.p * h.transpose() + meas.r;
        let k: Matrix6x3<f64> = state.p * h.transpose() * s.try_inverse().unwrap();
        let textbook = (Matrix6::identity() - k * h) * state.p;
        let denom = textbook.abs().max();
        assert!(((joseph.p - textbook).abs().max()) / denom < 1e-8);
    }

    #[test]
    fn gnss_update_converts_geodetic() {
        let o = origin();
        let mut state = rest_state();
        state.p = Matrix6::identity() * 1e12;
        let meas = MeasurementPacket::new(
            MeasurementKind::Gnss,
            Vector3::new(o.lat, o.lon, o.alt + 10.0),
            default_r(MeasurementKind::Gnss),
            T0 + NS,
        )
        .unwrap();
        let next = update(&state, &meas, &o).unwrap();
        assert!((next.position() - Vector3::new(0.0, 0.0, -10.0)).norm() < 1e-2);
    }

    #[test]
    fn default_r_values() {
        assert_eq!(default_r(MeasurementKind::Gnss), Matrix3::identity() * 655.00);
        assert_eq!(default_r(MeasurementKind::Uwb), Matrix3::identity() * 1.00);
        assert_eq!(default_r(MeasurementKind::Vps), Matrix3::identity() * 0.15);
    }

    #[test]
    fn variance_from_stats_exact() {
        assert_relative_eq!(variance_from_stats(0.79, 0.62), 1.0085, epsilon = 1e-12);
        assert_relative_eq!(variance_from_stats(0.32, 0.23), 0.1553, epsilon = 1e-12);
        assert_eq!(variance_from_stats(0.0, 0.0), 0.0);
    }

    #[test]
    fn measurement_covariance_must_be_spd() {
        let bad = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(MeasurementPacket::new(
            MeasurementKind::Uwb,
            Vector3::zeros(),
            bad,
            T0
        )
        .is_err());
    }

    #[test]
    fn predict_dt_to_zero_is_identity() {
        let mut state = rest_state();
        state.p = Matrix6::identity();
        state.x = Vector6::from_row_slice(&[1.0, 2.0, 3.0, 0.1, 0.2, 0.3]);
        let next = predict_raw(&state, &Vector3::zeros(), 1e-12, 0.35);
        assert!((next.x - state.x).norm() < 1e-9);
        assert!((next.p - state.p).abs().max() < 1e-9);
    }
}
