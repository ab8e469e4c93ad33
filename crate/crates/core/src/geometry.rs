//! Coordinate frames, array layout and planar-wave steering phases.
//!
//! Local surface frame: `z` is the boresight normal, azimuth rotates from
//! `+z` toward `+x` and elevation from the `x`-`z` plane toward `+y`.
//! All angles are radians.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance on `‖u‖ = 1` for direction inputs.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A 3-vector in either the world or the local surface frame.
pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("frequency must be positive and finite, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("wavelength must be positive and finite, got {0} m")]
    NonPositiveWavelength(f64),
    #[error("expected a unit vector, norm is {0}")]
    NonUnitVector(f64),
    #[error("angle {name} = {value} rad outside [-pi/2, pi/2]")]
    AngleOutOfRange { name: &'static str, value: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("rotation matrix is not a proper rotation (orthonormality error {0:e})")]
    InvalidRotation(f64),
    #[error("invalid array layout: {0}")]
    InvalidArray(String),
}

/// Point in the world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { x, y, z })
    }

    pub const fn origin() -> Self {
        Self { x: 0.0, y: 0.0, z: 0.0 }
    }

    pub fn from_vector(v: &Vec3) -> Result<Self, GeometryError> {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn distance_to(&self, other: &Position3D) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

/// Azimuth/elevation pair in the local surface frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzEl {
    pub azimuth: f64,
    pub elevation: f64,
}

impl AzEl {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self, GeometryError> {
        check_half_angle("azimuth", azimuth)?;
        check_half_angle("elevation", elevation)?;
        Ok(Self { azimuth, elevation })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self, GeometryError> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub const fn boresight() -> Self {
        Self { azimuth: 0.0, elevation: 0.0 }
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    /// Inverse of [`direction_unit_vector`] for directions in the front half-space.
    pub fn from_direction(u: &Vec3) -> Result<Self, GeometryError> {
        check_unit(u)?;
        if u.z < 0.0 {
            return Err(GeometryError::AngleOutOfRange { name: "azimuth", value: u.x.atan2(u.z) });
        }
        Self::new(u.x.atan2(u.z), u.y.clamp(-1.0, 1.0).asin())
    }
}

fn check_half_angle(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if !value.is_finite() || value.abs() > FRAC_PI_2 + 1e-12 {
        return Err(GeometryError::AngleOutOfRange { name, value });
    }
    Ok(())
}

pub(crate) fn check_unit(u: &Vec3) -> Result<(), GeometryError> {
    let n = u.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(GeometryError::NonUnitVector(n));
    }
    Ok(())
}

/// Placement of the surface: local frame → world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdarsPose {
    origin: Position3D,
    rotation: Matrix3<f64>,
}

impl RdarsPose {
    pub fn new(origin: Position3D, rotation: Matrix3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho_err > 1e-9 {
            return Err(GeometryError::InvalidRotation(ortho_err));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidRotation((det - 1.0).abs()));
        }
        Ok(Self { origin, rotation })
    }

    pub fn identity_at(origin: Position3D) -> Self {
        Self { origin, rotation: Matrix3::identity() }
    }

    /// Builds the pose from yaw (about world `y`), pitch (about `x`) and roll
    /// (about the boresight `z`), applied roll first.
    pub fn from_yaw_pitch_roll(origin: Position3D, yaw: f64, pitch: f64, roll: f64) -> Result<Self, GeometryError> {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
        Self::new(origin, *r.matrix())
    }

    pub fn origin(&self) -> Position3D {
        self.origin
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// World point → local-frame offset from the surface origin.
    pub fn to_local(&self, p: &Position3D) -> Vec3 {
        self.rotation.transpose() * (p.to_vector() - self.origin.to_vector())
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.origin.to_vector() + self.rotation * local
    }

    /// Unit direction from the surface toward `p`, local frame.
    pub fn local_direction_to(&self, p: &Position3D) -> Vec3 {
        self.to_local(p).normalize()
    }
}

/// Uniform rectangular element layout centred on the local origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    rows: usize,
    cols: usize,
    spacing: f64,
    positions: Vec<Vec3>,
}

impl ArrayGeometry {
    pub const DEFAULT_ROWS: usize = 16;
    pub const DEFAULT_COLS: usize = 16;

    /// Element `n` sits at `row = n / cols`, `col = n % cols`; `x` grows with
    /// the column and `y` with the row.
    pub fn new(rows: usize, cols: usize, spacing: f64) -> Result<Self, GeometryError> {
        if rows == 0 || cols == 0 {
            return Err(GeometryError::InvalidArray(format!("{rows}x{cols} has no elements")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(GeometryError::InvalidArray(format!("spacing {spacing} m")));
        }
        let x0 = (cols as f64 - 1.0) / 2.0;
        let y0 = (rows as f64 - 1.0) / 2.0;
        let positions = (0..rows * cols)
            .map(|n| {
                let (row, col) = (n / cols, n % cols);
                Vec3::new((col as f64 - x0) * spacing, (row as f64 - y0) * spacing, 0.0)
            })
            .collect();
        Ok(Self { rows, cols, spacing, positions })
    }

    /// 16×16 at half-wavelength pitch.
    pub fn default_for_wavelength(lambda: f64) -> Result<Self, GeometryError> {
        Self::new(Self::DEFAULT_ROWS, Self::DEFAULT_COLS, lambda / 2.0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn row_col(&self, n: usize) -> (usize, usize) {
        (n / self.cols, n % self.cols)
    }
}

pub fn wavelength(carrier_hz: f64) -> Result<f64, GeometryError> {
    if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
        return Err(GeometryError::NonPositiveFrequency(carrier_hz));
    }
    Ok(SPEED_OF_LIGHT / carrier_hz)
}

/// `(cos el · sin az, sin el, cos el · cos az)`.
pub fn direction_unit_vector(angles: AzEl) -> Vec3 {
    let (sa, ca) = angles.azimuth.sin_cos();
    let (se, ce) = angles.elevation.sin_cos();
    Vec3::new(ce * sa, se, ce * ca)
}

/// Planar-wave phase `(2π/λ)·(p·u)`, not wrapped.
pub fn steering_phase(element_pos: &Vec3, direction: &Vec3, lambda: f64) -> Result<f64, GeometryError> {
    check_unit(direction)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(GeometryError::NonPositiveWavelength(lambda));
    }
    Ok(steering_phase_unchecked(element_pos, direction, lambda))
}

#[inline]
pub(crate) fn steering_phase_unchecked(element_pos: &Vec3, direction: &Vec3, lambda: f64) -> f64 {
    2.0 * PI / lambda * element_pos.dot(direction)
}

pub fn angle_between(dir_a: &Vec3, dir_b: &Vec3) -> Result<f64, GeometryError> {
    check_unit(dir_a)?;
    check_unit(dir_b)?;
    Ok(dir_a.dot(dir_b).clamp(-1.0, 1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, SQRT_2};

    #[test]
    fn wavelength_examples() {
        assert_abs_diff_eq!(wavelength(3.7e9).unwrap(), 0.081_025_0, epsilon = 1e-6);
        assert_eq!(wavelength(SPEED_OF_LIGHT).unwrap(), 1.0);
        assert_abs_diff_eq!(wavelength(1.85e9).unwrap(), 2.0 * wavelength(3.7e9).unwrap(), epsilon = 1e-15);
        assert!(matches!(wavelength(0.0), Err(GeometryError::NonPositiveFrequency(_))));
        assert!(wavelength(-1.0).is_err());
        assert!(wavelength(f64::NAN).is_err());
    }

    #[test]
    fn direction_anchors() {
        let d = |az: f64, el: f64| direction_unit_vector(AzEl::new(az, el).unwrap());
        assert_abs_diff_eq!(d(0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(d(FRAC_PI_2, 0.0), Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(d(0.0, FRAC_PI_2), Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn azel_rejects_back_half_space() {
        assert!(AzEl::new(2.0, 0.0).is_err());
        assert!(AzEl::new(0.0, -1.6).is_err());
        assert!(AzEl::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn steering_phase_examples() {
        let lambda = wavelength(3.7e9).unwrap();
        let p = Vec3::new(lambda / 2.0, 0.0, 0.0);
        assert_abs_diff_eq!(steering_phase(&p, &Vec3::z(), lambda).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(steering_phase(&p, &Vec3::x(), lambda).unwrap(), PI, epsilon = 1e-12);
        let q = Vec3::new(lambda / 4.0, 0.0, 0.0);
        let u = Vec3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
        assert_abs_diff_eq!(steering_phase(&q, &u, lambda).unwrap(), PI * SQRT_2 / 4.0, epsilon = 1e-12);
        assert!(matches!(steering_phase(&p, &Vec3::new(1.0, 1.0, 0.0), lambda), Err(GeometryError::NonUnitVector(_))));
    }

    #[test]
    fn angle_between_examples() {
        let a = Vec3::new(0.3, 0.4, 0.0).normalize();
        assert_abs_diff_eq!(angle_between(&a, &a).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(angle_between(&Vec3::x(), &Vec3::y()).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        let b = Vec3::new(3f64.sqrt() / 2.0, 0.0, 0.5);
        assert_abs_diff_eq!(angle_between(&Vec3::z(), &b).unwrap(), FRAC_PI_3, epsilon = 1e-12);
        assert!(angle_between(&Vec3::z(), &Vec3::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn array_layout_is_row_major_and_centred() {
        let g = ArrayGeometry::new(16, 16, 0.5).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.row_col(17), (1, 1));
        let p = g.positions();
        assert_abs_diff_eq!(p[1].x - p[0].x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[16].y - p[0].y, 0.5, epsilon = 1e-12);
        let centroid: Vec3 = p.iter().sum::<Vec3>() / p.len() as f64;
        assert_abs_diff_eq!(centroid.norm(), 0.0, epsilon = 1e-12);
        assert!(p.iter().all(|v| v.z == 0.0));
        assert!(ArrayGeometry::new(0, 4, 0.5).is_err());
        assert!(ArrayGeometry::new(1, 4, 0.0).is_err());
    }

    #[test]
    fn pose_validation_and_transforms() {
        let origin = Position3D::new(1.0, 2.0, 3.0).unwrap();
        let pose = RdarsPose::from_yaw_pitch_roll(origin, 0.4, -0.2, 0.1).unwrap();
        let p = Position3D::new(4.0, -1.0, 9.0).unwrap();
        let back = pose.to_world(&pose.to_local(&p));
        assert_abs_diff_eq!(back, p.to_vector(), epsilon = 1e-12);
        let mut bad = Matrix3::identity();
        bad[(0, 0)] = -1.0;
        assert!(matches!(RdarsPose::new(origin, bad), Err(GeometryError::InvalidRotation(_))));
        assert!(RdarsPose::new(origin, Matrix3::identity() * 2.0).is_err());
    }

    fn open_azel() -> impl Strategy<Value = AzEl> {
        let lim = FRAC_PI_2 - 1e-6;
        (-lim..lim, -lim..lim).prop_map(|(a, e)| AzEl { azimuth: a, elevation: e })
    }

    fn unit() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
    }

    proptest! {
        #[test]
        fn direction_is_unit(a in open_azel()) {
            prop_assert!((direction_unit_vector(a).norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn azel_round_trip(a in open_azel()) {
            let u = direction_unit_vector(a);
            let az = u.x.atan2(u.z);
            let el = u.y.asin();
            // cos(el) → 0 makes azimuth ill-conditioned
            prop_assume!(a.elevation.cos() > 1e-4);
            prop_assert!((az - a.azimuth).abs() <= 1e-9);
            prop_assert!((el - a.elevation).abs() <= 1e-9);
        }

        #[test]
        fn angle_between_symmetric(a in unit(), b in unit()) {
            prop_assert_eq!(angle_between(&a, &b).unwrap(), angle_between(&b, &a).unwrap());
        }

        #[test]
        fn steering_phase_linear(
            p1 in (-2.0f64..2.0, -2.0f64..2.0),
            p2 in (-2.0f64..2.0, -2.0f64..2.0),
            u in unit(),
        ) {
            let lambda = 0.081;
            let a = Vec3::new(p1.0, p1.1, 0.0);
            let b = Vec3::new(p2.0, p2.1, 0.0);
            let lhs = steering_phase(&(a + b), &u, lambda).unwrap();
            let rhs = steering_phase(&a, &u, lambda).unwrap() + steering_phase(&b, &u, lambda).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
