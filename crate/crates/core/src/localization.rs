//! Range estimation from the connected-element / BS power ratio.
//!
//! With a common path-loss exponent `α` the ratio of the power at the
//! connected elements to the direct-path power at the BS is
//! `(d_ub / d_ur)^α`; transmit power and the reference loss cancel. The
//! ratio and the law of cosines over the known surface–BS baseline give a
//! quadratic in `d_ur`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{direction_unit_vector, AzEl, Position3D, RdarsPose};

/// Below this `|r − 1|` the quadratic degenerates to its linear term.
const UNIT_RATIO_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("invalid range inputs: {0}")]
    InvalidInputs(String),
    #[error("measured powers must be finite")]
    NonFinitePower,
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),
    #[error("calibration needs at least one reference")]
    NoReferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeInputs {
    pub p_connected_dbm: f64,
    pub p_bs_direct_dbm: f64,
    /// Angle at the surface between the UE and BS directions.
    pub theta: f64,
    pub d_br: f64,
    pub alpha: f64,
}

impl RangeInputs {
    pub fn validate(&self) -> Result<(), LocalizationError> {
        if !(self.p_connected_dbm.is_finite() && self.p_bs_direct_dbm.is_finite()) {
            return Err(LocalizationError::NonFinitePower);
        }
        let bad = |m: String| Err(LocalizationError::InvalidInputs(m));
        if !(self.d_br.is_finite() && self.d_br > 0.0) {
            return bad(format!("d_br = {}", self.d_br));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::PI) {
            return bad(format!("theta = {} rad outside (0, pi)", self.theta));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha = {}", self.alpha));
        }
        Ok(())
    }

    pub fn ratio_db(&self) -> f64 {
        self.p_connected_dbm - self.p_bs_direct_dbm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub d_ur: f64,
    pub d_ub: f64,
    pub roots_found: usize,
    /// Two positive roots passed the feasibility screen; `d_ur` is the smaller.
    pub ambiguous: bool,
    /// The larger root when `ambiguous`.
    pub alternate_d_ur: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Subtracted from the measured power ratio, dB.
    pub offset_db: f64,
}

impl Calibration {
    pub fn new(offset_db: f64) -> Result<Self, LocalizationError> {
        if !offset_db.is_finite() {
            return Err(LocalizationError::InvalidInputs(format!("offset_db = {offset_db}")));
        }
        Ok(Self { offset_db })
    }
}

fn law_of_cosines(d_ur: f64, d_br: f64, theta: f64) -> f64 {
    (d_ur * d_ur + d_br * d_br - 2.0 * d_ur * d_br * theta.cos()).max(0.0).sqrt()
}

fn feasible(d_ur: f64, r: f64, inputs: &RangeInputs) -> bool {
    if !(d_ur.is_finite() && d_ur > 0.0) {
        return false;
    }
    let d_ub = r * d_ur;
    let residual =
        d_ub * d_ub - (d_ur * d_ur + inputs.d_br * inputs.d_br - 2.0 * d_ur * inputs.d_br * inputs.theta.cos());
    d_ub > 0.0 && residual.abs() <= 1e-6 * inputs.d_br * inputs.d_br
}

pub fn estimate_range(inputs: &RangeInputs, calib: &Calibration) -> Result<RangeEstimate, LocalizationError> {
    inputs.validate()?;
    let ratio_db = inputs.ratio_db() - calib.offset_db;
    let r = 10f64.powf(ratio_db / (10.0 * inputs.alpha));
    let d_br = inputs.d_br;
    let cos_t = inputs.theta.cos();

    // (r² − 1)·d² + 2·d_br·cosθ·d − d_br² = 0
    let a = r * r - 1.0;
    let b = 2.0 * d_br * cos_t;
    let c = -d_br * d_br;

    let candidates: Vec<f64> = if a.abs() <= UNIT_RATIO_EPS {
        if cos_t <= UNIT_RATIO_EPS {
            return Err(LocalizationError::GeometryInfeasible(
                "equal powers require the UE and BS on the same side of the baseline normal".into(),
            ));
        }
        vec![d_br / (2.0 * cos_t)]
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(LocalizationError::GeometryInfeasible(format!(
                "no real range for power ratio {ratio_db:.3} dB at theta {:.2} deg",
                inputs.theta.to_degrees()
            )));
        }
        let sq = disc.sqrt();
        // cancellation-free pair of roots
        let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
        if q == 0.0 {
            vec![]
        } else {
            vec![q / a, c / q]
        }
    };

    let mut roots: Vec<f64> = candidates.into_iter().filter(|&d| feasible(d, r, inputs)).collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs());
    let d_ur = *roots.first().ok_or_else(|| {
        LocalizationError::GeometryInfeasible(format!("no positive range for power ratio {ratio_db:.3} dB"))
    })?;
    Ok(RangeEstimate {
        d_ur,
        d_ub: r * d_ur,
        roots_found: roots.len(),
        ambiguous: roots.len() > 1,
        alternate_d_ur: roots.get(1).copied(),
    })
}

/// Ratio (dB) that makes [`estimate_range`] return exactly `true_d_ur`.
pub fn ideal_ratio_db(true_d_ur: f64, d_br: f64, theta: f64, alpha: f64) -> Result<f64, LocalizationError> {
    if !(true_d_ur.is_finite() && true_d_ur > 0.0) {
        return Err(LocalizationError::InvalidInputs(format!("reference range {true_d_ur}")));
    }
    let d_ub = law_of_cosines(true_d_ur, d_br, theta);
    if d_ub <= 0.0 {
        return Err(LocalizationError::GeometryInfeasible("reference UE coincides with the BS".into()));
    }
    Ok(10.0 * alpha * (d_ub / true_d_ur).log10())
}

/// Median of residuals between measured and geometry-implied power ratios.
pub fn calibrate(references: &[(RangeInputs, f64)]) -> Result<Calibration, LocalizationError> {
    if references.is_empty() {
        return Err(LocalizationError::NoReferences);
    }
    let residuals = references
        .iter()
        .map(|(inputs, d_ur)| {
            inputs.validate()?;
            Ok(inputs.ratio_db() - ideal_ratio_db(*d_ur, inputs.d_br, inputs.theta, inputs.alpha)?)
        })
        .collect::<Result<Vec<_>, LocalizationError>>()?;
    Calibration::new(crate::stats::median(&residuals).expect("non-empty"))
}

/// World position at `d_ur` along the selected beam.
pub fn localize(best_beam: AzEl, range: &RangeEstimate, pose: &RdarsPose) -> Position3D {
    let local = direction_unit_vector(best_beam) * range.d_ur;
    let w = pose.to_world(&local);
    Position3D { x: w.x, y: w.y, z: w.z }
}
