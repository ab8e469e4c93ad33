//! Flat TOML experiment files.
//!
//! Every key is optional and unknown keys are rejected. Angles are in
//! degrees, distances in meters, powers in dBm/dB.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::channel::{free_space_reference_loss_db, ChannelParams, Scenario};
use crate::geometry::{wavelength, ArrayGeometry, Position3D, RdarsPose};
use crate::rdars::{default_connected_set, ConnectedSet};
use crate::sweep::SweepGrid;

pub const DEFAULT_SCENARIO_TOML: &str = include_str!("../../scenarios/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UePlacementKind {
    /// Every trial uses `ue_pos`.
    Fixed,
    /// Uniform in range, azimuth and elevation inside the configured box.
    Random,
}

/// How the BS-direct power is measured in stage 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PbMode {
    /// All elements switched to connected mode: no reflected term at the BS.
    AllConnected,
    /// Pseudo-random reflection phases; the reflected term is small but nonzero.
    Scrambled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Oracle,
    Udp(SocketAddr),
}

impl FromStr for Transport {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "oracle" {
            return Ok(Self::Oracle);
        }
        let endpoint = s.strip_prefix("udp:").ok_or_else(|| {
            HarnessError::Config(format!("transport must be `oracle` or `udp:<host:port>`, got `{s}`"))
        })?;
        let addr = endpoint
            .to_socket_addrs()
            .ok()
            .and_then(|mut a| a.next())
            .ok_or_else(|| HarnessError::Config(format!("cannot resolve udp endpoint `{endpoint}`")))?;
        Ok(Self::Udp(addr))
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Oracle => f.write_str("oracle"),
            Self::Udp(a) => write!(f, "udp:{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentFile {
    pub carrier_hz: f64,
    pub path_loss_exponent: f64,
    /// Defaults to free-space loss at 1 m for the carrier.
    pub reference_loss_db: Option<f64>,
    pub shadowing_sigma_db: f64,
    pub channel_seed: u64,
    pub direct_path_excess_loss_db: f64,
    pub tx_power_dbm: f64,
    /// `-inf` disables receiver noise.
    pub noise_floor_dbm: f64,

    pub array_rows: usize,
    pub array_cols: usize,
    /// Defaults to half a wavelength.
    pub element_spacing_m: Option<f64>,
    pub rdars_origin: [f64; 3],
    pub rdars_yaw_deg: f64,
    pub rdars_pitch_deg: f64,
    pub rdars_roll_deg: f64,
    pub bs_pos: [f64; 3],
    pub ue_pos: [f64; 3],
    pub connected_set: Vec<usize>,

    pub az_min_deg: f64,
    pub az_max_deg: f64,
    pub el_min_deg: f64,
    pub el_max_deg: f64,
    pub coarse_step_deg: f64,
    pub fine_step_deg: f64,
    pub repeats: usize,
    /// Gaussian dB jitter on every RSSI reading.
    pub rssi_noise_db: f64,

    pub trials: usize,
    pub seed: u64,
    pub calibration_references: usize,
    pub alpha_assumed: f64,
    pub pb_measurement: PbMode,
    pub ue_placement: UePlacementKind,
    pub ue_range_min_m: f64,
    pub ue_range_max_m: f64,
    pub ue_az_min_deg: f64,
    pub ue_az_max_deg: f64,
    pub ue_el_min_deg: f64,
    pub ue_el_max_deg: f64,
    pub transport: String,
}

impl Default for ExperimentFile {
    fn default() -> Self {
        let grid = SweepGrid::default();
        Self {
            carrier_hz: 3.7e9,
            path_loss_exponent: 2.0,
            reference_loss_db: None,
            shadowing_sigma_db: 0.0,
            channel_seed: 0,
            direct_path_excess_loss_db: 0.0,
            tx_power_dbm: 0.0,
            noise_floor_dbm: -95.0,
            array_rows: ArrayGeometry::DEFAULT_ROWS,
            array_cols: ArrayGeometry::DEFAULT_COLS,
            element_spacing_m: None,
            rdars_origin: [0.0; 3],
            rdars_yaw_deg: 0.0,
            rdars_pitch_deg: 0.0,
            rdars_roll_deg: 0.0,
            bs_pos: [-7.0710678118654755, 0.0, 7.0710678118654755],
            ue_pos: [0.0, 0.0, 5.0],
            connected_set: default_connected_set().into_iter().collect(),
            az_min_deg: grid.az_min.to_degrees(),
            az_max_deg: grid.az_max.to_degrees(),
            el_min_deg: grid.el_min.to_degrees(),
            el_max_deg: grid.el_max.to_degrees(),
            coarse_step_deg: grid.coarse_step.to_degrees(),
            fine_step_deg: grid.fine_step.to_degrees(),
            repeats: 1,
            rssi_noise_db: 0.0,
            trials: 1,
            seed: 0,
            calibration_references: 0,
            alpha_assumed: 2.0,
            pb_measurement: PbMode::AllConnected,
            ue_placement: UePlacementKind::Fixed,
            ue_range_min_m: 3.0,
            ue_range_max_m: 8.0,
            ue_az_min_deg: -60.0,
            ue_az_max_deg: 60.0,
            ue_el_min_deg: -30.0,
            ue_el_max_deg: 30.0,
            transport: "oracle".into(),
        }
    }
}

/// Sampling box for UE positions, in the surface's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeRegion {
    pub range_min: f64,
    pub range_max: f64,
    pub az_min: f64,
    pub az_max: f64,
    pub el_min: f64,
    pub el_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UePlacement {
    Fixed,
    Random(UeRegion),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub grid: SweepGrid,
    pub trials: usize,
    pub seed: u64,
    pub calibration_references: usize,
    pub alpha_assumed: f64,
    pub transport: Transport,
    pub ue_placement: UePlacement,
    /// Region for calibration reference points (and random UE draws).
    pub ue_region: UeRegion,
    pub repeats: usize,
    pub rssi_noise_db: f64,
    pub pb_measurement: PbMode,
}

impl ExperimentFile {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn shipped_default() -> Self {
        Self::from_toml(DEFAULT_SCENARIO_TOML).expect("shipped scenario parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat struct serializes")
    }

    pub fn to_spec(&self) -> Result<ExperimentSpec, HarnessError> {
        let cfg = |m: String| HarnessError::Config(m);
        let lambda = wavelength(self.carrier_hz).map_err(|e| cfg(e.to_string()))?;
        let reference_loss_db = match self.reference_loss_db {
            Some(v) => v,
            None => free_space_reference_loss_db(self.carrier_hz)?,
        };
        let channel = ChannelParams {
            carrier_hz: self.carrier_hz,
            path_loss_exponent: self.path_loss_exponent,
            reference_loss_db,
            shadowing_sigma_db: self.shadowing_sigma_db,
            rng_seed: self.channel_seed,
            direct_path_excess_loss_db: self.direct_path_excess_loss_db,
        };
        let geometry =
            ArrayGeometry::new(self.array_rows, self.array_cols, self.element_spacing_m.unwrap_or(lambda / 2.0))?;
        let pos = |p: [f64; 3]| Position3D::new(p[0], p[1], p[2]);
        let rdars_pose = RdarsPose::from_yaw_pitch_roll(
            pos(self.rdars_origin)?,
            self.rdars_yaw_deg.to_radians(),
            self.rdars_pitch_deg.to_radians(),
            self.rdars_roll_deg.to_radians(),
        )?;
        let scenario = Scenario {
            bs_pos: pos(self.bs_pos)?,
            ue_pos: pos(self.ue_pos)?,
            rdars_pose,
            geometry,
            channel,
            tx_power_dbm: self.tx_power_dbm,
            noise_floor_dbm: self.noise_floor_dbm,
            connected_set: self.connected_set.iter().copied().collect::<ConnectedSet>(),
        };
        let grid = SweepGrid {
            az_min: self.az_min_deg.to_radians(),
            az_max: self.az_max_deg.to_radians(),
            el_min: self.el_min_deg.to_radians(),
            el_max: self.el_max_deg.to_radians(),
            coarse_step: self.coarse_step_deg.to_radians(),
            fine_step: self.fine_step_deg.to_radians(),
        };
        let ue_region = UeRegion {
            range_min: self.ue_range_min_m,
            range_max: self.ue_range_max_m,
            az_min: self.ue_az_min_deg.to_radians(),
            az_max: self.ue_az_max_deg.to_radians(),
            el_min: self.ue_el_min_deg.to_radians(),
            el_max: self.ue_el_max_deg.to_radians(),
        };
        let spec = ExperimentSpec {
            scenario,
            grid,
            trials: self.trials,
            seed: self.seed,
            calibration_references: self.calibration_references,
            alpha_assumed: self.alpha_assumed,
            transport: self.transport.parse()?,
            ue_placement: match self.ue_placement {
                UePlacementKind::Fixed => UePlacement::Fixed,
                UePlacementKind::Random => UePlacement::Random(ue_region),
            },
            ue_region,
            repeats: self.repeats,
            rssi_noise_db: self.rssi_noise_db,
            pb_measurement: self.pb_measurement,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if !(self.alpha_assumed.is_finite() && self.alpha_assumed > 0.0) {
            return bad("alpha_assumed must be positive");
        }
        if !(self.rssi_noise_db.is_finite() && self.rssi_noise_db >= 0.0) {
            return bad("rssi_noise_db must be finite and non-negative");
        }
        let r = &self.ue_region;
        let angles_ok = [r.az_min, r.az_max, r.el_min, r.el_max].iter().all(|a| a.is_finite() && a.abs() < FRAC_PI_2)
            && r.az_min <= r.az_max
            && r.el_min <= r.el_max;
        if !(r.range_min > 1.0 && r.range_min <= r.range_max && r.range_max.is_finite() && angles_ok) {
            return bad("UE region needs 1 < range_min <= range_max and ordered angles inside (-90, 90) degrees");
        }
        if self.scenario.connected_set.is_empty() {
            return bad("connected_set must name at least one element");
        }
        self.grid.validate()?;
        self.scenario.channel.validate()?;
        Ok(())
    }
}
