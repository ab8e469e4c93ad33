//! Narrowband uplink channel and the RSSI observables it produces.
//!
//! Log-distance path loss with log-normal shadowing on each of the three
//! links (UE–BS, UE–surface, surface–BS). Reflected contributions add
//! coherently using planar-wave element phases; connected elements report
//! their mean received power.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    steering_phase_unchecked, wavelength, ArrayGeometry, AzEl, GeometryError, Position3D, RdarsPose, Vec3,
    SPEED_OF_LIGHT,
};
use crate::rdars::{ConnectedSet, ElementMode, RdarsConfiguration};

/// Reference distance of the log-distance model, meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance {0} m is below the 1 m reference distance")]
    BelowReferenceDistance(f64),
    #[error("invalid channel parameter: {0}")]
    InvalidParams(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("configuration has {got} elements, surface has {expected}")]
    ElementCountMismatch { expected: usize, got: usize },
    #[error("configuration connected set differs from the scenario's")]
    ConnectedSetMismatch,
    #[error("no connected elements to measure")]
    NoConnectedElements,
    #[error("received power is not finite")]
    NonFiniteRssi,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `20·log10(4π·d0/λ)`, the free-space loss at the reference distance.
pub fn free_space_reference_loss_db(carrier_hz: f64) -> Result<f64, ChannelError> {
    let lambda = wavelength(carrier_hz)?;
    Ok(20.0 * (4.0 * PI * REFERENCE_DISTANCE_M / lambda).log10())
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub carrier_hz: f64,
    pub path_loss_exponent: f64,
    pub reference_loss_db: f64,
    pub shadowing_sigma_db: f64,
    /// Seeds the fixed direct-path phase.
    pub rng_seed: u64,
    /// Extra attenuation on the UE–BS link only (obstruction); `inf` removes
    /// the direct path.
    pub direct_path_excess_loss_db: f64,
}

impl ChannelParams {
    pub fn for_carrier(carrier_hz: f64) -> Result<Self, ChannelError> {
        Ok(Self {
            carrier_hz,
            path_loss_exponent: 2.0,
            reference_loss_db: free_space_reference_loss_db(carrier_hz)?,
            shadowing_sigma_db: 0.0,
            rng_seed: 0,
            direct_path_excess_loss_db: 0.0,
        })
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: String| Err(ChannelError::InvalidParams(m));
        wavelength(self.carrier_hz)?;
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return bad(format!("path_loss_exponent = {}", self.path_loss_exponent));
        }
        if !self.reference_loss_db.is_finite() {
            return bad(format!("reference_loss_db = {}", self.reference_loss_db));
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return bad(format!("shadowing_sigma_db = {}", self.shadowing_sigma_db));
        }
        if self.direct_path_excess_loss_db.is_nan() || self.direct_path_excess_loss_db < 0.0 {
            return bad(format!("direct_path_excess_loss_db = {}", self.direct_path_excess_loss_db));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::for_carrier(3.7e9).expect("3.7 GHz is a valid carrier")
    }
}

/// `−(PL0 + 10·α·log10(d) + shadow)` in dB.
pub fn path_gain_db(d: f64, params: &ChannelParams, shadow_draw: f64) -> Result<f64, ChannelError> {
    if d.is_nan() || d < REFERENCE_DISTANCE_M {
        return Err(ChannelError::BelowReferenceDistance(d));
    }
    Ok(-(params.reference_loss_db + 10.0 * params.path_loss_exponent * d.log10() + shadow_draw))
}

/// Received power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RssiSample {
    pub value_dbm: f64,
}

impl RssiSample {
    pub fn new(value_dbm: f64) -> Result<Self, ChannelError> {
        if value_dbm.is_finite() {
            Ok(Self { value_dbm })
        } else {
            Err(ChannelError::NonFiniteRssi)
        }
    }

    pub fn from_mw(mw: f64) -> Result<Self, ChannelError> {
        Self::new(mw_to_dbm(mw))
    }

    pub fn mw(&self) -> f64 {
        dbm_to_mw(self.value_dbm)
    }
}

/// Shadowing realisation for one trial, dB of extra loss per link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShadowDraws {
    pub ue_bs: f64,
    pub ue_rdars: f64,
    pub rdars_bs: f64,
}

impl ShadowDraws {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> Self {
        if sigma_db == 0.0 {
            return Self::zero();
        }
        let n = Normal::new(0.0, sigma_db).expect("sigma validated as finite and non-negative");
        Self { ue_bs: n.sample(rng), ue_rdars: n.sample(rng), rdars_bs: n.sample(rng) }
    }
}

/// World geometry plus radio parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_pos: Position3D,
    pub ue_pos: Position3D,
    pub rdars_pose: RdarsPose,
    pub geometry: ArrayGeometry,
    pub channel: ChannelParams,
    pub tx_power_dbm: f64,
    /// `-inf` disables receiver noise.
    pub noise_floor_dbm: f64,
    pub connected_set: ConnectedSet,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ChannelError> {
        self.channel.validate()?;
        let bad = |m: String| Err(ChannelError::InvalidScenario(m));
        if !self.tx_power_dbm.is_finite() {
            return bad(format!("tx_power_dbm = {}", self.tx_power_dbm));
        }
        if self.noise_floor_dbm.is_nan() || self.noise_floor_dbm == f64::INFINITY {
            return bad(format!("noise_floor_dbm = {}", self.noise_floor_dbm));
        }
        if let Some(&n) = self.connected_set.iter().next_back() {
            if n >= self.geometry.len() {
                return bad(format!("connected element {n} outside the {}-element array", self.geometry.len()));
            }
        }
        for (name, p) in [("bs_pos", &self.bs_pos), ("ue_pos", &self.ue_pos)] {
            if self.rdars_pose.to_local(p).z <= 0.0 {
                return bad(format!("{name} is not in front of the surface"));
            }
        }
        let origin = self.rdars_pose.origin();
        for (name, d) in [
            ("UE-BS", self.d_ub()),
            ("UE-RDARS", self.ue_pos.distance_to(&origin)),
            ("RDARS-BS", self.bs_pos.distance_to(&origin)),
        ] {
            if d.is_nan() || d <= REFERENCE_DISTANCE_M {
                return bad(format!("{name} distance {d:.3} m must exceed 1 m"));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.channel.wavelength()
    }

    pub fn ue_dir_local(&self) -> Vec3 {
        self.rdars_pose.local_direction_to(&self.ue_pos)
    }

    pub fn bs_dir_local(&self) -> Vec3 {
        self.rdars_pose.local_direction_to(&self.bs_pos)
    }

    pub fn ue_azel(&self) -> Result<AzEl, GeometryError> {
        AzEl::from_direction(&self.ue_dir_local())
    }

    pub fn d_ur(&self) -> f64 {
        self.ue_pos.distance_to(&self.rdars_pose.origin())
    }

    pub fn d_rb(&self) -> f64 {
        self.bs_pos.distance_to(&self.rdars_pose.origin())
    }

    pub fn d_ub(&self) -> f64 {
        self.ue_pos.distance_to(&self.bs_pos)
    }

    /// Angle at the surface between the UE and BS directions.
    pub fn theta(&self) -> f64 {
        self.ue_dir_local().dot(&self.bs_dir_local()).clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub rssi_bs: RssiSample,
    pub rssi_connected: RssiSample,
}

/// Per-scenario precomputation for repeated RSSI evaluations.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    tx_mw: f64,
    noise_mw: f64,
    element_count: usize,
    connected_set: ConnectedSet,
    d_ub: f64,
    d_ur: f64,
    d_rb: f64,
    params: ChannelParams,
    direct_phasor: Complex64,
    /// `e^{j(θ_in + θ_out)}` per element.
    element_phasors: Vec<Complex64>,
}

impl ChannelModel {
    pub fn new(scenario: &Scenario) -> Result<Self, ChannelError> {
        scenario.validate()?;
        let lambda = scenario.wavelength();
        let ue = scenario.ue_dir_local();
        let bs = scenario.bs_dir_local();
        let element_phasors = scenario
            .geometry
            .positions()
            .iter()
            .map(|p| {
                Complex64::from_polar(
                    1.0,
                    steering_phase_unchecked(p, &ue, lambda) + steering_phase_unchecked(p, &bs, lambda),
                )
            })
            .collect();
        let phi0 = ChaCha8Rng::seed_from_u64(scenario.channel.rng_seed).random_range(0.0..TAU);
        Ok(Self {
            tx_mw: dbm_to_mw(scenario.tx_power_dbm),
            noise_mw: dbm_to_mw(scenario.noise_floor_dbm),
            element_count: scenario.geometry.len(),
            connected_set: scenario.connected_set.clone(),
            d_ub: scenario.d_ub(),
            d_ur: scenario.d_ur(),
            d_rb: scenario.d_rb(),
            params: scenario.channel,
            direct_phasor: Complex64::from_polar(1.0, phi0),
            element_phasors,
        })
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    fn check_config(&self, config: &RdarsConfiguration) -> Result<(), ChannelError> {
        if config.len() != self.element_count {
            return Err(ChannelError::ElementCountMismatch { expected: self.element_count, got: config.len() });
        }
        Ok(())
    }

    /// Complex gain of the direct and reflected paths (amplitude units).
    pub fn path_amplitudes(
        &self,
        config: &RdarsConfiguration,
        shadows: &ShadowDraws,
    ) -> Result<(Complex64, Complex64), ChannelError> {
        self.check_config(config)?;
        let g_ub =
            dbm_to_mw(path_gain_db(self.d_ub, &self.params, shadows.ue_bs)? - self.params.direct_path_excess_loss_db);
        let g_ur = dbm_to_mw(path_gain_db(self.d_ur, &self.params, shadows.ue_rdars)?);
        let g_rb = dbm_to_mw(path_gain_db(self.d_rb, &self.params, shadows.rdars_bs)?);
        let h_direct = self.direct_phasor * g_ub.sqrt();
        let coherent: Complex64 = config
            .modes()
            .iter()
            .zip(&self.element_phasors)
            .filter_map(|(m, w)| match m {
                ElementMode::Reflection(c) => Some(w * c.phasor()),
                ElementMode::Connected => None,
            })
            .sum();
        Ok((h_direct, coherent * (g_ur * g_rb).sqrt()))
    }

    /// Signal power at the BS antenna without receiver noise, mW.
    pub fn bs_signal_mw(&self, config: &RdarsConfiguration, shadows: &ShadowDraws) -> Result<f64, ChannelError> {
        let (d, r) = self.path_amplitudes(config, shadows)?;
        Ok((d + r).norm_sqr() * self.tx_mw)
    }

    pub fn rssi_bs(&self, config: &RdarsConfiguration, shadows: &ShadowDraws) -> Result<RssiSample, ChannelError> {
        RssiSample::from_mw(self.bs_signal_mw(config, shadows)? + self.noise_mw)
    }

    /// Mean power over the connected elements of `config`.
    pub fn rssi_connected(
        &self,
        config: &RdarsConfiguration,
        shadows: &ShadowDraws,
    ) -> Result<RssiSample, ChannelError> {
        self.check_config(config)?;
        let a = config.connected_count();
        if a == 0 {
            return Err(ChannelError::NoConnectedElements);
        }
        let g_ur = dbm_to_mw(path_gain_db(self.d_ur, &self.params, shadows.ue_rdars)?);
        // identical far-field gain on every connected element
        let total: f64 = (0..a).map(|_| g_ur * self.tx_mw + self.noise_mw).sum();
        RssiSample::from_mw(total / a as f64)
    }

    pub fn observables(&self, config: &RdarsConfiguration, shadows: &ShadowDraws) -> Result<Observables, ChannelError> {
        if config.connected_set() != self.connected_set {
            return Err(ChannelError::ConnectedSetMismatch);
        }
        Ok(Observables {
            rssi_bs: self.rssi_bs(config, shadows)?,
            rssi_connected: self.rssi_connected(config, shadows)?,
        })
    }

    pub fn snr_db(&self, config: &RdarsConfiguration, shadows: &ShadowDraws) -> Result<f64, ChannelError> {
        Ok(mw_to_dbm(self.bs_signal_mw(config, shadows)?) - mw_to_dbm(self.noise_mw))
    }
}

pub fn uplink_observables(
    scenario: &Scenario,
    config: &RdarsConfiguration,
    shadow_draws: &ShadowDraws,
) -> Result<Observables, ChannelError> {
    ChannelModel::new(scenario)?.observables(config, shadow_draws)
}

/// Noise-free BS signal power over the noise floor, no shadowing.
pub fn snr_db(scenario: &Scenario, config: &RdarsConfiguration) -> Result<f64, ChannelError> {
    ChannelModel::new(scenario)?.snr_db(config, &ShadowDraws::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{direction_unit_vector, AzEl};
    use crate::rdars::{conjugate_beam_config, default_connected_set, ideal_continuous_phases, PhaseCode};
    use approx::assert_abs_diff_eq;

    fn base_scenario() -> Scenario {
        let channel = ChannelParams::default();
        let lambda = channel.wavelength();
        Scenario {
            bs_pos: Position3D::new(-7.0710678, 0.0, 7.0710678).unwrap(),
            ue_pos: Position3D::new(2.0, 1.0, 4.5).unwrap(),
            rdars_pose: RdarsPose::identity_at(Position3D::origin()),
            geometry: ArrayGeometry::default_for_wavelength(lambda).unwrap(),
            channel,
            tx_power_dbm: 0.0,
            noise_floor_dbm: -95.0,
            connected_set: default_connected_set(),
        }
    }

    fn beam(s: &Scenario) -> RdarsConfiguration {
        conjugate_beam_config(&s.ue_dir_local(), &s.bs_dir_local(), &s.connected_set, &s.geometry, s.wavelength())
            .unwrap()
    }

    #[test]
    fn path_gain_examples() {
        let p = ChannelParams::default();
        assert_abs_diff_eq!(p.reference_loss_db, 43.81, epsilon = 0.02);
        assert_abs_diff_eq!(path_gain_db(1.0, &p, 0.0).unwrap(), -p.reference_loss_db, epsilon = 1e-12);
        assert_abs_diff_eq!(path_gain_db(10.0, &p, 0.0).unwrap(), -p.reference_loss_db - 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(path_gain_db(10.0, &p, 3.0).unwrap(), -p.reference_loss_db - 23.0, epsilon = 1e-12);
        assert!(matches!(path_gain_db(0.5, &p, 0.0), Err(ChannelError::BelowReferenceDistance(_))));
    }

    #[test]
    fn single_direct_path_power() {
        // PL0 tuned so that g(d_ub) = -60 dB; all elements connected, no noise
        let mut s = base_scenario();
        s.noise_floor_dbm = f64::NEG_INFINITY;
        let d = s.d_ub();
        s.channel.reference_loss_db = 60.0 - 20.0 * d.log10();
        s.connected_set = (0..256).collect();
        let cfg = RdarsConfiguration::all_connected(256).unwrap();
        let obs = uplink_observables(&s, &cfg, &ShadowDraws::zero()).unwrap();
        assert_abs_diff_eq!(obs.rssi_bs.value_dbm, -60.0, epsilon = 1e-9);
    }

    #[test]
    fn four_ideal_elements_add_coherently() {
        let channel = ChannelParams { direct_path_excess_loss_db: f64::INFINITY, ..ChannelParams::default() };
        let lambda = channel.wavelength();
        let geometry = ArrayGeometry::new(1, 4, lambda / 2.0).unwrap();
        let s = Scenario {
            geometry: geometry.clone(),
            channel,
            connected_set: ConnectedSet::new(),
            noise_floor_dbm: f64::NEG_INFINITY,
            ..base_scenario()
        };
        let model = ChannelModel::new(&s).unwrap();
        let ideal = ideal_continuous_phases(&s.ue_dir_local(), &s.bs_dir_local(), &geometry, lambda).unwrap();
        let sum: Complex64 =
            ideal.iter().zip(&model.element_phasors).map(|(psi, w)| w * Complex64::from_polar(1.0, *psi)).sum();
        assert_abs_diff_eq!(sum.norm(), 4.0, epsilon = 1e-12);
        // power relative to one element
        let one: Complex64 = model.element_phasors[0] * Complex64::from_polar(1.0, ideal[0]);
        assert_abs_diff_eq!(sum.norm_sqr() / one.norm_sqr(), 16.0, epsilon = 1e-10);
    }

    #[test]
    fn connected_rssi_is_definitional() {
        let s = base_scenario();
        let obs = uplink_observables(&s, &beam(&s), &ShadowDraws::zero()).unwrap();
        let g = path_gain_db(s.d_ur(), &s.channel, 0.0).unwrap();
        let expect = mw_to_dbm(dbm_to_mw(s.tx_power_dbm + g) + dbm_to_mw(s.noise_floor_dbm));
        assert_abs_diff_eq!(obs.rssi_connected.value_dbm, expect, epsilon = 1e-9);
    }

    #[test]
    fn empty_connected_set_is_an_error() {
        let mut s = base_scenario();
        s.connected_set.clear();
        let cfg = beam(&s);
        assert!(matches!(uplink_observables(&s, &cfg, &ShadowDraws::zero()), Err(ChannelError::NoConnectedElements)));
    }

    #[test]
    fn mismatched_connected_set_is_rejected() {
        let s = base_scenario();
        let cfg = RdarsConfiguration::uniform(256, PhaseCode::ZERO).unwrap();
        assert!(matches!(uplink_observables(&s, &cfg, &ShadowDraws::zero()), Err(ChannelError::ConnectedSetMismatch)));
    }

    #[test]
    fn snr_examples() {
        let mut s = base_scenario();
        s.channel.direct_path_excess_loss_db = f64::INFINITY;
        let cfg = beam(&s);
        let model = ChannelModel::new(&s).unwrap();
        let sig = mw_to_dbm(model.bs_signal_mw(&cfg, &ShadowDraws::zero()).unwrap());
        assert_abs_diff_eq!(snr_db(&s, &cfg).unwrap(), sig + 95.0, epsilon = 1e-9);

        let base = snr_db(&s, &cfg).unwrap();
        s.tx_power_dbm += 10.0 * 2f64.log10();
        assert_abs_diff_eq!(snr_db(&s, &cfg).unwrap() - base, 3.0103, epsilon = 1e-4);

        let flat = RdarsConfiguration::with_connected_set(&[PhaseCode::ZERO; 256], &s.connected_set).unwrap();
        assert!(snr_db(&s, &cfg).unwrap() > snr_db(&s, &flat).unwrap());
    }

    #[test]
    fn connected_rssi_decreases_with_distance() {
        let mut s = base_scenario();
        let u = direction_unit_vector(AzEl::from_degrees(20.0, 5.0).unwrap());
        let mut last = f64::INFINITY;
        for d in [1.5, 2.0, 3.0, 5.0, 8.0, 13.0] {
            s.ue_pos = Position3D::from_vector(&(u * d)).unwrap();
            let v = uplink_observables(&s, &beam(&s), &ShadowDraws::zero()).unwrap().rssi_connected.value_dbm;
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn shadowing_variance_matches_sigma() {
        let mut s = base_scenario();
        s.noise_floor_dbm = f64::NEG_INFINITY;
        let sigma = 3.0;
        let model = ChannelModel::new(&s).unwrap();
        let cfg = beam(&s);
        let mean = model.rssi_connected(&cfg, &ShadowDraws::zero()).unwrap().value_dbm;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let msq: f64 = (0..n)
            .map(|_| {
                let draws = ShadowDraws::sample(&mut rng, sigma);
                let v = model.rssi_connected(&cfg, &draws).unwrap().value_dbm;
                (v - mean).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((msq / (sigma * sigma) - 1.0).abs() < 0.05, "ratio {}", msq / (sigma * sigma));
    }

    #[test]
    fn reflected_magnitude_reciprocal_under_swap() {
        let s = base_scenario();
        let swapped = Scenario { ue_pos: s.bs_pos, bs_pos: s.ue_pos, ..s.clone() };
        let draws = ShadowDraws::zero();
        let cfg = beam(&s);
        let cfg_swapped = beam(&swapped);
        let (_, r1) = ChannelModel::new(&s).unwrap().path_amplitudes(&cfg, &draws).unwrap();
        let (_, r2) = ChannelModel::new(&swapped).unwrap().path_amplitudes(&cfg_swapped, &draws).unwrap();
        assert_abs_diff_eq!(r1.norm(), r2.norm(), epsilon = 1e-15);
    }

    #[test]
    fn scenario_guards() {
        let mut s = base_scenario();
        s.ue_pos = Position3D::new(0.0, 0.0, -3.0).unwrap();
        assert!(matches!(s.validate(), Err(ChannelError::InvalidScenario(_))));
        let mut s = base_scenario();
        s.ue_pos = Position3D::new(0.0, 0.0, 0.8).unwrap();
        assert!(s.validate().is_err());
        let mut s = base_scenario();
        s.channel.path_loss_exponent = 0.0;
        assert!(matches!(s.validate(), Err(ChannelError::InvalidParams(_))));
    }
}
