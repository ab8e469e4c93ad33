//! The dual-mode surface: per-element mode, 2-bit phase codes and
//! conjugate beam synthesis.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{check_unit, steering_phase_unchecked, ArrayGeometry, GeometryError, Vec3};

/// Element count of the surface the control link addresses.
pub const ELEMENT_COUNT: usize = 256;

/// Quantization levels of the 2-bit phase shifter.
pub const PHASE_LEVELS: u8 = 4;

pub type ConnectedSet = BTreeSet<usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdarsError {
    #[error("phase code {0} out of range (must be < 4)")]
    InvalidCode(u8),
    #[error("phase must be finite, got {0}")]
    NonFinitePhase(f64),
    #[error("element index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("configuration has no elements")]
    Empty,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Reflection phase `code · π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PhaseCode(u8);

const CODE_PHASORS: [Complex64; 4] =
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)];

impl PhaseCode {
    pub const ZERO: PhaseCode = PhaseCode(0);

    pub fn new(code: u8) -> Result<Self, RdarsError> {
        if code < PHASE_LEVELS {
            Ok(Self(code))
        } else {
            Err(RdarsError::InvalidCode(code))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn phase(self) -> f64 {
        f64::from(self.0) * FRAC_PI_2
    }

    /// `e^{j·phase}`, exact.
    pub fn phasor(self) -> Complex64 {
        CODE_PHASORS[self.0 as usize]
    }

    pub fn all() -> impl Iterator<Item = PhaseCode> {
        (0..PHASE_LEVELS).map(PhaseCode)
    }
}

impl TryFrom<u8> for PhaseCode {
    type Error = RdarsError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<PhaseCode> for u8 {
    fn from(c: PhaseCode) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementMode {
    Reflection(PhaseCode),
    Connected,
}

impl ElementMode {
    pub fn is_connected(&self) -> bool {
        matches!(self, ElementMode::Connected)
    }

    pub fn code(&self) -> Option<PhaseCode> {
        match self {
            ElementMode::Reflection(c) => Some(*c),
            ElementMode::Connected => None,
        }
    }
}

/// Mode of every element on the surface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdarsConfiguration {
    modes: Vec<ElementMode>,
}

impl RdarsConfiguration {
    pub fn new(modes: Vec<ElementMode>) -> Result<Self, RdarsError> {
        if modes.is_empty() {
            return Err(RdarsError::Empty);
        }
        Ok(Self { modes })
    }

    pub fn uniform(len: usize, code: PhaseCode) -> Result<Self, RdarsError> {
        Self::new(vec![ElementMode::Reflection(code); len])
    }

    /// Every element in connected mode; nothing is reflected.
    pub fn all_connected(len: usize) -> Result<Self, RdarsError> {
        Self::new(vec![ElementMode::Connected; len])
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ElementMode] {
        &self.modes
    }

    pub fn mode(&self, n: usize) -> Option<ElementMode> {
        self.modes.get(n).copied()
    }

    pub fn set_mode(&mut self, n: usize, mode: ElementMode) -> Result<(), RdarsError> {
        let len = self.modes.len();
        let slot = self.modes.get_mut(n).ok_or(RdarsError::IndexOutOfRange { index: n, len })?;
        *slot = mode;
        Ok(())
    }

    pub fn connected_set(&self) -> ConnectedSet {
        self.modes.iter().enumerate().filter(|(_, m)| m.is_connected()).map(|(n, _)| n).collect()
    }

    pub fn reflect_set(&self) -> Vec<usize> {
        self.modes.iter().enumerate().filter(|(_, m)| !m.is_connected()).map(|(n, _)| n).collect()
    }

    /// `a`, the number of connected elements.
    pub fn connected_count(&self) -> usize {
        self.modes.iter().filter(|m| m.is_connected()).count()
    }

    /// Switches the elements in `set` to connected mode and every other
    /// element back to reflection, keeping `phases` for reflecting elements.
    pub fn with_connected_set(phases: &[PhaseCode], set: &ConnectedSet) -> Result<Self, RdarsError> {
        check_indices(set, phases.len())?;
        let modes = phases
            .iter()
            .enumerate()
            .map(|(n, &c)| if set.contains(&n) { ElementMode::Connected } else { ElementMode::Reflection(c) })
            .collect();
        Self::new(modes)
    }
}

/// Corner elements `{0, 15, 240, 255}` of the 16×16 panel.
pub fn default_connected_set() -> ConnectedSet {
    [0, 15, 240, 255].into_iter().collect()
}

fn check_indices(set: &ConnectedSet, len: usize) -> Result<(), RdarsError> {
    match set.iter().next_back() {
        Some(&index) if index >= len => Err(RdarsError::IndexOutOfRange { index, len }),
        _ => Ok(()),
    }
}

/// Nearest of the four levels `k·π/2` to `phi mod 2π`; ties go to the lower code.
pub fn quantize_phase(phi: f64) -> Result<PhaseCode, RdarsError> {
    if !phi.is_finite() {
        return Err(RdarsError::NonFinitePhase(phi));
    }
    Ok(quantize_phase_finite(phi))
}

#[inline]
pub(crate) fn quantize_phase_finite(phi: f64) -> PhaseCode {
    let levels = u32::from(PHASE_LEVELS);
    let t = phi.rem_euclid(TAU) / FRAC_PI_2;
    let k = t.floor();
    let frac = t - k;
    let k = (k as u32) % levels;
    // at a tie the upper neighbour of level 3 wraps to code 0, which is lower
    let code = if frac > 0.5 || (frac == 0.5 && k == levels - 1) { (k + 1) % levels } else { k };
    PhaseCode(code as u8)
}

/// Unquantized conjugate phases `−(θ_in + θ_out)` per element.
pub fn ideal_continuous_phases(
    ue_dir: &Vec3,
    bs_dir: &Vec3,
    geometry: &ArrayGeometry,
    lambda: f64,
) -> Result<Vec<f64>, RdarsError> {
    check_unit(ue_dir)?;
    check_unit(bs_dir)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(GeometryError::NonPositiveWavelength(lambda).into());
    }
    Ok(geometry
        .positions()
        .iter()
        .map(|p| -(steering_phase_unchecked(p, ue_dir, lambda) + steering_phase_unchecked(p, bs_dir, lambda)))
        .collect())
}

/// 2-bit conjugate beam from `ue_dir` toward `bs_dir`; `connected_set`
/// elements are switched to connected mode.
pub fn conjugate_beam_config(
    ue_dir: &Vec3,
    bs_dir: &Vec3,
    connected_set: &ConnectedSet,
    geometry: &ArrayGeometry,
    lambda: f64,
) -> Result<RdarsConfiguration, RdarsError> {
    check_indices(connected_set, geometry.len())?;
    let codes: Vec<PhaseCode> =
        ideal_continuous_phases(ue_dir, bs_dir, geometry, lambda)?.into_iter().map(quantize_phase_finite).collect();
    RdarsConfiguration::with_connected_set(&codes, connected_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{direction_unit_vector, wavelength, AzEl};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn code(v: u8) -> PhaseCode {
        PhaseCode::new(v).unwrap()
    }

    fn wrap(x: f64) -> f64 {
        (x + PI).rem_euclid(TAU) - PI
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_phase(0.0).unwrap(), code(0));
        assert_eq!(quantize_phase(PI).unwrap(), code(2));
        assert_eq!(quantize_phase(0.8).unwrap(), code(1));
        assert_eq!(quantize_phase(FRAC_PI_4).unwrap(), code(0));
        assert_eq!(quantize_phase(-FRAC_PI_4).unwrap(), code(0));
        assert_eq!(quantize_phase(3.0 * FRAC_PI_4).unwrap(), code(1));
        assert_eq!(quantize_phase(-1e-18).unwrap(), code(0));
        assert!(quantize_phase(f64::INFINITY).is_err());
        assert!(quantize_phase(f64::NAN).is_err());
    }

    #[test]
    fn phase_code_bounds() {
        assert!(PhaseCode::new(4).is_err());
        assert_abs_diff_eq!(code(3).phase(), 1.5 * PI, epsilon = 1e-15);
        for c in PhaseCode::all() {
            let z = Complex64::from_polar(1.0, c.phase());
            assert_abs_diff_eq!((c.phasor() - z).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn boresight_pair_gives_all_zero_codes() {
        let lambda = wavelength(3.7e9).unwrap();
        let g = ArrayGeometry::default_for_wavelength(lambda).unwrap();
        let cfg = conjugate_beam_config(&Vec3::z(), &Vec3::z(), &ConnectedSet::new(), &g, lambda).unwrap();
        assert_eq!(cfg.len(), 256);
        assert!(cfg.modes().iter().all(|m| *m == ElementMode::Reflection(code(0))));
        let ideal = ideal_continuous_phases(&Vec3::z(), &Vec3::z(), &g, lambda).unwrap();
        assert!(ideal.iter().all(|p| p.abs() == 0.0));
    }

    #[test]
    fn connected_corners() {
        let lambda = wavelength(3.7e9).unwrap();
        let g = ArrayGeometry::default_for_wavelength(lambda).unwrap();
        let set = default_connected_set();
        let cfg = conjugate_beam_config(&Vec3::z(), &Vec3::z(), &set, &g, lambda).unwrap();
        assert_eq!(cfg.connected_set(), set);
        assert_eq!(cfg.connected_count(), 4);
        assert_eq!(cfg.reflect_set().len(), 252);
        let bad: ConnectedSet = [256].into_iter().collect();
        assert!(matches!(
            conjugate_beam_config(&Vec3::z(), &Vec3::z(), &bad, &g, lambda),
            Err(RdarsError::IndexOutOfRange { index: 256, .. })
        ));
    }

    #[test]
    fn perturbed_ue_matches_direct_recomputation() {
        let lambda = wavelength(3.7e9).unwrap();
        let g = ArrayGeometry::default_for_wavelength(lambda).unwrap();
        let ten = 10f64.to_radians();
        let ue = Vec3::new(ten.sin(), 0.0, ten.cos());
        let cfg = conjugate_beam_config(&ue, &Vec3::z(), &ConnectedSet::new(), &g, lambda).unwrap();
        for (n, p) in g.positions().iter().enumerate() {
            // only x varies the phase here: p·(u_ue + u_bs) = x·sin10° + 0
            let phi = -(TAU / lambda) * (p.x * ten.sin() + p.z * (1.0 + ten.cos()));
            let t = phi.rem_euclid(TAU);
            let nearest = (0..4u8)
                .min_by(|&a, &b| {
                    let da = wrap(t - f64::from(a) * FRAC_PI_2).abs();
                    let db = wrap(t - f64::from(b) * FRAC_PI_2).abs();
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                })
                .unwrap();
            assert_eq!(cfg.mode(n), Some(ElementMode::Reflection(code(nearest))), "element {n}");
        }
    }

    #[test]
    fn quantizing_ideal_reproduces_config() {
        let lambda = wavelength(3.7e9).unwrap();
        let g = ArrayGeometry::default_for_wavelength(lambda).unwrap();
        let ue = direction_unit_vector(AzEl::from_degrees(23.0, -11.0).unwrap());
        let bs = direction_unit_vector(AzEl::from_degrees(-45.0, 5.0).unwrap());
        let ideal = ideal_continuous_phases(&ue, &bs, &g, lambda).unwrap();
        let cfg = conjugate_beam_config(&ue, &bs, &ConnectedSet::new(), &g, lambda).unwrap();
        for (n, phi) in ideal.iter().enumerate() {
            assert_eq!(cfg.mode(n).unwrap().code(), Some(quantize_phase(*phi).unwrap()));
            let expected = -(steering_phase_unchecked(&g.positions()[n], &ue, lambda)
                + steering_phase_unchecked(&g.positions()[n], &bs, lambda));
            assert_eq!(*phi, expected);
        }
    }

    proptest! {
        #[test]
        fn quantization_error_bounded(phi in -100.0f64..100.0) {
            let c = quantize_phase(phi).unwrap();
            prop_assert!(wrap(phi - c.phase()).abs() <= FRAC_PI_4 + 1e-12);
        }

        #[test]
        fn quantization_periodic(phi in -50.0f64..50.0) {
            // skip points within rounding distance of a decision boundary
            let t = phi.rem_euclid(TAU) / FRAC_PI_2;
            prop_assume!(((t - t.floor()) - 0.5).abs() > 1e-9);
            prop_assert_eq!(quantize_phase(phi).unwrap(), quantize_phase(phi + TAU).unwrap());
        }

        #[test]
        fn connected_and_reflect_partition(
            set in proptest::collection::btree_set(0usize..256, 0..40),
            az in -1.2f64..1.2, el in -1.2f64..1.2,
        ) {
            let lambda = wavelength(3.7e9).unwrap();
            let g = ArrayGeometry::default_for_wavelength(lambda).unwrap();
            let ue = direction_unit_vector(AzEl::new(az, el).unwrap());
            let cfg = conjugate_beam_config(&ue, &Vec3::z(), &set, &g, lambda).unwrap();
            for (n, m) in cfg.modes().iter().enumerate() {
                prop_assert_eq!(m.is_connected(), set.contains(&n));
            }
            prop_assert_eq!(cfg.connected_set().len() + cfg.reflect_set().len(), 256);
        }
    }
}
