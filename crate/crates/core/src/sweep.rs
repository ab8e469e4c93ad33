//! Two-level azimuth/elevation beam sweep.
//!
//! A coarse pass over the whole grid picks the block with the strongest
//! RSSI; a fine pass re-probes that block (± one coarse step) at the fine
//! step. Coarse samples that coincide with fine points are reused, so each
//! configuration is applied at most once per sweep.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::RssiSample;
use crate::geometry::{check_unit, direction_unit_vector, ArrayGeometry, AzEl, GeometryError, Vec3};
use crate::rdars::{conjugate_beam_config, ConnectedSet, RdarsConfiguration, RdarsError};

/// Angles closer than this are the same grid point.
const ANGLE_EPS: f64 = 1e-9;

pub type ObserveError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error("repeat count must be at least 1")]
    ZeroRepeats,
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error(transparent)]
    Rdars(#[from] RdarsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("observation failed: {0}")]
    Transport(#[source] ObserveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub az_min: f64,
    pub az_max: f64,
    pub el_min: f64,
    pub el_max: f64,
    pub coarse_step: f64,
    pub fine_step: f64,
}

impl Default for SweepGrid {
    /// ±60° in both axes, 10° blocks refined at 2°.
    fn default() -> Self {
        let r = f64::to_radians;
        Self {
            az_min: r(-60.0),
            az_max: r(60.0),
            el_min: r(-60.0),
            el_max: r(60.0),
            coarse_step: r(10.0),
            fine_step: r(2.0),
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::InvalidGrid(m.to_owned()));
        let all = [self.az_min, self.az_max, self.el_min, self.el_max, self.coarse_step, self.fine_step];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("non-finite bound or step");
        }
        if self.az_min >= self.az_max || self.el_min >= self.el_max {
            return bad("min must be below max");
        }
        if self.fine_step <= 0.0 || self.coarse_step <= 0.0 {
            return bad("steps must be positive");
        }
        if self.fine_step > self.coarse_step {
            return bad("fine step exceeds coarse step");
        }
        for v in [self.az_min, self.az_max, self.el_min, self.el_max] {
            if v.abs() > std::f64::consts::FRAC_PI_2 + 1e-12 {
                return bad("bounds must stay within [-90°, 90°]");
            }
        }
        Ok(())
    }

    fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
        let n = ((max - min) / step + ANGLE_EPS).floor() as usize + 1;
        (0..n).map(|i| min + i as f64 * step).collect()
    }

    pub fn coarse_az(&self) -> Vec<f64> {
        Self::axis(self.az_min, self.az_max, self.coarse_step)
    }

    pub fn coarse_el(&self) -> Vec<f64> {
        Self::axis(self.el_min, self.el_max, self.coarse_step)
    }

    /// Fine axis values within one coarse step of `center`, clipped to `[min, max]`.
    fn fine_axis(&self, center: f64, min: f64, max: f64) -> Vec<f64> {
        let k = (self.coarse_step / self.fine_step + ANGLE_EPS).floor() as i64;
        (-k..=k)
            .map(|i| center + i as f64 * self.fine_step)
            .filter(|v| *v >= min - ANGLE_EPS && *v <= max + ANGLE_EPS)
            .collect()
    }

    /// Coarse points, elevation outer and azimuth inner.
    pub fn coarse_points(&self) -> Vec<AzEl> {
        grid_points(&self.coarse_az(), &self.coarse_el())
    }

    /// Fine axes `(az, el)` covering the block around `winner`.
    pub fn fine_axes(&self, winner: AzEl) -> (Vec<f64>, Vec<f64>) {
        (
            self.fine_axis(winner.azimuth, self.az_min, self.az_max),
            self.fine_axis(winner.elevation, self.el_min, self.el_max),
        )
    }

    /// Upper bound on fine-stage evaluations.
    pub fn max_fine_points(&self) -> usize {
        let side = 2 * (self.coarse_step / self.fine_step + ANGLE_EPS).floor() as usize + 1;
        side * side
    }
}

/// Row-major (elevation outer, azimuth inner) product of two axes.
pub fn grid_points(az: &[f64], el: &[f64]) -> Vec<AzEl> {
    el.iter().flat_map(|&e| az.iter().map(move |&a| AzEl { azimuth: a, elevation: e })).collect()
}

/// One conjugate configuration per grid point, order preserved.
pub fn build_codebook(
    grid_points: &[AzEl],
    bs_dir_local: &Vec3,
    connected_set: &ConnectedSet,
    geometry: &ArrayGeometry,
    lambda: f64,
) -> Result<Vec<(AzEl, RdarsConfiguration)>, SweepError> {
    if grid_points.is_empty() {
        return Err(SweepError::EmptyCodebook);
    }
    grid_points
        .iter()
        .map(|&p| {
            let p = AzEl::new(p.azimuth, p.elevation)?;
            let cfg = conjugate_beam_config(&direction_unit_vector(p), bs_dir_local, connected_set, geometry, lambda)?;
            Ok((p, cfg))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub angles: AzEl,
    pub rssi: RssiSample,
    pub stage: Stage,
}

/// Fine-stage RSSI over its block, elevation rows × azimuth columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiMap {
    pub az: Vec<f64>,
    pub el: Vec<f64>,
    /// `values[i_el * az.len() + i_az]`, dBm.
    pub values: Vec<f64>,
}

impl RssiMap {
    pub fn get(&self, i_el: usize, i_az: usize) -> f64 {
        self.values[i_el * self.az.len() + i_az]
    }

    /// Cells equal to the maximum of their complete 3×3 neighbourhood.
    ///
    /// Edge cells have no complete neighbourhood and are never counted, as
    /// with a "valid"-mode maximum filter. Adjacent qualifying cells with
    /// identical values (two hypotheses quantized to the same codes) form one
    /// plateau and are reported once, by their first cell in row-major order.
    pub fn local_maxima(&self) -> Vec<(usize, usize)> {
        let (rows, cols) = (self.el.len(), self.az.len());
        let mut candidates = Vec::new();
        for r in 1..rows.saturating_sub(1) {
            for c in 1..cols.saturating_sub(1) {
                let v = self.get(r, c);
                let is_max = (r - 1..=r + 1)
                    .flat_map(|rr| (c - 1..=c + 1).map(move |cc| (rr, cc)))
                    .all(|(rr, cc)| self.get(rr, cc) <= v);
                if is_max {
                    candidates.push((r, c));
                }
            }
        }
        let mut seen = vec![false; candidates.len()];
        let mut peaks = Vec::new();
        for start in 0..candidates.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            peaks.push(candidates[start]);
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                let (r, c) = candidates[i];
                for (j, &(rr, cc)) in candidates.iter().enumerate() {
                    if !seen[j] && r.abs_diff(rr) <= 1 && c.abs_diff(cc) <= 1 && self.get(r, c) == self.get(rr, cc) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        peaks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Every evaluated configuration, in the order it was probed.
    pub samples: Vec<SweepSample>,
    pub best: AzEl,
    pub best_rssi: RssiSample,
    pub coarse_best: AzEl,
    pub coarse_evaluations: usize,
    pub fine_evaluations: usize,
    pub fine_map: RssiMap,
}

fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        // strict comparison keeps the lowest index on ties
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Sweep driver holding the codebook cache for a fixed BS direction and
/// connected set.
#[derive(Debug, Clone)]
pub struct Sweeper {
    grid: SweepGrid,
    bs_dir: Vec3,
    connected_set: ConnectedSet,
    geometry: ArrayGeometry,
    lambda: f64,
    repeats: usize,
    cache: HashMap<(u64, u64), RdarsConfiguration>,
}

impl Sweeper {
    pub fn new(
        grid: SweepGrid,
        bs_dir_local: Vec3,
        connected_set: ConnectedSet,
        geometry: ArrayGeometry,
        lambda: f64,
    ) -> Result<Self, SweepError> {
        grid.validate()?;
        check_unit(&bs_dir_local)?;
        Ok(Self { grid, bs_dir: bs_dir_local, connected_set, geometry, lambda, repeats: 1, cache: HashMap::new() })
    }

    /// Number of RSSI readings averaged (in linear power) per configuration.
    pub fn with_repeats(mut self, repeats: usize) -> Result<Self, SweepError> {
        if repeats == 0 {
            return Err(SweepError::ZeroRepeats);
        }
        self.repeats = repeats;
        Ok(self)
    }

    pub fn grid(&self) -> &SweepGrid {
        &self.grid
    }

    pub fn configuration(&mut self, point: AzEl) -> Result<&RdarsConfiguration, SweepError> {
        let key = (point.azimuth.to_bits(), point.elevation.to_bits());
        if !self.cache.contains_key(&key) {
            let mut entry = build_codebook(&[point], &self.bs_dir, &self.connected_set, &self.geometry, self.lambda)?;
            let (_, cfg) = entry.pop().ok_or(SweepError::EmptyCodebook)?;
            self.cache.insert(key, cfg);
        }
        Ok(&self.cache[&key])
    }

    fn measure<F, E>(&mut self, point: AzEl, observe: &mut F) -> Result<RssiSample, SweepError>
    where
        F: FnMut(&RdarsConfiguration) -> Result<RssiSample, E>,
        E: Into<ObserveError>,
    {
        let repeats = self.repeats;
        let cfg = self.configuration(point)?;
        if repeats == 1 {
            return observe(cfg).map_err(|e| SweepError::Transport(e.into()));
        }
        let mut total = 0.0;
        for _ in 0..repeats {
            total += observe(cfg).map_err(|e| SweepError::Transport(e.into()))?.mw();
        }
        RssiSample::from_mw(total / repeats as f64).map_err(|e| SweepError::Transport(e.into()))
    }

    /// Runs the coarse then fine stage; `observe` is called strictly in sequence.
    pub fn run<F, E>(&mut self, mut observe: F) -> Result<SweepResult, SweepError>
    where
        F: FnMut(&RdarsConfiguration) -> Result<RssiSample, E>,
        E: Into<ObserveError>,
    {
        let coarse = self.grid.coarse_points();
        let mut samples = Vec::with_capacity(coarse.len() + self.grid.max_fine_points());
        for &p in &coarse {
            let rssi = self.measure(p, &mut observe)?;
            samples.push(SweepSample { angles: p, rssi, stage: Stage::Coarse });
        }
        let coarse_evaluations = samples.len();
        let winner = argmax(samples.iter().map(|s| s.rssi.value_dbm)).ok_or(SweepError::EmptyCodebook)?;
        let coarse_best = samples[winner].angles;

        let (fine_az, fine_el) = self.grid.fine_axes(coarse_best);
        let fine_points = grid_points(&fine_az, &fine_el);
        let mut values = Vec::with_capacity(fine_points.len());
        for p in fine_points.iter().copied() {
            let reused = samples[..coarse_evaluations].iter().find(|s| {
                (s.angles.azimuth - p.azimuth).abs() < ANGLE_EPS && (s.angles.elevation - p.elevation).abs() < ANGLE_EPS
            });
            let rssi = match reused {
                Some(s) => s.rssi,
                None => {
                    let rssi = self.measure(p, &mut observe)?;
                    samples.push(SweepSample { angles: p, rssi, stage: Stage::Fine });
                    rssi
                }
            };
            values.push(rssi);
        }
        let fine_evaluations = samples.len() - coarse_evaluations;
        let best_idx = argmax(values.iter().map(|v| v.value_dbm)).ok_or(SweepError::EmptyCodebook)?;

        Ok(SweepResult {
            best: fine_points[best_idx],
            best_rssi: values[best_idx],
            coarse_best,
            coarse_evaluations,
            fine_evaluations,
            fine_map: RssiMap { az: fine_az, el: fine_el, values: values.iter().map(|v| v.value_dbm).collect() },
            samples,
        })
    }
}

/// One-shot sweep without codebook reuse across calls.
pub fn sweep<F, E>(
    observe: F,
    grid: SweepGrid,
    bs_dir_local: &Vec3,
    connected_set: &ConnectedSet,
    geometry: &ArrayGeometry,
    lambda: f64,
) -> Result<SweepResult, SweepError>
where
    F: FnMut(&RdarsConfiguration) -> Result<RssiSample, E>,
    E: Into<ObserveError>,
{
    Sweeper::new(grid, *bs_dir_local, connected_set.clone(), geometry.clone(), lambda)?.run(observe)
}
