//! Monte Carlo runner for the two-stage sensing scheme.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentSpec, PbMode, Transport, UePlacement, UeRegion};
use super::HarnessError;
use crate::channel::{ChannelModel, RssiSample, Scenario, ShadowDraws};
use crate::control::frame::STATUS_STALE;
use crate::control::{ClientError, ControllerClient};
use crate::geometry::{angle_between, direction_unit_vector, AzEl, Position3D};
use crate::localization::{calibrate, estimate_range, localize, Calibration, LocalizationError, RangeInputs};
use crate::rdars::{PhaseCode, RdarsConfiguration};
use crate::stats::{median, percentile};
use crate::sweep::{ObserveError, SweepError, SweepResult, Sweeper};

/// Stream reserved for calibration reference draws.
const CALIBRATION_STREAM: u64 = u64::MAX;
const SCRAMBLE_SEED: u64 = 0x5C4A_3B1E;
const MAX_PLACEMENT_DRAWS: usize = 1000;

/// Where configurations are sent before the channel is observed.
pub trait Surface {
    fn apply(&mut self, config: &RdarsConfiguration) -> Result<(), ObserveError>;
}

/// In-process surface: configurations take effect immediately.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleSurface;

impl Surface for OracleSurface {
    fn apply(&mut self, _config: &RdarsConfiguration) -> Result<(), ObserveError> {
        Ok(())
    }
}

/// Surface behind the UDP control link; a configuration counts as applied
/// once the device has acknowledged it.
#[derive(Debug)]
pub struct UdpSurface {
    client: ControllerClient,
    synced: bool,
}

impl UdpSurface {
    pub fn connect(endpoint: std::net::SocketAddr, timeout: Duration, retries: u32) -> Result<Self, HarnessError> {
        Ok(Self { client: ControllerClient::connect(endpoint, timeout, retries)?, synced: false })
    }
}

impl Surface for UdpSurface {
    fn apply(&mut self, config: &RdarsConfiguration) -> Result<(), ObserveError> {
        if self.synced {
            return Ok(self.client.apply(config)?);
        }
        // A device that served an earlier session rejects low seq numbers;
        // jump by a quarter of the window until one is accepted.
        let mut seq: u16 = 1;
        for _ in 0..4 {
            self.client.set_next_seq(seq);
            match self.client.apply(config) {
                Ok(()) => {
                    self.synced = true;
                    return Ok(());
                }
                Err(ClientError::Nack { status: STATUS_STALE, .. }) => seq = seq.wrapping_add(0x4000),
                Err(e) => return Err(e.into()),
            }
        }
        Err("device rejected every sequence window".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub true_az_deg: Option<f64>,
    pub true_el_deg: Option<f64>,
    pub true_d_ur_m: Option<f64>,
    pub est_az_deg: Option<f64>,
    pub est_el_deg: Option<f64>,
    pub est_d_ur_m: Option<f64>,
    pub angle_error_deg: Option<f64>,
    pub range_error_m: Option<f64>,
    pub position_error_m: Option<f64>,
    pub ambiguous: Option<bool>,
    pub best_rssi_dbm: Option<f64>,
    pub p_connected_dbm: Option<f64>,
    pub p_bs_dbm: Option<f64>,
    pub sweep_evaluations: Option<usize>,
    pub trace_ref: String,
    pub error: Option<String>,
}

impl TrialRecord {
    fn empty(trial: usize) -> Self {
        Self {
            trial,
            true_az_deg: None,
            true_el_deg: None,
            true_d_ur_m: None,
            est_az_deg: None,
            est_el_deg: None,
            est_d_ur_m: None,
            angle_error_deg: None,
            range_error_m: None,
            position_error_m: None,
            ambiguous: None,
            best_rssi_dbm: None,
            p_connected_dbm: None,
            p_bs_dbm: None,
            sweep_evaluations: None,
            trace_ref: format!("trial-{trial:05}"),
            error: None,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub ambiguous: usize,
    pub calibration_offset_db: f64,
    pub angle_error_deg_median: Option<f64>,
    pub angle_error_deg_p90: Option<f64>,
    pub range_error_m_median: Option<f64>,
    pub range_error_m_p90: Option<f64>,
    pub position_error_m_median: Option<f64>,
    pub position_error_m_p90: Option<f64>,
}

impl Summary {
    pub fn from_records(records: &[TrialRecord], calibration: Calibration) -> Self {
        let column = |f: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> { records.iter().filter_map(f).collect() };
        let angle = column(|r| r.angle_error_deg);
        let range = column(|r| r.range_error_m);
        let pos = column(|r| r.position_error_m);
        let succeeded = records.iter().filter(|r| r.succeeded()).count();
        Self {
            trials: records.len(),
            succeeded,
            failed: records.len() - succeeded,
            ambiguous: records.iter().filter(|r| r.ambiguous == Some(true)).count(),
            calibration_offset_db: calibration.offset_db,
            angle_error_deg_median: median(&angle),
            angle_error_deg_p90: percentile(&angle, 90.0),
            range_error_m_median: median(&range),
            range_error_m_p90: percentile(&range, 90.0),
            position_error_m_median: median(&pos),
            position_error_m_p90: percentile(&pos, 90.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
    pub calibration: Calibration,
    /// Sweep trace per trial (`None` when the sweep did not complete),
    /// addressed by `TrialRecord::trace_ref`.
    pub traces: Vec<Option<SweepResult>>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    match spec.transport {
        Transport::Oracle => run_experiment_with(spec, &mut OracleSurface),
        Transport::Udp(addr) => {
            let mut surface = UdpSurface::connect(
                addr,
                crate::control::client::DEFAULT_TIMEOUT,
                crate::control::client::DEFAULT_RETRIES,
            )?;
            run_experiment_with(spec, &mut surface)
        }
    }
}

pub fn run_experiment_with(spec: &ExperimentSpec, surface: &mut dyn Surface) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let base = &spec.scenario;
    let mut sweeper = Sweeper::new(
        spec.grid,
        base.bs_dir_local(),
        base.connected_set.clone(),
        base.geometry.clone(),
        base.wavelength(),
    )?
    .with_repeats(spec.repeats)?;
    let pb_config = pb_configuration(spec)?;

    let calibration = if spec.calibration_references > 0 {
        build_calibration(spec, &mut sweeper, &pb_config)?
    } else {
        Calibration::default()
    };

    let mut records = Vec::with_capacity(spec.trials);
    let mut traces = Vec::with_capacity(spec.trials);
    for trial in 0..spec.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(trial as u64);
        let (record, trace) = run_trial(spec, trial, &mut rng, &mut sweeper, surface, &pb_config, &calibration);
        records.push(record);
        traces.push(trace);
    }
    let summary = Summary::from_records(&records, calibration);
    Ok(ExperimentReport { records, summary, calibration, traces })
}

fn pb_configuration(spec: &ExperimentSpec) -> Result<RdarsConfiguration, HarnessError> {
    let n = spec.scenario.geometry.len();
    Ok(match spec.pb_measurement {
        PbMode::AllConnected => RdarsConfiguration::all_connected(n)?,
        PbMode::Scrambled => {
            let mut rng = ChaCha8Rng::seed_from_u64(SCRAMBLE_SEED);
            let codes: Vec<PhaseCode> =
                (0..n).map(|_| PhaseCode::new(rng.random_range(0..4)).expect("code < 4")).collect();
            RdarsConfiguration::with_connected_set(&codes, &spec.scenario.connected_set)?
        }
    })
}

fn draw_ue(rng: &mut ChaCha8Rng, region: &UeRegion, scenario: &Scenario) -> Result<Position3D, HarnessError> {
    let d = rng.random_range(region.range_min..=region.range_max);
    let az = rng.random_range(region.az_min..=region.az_max);
    let el = rng.random_range(region.el_min..=region.el_max);
    let local = direction_unit_vector(AzEl { azimuth: az, elevation: el }) * d;
    Ok(Position3D::from_vector(&scenario.rdars_pose.to_world(&local))?)
}

fn place_ue(spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<Scenario, HarnessError> {
    let mut scenario = spec.scenario.clone();
    match spec.ue_placement {
        UePlacement::Fixed => {
            scenario.validate()?;
            Ok(scenario)
        }
        UePlacement::Random(region) => {
            for _ in 0..MAX_PLACEMENT_DRAWS {
                scenario.ue_pos = draw_ue(rng, &region, &spec.scenario)?;
                if scenario.validate().is_ok() {
                    return Ok(scenario);
                }
            }
            Err(HarnessError::Config("UE region never yields a valid placement".into()))
        }
    }
}

/// One power reading with optional Gaussian dB jitter, averaged over repeats.
fn read_power(
    truth: RssiSample,
    repeats: usize,
    noise: Option<&Normal<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<RssiSample, ObserveError> {
    let Some(noise) = noise else { return Ok(truth) };
    let mut total = 0.0;
    for _ in 0..repeats {
        total += RssiSample::new(truth.value_dbm + noise.sample(rng))?.mw();
    }
    Ok(RssiSample::from_mw(total / repeats as f64)?)
}

fn build_calibration(
    spec: &ExperimentSpec,
    sweeper: &mut Sweeper,
    pb_config: &RdarsConfiguration,
) -> Result<Calibration, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(CALIBRATION_STREAM);
    let draws = ShadowDraws::zero();
    let mut references = Vec::with_capacity(spec.calibration_references);
    let calib_spec = ExperimentSpec { ue_placement: UePlacement::Random(spec.ue_region), ..spec.clone() };
    for _ in 0..spec.calibration_references {
        let scenario = place_ue(&calib_spec, &mut rng)?;
        let model = ChannelModel::new(&scenario)?;
        let beam = sweeper.configuration(scenario.ue_azel()?)?;
        let p_c = model.rssi_connected(beam, &draws)?;
        let p_b = model.rssi_bs(pb_config, &draws)?;
        let inputs = RangeInputs {
            p_connected_dbm: p_c.value_dbm,
            p_bs_direct_dbm: p_b.value_dbm,
            theta: scenario.theta(),
            d_br: scenario.d_rb(),
            alpha: spec.alpha_assumed,
        };
        references.push((inputs, scenario.d_ur()));
    }
    Ok(calibrate(&references)?)
}

fn run_trial(
    spec: &ExperimentSpec,
    trial: usize,
    rng: &mut ChaCha8Rng,
    sweeper: &mut Sweeper,
    surface: &mut dyn Surface,
    pb_config: &RdarsConfiguration,
    calibration: &Calibration,
) -> (TrialRecord, Option<SweepResult>) {
    let mut rec = TrialRecord::empty(trial);
    let fail = |mut rec: TrialRecord, code: &str, trace| {
        rec.error = Some(code.to_string());
        (rec, trace)
    };

    let scenario = match place_ue(spec, rng) {
        Ok(s) => s,
        Err(_) => return fail(rec, "invalid_scenario", None),
    };
    let true_dir = scenario.ue_dir_local();
    rec.true_az_deg = Some(true_dir.x.atan2(true_dir.z).to_degrees());
    rec.true_el_deg = Some(true_dir.y.clamp(-1.0, 1.0).asin().to_degrees());
    rec.true_d_ur_m = Some(scenario.d_ur());

    let draws = ShadowDraws::sample(rng, scenario.channel.shadowing_sigma_db);
    let model = match ChannelModel::new(&scenario) {
        Ok(m) => m,
        Err(_) => return fail(rec, "invalid_scenario", None),
    };
    let noise = (spec.rssi_noise_db > 0.0).then(|| Normal::new(0.0, spec.rssi_noise_db).expect("validated"));

    // Stage 1: beam sweep observed at the BS.
    let sweep = sweeper.run(|cfg: &RdarsConfiguration| -> Result<RssiSample, ObserveError> {
        surface.apply(cfg)?;
        let truth = model.rssi_bs(cfg, &draws)?;
        read_power(truth, 1, noise.as_ref(), rng)
    });
    let sweep = match sweep {
        Ok(s) => s,
        Err(SweepError::Transport(_)) => return fail(rec, "transport_failed", None),
        Err(_) => return fail(rec, "sweep_failed", None),
    };
    rec.sweep_evaluations = Some(sweep.samples.len());
    rec.best_rssi_dbm = Some(sweep.best_rssi.value_dbm);
    rec.est_az_deg = Some(sweep.best.azimuth_deg());
    rec.est_el_deg = Some(sweep.best.elevation_deg());
    let est_dir = direction_unit_vector(sweep.best);
    let Ok(angle_err) = angle_between(&est_dir, &true_dir) else {
        return fail(rec, "sweep_failed", Some(sweep));
    };
    rec.angle_error_deg = Some(angle_err.to_degrees());

    // Stage 2: P_b without the reflected beam, then P_c with the selected beam.
    let measured = (|| -> Result<(RssiSample, RssiSample), ObserveError> {
        surface.apply(pb_config)?;
        let p_b = read_power(model.rssi_bs(pb_config, &draws)?, spec.repeats, noise.as_ref(), rng)?;
        let beam = sweeper.configuration(sweep.best)?.clone();
        surface.apply(&beam)?;
        let p_c = read_power(model.rssi_connected(&beam, &draws)?, spec.repeats, noise.as_ref(), rng)?;
        Ok((p_b, p_c))
    })();
    let Ok((p_b, p_c)) = measured else {
        return fail(rec, "measurement_failed", Some(sweep));
    };
    rec.p_bs_dbm = Some(p_b.value_dbm);
    rec.p_connected_dbm = Some(p_c.value_dbm);

    let theta = match angle_between(&est_dir, &scenario.bs_dir_local()) {
        Ok(t) => t,
        Err(_) => return fail(rec, "invalid_range_inputs", Some(sweep)),
    };
    let inputs = RangeInputs {
        p_connected_dbm: p_c.value_dbm,
        p_bs_direct_dbm: p_b.value_dbm,
        theta,
        d_br: scenario.d_rb(),
        alpha: spec.alpha_assumed,
    };
    let range = match estimate_range(&inputs, calibration) {
        Ok(r) => r,
        Err(LocalizationError::GeometryInfeasible(_)) => return fail(rec, "geometry_infeasible", Some(sweep)),
        Err(_) => return fail(rec, "invalid_range_inputs", Some(sweep)),
    };
    let position = localize(sweep.best, &range, &scenario.rdars_pose);
    rec.est_d_ur_m = Some(range.d_ur);
    rec.ambiguous = Some(range.ambiguous);
    rec.range_error_m = Some((range.d_ur - scenario.d_ur()).abs());
    rec.position_error_m = Some(position.distance_to(&scenario.ue_pos));
    (rec, Some(sweep))
}
