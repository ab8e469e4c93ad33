//! Simulation and control stack for a reconfigurable surface with a few
//! receive-capable ("connected") elements: beam sweeping, UE direction and
//! range estimation, a UDP control link to the surface, and an experiment
//! harness tying them together.

pub mod channel;
pub mod control;
pub mod geometry;
pub mod harness;
pub mod link_rate;
pub mod localization;
pub mod rdars;
pub mod stats;
pub mod sweep;

pub use channel::{ChannelModel, ChannelParams, Observables, RssiSample, Scenario, ShadowDraws};
pub use geometry::{ArrayGeometry, AzEl, Position3D, RdarsPose};
pub use localization::{Calibration, RangeEstimate, RangeInputs};
pub use rdars::{ConnectedSet, ElementMode, PhaseCode, RdarsConfiguration};
pub use sweep::{SweepGrid, SweepResult, Sweeper};
