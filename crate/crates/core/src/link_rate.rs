//! Uplink rate model: LTE resource-grid throughput and the Shannon ceiling.
//!
//! The rate depends only on the link configuration; nothing here reads
//! sensing state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Post-overhead fraction that brings the 20 MHz 64-QAM grid to 81.8 Mbit/s.
pub const DEFAULT_EFFICIENCY: f64 = 0.8115;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkRateError {
    #[error("invalid link configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub bandwidth_hz: f64,
    pub subcarriers: u32,
    pub symbols_per_second_per_subcarrier: f64,
    pub bits_per_symbol: u32,
    pub efficiency: f64,
}

impl Default for LinkConfig {
    /// 20 MHz LTE: 100 PRBs × 12 subcarriers, 14 symbols per 1 ms subframe, 64-QAM.
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            subcarriers: 1200,
            symbols_per_second_per_subcarrier: 14_000.0,
            bits_per_symbol: 6,
            efficiency: DEFAULT_EFFICIENCY,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), LinkRateError> {
        let bad = |m: String| Err(LinkRateError::InvalidConfig(m));
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return bad(format!("bandwidth_hz = {}", self.bandwidth_hz));
        }
        if self.subcarriers == 0 {
            return bad("subcarriers = 0".into());
        }
        if !(self.symbols_per_second_per_subcarrier.is_finite() && self.symbols_per_second_per_subcarrier > 0.0) {
            return bad(format!("symbols_per_second_per_subcarrier = {}", self.symbols_per_second_per_subcarrier));
        }
        if ![2, 4, 6, 8].contains(&self.bits_per_symbol) {
            return bad(format!("bits_per_symbol = {} (expected 2, 4, 6 or 8)", self.bits_per_symbol));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad(format!("efficiency = {} outside (0, 1]", self.efficiency));
        }
        Ok(())
    }
}

pub fn grid_rate_bps(cfg: &LinkConfig) -> Result<f64, LinkRateError> {
    cfg.validate()?;
    Ok(f64::from(cfg.subcarriers)
        * cfg.symbols_per_second_per_subcarrier
        * f64::from(cfg.bits_per_symbol)
        * cfg.efficiency)
}

/// `B·log2(1 + SNR)`; `snr_db = -inf` gives 0.
pub fn shannon_rate_bps(snr_db: f64, bandwidth_hz: f64) -> Result<f64, LinkRateError> {
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(LinkRateError::InvalidConfig(format!("bandwidth_hz = {bandwidth_hz}")));
    }
    if snr_db.is_nan() {
        return Err(LinkRateError::InvalidConfig("snr_db is NaN".into()));
    }
    Ok(bandwidth_hz * (10f64.powf(snr_db / 10.0)).ln_1p() / std::f64::consts::LN_2)
}

/// The grid rate is physically plausible at `snr_db` only below the Shannon ceiling.
pub fn shannon_gate(cfg: &LinkConfig, snr_db: f64) -> Result<bool, LinkRateError> {
    Ok(shannon_rate_bps(snr_db, cfg.bandwidth_hz)? > grid_rate_bps(cfg)?)
}
