//! Bit packing of the 512-bit phase payload and the 256-bit mode mask.
//!
//! Element `n` owns bits `2·(n mod 4)` and `2·(n mod 4) + 1` of byte `n / 4`
//! (LSB first). The mode mask sets bit `n mod 8` of byte `n / 8` for a
//! connected element.

use thiserror::Error;

use super::frame::{MODE_MASK_PAYLOAD_LEN, PHASE_PAYLOAD_LEN};
use crate::rdars::{ConnectedSet, ElementMode, PhaseCode, RdarsConfiguration, ELEMENT_COUNT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("payload has {actual} bytes, expected {expected}")]
    WrongLength { expected: usize, actual: usize },
    #[error("configuration has {0} elements, the link carries exactly 256")]
    ElementCount(usize),
    #[error("element index {0} out of range")]
    IndexOutOfRange(usize),
}

/// Connected elements are packed as code 0.
pub fn encode_phase_payload(config: &RdarsConfiguration) -> Result<[u8; PHASE_PAYLOAD_LEN], CodecError> {
    if config.len() != ELEMENT_COUNT {
        return Err(CodecError::ElementCount(config.len()));
    }
    let codes: Vec<PhaseCode> = config.modes().iter().map(|m| m.code().unwrap_or(PhaseCode::ZERO)).collect();
    Ok(pack_codes(&codes))
}

pub(crate) fn pack_codes(codes: &[PhaseCode]) -> [u8; PHASE_PAYLOAD_LEN] {
    let mut out = [0u8; PHASE_PAYLOAD_LEN];
    for (n, c) in codes.iter().enumerate() {
        out[n / 4] |= c.value() << (2 * (n % 4));
    }
    out
}

pub fn decode_phase_codes(bytes: &[u8]) -> Result<Vec<PhaseCode>, CodecError> {
    if bytes.len() != PHASE_PAYLOAD_LEN {
        return Err(CodecError::WrongLength { expected: PHASE_PAYLOAD_LEN, actual: bytes.len() });
    }
    Ok((0..ELEMENT_COUNT)
        .map(|n| PhaseCode::new((bytes[n / 4] >> (2 * (n % 4))) & 0b11).expect("two bits are always < 4"))
        .collect())
}

pub fn decode_phase_payload(bytes: &[u8], connected_mask: &ConnectedSet) -> Result<RdarsConfiguration, CodecError> {
    let codes = decode_phase_codes(bytes)?;
    if let Some(&n) = connected_mask.iter().next_back().filter(|&&n| n >= ELEMENT_COUNT) {
        return Err(CodecError::IndexOutOfRange(n));
    }
    let modes = codes
        .into_iter()
        .enumerate()
        .map(|(n, c)| if connected_mask.contains(&n) { ElementMode::Connected } else { ElementMode::Reflection(c) })
        .collect();
    Ok(RdarsConfiguration::new(modes).expect("256 elements"))
}

pub fn encode_mode_mask(set: &ConnectedSet) -> Result<[u8; MODE_MASK_PAYLOAD_LEN], CodecError> {
    let mut out = [0u8; MODE_MASK_PAYLOAD_LEN];
    for &n in set {
        if n >= ELEMENT_COUNT {
            return Err(CodecError::IndexOutOfRange(n));
        }
        out[n / 8] |= 1 << (n % 8);
    }
    Ok(out)
}

pub fn decode_mode_mask(bytes: &[u8]) -> Result<ConnectedSet, CodecError> {
    if bytes.len() != MODE_MASK_PAYLOAD_LEN {
        return Err(CodecError::WrongLength { expected: MODE_MASK_PAYLOAD_LEN, actual: bytes.len() });
    }
    Ok((0..ELEMENT_COUNT).filter(|n| bytes[n / 8] & (1 << (n % 8)) != 0).collect())
}
