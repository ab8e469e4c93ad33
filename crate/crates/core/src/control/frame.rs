//! Datagram framing.
//!
//! ```text
//! 0      2     3      4        6            8            8+n      10+n
//! +------+-----+------+--------+------------+------------+--------+
//! | 'RD' | ver | type | seq BE | len (n) BE | payload[n] | crc BE |
//! +------+-----+------+--------+------------+------------+--------+
//! ```
//!
//! The CRC is CRC-16/CCITT-FALSE over everything before it.

use crc::{Crc, CRC_16_IBM_3740};
use thiserror::Error;

pub const MAGIC: [u8; 2] = [0x52, 0x44];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const CRC_LEN: usize = 2;
pub const MIN_FRAME_LEN: usize = HEADER_LEN + CRC_LEN;
pub const MAX_FRAME_LEN: usize = 128;

pub const PHASE_PAYLOAD_LEN: usize = 64;
pub const MODE_MASK_PAYLOAD_LEN: usize = 32;
pub const REPLY_PAYLOAD_LEN: usize = 3;

pub const STATUS_OK: u8 = 0x00;
pub const STATUS_MALFORMED: u8 = 0x01;
pub const STATUS_STALE: u8 = 0x02;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
const CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CCITT_FALSE.checksum(bytes)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("crc mismatch: computed {computed:#06x}, frame carries {received:#06x}")]
    BadCrc { computed: u16, received: u16 },
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    PhaseConfig = 0x01,
    ModeMask = 0x02,
    Ack = 0x03,
    Nack = 0x04,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(Self::PhaseConfig),
            0x02 => Some(Self::ModeMask),
            0x03 => Some(Self::Ack),
            0x04 => Some(Self::Nack),
            _ => None,
        }
    }

    pub fn payload_len(self) -> usize {
        match self {
            Self::PhaseConfig => PHASE_PAYLOAD_LEN,
            Self::ModeMask => MODE_MASK_PAYLOAD_LEN,
            Self::Ack | Self::Nack => REPLY_PAYLOAD_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFrame {
    pub msg_type: MsgType,
    pub seq: u16,
    pub payload: Vec<u8>,
}

impl ControlFrame {
    pub fn new(msg_type: MsgType, seq: u16, payload: Vec<u8>) -> Result<Self, FrameError> {
        if payload.len() != msg_type.payload_len() {
            return Err(FrameError::LengthMismatch { expected: msg_type.payload_len(), actual: payload.len() });
        }
        Ok(Self { msg_type, seq, payload })
    }

    pub fn phase_config(seq: u16, payload: [u8; PHASE_PAYLOAD_LEN]) -> Self {
        Self { msg_type: MsgType::PhaseConfig, seq, payload: payload.to_vec() }
    }

    pub fn mode_mask(seq: u16, mask: [u8; MODE_MASK_PAYLOAD_LEN]) -> Self {
        Self { msg_type: MsgType::ModeMask, seq, payload: mask.to_vec() }
    }

    /// Replies carry the request's seq both in the header and the payload.
    pub fn ack(seq: u16, status: u8) -> Self {
        Self::reply(MsgType::Ack, seq, status)
    }

    pub fn nack(seq: u16, status: u8) -> Self {
        Self::reply(MsgType::Nack, seq, status)
    }

    fn reply(msg_type: MsgType, seq: u16, status: u8) -> Self {
        let [hi, lo] = seq.to_be_bytes();
        Self { msg_type, seq, payload: vec![hi, lo, status] }
    }

    /// `(echoed seq, status)` of an ACK/NACK.
    pub fn reply_fields(&self) -> Option<(u16, u8)> {
        match self.msg_type {
            MsgType::Ack | MsgType::Nack => {
                Some((u16::from_be_bytes([self.payload[0], self.payload[1]]), self.payload[2]))
            }
            _ => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MIN_FRAME_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        let crc = crc16(&out);
        out.extend_from_slice(&crc.to_be_bytes());
        out
    }

    /// Integrity is checked before any header field is trusted, so a single
    /// flipped bit anywhere reports [`FrameError::BadCrc`]. A datagram whose
    /// size agrees with neither its declared length nor its type's fixed
    /// length is reported as truncated or padded instead.
    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let actual = bytes.len();
        if actual < MIN_FRAME_LEN {
            return Err(FrameError::LengthMismatch { expected: MIN_FRAME_LEN, actual });
        }
        let declared = usize::from(u16::from_be_bytes([bytes[6], bytes[7]])) + MIN_FRAME_LEN;
        let typed = MsgType::from_byte(bytes[3]).map(|t| t.payload_len() + MIN_FRAME_LEN);

        let (body, trailer) = bytes.split_at(actual - CRC_LEN);
        let received = u16::from_be_bytes([trailer[0], trailer[1]]);
        let computed = crc16(body);
        if computed != received {
            if declared != actual && typed != Some(actual) {
                return Err(FrameError::LengthMismatch { expected: typed.unwrap_or(declared), actual });
            }
            return Err(FrameError::BadCrc { computed, received });
        }

        if bytes[0..2] != MAGIC {
            return Err(FrameError::BadMagic([bytes[0], bytes[1]]));
        }
        if bytes[2] != VERSION {
            return Err(FrameError::BadVersion(bytes[2]));
        }
        if declared != actual {
            return Err(FrameError::LengthMismatch { expected: declared, actual });
        }
        let msg_type = MsgType::from_byte(bytes[3]).ok_or(FrameError::UnknownType(bytes[3]))?;
        let payload = bytes[HEADER_LEN..actual - CRC_LEN].to_vec();
        let seq = u16::from_be_bytes([bytes[4], bytes[5]]);
        Self::new(msg_type, seq, payload)
    }
}

/// Sequence number of a datagram that may fail to decode.
pub fn recover_seq(bytes: &[u8]) -> Option<u16> {
    (bytes.len() >= 6).then(|| u16::from_be_bytes([bytes[4], bytes[5]]))
}
