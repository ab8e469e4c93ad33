//! UDP control link between the host and the surface controller.

pub mod client;
pub mod device;
pub mod frame;
pub mod payload;

pub use client::{send_config, send_frame, send_mode_mask, ClientError, ControllerClient, Delivery};
pub use device::{seq_is_newer, DeviceServer, DeviceState, DeviceStats, LinkImpairment, DEFAULT_PORT};
pub use frame::{crc16, recover_seq, ControlFrame, FrameError, MsgType};
pub use payload::{decode_mode_mask, decode_phase_payload, encode_mode_mask, encode_phase_payload, CodecError};
