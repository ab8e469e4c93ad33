//! Controller side: send a frame and wait for the matching reply.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::frame::{ControlFrame, MsgType, MAX_FRAME_LEN, STATUS_OK, STATUS_STALE};
use super::payload::{encode_mode_mask, encode_phase_payload, CodecError};
use crate::rdars::{ConnectedSet, RdarsConfiguration};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(200);
pub const DEFAULT_RETRIES: u32 = 5;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("socket error: {0}")]
    Io(#[from] io::Error),
    #[error("no reply after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("device rejected seq {seq} with status {status:#04x}")]
    Nack { seq: u16, status: u8 },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("cannot resolve endpoint {0}")]
    Resolve(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub attempts: u32,
    /// The device reported the frame as already applied, which on a
    /// retransmission means an earlier copy got through.
    pub duplicate: bool,
}

/// Send `frame` and wait for an ACK carrying its seq. `retries` counts
/// retransmissions after the first send.
pub fn send_frame(
    socket: &UdpSocket,
    endpoint: SocketAddr,
    frame: &ControlFrame,
    timeout: Duration,
    retries: u32,
) -> Result<Delivery, ClientError> {
    let bytes = frame.encode();
    let mut buf = [0u8; MAX_FRAME_LEN];
    for attempt in 1..=retries.saturating_add(1) {
        socket.send_to(&bytes, endpoint)?;
        let deadline = Instant::now() + timeout;
        loop {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            socket.set_read_timeout(Some(deadline - now))?;
            let n = match socket.recv_from(&mut buf) {
                Ok((n, from)) if from == endpoint => n,
                Ok(_) => continue,
                Err(e)
                    if matches!(
                        e.kind(),
                        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut | io::ErrorKind::ConnectionRefused
                    ) =>
                {
                    continue
                }
                Err(e) => return Err(e.into()),
            };
            let Ok(reply) = ControlFrame::decode(&buf[..n]) else { continue };
            let Some((seq, status)) = reply.reply_fields() else { continue };
            if seq != frame.seq {
                continue;
            }
            return match (reply.msg_type, status) {
                (MsgType::Ack, STATUS_OK) => Ok(Delivery { attempts: attempt, duplicate: false }),
                (MsgType::Nack, STATUS_STALE) if attempt > 1 => Ok(Delivery { attempts: attempt, duplicate: true }),
                _ => Err(ClientError::Nack { seq, status }),
            };
        }
    }
    Err(ClientError::Timeout { attempts: retries.saturating_add(1) })
}

fn resolve(endpoint: impl ToSocketAddrs + std::fmt::Debug) -> Result<SocketAddr, ClientError> {
    let desc = format!("{endpoint:?}");
    endpoint.to_socket_addrs()?.next().ok_or(ClientError::Resolve(desc))
}

fn bind_for(endpoint: SocketAddr) -> io::Result<UdpSocket> {
    if endpoint.is_ipv4() {
        UdpSocket::bind(("0.0.0.0", 0))
    } else {
        UdpSocket::bind(("::", 0))
    }
}

/// One-shot PHASE_CONFIG delivery from an ephemeral socket.
pub fn send_config(
    endpoint: impl ToSocketAddrs + std::fmt::Debug,
    config: &RdarsConfiguration,
    seq: u16,
    timeout: Duration,
    retries: u32,
) -> Result<Delivery, ClientError> {
    let endpoint = resolve(endpoint)?;
    let frame = ControlFrame::phase_config(seq, encode_phase_payload(config)?);
    send_frame(&bind_for(endpoint)?, endpoint, &frame, timeout, retries)
}

/// One-shot MODE_MASK delivery from an ephemeral socket.
pub fn send_mode_mask(
    endpoint: impl ToSocketAddrs + std::fmt::Debug,
    set: &ConnectedSet,
    seq: u16,
    timeout: Duration,
    retries: u32,
) -> Result<Delivery, ClientError> {
    let endpoint = resolve(endpoint)?;
    let frame = ControlFrame::mode_mask(seq, encode_mode_mask(set)?);
    send_frame(&bind_for(endpoint)?, endpoint, &frame, timeout, retries)
}

/// Long-lived controller that tracks seq numbers and the last mask sent.
#[derive(Debug)]
pub struct ControllerClient {
    socket: UdpSocket,
    endpoint: SocketAddr,
    next_seq: u16,
    timeout: Duration,
    retries: u32,
    sent_mask: Option<ConnectedSet>,
}

impl ControllerClient {
    pub fn connect(
        endpoint: impl ToSocketAddrs + std::fmt::Debug,
        timeout: Duration,
        retries: u32,
    ) -> Result<Self, ClientError> {
        let endpoint = resolve(endpoint)?;
        Ok(Self { socket: bind_for(endpoint)?, endpoint, next_seq: 1, timeout, retries, sent_mask: None })
    }

    pub fn endpoint(&self) -> SocketAddr {
        self.endpoint
    }

    /// Override the next seq, e.g. to continue after a device that has
    /// already seen traffic.
    pub fn set_next_seq(&mut self, seq: u16) {
        self.next_seq = seq;
    }

    fn take_seq(&mut self) -> u16 {
        let s = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        s
    }

    pub fn send_mode_mask(&mut self, set: &ConnectedSet) -> Result<Delivery, ClientError> {
        let frame = ControlFrame::mode_mask(self.take_seq(), encode_mode_mask(set)?);
        let d = send_frame(&self.socket, self.endpoint, &frame, self.timeout, self.retries)?;
        self.sent_mask = Some(set.clone());
        Ok(d)
    }

    pub fn send_phases(&mut self, config: &RdarsConfiguration) -> Result<Delivery, ClientError> {
        let frame = ControlFrame::phase_config(self.take_seq(), encode_phase_payload(config)?);
        send_frame(&self.socket, self.endpoint, &frame, self.timeout, self.retries)
    }

    /// Push a full configuration: the mask when it differs from the last one
    /// delivered, then the phases.
    pub fn apply(&mut self, config: &RdarsConfiguration) -> Result<(), ClientError> {
        let mask = config.connected_set();
        if self.sent_mask.as_ref() != Some(&mask) {
            self.send_mode_mask(&mask)?;
        }
        self.send_phases(config)?;
        Ok(())
    }
}
