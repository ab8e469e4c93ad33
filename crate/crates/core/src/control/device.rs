//! Software stand-in for the surface controller board.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frame::{recover_seq, ControlFrame, MsgType, MAX_FRAME_LEN, STATUS_MALFORMED, STATUS_OK, STATUS_STALE};
use super::payload::{decode_mode_mask, decode_phase_codes, CodecError};
use crate::rdars::{ConnectedSet, ElementMode, PhaseCode, RdarsConfiguration, ELEMENT_COUNT};

pub const DEFAULT_PORT: u16 = 47474;

const POLL_INTERVAL: Duration = Duration::from_millis(20);

/// True when `seq` is ahead of `last` in 16-bit serial-number arithmetic.
pub fn seq_is_newer(seq: u16, last: u16) -> bool {
    let d = seq.wrapping_sub(last);
    d != 0 && d < 0x8000
}

/// Stored phases survive mode changes: an element switched back from
/// connected to reflection reuses its last commanded code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceState {
    phases: Vec<PhaseCode>,
    connected: ConnectedSet,
    last_seq_applied: u16,
}

impl Default for DeviceState {
    fn default() -> Self {
        Self { phases: vec![PhaseCode::ZERO; ELEMENT_COUNT], connected: ConnectedSet::new(), last_seq_applied: 0 }
    }
}

impl DeviceState {
    pub fn new(initial: &RdarsConfiguration) -> Result<Self, CodecError> {
        if initial.len() != ELEMENT_COUNT {
            return Err(CodecError::ElementCount(initial.len()));
        }
        Ok(Self {
            phases: initial.modes().iter().map(|m| m.code().unwrap_or(PhaseCode::ZERO)).collect(),
            connected: initial.connected_set(),
            last_seq_applied: 0,
        })
    }

    pub fn current(&self) -> RdarsConfiguration {
        let modes = self
            .phases
            .iter()
            .enumerate()
            .map(
                |(n, &c)| if self.connected.contains(&n) { ElementMode::Connected } else { ElementMode::Reflection(c) },
            )
            .collect();
        RdarsConfiguration::new(modes).expect("256 elements")
    }

    pub fn connected(&self) -> &ConnectedSet {
        &self.connected
    }

    pub fn last_seq_applied(&self) -> u16 {
        self.last_seq_applied
    }

    /// Process one datagram and return the reply to send, if any.
    /// Replies are never answered.
    pub fn handle_datagram(&mut self, bytes: &[u8]) -> Option<Vec<u8>> {
        let frame = match ControlFrame::decode(bytes) {
            Ok(f) => f,
            Err(_) => {
                return Some(ControlFrame::nack(recover_seq(bytes).unwrap_or(0), STATUS_MALFORMED).encode());
            }
        };
        if matches!(frame.msg_type, MsgType::Ack | MsgType::Nack) {
            return None;
        }
        if !seq_is_newer(frame.seq, self.last_seq_applied) {
            return Some(ControlFrame::nack(frame.seq, STATUS_STALE).encode());
        }
        match frame.msg_type {
            MsgType::PhaseConfig => {
                self.phases = decode_phase_codes(&frame.payload).ok()?;
            }
            MsgType::ModeMask => {
                self.connected = decode_mode_mask(&frame.payload).ok()?;
            }
            MsgType::Ack | MsgType::Nack => unreachable!(),
        }
        self.last_seq_applied = frame.seq;
        Some(ControlFrame::ack(frame.seq, STATUS_OK).encode())
    }
}

/// Independent drop probabilities for each direction, for exercising the
/// retry path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkImpairment {
    pub drop_incoming: f64,
    pub drop_outgoing: f64,
    pub seed: u64,
}

impl Default for LinkImpairment {
    fn default() -> Self {
        Self { drop_incoming: 0.0, drop_outgoing: 0.0, seed: 0 }
    }
}

#[derive(Debug, Default)]
struct Counters {
    received: AtomicU64,
    dropped: AtomicU64,
    replied: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceStats {
    pub received: u64,
    pub dropped: u64,
    pub replied: u64,
}

/// UDP device emulator on a background thread.
#[derive(Debug)]
pub struct DeviceServer {
    addr: SocketAddr,
    state: Arc<Mutex<DeviceState>>,
    counters: Arc<Counters>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl DeviceServer {
    pub fn spawn(bind: impl ToSocketAddrs, initial: DeviceState, impairment: LinkImpairment) -> io::Result<Self> {
        let socket = UdpSocket::bind(bind)?;
        socket.set_read_timeout(Some(POLL_INTERVAL))?;
        let addr = socket.local_addr()?;
        let state = Arc::new(Mutex::new(initial));
        let counters = Arc::new(Counters::default());
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let (state, counters, stop) = (state.clone(), counters.clone(), stop.clone());
            std::thread::Builder::new()
                .name("rdars-device".into())
                .spawn(move || serve(socket, state, counters, stop, impairment))?
        };
        Ok(Self { addr, state, counters, stop, thread: Some(thread) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> DeviceState {
        self.state.lock().expect("device state lock").clone()
    }

    pub fn current(&self) -> RdarsConfiguration {
        self.state.lock().expect("device state lock").current()
    }

    pub fn stats(&self) -> DeviceStats {
        DeviceStats {
            received: self.counters.received.load(Ordering::Relaxed),
            dropped: self.counters.dropped.load(Ordering::Relaxed),
            replied: self.counters.replied.load(Ordering::Relaxed),
        }
    }

    /// Block until the serving thread exits (it only does so on I/O error).
    pub fn wait(mut self) -> io::Result<()> {
        self.join()
    }

    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop.store(true, Ordering::Relaxed);
        self.join()
    }

    fn join(&mut self) -> io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("device thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for DeviceServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        let _ = self.join();
    }
}

fn serve(
    socket: UdpSocket,
    state: Arc<Mutex<DeviceState>>,
    counters: Arc<Counters>,
    stop: Arc<AtomicBool>,
    impairment: LinkImpairment,
) -> io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(impairment.seed);
    let mut buf = [0u8; MAX_FRAME_LEN * 4];
    while !stop.load(Ordering::Relaxed) {
        let (n, peer) = match socket.recv_from(&mut buf) {
            Ok(v) => v,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => continue,
            Err(e) => return Err(e),
        };
        counters.received.fetch_add(1, Ordering::Relaxed);
        if rng.random::<f64>() < impairment.drop_incoming {
            counters.dropped.fetch_add(1, Ordering::Relaxed);
            continue;
        }
        let reply = state.lock().expect("device state lock").handle_datagram(&buf[..n]);
        let Some(reply) = reply else { continue };
        if rng.random::<f64>() < impairment.drop_outgoing {
            counters.dropped.fetch_add(1, Ordering::Relaxed);
            continue;
        }
        socket.send_to(&reply, peer)?;
        counters.replied.fetch_add(1, Ordering::Relaxed);
    }
    Ok(())
}
