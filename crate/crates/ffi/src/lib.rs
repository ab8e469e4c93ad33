//! C ABI over `rdars-core`.
//!
//! Every entry point returns an [`RdarsStatus`] and writes results through
//! out-pointers. Surface configurations and device emulators are opaque
//! handles released with their `_free` function. Panics are caught at the
//! boundary and reported as [`RdarsStatus::Panic`].

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use rdars_core::control::{
    decode_mode_mask, decode_phase_payload, encode_mode_mask, encode_phase_payload, send_config, ClientError,
    ControlFrame, DeviceServer, DeviceState, FrameError, LinkImpairment, MsgType,
};
use rdars_core::geometry::wavelength;
use rdars_core::link_rate::{grid_rate_bps, shannon_rate_bps, LinkConfig};
use rdars_core::localization::{estimate_range, Calibration, LocalizationError, RangeInputs};
use rdars_core::rdars::{quantize_phase, ElementMode, PhaseCode, RdarsConfiguration};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdarsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    BadFrame = 4,
    BadCrc = 5,
    GeometryInfeasible = 6,
    Io = 7,
    Timeout = 8,
    Rejected = 9,
    Panic = 10,
}

/// Mode value reported for an element in connected (sensing) mode.
pub const RDARS_MODE_CONNECTED: i32 = -1;

/// Frame message types, matching the wire byte.
pub const RDARS_MSG_PHASE_CONFIG: u8 = 0x01;
pub const RDARS_MSG_MODE_MASK: u8 = 0x02;
pub const RDARS_MSG_ACK: u8 = 0x03;
pub const RDARS_MSG_NACK: u8 = 0x04;

/// Opaque surface configuration.
pub struct RdarsConfig {
    inner: RdarsConfiguration,
}

/// Opaque UDP device emulator running on a background thread.
pub struct RdarsDevice {
    inner: DeviceServer,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RdarsRangeInputs {
    pub p_connected_dbm: f64,
    pub p_bs_direct_dbm: f64,
    /// Angle at the surface between the UE and BS directions, radians.
    pub theta_rad: f64,
    pub d_br_m: f64,
    pub alpha: f64,
    pub calibration_offset_db: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RdarsRangeEstimate {
    pub d_ur_m: f64,
    pub d_ub_m: f64,
    pub roots_found: u32,
    pub ambiguous: bool,
    /// Larger root when `ambiguous`, NaN otherwise.
    pub alternate_d_ur_m: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RdarsFrameInfo {
    pub msg_type: u8,
    pub seq: u16,
    pub payload_len: u32,
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn rdars_status_message(status: RdarsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        RdarsStatus::Ok => c"ok",
        RdarsStatus::NullPointer => c"null pointer argument",
        RdarsStatus::InvalidArgument => c"invalid argument",
        RdarsStatus::BufferTooSmall => c"output buffer too small",
        RdarsStatus::BadFrame => c"malformed frame",
        RdarsStatus::BadCrc => c"frame CRC mismatch",
        RdarsStatus::GeometryInfeasible => c"no feasible range for the given measurements",
        RdarsStatus::Io => c"socket error",
        RdarsStatus::Timeout => c"no reply from device",
        RdarsStatus::Rejected => c"device rejected the frame",
        RdarsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

fn guard(f: impl FnOnce() -> Result<(), RdarsStatus>) -> RdarsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RdarsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => RdarsStatus::Panic,
    }
}

fn out<'a, T>(p: *mut T) -> Result<&'a mut T, RdarsStatus> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(RdarsStatus::NullPointer)
}

fn handle<'a, T>(p: *const T) -> Result<&'a T, RdarsStatus> {
    // SAFETY: non-null handles come from the matching `_new`/`_spawn` call.
    unsafe { p.as_ref() }.ok_or(RdarsStatus::NullPointer)
}

fn bytes<'a>(data: *const u8, len: usize) -> Result<&'a [u8], RdarsStatus> {
    if data.is_null() {
        return if len == 0 { Ok(&[]) } else { Err(RdarsStatus::NullPointer) };
    }
    // SAFETY: caller guarantees `data` points at `len` readable bytes.
    Ok(unsafe { std::slice::from_raw_parts(data, len) })
}

fn write_bytes(src: &[u8], dst: *mut u8, cap: usize, written: *mut usize) -> Result<(), RdarsStatus> {
    let written = out(written)?;
    *written = src.len();
    if dst.is_null() {
        return Err(RdarsStatus::NullPointer);
    }
    if cap < src.len() {
        return Err(RdarsStatus::BufferTooSmall);
    }
    // SAFETY: `dst` has room for `cap >= src.len()` bytes.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

fn frame_status(e: FrameError) -> RdarsStatus {
    match e {
        FrameError::BadCrc { .. } => RdarsStatus::BadCrc,
        _ => RdarsStatus::BadFrame,
    }
}

fn client_status(e: ClientError) -> RdarsStatus {
    match e {
        ClientError::Io(_) | ClientError::Resolve(_) => RdarsStatus::Io,
        ClientError::Timeout { .. } => RdarsStatus::Timeout,
        ClientError::Nack { .. } => RdarsStatus::Rejected,
        ClientError::Codec(_) => RdarsStatus::InvalidArgument,
    }
}

fn invalid<E>(_: E) -> RdarsStatus {
    RdarsStatus::InvalidArgument
}

/// New configuration of `len` elements, all reflecting with code 0.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_new(len: usize, out_config: *mut *mut RdarsConfig) -> RdarsStatus {
    guard(|| {
        let slot = out(out_config)?;
        let inner = RdarsConfiguration::uniform(len, PhaseCode::new(0).map_err(invalid)?).map_err(invalid)?;
        *slot = Box::into_raw(Box::new(RdarsConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from `rdars_config_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_free(config: *mut RdarsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_len(config: *const RdarsConfig, out_len: *mut usize) -> RdarsStatus {
    guard(|| {
        *out(out_len)? = handle(config)?.inner.len();
        Ok(())
    })
}

/// Put element `index` in reflection mode with phase code `code` (0..=3).
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_set_code(config: *mut RdarsConfig, index: usize, code: u8) -> RdarsStatus {
    guard(|| {
        let c = out(config)?;
        let code = PhaseCode::new(code).map_err(invalid)?;
        c.inner.set_mode(index, ElementMode::Reflection(code)).map_err(invalid)
    })
}

/// Put element `index` in connected mode.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_set_connected(config: *mut RdarsConfig, index: usize) -> RdarsStatus {
    guard(|| out(config)?.inner.set_mode(index, ElementMode::Connected).map_err(invalid))
}

/// Phase code of element `index`, or `RDARS_MODE_CONNECTED`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_get_mode(
    config: *const RdarsConfig,
    index: usize,
    out_mode: *mut i32,
) -> RdarsStatus {
    guard(|| {
        let slot = out(out_mode)?;
        let mode = handle(config)?.inner.mode(index).ok_or(RdarsStatus::InvalidArgument)?;
        *slot = mode.code().map_or(RDARS_MODE_CONNECTED, |c| i32::from(c.value()));
        Ok(())
    })
}

/// Encode the configuration's phases as a PHASE_CONFIG frame. `out_len`
/// always receives the required size.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_encode_phase_frame(
    config: *const RdarsConfig,
    seq: u16,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RdarsStatus {
    guard(|| {
        let payload = encode_phase_payload(&handle(config)?.inner).map_err(invalid)?;
        write_bytes(&ControlFrame::phase_config(seq, payload).encode(), buf, cap, out_len)
    })
}

/// Encode the configuration's connected set as a MODE_MASK frame.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_encode_mask_frame(
    config: *const RdarsConfig,
    seq: u16,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RdarsStatus {
    guard(|| {
        let mask = encode_mode_mask(&handle(config)?.inner.connected_set()).map_err(invalid)?;
        write_bytes(&ControlFrame::mode_mask(seq, mask).encode(), buf, cap, out_len)
    })
}

/// Rebuild a configuration from a PHASE_CONFIG frame and an optional
/// MODE_MASK frame (pass null/0 for none).
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_config_from_frames(
    phase_frame: *const u8,
    phase_len: usize,
    mask_frame: *const u8,
    mask_len: usize,
    out_config: *mut *mut RdarsConfig,
) -> RdarsStatus {
    guard(|| {
        let slot = out(out_config)?;
        let phase = ControlFrame::decode(bytes(phase_frame, phase_len)?).map_err(frame_status)?;
        if phase.msg_type != MsgType::PhaseConfig {
            return Err(RdarsStatus::InvalidArgument);
        }
        let mask = if mask_len == 0 {
            Default::default()
        } else {
            let f = ControlFrame::decode(bytes(mask_frame, mask_len)?).map_err(frame_status)?;
            if f.msg_type != MsgType::ModeMask {
                return Err(RdarsStatus::InvalidArgument);
            }
            decode_mode_mask(&f.payload).map_err(invalid)?
        };
        let inner = decode_phase_payload(&phase.payload, &mask).map_err(invalid)?;
        *slot = Box::into_raw(Box::new(RdarsConfig { inner }));
        Ok(())
    })
}

/// Encode an ACK or NACK frame.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_frame_encode_reply(
    nack: bool,
    seq: u16,
    status: u8,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RdarsStatus {
    guard(|| {
        let f = if nack { ControlFrame::nack(seq, status) } else { ControlFrame::ack(seq, status) };
        write_bytes(&f.encode(), buf, cap, out_len)
    })
}

/// Validate a frame and report its header fields.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_frame_decode(data: *const u8, len: usize, out_info: *mut RdarsFrameInfo) -> RdarsStatus {
    guard(|| {
        let slot = out(out_info)?;
        let f = ControlFrame::decode(bytes(data, len)?).map_err(frame_status)?;
        *slot = RdarsFrameInfo { msg_type: f.msg_type as u8, seq: f.seq, payload_len: f.payload.len() as u32 };
        Ok(())
    })
}

/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_estimate_range(
    inputs: *const RdarsRangeInputs,
    out_estimate: *mut RdarsRangeEstimate,
) -> RdarsStatus {
    guard(|| {
        let slot = out(out_estimate)?;
        let i = handle(inputs)?;
        let cal = Calibration::new(i.calibration_offset_db).map_err(invalid)?;
        let est = estimate_range(
            &RangeInputs {
                p_connected_dbm: i.p_connected_dbm,
                p_bs_direct_dbm: i.p_bs_direct_dbm,
                theta: i.theta_rad,
                d_br: i.d_br_m,
                alpha: i.alpha,
            },
            &cal,
        )
        .map_err(|e| match e {
            LocalizationError::GeometryInfeasible(_) => RdarsStatus::GeometryInfeasible,
            _ => RdarsStatus::InvalidArgument,
        })?;
        *slot = RdarsRangeEstimate {
            d_ur_m: est.d_ur,
            d_ub_m: est.d_ub,
            roots_found: est.roots_found as u32,
            ambiguous: est.ambiguous,
            alternate_d_ur_m: est.alternate_d_ur.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Resource-grid throughput of the default 20 MHz, 64-QAM uplink, bit/s.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_grid_rate_bps(out_rate: *mut f64) -> RdarsStatus {
    guard(|| {
        *out(out_rate)? = grid_rate_bps(&LinkConfig::default()).map_err(invalid)?;
        Ok(())
    })
}

/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_shannon_rate_bps(snr_db: f64, bandwidth_hz: f64, out_rate: *mut f64) -> RdarsStatus {
    guard(|| {
        *out(out_rate)? = shannon_rate_bps(snr_db, bandwidth_hz).map_err(invalid)?;
        Ok(())
    })
}

/// Nearest 2-bit phase code to `phase_rad`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_quantize_phase(phase_rad: f64, out_code: *mut u8) -> RdarsStatus {
    guard(|| {
        *out(out_code)? = quantize_phase(phase_rad).map_err(invalid)?.value();
        Ok(())
    })
}

/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_wavelength(carrier_hz: f64, out_m: *mut f64) -> RdarsStatus {
    guard(|| {
        *out(out_m)? = wavelength(carrier_hz).map_err(invalid)?;
        Ok(())
    })
}

/// Start a device emulator bound to `bind` (e.g. `"127.0.0.1:0"`).
///
/// # Safety
/// `bind` must be null or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rdars_device_spawn(bind: *const c_char, out_device: *mut *mut RdarsDevice) -> RdarsStatus {
    guard(|| {
        let slot = out(out_device)?;
        let bind = handle(bind)?;
        // SAFETY: non-null and NUL-terminated per the contract above.
        let bind = unsafe { CStr::from_ptr(bind) }.to_str().map_err(invalid)?;
        let inner = DeviceServer::spawn(bind, DeviceState::default(), LinkImpairment::default())
            .map_err(|_| RdarsStatus::Io)?;
        *slot = Box::into_raw(Box::new(RdarsDevice { inner }));
        Ok(())
    })
}

/// Port the emulator is listening on.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_device_port(device: *const RdarsDevice, out_port: *mut u16) -> RdarsStatus {
    guard(|| {
        *out(out_port)? = handle(device)?.inner.local_addr().port();
        Ok(())
    })
}

/// Copy of the configuration the emulator currently holds.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes described.
#[no_mangle]
pub unsafe extern "C" fn rdars_device_current(
    device: *const RdarsDevice,
    out_config: *mut *mut RdarsConfig,
) -> RdarsStatus {
    guard(|| {
        let slot = out(out_config)?;
        let inner = handle(device)?.inner.current();
        *slot = Box::into_raw(Box::new(RdarsConfig { inner }));
        Ok(())
    })
}

/// Stop the emulator and release the handle.
///
/// # Safety
/// `device` must be null or a handle from `rdars_device_spawn` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rdars_device_free(device: *mut RdarsDevice) {
    if !device.is_null() {
        let d = Box::from_raw(device);
        let _ = catch_unwind(AssertUnwindSafe(|| d.inner.shutdown()));
    }
}

/// Send a configuration's phases to a device and wait for the ACK.
///
/// # Safety
/// `endpoint` must be null or a valid NUL-terminated `host:port` string.
#[no_mangle]
pub unsafe extern "C" fn rdars_send_config(
    endpoint: *const c_char,
    config: *const RdarsConfig,
    seq: u16,
    timeout_ms: u32,
    retries: u32,
) -> RdarsStatus {
    guard(|| {
        let endpoint = handle(endpoint)?;
        // SAFETY: non-null and NUL-terminated per the contract above.
        let endpoint = unsafe { CStr::from_ptr(endpoint) }.to_str().map_err(invalid)?;
        send_config(endpoint, &handle(config)?.inner, seq, Duration::from_millis(timeout_ms.into()), retries)
            .map(|_| ())
            .map_err(client_status)
    })
}
