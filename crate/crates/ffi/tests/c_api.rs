//! The exported C functions called through their raw-pointer interface.

use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use rdars_ffi::*;

fn new_config(len: usize) -> *mut RdarsConfig {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rdars_config_new(len, &mut h) }, RdarsStatus::Ok);
    assert!(!h.is_null());
    h
}

fn encode(f: impl Fn(*mut u8, usize, *mut usize) -> RdarsStatus) -> Vec<u8> {
    let mut buf = [0u8; 128];
    let mut len = 0usize;
    assert_eq!(f(buf.as_mut_ptr(), buf.len(), &mut len), RdarsStatus::Ok);
    buf[..len].to_vec()
}

#[test]
fn config_handle_lifecycle_and_frames() {
    let h = new_config(256);
    for n in 0..256 {
        assert_eq!(unsafe { rdars_config_set_code(h, n, (n % 4) as u8) }, RdarsStatus::Ok);
    }
    for n in [0, 15, 240, 255] {
        assert_eq!(unsafe { rdars_config_set_connected(h, n) }, RdarsStatus::Ok);
    }
    let mut mode = 0;
    assert_eq!(unsafe { rdars_config_get_mode(h, 15, &mut mode) }, RdarsStatus::Ok);
    assert_eq!(mode, RDARS_MODE_CONNECTED);
    assert_eq!(unsafe { rdars_config_get_mode(h, 6, &mut mode) }, RdarsStatus::Ok);
    assert_eq!(mode, 2);

    let phase = encode(|b, c, l| unsafe { rdars_config_encode_phase_frame(h, 1, b, c, l) });
    let mask = encode(|b, c, l| unsafe { rdars_config_encode_mask_frame(h, 2, b, c, l) });
    assert_eq!(phase.len(), 74);
    assert_eq!(hex(&mask), "52440102000200200180000000000000000000000000000000000000000000000000000000000180708d");

    let mut back = ptr::null_mut();
    let st = unsafe { rdars_config_from_frames(phase.as_ptr(), phase.len(), mask.as_ptr(), mask.len(), &mut back) };
    assert_eq!(st, RdarsStatus::Ok);
    for n in 0..256 {
        let (mut a, mut b) = (0, 0);
        unsafe {
            rdars_config_get_mode(h, n, &mut a);
            rdars_config_get_mode(back, n, &mut b);
        }
        assert_eq!(a, b, "element {n}");
    }
    unsafe {
        rdars_config_free(back);
        rdars_config_free(h);
        rdars_config_free(ptr::null_mut());
    }
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

#[test]
fn argument_errors_map_to_status_codes() {
    let h = new_config(4);
    assert_eq!(unsafe { rdars_config_set_code(h, 0, 4) }, RdarsStatus::InvalidArgument);
    assert_eq!(unsafe { rdars_config_set_code(h, 4, 0) }, RdarsStatus::InvalidArgument);
    assert_eq!(unsafe { rdars_config_set_code(ptr::null_mut(), 0, 0) }, RdarsStatus::NullPointer);
    let mut len = 0usize;
    assert_eq!(unsafe { rdars_config_len(h, &mut len) }, RdarsStatus::Ok);
    assert_eq!(len, 4);
    // 4 elements cannot fill a 256-element phase payload
    let mut buf = [0u8; 128];
    let st = unsafe { rdars_config_encode_phase_frame(h, 1, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, RdarsStatus::InvalidArgument);
    unsafe { rdars_config_free(h) };

    let full = new_config(256);
    let st = unsafe { rdars_config_encode_phase_frame(full, 1, buf.as_mut_ptr(), 10, &mut len) };
    assert_eq!((st, len), (RdarsStatus::BufferTooSmall, 74));
    unsafe { rdars_config_free(full) };

    let mut empty = ptr::null_mut();
    assert_eq!(unsafe { rdars_config_new(0, &mut empty) }, RdarsStatus::InvalidArgument);
    assert!(empty.is_null());
}

#[test]
fn reply_frames_and_decode() {
    let nack = encode(|b, c, l| unsafe { rdars_frame_encode_reply(true, 0x1234, 2, b, c, l) });
    assert_eq!(hex(&nack), "52440104123400031234027f4c");
    let mut info = RdarsFrameInfo::default();
    assert_eq!(unsafe { rdars_frame_decode(nack.as_ptr(), nack.len(), &mut info) }, RdarsStatus::Ok);
    assert_eq!((info.msg_type, info.seq, info.payload_len), (RDARS_MSG_NACK, 0x1234, 3));

    let mut bad = nack.clone();
    bad[6] ^= 1;
    assert_eq!(unsafe { rdars_frame_decode(bad.as_ptr(), bad.len(), &mut info) }, RdarsStatus::BadCrc);
    assert_eq!(unsafe { rdars_frame_decode(nack.as_ptr(), 5, &mut info) }, RdarsStatus::BadFrame);
    assert_eq!(unsafe { rdars_frame_decode(ptr::null(), 3, &mut info) }, RdarsStatus::NullPointer);
}

#[test]
fn range_estimate_through_the_abi() {
    // d_br = 10, d_ur = 4, θ = 90°, α = 2: power ratio is d_ub²/d_ur² = 116/16
    let inputs = RdarsRangeInputs {
        p_connected_dbm: -10.0 * 16f64.log10(),
        p_bs_direct_dbm: -10.0 * 116f64.log10(),
        theta_rad: std::f64::consts::FRAC_PI_2,
        d_br_m: 10.0,
        alpha: 2.0,
        calibration_offset_db: 0.0,
    };
    let mut est = RdarsRangeEstimate::default();
    assert_eq!(unsafe { rdars_estimate_range(&inputs, &mut est) }, RdarsStatus::Ok);
    assert!((est.d_ur_m - 4.0).abs() < 1e-9);
    assert!((est.d_ub_m - 116f64.sqrt()).abs() < 1e-9);
    assert!(!est.ambiguous && est.alternate_d_ur_m.is_nan());

    let bad = RdarsRangeInputs { d_br_m: -1.0, ..inputs };
    assert_eq!(unsafe { rdars_estimate_range(&bad, &mut est) }, RdarsStatus::InvalidArgument);
}

#[test]
fn scalar_helpers() {
    let mut rate = 0.0;
    assert_eq!(unsafe { rdars_grid_rate_bps(&mut rate) }, RdarsStatus::Ok);
    assert!((rate / 1e6 - 81.8).abs() < 0.05);
    assert_eq!(unsafe { rdars_shannon_rate_bps(0.0, 20e6, &mut rate) }, RdarsStatus::Ok);
    assert!((rate - 20e6).abs() < 1e-6);

    let mut code = 9u8;
    assert_eq!(unsafe { rdars_quantize_phase(std::f64::consts::PI, &mut code) }, RdarsStatus::Ok);
    assert_eq!(code, 2);
    assert_eq!(unsafe { rdars_quantize_phase(f64::NAN, &mut code) }, RdarsStatus::InvalidArgument);

    let mut lambda = 0.0;
    assert_eq!(unsafe { rdars_wavelength(3.7e9, &mut lambda) }, RdarsStatus::Ok);
    assert!((lambda - 299_792_458.0 / 3.7e9).abs() < 1e-15);

    let msg = unsafe { CStr::from_ptr(rdars_status_message(RdarsStatus::BadCrc)) };
    assert_eq!(msg.to_str().unwrap(), "frame CRC mismatch");
}

#[test]
fn device_emulator_round_trip() {
    let bind = CString::new("127.0.0.1:0").unwrap();
    let mut dev = ptr::null_mut();
    assert_eq!(unsafe { rdars_device_spawn(bind.as_ptr(), &mut dev) }, RdarsStatus::Ok);
    let mut port = 0u16;
    assert_eq!(unsafe { rdars_device_port(dev, &mut port) }, RdarsStatus::Ok);

    let h = new_config(256);
    for n in 0..256 {
        unsafe { rdars_config_set_code(h, n, 3) };
    }
    let endpoint = CString::new(format!("127.0.0.1:{port}")).unwrap();
    assert_eq!(unsafe { rdars_send_config(endpoint.as_ptr(), h, 5, 200, 3) }, RdarsStatus::Ok);
    // same seq again is stale
    assert_eq!(unsafe { rdars_send_config(endpoint.as_ptr(), h, 5, 200, 0) }, RdarsStatus::Rejected);

    let mut current = ptr::null_mut();
    assert_eq!(unsafe { rdars_device_current(dev, &mut current) }, RdarsStatus::Ok);
    let mut mode = 0;
    unsafe { rdars_config_get_mode(current, 100, &mut mode) };
    assert_eq!(mode, 3);
    unsafe {
        rdars_config_free(current);
        rdars_config_free(h);
        rdars_device_free(dev);
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rdars.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["rdars_config_new", "rdars_estimate_range", "rdars_device_spawn", "RDARS_STATUS_BAD_CRC"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).status() else {
        eprintln!("no C compiler on PATH; syntax check skipped");
        return;
    };
    assert!(status.success());
}
