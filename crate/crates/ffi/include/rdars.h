#ifndef RDARS_H
#define RDARS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Mode value reported for an element in connected (sensing) mode.
 */
#define RDARS_MODE_CONNECTED -1

/**
 * Frame message types, matching the wire byte.
 */
#define RDARS_MSG_PHASE_CONFIG 1

#define RDARS_MSG_MODE_MASK 2

#define RDARS_MSG_ACK 3

#define RDARS_MSG_NACK 4

typedef enum RdarsStatus {
  RDARS_STATUS_OK = 0,
  RDARS_STATUS_NULL_POINTER = 1,
  RDARS_STATUS_INVALID_ARGUMENT = 2,
  RDARS_STATUS_BUFFER_TOO_SMALL = 3,
  RDARS_STATUS_BAD_FRAME = 4,
  RDARS_STATUS_BAD_CRC = 5,
  RDARS_STATUS_GEOMETRY_INFEASIBLE = 6,
  RDARS_STATUS_IO = 7,
  RDARS_STATUS_TIMEOUT = 8,
  RDARS_STATUS_REJECTED = 9,
  RDARS_STATUS_PANIC = 10,
} RdarsStatus;

/**
 * Opaque surface configuration.
 */
typedef struct RdarsConfig RdarsConfig;

/**
 * Opaque UDP device emulator running on a background thread.
 */
typedef struct RdarsDevice RdarsDevice;

typedef struct RdarsFrameInfo {
  uint8_t msg_type;
  uint16_t seq;
  uint32_t payload_len;
} RdarsFrameInfo;

typedef struct RdarsRangeInputs {
  double p_connected_dbm;
  double p_bs_direct_dbm;
  /**
   * Angle at the surface between the UE and BS directions, radians.
   */
  double theta_rad;
  double d_br_m;
  double alpha;
  double calibration_offset_db;
} RdarsRangeInputs;

typedef struct RdarsRangeEstimate {
  double d_ur_m;
  double d_ub_m;
  uint32_t roots_found;
  bool ambiguous;
  /**
   * Larger root when `ambiguous`, NaN otherwise.
   */
  double alternate_d_ur_m;
} RdarsRangeEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated description of a status code.
 */
const char *rdars_status_message(enum RdarsStatus status);

/**
 * New configuration of `len` elements, all reflecting with code 0.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_new(size_t len, struct RdarsConfig **out_config);

/**
 * # Safety
 * `config` must be null or a handle from `rdars_config_new` not yet freed.
 */
void rdars_config_free(struct RdarsConfig *config);

/**
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_len(const struct RdarsConfig *config, size_t *out_len);

/**
 * Put element `index` in reflection mode with phase code `code` (0..=3).
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_set_code(struct RdarsConfig *config, size_t index, uint8_t code);

/**
 * Put element `index` in connected mode.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_set_connected(struct RdarsConfig *config, size_t index);

/**
 * Phase code of element `index`, or `RDARS_MODE_CONNECTED`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_get_mode(const struct RdarsConfig *config,
                                       size_t index,
                                       int32_t *out_mode);

/**
 * Encode the configuration's phases as a PHASE_CONFIG frame. `out_len`
 * always receives the required size.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_encode_phase_frame(const struct RdarsConfig *config,
                                                 uint16_t seq,
                                                 uint8_t *buf,
                                                 size_t cap,
                                                 size_t *out_len);

/**
 * Encode the configuration's connected set as a MODE_MASK frame.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_encode_mask_frame(const struct RdarsConfig *config,
                                                uint16_t seq,
                                                uint8_t *buf,
                                                size_t cap,
                                                size_t *out_len);

/**
 * Rebuild a configuration from a PHASE_CONFIG frame and an optional
 * MODE_MASK frame (pass null/0 for none).
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_config_from_frames(const uint8_t *phase_frame,
                                          size_t phase_len,
                                          const uint8_t *mask_frame,
                                          size_t mask_len,
                                          struct RdarsConfig **out_config);

/**
 * Encode an ACK or NACK frame.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_frame_encode_reply(bool nack,
                                          uint16_t seq,
                                          uint8_t status,
                                          uint8_t *buf,
                                          size_t cap,
                                          size_t *out_len);

/**
 * Validate a frame and report its header fields.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_frame_decode(const uint8_t *data,
                                    size_t len,
                                    struct RdarsFrameInfo *out_info);

/**
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_estimate_range(const struct RdarsRangeInputs *inputs,
                                      struct RdarsRangeEstimate *out_estimate);

/**
 * Resource-grid throughput of the default 20 MHz, 64-QAM uplink, bit/s.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_grid_rate_bps(double *out_rate);

/**
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_shannon_rate_bps(double snr_db, double bandwidth_hz, double *out_rate);

/**
 * Nearest 2-bit phase code to `phase_rad`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_quantize_phase(double phase_rad, uint8_t *out_code);

/**
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_wavelength(double carrier_hz, double *out_m);

/**
 * Start a device emulator bound to `bind` (e.g. `"127.0.0.1:0"`).
 *
 * # Safety
 * `bind` must be null or a valid NUL-terminated string.
 */
enum RdarsStatus rdars_device_spawn(const char *bind, struct RdarsDevice **out_device);

/**
 * Port the emulator is listening on.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_device_port(const struct RdarsDevice *device, uint16_t *out_port);

/**
 * Copy of the configuration the emulator currently holds.
 *
 * # Safety
 * Pointer arguments must be null or valid for the reads and writes described.
 */
enum RdarsStatus rdars_device_current(const struct RdarsDevice *device,
                                      struct RdarsConfig **out_config);

/**
 * Stop the emulator and release the handle.
 *
 * # Safety
 * `device` must be null or a handle from `rdars_device_spawn` not yet freed.
 */
void rdars_device_free(struct RdarsDevice *device);

/**
 * Send a configuration's phases to a device and wait for the ACK.
 *
 * # Safety
 * `endpoint` must be null or a valid NUL-terminated `host:port` string.
 */
enum RdarsStatus rdars_send_config(const char *endpoint,
                                   const struct RdarsConfig *config,
                                   uint16_t seq,
                                   uint32_t timeout_ms,
                                   uint32_t retries);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDARS_H */
