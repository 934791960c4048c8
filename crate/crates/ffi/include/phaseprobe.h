#ifndef PHASEPROBE_H
#define PHASEPROBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  PP_STATUS_INVALID_UTF8 = 2,
  PP_STATUS_INVALID_INPUT = 3,
  PP_STATUS_IO = 4,
  PP_STATUS_FORMAT = 5,
  PP_STATUS_ANALYSIS = 6,
  /**
   * The output buffer is too small; the required length was written.
   */
  PP_STATUS_BUFFER_TOO_SMALL = 7,
  PP_STATUS_PANIC = 8,
} PpStatus;

/**
 * Parsed EPOS events.
 */
typedef struct PpEvents PpEvents;

/**
 * Parsed range table.
 */
typedef struct PpRangeTable PpRangeTable;

typedef struct PpUTest {
  double u;
  double z;
  double p;
  /**
   * 1 when `p` comes from the exact null distribution.
   */
  uint8_t exact;
} PpUTest;

typedef struct PpRaFit {
  double ra_product;
  double std_error;
  uintptr_t n;
} PpRaFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pp_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length, 0 if none.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
uintptr_t pp_last_error(char *buf, uintptr_t cap);

/**
 * Reads an EPOS file.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum PpStatus pp_events_read_epos(const char *path, struct PpEvents **out);

/**
 * # Safety
 * `events` must be null or a live handle.
 */
uintptr_t pp_events_len(const struct PpEvents *events);

/**
 * # Safety
 * `events` must be null or a handle not yet freed.
 */
void pp_events_free(struct PpEvents *events);

/**
 * Parses RRNG text.
 *
 * # Safety
 * `text` must be a valid C string and `out` a valid pointer.
 */
enum PpStatus pp_ranges_parse(const char *text, struct PpRangeTable **out);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
uintptr_t pp_ranges_len(const struct PpRangeTable *table);

/**
 * # Safety
 * `table` must be null or a handle not yet freed.
 */
void pp_ranges_free(struct PpRangeTable *table);

/**
 * Separations (Å) of same-pulse pairs whose members both carry `tag`,
 * at `scale` Å per detector mm.
 *
 * Writes up to `cap` values into `out` and the total count into `out_len`.
 * Returns `BufferTooSmall` when `cap < *out_len`; call again with a larger
 * buffer (or with `cap = 0` to query the size).
 *
 * # Safety
 * Handles must be live, `tag` a valid C string, `out` valid for `cap`
 * values and `out_len` a valid pointer.
 */
enum PpStatus pp_homopair_separations(const struct PpEvents *events,
                                      const struct PpRangeTable *table,
                                      const char *tag,
                                      double scale,
                                      double *out,
                                      uintptr_t cap,
                                      uintptr_t *out_len);

/**
 * Two-sided Mann-Whitney U test of `a` against `b`.
 *
 * # Safety
 * `a` and `b` must be valid for `na` and `nb` values, `out` a valid pointer.
 */
enum PpStatus pp_mann_whitney(const double *a,
                              uintptr_t na,
                              const double *b,
                              uintptr_t nb,
                              struct PpUTest *out);

/**
 * Least-squares R·A product (MΩ·μm²) from `n` area/resistance pairs.
 *
 * # Safety
 * `areas_um2` and `resistances_mohm` must be valid for `n` values, `out` a
 * valid pointer.
 */
enum PpStatus pp_fit_ra(const double *areas_um2,
                        const double *resistances_mohm,
                        uintptr_t n,
                        struct PpRaFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASEPROBE_H */
