#ifndef DERMACEN_H
#define DERMACEN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_ARGUMENT = 1,
  DM_STATUS_INVALID_UTF8 = 2,
  DM_STATUS_INVALID_IMAGE = 3,
  DM_STATUS_NO_LESION = 4,
  DM_STATUS_SEGMENTATION = 5,
  DM_STATUS_FEATURES = 6,
  DM_STATUS_EVALUATION = 7,
  DM_STATUS_IO = 8,
  DM_STATUS_PANIC = 9,
} DmStatus;

/**
 * Segmentation, features and technical report for one image.
 */
typedef struct DmAssessment DmAssessment;

/**
 * A decoded RGB image.
 */
typedef struct DmImage DmImage;

typedef struct DmFeatures {
  double area;
  double perimeter;
  double circularity;
  double asymmetry_major;
  double asymmetry_minor;
  double asymmetry_avg;
  double color_std[3];
} DmFeatures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread.
 */
const char *dm_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void dm_string_free(char *s);

/**
 * Decodes PNG or JPEG bytes.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` must be writable.
 */
enum DmStatus dm_image_decode(const uint8_t *bytes, size_t len, struct DmImage **out);

/**
 * # Safety
 * `image` must be NULL or a live handle; `width` and `height` writable.
 */
enum DmStatus dm_image_size(const struct DmImage *image, size_t *width, size_t *height);

/**
 * # Safety
 * `image` must be NULL or a handle not yet freed.
 */
void dm_image_free(struct DmImage *image);

/**
 * Otsu threshold of the image's luma.
 *
 * # Safety
 * `image` must be a live handle; `threshold` writable.
 */
enum DmStatus dm_otsu_threshold(const struct DmImage *image, uint8_t *threshold);

/**
 * Segments the lesion with default GrabCut parameters and measures it.
 *
 * # Safety
 * `image` must be a live handle; `out` writable.
 */
enum DmStatus dm_assess(const struct DmImage *image, struct DmAssessment **out);

/**
 * # Safety
 * `assessment` must be a live handle; `out` writable.
 */
enum DmStatus dm_assessment_features(const struct DmAssessment *assessment, struct DmFeatures *out);

/**
 * The technical report text. Free with `dm_string_free`.
 *
 * # Safety
 * `assessment` must be a live handle; `out` writable.
 */
enum DmStatus dm_assessment_report(const struct DmAssessment *assessment, char **out);

/**
 * # Safety
 * `assessment` must be NULL or a handle not yet freed.
 */
void dm_assessment_free(struct DmAssessment *assessment);

/**
 * Recovers features from technical report text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` writable.
 */
enum DmStatus dm_parse_report(const char *text, struct DmFeatures *out);

/**
 * Scores a corpus against mock fixtures and writes the outcome as JSON.
 * `fixtures` may be NULL to use `<corpus>/mock`. Free with
 * `dm_string_free`.
 *
 * # Safety
 * String arguments must be NUL-terminated or NULL where allowed;
 * `out_json` writable.
 */
enum DmStatus dm_evaluate(const char *corpus,
                          const char *reviews,
                          const char *fixtures,
                          char **out_json);

/**
 * Library version, static storage.
 */
const char *dm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DERMACEN_H */
