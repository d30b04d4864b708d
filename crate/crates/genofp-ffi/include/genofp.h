#ifndef GENOFP_H
#define GENOFP_H

/* Generated by cbindgen from genofp-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum genofp_status_t {
  GENOFP_STATUS_T_OK = 0,
  GENOFP_STATUS_T_NULL_ARGUMENT = 1,
  GENOFP_STATUS_T_INVALID_ARGUMENT = 2,
  GENOFP_STATUS_T_DATA_ERROR = 3,
  GENOFP_STATUS_T_UTF8_ERROR = 4,
} genofp_status_t;

/**
 * Opaque SNP database handle.
 */
typedef struct genofp_database_t genofp_database_t;

/**
 * Opaque dataset handle: a database plus pedigree, public models and mask
 * state needed by mitigation.
 */
typedef struct genofp_dataset_t genofp_dataset_t;

/**
 * Opaque fingerprint mask handle.
 */
typedef struct genofp_mask_t genofp_mask_t;

/**
 * Synthetic dataset generation parameters.
 */
typedef struct genofp_generator_config_t {
  uintptr_t n_families;
  uintptr_t total_rows;
  uintptr_t n_loci;
  double maf_low;
  double maf_high;
  double ld_rho;
  double mutation_rate;
  uint64_t seed;
} genofp_generator_config_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a caller-owned string.
 */
char *genofp_version(void);

/**
 * Last error message for this thread, or NULL when none was recorded.
 */
char *genofp_last_error(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned by this library, or NULL.
 */
void genofp_string_free(char *s);

/**
 * Loads a database CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum genofp_status_t genofp_db_load(const char *path, struct genofp_database_t **out);

/**
 * Saves a database as CSV.
 *
 * # Safety
 * `db` must be a live handle from this library; `path` NUL-terminated.
 */
enum genofp_status_t genofp_db_save(const struct genofp_database_t *db, const char *path);

/**
 * Row count of a database handle (0 for NULL).
 *
 * # Safety
 * `db` must be a live handle or NULL.
 */
uintptr_t genofp_db_rows(const struct genofp_database_t *db);

/**
 * Locus count of a database handle (0 for NULL).
 *
 * # Safety
 * `db` must be a live handle or NULL.
 */
uintptr_t genofp_db_loci(const struct genofp_database_t *db);

/**
 * Frees a database handle.
 *
 * # Safety
 * `db` must be a handle from this library, or NULL; not used afterwards.
 */
void genofp_db_free(struct genofp_database_t *db);

/**
 * Frees a mask handle.
 *
 * # Safety
 * `mask` must be a handle from this library, or NULL; not used afterwards.
 */
void genofp_mask_free(struct genofp_mask_t *mask);

/**
 * Frees a dataset handle.
 *
 * # Safety
 * `ds` must be a handle from this library, or NULL; not used afterwards.
 */
void genofp_dataset_free(struct genofp_dataset_t *ds);

/**
 * Generates a synthetic dataset (database, pedigree and public models).
 *
 * # Safety
 * `config` and `out` must be valid pointers.
 */
enum genofp_status_t genofp_generate(const struct genofp_generator_config_t *config,
                                     struct genofp_dataset_t **out);

/**
 * Borrows the dataset's database as a fresh caller-owned handle.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum genofp_status_t genofp_dataset_database(const struct genofp_dataset_t *ds,
                                             struct genofp_database_t **out);

/**
 * Embeds the fingerprint for `sp_id` and returns the marked copy, the mask
 * and the fingerprint hex (caller-owned, may be NULL if not wanted).
 *
 * # Safety
 * All handle and out pointers must be valid; `key` NUL-terminated.
 */
enum genofp_status_t genofp_insert(const struct genofp_database_t *db,
                                   const char *key,
                                   uint64_t sp_id,
                                   double gamma_r,
                                   double gamma_l,
                                   struct genofp_database_t **out_db,
                                   struct genofp_mask_t **out_mask,
                                   char **out_fingerprint_hex);

/**
 * Extracts the fingerprint pattern ('0'/'1'/'?' per position) as a
 * caller-owned string.
 *
 * # Safety
 * `db` must be a live handle; `key` NUL-terminated; `out` valid.
 */
enum genofp_status_t genofp_extract_pattern(const struct genofp_database_t *db,
                                            const char *key,
                                            double gamma_r,
                                            double gamma_l,
                                            double tau,
                                            char **out);

/**
 * Fraction of compromised fingerprint bits for a known key and SP.
 *
 * # Safety
 * `db` must be a live handle; `key` NUL-terminated; `out` valid.
 */
enum genofp_status_t genofp_per_cmp(const struct genofp_database_t *db,
                                    const char *key,
                                    uint64_t sp_id,
                                    double gamma_r,
                                    double gamma_l,
                                    double tau,
                                    double *out);

/**
 * Cell-level agreement between two equally shaped databases.
 *
 * # Safety
 * Both handles must be live; `out` valid.
 */
enum genofp_status_t genofp_accuracy(const struct genofp_database_t *original,
                                     const struct genofp_database_t *other,
                                     double *out);

/**
 * Applies both mitigations to a fingerprinted copy belonging to `ds`,
 * honouring the mask, and returns the repaired database.
 *
 * # Safety
 * All handles must be live and `out` a valid pointer.
 */
enum genofp_status_t genofp_mitigate(const struct genofp_dataset_t *ds,
                                     const struct genofp_database_t *fingerprinted,
                                     const struct genofp_mask_t *mask,
                                     double lambda,
                                     uint64_t transport_seed,
                                     struct genofp_database_t **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GENOFP_H */
