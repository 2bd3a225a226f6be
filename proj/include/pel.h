#ifndef PEL_H
#define PEL_H

/*
 * C interface to the coupled velocity / equivariant director simulator.
 *
 * Every entry point returns a pel_status; zero means success. On failure a
 * human-readable description is available from pel_last_error() until the
 * next call on the same thread. Strings handed back through out-parameters
 * are heap-allocated and must be released with pel_string_free().
 */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pel_status {
  PEL_OK = 0,
  PEL_E_CONFIG = 1,           /* bad configuration value or file */
  PEL_E_SHAPE = 2,            /* array length does not match the grid */
  PEL_E_RESOLUTION = 3,       /* grid cannot resolve the requested scale */
  PEL_E_CFL = 4,              /* explicit wave step too large for the grid */
  PEL_E_NAN = 5,              /* non-finite sample appeared during stepping */
  PEL_E_TRACKING_LOST = 6,    /* no orthogonality root in the trust bracket */
  PEL_E_DEGENERATE = 7,       /* modulation denominator too close to zero */
  PEL_E_NOT_READY = 8,        /* insufficient history for a centered value */
  PEL_E_UNSUPPORTED = 9,      /* equivariance index outside the regime */
  PEL_E_IO = 10,              /* file read/write failure */
  PEL_E_INVALID_ARGUMENT = 11,/* bad call at the API boundary */
  PEL_E_INTERNAL = 99         /* unexpected failure */
} pel_status;

/* Parsed, validated run configuration. Opaque. */
typedef struct pel_config pel_config;

/* Schema string the config loader accepts ("pel-run-v1"). */
const char* pel_schema_version(void);

/* Description of the most recent failure on the calling thread. Empty
 * string when the last call succeeded. The pointer stays valid until the
 * next library call on this thread. */
const char* pel_last_error(void);

/* Release a string returned through an out-parameter. NULL is a no-op. */
void pel_string_free(char* s);

/* Parse configuration JSON (// comments allowed). On success *out owns a
 * config that must be released with pel_config_free. */
pel_status pel_config_parse(const char* json_text, pel_config** out);
pel_status pel_config_load(const char* path, pel_config** out);
void pel_config_free(pel_config* cfg);

/* Canonical serialization of a parsed config and its 16-hex-digit hash. */
pel_status pel_config_canonical(const pel_config* cfg, char** json_out);
pel_status pel_config_hash(const pel_config* cfg, char** hash_out);

/* Drive one trajectory into out_dir (series.csv, snapshots, checkpoint,
 * manifest.json). manifest_out, when non-NULL, receives the manifest JSON. */
pel_status pel_run(const pel_config* cfg, const char* out_dir,
                   char** manifest_out);

/* Continue an interrupted run from its checkpoint file; the output
 * directory is the checkpoint's directory. */
pel_status pel_resume(const char* checkpoint_path, char** manifest_out);

/* Run the invariant suite for a config. table_out, when non-NULL, receives
 * the rendered report; *all_passed is set to 1 when every check passed. */
pel_status pel_verify(const pel_config* cfg, char** table_out,
                      int* all_passed);

/* Cartesian parameter sweep with `threads` workers. summary_out, when
 * non-NULL, receives the aggregate summary JSON. */
pel_status pel_sweep(const pel_config* cfg, const char* out_dir, int threads,
                     char** summary_out);

#ifdef __cplusplus
}
#endif

#endif /* PEL_H */
