#ifndef FRAMELOOM_H_
#define FRAMELOOM_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(FL_BUILDING)
#define FL_API __attribute__((visibility("default")))
#else
#define FL_API
#endif

typedef enum fl_status {
  FL_OK = 0,
  FL_INVALID_ARGUMENT = 1,
  FL_SYNTAX = 2,
  FL_SCHEMA = 3,
  FL_NOT_FOUND = 4,
  FL_DUPLICATE = 5,
  FL_DOMAIN_VIOLATION = 6,
  FL_NO_OVERLAP = 7,
  FL_UNRESOLVED = 8,
  FL_NOT_A_DISAGREEMENT = 9,
  FL_SPURIOUS_RESOLUTION = 10,
  FL_UNAUTHORIZED = 11,
  FL_PROJECT_NOT_INITIALIZED = 12,
  FL_EMPTY_INPUT = 13,
  FL_DECODER_NOT_FOUND = 20,
  FL_DECODE = 21,
  FL_EMPTY_VIDEO = 22,
  FL_MISSING_CREDENTIALS = 23,
  FL_HTTP = 24,
  FL_TIMEOUT = 25,
  FL_RATE_LIMITED = 26,
  FL_CACHE_MISS = 27,
  FL_IO = 28,
  FL_BIND = 29,
  FL_INTEGRITY = 30,
  FL_INTERNAL = 99
} fl_status;

typedef enum fl_log_level {
  FL_LOG_QUIET = 0,
  FL_LOG_WARN = 1,
  FL_LOG_INFO = 2
} fl_log_level;

typedef struct fl_codebook fl_codebook;
typedef struct fl_project fl_project;
typedef struct fl_server fl_server;

FL_API const char* fl_version(void);
FL_API const char* fl_status_name(fl_status status);

/* 0 for FL_OK, 2 for environment failures, 1 otherwise. */
FL_API int fl_status_exit_code(fl_status status);

/* Message of the last failed call on this thread; "" when none. */
FL_API const char* fl_last_error(void);

/* Releases strings returned through char** out parameters. */
FL_API void fl_free(char* p);

FL_API void fl_set_log_level(fl_log_level level);

/* Codebooks */

FL_API fl_status fl_codebook_load(const char* path, fl_codebook** out);
FL_API fl_status fl_codebook_parse(const char* text, size_t len, fl_codebook** out);
FL_API void fl_codebook_free(fl_codebook* cb);
FL_API size_t fl_codebook_size(const fl_codebook* cb);

/* [{code_id, type, name, annotation, explanation}, ...]; code_id NULL
   selects every code. */
FL_API fl_status fl_codebook_prompts_json(const fl_codebook* cb, const char* code_id,
                                          char** out_json);

/* Projects */

/* coders: "id" or "id:token" entries. *created is 0 when dir already held a
   project. */
FL_API fl_status fl_project_init(const char* dir, const char* codebook_path,
                                 const char* const* coders, size_t n_coders, int* created);
FL_API fl_status fl_project_open(const char* dir, fl_project** out);
FL_API void fl_project_close(fl_project* project);

/* Options are JSON objects (NULL or "" for defaults); results are JSON.
   extract:  {videos:[path], mode:"iframes"|"interval", interval_seconds,
              max_frames, decoder, jobs, force}
   annotate: {backend:"live"|"replay"|"mock", max_inflight, timeout_seconds,
              codes:[id], units:[id], videos:[id], explanations, mock_script} */
FL_API fl_status fl_project_extract(fl_project* project, const char* options_json,
                                    char** out_json);
FL_API fl_status fl_project_annotate(fl_project* project, const char* options_json,
                                     char** out_json);
FL_API fl_status fl_project_evaluate(fl_project* project, int against_ground_truth,
                                     char** out_json);
FL_API fl_status fl_project_export_csv(fl_project* project, char** out_csv);

/* Coding server. port 0 picks a free port. The project must outlive the
   server. */
FL_API fl_status fl_server_start(fl_project* project, const char* host, int port,
                                 fl_server** out);
FL_API int fl_server_port(const fl_server* server);
FL_API void fl_server_stop(fl_server* server);

#ifdef __cplusplus
}
#endif

#endif  // FRAMELOOM_H_
