#ifndef BYZREG_H
#define BYZREG_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ByzregStatus {
  BYZREG_STATUS_OK = 0,
  BYZREG_STATUS_NULL_POINTER = 1,
  BYZREG_STATUS_INVALID_UTF8 = 2,
  BYZREG_STATUS_PARSE_ERROR = 3,
  BYZREG_STATUS_INVALID_SCENARIO = 4,
  BYZREG_STATUS_SIMULATION_ERROR = 5,
  BYZREG_STATUS_PANIC = 6,
} ByzregStatus;

// Opaque handle to one checked run.
typedef struct ByzregResult ByzregResult;

// Opaque scenario handle.
typedef struct ByzregScenario ByzregScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a scenario from TOML text.
//
// # Safety
// `toml` must be a valid NUL-terminated string and `out` a valid pointer.
enum ByzregStatus byzreg_scenario_from_toml(const char *toml, struct ByzregScenario **out);

// Loads a bundled scenario by name.
//
// # Safety
// `name` must be a valid NUL-terminated string and `out` a valid pointer.
enum ByzregStatus byzreg_scenario_bundled(const char *name, struct ByzregScenario **out);

// Reports the scenario's seed range `[start, end)`.
//
// # Safety
// All pointers must be valid; `scenario` must come from this library.
enum ByzregStatus byzreg_scenario_seeds(const struct ByzregScenario *scenario,
                                        uint64_t *start,
                                        uint64_t *end);

// Releases a scenario. Null is ignored.
//
// # Safety
// `scenario` must be null or come from this library and not be used again.
void byzreg_scenario_free(struct ByzregScenario *scenario);

// Simulates `seed` and checks the trace.
//
// # Safety
// `scenario` must come from this library and `out` must be valid.
enum ByzregStatus byzreg_run(const struct ByzregScenario *scenario,
                             uint64_t seed,
                             struct ByzregResult **out);

// Whether every verdict of the run passed.
//
// # Safety
// `result` must come from this library and `passed` must be valid.
enum ByzregStatus byzreg_result_passed(const struct ByzregResult *result, bool *passed);

// Number of delivery steps the run took.
//
// # Safety
// `result` must come from this library and `steps` must be valid.
enum ByzregStatus byzreg_result_steps(const struct ByzregResult *result, uint64_t *steps);

// Hex SHA-256 of the serialized trace.
//
// # Safety
// `result` must come from this library and `out` must be valid.
enum ByzregStatus byzreg_result_trace_hash(const struct ByzregResult *result, char **out);

// The trace as JSON lines.
//
// # Safety
// `result` must come from this library and `out` must be valid.
enum ByzregStatus byzreg_result_trace_jsonl(const struct ByzregResult *result, char **out);

// The checker report as JSON.
//
// # Safety
// `result` must come from this library and `out` must be valid.
enum ByzregStatus byzreg_result_report_json(const struct ByzregResult *result, char **out);

// Releases a result. Null is ignored.
//
// # Safety
// `result` must be null or come from this library and not be used again.
void byzreg_result_free(struct ByzregResult *result);

// Checks a recorded JSON-lines trace. Writes the report JSON to `report`
// and whether every verdict passed to `passed`.
//
// # Safety
// `jsonl` must be a valid NUL-terminated string; other pointers valid.
enum ByzregStatus byzreg_check_trace(const char *jsonl, char **report, bool *passed);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or come from this library and not be used again.
void byzreg_string_free(char *s);

// Message of the last error on this thread, or null. The pointer stays
// valid until the next call into the library on the same thread.
const char *byzreg_last_error_message(void);

// Library version, statically allocated.
const char *byzreg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BYZREG_H */
