#ifndef LAMBDAV_H
#define LAMBDAV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every function.
typedef enum LvError {
  LV_ERROR_OK = 0,
  LV_ERROR_NULL_POINTER = 1,
  LV_ERROR_INVALID_UTF8 = 2,
  LV_ERROR_PARSE = 3,
  LV_ERROR_FORMULA = 4,
  LV_ERROR_NOT_FOUND = 5,
  LV_ERROR_INTERNAL = 6,
} LvError;

// A compiled program together with its symbol table.
typedef struct LvProgram LvProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or NULL.
// The pointer stays valid until the next failing call on the same thread.
const char *lv_last_error(void);

// Parses and desugars `source`. `sym_table` may be NULL for the discrete
// table, otherwise it holds lines of the form `a b -> c`.
//
// # Safety
// `source` and `sym_table` must be NULL or valid NUL-terminated strings;
// `out` must be a valid pointer.
enum LvError lv_program_parse(const char *source, const char *sym_table, struct LvProgram **out);

// Releases a program. NULL is ignored.
//
// # Safety
// `p` must be NULL or a handle from [`lv_program_parse`] not yet freed.
void lv_program_free(struct LvProgram *p);

// Change-point observations up to `max_fuel` as JSON lines, each an object
// with fields `fuel` and `result`.
//
// # Safety
// `p` must be a live handle and `out` a valid pointer.
enum LvError lv_observe(const struct LvProgram *p, uint32_t max_fuel, char **out);

// The rendered result of evaluating the program with `fuel`.
//
// # Safety
// `p` must be a live handle and `out` a valid pointer.
enum LvError lv_stream_eval(const struct LvProgram *p, uint32_t fuel, char **out);

// Searches for a derivation of `formula` with formulae of height at most
// `depth`. Returns `Ok` if one was found and `NotFound` otherwise.
//
// # Safety
// `p` must be a live handle and `formula` a valid NUL-terminated string.
enum LvError lv_check(const struct LvProgram *p, const char *formula, uint32_t depth);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must be NULL or a string returned by this library not yet freed.
void lv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAMBDAV_H */
