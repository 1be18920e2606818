#ifndef FIRSTIFY_H
#define FIRSTIFY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum FfStatus {
  FfStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  FfStatus_NullArgument = 1,
  /**
   * An input string was not valid UTF-8.
   */
  FfStatus_InvalidUtf8 = 2,
  FfStatus_Syntax = 3,
  FfStatus_Type = 4,
  /**
   * The program falls outside the supported fragment.
   */
  FfStatus_Fragment = 5,
  /**
   * The goal is unusable: open predicate variables or unknown predicates.
   */
  FfStatus_Goal = 6,
  /**
   * Evaluation failed (floundering, stratification, unsafe clauses, ...).
   */
  FfStatus_Eval = 7,
  /**
   * A depth or step limit was exhausted.
   */
  FfStatus_Exhausted = 8,
  FfStatus_Internal = 9,
} FfStatus;

/**
 * An opaque parsed program, optionally carrying the goal produced by a
 * transformation.
 */
typedef struct FfProgram FfProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the underlying compiler, as a static string.
 */
const char *ff_version(void);

/**
 * Message for the most recent error on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *ff_last_error(void);

/**
 * Parses a program. On success stores a fresh handle in `out`.
 *
 * # Safety
 * `src` must be NUL-terminated; `out` must be a valid pointer.
 */
enum FfStatus ff_program_parse(const char *src, struct FfProgram **out);

/**
 * Releases a handle returned by this library. Null is ignored.
 *
 * # Safety
 * `p` must have come from this library and not have been freed before.
 */
void ff_program_free(struct FfProgram *p);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must have come from this library and not have been freed before.
 */
void ff_string_free(char *s);

/**
 * Number of clauses in the program, facts included.
 *
 * # Safety
 * `p` must be a live handle.
 */
uintptr_t ff_program_clause_count(const struct FfProgram *p);

/**
 * Checks membership in the supported fragment.
 *
 * # Safety
 * `p` must be a live handle.
 */
enum FfStatus ff_program_check(const struct FfProgram *p);

/**
 * Specializes the program for `query`. The new handle carries the renamed
 * goal, retrievable with `ff_program_goal`.
 *
 * # Safety
 * `p` must be a live handle; `query` NUL-terminated; `out` valid.
 */
enum FfStatus ff_program_firstify(const struct FfProgram *p,
                                  const char *query,
                                  struct FfProgram **out);

/**
 * Defunctionalizes the program for `query` with the Reynolds encoding.
 *
 * # Safety
 * Same contract as `ff_program_firstify`.
 */
enum FfStatus ff_program_defunctionalize(const struct FfProgram *p,
                                         const char *query,
                                         struct FfProgram **out);

/**
 * The goal attached to a transformed handle, rendered as text; the empty
 * string when the handle has none. Free with `ff_string_free`.
 *
 * # Safety
 * `p` must be a live handle; `out` valid.
 */
enum FfStatus ff_program_goal(const struct FfProgram *p, char **out);

/**
 * Renders the program: Prolog when it is first-order, source syntax
 * otherwise. `driver` adds a main/0 entry point when a goal is attached.
 * Free the result with `ff_string_free`.
 *
 * # Safety
 * `p` must be a live handle; `out` valid.
 */
enum FfStatus ff_program_render(const struct FfProgram *p, bool driver, char **out);

/**
 * Solves `query` (or the attached goal when `query` is null) and returns
 * the answers, one per line, as the CLI prints them. Free the result with
 * `ff_string_free`.
 *
 * # Safety
 * `p` must be a live handle; `query` NUL-terminated or null; `out` valid.
 */
enum FfStatus ff_program_solve(const struct FfProgram *p,
                               const char *query,
                               uintptr_t max_depth,
                               uint64_t max_steps,
                               char **out);

/**
 * Compares the answers of two handles on their shared query, writing the
 * verdict record (`result=... steps_lhs=... steps_rhs=...`) to `out`.
 * `query` applies to the left handle; the right handle must carry its own
 * goal from a transformation. Free the result with `ff_string_free`.
 *
 * # Safety
 * Both handles must be live; `query` NUL-terminated; `out` valid.
 */
enum FfStatus ff_equivalence(const struct FfProgram *lhs,
                             const char *query,
                             const struct FfProgram *rhs,
                             uintptr_t max_depth,
                             uint64_t max_steps,
                             char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FIRSTIFY_H */
