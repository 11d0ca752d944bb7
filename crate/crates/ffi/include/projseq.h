/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PROJSEQ_H
#define PROJSEQ_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Embed the POVM into one extra dimension before compiling.
 */
#define PROJSEQ_COMPILE_EMBED 1

/*
 Keep the input element order.
 */
#define PROJSEQ_COMPILE_NO_REORDER 2

/*
 `state` holds a pure state vector (`2 * dim` doubles).
 */
#define PROJSEQ_STATE_PURE 0

/*
 `state` holds a density matrix (`2 * dim * dim` doubles).
 */
#define PROJSEQ_STATE_DENSITY 1

/*
 Result code of every fallible call.
 */
typedef enum ProjseqStatus {
  PROJSEQ_STATUS_OK = 0,
  PROJSEQ_STATUS_NULL_POINTER = 1,
  PROJSEQ_STATUS_INVALID_INPUT = 2,
  PROJSEQ_STATUS_NOT_REALIZABLE = 3,
  PROJSEQ_STATUS_VERIFICATION_FAILED = 4,
  PROJSEQ_STATUS_DIGEST_MISMATCH = 5,
  PROJSEQ_STATUS_NUMERICAL_FAILURE = 6,
  PROJSEQ_STATUS_BUFFER_TOO_SMALL = 7,
  PROJSEQ_STATUS_PANIC = 8,
} ProjseqStatus;

/*
 Opaque POVM handle.
 */
typedef struct ProjseqPovm ProjseqPovm;

/*
 Opaque measurement-tree handle.
 */
typedef struct ProjseqTree ProjseqTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or an empty string. The
 pointer stays valid until the next call into this library on the thread.
 */
const char *projseq_last_error(void);

/*
 Release a string returned by this library. Null is ignored.
 */
void projseq_string_free(char *text);

/*
 Build a POVM from `count` elements of size `dim x dim`, stored one after
 another in `data` (`2 * count * dim * dim` doubles).
 */
enum ProjseqStatus projseq_povm_new(size_t dim,
                                    size_t count,
                                    const double *data,
                                    struct ProjseqPovm **out);

/*
 Parse a POVM from its JSON file format.
 */
enum ProjseqStatus projseq_povm_from_json(const char *json, struct ProjseqPovm **out);

void projseq_povm_free(struct ProjseqPovm *povm);

/*
 Hilbert-space dimension, or 0 for a null handle.
 */
size_t projseq_povm_dim(const struct ProjseqPovm *povm);

/*
 Number of elements, or 0 for a null handle.
 */
size_t projseq_povm_len(const struct ProjseqPovm *povm);

/*
 Decide realizability. Either output pointer may be null.
 */
enum ProjseqStatus projseq_povm_check(const struct ProjseqPovm *povm,
                                      bool *realizable,
                                      size_t *commutant_dimension);

/*
 Compile a POVM. `projector` (`2 * dim * dim` doubles) may be null, in
 which case one is searched for. `flags` combines `PROJSEQ_COMPILE_*`.
 Returns `NotRealizable` when no projector exists and embedding was not
 requested.
 */
enum ProjseqStatus projseq_compile(const struct ProjseqPovm *povm,
                                   const double *projector,
                                   uint32_t flags,
                                   struct ProjseqTree **out);

/*
 Parse a tree from its JSON file format.
 */
enum ProjseqStatus projseq_tree_from_json(const char *json, struct ProjseqTree **out);

/*
 Serialize a tree to JSON; release `*out` with `projseq_string_free`.
 */
enum ProjseqStatus projseq_tree_to_json(const struct ProjseqTree *tree,
                                        bool with_operators,
                                        char **out);

void projseq_tree_free(struct ProjseqTree *tree);

/*
 Dimension the tree acts on, or 0 for a null handle.
 */
size_t projseq_tree_dim(const struct ProjseqTree *tree);

/*
 Number of outcomes, or 0 for a null handle.
 */
size_t projseq_tree_outcome_count(const struct ProjseqTree *tree);

/*
 Measurements on the longest root-to-leaf path, or 0 for a null handle.
 */
size_t projseq_tree_depth(const struct ProjseqTree *tree);

/*
 Exact outcome probabilities. `probabilities` must hold at least
 `projseq_tree_outcome_count` doubles. A state one dimension smaller than
 an embedded tree is zero-padded.
 */
enum ProjseqStatus projseq_tree_exact_distribution(const struct ProjseqTree *tree,
                                                   size_t state_dim,
                                                   uint32_t state_kind,
                                                   const double *state,
                                                   double *probabilities,
                                                   size_t len);

/*
 Outcome counts over `shots` seeded shots. `counts` must hold at least
 `projseq_tree_outcome_count` entries.
 */
enum ProjseqStatus projseq_tree_sample(const struct ProjseqTree *tree,
                                       size_t state_dim,
                                       uint32_t state_kind,
                                       const double *state,
                                       uint64_t shots,
                                       uint64_t seed,
                                       uint64_t *counts,
                                       size_t len);

/*
 Verify a tree against a POVM (or its one-dimension embedding, for trees
 compiled with `PROJSEQ_COMPILE_EMBED`). `tol <= 0` selects the default
 tolerances. Returns `VerificationFailed` when a check is out of tolerance;
 `passed` (may be null) receives the verdict either way.
 */
enum ProjseqStatus projseq_tree_verify(const struct ProjseqTree *tree,
                                       const struct ProjseqPovm *povm,
                                       double tol,
                                       bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROJSEQ_H */
