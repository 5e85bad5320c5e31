#ifndef GRAPHDIFF_H
#define GRAPHDIFF_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum GdStatus {
  GD_STATUS_OK = 0,
  GD_STATUS_NULL_POINTER = 1,
  GD_STATUS_INVALID_UTF8 = 2,
  GD_STATUS_INVALID_GRAPH = 3,
  GD_STATUS_INVALID_ARGUMENT = 4,
  GD_STATUS_INVALID_KERNEL = 5,
  GD_STATUS_INVALID_SCENARIO = 6,
  GD_STATUS_IO = 7,
  GD_STATUS_SOLVER = 8,
  GD_STATUS_CHECKS_FAILED = 9,
  GD_STATUS_PANIC = 10,
} GdStatus;

/**
 * Opaque graph handle.
 */
typedef struct GdGraph GdGraph;

/**
 * Opaque kernel handle.
 */
typedef struct GdKernel GdKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *gd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gd_version(void);

/**
 * Builds a graph from a YAML description (`vertices`, `edges`, optional
 * `strict_topology` and `allow_compact`; other keys are ignored, so a
 * scenario file works too).
 *
 * # Safety
 * `yaml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GdStatus gd_graph_from_yaml(const char *yaml, struct GdGraph **out);

/**
 * Same as [`gd_graph_from_yaml`] but reads the description from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GdStatus gd_graph_from_file(const char *path, struct GdGraph **out);

/**
 * # Safety
 * `g` must come from a graph constructor and not be used afterwards.
 * Null is ignored.
 */
void gd_graph_free(struct GdGraph *g);

/**
 * Number of vertices, 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t gd_graph_num_vertices(const struct GdGraph *g);

/**
 * Number of edges, 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t gd_graph_num_edges(const struct GdGraph *g);

/**
 * Number of infinite edges, 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t gd_graph_num_infinite(const struct GdGraph *g);

/**
 * Length of edge `edge`; `INFINITY` for a ray.
 *
 * # Safety
 * `g` must be a live graph handle and `out` a valid pointer.
 */
enum GdStatus gd_graph_edge_length(const struct GdGraph *g, size_t edge, double *out);

/**
 * Shortest-path distance between `(e1, x1)` and `(e2, x2)`.
 *
 * # Safety
 * `g` must be a live graph handle and `out` a valid pointer.
 */
enum GdStatus gd_graph_distance(const struct GdGraph *g,
                                size_t e1,
                                double x1,
                                size_t e2,
                                double x2,
                                double *out);

/**
 * Large-time profile with mass `mass` and diffusion constant `a`, at point
 * `(edge, x)` and time `t > 0`.
 *
 * # Safety
 * `g` must be a live graph handle and `out` a valid pointer.
 */
enum GdStatus gd_profile_value(const struct GdGraph *g,
                               double mass,
                               double a,
                               size_t edge,
                               double x,
                               double t,
                               double *out);

/**
 * Builds one of the named kernels (`tent`, `indicator`,
 * `truncated_gaussian`, ...). Pass NaN for `height`, `radius` or `sigma`
 * to keep the default. With `normalize` set the kernel is rescaled to unit
 * second moment.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GdStatus gd_kernel_builtin(const char *name,
                                double height,
                                double radius,
                                double sigma,
                                bool normalize,
                                struct GdKernel **out);

/**
 * # Safety
 * `k` must come from [`gd_kernel_builtin`] and not be used afterwards.
 * Null is ignored.
 */
void gd_kernel_free(struct GdKernel *k);

/**
 * Writes the L1 norm, half the second moment and the support radius of the
 * profile. Any of the output pointers may be null.
 *
 * # Safety
 * `k` must be a live kernel handle; non-null outputs must be valid.
 */
enum GdStatus gd_kernel_moments(const struct GdKernel *k,
                                double *l1_norm,
                                double *second_moment_half,
                                double *support);

/**
 * Rescaled kernel `J_eps(r)` for `eps > 0`.
 *
 * # Safety
 * `k` must be a live kernel handle and `out` a valid pointer.
 */
enum GdStatus gd_kernel_eval(const struct GdKernel *k, double eps, double r, double *out);

/**
 * Runs the scenario at `path`, writing outputs to `out_dir` (null for no
 * output). `all_passed` receives whether every check passed; a failing check
 * also returns `GD_STATUS_CHECKS_FAILED`.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out_dir` null or a
 * NUL-terminated string, and `all_passed` null or a valid pointer.
 */
enum GdStatus gd_run_scenario(const char *path, const char *out_dir, bool *all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHDIFF_H */
