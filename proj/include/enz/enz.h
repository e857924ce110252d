#ifndef ENZ_ENZ_H
#define ENZ_ENZ_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(ENZ_BUILDING_LIBRARY)
#define ENZ_API __declspec(dllexport)
#else
#define ENZ_API __declspec(dllimport)
#endif
#else
#define ENZ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every fallible call returns one; the message for the most
   recent failure on the calling thread is available from enz_last_error(). */
typedef enum enz_status {
  ENZ_OK = 0,
  ENZ_E_ZERO_VECTOR = 1,
  ENZ_E_INVALID_ARGUMENT = 2,
  ENZ_E_DIMENSION_MISMATCH = 3,
  ENZ_E_NONPOSITIVE_SCALE = 4,
  ENZ_E_NONPOSITIVE_EPS = 5,
  ENZ_E_BAD_K = 6,
  ENZ_E_BAD_CORRELATION = 7,
  ENZ_E_BAD_DELTA = 8,
  ENZ_E_BAD_ORDER = 9,
  ENZ_E_DELTA_UNAVAILABLE = 10,
  ENZ_E_LINE_SEARCH = 11,
  ENZ_E_NONFINITE = 12,
  ENZ_E_ZERO_ITERATE = 13,
  ENZ_E_EMPTY_INPUT = 14,
  ENZ_E_IMAGE_FORMAT = 15,
  ENZ_E_IO = 16,
  ENZ_E_PARSE = 17,
  ENZ_E_INTERNAL = 99
} enz_status;

ENZ_API const char* enz_version(void);
ENZ_API const char* enz_last_error(void);
ENZ_API const char* enz_status_name(enz_status status);

/* Frees strings and arrays returned by this library. */
ENZ_API void enz_free(void* p);

/* Shortest round-trip decimal for v ("inf", "-inf", "nan" for non-finite).
   Returns the length written, excluding the terminator; 0 if cap is too small. */
ENZ_API size_t enz_format_double(double v, char* buf, size_t cap);

/* ---- measures ---------------------------------------------------------- */

typedef struct enz_decomposition {
  size_t l0;
  double entropy_bits;
  double divergence_bits;
  double enz;
  double efficiency;
} enz_decomposition;

ENZ_API enz_status enz_count_nonzeros(const double* x, size_t n, size_t* out);
ENZ_API enz_status enz_normalize(const double* x, size_t n, double* probs);
/* Either output may be NULL. */
ENZ_API enz_status enz_shannon(const double* x, size_t n, double* entropy_bits, double* enz);
/* alpha may be 0, 1 or INFINITY. */
ENZ_API enz_status enz_renyi(const double* x, size_t n, double alpha, double* enz);
ENZ_API enz_status enz_decompose(const double* x, size_t n, double alpha, enz_decomposition* out);
ENZ_API enz_status enz_unnormalized_entropy(const double* x, size_t n, double scale, int base2, double* out);
ENZ_API enz_status enz_unnormalized_renyi(const double* x, size_t n, double scale, double alpha, double* out);

/* ---- numeric tables ---------------------------------------------------- */

typedef struct enz_table enz_table;

/* Comma or whitespace separated numbers; '#' comments and one header row allowed. */
ENZ_API enz_status enz_table_read(const char* path, enz_table** out);
ENZ_API size_t enz_table_rows(const enz_table* t);
ENZ_API size_t enz_table_row_length(const enz_table* t, size_t row);
ENZ_API const double* enz_table_row(const enz_table* t, size_t row);
ENZ_API void enz_table_destroy(enz_table* t);

/* ---- matrices and synthetic data -------------------------------------- */

typedef struct enz_matrix enz_matrix;

ENZ_API enz_status enz_matrix_create(size_t rows, size_t cols, const double* row_major, enz_matrix** out);
/* Rows i.i.d. N(0, (1 - r) I + r 11^T). */
ENZ_API enz_status enz_matrix_correlated_gaussian(size_t m, size_t n, double r, uint64_t seed, enz_matrix** out);

typedef enum enz_ensemble { ENZ_ENSEMBLE_ORTHONORMAL_BASES = 0, ENZ_ENSEMBLE_GAUSSIAN = 1 } enz_ensemble;

ENZ_API enz_status enz_matrix_random(size_t m, size_t n, enz_ensemble ensemble, int normalize_columns, uint64_t seed,
                                     enz_matrix** out);
ENZ_API size_t enz_matrix_rows(const enz_matrix* a);
ENZ_API size_t enz_matrix_cols(const enz_matrix* a);
ENZ_API enz_status enz_matrix_copy(const enz_matrix* a, double* row_major);
/* y = A x */
ENZ_API enz_status enz_matrix_apply(const enz_matrix* a, const double* x, size_t n, double* y, size_t m);
ENZ_API void enz_matrix_destroy(enz_matrix* a);

ENZ_API enz_status enz_sparse_signal(size_t n, size_t k, double dynamic_range, uint64_t seed, double* out);
/* noisy = clean + noise with ||noise|| = eta ||clean||; noise may be NULL. */
ENZ_API enz_status enz_add_noise(const double* clean, size_t m, double eta, uint64_t seed, double* noisy,
                                 double* noise);
ENZ_API enz_status enz_relative_error(const double* x_hat, const double* x_star, size_t n, double* out);

/* ---- recovery ---------------------------------------------------------- */

typedef enum enz_method {
  ENZ_METHOD_ENTROPY = 0,
  ENZ_METHOD_ISTA = 1,
  ENZ_METHOD_IHT = 2,
  ENZ_METHOD_IRL1 = 3
} enz_method;

typedef struct enz_solver_options {
  /* smoothing continuation and outer rescaling (entropy) */
  double eps0;
  double decay;
  int stages;
  double outer_c_tol;
  int max_outer;
  /* quasi-Newton inner solver (entropy) */
  int memory;
  double grad_tol;
  int max_inner_iters;
  /* proximal baselines; step <= 0 selects 1 / sigma_max(A)^2 */
  double step;
  int ista_max_iters;
  double ista_tol;
  int iht_max_iters;
  double iht_tol;
  double irl1_eps_w;
  int irl1_rounds;
} enz_solver_options;

ENZ_API void enz_solver_options_default(enz_solver_options* opts);

typedef struct enz_result enz_result;

/* For ENZ_METHOD_IHT the parameter is the sparsity level k; otherwise lambda. */
ENZ_API enz_status enz_recover(const enz_matrix* a, const double* b, size_t m, enz_method method, double parameter,
                               const enz_solver_options* opts, enz_result** out);
/* Log-uniform lambda grid scored by relative error against x_true (length n). */
ENZ_API enz_status enz_recover_grid(const enz_matrix* a, const double* b, size_t m, enz_method method, double lo,
                                    double hi, int points, const double* x_true, size_t n,
                                    const enz_solver_options* opts, enz_result** out);
ENZ_API size_t enz_result_size(const enz_result* r);
ENZ_API const double* enz_result_x(const enz_result* r);
ENZ_API size_t enz_result_trace_size(const enz_result* r);
ENZ_API const double* enz_result_trace(const enz_result* r);
ENZ_API double enz_result_lambda(const enz_result* r);
ENZ_API int enz_result_converged(const enz_result* r);
ENZ_API int enz_result_iterations(const enz_result* r);
ENZ_API size_t enz_result_grid_size(const enz_result* r);
ENZ_API double enz_result_grid_lambda(const enz_result* r, size_t i);
ENZ_API double enz_result_grid_error(const enz_result* r, size_t i);
ENZ_API void enz_result_destroy(enz_result* r);

/* ---- Monte Carlo success sweep ----------------------------------------- */

typedef struct enz_sweep_config {
  const enz_method* methods;
  size_t method_count;
  const size_t* k_grid;
  size_t k_count;
  const double* eta_grid;
  size_t eta_count;
  int trials;
  uint64_t base_seed;
  size_t m;
  size_t n;
  double r;
  double dynamic_range;
  double lambda_lo;
  double lambda_hi;
  int lambda_points;
  int threads;
  int record_timing;
  enz_solver_options options;
} enz_sweep_config;

/* Defaults point at static arrays owned by the library. */
ENZ_API void enz_sweep_config_default(enz_sweep_config* cfg);

typedef struct enz_sweep_cell {
  enz_method method;
  size_t k;
  double eta;
  int trials;
  int successes;
  double success_rate;
} enz_sweep_cell;

typedef struct enz_sweep enz_sweep;

ENZ_API enz_status enz_sweep_run(const enz_sweep_config* cfg, enz_sweep** out);
ENZ_API size_t enz_sweep_cell_count(const enz_sweep* s);
ENZ_API enz_status enz_sweep_cell_get(const enz_sweep* s, size_t i, enz_sweep_cell* out);
ENZ_API size_t enz_sweep_failure_count(const enz_sweep* s);
/* CSV text, release with enz_free. */
ENZ_API enz_status enz_sweep_trials_csv(const enz_sweep* s, char** out);
ENZ_API enz_status enz_sweep_summary_csv(const enz_sweep* s, char** out);
ENZ_API void enz_sweep_destroy(enz_sweep* s);
ENZ_API const char* enz_method_name(enz_method method);

/* ---- images and denoising ---------------------------------------------- */

typedef struct enz_image enz_image;

ENZ_API enz_status enz_image_create(size_t height, size_t width, const double* pixels, enz_image** out);
ENZ_API enz_status enz_image_read_pgm(const char* path, enz_image** out);
ENZ_API enz_status enz_image_write_pgm(const enz_image* img, const char* path);
ENZ_API enz_status enz_image_synthetic(size_t size, enz_image** out);
ENZ_API enz_status enz_image_awgn(const enz_image* img, double sigma, uint64_t seed, enz_image** out);
ENZ_API size_t enz_image_height(const enz_image* img);
ENZ_API size_t enz_image_width(const enz_image* img);
ENZ_API const double* enz_image_pixels(const enz_image* img);
/* Periodic forward differences; dx and dy each hold height * width values. */
ENZ_API enz_status enz_image_gradient(const enz_image* img, double* dx, double* dy);
ENZ_API enz_status enz_image_tv(const enz_image* img, double* out);
ENZ_API void enz_image_destroy(enz_image* img);

/* +INFINITY for identical images. */
ENZ_API enz_status enz_psnr(const enz_image* a, const enz_image* b, double* out);
ENZ_API enz_status enz_ssim(const enz_image* a, const enz_image* b, double* out);

typedef enum enz_regularizer { ENZ_REG_TV = 0, ENZ_REG_LOGSUM = 1, ENZ_REG_ENTROPY = 2 } enz_regularizer;

typedef struct enz_denoise_options {
  double eps0;
  double decay;
  int stages;
  double eps_w;
  double scale;
  int memory;
  double grad_tol;
  int max_inner_iters;
} enz_denoise_options;

ENZ_API void enz_denoise_options_default(enz_denoise_options* opts);
ENZ_API const char* enz_regularizer_name(enz_regularizer reg);

ENZ_API enz_status enz_denoise(const enz_image* noisy, enz_regularizer reg, double lambda,
                               const enz_denoise_options* opts, enz_image** out);

typedef struct enz_denoise_grid enz_denoise_grid;

/* Selects lambda by highest PSNR against clean. */
ENZ_API enz_status enz_denoise_grid_run(const enz_image* noisy, const enz_image* clean, enz_regularizer reg,
                                        const double* lambdas, size_t count, const enz_denoise_options* opts,
                                        int threads, enz_denoise_grid** out);
ENZ_API size_t enz_denoise_grid_size(const enz_denoise_grid* g);
ENZ_API enz_status enz_denoise_grid_entry(const enz_denoise_grid* g, size_t i, double* lambda, double* psnr,
                                          double* ssim);
ENZ_API size_t enz_denoise_grid_best(const enz_denoise_grid* g);
/* Borrowed; valid until the grid is destroyed. */
ENZ_API const enz_image* enz_denoise_grid_best_image(const enz_denoise_grid* g);
ENZ_API void enz_denoise_grid_destroy(enz_denoise_grid* g);

/* ---- decay profiles ---------------------------------------------------- */

typedef struct enz_decay_table enz_decay_table;

ENZ_API enz_status enz_decay_profile(const double* const* series, const size_t* lengths, size_t count,
                                     const double* percentiles, size_t percentile_count, enz_decay_table** out);
/* Columns: index, s0..s{count-1}, mean, median, one per percentile. */
ENZ_API enz_status enz_decay_table_csv(const enz_decay_table* t, char** out);
ENZ_API size_t enz_decay_table_length(const enz_decay_table* t);
ENZ_API void enz_decay_table_destroy(enz_decay_table* t);

/* ---- restricted isometry and stability -------------------------------- */

typedef struct enz_rip_estimate {
  size_t order;
  double delta;
  int exhaustive;
  int lower_bound;
  uint64_t supports;
} enz_rip_estimate;

ENZ_API enz_status enz_rip_constant(const enz_matrix* a, size_t s, uint64_t budget, uint64_t seed, int threads,
                                    enz_rip_estimate* out);

typedef struct enz_prop1_report {
  int lower_checks;
  int lower_violations;
  double min_sigma;
  int cross_checks;
  int cross_violations;
  double max_cross_ratio;
} enz_prop1_report;

ENZ_API enz_status enz_check_prop1(const enz_matrix* a, size_t s, double delta, int trials, uint64_t seed,
                                   enz_prop1_report* out);

typedef struct enz_stability_inputs {
  size_t n;
  size_t k;
  double delta_2k;
  double eps_x;
  double eps_y;
  double e_norm;
} enz_stability_inputs;

ENZ_API enz_status enz_stability_bound(const enz_stability_inputs* in, double* bound_hT, double* bound_effective);

typedef struct enz_stability_report {
  double lhs_hT;
  double bound_hT;
  double lhs_eff;
  double bound_eff;
  double delta;
  double eps_x;
  double eps_y;
  double e_norm;
  int holds_hT;
  int holds_eff;
} enz_stability_report;

ENZ_API enz_status enz_verify_stability(const enz_matrix* a, const double* x, const double* y, size_t n, size_t k,
                                        double delta_2k, enz_stability_report* out);

/* Effectively k-sparse pair: k dominant N(0,1) entries plus N(0, tail_scale^2)
   tails; y perturbs the dominant entries and moves one of them. */
ENZ_API enz_status enz_random_signal_pair(size_t n, size_t k, double tail_scale, double perturbation, uint64_t seed,
                                          double* x, double* y);

typedef struct enz_stability_batch_config {
  size_t m;
  size_t n;
  size_t k;
  enz_ensemble ensemble;
  int normalize_columns;
  double tail_scale;
  double perturbation;
  int instances;
  int matrices;
  uint64_t budget;
  uint64_t seed;
  int threads;
} enz_stability_batch_config;

ENZ_API void enz_stability_batch_config_default(enz_stability_batch_config* cfg);

typedef struct enz_stability_batch enz_stability_batch;

ENZ_API enz_status enz_stability_batch_run(const enz_stability_batch_config* cfg, enz_stability_batch** out);
ENZ_API size_t enz_stability_batch_size(const enz_stability_batch* b);
ENZ_API enz_status enz_stability_batch_report(const enz_stability_batch* b, size_t i, enz_stability_report* out);
ENZ_API size_t enz_stability_batch_skipped(const enz_stability_batch* b);
ENZ_API size_t enz_stability_batch_estimate_count(const enz_stability_batch* b);
ENZ_API enz_status enz_stability_batch_estimate(const enz_stability_batch* b, size_t i, enz_rip_estimate* out);
/* Columns: lhs_hT,bound_hT,lhs_eff,bound_eff,delta,holds */
ENZ_API enz_status enz_stability_batch_csv(const enz_stability_batch* b, char** out);
ENZ_API void enz_stability_batch_destroy(enz_stability_batch* b);

#ifdef __cplusplus
}
#endif

#endif
