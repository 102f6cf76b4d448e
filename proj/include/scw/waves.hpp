#pragma once
#include <string>
#include <utility>
#include <vector>

#include "scw/exitfn.hpp"
#include "scw/kernel.hpp"

namespace scw {

// Piecewise-constant traveling pair: f(x) = sum_j df_j 1(x - zf_j),
// g(x) = sum_i dg_i 1(x - zg_i), advancing by alpha per sweep.
struct WaveSolution {
  std::vector<double> zf, zg;  // ordered jump positions
  std::vector<double> df, dg;  // heights, each set summing to 1
  double alpha = 0.0;
  double alpha_limit = 0.0;  // mollification-extrapolated shift (== alpha when exact)
  std::string kernel_id;     // serialized kernel the solution was computed against
  double residual = 0.0;     // sup error of forward_map against the target pair
  double max_condition = 0.0;
  int stages = 0;
};

// uf_j = sum_i dg_i Omega(zf_j + alpha - zg_i); ug_i = sum_j df_j Omega(zg_i - zf_j).
std::pair<std::vector<double>, std::vector<double>> forward_map(
    const std::vector<double>& zf, const std::vector<double>& zg, const std::vector<double>& df,
    const std::vector<double>& dg, double alpha, const KernelSpec& k);
std::pair<std::vector<double>, std::vector<double>> forward_map(const WaveSolution& sol,
                                                                const KernelSpec& k);

// Deform the symmetric two-step solution along the straight-line exit-function
// path (shift stage second) until it solves (hf, hg). Piecewise-constant inputs
// with a strict gap only; boxcar kernels are Gaussian-mollified internally and
// the shift is extrapolated across mollification widths into alpha_limit.
WaveSolution continuation_solve(const ExitFunction& hf, const ExitFunction& hg,
                                const KernelSpec& k, int steps = 64, int rk_order = 5);

// Coordinate-wise root solves of the plain coupled recursion in inverse space,
// translation gauge re-fixed each sweep; the per-sweep drift estimates alpha.
WaveSolution inverse_space_iterate(const ExitFunction& hf, const ExitFunction& hg,
                                   const KernelSpec& k, double tol = 1e-10);

struct CertReport {
  double residual = 0.0;
  double A = 0.0;          // area gap of the target pair
  double A_rec = 0.0;      // area gap reconstructed from the solution profiles
  bool alpha_zero_area_ok = true;  // (i) vacuous unless alpha == 0
  bool shift_bound_ok = false;     // (ii) |alpha| sup|omega| >= |A| - 1e-8
  double xi_min = 0.0;             // (iii) minimum coupling integral over cut pairs
  bool xi_nonneg_ok = false;
  bool transition_ok = false;      // (iv) transition-length bound at L = W
  double transition_lhs = 0.0;
};

// Checks the four wave certificates; throws CertificationFailed naming the first
// violated clause. `k` must be the kernel the solution was computed against.
CertReport certify(const WaveSolution& sol, const ExitFunction& hf, const ExitFunction& hg,
                   const KernelSpec& k);

}  // namespace scw
