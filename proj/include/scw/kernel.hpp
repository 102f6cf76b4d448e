#pragma once
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "scw/numerics.hpp"

namespace scw {

// Grid profile f(x_i) on a window of indices [i0, i0+n); constant extension
// outside the window by the recorded limit values.
struct SpatialProfile {
  double delta = 1.0;
  long i0 = 0;
  std::vector<double> v;
  double left_limit = 0.0, right_limit = 1.0;

  long imin() const { return i0; }
  long imax() const { return i0 + static_cast<long>(v.size()) - 1; }
  double at(long i) const {
    if (i < i0) return left_limit;
    if (i > imax()) return right_limit;
    return v[static_cast<size_t>(i - i0)];
  }
  double x_of(long i) const { return delta * i; }
  bool monotone(double tol = 1e-12) const {
    for (size_t k = 1; k < v.size(); ++k)
      if (v[k] < v[k - 1] - tol) return false;
    return v.empty() || (v.front() >= left_limit - tol && right_limit >= v.back() - tol);
  }
};

// Even unit-mass averaging kernel with CDF and discretization.
class KernelSpec {
 public:
  static KernelSpec boxcar(double W);
  static KernelSpec gaussian(double sigma, double trunc_radius);
  // boxcar smoothed by a Gaussian: strictly positive, used by the wave continuation
  static KernelSpec mollified_boxcar(double W, double sigma);

  double omega(double x) const;
  double cdf(double x) const;  // Omega
  double sup_norm() const;
  double W() const;  // support half-width (effective truncation for smooth kernels)
  bool regular() const;

  struct DiscreteKernel discretize(double delta) const;
  nlohmann::json to_json() const;
  static KernelSpec from_json(const nlohmann::json& j);

 private:
  enum class Shape { Boxcar, Gaussian, MollifiedBoxcar };
  Shape shape_;
  double w_ = 1.0, sigma_ = 0.0, trunc_ = 0.0;
};

// Tap weights on pitch delta, indices -radius..radius, even, summing to 1.
struct DiscreteKernel {
  double delta = 1.0;
  int radius = 0;
  std::vector<double> taps;  // size 2*radius+1

  double tap(int i) const {
    int k = i + radius;
    return (k < 0 || k >= static_cast<int>(taps.size())) ? 0.0 : taps[static_cast<size_t>(k)];
  }
};

// (f (x) omega_hat)(x_i); pitch of profile and kernel must agree.
SpatialProfile convolve(const SpatialProfile& f, const DiscreteKernel& k);

}  // namespace scw
