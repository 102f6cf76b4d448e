#pragma once
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scw {

// Error hierarchy; `code` is the machine-readable tag the CLI maps to exit codes.
struct Error : std::runtime_error {
  std::string code;
  Error(std::string c, const std::string& msg) : std::runtime_error(msg), code(std::move(c)) {}
};

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// Root of a monotone function on [lo,hi] by bisection; f(lo), f(hi) must bracket.
double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double xtol = 1e-13, int max_iter = 200);

// Minimize a scalar function on [lo,hi]: coarse grid scan then golden-section.
// Returns (argmin, min value).
std::pair<double, double> golden_min(const std::function<double(double)>& f, double lo,
                                     double hi, double xtol = 1e-7, int coarse = 512);

// Adaptive Gauss-Kronrod integral on [a,b], absolute tolerance target.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-11);

// Gauss-Hermite nodes/weights for E[f(Z)], Z~N(0,1): E ~= sum w_i f(t_i).
// Probabilists' convention, weights sum to 1.
struct GaussHermite {
  std::vector<double> nodes, weights;
  explicit GaussHermite(int n);
  double expect(const std::function<double(double)>& f) const;
};

// Standard normal tail Q(x) and its inverse.
double norm_q(double x);
double norm_qinv(double p);
double norm_pdf(double x);
double norm_cdf(double x);

// Monotone cubic (pchip) interpolant over strictly increasing xs.
class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> xs, std::vector<double> ys);
  double operator()(double x) const;
  double min_x() const { return xs_.front(); }
  double max_x() const { return xs_.back(); }

 private:
  std::vector<double> xs_, ys_, d_;  // d_: endpoint derivatives per Fritsch-Carlson
};

// Least-squares slope of y against 0..n-1 with standard error of the slope.
std::pair<double, double> ls_slope(const std::vector<double>& y);
std::pair<double, double> ls_slope_xy(const std::vector<std::pair<double, double>>& pts);

}  // namespace scw
