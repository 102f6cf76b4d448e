#pragma once
#include <functional>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "scw/numerics.hpp"

namespace scw {

enum class Side { Left, Right, Point };

class ExitFunctionImpl;

// Non-decreasing map [0,1] -> [0,1] with queryable one-sided limits and an exact
// inverse (role swap, no numerics beyond what the representation itself needs).
// Convention: h(0-) = 0 and h(1+) = 1, so inverses are total on [0,1].
class ExitFunction {
 public:
  ExitFunction();  // identity

  static ExitFunction piecewise_constant(std::vector<double> positions,
                                         std::vector<double> heights);
  static ExitFunction piecewise_linear(std::vector<double> xs, std::vector<double> ys);
  // fwd must be continuous and non-decreasing on [0,1]; inv (optional) exact inverse.
  static ExitFunction analytic(std::function<double(double)> fwd,
                               std::function<double(double)> inv = nullptr,
                               std::string tag = "", std::vector<double> params = {});
  static ExitFunction identity();
  static ExitFunction unit_step(double u0);
  static ExitFunction constant(double c);

  double eval(double u, Side s = Side::Point) const;
  double operator()(double u) const { return eval(u); }

  ExitFunction inverse() const;

  double integral_to(double u) const;  // exact for piecewise reps, quadrature otherwise
  double integral() const { return integral_to(1.0); }
  double inv_integral_to(double v) const;  // representative-independent
  double mean_of_inverse() const { return inv_integral_to(1.0); }  // B_h

  bool is_piecewise_constant() const;
  std::vector<double> jump_positions() const;  // forward-map jumps, piecewise-constant only
  std::vector<double> jump_heights() const;

  // n equal jumps of 1/n placed at the inverse-integral means; preserves the integral.
  ExitFunction quantized(int n) const;
  // Inverse slanted toward its mean: h^{-1}(v;t) = (1-t) B_h + t h^{-1}(v).
  ExitFunction tilted(double t) const;

  // Affine change of variables u -> in_a*u + in_b on input, v -> out_a*v + out_b on
  // output. Negative factors flip orientation; the result must still be monotone.
  ExitFunction affine(double in_a, double in_b, double out_a, double out_b) const;

  nlohmann::json to_json() const;
  static ExitFunction from_json(const nlohmann::json& j);

 private:
  ExitFunction(std::shared_ptr<const ExitFunctionImpl> impl, bool inv);
  std::shared_ptr<const ExitFunctionImpl> impl_;
  bool inv_ = false;
};

// Box-to-unit coordinate change for a pair of exit functions.
struct RescaleMap {
  double u0 = 0, v0 = 0, su = 1, sv = 1;
  bool flip_v = false;  // set when the raw model's v-axis runs backwards

  std::pair<double, double> to_unit(double u, double v) const;
  std::pair<double, double> from_unit(double uu, double vv) const;
};

// Rescale (hf, hg) so the crossings lo, hi become (0,0) and (1,1).
// Throws DegenerateBox when a box side is below 1e-12.
std::tuple<ExitFunction, ExitFunction, RescaleMap> rescale_to_box(
    const ExitFunction& hf, const ExitFunction& hg, std::pair<double, double> lo,
    std::pair<double, double> hi);

}  // namespace scw
