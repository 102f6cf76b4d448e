#include "scw/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace scw {

namespace {
// int_{-inf}^{z} Phi, the antiderivative used by the mollified-boxcar CDF
double ell(double z) { return z * norm_cdf(z) + norm_pdf(z); }
}  // namespace

KernelSpec KernelSpec::boxcar(double W) {
  if (W <= 0) throw Error("BadKernel", "boxcar needs W > 0");
  KernelSpec k;
  k.shape_ = Shape::Boxcar;
  k.w_ = W;
  return k;
}

KernelSpec KernelSpec::gaussian(double sigma, double trunc_radius) {
  if (sigma <= 0 || trunc_radius <= 0) throw Error("BadKernel", "gaussian needs sigma, radius > 0");
  KernelSpec k;
  k.shape_ = Shape::Gaussian;
  k.sigma_ = sigma;
  k.trunc_ = trunc_radius;
  return k;
}

KernelSpec KernelSpec::mollified_boxcar(double W, double sigma) {
  if (W <= 0 || sigma <= 0) throw Error("BadKernel", "mollified boxcar needs W, sigma > 0");
  KernelSpec k;
  k.shape_ = Shape::MollifiedBoxcar;
  k.w_ = W;
  k.sigma_ = sigma;
  k.trunc_ = W + 8.0 * sigma;  // tail mass beyond this is far below 1e-12
  return k;
}

double KernelSpec::omega(double x) const {
  switch (shape_) {
    case Shape::Boxcar:
      return std::abs(x) <= w_ ? 0.5 / w_ : 0.0;
    case Shape::Gaussian: {
      if (std::abs(x) > trunc_) return 0.0;
      double z = norm_pdf(x / sigma_) / sigma_;
      double mass = 1.0 - 2.0 * norm_q(trunc_ / sigma_);
      return z / mass;  // renormalized after truncation
    }
    case Shape::MollifiedBoxcar:
      return (norm_cdf((x + w_) / sigma_) - norm_cdf((x - w_) / sigma_)) / (2.0 * w_);
  }
  return 0.0;
}

double KernelSpec::cdf(double x) const {
  switch (shape_) {
    case Shape::Boxcar:
      if (x <= -w_) return 0.0;
      if (x >= w_) return 1.0;
      return (x + w_) / (2.0 * w_);
    case Shape::Gaussian: {
      if (x <= -trunc_) return 0.0;
      if (x >= trunc_) return 1.0;
      double mass = 1.0 - 2.0 * norm_q(trunc_ / sigma_);
      return (norm_cdf(x / sigma_) - norm_q(trunc_ / sigma_)) / mass;
    }
    case Shape::MollifiedBoxcar:
      return (ell((x + w_) / sigma_) - ell((x - w_) / sigma_)) * sigma_ / (2.0 * w_);
  }
  return 0.0;
}

double KernelSpec::sup_norm() const { return omega(0.0); }

double KernelSpec::W() const {
  switch (shape_) {
    case Shape::Boxcar:
      return w_;
    case Shape::Gaussian:
      return trunc_;
    case Shape::MollifiedBoxcar:
      return trunc_;
  }
  return w_;
}

bool KernelSpec::regular() const {
  // regular <=> omega > 0 exactly on (-W, W); true for all three shapes with W
  // read as the effective (truncated) support
  return true;
}

DiscreteKernel KernelSpec::discretize(double delta) const {
  if (delta <= 0) throw Error("BadKernel", "pitch must be positive");
  int radius = static_cast<int>(std::ceil(W() / delta - 0.5));
  if (radius < 0) radius = 0;
  DiscreteKernel k;
  k.delta = delta;
  k.radius = radius;
  k.taps.resize(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    k.taps[i + radius] = cdf((i + 0.5) * delta) - cdf((i - 0.5) * delta);
  // symmetrize and normalize away the last 1e-16-level crumbs
  for (int i = 0; i < radius; ++i) {
    double m = 0.5 * (k.taps[i] + k.taps[2 * radius - i]);
    k.taps[i] = k.taps[2 * radius - i] = m;
  }
  double s = 0;
  for (double t : k.taps) s += t;
  for (double& t : k.taps) t /= s;
  return k;
}

nlohmann::json KernelSpec::to_json() const {
  switch (shape_) {
    case Shape::Boxcar:
      return {{"shape", "boxcar"}, {"W", w_}};
    case Shape::Gaussian:
      return {{"shape", "gaussian"}, {"sigma", sigma_}, {"trunc", trunc_}};
    case Shape::MollifiedBoxcar:
      return {{"shape", "mollified_boxcar"}, {"W", w_}, {"sigma", sigma_}};
  }
  return {};
}

KernelSpec KernelSpec::from_json(const nlohmann::json& j) {
  std::string shape = j.at("shape");
  if (shape == "boxcar") return boxcar(j.at("W"));
  if (shape == "gaussian") return gaussian(j.at("sigma"), j.at("trunc"));
  if (shape == "mollified_boxcar") return mollified_boxcar(j.at("W"), j.at("sigma"));
  throw Error("BadKernel", "unknown kernel shape " + shape);
}

SpatialProfile convolve(const SpatialProfile& f, const DiscreteKernel& k) {
  if (std::abs(f.delta - k.delta) > 1e-12 * std::max(1.0, f.delta))
    throw Error("PitchMismatch", "profile and kernel pitch differ");
  SpatialProfile out = f;
  for (long i = f.imin(); i <= f.imax(); ++i) {
    double s = 0;
    for (int j = -k.radius; j <= k.radius; ++j) s += k.taps[j + k.radius] * f.at(i - j);
    out.v[static_cast<size_t>(i - f.imin())] = s;
  }
  return out;
}

}  // namespace scw
