#include "scw/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace scw {

double bisect_root(const std::function<double(double)>& f, double lo, double hi, double xtol,
                   int max_iter) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw Error("NoBracket", "bisect_root: endpoints do not bracket");
  for (int i = 0; i < max_iter && hi - lo > xtol; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> golden_min(const std::function<double(double)>& f, double lo, double hi,
                                     double xtol, int coarse) {
  double best_x = lo, best_v = f(lo);
  for (int i = 1; i <= coarse; ++i) {
    double x = lo + (hi - lo) * i / coarse;
    double v = f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double h = (hi - lo) / coarse;
  double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > xtol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  double x = 0.5 * (a + b), v = f(x);
  if (v > best_v) return {best_x, best_v};
  return {x, v};
}

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  if (a == b) return 0.0;
  double err = 0.0;
  double val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 12, abs_tol, &err);
  return val;
}

// Golub-Welsch on the Jacobi matrix of probabilists' Hermite polynomials.
GaussHermite::GaussHermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = std::sqrt(static_cast<double>(i));
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    weights[i] = v0 * v0;  // weights sum to 1 in the probabilists' normalization
  }
}

double GaussHermite::expect(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
  return s;
}

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double norm_q(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }
double norm_qinv(double p) { return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

Pchip::Pchip(std::vector<double> xs, std::vector<double> ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
  size_t n = xs_.size();
  if (n < 2 || ys_.size() != n) throw Error("BadInterpolant", "pchip needs >=2 points");
  std::vector<double> h(n - 1), m(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = xs_[i + 1] - xs_[i];
    if (h[i] <= 0) throw Error("BadInterpolant", "pchip xs must increase");
    m[i] = (ys_[i + 1] - ys_[i]) / h[i];
  }
  d_.assign(n, 0.0);
  d_[0] = m[0];
  d_[n - 1] = m[n - 2];
  for (size_t i = 1; i + 1 < n; ++i) {
    if (m[i - 1] * m[i] <= 0) {
      d_[i] = 0.0;
    } else {
      double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / m[i - 1] + w2 / m[i]);
    }
  }
}

double Pchip::operator()(double x) const {
  if (x <= xs_.front()) return ys_.front();
  if (x >= xs_.back()) return ys_.back();
  size_t i = std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin() - 1;
  double h = xs_[i + 1] - xs_[i], t = (x - xs_[i]) / h;
  double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
  double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
  return h00 * ys_[i] + h10 * h * d_[i] + h01 * ys_[i + 1] + h11 * h * d_[i + 1];
}

std::pair<double, double> ls_slope(const std::vector<double>& y) {
  std::vector<std::pair<double, double>> pts(y.size());
  for (size_t i = 0; i < y.size(); ++i) pts[i] = {double(i), y[i]};
  return ls_slope_xy(pts);
}

std::pair<double, double> ls_slope_xy(const std::vector<std::pair<double, double>>& pts) {
  size_t n = pts.size();
  if (n < 2) throw Error("BadFit", "need >=2 samples for a slope");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = n * sxx - sx * sx;
  double slope = (n * sxy - sx * sy) / denom;
  double icept = (sy - slope * sx) / n;
  double ss = 0;
  for (auto& [x, y] : pts) {
    double r = y - (icept + slope * x);
    ss += r * r;
  }
  double se = n > 2 ? std::sqrt(ss / (n - 2) * n / denom) : 0.0;
  return {slope, se};
}

}  // namespace scw
