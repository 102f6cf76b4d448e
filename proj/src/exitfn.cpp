#include "scw/exitfn.hpp"

#include <algorithm>
#include <cmath>

namespace scw {

namespace {
Side mirror(Side s) {
  if (s == Side::Left) return Side::Right;
  if (s == Side::Right) return Side::Left;
  return Side::Point;
}
}  // namespace

class ExitFunctionImpl {
 public:
  virtual ~ExitFunctionImpl() = default;
  virtual double fwd(double u, Side s) const = 0;
  virtual double inv(double v, Side s) const = 0;
  virtual double integral_fwd_to(double u) const = 0;
  virtual bool pc() const { return false; }
  virtual std::vector<double> pc_positions() const { return {}; }
  virtual std::vector<double> pc_heights() const { return {}; }
  virtual nlohmann::json json() const = 0;
};

namespace {

// Step function: h(u) = sum of heights of jumps strictly left of u, plus the
// h(1+)=1 convention. Inverse is the staircase with roles exchanged.
class PcImpl : public ExitFunctionImpl {
 public:
  PcImpl(std::vector<double> pos, std::vector<double> hts) : p_(std::move(pos)), d_(std::move(hts)) {
    cum_.resize(d_.size());
    double c = 0;
    for (size_t j = 0; j < d_.size(); ++j) {
      c += d_[j];
      cum_[j] = c;
    }
    total_ = c;
  }

  double fwd(double u, Side s) const override {
    if (u <= 0 && s == Side::Left) return 0.0;
    if (u >= 1 && s == Side::Right) return 1.0;
    double left = 0, right = 0;
    size_t lo = std::lower_bound(p_.begin(), p_.end(), u) - p_.begin();   // first p >= u
    size_t hi = std::upper_bound(p_.begin(), p_.end(), u) - p_.begin();   // first p > u
    left = lo == 0 ? 0.0 : cum_[lo - 1];
    right = hi == 0 ? 0.0 : cum_[hi - 1];
    if (s == Side::Left) return left;
    if (s == Side::Right) return right;
    return 0.5 * (left + right);
  }

  double inv(double v, Side s) const override {
    size_t K = p_.size();
    if (v <= 0) {
      double r = K ? p_[0] : 1.0;
      if (s == Side::Left) return 0.0;
      if (s == Side::Right) return r;
      return 0.5 * r;
    }
    // first jump whose cumulative reaches v
    size_t j = std::lower_bound(cum_.begin(), cum_.end(), v) - cum_.begin();
    if (j == K) return 1.0;  // v above the last plateau: the conventional jump at 1
    if (v == cum_[j]) {      // plateau boundary: representative interval [p_j, p_{j+1}]
      double l = p_[j], r = j + 1 < K ? p_[j + 1] : 1.0;
      if (s == Side::Left) return l;
      if (s == Side::Right) return r;
      return 0.5 * (l + r);
    }
    return p_[j];
  }

  double integral_fwd_to(double u) const override {
    double s = 0;
    for (size_t j = 0; j < p_.size() && p_[j] < u; ++j) s += d_[j] * (u - p_[j]);
    return s;
  }

  bool pc() const override { return true; }
  std::vector<double> pc_positions() const override { return p_; }
  std::vector<double> pc_heights() const override { return d_; }

  nlohmann::json json() const override {
    return {{"type", "pc"}, {"positions", p_}, {"heights", d_}};
  }

 private:
  std::vector<double> p_, d_, cum_;
  double total_;
};

class PlImpl : public ExitFunctionImpl {
 public:
  PlImpl(std::vector<double> xs, std::vector<double> ys) : x_(std::move(xs)), y_(std::move(ys)) {
    I_.assign(x_.size(), 0.0);
    for (size_t i = 1; i < x_.size(); ++i)
      I_[i] = I_[i - 1] + 0.5 * (y_[i] + y_[i - 1]) * (x_[i] - x_[i - 1]);
  }

  double value(double u) const {
    if (u <= x_.front()) return y_.front();
    if (u >= x_.back()) return y_.back();
    size_t i = std::upper_bound(x_.begin(), x_.end(), u) - x_.begin() - 1;
    double t = (u - x_[i]) / (x_[i + 1] - x_[i]);
    return y_[i] + t * (y_[i + 1] - y_[i]);
  }

  double fwd(double u, Side s) const override {
    if (u <= 0 && s == Side::Left) return 0.0;
    if (u >= 1 && s == Side::Right) return 1.0;
    return value(u);
  }

  double inv(double v, Side s) const override {
    if (v < y_.front()) return 0.0;
    if (v > y_.back()) return 1.0;
    // span of u with h(u) == v (nonempty since v within range)
    size_t lo = std::lower_bound(y_.begin(), y_.end(), v) - y_.begin();
    size_t hi = std::upper_bound(y_.begin(), y_.end(), v) - y_.begin();
    double ul, ur;
    if (lo == 0)
      ul = 0.0;  // v == y_.front(): plateau extends to the left edge by extension
    else if (y_[lo] == v)
      ul = x_[lo];
    else
      ul = x_[lo - 1] + (v - y_[lo - 1]) / (y_[lo] - y_[lo - 1]) * (x_[lo] - x_[lo - 1]);
    if (hi == y_.size())
      ur = v == y_.back() ? 1.0 : ul;  // right extension plateau
    else if (hi > 0 && y_[hi - 1] == v)
      ur = x_[hi - 1];
    else
      ur = ul;
    if (ur < ul) ur = ul;
    if (s == Side::Left) return ul;
    if (s == Side::Right) return ur;
    return 0.5 * (ul + ur);
  }

  double integral_fwd_to(double u) const override {
    if (u <= x_.front()) return y_.front() * u;
    double base = y_.front() * x_.front();
    if (u >= x_.back()) return base + I_.back() + y_.back() * (u - x_.back());
    size_t i = std::upper_bound(x_.begin(), x_.end(), u) - x_.begin() - 1;
    double yu = value(u);
    return base + I_[i] + 0.5 * (y_[i] + yu) * (u - x_[i]);
  }

  nlohmann::json json() const override { return {{"type", "pl"}, {"xs", x_}, {"ys", y_}}; }

 private:
  std::vector<double> x_, y_, I_;
};

class FnImpl : public ExitFunctionImpl {
 public:
  FnImpl(std::function<double(double)> f, std::function<double(double)> g, std::string tag,
         std::vector<double> params)
      : f_(std::move(f)), g_(std::move(g)), tag_(std::move(tag)), params_(std::move(params)) {}

  double fwd(double u, Side s) const override {
    if (u <= 0 && s == Side::Left) return 0.0;
    if (u >= 1 && s == Side::Right) return 1.0;
    return clamp01(f_(clamp01(u)));
  }

  double inv(double v, Side s) const override {
    v = clamp01(v);
    if (g_) return clamp01(g_(v));
    double f0 = fwd(0, Side::Point), f1 = fwd(1, Side::Point);
    if (v <= f0) return 0.0;
    if (v >= f1) return 1.0;
    return bisect_root([&](double u) { return f_(u) - v; }, 0.0, 1.0, 1e-13);
  }

  double integral_fwd_to(double u) const override {
    return integrate([&](double x) { return clamp01(f_(clamp01(x))); }, 0.0, u, 1e-11);
  }

  nlohmann::json json() const override {
    return {{"type", "analytic"}, {"tag", tag_}, {"params", params_}};
  }

 private:
  std::function<double(double)> f_, g_;
  std::string tag_;
  std::vector<double> params_;
};

class AffineImpl : public ExitFunctionImpl {
 public:
  AffineImpl(ExitFunction base, double ia, double ib, double oa, double ob)
      : base_(std::move(base)), ia_(ia), ib_(ib), oa_(oa), ob_(ob) {}

  double fwd(double u, Side s) const override {
    double x = ia_ * u + ib_;
    if (s == Side::Point) return oa_ * base_.eval(x, Side::Point) + ob_;
    Side si = ia_ >= 0 ? s : mirror(s);
    double vl = oa_ * base_.eval(x, si == s ? Side::Left : Side::Right) + ob_;
    double vr = oa_ * base_.eval(x, si == s ? Side::Right : Side::Left) + ob_;
    if (oa_ < 0) std::swap(vl, vr);
    return s == Side::Left ? vl : vr;
  }

  double inv(double v, Side s) const override {
    double y = (v - ob_) / oa_;
    ExitFunction binv = base_.inverse();
    if (s == Side::Point) return (binv.eval(y, Side::Point) - ib_) / ia_;
    Side so = oa_ >= 0 ? s : mirror(s);
    double xl = binv.eval(y, so == s ? Side::Left : Side::Right);
    double xr = binv.eval(y, so == s ? Side::Right : Side::Left);
    double ul = (xl - ib_) / ia_, ur = (xr - ib_) / ia_;
    if (ia_ < 0) std::swap(ul, ur);
    return s == Side::Left ? ul : ur;
  }

  double integral_fwd_to(double u) const override {
    return ob_ * u + (oa_ / ia_) * (base_.integral_to(ia_ * u + ib_) - base_.integral_to(ib_));
  }

  nlohmann::json json() const override {
    return {{"type", "affine"},
            {"in", {ia_, ib_}},
            {"out", {oa_, ob_}},
            {"base", base_.to_json()}};
  }

 private:
  ExitFunction base_;
  double ia_, ib_, oa_, ob_;
};

void check_monotone_grid(const ExitFunction& h) {
  const int N = 10000;
  double prev = h.eval(0.0, Side::Right);
  for (int i = 1; i <= N; ++i) {
    double cur = h.eval(double(i) / N, Side::Left);
    if (cur < prev - 1e-12) throw Error("NotMonotone", "exit function decreases on grid");
    prev = h.eval(double(i) / N, Side::Right);
  }
}

}  // namespace

ExitFunction::ExitFunction(std::shared_ptr<const ExitFunctionImpl> impl, bool inv)
    : impl_(std::move(impl)), inv_(inv) {}

ExitFunction::ExitFunction() : ExitFunction(identity()) {}

ExitFunction ExitFunction::identity() {
  return piecewise_linear({0.0, 1.0}, {0.0, 1.0});
}

ExitFunction ExitFunction::unit_step(double u0) {
  return piecewise_constant({clamp01(u0)}, {1.0});
}

ExitFunction ExitFunction::constant(double c) {
  return piecewise_linear({0.0, 1.0}, {clamp01(c), clamp01(c)});
}

ExitFunction ExitFunction::piecewise_constant(std::vector<double> positions,
                                              std::vector<double> heights) {
  if (positions.size() != heights.size())
    throw Error("BadConstruction", "positions/heights size mismatch");
  std::vector<size_t> idx(positions.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return positions[a] < positions[b]; });
  std::vector<double> p, d;
  double sum = 0;
  for (size_t i : idx) {
    double pos = positions[i], h = heights[i];
    if (h < 0) throw Error("BadConstruction", "negative jump height");
    if (h == 0) continue;
    if (pos < -1e-12 || pos > 1 + 1e-12) throw Error("BadConstruction", "jump outside [0,1]");
    pos = clamp01(pos);
    if (!p.empty() && pos == p.back())
      d.back() += h;
    else {
      p.push_back(pos);
      d.push_back(h);
    }
    sum += h;
  }
  if (sum > 1 + 1e-9) throw Error("BadConstruction", "jump heights exceed 1");
  return ExitFunction(std::make_shared<PcImpl>(std::move(p), std::move(d)), false);
}

ExitFunction ExitFunction::piecewise_linear(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw Error("BadConstruction", "need >=2 matching knots");
  for (size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] <= xs[i - 1]) throw Error("BadConstruction", "knot xs must increase");
    if (ys[i] < ys[i - 1] - 1e-12) throw Error("NotMonotone", "knot ys must not decrease");
  }
  for (size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < -1e-12 || xs[i] > 1 + 1e-12 || ys[i] < -1e-12 || ys[i] > 1 + 1e-12)
      throw Error("BadConstruction", "knots outside the unit square");
    xs[i] = clamp01(xs[i]);
    ys[i] = clamp01(std::max(ys[i], i ? ys[i - 1] : 0.0));
  }
  return ExitFunction(std::make_shared<PlImpl>(std::move(xs), std::move(ys)), false);
}

ExitFunction ExitFunction::analytic(std::function<double(double)> fwd,
                                    std::function<double(double)> inv, std::string tag,
                                    std::vector<double> params) {
  ExitFunction h(std::make_shared<FnImpl>(std::move(fwd), std::move(inv), std::move(tag),
                                          std::move(params)),
                 false);
  check_monotone_grid(h);
  return h;
}

ExitFunction ExitFunction::affine(double in_a, double in_b, double out_a, double out_b) const {
  if (in_a == 0 || out_a == 0) throw Error("BadConstruction", "degenerate affine map");
  ExitFunction h(std::make_shared<AffineImpl>(*this, in_a, in_b, out_a, out_b), false);
  check_monotone_grid(h);
  return h;
}

double ExitFunction::eval(double u, Side s) const {
  double v = inv_ ? impl_->inv(u, s) : impl_->fwd(u, s);
  return clamp01(v);
}

ExitFunction ExitFunction::inverse() const { return ExitFunction(impl_, !inv_); }

double ExitFunction::integral_to(double u) const {
  if (!inv_) return impl_->integral_fwd_to(u);
  // integral of the inverse from the forward integral: representative-independent
  double x = clamp01(impl_->inv(u, Side::Point));
  return u * x - impl_->integral_fwd_to(x);
}

double ExitFunction::inv_integral_to(double v) const { return inverse().integral_to(v); }

bool ExitFunction::is_piecewise_constant() const { return !inv_ && impl_->pc(); }

std::vector<double> ExitFunction::jump_positions() const {
  if (!is_piecewise_constant()) throw Error("BadQuery", "not a piecewise-constant representation");
  return impl_->pc_positions();
}

std::vector<double> ExitFunction::jump_heights() const {
  if (!is_piecewise_constant()) throw Error("BadQuery", "not a piecewise-constant representation");
  return impl_->pc_heights();
}

ExitFunction ExitFunction::quantized(int n) const {
  if (n < 1) throw Error("BadConstruction", "quantizer order must be >= 1");
  std::vector<double> pos(n), hts(n, 1.0 / n);
  double prevI = 0.0, prev = 0.0;
  for (int j = 1; j <= n; ++j) {
    double I = inv_integral_to(double(j) / n);
    double u = n * (I - prevI);
    u = clamp01(std::max(u, prev));  // guard roundoff; exact math is already monotone
    pos[j - 1] = u;
    prev = u;
    prevI = I;
  }
  return piecewise_constant(std::move(pos), std::move(hts));
}

ExitFunction ExitFunction::tilted(double t) const {
  if (t < 0 || t > 1) throw Error("BadConstruction", "tilt parameter outside [0,1]");
  if (t == 1.0) return *this;
  double B = mean_of_inverse();
  if (t == 0.0) return unit_step(B);
  return inverse().affine(1.0, 0.0, t, (1.0 - t) * B).inverse();
}

nlohmann::json ExitFunction::to_json() const {
  nlohmann::json j = impl_->json();
  j["inverted"] = inv_;
  return j;
}

ExitFunction ExitFunction::from_json(const nlohmann::json& j) {
  std::string type = j.at("type");
  ExitFunction h;
  if (type == "pc")
    h = piecewise_constant(j.at("positions").get<std::vector<double>>(),
                           j.at("heights").get<std::vector<double>>());
  else if (type == "pl")
    h = piecewise_linear(j.at("xs").get<std::vector<double>>(),
                         j.at("ys").get<std::vector<double>>());
  else if (type == "affine") {
    ExitFunction base = from_json(j.at("base"));
    h = base.affine(j.at("in")[0], j.at("in")[1], j.at("out")[0], j.at("out")[1]);
  } else
    throw Error("UnsupportedRep", "cannot reconstruct analytic functions from JSON");
  if (j.value("inverted", false)) h = h.inverse();
  return h;
}

std::pair<double, double> RescaleMap::to_unit(double u, double v) const {
  double uu = (u - u0) / su;
  double vv = flip_v ? (v0 - v) / sv : (v - v0) / sv;
  return {uu, vv};
}

std::pair<double, double> RescaleMap::from_unit(double uu, double vv) const {
  double u = u0 + su * uu;
  double v = flip_v ? v0 - sv * vv : v0 + sv * vv;
  return {u, v};
}

std::tuple<ExitFunction, ExitFunction, RescaleMap> rescale_to_box(const ExitFunction& hf,
                                                                  const ExitFunction& hg,
                                                                  std::pair<double, double> lo,
                                                                  std::pair<double, double> hi) {
  double du = hi.first - lo.first, dv = hi.second - lo.second;
  if (du < 1e-12 || dv < 1e-12) throw Error("DegenerateBox", "box side below 1e-12");
  ExitFunction hf_t = hf.affine(du, lo.first, 1.0 / dv, -lo.second / dv);
  ExitFunction hg_t = hg.affine(dv, lo.second, 1.0 / du, -lo.first / du);
  RescaleMap map{lo.first, lo.second, du, dv, false};
  return {hf_t, hg_t, map};
}

}  // namespace scw
