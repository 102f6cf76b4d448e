#include "scw/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <random>

#include "scw/numerics.hpp"

namespace scw {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.6931471805599453;

double sq(double x) { return x * x; }

// x^(1/k) for odd k, sign-preserving
double odd_root(double x, int k) {
  return std::copysign(std::pow(std::abs(x), 1.0 / k), x);
}
}  // namespace

// --- degree distributions ----------------------------------------------------

DegreeDist DegreeDist::single(int degree) { return {{{degree, 1.0}}}; }

DegreeDist DegreeDist::from_coeff_array(const std::vector<double>& by_degree) {
  DegreeDist d;
  for (size_t i = 0; i < by_degree.size(); ++i)
    if (by_degree[i] != 0.0) d.terms.push_back({static_cast<int>(i), by_degree[i]});
  d.validate();
  return d;
}

void DegreeDist::validate() const {
  if (terms.empty()) throw Error("BadPolynomial", "no terms");
  double sum = 0;
  for (auto& [i, c] : terms) {
    if (i < 2) throw Error("BadPolynomial", "degrees must be >= 2");
    if (c < 0) throw Error("BadPolynomial", "negative coefficient");
    sum += c;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("BadPolynomial", "coefficients must sum to 1");
}

double DegreeDist::value(double y) const {
  double s = 0;
  for (auto& [i, c] : terms) s += c * std::pow(y, i - 1);
  return s;
}

double DegreeDist::integral(double y) const {
  double s = 0;
  for (auto& [i, c] : terms) s += c * std::pow(y, i) / i;
  return s;
}

int DegreeDist::max_degree() const {
  int m = 0;
  for (auto& [i, c] : terms) m = std::max(m, i);
  return m;
}

std::vector<double> DegreeDist::coeff_array() const {
  std::vector<double> a(max_degree() + 1, 0.0);
  for (auto& [i, c] : terms) a[i] = c;
  return a;
}

// --- erasure channel ---------------------------------------------------------

std::pair<ExitFunction, ExitFunction> bec_pair(const DegreeDist& lambda,
                                               const DegreeDist& rho, double eps) {
  lambda.validate();
  rho.validate();
  if (eps < 0 || eps > 1) throw Error("BadPolynomial", "erasure rate outside [0,1]");

  std::function<double(double)> hf_inv;
  if (lambda.single_term() && eps > 0) {
    int a = lambda.terms[0].first - 1;
    hf_inv = [a, eps](double v) { return std::pow(std::min(v / eps, 1.0), 1.0 / a); };
  }
  ExitFunction hf = ExitFunction::analytic(
      [lambda, eps](double y) { return eps * lambda.value(y); }, hf_inv, "bec_hf",
      {eps});

  std::function<double(double)> hg_inv;
  if (rho.single_term()) {
    int b = rho.terms[0].first - 1;
    hg_inv = [b](double u) { return 1.0 - std::pow(1.0 - u, 1.0 / b); };
  }
  ExitFunction hg = ExitFunction::analytic(
      [rho](double x) { return 1.0 - rho.value(1.0 - x); }, hg_inv, "bec_hg", {});
  return {hf, hg};
}

double bec_maxwell_threshold(const DegreeDist& lambda, const DegreeDist& rho) {
  auto u_of_v = [&](double v) { return 1.0 - rho.value(1.0 - v); };
  auto eps_of_v = [&](double v) {
    double lu = lambda.value(u_of_v(v));
    return lu > 1e-300 ? v / lu : kInf;
  };
  // signed potential at the crossing parametrized by its v-coordinate
  auto bal = [&](double v) {
    double u = u_of_v(v);
    double e = eps_of_v(v);
    if (!std::isfinite(e)) return kInf;
    double int_hg = v - (rho.integral(1.0) - rho.integral(1.0 - v));
    double int_hf = e * lambda.integral(u);
    return u * v - int_hg - int_hf;
  };

  auto [vt, et] = golden_min(eps_of_v, 1e-9, 1.0 - 1e-9, 1e-9, 2048);
  (void)et;

  const int n = 4096;
  const double lo = vt + 1e-9, hi = 1.0 - 1e-12;
  double best = kInf;
  double prev_v = lo, prev_f = bal(prev_v);
  for (int i = 1; i <= n; ++i) {
    double v = lo + (hi - lo) * i / n;
    double f = bal(v);
    if (std::isfinite(prev_f) && std::isfinite(f) && (prev_f < 0) != (f < 0)) {
      double a = prev_v, b = v, fa = prev_f;
      for (int it = 0; it < 100 && b - a > 1e-13; ++it) {
        double m = 0.5 * (a + b), fm = bal(m);
        if ((fa < 0) == (fm < 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      double e = eps_of_v(0.5 * (a + b));
      if (e >= 0 && e <= 1) best = std::min(best, e);
    }
    prev_v = v;
    prev_f = f;
  }
  if (!std::isfinite(best))
    throw Error("NoSaturation", "no area balance point for this ensemble");
  return best;
}

ParametrizedFamily bec_family(const DegreeDist& lambda, const DegreeDist& rho) {
  lambda.validate();
  rho.validate();
  ParametrizedFamily fam;
  fam.name = "bec";
  fam.bracket_lo = 1e-3;
  fam.bracket_hi = 0.999;
  fam.pair_at = [lambda, rho](double eps) { return bec_pair(lambda, rho, eps); };
  fam.de_map = [lambda, rho](double x, double eps) {
    return eps * lambda.value(1.0 - rho.value(1.0 - x));
  };
  fam.closed_form_coupled = [lambda, rho]() {
    return bec_maxwell_threshold(lambda, rho);
  };
  return fam;
}

// --- hard-decision message passing --------------------------------------------

namespace {

// P(Binomial(n, y) >= t)
double binom_tail(int n, int t, double y) {
  if (t <= 0) return 1.0;
  if (t > n) return 0.0;
  double s = 0, c = 1;
  for (int k = 0; k < t; ++k) c *= double(n - k) / (k + 1);  // C(n,t) running
  // sum upward from k = t
  double term = c * std::pow(y, t) * std::pow(1.0 - y, n - t);
  s = term;
  for (int k = t + 1; k <= n; ++k) {
    c *= double(n - k + 1) / k;
    double tk = c * std::pow(y, k) * std::pow(1.0 - y, n - k);
    s += tk;
  }
  return s;
}

double gallager_check(double x, int dr) {
  return 0.5 * (1.0 - std::pow(1.0 - 2.0 * x, dr - 1));
}

double gallager_check_inv(double u, int dr) {
  return 0.5 * (1.0 - odd_root(1.0 - 2.0 * u, dr - 1));
}

double gallager_b_var(double y, int dl, int b, double eps) {
  return (1.0 - eps) * binom_tail(dl - 1, b, y) + eps * binom_tail(dl - 1, dl - b, y);
}

std::vector<int> admissible_b(int dl) {
  std::vector<int> bs;
  for (int b = (dl - 1 + 1) / 2; b <= dl - 1; ++b) bs.push_back(b);
  return bs;
}

double gallager_b_var_opt(double y, int dl, double eps) {
  double best = kInf;
  for (int b : admissible_b(dl)) best = std::min(best, gallager_b_var(y, dl, b, eps));
  return best;
}

}  // namespace

std::pair<ExitFunction, ExitFunction> gallager_a_pair(int dl, int dr, double eps) {
  return gallager_b_pair(dl, dr, BPolicy::fixed(dl - 1), eps);
}

std::pair<ExitFunction, ExitFunction> gallager_b_pair(int dl, int dr, BPolicy policy,
                                                      double eps) {
  if (dl < 2 || dr < 2) throw Error("BadThresholdB", "node degrees must be >= 2");
  if (!policy.optimal && (policy.b < 1 || policy.b > dl - 1))
    throw Error("BadThresholdB", "fixed b outside [1, dl-1]");

  ExitFunction hf =
      policy.optimal
          ? ExitFunction::analytic(
                [dl, eps](double y) { return gallager_b_var_opt(y, dl, eps); }, nullptr,
                "galb_opt_hf", {double(dl), eps})
          : ExitFunction::analytic(
                [dl, b = policy.b, eps](double y) {
                  return gallager_b_var(y, dl, b, eps);
                },
                nullptr, "galb_hf", {double(dl), double(policy.b), eps});

  std::function<double(double)> hg_inv;
  if (dr % 2 == 0) hg_inv = [dr](double u) { return gallager_check_inv(u, dr); };
  ExitFunction hg = ExitFunction::analytic(
      [dr](double x) { return gallager_check(x, dr); }, hg_inv, "gal_hg", {double(dr)});
  return {hf, hg};
}

ParametrizedFamily gallager_a_family(int dl, int dr) {
  return gallager_b_family(dl, dr, BPolicy::fixed(dl - 1));
}

ParametrizedFamily gallager_b_family(int dl, int dr, BPolicy policy) {
  if (!policy.optimal && (policy.b < 1 || policy.b > dl - 1))
    throw Error("BadThresholdB", "fixed b outside [1, dl-1]");
  ParametrizedFamily fam;
  fam.name = policy.optimal ? "gallager_b_opt" : "gallager_b";
  fam.bracket_lo = 1e-3;
  fam.bracket_hi = 0.25;
  fam.chart_hi = 0.5;  // bit-error states above 1/2 are the all-wrong trap
  fam.pair_at = [dl, dr, policy](double eps) {
    return gallager_b_pair(dl, dr, policy, eps);
  };
  fam.de_map = [dl, dr, policy](double x, double eps) {
    double y = gallager_check(x, dr);
    return policy.optimal ? gallager_b_var_opt(y, dl, eps)
                          : gallager_b_var(y, dl, policy.b, eps);
  };
  if (policy.optimal) {
    // reference value for the state-adaptive decoder: the best fixed-b
    // threshold, each taken for a decoder started at x = eps (fixed-b charts
    // can cross at tiny eps in regions the started decoder never reaches)
    fam.closed_form_uncoupled = [dl, dr]() {
      double best = 0.0;
      for (int b : admissible_b(dl))
        best = std::max(best, iteration_threshold(gallager_b_family(dl, dr, BPolicy::fixed(b))));
      return best;
    };
  }
  return fam;
}

// --- multiuser detection -------------------------------------------------------

namespace {

double one_minus_tanh(double z) {
  if (z >= 0) {
    double e = std::exp(-2.0 * z);
    return 2.0 * e / (1.0 + e);
  }
  return 2.0 / (1.0 + std::exp(2.0 * z));
}

const GaussHermite& gh_default() {
  static GaussHermite gh(61);
  return gh;
}

double gh_expect(const QuadratureConfig& q, const std::function<double(double)>& f) {
  if (q.gh_order == 61) return gh_default().expect(f);
  GaussHermite gh(q.gh_order);
  return gh.expect(f);
}

}  // namespace

double cdma_g(double x, const QuadratureConfig& q) {
  if (x <= 0) return 1.0;
  double r = x, sx = std::sqrt(x);
  double val = gh_expect(q, [r, sx](double xi) { return sq(one_minus_tanh(r + sx * xi)); });
  if (!std::isfinite(val)) throw Error("QuadratureFailure", "tanh expectation not finite");
  return val;
}

double cdma_alpha_crit(const QuadratureConfig& q) {
  auto neg_obj = [&](double x) {
    double h = 1e-5 * std::max(1.0, x);
    double gp = (cdma_g(x + h, q) - cdma_g(x - h, q)) / (2 * h);
    return -(x * x * std::abs(gp));
  };
  auto [xstar, val] = golden_min(neg_obj, 0.05, 30.0, 1e-6, 512);
  (void)xstar;
  return 1.0 / (-val);
}

namespace {

RescaleMap crossing_box_map(const ExitFunction& hf, const ExitFunction& hg) {
  auto cr = crossings(hf, hg);
  std::vector<Crossing> nt(cr.begin() + 1, cr.end() - 1);
  if (nt.size() < 2) return {0.0, 0.0, 1.0, 1.0, false};
  return {nt.front().u, nt.front().v, nt.back().u - nt.front().u,
          nt.back().v - nt.front().v, false};
}

}  // namespace

CanonicalPair cdma_pair(double alpha, double sigma2, const QuadratureConfig& q) {
  if (alpha <= 0 || sigma2 < 0) throw Error("QuadratureFailure", "bad load or noise");
  ExitFunction hf = ExitFunction::analytic(
      [alpha, sigma2, q](double uu) {
        double u = uu >= 1.0 - 1e-15 ? 1e15 : uu / (1.0 - uu);
        return 1.0 / (1.0 + alpha * cdma_g(u, q) + sigma2);
      },
      nullptr, "cdma_hf", {alpha, sigma2});
  ExitFunction hg = ExitFunction::identity();
  return {hf, hg, crossing_box_map(hf, hg)};
}

double cdma_saturation_integral(double alpha, double sigma2, const QuadratureConfig& q) {
  auto theta = [&](double z) { return 1.0 / z - alpha * cdma_g(z, q) - sigma2; };
  std::vector<double> roots;
  const int n = 2000;
  double prev_z = 1e-6, prev_f = theta(prev_z);
  for (int i = 1; i <= n; ++i) {
    double z = std::pow(10.0, -6.0 + 12.0 * i / n);
    double f = theta(z);
    if ((prev_f < 0) != (f < 0)) {
      double a = prev_z, b = z, fa = prev_f;
      for (int it = 0; it < 200 && (b - a) > 1e-13 * b; ++it) {
        double m = 0.5 * (a + b), fm = theta(m);
        if ((fa < 0) == (fm < 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_z = z;
    prev_f = f;
  }
  if (roots.size() < 2) return 0.0;
  double z1 = roots.front(), z2 = roots.back();
  return integrate([&](double z) { return alpha * cdma_g(z, q) + sigma2 - 1.0 / z; },
                   z1, z2, 1e-11);
}

// --- compressed sensing ---------------------------------------------------------

CsPrior CsPrior::bernoulli_gaussian(double p) {
  CsPrior pr;
  pr.kind = Kind::BernoulliGaussian;
  pr.p = p;
  pr.validate();
  return pr;
}

CsPrior CsPrior::discrete(std::vector<std::pair<double, double>> atoms) {
  CsPrior pr;
  pr.kind = Kind::DiscreteMass;
  pr.atoms = std::move(atoms);
  pr.validate();
  return pr;
}

void CsPrior::validate() const {
  if (kind == Kind::BernoulliGaussian) {
    if (!(p > 0 && p <= 1)) throw Error("PriorUnsupported", "sparsity outside (0,1]");
    return;
  }
  if (kind == Kind::DiscreteMass) {
    if (atoms.empty()) throw Error("PriorUnsupported", "no atoms");
    double s = 0;
    for (auto& [v, pr] : atoms) {
      if (pr < 0) throw Error("PriorUnsupported", "negative atom mass");
      s += pr;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error("PriorUnsupported", "atom masses must sum to 1");
    return;
  }
  throw Error("PriorUnsupported", "unknown prior kind");
}

double CsPrior::second_moment() const {
  if (kind == Kind::BernoulliGaussian) return p;
  double s = 0;
  for (auto& [v, pr] : atoms) s += pr * v * v;
  return s;
}

namespace {

double mmse_bernoulli_gaussian(double p, double s) {
  if (s <= 0) return p;
  // mmse = p - p * int n_{1+s}(y) * (s y^2/(1+s)^2) * pi(y) dy with
  // pi(y) = P(spike | y); even integrand, posterior written overflow-free
  const double v1 = 1.0 + s;
  auto integrand = [&](double y) {
    double dens = std::exp(-0.5 * y * y / v1) / std::sqrt(2.0 * M_PI * v1);
    double ratio = ((1.0 - p) / p) * std::sqrt(v1) * std::exp(-0.5 * y * y * s / v1);
    double pi = 1.0 / (1.0 + ratio);
    return dens * (s * y * y / (v1 * v1)) * pi;
  };
  double L = 12.0 * std::sqrt(v1);
  double captured = 2.0 * integrate(integrand, 0.0, L, 1e-13);
  return p - p * captured;
}

double mmse_discrete(const std::vector<std::pair<double, double>>& atoms, double s) {
  double ex = 0, ex2 = 0;
  for (auto& [a, pr] : atoms) {
    ex += pr * a;
    ex2 += pr * a * a;
  }
  if (s <= 0) return ex2 - ex * ex;
  double rs = std::sqrt(s);
  double lo = kInf, hi = -kInf;
  for (auto& [a, pr] : atoms) {
    lo = std::min(lo, rs * a);
    hi = std::max(hi, rs * a);
  }
  auto post_sq = [&](double y) {
    double num = 0, den = 0, emax = -kInf;
    for (auto& [a, pr] : atoms) emax = std::max(emax, -0.5 * sq(y - rs * a));
    for (auto& [a, pr] : atoms) {
      double w = pr * std::exp(-0.5 * sq(y - rs * a) - emax);
      num += w * a;
      den += w;
    }
    double mean = num / den;
    // den carries the shifted mixture density; restore the true scale
    double mix = den * std::exp(emax) / std::sqrt(2.0 * M_PI);
    return mean * mean * mix;
  };
  double e_post2 = integrate(post_sq, lo - 12.0, hi + 12.0, 1e-13);
  return ex2 - e_post2;
}

}  // namespace

double mmse(const CsPrior& prior, double s) {
  prior.validate();
  if (prior.kind == CsPrior::Kind::BernoulliGaussian)
    return mmse_bernoulli_gaussian(prior.p, s);
  return mmse_discrete(prior.atoms, s);
}

CanonicalPair cs_pair(const CsPrior& prior, double delta, double sigma2,
                      const QuadratureConfig& q) {
  (void)q;
  prior.validate();
  if (!(delta > 0 && delta <= 1)) throw Error("PriorUnsupported", "delta outside (0,1]");
  ExitFunction hf = ExitFunction::analytic(
      [prior, delta, sigma2](double uu) {
        double u = uu <= 1e-15 ? 1e15 : (1.0 - uu) / uu;
        double w = sigma2 + mmse(prior, u) / delta;
        return w / (1.0 + w);
      },
      nullptr, "cs_hf", {delta, sigma2});
  ExitFunction hg = ExitFunction::identity();
  return {hf, hg, crossing_box_map(hf, hg)};
}

// --- Gaussian-approximation EXIT models -------------------------------------------

namespace {

double psi_raw(double m, const GaussHermite& gh) {
  double sm = std::sqrt(2.0 * m);
  return gh.expect([&](double x) {
    double L = m + sm * x;
    return (std::max(-L, 0.0) + std::log1p(std::exp(-std::abs(L)))) / kLn2;
  });
}

struct PsiTable {
  std::vector<double> lnm, h;      // forward knots, h strictly decreasing
  std::vector<double> h_up, lnm_up;  // strictly increasing inverse knots
  std::unique_ptr<Pchip> fwd, inv;
  double m_lo = 1e-6, m_hi = 1e3;
  double h_at_mlo = 0, h_at_mhi = 0;

  PsiTable() {
    GaussHermite gh(61);
    const int n = 10000;
    lnm.resize(n);
    h.resize(n);
    double a = std::log(m_lo), b = std::log(m_hi);
    for (int i = 0; i < n; ++i) {
      lnm[i] = a + (b - a) * i / (n - 1);
      h[i] = psi_raw(std::exp(lnm[i]), gh);
    }
    h_at_mlo = h.front();
    h_at_mhi = h.back();
    fwd = std::make_unique<Pchip>(lnm, h);
    // inverse knots: strictly decreasing stretch only (the deep tail flattens
    // out in double precision)
    for (int i = n - 1; i >= 0; --i) {
      if (!h_up.empty() && h[i] <= h_up.back()) continue;
      h_up.push_back(h[i]);
      lnm_up.push_back(lnm[i]);
    }
    inv = std::make_unique<Pchip>(h_up, lnm_up);
  }
};

const PsiTable& psi_table() {
  static PsiTable t;
  return t;
}

}  // namespace

double psi(double m) {
  const PsiTable& t = psi_table();
  if (m <= 0) return 1.0;
  if (m < t.m_lo) return 1.0 - m / (4.0 * kLn2);
  if (m >= t.m_hi) return 0.0;
  return clamp01((*t.fwd)(std::log(m)));
}

double psi_inv(double h) {
  const PsiTable& t = psi_table();
  if (h >= 1.0) return 0.0;
  if (h > t.h_at_mlo) return (1.0 - h) * 4.0 * kLn2;
  if (h <= t.h_up.front()) return t.m_hi;
  return std::exp((*t.inv)(h));
}

std::pair<ExitFunction, ExitFunction> bawgn_exit_pair(const DegreeDist& lambda,
                                                      const DegreeDist& rho, double c) {
  lambda.validate();
  rho.validate();
  if (!(c > 0 && c < 1)) throw Error("BadPolynomial", "channel entropy outside (0,1)");
  psi_table();  // build the shared cache before any closure runs

  double mc = psi_inv(c);
  std::function<double(double)> hf_inv;
  if (lambda.single_term()) {
    int i = lambda.terms[0].first;
    hf_inv = [i, mc](double u) {
      return psi(std::max(psi_inv(u) - mc, 0.0) / (i - 1));
    };
  }
  ExitFunction hf = ExitFunction::analytic(
      [lambda, mc](double y) {
        double my = psi_inv(y);
        double s = 0;
        for (auto& [i, co] : lambda.terms) s += co * psi((i - 1) * my + mc);
        return s;
      },
      hf_inv, "bawgn_hf", {c});

  std::function<double(double)> hg_inv;
  if (rho.single_term()) {
    int i = rho.terms[0].first;
    hg_inv = [i](double u) { return 1.0 - psi(psi_inv(1.0 - u) / (i - 1)); };
  }
  ExitFunction hg = ExitFunction::analytic(
      [rho](double x) {
        double mx = psi_inv(1.0 - x);
        double s = 0;
        for (auto& [i, co] : rho.terms) s += co * psi((i - 1) * mx);
        return 1.0 - s;
      },
      hg_inv, "bawgn_hg", {});
  return {hf, hg};
}

ParametrizedFamily bawgn_family(const DegreeDist& lambda, const DegreeDist& rho) {
  lambda.validate();
  rho.validate();
  ParametrizedFamily fam;
  fam.name = "bawgn_exit";
  fam.bracket_lo = 0.1;
  fam.bracket_hi = 0.9;
  fam.pair_at = [lambda, rho](double c) { return bawgn_exit_pair(lambda, rho, c); };
  fam.de_map = [lambda, rho](double x, double c) {
    double mx = psi_inv(1.0 - x);
    double y = 0;
    for (auto& [i, co] : rho.terms) y += co * psi((i - 1) * mx);
    y = 1.0 - y;
    double my = psi_inv(y), mc = psi_inv(c), out = 0;
    for (auto& [i, co] : lambda.terms) out += co * psi((i - 1) * my + mc);
    return out;
  };
  return fam;
}

// --- min-magnitude decoding ----------------------------------------------------

namespace {

// symmetric-Gaussian mean matching error probability e = Q(sqrt(m/2))
double msg_mean(double e) {
  if (e >= 0.5) return 0.0;
  double t = norm_qinv(std::max(e, 1e-300));  // erfc_inv overflows at exactly 0
  return 2.0 * t * t;
}

double minsum_var(double ytilde, int dl, double m_ch, const DegreeDist& lambda) {
  double m = msg_mean(0.5 * ytilde);
  double s = 0;
  for (auto& [i, co] : lambda.terms) s += co * norm_q(std::sqrt((m_ch + (i - 1) * m) / 2.0));
  return 2.0 * s;
}

}  // namespace

double minsum_check_error_by_quadrature(int dr, double x) {
  if (dr < 2) throw Error("BadThresholdB", "check degree must be >= 2");
  double closed = 0.5 * (1.0 - std::pow(1.0 - 2.0 * x, dr - 1));
  if (x <= 1e-12 || x >= 0.5 - 1e-12) return closed;
  double m = msg_mean(x), sd = std::sqrt(2.0 * m);
  // magnitude average of the per-message sign reliability tanh(t/2)
  auto integrand = [&](double t) {
    double pdfs = norm_pdf((t - m) / sd) / sd + norm_pdf((t + m) / sd) / sd;
    return pdfs * std::tanh(0.5 * t);
  };
  double tau = integrate(integrand, 0.0, m + 14.0 * sd, 1e-12);
  if (std::abs(tau - (1.0 - 2.0 * x)) > 1e-8)
    throw Error("QuadratureFailure", "magnitude quadrature disagrees with sign statistic");
  return 0.5 * (1.0 - std::pow(tau, dr - 1));
}

double minsum_check_error_mc(int dr, double x, int samples, std::uint64_t seed) {
  double m = msg_mean(x), sd = std::sqrt(2.0 * m);
  std::mt19937_64 rng(seed);
  auto uniform = [&]() { return (rng() >> 11) * 0x1.0p-53; };
  int odd = 0;
  for (int s = 0; s < samples; ++s) {
    bool parity = false;
    for (int j = 0; j < dr - 1; ++j) {
      double u1 = std::max(uniform(), 1e-300), u2 = uniform();
      double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      parity ^= (m + sd * z) < 0;
    }
    odd += parity;
  }
  return double(odd) / samples;
}

std::pair<ExitFunction, ExitFunction> minsum_exit_pair(int dl, int dr, double c_err) {
  if (dl < 2 || dr < 2) throw Error("BadThresholdB", "node degrees must be >= 2");
  if (!(c_err > 0 && c_err < 0.5))
    throw Error("BadPolynomial", "channel error outside (0, 1/2)");
  psi_table();

  // doubled coordinates: error probabilities in [0, 1/2] live on [0, 1]
  double m_ch = msg_mean(c_err);
  DegreeDist lambda = DegreeDist::single(dl);
  std::function<double(double)> hf_inv = [dl, m_ch](double u) {
    double t = norm_qinv(std::clamp(0.5 * u, 1e-300, 0.5 - 1e-16));
    double m = (2.0 * t * t - m_ch) / (dl - 1);
    if (m <= 0) return 1.0;
    return 2.0 * norm_q(std::sqrt(m / 2.0));
  };
  ExitFunction hf = ExitFunction::analytic(
      [dl, m_ch, lambda](double y) { return minsum_var(y, dl, m_ch, lambda); }, hf_inv,
      "minsum_hf", {c_err});

  // sign-statistic rule; a few spot values are re-derived by magnitude
  // quadrature as a consistency gate
  for (double x : {0.05, 0.2, 0.4}) {
    double q = minsum_check_error_by_quadrature(dr, x);
    double closed = 0.5 * (1.0 - std::pow(1.0 - 2.0 * x, dr - 1));
    if (std::abs(q - closed) > 1e-8)
      throw Error("QuadratureFailure", "check rule routes disagree");
  }
  ExitFunction hg = ExitFunction::analytic(
      [dr](double xt) { return 1.0 - std::pow(1.0 - xt, dr - 1); },
      [dr](double u) { return 1.0 - std::pow(1.0 - u, 1.0 / (dr - 1)); }, "minsum_hg",
      {double(dr)});
  return {hf, hg};
}

double minsum_h_to_cerr(double h) { return norm_q(std::sqrt(psi_inv(h) / 2.0)); }

ParametrizedFamily minsum_family(int dl, int dr) {
  if (dl < 2 || dr < 2) throw Error("BadThresholdB", "node degrees must be >= 2");
  ParametrizedFamily fam;
  fam.name = "minsum_exit";
  fam.bracket_lo = 0.1;
  fam.bracket_hi = 0.9;
  fam.pair_at = [dl, dr](double h) { return minsum_exit_pair(dl, dr, minsum_h_to_cerr(h)); };
  fam.de_map = [dl, dr, lambda = DegreeDist::single(dl)](double xt, double h) {
    double yt = 1.0 - std::pow(1.0 - xt, dr - 1);
    return minsum_var(yt, dl, msg_mean(minsum_h_to_cerr(h)), lambda);
  };
  return fam;
}

// --- JSON model description -------------------------------------------------------

namespace {

DegreeDist dd_from(const nlohmann::json& j, const char* key) {
  return DegreeDist::from_coeff_array(j.at(key).get<std::vector<double>>());
}

CsPrior prior_from(const nlohmann::json& j) {
  if (!j.contains("prior")) return CsPrior::bernoulli_gaussian(0.1);
  const auto& p = j.at("prior");
  std::string type = p.at("type");
  if (type == "bernoulli_gaussian") return CsPrior::bernoulli_gaussian(p.at("p"));
  if (type == "discrete")
    return CsPrior::discrete(p.at("atoms").get<std::vector<std::pair<double, double>>>());
  throw Error("PriorUnsupported", "unknown prior type: " + type);
}

BPolicy bpolicy_from(const nlohmann::json& j) {
  if (!j.contains("b"))
    throw Error("BadThresholdB", "gallager_b needs \"b\": an integer or \"optimal\"");
  const auto& b = j.at("b");
  if (b.is_string()) {
    if (b.get<std::string>() == "optimal") return BPolicy::best();
    throw Error("BadThresholdB", "b must be an integer or \"optimal\"");
  }
  return BPolicy::fixed(b.get<int>());
}

}  // namespace

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec m;
  m.raw = j;
  std::string fam = j.at("family");
  const char* known[] = {"bec", "gallager_a", "gallager_b", "cdma", "cs", "bawgn", "minsum"};
  if (std::find_if(std::begin(known), std::end(known),
                   [&](const char* k) { return fam == k; }) == std::end(known))
    throw Error("BadModel", "unknown family: " + fam);
  m.family();  // validate eagerly (cdma/cs validate their own parameters)
  return m;
}

std::string ModelSpec::family_name() const { return raw.at("family"); }

std::string ModelSpec::knob_role() const {
  std::string f = family_name();
  if (f == "cdma" || f == "cs") return "sigma2";
  if (f == "bawgn" || f == "minsum") return "entropy";
  return "epsilon";
}

ParametrizedFamily ModelSpec::family() const {
  std::string f = family_name();
  if (f == "bec") return bec_family(dd_from(raw, "lambda"), dd_from(raw, "rho"));
  if (f == "gallager_a") return gallager_a_family(raw.at("dl"), raw.at("dr"));
  if (f == "gallager_b")
    return gallager_b_family(raw.at("dl"), raw.at("dr"), bpolicy_from(raw));
  if (f == "bawgn") return bawgn_family(dd_from(raw, "lambda"), dd_from(raw, "rho"));
  if (f == "minsum") return minsum_family(raw.at("dl"), raw.at("dr"));
  if (f == "cdma") {
    double alpha = raw.at("alpha");
    ParametrizedFamily fam;
    fam.name = "cdma";
    fam.bracket_lo = 1e-4;
    fam.bracket_hi = 10.0;
    fam.pair_at = [alpha](double s2) {
      auto cp = cdma_pair(alpha, s2);
      return std::make_pair(cp.hf, cp.hg);
    };
    return fam;
  }
  if (f == "cs") {
    CsPrior prior = prior_from(raw);
    double delta = raw.at("delta");
    ParametrizedFamily fam;
    fam.name = "cs";
    fam.bracket_lo = 0.0;
    fam.bracket_hi = 10.0;
    fam.pair_at = [prior, delta](double s2) {
      auto cp = cs_pair(prior, delta, s2);
      return std::make_pair(cp.hf, cp.hg);
    };
    return fam;
  }
  throw Error("BadModel", "unknown family: " + f);
}

std::pair<ExitFunction, ExitFunction> ModelSpec::pair_at(double knob) const {
  return family().pair_at(knob);
}

}  // namespace scw
