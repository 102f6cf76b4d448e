#pragma once
#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "scw/exitfn.hpp"
#include "scw/potential.hpp"

namespace scw {

struct QuadratureConfig {
  int gh_order = 61;
  double tol = 1e-10;
  int mc_samples = 1000000;
  std::uint64_t mc_seed = 0xC0DE;
};

// Edge-perspective degree polynomial: value(y) = sum_i c_i y^{i-1},
// stored as (node degree i, coefficient) terms.
struct DegreeDist {
  std::vector<std::pair<int, double>> terms;

  static DegreeDist single(int degree);
  static DegreeDist from_coeff_array(const std::vector<double>& by_degree);

  double value(double y) const;
  double integral(double y) const;  // sum c_i y^i / i
  bool single_term() const { return terms.size() == 1; }
  int max_degree() const;
  std::vector<double> coeff_array() const;
  void validate() const;  // BadPolynomial on bad coefficients
};

// --- erasure channel -------------------------------------------------------

// hf(y) = eps * lambda(y), hg(x) = 1 - rho(1-x)
std::pair<ExitFunction, ExitFunction> bec_pair(const DegreeDist& lambda,
                                               const DegreeDist& rho, double eps);

// area-balance threshold from the exact polynomial potential
double bec_maxwell_threshold(const DegreeDist& lambda, const DegreeDist& rho);

ParametrizedFamily bec_family(const DegreeDist& lambda, const DegreeDist& rho);

// --- hard-decision message passing -----------------------------------------

// hg(x) = (1-(1-2x)^{dr-1})/2, hf(y) = eps(1-(1-y)^{dl-1}) + (1-eps) y^{dl-1}
std::pair<ExitFunction, ExitFunction> gallager_a_pair(int dl, int dr, double eps);
ParametrizedFamily gallager_a_family(int dl, int dr);

struct BPolicy {
  bool optimal = false;
  int b = 0;  // used when !optimal
  static BPolicy fixed(int b) { return {false, b}; }
  static BPolicy best() { return {true, 0}; }
};

std::pair<ExitFunction, ExitFunction> gallager_b_pair(int dl, int dr, BPolicy policy,
                                                      double eps);
ParametrizedFamily gallager_b_family(int dl, int dr, BPolicy policy);

// --- multiuser detection ----------------------------------------------------

// g(x) = E (1 - tanh(x + sqrt(x) xi))^2 over xi ~ N(0,1)
double cdma_g(double x, const QuadratureConfig& q = {});

// smallest load with three fixed points for some noise level:
// 1 / max_x x^2 |g'(x)|
double cdma_alpha_crit(const QuadratureConfig& q = {});

struct CanonicalPair {
  ExitFunction hf, hg;
  RescaleMap map;  // crossing box in canonical coordinates (identity if fewer
                   // than two nontrivial crossings)
};

// Raw pair hf(u) = alpha g(u) + sigma2, hg(v) = 1/v on (0,inf), compactified
// to the unit square by u -> u/(1+u) and v -> 1/(1+v); hg becomes the identity.
CanonicalPair cdma_pair(double alpha, double sigma2, const QuadratureConfig& q = {});

// integral of (hf_raw(z) - 1/z) between the outermost raw crossings
double cdma_saturation_integral(double alpha, double sigma2,
                                const QuadratureConfig& q = {});

// --- compressed sensing -----------------------------------------------------

struct CsPrior {
  enum class Kind { BernoulliGaussian, DiscreteMass } kind = Kind::BernoulliGaussian;
  double p = 0.1;                               // sparsity of the Gaussian spike
  std::vector<std::pair<double, double>> atoms;  // (value, prob) for DiscreteMass

  static CsPrior bernoulli_gaussian(double p);
  static CsPrior discrete(std::vector<std::pair<double, double>> atoms);
  double second_moment() const;
  void validate() const;  // PriorUnsupported
};

// scalar mmse of X from Y = sqrt(s) X + Z, Z ~ N(0,1)
double mmse(const CsPrior& prior, double s);

// Raw pair hf(u) = sigma2 + (1/delta) mmse(u), hg(v) = 1/v, compactified by
// u -> 1/(1+u) and v -> v/(1+v) so perfect reconstruction sits at the origin.
CanonicalPair cs_pair(const CsPrior& prior, double delta, double sigma2,
                      const QuadratureConfig& q = {});

// --- Gaussian-approximation EXIT models --------------------------------------

// entropy of a symmetric Gaussian with mean m: E log2(1 + e^{-L}), L ~ N(m, 2m)
double psi(double m);
double psi_inv(double h);

// hg(x) = 1 - sum_i rho_i psi((i-1) psi_inv(1-x))
// hf(y) = sum_i lambda_i psi((i-1) psi_inv(y) + psi_inv(c))
std::pair<ExitFunction, ExitFunction> bawgn_exit_pair(const DegreeDist& lambda,
                                                      const DegreeDist& rho, double c);
ParametrizedFamily bawgn_family(const DegreeDist& lambda, const DegreeDist& rho);

// error-probability pair for min-magnitude decoding, in doubled coordinates
// (error probabilities in [0,1/2] scaled onto [0,1])
std::pair<ExitFunction, ExitFunction> minsum_exit_pair(int dl, int dr, double c_err);
ParametrizedFamily minsum_family(int dl, int dr);

double minsum_h_to_cerr(double h);
// check-node error by quadrature over the magnitude distribution; agrees with
// the sign-statistic closed form and asserts so internally
double minsum_check_error_by_quadrature(int dr, double x);
double minsum_check_error_mc(int dr, double x, int samples, std::uint64_t seed);

// --- JSON model description ---------------------------------------------------

struct ModelSpec {
  nlohmann::json raw;

  static ModelSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const { return raw; }

  std::string family_name() const;
  std::string knob_role() const;  // "epsilon", "sigma2", or "entropy"
  // knob-parametrized family (threshold searches); unsupported for cdma/cs
  ParametrizedFamily family() const;
  // pair at a given knob value, canonical coordinates
  std::pair<ExitFunction, ExitFunction> pair_at(double knob) const;
};

}  // namespace scw
